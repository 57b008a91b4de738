"""QAOA on the independent-set subspace.

Two equivalent parametrizations are supported:

* alternating form: ``exp(-i b_p H_Q) prod_k exp(-i g_k H_P) exp(-i b_k H_Q)``
  with ``H_Q`` the projected drive and ``H_P = -Delta * |s|``;
* pulse form: ``prod_k exp(-i t_k H_k)`` with ``H_k`` a resonant drive of
  phase ``phi_k`` (``e^{i phi_k}`` on ``|0><1|``), ``phi_k = sum_{j>=k} g_j``.

The pulse form with this phase convention reproduces the alternating state up
to complex conjugation and the parity sign ``(-1)^|s|``, so every measurement
probability (and hence the objective) coincides.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .evolve import expm_multiply_fixed
from .subspace import ISBasis, ProjectedHamiltonian, dense_matrix

__all__ = [
    "HEURISTIC_SEED_P3",
    "LevelResult",
    "OptResult",
    "OptimizerConfig",
    "PulseParams",
    "QAOAParams",
    "from_pulse_params",
    "heuristic_schedule_optimize",
    "interpolate_params",
    "minimize",
    "nelder_mead",
    "objective_fp",
    "pad_params",
    "qaoa_state",
    "qaoa_state_pulses",
    "quasi_newton_fd",
    "random_params",
    "to_pulse_params",
]

# averaged optimum at p = 3, (g1, g2, b1, b2, b3), known to two decimals
HEURISTIC_SEED_P3 = (1.73, -1.77, 0.19, 1.02, 0.39)


@dataclass(frozen=True)
class QAOAParams:
    gammas: tuple[float, ...]
    betas: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "gammas", tuple(float(x) for x in self.gammas))
        object.__setattr__(self, "betas", tuple(float(x) for x in self.betas))
        if len(self.betas) < 1 or len(self.gammas) != len(self.betas) - 1:
            raise ValueError(
                f"need len(gammas) == len(betas) - 1 >= 0, got {len(self.gammas)}, {len(self.betas)}"
            )

    @property
    def p(self) -> int:
        return len(self.betas)

    def to_vector(self) -> np.ndarray:
        return np.array(self.gammas + self.betas)

    @classmethod
    def from_vector(cls, x, p: int) -> "QAOAParams":
        x = np.asarray(x, dtype=float)
        if x.shape != (2 * p - 1,):
            raise ValueError(f"expected {2 * p - 1} parameters for p={p}, got {x.shape}")
        return cls(tuple(x[: p - 1]), tuple(x[p - 1 :]))

    def total_time(self) -> float:
        """Summed drive duration ``sum |b_k|`` (a negative duration is a
        pulse of the opposite sign, so it costs ``|b_k|``)."""
        return float(sum(abs(b) for b in self.betas))


@dataclass(frozen=True)
class PulseParams:
    durations: tuple[float, ...]
    phases: tuple[float, ...]

    def __post_init__(self):
        if len(self.durations) != len(self.phases):
            raise ValueError("durations and phases must have equal length")

    @property
    def p(self) -> int:
        return len(self.durations)


def to_pulse_params(q: QAOAParams) -> PulseParams:
    """``t_k = b_k``, ``phi_k = sum_{j >= k} g_j`` (so ``phi_p = 0``)."""
    phases = []
    acc = 0.0
    for g in reversed(q.gammas + (0.0,)):
        acc += g
        phases.append(acc)
    return PulseParams(q.betas, tuple(reversed(phases)))


def from_pulse_params(pp: PulseParams) -> QAOAParams:
    """Inverse of :func:`to_pulse_params`; the last phase is taken as the
    reference and subtracted from all of them."""
    ph = np.asarray(pp.phases, dtype=float) - pp.phases[-1]
    gammas = tuple(float(ph[k] - ph[k + 1]) for k in range(pp.p - 1))
    return QAOAParams(gammas, tuple(pp.durations))


def random_params(p: int, rng: np.random.Generator) -> QAOAParams:
    """Uniform draw: gammas in ``[-pi, pi)``, betas in ``[0, pi)``."""
    return QAOAParams(tuple(rng.uniform(-math.pi, math.pi, p - 1)), tuple(rng.uniform(0.0, math.pi, p)))


# -- state preparation ---------------------------------------------------------


class _DriveExp:
    """``exp(-i tau H)`` for a phased drive ``H = omega (e^{i phi} L + h.c.)``.

    ``method="taylor"`` uses the matrix-free Taylor kernel; ``"eig"`` reuses
    one eigendecomposition of the unphased drive ``X``.  A phase is a
    diagonal similarity: ``H(phi) = omega * P X P*`` with
    ``P = diag(e^{-i phi |s|})``, because ``L`` lowers ``|s|`` by one.
    """

    EIG_MAX_DIM = 1500

    def __init__(self, h: ProjectedHamiltonian, omega: float, method: str = "auto"):
        if method == "auto":
            method = "eig" if h.basis.dim <= self.EIG_MAX_DIM else "taylor"
        if method not in ("eig", "taylor"):
            raise ValueError(f"unknown method {method!r}")
        self.h = h
        self.omega = omega
        self.method = method
        self.sizes = h.basis.sizes.astype(float)
        if method == "eig":
            lam, vec = np.linalg.eigh(dense_matrix(h, 1.0, 0.0).real)
            self.lam, self.vec = lam * omega, vec

    def __call__(self, tau: float, psi: np.ndarray, phase: float = 0.0) -> np.ndarray:
        if self.method == "taylor":
            return expm_multiply_fixed(self.h, self.omega, 0.0, phase, tau, psi)
        if phase:
            rot = np.exp(-1j * phase * self.sizes)
            psi = np.conj(rot) * psi
        out = self.vec @ (np.exp(-1j * tau * self.lam) * (self.vec.T @ psi))
        if phase:
            out = rot * out
        return out


_CACHE_ATTR = "_drive_cache"


def _drive(h: ProjectedHamiltonian, omega: float, method: str) -> _DriveExp:
    cache = h.__dict__.setdefault(_CACHE_ATTR, {})
    key = (omega, method)
    if key not in cache:
        cache[key] = _DriveExp(h, omega, method)
    return cache[key]


def _e0(dim: int) -> np.ndarray:
    psi = np.zeros(dim, dtype=np.complex128)
    psi[0] = 1.0
    return psi


def qaoa_state(
    basis: ISBasis,
    h: ProjectedHamiltonian,
    q: QAOAParams,
    omega: float = 1.0,
    delta: float = 1.0,
    method: str = "auto",
) -> np.ndarray:
    """Alternating-operator state from the empty set."""
    if h.basis is not basis:
        raise ValueError("Hamiltonian was built for a different basis")
    drive = _drive(h, omega, method)
    cost_phase = delta * basis.sizes
    psi = _e0(basis.dim)
    for k in range(q.p):
        psi = drive(q.betas[k], psi)
        if k < q.p - 1:
            # exp(-i g H_P) with H_P = -delta |s|
            psi = np.exp(1j * q.gammas[k] * cost_phase) * psi
    return psi


def qaoa_state_pulses(
    basis: ISBasis,
    h: ProjectedHamiltonian,
    pp: PulseParams,
    omega: float = 1.0,
    method: str = "auto",
) -> np.ndarray:
    """Product of phased resonant pulses, first pulse applied first."""
    if h.basis is not basis:
        raise ValueError("Hamiltonian was built for a different basis")
    drive = _drive(h, omega, method)
    psi = _e0(basis.dim)
    for t, phi in zip(pp.durations, pp.phases):
        psi = drive(t, psi, phi)
    return psi


def objective_fp(psi: np.ndarray, basis: ISBasis, delta: float = 1.0) -> float:
    """``<H_P> = -delta * E|s|``."""
    probs = np.abs(psi) ** 2
    return -delta * float(probs @ basis.sizes)


# -- optimizers ----------------------------------------------------------------


@dataclass(frozen=True)
class OptimizerConfig:
    """``step_tol`` (delta) and ``objective_tol`` (epsilon) are the stopping
    tolerances.  ``gradient`` selects forward differences with increment
    ``fd_step`` (default: ``step_tol``) or central differences."""

    step_tol: float = 1e-6
    objective_tol: float = 1e-6
    max_evals: int = 200_000
    algorithm: str = "quasi_newton_fd"
    gradient: str = "central"
    fd_step: float | None = 1e-7
    simplex_step: float = 0.05

    def __post_init__(self):
        if not (self.step_tol > 0 and self.objective_tol > 0):
            raise ValueError("step_tol and objective_tol must be positive")
        if self.algorithm not in ("nelder_mead", "quasi_newton_fd"):
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if self.gradient not in ("forward", "central"):
            raise ValueError(f"unknown gradient mode {self.gradient!r}")
        if self.max_evals < 1:
            raise ValueError("max_evals must be positive")

    @classmethod
    def noisy(cls, **kw) -> "OptimizerConfig":
        """Measurement-noise defaults: eps = delta = 0.2, Nelder-Mead."""
        base = dict(step_tol=0.2, objective_tol=0.2, algorithm="nelder_mead",
                    gradient="forward", fd_step=None)
        base.update(kw)
        return cls(**base)


@dataclass
class OptResult:
    x: np.ndarray
    fun: float
    evals: int
    converged: bool
    reason: str


class _Counted:
    def __init__(self, f, max_evals):
        self.f = f
        self.max_evals = max_evals
        self.evals = 0
        self.best_x = None
        self.best_f = math.inf

    def __call__(self, x):
        if self.evals >= self.max_evals:
            raise _EvalBudget
        self.evals += 1
        val = float(self.f(x))
        if val < self.best_f:
            self.best_f, self.best_x = val, np.array(x, dtype=float)
        return val


class _EvalBudget(Exception):
    pass


def nelder_mead(f: Callable[[np.ndarray], float], x0, cfg: OptimizerConfig = OptimizerConfig()) -> OptResult:
    """Downhill simplex with coefficients (1, 2, 1/2, 1/2).

    Stops when the simplex fits in a ``step_tol`` box around its best vertex
    *and* its values spread by at most ``objective_tol``.
    """
    x0 = np.asarray(x0, dtype=float)
    if not np.all(np.isfinite(x0)):
        raise ValueError("x0 must be finite")
    fc = _Counted(f, cfg.max_evals)
    n = len(x0)
    try:
        simplex = [x0.copy()]
        for i in range(n):
            v = x0.copy()
            v[i] += cfg.simplex_step
            simplex.append(v)
        sim = np.array(simplex)
        fs = np.array([fc(v) for v in sim])
        while True:
            order = np.argsort(fs, kind="stable")
            sim, fs = sim[order], fs[order]
            if (np.max(np.abs(sim[1:] - sim[0])) <= cfg.step_tol
                    and np.max(np.abs(fs[1:] - fs[0])) <= cfg.objective_tol):
                return OptResult(sim[0].copy(), float(fs[0]), fc.evals, True, "tolerances met")
            centroid = sim[:-1].mean(axis=0)
            xr = centroid + (centroid - sim[-1])
            fr = fc(xr)
            if fr < fs[0]:
                xe = centroid + 2.0 * (centroid - sim[-1])
                fe = fc(xe)
                if fe < fr:
                    sim[-1], fs[-1] = xe, fe
                else:
                    sim[-1], fs[-1] = xr, fr
                continue
            if fr < fs[-2]:
                sim[-1], fs[-1] = xr, fr
                continue
            if fr < fs[-1]:
                xc = centroid + 0.5 * (xr - centroid)
                fcv = fc(xc)
                if fcv <= fr:
                    sim[-1], fs[-1] = xc, fcv
                    continue
            else:
                xc = centroid + 0.5 * (sim[-1] - centroid)
                fcv = fc(xc)
                if fcv < fs[-1]:
                    sim[-1], fs[-1] = xc, fcv
                    continue
            for i in range(1, n + 1):
                sim[i] = sim[0] + 0.5 * (sim[i] - sim[0])
                fs[i] = fc(sim[i])
    except _EvalBudget:
        return OptResult(fc.best_x, fc.best_f, fc.evals, False, "max_evals reached")


def _gradient(fc: _Counted, x: np.ndarray, fx: float, cfg: OptimizerConfig) -> np.ndarray:
    g = np.empty_like(x)
    if cfg.gradient == "forward":
        h = cfg.fd_step if cfg.fd_step is not None else cfg.step_tol
        for i in range(len(x)):
            e = x.copy()
            e[i] += h
            g[i] = (fc(e) - fx) / h
    else:
        h = cfg.fd_step if cfg.fd_step is not None else 1e-7
        for i in range(len(x)):
            a, b = x.copy(), x.copy()
            a[i] += h
            b[i] -= h
            g[i] = (fc(a) - fc(b)) / (2 * h)
    return g


def quasi_newton_fd(f: Callable[[np.ndarray], float], x0, cfg: OptimizerConfig = OptimizerConfig()) -> OptResult:
    """BFGS on finite-difference gradients with Armijo backtracking.

    Stops as soon as an accepted step is shorter than ``step_tol`` or changes
    ``f`` by at most ``objective_tol``.  A line search that cannot find a
    decrease before its trial step shrinks below ``step_tol`` also counts as
    the step-tolerance stop.
    """
    x = np.asarray(x0, dtype=float).copy()
    if not np.all(np.isfinite(x)):
        raise ValueError("x0 must be finite")
    fc = _Counted(f, cfg.max_evals)
    n = len(x)
    hinv = np.eye(n)
    try:
        fx = fc(x)
        g = _gradient(fc, x, fx, cfg)
        first = True
        while True:
            d = -hinv @ g
            slope = float(g @ d)
            if slope >= 0:
                hinv = np.eye(n)
                d, slope = -g, -float(g @ g)
                if slope == 0.0:
                    return OptResult(x, fx, fc.evals, True, "zero gradient")
            alpha = 1.0
            while True:
                step = alpha * d
                if np.linalg.norm(step) <= cfg.step_tol:
                    return OptResult(fc.best_x, fc.best_f, fc.evals, True, "step tolerance")
                f_new = fc(x + step)
                if f_new <= fx + 1e-4 * alpha * slope:
                    break
                alpha *= 0.5
                if alpha < 1e-20:
                    return OptResult(fc.best_x, fc.best_f, fc.evals, False, "line search failed")
            x_new = x + step
            if abs(f_new - fx) <= cfg.objective_tol:
                return OptResult(fc.best_x, fc.best_f, fc.evals, True, "objective tolerance")
            g_new = _gradient(fc, x_new, f_new, cfg)
            y = g_new - g
            sy = float(step @ y)
            if sy > 1e-12 * np.linalg.norm(step) * np.linalg.norm(y):
                if first:
                    hinv = np.eye(n) * sy / float(y @ y)
                    first = False
                rho = 1.0 / sy
                v = np.eye(n) - rho * np.outer(step, y)
                hinv = v @ hinv @ v.T + rho * np.outer(step, step)
            x, fx, g = x_new, f_new, g_new
    except _EvalBudget:
        return OptResult(fc.best_x, fc.best_f, fc.evals, False, "max_evals reached")


def minimize(f, x0, cfg: OptimizerConfig) -> OptResult:
    if cfg.algorithm == "nelder_mead":
        return nelder_mead(f, x0, cfg)
    return quasi_newton_fd(f, x0, cfg)


# -- heuristic interpolation ansatz --------------------------------------------


def interpolate_params(q: QAOAParams) -> QAOAParams:
    """Level-``p`` optimum to a level-``p+1`` starting point.

    With 1-based indices, ``g'_1 = g_1``, ``g'_p = g_{p-1}``,
    ``g'_i = (i-1)/(p-1) g_{i-1} + (p-i)/(p-1) g_i`` for ``2 <= i <= p-1``;
    ``b'_1 = b_1``, ``b'_{p+1} = b_p``,
    ``b'_j = (j-1)/p b_{j-1} + (p-j+1)/p b_j`` for ``2 <= j <= p``.
    """
    p = q.p
    if p < 2:
        raise ValueError("interpolation needs p >= 2 (at least one gamma)")
    g, b = q.gammas, q.betas
    new_g = [g[0]]
    for i in range(2, p):
        new_g.append((i - 1) / (p - 1) * g[i - 2] + (p - i) / (p - 1) * g[i - 1])
    new_g.append(g[p - 2])
    new_b = [b[0]]
    for j in range(2, p + 1):
        new_b.append((j - 1) / p * b[j - 2] + (p - j + 1) / p * b[j - 1])
    new_b.append(b[p - 1])
    return QAOAParams(tuple(new_g), tuple(new_b))


def pad_params(q: QAOAParams) -> QAOAParams:
    """Level ``p+1`` parameters preparing exactly the level-``p`` state."""
    return QAOAParams(q.gammas + (0.0,), q.betas + (0.0,))


@dataclass
class LevelResult:
    p: int
    params: QAOAParams
    f_p: float
    p_mis: float
    evals: int
    converged: bool
    reason: str
    start: str  # "seed", "interpolated" or "padded"
    wall_time_s: float = 0.0
    start_params: QAOAParams | None = field(default=None, repr=False)


def _mis_weight(psi, basis):
    probs = np.abs(psi) ** 2
    return float(probs[basis.mis_indices()].sum())


def heuristic_schedule_optimize(
    basis: ISBasis,
    h: ProjectedHamiltonian,
    p_max: int,
    cfg: OptimizerConfig = OptimizerConfig(),
    objective_source: str | Callable[[np.ndarray], float] = "exact",
    seed_point: QAOAParams | None = None,
    rng: np.random.Generator | None = None,
    eps_m: float = 0.05,
    stop_when: Callable[[LevelResult], bool] | None = None,
    method: str = "auto",
) -> list[LevelResult]:
    """Optimize level 3 from the averaged seed point, then climb one level at
    a time, starting each level from the interpolated previous optimum.

    If the optimum reached from the interpolated start is worse than the
    previous level (beyond ``objective_tol``), the level is re-optimized from
    the zero-padded previous optimum and the better result kept, so ``F_p`` is
    non-increasing along the trace.  ``objective_source`` is ``"exact"``,
    ``"noisy"`` (sampled with precision ``eps_m`` from ``rng``) or a callable
    on the state.
    """
    if p_max < 3:
        raise ValueError("p_max must be >= 3")
    if seed_point is None:
        seed_point = QAOAParams(HEURISTIC_SEED_P3[:2], HEURISTIC_SEED_P3[2:])

    if objective_source == "exact":
        def measure(psi):
            return objective_fp(psi, basis)
    elif objective_source == "noisy":
        from .measure import estimate_objective

        if rng is None:
            raise ValueError("noisy objective needs an rng")

        def measure(psi):
            return estimate_objective(psi, basis, eps_m, rng).mean
    elif callable(objective_source):
        measure = objective_source
    else:
        raise ValueError(f"unknown objective source {objective_source!r}")

    def run(start: QAOAParams, tag: str) -> LevelResult:
        p = start.p
        t0 = time.perf_counter()

        def f(x):
            return measure(qaoa_state(basis, h, QAOAParams.from_vector(x, p), method=method))

        res = minimize(f, start.to_vector(), cfg)
        q = QAOAParams.from_vector(res.x, p)
        psi = qaoa_state(basis, h, q, method=method)
        return LevelResult(p, q, objective_fp(psi, basis), _mis_weight(psi, basis), res.evals,
                           res.converged, res.reason, tag, time.perf_counter() - t0, start)

    trace = [run(seed_point, "seed")]
    if stop_when is not None and stop_when(trace[-1]):
        return trace
    for p in range(seed_point.p + 1, p_max + 1):
        prev = trace[-1]
        cur = run(interpolate_params(prev.params), "interpolated")
        if cur.f_p > prev.f_p + cfg.objective_tol:
            alt = run(pad_params(prev.params), "padded")
            alt.evals += cur.evals
            if alt.f_p < cur.f_p:
                cur = alt
            else:
                cur.evals = alt.evals
        trace.append(cur)
        if stop_when is not None and stop_when(cur):
            break
    return trace
