"""Quantum annealing runs, the Landau-Zener timescale fit and hardness sweeps."""

from __future__ import annotations

import math
import statistics
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .evolve import PropagatorConfig, Schedule, propagate
from .subspace import (
    DEFAULT_DIM_CAP,
    DimensionCapExceeded,
    ISBasis,
    ProjectedHamiltonian,
    build_is_basis,
    build_projected_hamiltonian,
)
from .udgraph import generate_random_udgraph

__all__ = [
    "AnnealResult",
    "DegenerateFitError",
    "LZFitResult",
    "SweepRecord",
    "SweepTable",
    "TMaxExceeded",
    "approximation_ratio",
    "extract_t_lz",
    "fit_landau_zener",
    "hardness_sweep",
    "instance_seed",
    "lz_protocol",
    "mis_probability",
    "run_qaa",
    "sweep_instance",
]

DEFAULT_T_MAX = float(2**14)
P_CLAMP = 1e-12
MODES = ("t_lz", "p_mis_at_fixed_T", "approx_ratio_at_fixed_T")


class TMaxExceeded(RuntimeError):
    """Doubling reached ``t_max`` without ``P_MIS`` crossing the threshold."""


class DegenerateFitError(RuntimeError):
    """Every fit point has ``P_MIS`` numerically equal to 1."""


def mis_probability(psi: np.ndarray, basis: ISBasis) -> float:
    """Total weight on maximum independent sets (degenerate ones summed)."""
    probs = np.abs(psi) ** 2
    return float(probs[basis.mis_indices()].sum())


def approximation_ratio(psi: np.ndarray, basis: ISBasis) -> float:
    """Expected measured set size divided by ``|MIS|``."""
    probs = np.abs(psi) ** 2
    return float(probs @ basis.sizes) / basis.mis_size


@dataclass(frozen=True)
class AnnealResult:
    final_state: np.ndarray = field(repr=False)
    p_mis: float
    approx_ratio: float
    total_time: float


def run_qaa(
    basis: ISBasis,
    h: ProjectedHamiltonian,
    omega0: float,
    delta0: float,
    T: float,
    cfg: PropagatorConfig = PropagatorConfig(),
) -> AnnealResult:
    """Sweep from the empty set along the ramp of duration ``T``."""
    psi = np.zeros(basis.dim, dtype=np.complex128)
    psi[0] = 1.0
    out = propagate(psi, h, Schedule(omega0, delta0, T), cfg)
    return AnnealResult(out, mis_probability(out, basis), approximation_ratio(out, basis), T)


@dataclass(frozen=True)
class LZFitResult:
    t_lz: float
    a: float
    r_squared: float
    t_star: float
    fit_points: tuple[tuple[float, float], ...]
    accepted: bool
    clamped: bool = False
    n_sweeps: int = 0


def fit_landau_zener(times: Sequence[float], probs: Sequence[float], r2_min: float = 0.99):
    """Least squares of ``ln(1 - P) = a - T / T_LZ``.

    Probabilities at or above ``1 - 1e-12`` are clamped there.  ``R^2`` is
    computed for the linear fit in log space.  Returns
    ``(t_lz, a, r_squared, accepted, clamped)``.
    """
    t = np.asarray(times, dtype=float)
    p = np.asarray(probs, dtype=float)
    hit = p >= 1.0 - P_CLAMP
    if hit.all():
        raise DegenerateFitError("all fit points have P_MIS == 1 to working precision")
    y = np.log(1.0 - np.minimum(p, 1.0 - P_CLAMP))
    slope, intercept = np.polyfit(t, y, 1)
    resid = y - (slope * t + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 0.0
    t_lz = -1.0 / slope if slope != 0 else math.inf
    accepted = bool(r2 >= r2_min and 0 < t_lz < math.inf)
    return float(t_lz), float(intercept), r2, accepted, bool(hit.any())


def lz_protocol(
    p_mis_at: Callable[[float], float],
    t_min: float = 5.0,
    t_max: float = DEFAULT_T_MAX,
    threshold: float = 0.9,
    r2_min: float = 0.99,
) -> LZFitResult:
    """Find the first doubling ``T* = t_min 2^k`` with ``P_MIS > threshold``,
    then fit at ``T*, 1.5 T*, 2 T*, 2.5 T*``."""
    T = float(t_min)
    calls = 0
    while True:
        p = p_mis_at(T)
        calls += 1
        if p > threshold:
            break
        if 2 * T > t_max:
            raise TMaxExceeded(f"P_MIS({T:g}) = {p:.4g} <= {threshold} and next T exceeds t_max={t_max:g}")
        T *= 2
    t_star = T
    points = [(t_star, p)]
    for f in (1.5, 2.0, 2.5):
        points.append((f * t_star, p_mis_at(f * t_star)))
        calls += 1
    t_lz, a, r2, ok, clamped = fit_landau_zener([q[0] for q in points], [q[1] for q in points], r2_min)
    return LZFitResult(t_lz, a, r2, t_star, tuple(points), ok, clamped, calls)


def extract_t_lz(
    basis: ISBasis,
    h: ProjectedHamiltonian,
    omega0: float = 1.0,
    delta0: float = 6.0,
    cfg: PropagatorConfig = PropagatorConfig(),
    t_min: float = 5.0,
    t_max: float = DEFAULT_T_MAX,
) -> LZFitResult:
    """Adiabatic timescale of one instance; times are in units of ``1/omega0``."""
    def p_at(T):
        return run_qaa(basis, h, omega0, delta0, T / omega0, cfg).p_mis

    return lz_protocol(p_at, t_min, t_max)


# -- sweeps --------------------------------------------------------------------


def instance_seed(master_seed: int, n: int, rho: float, k: int) -> int:
    """Graph seed of the ``k``-th instance of cell ``(n, rho)``.

    Derived from ``SeedSequence([master_seed, n, round(rho * 1e6), k])`` so
    cells are statistically independent yet reproducible.
    """
    ss = np.random.SeedSequence([int(master_seed), int(n), int(round(rho * 1e6)), int(k)])
    return int(ss.generate_state(1, dtype=np.uint32)[0])


@dataclass(frozen=True)
class SweepRecord:
    n: int
    rho: float
    seed: int
    dim_is: int
    mis_size: int
    mode: str
    T_or_tstar: float
    p_mis: float
    approx_ratio: float
    t_lz: float
    a: float
    r_squared: float
    accepted: bool
    status: str
    wall_time_s: float

    @property
    def value(self) -> float:
        if self.mode == "t_lz":
            return self.t_lz
        if self.mode == "p_mis_at_fixed_T":
            return self.p_mis
        return self.approx_ratio

    @property
    def usable(self) -> bool:
        return self.status == "ok" and (self.mode != "t_lz" or self.accepted)


NAN = float("nan")


def sweep_instance(
    n: int,
    rho: float,
    seed: int,
    mode: str,
    fixed_T: float = 10.0,
    omega0: float = 1.0,
    delta0: float = 6.0,
    cfg: PropagatorConfig = PropagatorConfig(),
    dim_cap: int = DEFAULT_DIM_CAP,
    t_max: float = DEFAULT_T_MAX,
) -> SweepRecord:
    """One row of a hardness sweep; failures become rows with a status."""
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    t0 = time.perf_counter()
    dim = mis = -1
    try:
        g = generate_random_udgraph(n, rho, seed)
        basis = build_is_basis(g, dim_cap)
        dim, mis = basis.dim, basis.mis_size
        h = build_projected_hamiltonian(basis)
        if mode == "t_lz":
            fit = extract_t_lz(basis, h, omega0, delta0, cfg, t_max=t_max)
            last = fit.fit_points[-1][1]
            return SweepRecord(n, rho, seed, dim, mis, mode, fit.t_star, last, NAN,
                               fit.t_lz, fit.a, fit.r_squared, fit.accepted, "ok",
                               time.perf_counter() - t0)
        res = run_qaa(basis, h, omega0, delta0, fixed_T, cfg)
        return SweepRecord(n, rho, seed, dim, mis, mode, fixed_T, res.p_mis, res.approx_ratio,
                           NAN, NAN, NAN, True, "ok", time.perf_counter() - t0)
    except DimensionCapExceeded:
        status = "dim_cap"
    except TMaxExceeded:
        status = "t_max_exceeded"
    except DegenerateFitError:
        status = "degenerate_fit"
    except ValueError:
        status = "invalid_instance"
    return SweepRecord(n, rho, seed, dim, mis, mode, NAN, NAN, NAN, NAN, NAN, NAN, False,
                       status, time.perf_counter() - t0)


@dataclass(frozen=True)
class CellSummary:
    n: int
    rho: float
    n_seeds: int
    n_used: int
    n_skipped: int
    median: float


@dataclass
class SweepTable:
    records: list[SweepRecord]
    cells: list[CellSummary]

    def cell(self, n: int, rho: float) -> CellSummary:
        for c in self.cells:
            if c.n == n and c.rho == rho:
                return c
        raise KeyError((n, rho))


def hardness_sweep(
    n_list: Sequence[int],
    rho_list: Sequence[float],
    seeds_per_cell: int,
    mode: str = "t_lz",
    fixed_T: float = 10.0,
    master_seed: int = 0,
    omega0: float = 1.0,
    delta0: float = 6.0,
    cfg: PropagatorConfig = PropagatorConfig(),
    dim_cap: int = DEFAULT_DIM_CAP,
    t_max: float = DEFAULT_T_MAX,
    workers: int = 1,
) -> SweepTable:
    """Run every ``(n, rho, seed)`` instance and take per-cell medians.

    Rows that hit a cap, fail the fit, or have an ``R^2`` below 0.99 are kept
    in ``records`` but excluded from the medians and counted as skipped.
    """
    from .parallel import run_parallel

    tasks = []
    for n in n_list:
        for rho in rho_list:
            for k in range(seeds_per_cell):
                seed = instance_seed(master_seed, n, rho, k)
                tasks.append((sweep_instance, (n, rho, seed, mode, fixed_T, omega0, delta0,
                                               cfg, dim_cap, t_max)))
    def failed(args, message):
        n, rho, seed, mode = args[:4]
        return SweepRecord(n, rho, seed, -1, -1, mode, NAN, NAN, NAN, NAN, NAN, NAN, False,
                           "internal_error", 0.0)

    records = run_parallel(tasks, workers, on_error=failed)
    cells = []
    for n in n_list:
        for rho in rho_list:
            rows = [r for r in records if r.n == n and r.rho == rho]
            used = [r.value for r in rows if r.usable]
            cells.append(CellSummary(n, rho, len(rows), len(used), len(rows) - len(used),
                                     statistics.median(used) if used else NAN))
    return SweepTable(records, cells)
