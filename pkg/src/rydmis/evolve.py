"""Time evolution: the annealing ramp, the subspace propagator and the
per-vertex (stroboscopic) Trotter evolution on the full 2^n space."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .subspace import ProjectedHamiltonian
from .udgraph import Graph

__all__ = [
    "PropagationError",
    "PropagatorConfig",
    "Schedule",
    "expm_multiply_fixed",
    "propagate",
    "schedule_eval",
    "trotter_evolve_general",
    "trotter_step_general",
]


class PropagationError(RuntimeError):
    """The truncated Taylor series did not converge within the order cap."""


@dataclass(frozen=True)
class Schedule:
    """``Omega(t) = omega0 sin^2(pi t / T)``, ``Delta(t) = delta0 (2 t / T - 1)``."""

    omega0: float
    delta0: float
    total_time: float

    def __post_init__(self):
        if not self.omega0 > 0:
            raise ValueError("omega0 must be positive")
        if not self.total_time > 0:
            raise ValueError("total_time must be positive")


@dataclass(frozen=True)
class PropagatorConfig:
    """``step_tol`` bounds the Taylor truncation error per unit of evolved
    time (so each step of length ``dt`` is truncated at ``step_tol * dt``);
    ``max_step`` is in units of ``1 / omega0``.  ``scheme`` is ``"magnus4"``
    (two exponentials per step, fourth order) or ``"midpoint"``."""

    step_tol: float = 1e-8
    max_step: float = 0.01
    taylor_order_cap: int = 40
    scheme: str = "magnus4"

    def __post_init__(self):
        if not self.step_tol > 0:
            raise ValueError("step_tol must be positive")
        if not self.max_step > 0:
            raise ValueError("max_step must be positive")
        if self.taylor_order_cap < 1:
            raise ValueError("taylor_order_cap must be >= 1")
        if self.scheme not in _SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")


_SCHEMES = {"midpoint": _kernels.MIDPOINT, "magnus4": _kernels.MAGNUS4}


def schedule_eval(s: Schedule, t: float) -> tuple[float, float]:
    if not 0.0 <= t <= s.total_time:
        raise ValueError(f"t={t} outside [0, {s.total_time}]")
    x = t / s.total_time
    return s.omega0 * math.sin(math.pi * x) ** 2, s.delta0 * (2.0 * x - 1.0)


def _as_state(psi, dim: int) -> np.ndarray:
    x = np.array(psi, dtype=np.complex128, copy=True)
    if x.shape != (dim,):
        raise ValueError(f"state has shape {x.shape}, basis dim is {dim}")
    return x


def propagate(
    psi: np.ndarray,
    h: ProjectedHamiltonian,
    s: Schedule,
    cfg: PropagatorConfig = PropagatorConfig(),
    t_start: float = 0.0,
    t_end: float | None = None,
) -> np.ndarray:
    """Solve ``i d psi/dt = H(t) psi`` along the ramp ``s``.

    The interval is cut into equal steps no longer than ``cfg.max_step``.
    Within a step the evolution is approximated by exponentials of frozen
    Hamiltonians (see ``cfg.scheme``), each applied to the state by a
    truncated Taylor series with sub-steps keeping ``||H|| dt <= 1``.
    Passing ``t_end < t_start`` runs time backwards.
    """
    if t_end is None:
        t_end = s.total_time
    x = _as_state(psi, h.basis.dim)
    span = t_end - t_start
    if span == 0.0:
        return x
    n_steps = max(1, math.ceil(abs(span) * s.omega0 / cfg.max_step))
    local_tol = cfg.step_tol * abs(span) / n_steps
    status = _kernels.anneal_sweep(
        h.hop_lo, h.hop_hi, h.diag, float(h.max_hops_per_state),
        float(-h.diag.min()) if h.basis.dim else 0.0,
        float(s.omega0), float(s.delta0), float(s.total_time),
        float(t_start), float(t_end), n_steps,
        float(local_tol), int(cfg.taylor_order_cap), _SCHEMES[cfg.scheme], x,
    )
    if status == _kernels.FAIL:
        raise PropagationError(f"Taylor series did not converge within order {cfg.taylor_order_cap}")
    return x


def expm_multiply_fixed(
    h: ProjectedHamiltonian,
    omega: float,
    delta: float,
    phase: float,
    tau: float,
    psi: np.ndarray,
    tol: float = 1e-15,
    order_cap: int = 60,
) -> np.ndarray:
    """``exp(-i tau H(omega, delta, phase)) psi`` for a time-independent ``H``."""
    x = _as_state(psi, h.basis.dim)
    term = np.empty_like(x)
    tmp = np.empty_like(x)
    c = omega * complex(math.cos(phase), math.sin(phase))
    status = _kernels.expm_action(
        h.hop_lo, h.hop_hi, h.diag, c, float(delta), float(tau),
        h.norm_bound(omega, delta), float(tol), int(order_cap), x, term, tmp,
    )
    if status == _kernels.FAIL:
        raise PropagationError(f"Taylor series did not converge within order {order_cap}")
    return x


# -- stroboscopic evolution on the full 2^n space ------------------------------


def _rotation(omega: float, delta: float, phase: float, dt: float) -> np.ndarray:
    """``exp(-i dt (Omega (e^{i phase}|0><1| + h.c.) - Delta n))`` in (|0>, |1>)."""
    # M = -Delta/2 I + hx X + hy Y + hz Z
    hx = omega * math.cos(phase)
    hy = -omega * math.sin(phase)
    hz = 0.5 * delta
    r = math.sqrt(hx * hx + hy * hy + hz * hz)
    glob = complex(math.cos(0.5 * delta * dt), math.sin(0.5 * delta * dt))
    if r == 0.0:
        return glob * np.eye(2, dtype=complex)
    cs, sn = math.cos(r * dt), math.sin(r * dt) / r
    return glob * np.array(
        [
            [cs - 1j * sn * hz, -1j * sn * (hx - 1j * hy)],
            [-1j * sn * (hx + 1j * hy), cs + 1j * sn * hz],
        ]
    )


def trotter_step_general(
    psi: np.ndarray,
    v: int,
    omega: float,
    delta: float,
    phase: float,
    dt: float,
    g: Graph,
) -> np.ndarray:
    """Rotate atom ``v`` on the block where all its neighbours are in ``|0>``.

    ``psi`` lives on the full space, index = bitmask of excited atoms.
    """
    psi = np.asarray(psi, dtype=np.complex128)
    if psi.shape != (1 << g.n,):
        raise ValueError("state must live on the full 2^n space")
    idx = np.arange(1 << g.n)
    bit = 1 << v
    free = idx[((idx & g.neighbors[v]) == 0) & ((idx & bit) == 0)]
    u = _rotation(omega, delta, phase, dt)
    out = psi.copy()
    a, b = psi[free], psi[free | bit]
    out[free] = u[0, 0] * a + u[0, 1] * b
    out[free | bit] = u[1, 0] * a + u[1, 1] * b
    return out


def trotter_evolve_general(psi: np.ndarray, g: Graph, s: Schedule, n_slices: int) -> np.ndarray:
    """First-order product over slices and, within a slice, over vertices in
    ascending order; the ramp is sampled at the start of each slice."""
    if g.n > 14:
        raise ValueError("full-space Trotter evolution limited to n <= 14")
    out = np.array(psi, dtype=np.complex128, copy=True)
    if n_slices <= 0:
        return out
    idx = np.arange(1 << g.n)
    blocks = []
    for v in range(g.n):
        bit = 1 << v
        free = idx[((idx & g.neighbors[v]) == 0) & ((idx & bit) == 0)]
        blocks.append((free, free | bit))
    dt = s.total_time / n_slices
    for j in range(n_slices):
        omega, delta = schedule_eval(s, j * dt)
        u = _rotation(omega, delta, 0.0, dt)
        for lo, hi in blocks:
            a, b = out[lo], out[hi]
            out[lo] = u[0, 0] * a + u[0, 1] * b
            out[hi] = u[1, 0] * a + u[1, 1] * b
    return out
