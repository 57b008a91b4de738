"""Compiled inner loops for the subspace propagators.

The Hamiltonian is never materialized: ``apply_h`` walks the hop list, so the
summation order (and hence the result) is fixed bit for bit.
"""

import math

import numpy as np
from numba import njit

FAIL = -1


@njit(cache=True)
def apply_h(lo, hi, diag, c, d, x, out):
    cc = np.conj(c)
    for i in range(x.size):
        out[i] = d * diag[i] * x[i]
    for k in range(lo.size):
        a = lo[k]
        b = hi[k]
        out[a] += c * x[b]
        out[b] += cc * x[a]


@njit(cache=True)
def _norm(x):
    s = 0.0
    for i in range(x.size):
        s += x[i].real * x[i].real + x[i].imag * x[i].imag
    return math.sqrt(s)


@njit(cache=True)
def expm_action(lo, hi, diag, c, d, tau, norm_bound, tol, order_cap, x, term, tmp):
    """Overwrite ``x`` with ``exp(-i tau H) x`` by truncated Taylor series.

    The interval is split into ``ceil(norm_bound * |tau|)`` pieces so every
    series has argument norm <= 1.  Each series stops once the last two terms
    are below ``tol`` relative to the partial sum.  Returns the largest order
    used, or ``FAIL`` when ``order_cap`` is reached first.
    """
    if tau == 0.0:
        return 0
    s = max(1, int(math.ceil(norm_bound * abs(tau))))
    h = tau / s
    worst = 0
    for _ in range(s):
        for i in range(x.size):
            term[i] = x[i]
        prev = _norm(x)
        done = False
        for k in range(1, order_cap + 1):
            apply_h(lo, hi, diag, c, d, term, tmp)
            f = -1j * h / k
            for i in range(x.size):
                term[i] = f * tmp[i]
                x[i] += term[i]
            cur = _norm(term)
            if cur + prev <= tol * _norm(x):
                worst = max(worst, k)
                done = True
                break
            prev = cur
        if not done:
            return FAIL
    return worst


MIDPOINT = 0
MAGNUS4 = 1

_C1 = 0.5 - math.sqrt(3.0) / 6.0
_C2 = 0.5 + math.sqrt(3.0) / 6.0
_A1 = 0.25 + math.sqrt(3.0) / 6.0
_A2 = 0.25 - math.sqrt(3.0) / 6.0


@njit(cache=True)
def _ramp(omega0, delta0, total_time, t):
    sv = math.sin(math.pi * t / total_time)
    return omega0 * sv * sv, delta0 * (2.0 * t / total_time - 1.0)


@njit(cache=True)
def anneal_sweep(lo, hi, diag, max_hops, max_size, omega0, delta0, total_time,
                 t_start, t_end, n_steps, tol, order_cap, scheme, x):
    """Evolve ``x`` from ``t_start`` to ``t_end`` under the sin^2 / linear ramp.

    ``MIDPOINT`` freezes ``H`` at the centre of each of ``n_steps`` equal
    steps (second order).  ``MAGNUS4`` is the two-exponential commutator-free
    Magnus step on the Gauss-Legendre nodes (fourth order); since ``H`` is
    linear in (Omega, Delta), each factor is again a drive-plus-detuning
    operator.  ``t_end < t_start`` runs the inverse evolution.
    """
    term = np.empty_like(x)
    tmp = np.empty_like(x)
    dt = (t_end - t_start) / n_steps
    worst = 0
    for j in range(n_steps):
        t = t_start + j * dt
        if scheme == MIDPOINT:
            om, de = _ramp(omega0, delta0, total_time, t + 0.5 * dt)
            bound = abs(om) * max_hops + abs(de) * max_size
            k = expm_action(lo, hi, diag, om + 0j, de, dt, bound, tol, order_cap, x, term, tmp)
            if k == FAIL:
                return FAIL
            worst = max(worst, k)
        else:
            om1, de1 = _ramp(omega0, delta0, total_time, t + _C1 * dt)
            om2, de2 = _ramp(omega0, delta0, total_time, t + _C2 * dt)
            for first in (True, False):
                if first:
                    om = _A1 * om1 + _A2 * om2
                    de = _A1 * de1 + _A2 * de2
                else:
                    om = _A2 * om1 + _A1 * om2
                    de = _A2 * de1 + _A1 * de2
                bound = abs(om) * max_hops + abs(de) * max_size
                k = expm_action(lo, hi, diag, om + 0j, de, dt, bound, tol, order_cap, x, term, tmp)
                if k == FAIL:
                    return FAIL
                worst = max(worst, k)
    return worst
