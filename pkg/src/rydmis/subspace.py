"""Independent-set subspace and the Hamiltonians acting on it.

In the strong-blockade limit the dynamics never leaves the span of
independent sets.  :class:`ISBasis` enumerates that span in a fixed
(size, bitmask) order and :class:`ProjectedHamiltonian` stores the two pieces
of the Hamiltonian restricted to it:

* a diagonal ``-|s|`` (the cost term at unit detuning), and
* the list of "hops" ``(lo, hi, v)`` where ``states[hi] = states[lo] | 1 << v``.
  The projected drive is ``sum_v (e^{i phi} |0><1|_v + h.c.)``, so a hop
  contributes ``Omega e^{i phi}`` to ``H[lo, hi]`` and its conjugate to
  ``H[hi, lo]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._kernels import apply_h
from .udgraph import BlockadeParams, Graph

__all__ = [
    "DEFAULT_DIM_CAP",
    "DimensionCapExceeded",
    "ISBasis",
    "ProjectedHamiltonian",
    "apply_hamiltonian",
    "build_full_rydberg_hamiltonian",
    "build_is_basis",
    "build_projected_hamiltonian",
    "dense_matrix",
]

DEFAULT_DIM_CAP = 1 << 22
MAX_BASIS_VERTICES = 62


class DimensionCapExceeded(RuntimeError):
    """The independent-set subspace is larger than the configured cap."""


@dataclass(frozen=True, eq=False)
class ISBasis:
    graph: Graph
    states: np.ndarray  # int64 bitmasks, (size, mask) order
    sizes: np.ndarray
    _by_mask: np.ndarray = field(repr=False)
    _perm: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return len(self.states)

    def index_of(self, mask):
        """Basis index of a bitmask (scalar or array); ``KeyError`` if absent."""
        m = np.asarray(mask, dtype=np.int64)
        pos = np.searchsorted(self._by_mask, m)
        pos = np.minimum(pos, len(self._by_mask) - 1)
        if np.any(self._by_mask[pos] != m):
            raise KeyError(f"{mask!r} is not an independent set of this graph")
        out = self._perm[pos]
        return int(out) if out.ndim == 0 else out

    @property
    def mis_size(self) -> int:
        return int(self.sizes[-1])

    def mis_indices(self) -> np.ndarray:
        return np.nonzero(self.sizes == self.sizes[-1])[0]


def build_is_basis(g: Graph, dim_cap: int = DEFAULT_DIM_CAP) -> ISBasis:
    """Enumerate every independent set of ``g`` (the empty set included).

    Vertices are added one at a time; a set may take vertex ``v`` only if none
    of its lower-indexed neighbours is present.
    """
    if g.n > MAX_BASIS_VERTICES:
        raise ValueError(f"basis limited to n <= {MAX_BASIS_VERTICES}")
    states = np.zeros(1, dtype=np.int64)
    for v in range(g.n):
        lower_nbrs = g.neighbors[v] & ((1 << v) - 1)
        grown = states[(states & lower_nbrs) == 0] | (1 << v)
        if len(states) + len(grown) > dim_cap:
            raise DimensionCapExceeded(
                f"independent-set subspace exceeds cap {dim_cap} (after vertex {v})"
            )
        states = np.concatenate([states, grown])
    sizes = np.zeros(len(states), dtype=np.int64)
    for v in range(g.n):
        sizes += (states >> v) & 1
    order = np.lexsort((states, sizes))
    states, sizes = states[order], sizes[order]
    perm = np.argsort(states, kind="stable")
    return ISBasis(g, states, sizes, states[perm], perm)


@dataclass(frozen=True, eq=False)
class ProjectedHamiltonian:
    basis: ISBasis
    diag: np.ndarray  # -|s|, i.e. the cost term at unit detuning
    hop_lo: np.ndarray
    hop_hi: np.ndarray
    hop_vertex: np.ndarray
    max_hops_per_state: int

    @property
    def n_hops(self) -> int:
        return len(self.hop_lo)

    def norm_bound(self, omega: float, delta: float) -> float:
        """Row-sum bound on the operator norm of ``H(omega, delta)``."""
        top = float(np.max(-self.diag)) if len(self.diag) else 0.0
        return abs(omega) * self.max_hops_per_state + abs(delta) * top


def build_projected_hamiltonian(basis: ISBasis) -> ProjectedHamiltonian:
    g = basis.graph
    states = basis.states
    lo, hi, vert = [], [], []
    for v in range(g.n):
        block = g.neighbors[v] | (1 << v)
        src = np.nonzero((states & block) == 0)[0]
        if len(src) == 0:
            continue
        lo.append(src)
        hi.append(basis.index_of(states[src] | (1 << v)))
        vert.append(np.full(len(src), v, dtype=np.int64))
    if lo:
        hop_lo = np.concatenate(lo).astype(np.int64)
        hop_hi = np.concatenate(hi).astype(np.int64)
        hop_vertex = np.concatenate(vert)
        order = np.lexsort((hop_hi, hop_lo))
        hop_lo, hop_hi, hop_vertex = hop_lo[order], hop_hi[order], hop_vertex[order]
        counts = np.bincount(np.concatenate([hop_lo, hop_hi]), minlength=basis.dim)
        max_hops = int(counts.max())
    else:
        hop_lo = hop_hi = hop_vertex = np.zeros(0, dtype=np.int64)
        max_hops = 0
    diag = -basis.sizes.astype(float)
    return ProjectedHamiltonian(basis, diag, hop_lo, hop_hi, hop_vertex, max_hops)


def apply_hamiltonian(
    h: ProjectedHamiltonian,
    omega: float,
    delta: float,
    phase: float,
    psi: np.ndarray,
) -> np.ndarray:
    """``(H_drive(omega, phase) + H_cost(delta)) @ psi`` without forming a matrix."""
    psi = np.ascontiguousarray(psi, dtype=np.complex128)
    if psi.shape != (h.basis.dim,):
        raise ValueError(f"state has shape {psi.shape}, basis dim is {h.basis.dim}")
    c = omega * complex(math.cos(phase), math.sin(phase))
    out = np.empty_like(psi)
    apply_h(h.hop_lo, h.hop_hi, h.diag, c, float(delta), psi, out)
    return out


def dense_matrix(h: ProjectedHamiltonian, omega: float, delta: float, phase: float = 0.0) -> np.ndarray:
    """Dense ``H`` on the subspace; for tests and small-dimension oracles."""
    dim = h.basis.dim
    m = np.diag(delta * h.diag).astype(complex)
    c = omega * np.exp(1j * phase)
    np.add.at(m, (h.hop_lo, h.hop_hi), c)
    np.add.at(m, (h.hop_hi, h.hop_lo), np.conj(c))
    assert m.shape == (dim, dim)
    return m


def build_full_rydberg_hamiltonian(
    positions,
    params: BlockadeParams,
    box_side: float | None = None,
    cutoff: float | None = None,
) -> np.ndarray:
    """Dense ``sum_v (Omega X_v - Delta n_v) + sum_{v<w} C / r^6 n_v n_w``.

    Basis index ``k`` is the bitmask of excited atoms.  Distances use the
    torus metric when ``box_side`` is given.  Pairs farther apart than
    ``cutoff`` are dropped (default: keep every pair).
    """
    pos = np.asarray(positions, dtype=float).reshape(-1, 2)
    n = len(pos)
    if n > 14:
        raise ValueError("dense Rydberg Hamiltonian limited to n <= 14")
    dim = 1 << n
    idx = np.arange(dim)
    occ = [((idx >> v) & 1).astype(float) for v in range(n)]
    diag = np.zeros(dim)
    for v in range(n):
        diag -= params.delta * occ[v]
    for v in range(n):
        for w in range(v + 1, n):
            d = np.abs(pos[v] - pos[w])
            if box_side is not None:
                d = np.minimum(d, box_side - d)
            r = math.sqrt(d[0] * d[0] + d[1] * d[1])
            if r == 0.0:
                raise ValueError(f"atoms {v} and {w} coincide")
            if cutoff is not None and r > cutoff:
                continue
            diag += params.c6 / r**6 * occ[v] * occ[w]
    hmat = np.diag(diag).astype(complex)
    for v in range(n):
        hmat[idx, idx ^ (1 << v)] += params.omega
    return hmat
