"""Exact maximum-independent-set solvers.

Vertex sets are Python ints used as bitmasks (bit ``v`` set means vertex
``v`` is a member), which keeps the set algebra in the inner loops cheap and
has no capacity limit.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .udgraph import Graph

__all__ = [
    "MISResult",
    "TooManySetsError",
    "branch_and_bound_mis",
    "brute_force_mis",
    "enumerate_maximal_independent_sets",
    "is_independent",
    "mask_from_vertices",
    "vertices_of",
]

BRUTE_FORCE_MAX_N = 24


class TooManySetsError(RuntimeError):
    """Maximal-set enumeration produced more sets than the configured cap."""


def vertices_of(mask: int) -> tuple[int, ...]:
    out = []
    while mask:
        low = mask & -mask
        out.append(low.bit_length() - 1)
        mask ^= low
    return tuple(out)


def mask_from_vertices(vertices) -> int:
    m = 0
    for v in vertices:
        m |= 1 << int(v)
    return m


@dataclass(frozen=True)
class MISResult:
    size: int
    witness: int
    nodes_explored: int
    wall_time: float
    optimal: bool = True

    @property
    def vertices(self) -> tuple[int, ...]:
        return vertices_of(self.witness)


def is_independent(g: Graph, s: int) -> bool:
    """True iff no edge of ``g`` has both endpoints in the bitmask ``s``."""
    if s >> g.n:
        raise ValueError("vertex set contains indices outside the graph")
    m = s
    while m:
        low = m & -m
        if g.neighbors[low.bit_length() - 1] & s:
            return False
        m ^= low
    return True


def _independence_table(g: Graph) -> np.ndarray:
    """Boolean table over all 2^n subsets, built by adding the top vertex."""
    indep = np.ones(1, dtype=bool)
    for v in range(g.n):
        lower = np.arange(1 << v, dtype=np.int64)
        ok = indep & ((lower & (g.neighbors[v] & ((1 << v) - 1))) == 0)
        indep = np.concatenate([indep, ok])
    return indep


def _popcount(a: np.ndarray) -> np.ndarray:
    a = a.astype(np.uint64)
    c = np.zeros(a.shape, dtype=np.int64)
    while np.any(a):
        c += (a & np.uint64(1)).astype(np.int64)
        a >>= np.uint64(1)
    return c


def brute_force_mis(g: Graph) -> MISResult:
    """Scan all ``2^n`` subsets.

    The witness is the lexicographically smallest maximum set when each set is
    read as its ascending vertex list.
    """
    if g.n > BRUTE_FORCE_MAX_N:
        raise ValueError(f"brute force limited to n <= {BRUTE_FORCE_MAX_N}, got {g.n}")
    t0 = time.perf_counter()
    indep = _independence_table(g)
    masks = np.nonzero(indep)[0]
    sizes = _popcount(masks)
    best = int(sizes.max())
    cands = masks[sizes == best]
    # smallest ascending vertex list == largest bit-reversed mask
    rev = np.zeros(len(cands), dtype=np.int64)
    for v in range(g.n):
        rev |= ((cands >> v) & 1) << (g.n - 1 - v)
    witness = int(cands[int(np.argmax(rev))])
    return MISResult(best, witness, 1 << g.n, time.perf_counter() - t0)


class _Timeout(Exception):
    pass


def _greedy_independent_set(g: Graph) -> int:
    """Minimum-degree greedy; seeds the branch-and-bound lower bound."""
    alive = (1 << g.n) - 1
    chosen = 0
    while alive:
        best_v, best_d = -1, None
        m = alive
        while m:
            low = m & -m
            v = low.bit_length() - 1
            d = (g.neighbors[v] & alive).bit_count()
            if best_d is None or d < best_d:
                best_v, best_d = v, d
            m ^= low
        chosen |= 1 << best_v
        alive &= ~(g.neighbors[best_v] | (1 << best_v))
    return chosen


def branch_and_bound_mis(g: Graph, time_limit: float | None = None) -> MISResult:
    """Exact MIS by branch and bound with a greedy clique-cover bound.

    Each node partitions the candidate set greedily into cliques of ``g``; an
    independent set takes at most one vertex per clique, so
    ``|current| + #cliques`` bounds every completion.  Vertices are branched
    on in reverse cover order so the bound can prune the remaining prefix.

    On expiry of ``time_limit`` (seconds) the best set found so far is
    returned with ``optimal=False``.
    """
    t0 = time.perf_counter()
    nbr = g.neighbors
    deadline = None if time_limit is None else t0 + time_limit
    best = [_greedy_independent_set(g)]
    best_size = [best[0].bit_count()]
    nodes = [0]

    def cover_order(cand: int):
        order, bound = [], []
        rest = cand
        k = 0
        while rest:
            k += 1
            q = rest
            while q:
                low = q & -q
                v = low.bit_length() - 1
                rest ^= low
                q &= nbr[v]
                order.append(v)
                bound.append(k)
        return order, bound

    def expand(current: int, size: int, cand: int):
        nodes[0] += 1
        if deadline is not None and nodes[0] % 1024 == 0 and time.perf_counter() > deadline:
            raise _Timeout
        order, bound = cover_order(cand)
        for i in range(len(order) - 1, -1, -1):
            if size + bound[i] <= best_size[0]:
                return
            v = order[i]
            bit = 1 << v
            sub = cand & ~nbr[v] & ~bit
            if sub:
                expand(current | bit, size + 1, sub)
            elif size + 1 > best_size[0]:
                best[0] = current | bit
                best_size[0] = size + 1
            cand &= ~bit

    optimal = True
    try:
        if g.n:
            expand(0, 0, (1 << g.n) - 1)
    except _Timeout:
        optimal = False
    return MISResult(best_size[0], best[0], nodes[0], time.perf_counter() - t0, optimal)


def enumerate_maximal_independent_sets(g: Graph, max_count: int | None = 1_000_000) -> list[int]:
    """All maximal independent sets, via Bron-Kerbosch on the complement graph.

    Pivot: the vertex of ``P | X`` with the most complement-neighbours in
    ``P``, ties to the lowest index.  Output is sorted by (size, mask).
    """
    n = g.n
    full = (1 << n) - 1
    comp = [full & ~g.neighbors[v] & ~(1 << v) for v in range(n)]
    out: list[int] = []

    def bk(r: int, p: int, x: int):
        if not p and not x:
            out.append(r)
            if max_count is not None and len(out) > max_count:
                raise TooManySetsError(f"more than {max_count} maximal independent sets")
            return
        pivot, best = -1, -1
        m = p | x
        while m:
            low = m & -m
            u = low.bit_length() - 1
            c = (p & comp[u]).bit_count()
            if c > best:
                pivot, best = u, c
            m ^= low
        m = p & ~comp[pivot]
        while m:
            low = m & -m
            v = low.bit_length() - 1
            bk(r | low, p & comp[v], x & comp[v])
            p &= ~low
            x |= low
            m ^= low

    if n == 0:
        return [0]
    bk(0, full, 0)
    out.sort(key=lambda s: (s.bit_count(), s))
    return out
