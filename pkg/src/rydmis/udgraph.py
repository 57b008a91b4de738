"""Random unit-disk graphs on a periodic box.

Vertices are placed uniformly in an ``L x L`` torus with ``L = sqrt(n / rho)``
and joined whenever their periodic distance is strictly below the unit radius.
Hand-built graphs (no geometry) use the same :class:`Graph` type, which is what
the solvers and the subspace machinery consume.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "BlockadeParams",
    "Graph",
    "blockade_radius",
    "connected_components",
    "generate_erdos_renyi",
    "generate_random_udgraph",
    "graph_from_json",
    "graph_to_json",
    "load_graph",
    "save_graph",
    "torus_distance",
    "unit_disk_edges",
]

GRAPH_FORMAT_VERSION = "rydmis-graph/1"


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected simple graph on vertices ``0..n-1``.

    ``positions``/``box_side``/``rho``/``seed`` are only set for graphs that
    came out of :func:`generate_random_udgraph` (or were loaded from a file
    written from one).
    """

    n: int
    edges: tuple[tuple[int, int], ...]
    positions: np.ndarray | None = None
    box_side: float | None = None
    rho: float | None = None
    seed: int | None = None
    neighbors: tuple[int, ...] = field(init=False, repr=False)

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("vertex count must be non-negative")
        masks = [0] * self.n
        canon = set()
        for u, v in self.edges:
            u, v = int(u), int(v)
            if u == v:
                raise ValueError(f"self-loop on vertex {u}")
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise ValueError(f"edge ({u}, {v}) out of range for n={self.n}")
            masks[u] |= 1 << v
            masks[v] |= 1 << u
            canon.add((min(u, v), max(u, v)))
        object.__setattr__(self, "edges", tuple(sorted(canon)))
        object.__setattr__(self, "neighbors", tuple(masks))

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[Sequence[int]]) -> "Graph":
        return cls(n=n, edges=tuple((int(u), int(v)) for u, v in edges))

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def degree(self, v: int) -> int:
        return self.neighbors[v].bit_count()

    def neighbor_list(self, v: int) -> list[int]:
        m = self.neighbors[v]
        out = []
        while m:
            low = m & -m
            out.append(low.bit_length() - 1)
            m ^= low
        return out

    def adjacency_matrix(self) -> np.ndarray:
        a = np.zeros((self.n, self.n), dtype=bool)
        for u, v in self.edges:
            a[u, v] = a[v, u] = True
        return a

    def complement(self) -> "Graph":
        full = (1 << self.n) - 1
        edges = []
        for u in range(self.n):
            m = full & ~self.neighbors[u] & ~((1 << (u + 1)) - 1)
            while m:
                low = m & -m
                edges.append((u, low.bit_length() - 1))
                m ^= low
        return Graph.from_edges(self.n, edges)

    def fingerprint(self) -> str:
        """Short stable hash of the vertex count and edge list."""
        import hashlib

        h = hashlib.sha256(f"{self.n}:{self.edges}".encode())
        return h.hexdigest()[:16]


@dataclass(frozen=True)
class BlockadeParams:
    """Physical drive parameters: interaction coefficient ``c6``, Rabi
    frequency ``omega`` and detuning ``delta`` (hbar = 1)."""

    c6: float
    omega: float
    delta: float

    def __post_init__(self):
        if not self.c6 > 0:
            raise ValueError("c6 must be positive")


def torus_distance(a: Sequence[float], b: Sequence[float], box_side: float) -> float:
    """Euclidean distance between two points of an ``L x L`` torus.

    For points inside the box the minimum-image offset below equals the
    minimum over the 3x3 grid of periodic images.
    """
    if not box_side > 0:
        raise ValueError("box_side must be positive")
    dx = abs(float(a[0]) - float(b[0]))
    dy = abs(float(a[1]) - float(b[1]))
    dx = min(dx, box_side - dx)
    dy = min(dy, box_side - dy)
    return math.sqrt(dx * dx + dy * dy)


def _pairwise_torus_distances(pos: np.ndarray, box_side: float) -> np.ndarray:
    d = np.abs(pos[:, None, :] - pos[None, :, :])
    d = np.minimum(d, box_side - d)
    return np.sqrt(d[..., 0] * d[..., 0] + d[..., 1] * d[..., 1])


def unit_disk_edges(positions: np.ndarray, box_side: float) -> list[tuple[int, int]]:
    """All pairs ``u < v`` whose torus distance is strictly below 1."""
    pos = np.asarray(positions, dtype=float)
    n = len(pos)
    if n < 2:
        return []
    dist = _pairwise_torus_distances(pos, box_side)
    iu, iv = np.nonzero(np.triu(dist < 1.0, k=1))
    return list(zip(iu.tolist(), iv.tolist()))


def generate_random_udgraph(n: int, rho: float, seed: int) -> Graph:
    """Place ``n`` points uniformly in a periodic box of density ``rho``.

    Positions come from numpy's PCG64 stream (``np.random.default_rng(seed)``),
    drawn as x then y for vertex 0, then vertex 1, and so on.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if not rho > 0:
        raise ValueError("rho must be positive")
    box = math.sqrt(n / rho)
    if box < 1.0:
        raise ValueError(f"box side {box:.4g} < 1 (rho too large for n={n})")
    rng = np.random.default_rng(seed)
    pos = rng.random((n, 2)) * box
    # guard against the float product rounding up to the box side
    pos[pos >= box] = 0.0
    return Graph(
        n=n,
        edges=tuple(unit_disk_edges(pos, box)),
        positions=pos,
        box_side=box,
        rho=float(rho),
        seed=int(seed),
    )


def generate_erdos_renyi(n: int, p: float, seed: int) -> Graph:
    """G(n, p) with pairs visited in lexicographic order (harness option)."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("edge probability must be in [0, 1]")
    rng = np.random.default_rng(seed)
    iu, iv = np.triu_indices(n, k=1)
    keep = rng.random(len(iu)) < p
    return Graph.from_edges(n, zip(iu[keep].tolist(), iv[keep].tolist()))


def connected_components(g: Graph) -> list[list[int]]:
    """Connected components as sorted vertex lists, ordered by smallest member."""
    seen = [False] * g.n
    blocks = []
    for s in range(g.n):
        if seen[s]:
            continue
        seen[s] = True
        block = [s]
        queue = deque([s])
        while queue:
            u = queue.popleft()
            for w in g.neighbor_list(u):
                if not seen[w]:
                    seen[w] = True
                    block.append(w)
                    queue.append(w)
        blocks.append(sorted(block))
    return blocks


def blockade_radius(p: BlockadeParams) -> float:
    """``(C / sqrt((2 Omega)^2 + Delta^2)) ** (1/6)``."""
    scale = math.sqrt((2.0 * p.omega) ** 2 + p.delta**2)
    if scale == 0.0:
        raise ValueError("blockade radius undefined for omega = delta = 0")
    return (p.c6 / scale) ** (1.0 / 6.0)


# -- serialization -----------------------------------------------------------


def _g17(x: float) -> str:
    return format(float(x), ".17g")


def graph_to_json(g: Graph, header: dict | None = None) -> str:
    """Serialize ``g``; floats are written with 17 significant digits."""
    parts = [f'  "format": {json.dumps(GRAPH_FORMAT_VERSION)}']
    if header:
        parts.append(f'  "config": {json.dumps(header, sort_keys=True)}')
    parts.append(f'  "n": {g.n}')
    parts.append(f'  "rho": {"null" if g.rho is None else _g17(g.rho)}')
    parts.append(f'  "box_side": {"null" if g.box_side is None else _g17(g.box_side)}')
    parts.append(f'  "seed": {"null" if g.seed is None else int(g.seed)}')
    if g.positions is None:
        parts.append('  "positions": null')
    else:
        rows = ",\n    ".join(f"[{_g17(x)}, {_g17(y)}]" for x, y in g.positions)
        parts.append(f'  "positions": [\n    {rows}\n  ]' if rows else '  "positions": []')
    edges = ", ".join(f"[{u}, {v}]" for u, v in g.edges)
    parts.append(f'  "edges": [{edges}]')
    return "{\n" + ",\n".join(parts) + "\n}\n"


def graph_from_json(text: str) -> Graph:
    doc = json.loads(text)
    try:
        n = int(doc["n"])
        edges = [tuple(e) for e in doc["edges"]]
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed graph document: {exc}") from exc
    for u, v in edges:
        if not u < v:
            raise ValueError(f"edge [{u}, {v}] must satisfy u < v")
    positions = doc.get("positions")
    box = doc.get("box_side")
    if positions is not None:
        positions = np.asarray(positions, dtype=float).reshape(-1, 2)
        if len(positions) != n:
            raise ValueError("positions length does not match n")
        if box is not None and sorted(edges) != unit_disk_edges(positions, float(box)):
            raise ValueError("stored edges disagree with the unit-disk rule")
    return Graph(
        n=n,
        edges=tuple(edges),
        positions=positions,
        box_side=None if box is None else float(box),
        rho=None if doc.get("rho") is None else float(doc["rho"]),
        seed=None if doc.get("seed") is None else int(doc["seed"]),
    )


def save_graph(g: Graph, path: str | Path, header: dict | None = None) -> None:
    Path(path).write_text(graph_to_json(g, header))


def load_graph(path: str | Path) -> Graph:
    return graph_from_json(Path(path).read_text())
