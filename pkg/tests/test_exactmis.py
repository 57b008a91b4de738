import itertools

import pytest
from hypothesis import given
from hypothesis import strategies as st

from rydmis.exactmis import (
    TooManySetsError,
    branch_and_bound_mis,
    brute_force_mis,
    enumerate_maximal_independent_sets,
    is_independent,
    mask_from_vertices,
    vertices_of,
)
from rydmis.udgraph import Graph, generate_erdos_renyi, generate_random_udgraph

K2 = Graph.from_edges(2, [(0, 1)])
K3 = Graph.from_edges(3, [(0, 1), (0, 2), (1, 2)])
PATH3 = Graph.from_edges(3, [(0, 1), (1, 2)])
C4 = Graph.from_edges(4, [(0, 1), (1, 2), (2, 3), (0, 3)])
C5 = Graph.from_edges(5, [(i, (i + 1) % 5) for i in range(5)])


def naive_mis(g):
    for k in range(g.n, -1, -1):
        for combo in itertools.combinations(range(g.n), k):
            if all(not (u in combo and v in combo) for u, v in g.edges):
                return k
    return 0


@st.composite
def graphs(draw, max_n=10):
    n = draw(st.integers(0, max_n))
    pairs = [(u, v) for u in range(n) for v in range(u + 1, n)]
    chosen = draw(st.lists(st.sampled_from(pairs), unique=True)) if pairs else []
    return Graph.from_edges(n, chosen)


def test_mask_helpers():
    assert vertices_of(0b1011) == (0, 1, 3)
    assert mask_from_vertices([0, 1, 3]) == 0b1011


def test_is_independent_examples():
    assert is_independent(C5, 0)
    assert not is_independent(K2, 0b11)
    assert is_independent(PATH3, 0b101)
    with pytest.raises(ValueError):
        is_independent(K2, 0b100)


def test_brute_force_examples():
    assert brute_force_mis(K3).size == 1
    r = brute_force_mis(PATH3)
    assert r.size == 2 and r.vertices == (0, 2)
    assert brute_force_mis(Graph.from_edges(5, [])).size == 5


def test_brute_force_lexicographic_witness():
    # two edges: MIS sets {0,2},{0,3},{1,2},{1,3}; smallest list is (0, 2)
    g = Graph.from_edges(4, [(0, 1), (2, 3)])
    assert brute_force_mis(g).vertices == (0, 2)
    # 4-cycle: {0,2} beats {1,3}
    assert brute_force_mis(C4).vertices == (0, 2)


def test_brute_force_rejects_large():
    with pytest.raises(ValueError):
        brute_force_mis(Graph.from_edges(25, []))


def test_bnb_examples():
    assert branch_and_bound_mis(PATH3).size == 2
    assert branch_and_bound_mis(C5).size == 2
    g = generate_random_udgraph(20, 3.0, 4)
    assert branch_and_bound_mis(g).size == brute_force_mis(g).size


def test_empty_graph_zero_vertices():
    g = Graph.from_edges(0, [])
    assert brute_force_mis(g).size == 0
    assert branch_and_bound_mis(g).size == 0
    assert enumerate_maximal_independent_sets(g) == [0]


@given(graphs())
def test_solvers_agree_with_naive(g):
    k = naive_mis(g)
    bf = brute_force_mis(g)
    bb = branch_and_bound_mis(g)
    assert bf.size == bb.size == k
    assert is_independent(g, bf.witness) and is_independent(g, bb.witness)
    assert bb.witness.bit_count() == k and bb.optimal


def test_bnb_time_limit_flags_non_optimal():
    g = generate_erdos_renyi(120, 0.05, 1)
    r = branch_and_bound_mis(g, time_limit=1e-4)
    assert not r.optimal
    assert is_independent(g, r.witness) and r.size == r.witness.bit_count()


@pytest.mark.parametrize("n,rho,seed", [(16, 1.0, 0), (18, 3.0, 1), (20, 7.0, 2)])
def test_bnb_matches_brute_force_ud(n, rho, seed):
    g = generate_random_udgraph(n, rho, seed)
    assert branch_and_bound_mis(g).size == brute_force_mis(g).size


def test_maximal_examples():
    assert enumerate_maximal_independent_sets(PATH3) == [0b010, 0b101]
    assert enumerate_maximal_independent_sets(K3) == [0b001, 0b010, 0b100]
    assert enumerate_maximal_independent_sets(C4) == [0b0101, 0b1010]


@given(graphs(max_n=9))
def test_maximal_sets_complete_and_maximal(g):
    sets = enumerate_maximal_independent_sets(g)
    assert len(sets) == len(set(sets))
    full = (1 << g.n) - 1
    expected = []
    for s in range(full + 1):
        if not is_independent(g, s):
            continue
        if all(not is_independent(g, s | 1 << v) for v in range(g.n) if not s >> v & 1):
            expected.append(s)
    assert sorted(sets) == sorted(expected)
    assert max(s.bit_count() for s in sets) == brute_force_mis(g).size


def test_maximal_cap():
    with pytest.raises(TooManySetsError):
        enumerate_maximal_independent_sets(Graph.from_edges(8, [(0, 1), (2, 3), (4, 5), (6, 7)]),
                                           max_count=10)
