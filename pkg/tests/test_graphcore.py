import random

import pytest
from conftest import derangement
from hypothesis import given
from hypothesis import strategies as st

from hamdec.graphcore import (
    BipartitePair,
    Multidigraph,
    blow_up,
    cycle_decomposition,
    factor_from_cycles,
    winds_around,
)
from hamdec.unwind import unwind_cycle


def test_multiplicities_and_degrees():
    G = Multidigraph.from_edges(3, [(0, 1), (0, 1), (1, 2), (2, 0, 3)])
    assert G.multiplicity(0, 1) == 2
    assert G.edge_count == 6
    assert G.out_degrees == [2, 1, 3]
    assert G.in_degrees == [3, 2, 1]
    assert G.min_semidegree() == 1


def test_loops_rejected_unless_allowed():
    with pytest.raises(ValueError):
        Multidigraph.from_edges(2, [(0, 0)])
    assert Multidigraph.from_edges(2, [(0, 0)], allow_loops=True).edge_count == 1


def test_subtract_more_than_present():
    G = Multidigraph.from_edges(2, [(0, 1)])
    with pytest.raises(ValueError):
        G.subtract(Multidigraph.from_edges(2, [(0, 1), (0, 1)]))


def test_json_roundtrip(tmp_path):
    G = Multidigraph.from_edges(4, [(0, 1), (1, 2, 2), (3, 0)])
    G.save(tmp_path / "g.json")
    assert Multidigraph.load(tmp_path / "g.json") == G


def test_pair_edges_must_go_left_to_right():
    with pytest.raises(ValueError):
        BipartitePair((0, 1), (2, 3), frozenset({(2, 0)}))


def test_blow_up_of_two_cycle_by_one_is_identity():
    R = Multidigraph.from_edges(2, [(0, 1), (1, 0)])
    assert blow_up(R, 1)[0] == R


def test_blow_up_triangle_by_two():
    R = Multidigraph.from_edges(3, [(0, 1), (1, 2), (2, 0)])
    G, cls = blow_up(R, 2)
    assert (G.n, G.edge_count) == (6, 12)
    assert cls == [0, 0, 1, 1, 2, 2]
    for x, y in [(0, 1), (1, 2), (2, 0)]:
        assert all(G.multiplicity(2 * x + i, 2 * y + j) == 1 for i in range(2) for j in range(2))


@given(st.integers(0, 10_000), st.integers(1, 4))
def test_blow_up_scales_semidegree(seed, r):
    rng = random.Random(seed)
    edges = [(u, v) for u in range(5) for v in range(5) if u != v and rng.random() < 0.5]
    R = Multidigraph.from_edges(5, edges)
    assert blow_up(R, r)[0].min_semidegree() == r * R.min_semidegree()


def test_winds_around_matchings_and_inner_edge():
    cyc = [0, 1, 2]
    assign = [0, 0, 1, 1, 2, 2]
    G = Multidigraph.from_edges(6, [(0, 2), (1, 3), (2, 4), (3, 5), (4, 0), (5, 1)])
    assert winds_around(G, cyc, assign)
    assert not winds_around(G.add(Multidigraph.from_edges(6, [(0, 1)])), cyc, assign)


@pytest.mark.parametrize("n,p", [(10, 7), (10, 5), (9, 3)])
def test_unwound_cycles_wind_around_the_base_cycle(n, p):
    U = unwind_cycle(n, p)
    assign = [v // p for v in range(n * p)]
    for cyc in U.id_cycles():
        G = Multidigraph.from_edges(n * p, [(cyc[k], cyc[(k + 1) % len(cyc)]) for k in range(len(cyc))])
        assert winds_around(G, list(range(n)), assign)


def test_cycle_decomposition_small_cases():
    assert cycle_decomposition([1, 2, 3, 0]).cycles == ((0, 1, 2, 3),)
    assert len(cycle_decomposition([1, 0, 3, 2]).cycles) == 2
    with pytest.raises(ValueError):
        cycle_decomposition([0, 2, 1])


def test_cycle_decomposition_matches_trace_oracle():
    perm = derangement(10, random.Random(3))
    # oracle: scripts/derive_oracles.py, follow-the-successor trace
    assert perm == [9, 4, 8, 1, 7, 0, 5, 6, 2, 3]
    assert len(cycle_decomposition(perm).cycles) == 2


@given(st.integers(2, 30), st.integers(0, 10**6))
def test_cycles_partition_the_vertices(n, seed):
    F = cycle_decomposition(derangement(n, random.Random(seed)))
    flat = [v for c in F.cycles for v in c]
    assert sorted(flat) == list(range(n))
    assert factor_from_cycles(F.cycles).successor == F.successor
    for c in F.cycles:
        assert all(F.successor[c[k]] == c[(k + 1) % len(c)] for k in range(len(c)))
