from collections import Counter
from math import gcd

import pytest
from hypothesis import given
from hypothesis import strategies as st

from hamdec.graphcore import factor_from_cycles
from hamdec.unwind import (
    check_unwinding,
    cycle_distance,
    distance_violations,
    double_unwind,
    progression,
    star_violations,
    unwind_blowup,
    unwind_cycle,
)


def test_progression_values():
    # oracle: scripts/derive_oracles.py
    assert [progression(1, k, 3) for k in range(1, 5)] == [1, 2, 3, 1]
    assert [progression(2, k, 7) for k in range(1, 5)] == [1, 3, 5, 7]
    assert all(progression(d, 1, 11) == 1 for d in range(1, 11))
    with pytest.raises(ValueError):
        progression(0, 1, 3)


@given(st.sampled_from([3, 5, 7, 11, 13]), st.integers(1, 12), st.integers(1, 60))
def test_progression_has_period_p(p, d, k):
    d = d % (p - 1) + 1
    assert progression(d, k + p, p) == progression(d, k, p)


def test_first_edges_of_small_unwinding():
    U = unwind_cycle(4, 3)
    assert U.edges(1)[:3] == [((1, 1), (2, 2)), ((2, 2), (3, 3)), ((3, 3), (4, 1))]
    assert len(U.cycles[0]) == 12
    check_unwinding(U)


@pytest.mark.parametrize("n,p", [(10, 7), (10, 5), (4, 3), (9, 3), (15, 5), (12, 11)])
def test_unwindings_are_disjoint_hamilton_cycles_with_spacing(n, p):
    U = unwind_cycle(n, p)
    assert len(U.cycles) == p - 1
    check_unwinding(U)
    assert distance_violations(U) == []
    assert bool(U.patch_matchings) == (gcd(n, p) > 1)


def test_non_coprime_cycles_subdivide_the_short_unwinding():
    n, p = 10, 5
    U = unwind_cycle(n, p)
    short = unwind_cycle(n - 2, p)
    for d in range(p - 1):
        kept = [v for v in U.cycles[d] if v[0] <= n - 2]
        assert kept == list(short.cycles[d])


def test_no_consecutive_pair_shared_across_steps():
    U = unwind_cycle(11, 7)
    edge_sets = [set(U.edges(d)) for d in range(1, 7)]
    for a in range(6):
        for b in range(a + 1, 6):
            assert not edge_sets[a] & edge_sets[b]


def test_rejects_bad_parameters():
    with pytest.raises(ValueError):
        unwind_cycle(10, 4)
    with pytest.raises(ValueError):
        unwind_cycle(2, 3)


def test_cycle_distance_takes_shorter_direction():
    assert cycle_distance(list(range(10)), 1, 8) == 3
    assert cycle_distance(list(range(10)), 8, 1) == 3


@given(st.integers(2, 12), st.integers(2, 8))
def test_even_fold_unwinding(K, s):
    cycles = unwind_blowup(K, s)
    assert len(cycles) == s - 1
    every = {(j, i) for j in range(1, K + 1) for i in range(1, s + 1)}
    seen = set()
    for cyc in cycles:
        assert set(cyc) == every and len(cyc) == K * s
        for k, u in enumerate(cyc):
            v = cyc[(k + 1) % len(cyc)]
            assert v[0] == u[0] % K + 1
            assert (u, v) not in seen
            seen.add((u, v))


def test_double_unwinding_of_two_cycle():
    F = factor_from_cycles([[0, 1]])
    DU = double_unwind(F, 4, 3)
    assert len(DU.s_factors) == 3
    assert all(len(cycles) == 1 and len(cycles[0]) == 8 for cycles in DU.s_factors)
    assert len(DU.p_factors) == (4 - 1) * (3 - 1)
    assert DU.star


def p_edges(DU):
    for _, _, cycles in DU.p_factors:
        for c in cycles:
            for k in range(len(c)):
                yield c[k], c[(k + 1) % len(c)]


@pytest.mark.parametrize("cycles,s,p", [([[0, 1, 2]], 4, 3), ([[0, 1], [2, 3, 4]], 4, 5), ([[0, 1, 2, 3, 4, 5]], 6, 3)])
def test_slices_tile_their_share_of_the_blow_up(cycles, s, p):
    F = factor_from_cycles(cycles)
    DU = double_unwind(F, s, p)
    edges = list(p_edges(DU))
    assert len(edges) == len(set(edges))
    per_edge = Counter((u[0], v[0]) for u, v in edges)
    expected = {(v, F.successor[v]) for v in range(len(F.successor))}
    assert set(per_edge) == expected
    assert set(per_edge.values()) == {s * (s - 1) * p * (p - 1)}
    # every p-level edge lies over an edge of its own s-level cycle
    for j, _, pcycles in DU.p_factors:
        s_edges = {(c[k], c[(k + 1) % len(c)]) for c in DU.s_factors[j] for k in range(len(c))}
        for c in pcycles:
            assert all((c[k][:2], c[(k + 1) % len(c)][:2]) in s_edges for k in range(len(c)))


@pytest.mark.parametrize("length", [2, 3, 5])
def test_star_property_holds_on_every_slice(length):
    DU = double_unwind(factor_from_cycles([list(range(length))]), 4, 3)
    assert DU.star
    for j, d, pcycles in DU.p_factors:
        for D, pc in zip(DU.s_factors[j], pcycles):
            assert star_violations(D, pc, 3) == []
