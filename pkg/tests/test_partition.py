import random
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from hamdec.graphcore import Multidigraph, factor_from_cycles
from hamdec.partition import (
    ClusterPartition,
    check_close,
    clean_clusters,
    is_refinement,
    mark_clean_and_red,
    refine_close,
    uniform_refinement,
    uref_violations,
)
from hamdec.unwind import double_unwind


def dense_digraph(n, prob, seed):
    rng = random.Random(seed)
    return Multidigraph.from_edges(n, [(u, v) for u in range(n) for v in range(n) if u != v and rng.random() < prob])


def blocks(k, m, start=0):
    return tuple(tuple(range(start + i * m, start + (i + 1) * m)) for i in range(k))


def test_partition_invariants():
    with pytest.raises(ValueError):
        ClusterPartition((), ((0, 1), (2,)))
    with pytest.raises(ValueError):
        ClusterPartition((0,), ((0, 1), (2, 3)))
    P = ClusterPartition((8,), blocks(2, 4))
    assert (P.m, P.k) == (4, 2)
    assert P.cluster_of()[5] == 1


def test_json_roundtrip(tmp_path):
    P = ClusterPartition((9, 10), blocks(3, 3))
    P.save(tmp_path / "p.json")
    assert ClusterPartition.load(tmp_path / "p.json") == P
    assert set(P.to_json()) == {"exceptional", "clusters"}


def test_refine_by_one_is_identity():
    P = ClusterPartition((), blocks(2, 6))
    assert uniform_refinement(P, 1, [dense_digraph(12, 0.5, 0)], Fraction(1, 10)) is P


def test_indivisible_size_rejected():
    with pytest.raises(ValueError):
        uniform_refinement(ClusterPartition((), blocks(2, 5)), 2, [], Fraction(1, 10))


def test_complete_digraph_any_split_is_uniform():
    n = 12
    K = Multidigraph.from_edges(n, [(u, v) for u in range(n) for v in range(n) if u != v])
    P = ClusterPartition((), blocks(2, 6))
    R = uniform_refinement(P, 3, [K], Fraction(1, 2))
    assert is_refinement(P, R, 3) and R.m == 2
    # any fixed split works: a neighbourhood misses at most the vertex itself
    fixed = ClusterPartition((), blocks(6, 2))
    assert not uref_violations(P, fixed, 3, [K], Fraction(1, 2))


def test_dense_random_refinement_passes_direct_scan():
    G = dense_digraph(240, 0.5, 1)
    P = ClusterPartition((), blocks(2, 120))
    R = uniform_refinement(P, 2, [G], Fraction(3, 10), seed=0)
    assert is_refinement(P, R, 2) and R.m == 60
    assert uref_violations(P, R, 2, [G], Fraction(3, 10)) == []


def test_two_refinements_compose_with_triple_error():
    G = dense_digraph(192, 0.8, 2)
    P = ClusterPartition((), blocks(2, 96))
    eps = Fraction(1, 5)
    R1 = uniform_refinement(P, 2, [G], eps)
    R2 = uniform_refinement(R1, 2, [G], eps)
    assert uref_violations(P, R2, 4, [G], 3 * eps) == []


def test_close_to_itself():
    P = ClusterPartition((0, 1), blocks(3, 5, start=2))
    v = check_close(P, P, Fraction(1, 100))
    assert v.close and v.association.pairs == {0: 0, 1: 1, 2: 2}


def test_swapped_clusters_are_not_close():
    P = ClusterPartition((), blocks(2, 5))
    Q = ClusterPartition((), (tuple(range(5)), tuple(range(5, 10))))
    swapped = ClusterPartition((), (P.clusters[0][:2] + P.clusters[1][2:], P.clusters[1][:2] + P.clusters[0][2:]))
    assert check_close(P, Q, Fraction(1, 10)).close
    v = check_close(P, swapped, Fraction(1, 10))
    assert not v.close and v.witness == 0


def test_close_rejects_size_mismatch():
    with pytest.raises(ValueError):
        check_close(ClusterPartition((), blocks(2, 4)), ClusterPartition((), blocks(2, 6)), Fraction(1, 10))


def perturbed(P, swaps, rng):
    clusters = [list(c) for c in P.clusters]
    for _ in range(swaps):
        i, j = rng.sample(range(len(clusters)), 2)
        a, b = rng.randrange(P.m), rng.randrange(P.m)
        clusters[i][a], clusters[j][b] = clusters[j][b], clusters[i][a]
    return ClusterPartition(P.exceptional, tuple(map(tuple, clusters)))


def test_refine_close_on_toy():
    rng = random.Random(4)
    G = dense_digraph(96, 0.6, 4)
    P = ClusterPartition((), blocks(4, 24))
    Pr = uniform_refinement(P, 2, [G], Fraction(1, 2), strict=False)
    R = perturbed(P, 2, rng)
    assert check_close(P, R, Fraction(1, 10)).close
    out = refine_close(P, Pr, 2, R, Fraction(1, 10))
    assert is_refinement(R, out, 2)
    assert check_close(Pr, out, Fraction(1, 4)).close


def test_refine_close_of_parent_is_the_refinement():
    P = ClusterPartition((), blocks(2, 8))
    Pr = ClusterPartition((), blocks(4, 4))
    assert refine_close(P, Pr, 2, P, Fraction(1, 10)) == Pr


@given(st.integers(0, 10**6))
def test_association_is_a_bijection(seed):
    rng = random.Random(seed)
    P = ClusterPartition((), blocks(5, 20))
    Q = perturbed(P, rng.randint(0, 3), rng)
    v = check_close(P, Q, Fraction(1, 5))
    assert v.close
    assert sorted(v.association.pairs.values()) == list(range(5))


def test_clean_clusters_of_one_long_cycle():
    cyc = [(0, a) for a in range(4)] + [(1, a) for a in range(4)]
    assert clean_clusters([cyc], 4) == {(1, 2), (1, 3)}
    with pytest.raises(ValueError):
        clean_clusters([cyc[:-1]], 4)


@pytest.mark.parametrize("s,p", [(4, 3), (6, 5)])
def test_red_counts_per_adapted_primary_cluster(s, p):
    F = factor_from_cycles([[0, 1, 2], [3, 4]])
    DU = double_unwind(F, s, p)
    for cycles in DU.s_factors:
        scheme = mark_clean_and_red(cycles, s, p, t=3, f=1, F=1)
        for W in range(5):
            own = [(W, a) for a in range(s)]
            clean = [U for U in own if U in scheme.clean]
            if len(clean) != 1:
                continue
            assert sum(U in scheme.red_s_clusters() for U in own) == s - 1
            assert sum(U in scheme.in_red for U in own) == s // 2 - 1
            assert sum(U in scheme.out_red for U in own) == s // 2 - 1
        assert not scheme.in_red & scheme.out_red
        assert not scheme.red_s_clusters() & scheme.clean


def test_red_index_and_half_swap():
    cyc = [(0, a) for a in range(4)] + [(1, a) for a in range(4)]
    first = mark_clean_and_red([cyc], 4, 3, t=8, f=1, F=1)
    second = mark_clean_and_red([cyc], 4, 3, t=8, f=2, F=1)
    assert first.k == 2 and first.red_p_index == 2
    assert mark_clean_and_red([cyc], 4, 3, t=6, f=1, F=1).k == 6
    assert (first.in_red, first.out_red) == (second.out_red, second.in_red)
