import random

import pytest
from conftest import random_pair_edges
from hypothesis import given
from hypothesis import strategies as st

from hamdec.graphcore import BipartitePair, Multidigraph, cycle_decomposition, winds_around
from hamdec.hammerge import (
    MergeContext,
    MergeError,
    MergePreconditionError,
    cycle_edges,
    factor_edges,
    find_hamilton,
    is_hamilton_cycle,
    j_schedule,
    linkage,
    merge_at_pair,
    merge_factor,
    verify_cycles,
)


def tournament(n, seed):
    rng = random.Random(seed)
    return Multidigraph.from_edges(n, [(u, v) if rng.random() < 0.5 else (v, u) for u in range(n) for v in range(u + 1, n)])


def winding_factor(k, m, rng):
    """Random perfect matchings V_j -> V_{j+1} around a cycle of k clusters of size m."""
    succ = {}
    for j in range(k):
        targets = list(range(((j + 1) % k) * m, ((j + 1) % k) * m + m))
        rng.shuffle(targets)
        for a, b in zip(range(j * m, j * m + m), targets):
            succ[a] = b
    return cycle_decomposition(succ)


def clusters(k, m):
    return tuple(tuple(range(j * m, (j + 1) * m)) for j in range(k))


def test_directed_cycle_is_found():
    C = Multidigraph.from_edges(7, [(v, (v + 1) % 7) for v in range(7)])
    res = find_hamilton(C)
    assert not res.exhausted and is_hamilton_cycle(C, res.cycle)


def test_complete_digraph_is_cheap():
    K = Multidigraph.from_edges(5, [(u, v) for u in range(5) for v in range(5) if u != v])
    res = find_hamilton(K, budget=100)
    assert is_hamilton_cycle(K, res.cycle)


def test_tournament_with_large_semidegree():
    # oracle: seed 11 is the first with minimum semidegree >= 9 (networkx confirms strong connectivity)
    T = tournament(25, 11)
    assert T.min_semidegree() >= 9
    res = find_hamilton(T, seed=0)
    assert is_hamilton_cycle(T, res.cycle)


def test_no_one_factor_means_exhausted():
    # vertices 1 and 2 both only reach 0
    G = Multidigraph.from_edges(4, [(0, 1), (1, 0), (2, 0), (3, 2), (0, 3)])
    assert find_hamilton(G).exhausted


def test_tiny_graph_rejected():
    with pytest.raises(ValueError):
        find_hamilton(Multidigraph.from_edges(2, [(0, 1), (1, 0)]))


def test_linkage_on_two_clusters():
    F = cycle_decomposition({0: 2, 1: 3, 2: 1, 3: 0})
    assert linkage(F, (0, 1), (2, 3)).sigma == {2: 1, 3: 0}


def test_linkage_rejects_walk_that_never_returns():
    F = cycle_decomposition({0: 1, 1: 0, 2: 3, 3: 2})
    with pytest.raises(ValueError):
        linkage(F, (0,), (2,))


@given(st.integers(0, 10**6), st.integers(2, 5), st.integers(1, 6))
def test_linkage_cycle_type_matches_factor(seed, k, m):
    rng = random.Random(seed)
    F = winding_factor(k, m, rng)
    A, B = clusters(k, m)[0], clusters(k, m)[1]
    sigma = linkage(F, A, B).sigma
    assert sorted(sigma.values()) == list(A)
    # sigma after the matching on (A, B) is a permutation of A with one cycle per factor cycle
    perm = {a: sigma[F.successor[a]] for a in A}
    seen, count = set(), 0
    for a in A:
        if a not in seen:
            count += 1
            while a not in seen:
                seen.add(a)
                a = perm[a]
    assert count == len(F.cycles)


def test_two_two_cycles_merge_into_the_four_cycle():
    F = cycle_decomposition({0: 2, 1: 3, 2: 0, 3: 1})
    P = BipartitePair((0, 1), (2, 3), {(0, 2), (0, 3), (1, 2), (1, 3)})
    ctx = MergeContext(((0, 1), (2, 3)), frozenset({0}), {0: P}, F)
    assert ctx.violations() == []
    res = merge_at_pair(ctx, 0)
    assert res.factor.cycles == ((0, 3, 1, 2),)
    assert (res.cycles_before, res.cycles_after) == (2, 1)


def test_single_cycle_stays_single():
    F = cycle_decomposition({0: 3, 3: 1, 1: 2, 2: 0})
    P = BipartitePair((0, 1), (2, 3), {(0, 3), (1, 2)})
    res = merge_at_pair(MergeContext(((0, 1), (2, 3)), frozenset({0}), {0: P}, F), 0)
    assert len(res.factor.cycles) == 1


def two_cycle_factor(k, m, seed):
    for s in range(seed, seed + 1000):
        F = winding_factor(k, m, random.Random(s))
        if len(F.cycles) == 2:
            return F
    raise AssertionError("no two-cycle factor")


def test_sparse_random_pair_merge():
    k, m = 3, 30
    F = two_cycle_factor(k, m, 0)
    P = BipartitePair(range(30), range(30, 60), random_pair_edges(m, 0.3, 6))
    res = merge_at_pair(MergeContext(clusters(k, m), frozenset({0}), {0: P}, F), 0, seed=1)
    merged = res.factor
    assert len(merged.cycles) == 1 < len(F.cycles)
    assert sorted(merged.successor.values()) == list(range(k * m))
    # only the J pair changed, and only to reservoir edges
    new = factor_edges(merged) - factor_edges(F)
    assert new <= P.edges and all(u < 30 for u, _ in new)
    # the replacement closes sigma into a single m-cycle
    sigma = linkage(F, clusters(k, m)[0], clusters(k, m)[1]).sigma
    a, steps = 0, 0
    while True:
        a = sigma[res.matching[a]]
        steps += 1
        if a == 0:
            break
    assert steps == m


def test_merge_rejects_broken_context():
    F = cycle_decomposition({0: 2, 1: 3, 2: 0, 3: 1})
    P = BipartitePair((0, 1), (2, 3), frozenset())
    with pytest.raises(MergePreconditionError):
        merge_at_pair(MergeContext(((0, 1), (2, 3)), frozenset({0}), {0: P}, F), 0)
    with pytest.raises(MergePreconditionError):
        merge_at_pair(MergeContext(((0, 1), (2, 3)), frozenset(), {}, F), 0)


def test_merge_without_useful_edges_fails_loudly():
    # three 2-cycles and a reservoir that only repeats the old matching
    F = cycle_decomposition({0: 3, 1: 4, 2: 5, 3: 0, 4: 1, 5: 2})
    P = BipartitePair((0, 1, 2), (3, 4, 5), {(0, 3), (1, 4), (2, 5)})
    with pytest.raises(MergeError) as info:
        merge_at_pair(MergeContext(((0, 1, 2), (3, 4, 5)), frozenset({0}), {0: P}, F), 0, retries=1)
    assert info.value.stats["m"] == 3 and info.value.stats["aux_edges"] == 0


def test_merge_factor_gives_hamilton_cycle():
    k, m = 3, 10
    F = next(f for f in (winding_factor(k, m, random.Random(s)) for s in range(100)) if len(f.cycles) >= 3)
    D = clusters(k, m)
    reservoir = {(0, i): random_pair_edges(m, 0.5, 30 + i, offset=((i + 1) % k) * m) for i in range(k)}
    reservoir = {(0, i): {(a + i * m, b) for a, b in es} for (_, i), es in reservoir.items()}
    res = merge_factor(F, [D], [range(k)], reservoir, seed=3)
    assert res.ok
    G = Multidigraph.from_edges(k * m, factor_edges(F) | set().union(*reservoir.values()))
    assert verify_cycles(G, [res.cycle]).ok
    assert winds_around(Multidigraph.from_edges(k * m, cycle_edges(res.cycle)), [0, 1, 2], [v // m for v in range(k * m)])


def test_shared_reservoir_loses_one_per_vertex_per_merge():
    k, m = 3, 12
    D = clusters(k, m)
    pool = {(0, 0): {(a, m + b) for a in range(m) for b in range(m) if (a + b) % 3}}
    original = {a: sum(1 for u, _ in pool[(0, 0)] if u == a) for a in range(m)}
    merges = 0
    for seed in range(4):
        F = two_cycle_factor(k, m, 100 * seed)
        res = merge_factor(F, [D], [[0]], pool, seed=seed)
        if not res.ok:
            continue
        merges += 1
        taken = res.consumed.get((0, 0), {})
        assert len(set(taken.values())) == len(taken)
        pool = {(0, 0): pool[(0, 0)] - set(taken.items())}
    assert merges >= 2
    for a in range(m):
        assert sum(1 for u, _ in pool[(0, 0)] if u == a) >= original[a] - merges


def test_factor_cycle_missing_j_is_caught_before_merging():
    F = cycle_decomposition({0: 1, 1: 0, 2: 3, 3: 2})
    res = merge_factor(F, [((0,), (1,))], [[0]], {(0, 0): {(0, 1)}})
    assert "meets no J pair" in res.failure and res.merges == 0
    assert "no J pair" in merge_factor(F, [((0,), (1,)), ((2,), (3,))], [[0], []], {}).failure
    ctx = MergeContext(((0,), (1,), (2,)), frozenset({0}), {}, F)
    assert any("meets no J pair" in v for v in ctx.violations())


def test_j_schedule_arithmetic():
    assert j_schedule(10, 7) == [1, 1, 1, 2, 2, 2, 3, 3, 3, 3]
    assert j_schedule(4, 3) == [1, 1, 1, 1]
    assert j_schedule(0, 11) == []


def test_verifier_counts_edge_reuse():
    C = Multidigraph.from_edges(3, [(0, 1), (1, 2), (2, 0)])
    assert verify_cycles(C, [(0, 1, 2)]).ok
    rep = verify_cycles(C, [(0, 1, 2), (1, 2, 0)])
    assert not rep.ok and len(rep.problems) == 3
    assert not verify_cycles(C, [(0, 2, 1)]).ok
