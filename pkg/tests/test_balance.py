import random
from collections import Counter

import pytest
from hypothesis import given
from hypothesis import strategies as st

from hamdec.balance import (
    BalancingProblem,
    ReservoirExhausted,
    b2_violations,
    balancing_constants,
    build_rstar,
    realize_balancing,
    red_tally,
    shadow_sequence,
)
from hamdec.graphcore import Multidigraph


def ring(k):
    succ = {i: (i + 1) % k for i in range(k)}
    return succ, {v: u for u, v in succ.items()}


def problem_on_ring(k, T_in, T_out, s_plus, s_minus, b, c):
    succ, pred = ring(k)
    return BalancingProblem(frozenset(T_in), frozenset(T_out), s_plus, s_minus, b, c, succ, pred)


def complete_clusters(k):
    return {i: [j for j in range(k) if j != i] for i in range(k)}


def test_tally_without_red_edges():
    s_plus, s_minus = red_tally([], {0: "A"}, [9])
    assert not s_plus and not s_minus


def test_tally_counts_edges_into_one_cluster():
    owner = {v: v // 5 for v in range(10)}
    s_plus, s_minus = red_tally([(99, v) for v in range(5, 9)], owner, [99], T_in={1}, T_out=set())
    assert s_minus == {1: 4} and not s_plus


def test_tally_rejects_stray_and_non_red_edges():
    owner = {v: v // 5 for v in range(10)}
    with pytest.raises(ValueError):
        red_tally([(0, 99)], owner, [99], T_in=set(), T_out={1})
    with pytest.raises(ValueError):
        red_tally([(0, 1)], owner, [99])


def test_tally_sums_match_exceptional_degrees():
    rng = random.Random(5)
    owner = {v: v // 4 for v in range(24)}
    exceptional = [100, 101, 102]
    kappa = 3
    red = [(x, v) for x in exceptional for v in rng.sample(range(12), kappa)]
    red += [(v, x) for x in exceptional for v in rng.sample(range(12, 24), kappa)]
    s_plus, s_minus = red_tally(red, owner, exceptional, T_in={0, 1, 2}, T_out={3, 4, 5})
    assert sum(s_plus.values()) == sum(s_minus.values()) == kappa * len(exceptional)


def test_constants_round_up_to_one():
    assert balancing_constants("0.01", "0.1", 2, 100) == (1, 1)
    b, c = balancing_constants(1, "0.5", 8, 4)
    assert (b, c) == (8, 32)


def test_problem_rejects_overlapping_sides():
    with pytest.raises(ValueError):
        problem_on_ring(4, {1}, {1}, {}, {}, 1, 1)


def test_rstar_out_red_to_in_red():
    p = problem_on_ring(6, {3}, {1}, {1: 1}, {3: 1}, 2, 1)
    R = build_rstar(p, {1: [3]})
    assert R.real == {(R.index(1), R.index(3)): (1, 3)}


def test_rstar_in_red_uses_predecessor():
    p = problem_on_ring(6, {2, 4}, {0}, {0: 2}, {2: 1, 4: 1}, 2, 1)
    R = build_rstar(p, {1: [4]})
    assert (R.index(2), R.index(4)) in R.real
    assert R.real[(R.index(2), R.index(4))] == (1, 4)


def test_rstar_needs_both_sides():
    with pytest.raises(ValueError):
        build_rstar(problem_on_ring(4, {1}, set(), {}, {1: 1}, 1, 1), {})


def test_zero_tallies_on_a_cycle_give_the_cycle():
    # ring P A X B Y C Z: R* is A -> B -> C -> A
    order = ["P", "A", "X", "B", "Y", "C", "Z"]
    succ = {order[i]: order[(i + 1) % 7] for i in range(7)}
    pred = {v: u for u, v in succ.items()}
    p = BalancingProblem(frozenset({"A"}), frozenset({"B", "C"}), {}, {}, 3, 1, succ, pred)
    R = build_rstar(p, {"P": ["Y"], "B": ["Z"], "C": ["A"]})
    assert R.graph.edge_count == 3
    shadow = shadow_sequence(p, R)
    assert shadow.demands() == {("P", "Y"): 1, ("B", "Z"): 1, ("C", "A"): 1}


def run_balancing(k, m, T_in, T_out, s_plus, s_minus, b, c, cap, clean=()):
    p = problem_on_ring(k, T_in, T_out, s_plus, s_minus, b, c)
    shadow = shadow_sequence(p, build_rstar(p, complete_clusters(k)))
    assert shadow.feasible
    allowed = {i: range(i * m, (i + 1) * m) if i not in clean else () for i in range(k)}

    def reservoir(U, Z):
        return [(u, v) for u in range(U * m, (U + 1) * m) for v in range(Z * m, (Z + 1) * m)]

    B = realize_balancing(shadow, reservoir, allowed, cap)
    d_plus, d_minus = Counter(s_plus), Counter(s_minus)
    for u, v in B:
        d_plus[u // m] += 1
        d_minus[v // m] += 1
    return p, shadow, B, d_plus, d_minus


def test_two_red_clusters_are_balanced():
    p, shadow, B, d_plus, d_minus = run_balancing(6, 5, {1}, {4}, {4: 3}, {1: 3}, b=5, c=1, cap=3)
    assert shadow.demands() == {(0, 5): 4, (4, 1): 1}
    assert b2_violations(p.successor, d_plus, d_minus) == []


def test_shadow_degrees_exact_on_four_clusters():
    p = problem_on_ring(8, {1, 5}, {2, 6}, {2: 4, 6: 1}, {1: 2, 5: 3}, 4, 2)
    R = build_rstar(p, complete_clusters(8))
    H = shadow_sequence(p, R).flow.subgraph
    for i, V in enumerate(R.clusters):
        assert H.out_degrees[i] == p.n_plus(V)
        assert H.in_degrees[i] == p.n_minus(V)
    assert H.max_multiplicity() <= 4


def test_cap_saturates_at_b():
    # the in-red side must send c + 3 edges along a single R* edge
    p = problem_on_ring(6, {1}, {4}, {4: 3}, {1: 3}, 4, 1)
    R = build_rstar(p, complete_clusters(6))
    assert shadow_sequence(p, R).feasible
    tight = problem_on_ring(6, {1}, {4}, {4: 3}, {1: 3}, 3, 1)
    assert not shadow_sequence(tight, build_rstar(tight, complete_clusters(6))).feasible


def test_unbalanced_tallies_rejected():
    p = problem_on_ring(6, {1}, {4}, {4: 1}, {1: 3}, 4, 1)
    with pytest.raises(ValueError):
        shadow_sequence(p, build_rstar(p, complete_clusters(6)))


def test_empty_shadow_realizes_nothing():
    p = problem_on_ring(4, {1}, {3}, {}, {}, 1, 0)
    shadow = shadow_sequence(p, build_rstar(p, complete_clusters(4)))
    assert shadow.demands() == {}
    assert realize_balancing(shadow, lambda U, Z: [], {}, 1) == set()


def test_three_edges_on_one_pair_respect_the_cap():
    p, shadow, B, d_plus, d_minus = run_balancing(6, 6, {1}, {4}, {4: 3}, {1: 3}, b=3, c=0, cap=1)
    assert shadow.demands() == {(0, 5): 3}
    assert len(B) == 3
    out, inn = Counter(u for u, _ in B), Counter(v for _, v in B)
    assert max(out.values()) <= 1 and max(inn.values()) <= 1
    assert b2_violations(p.successor, d_plus, d_minus) == []


def test_starved_reservoir_reports_pair():
    p = problem_on_ring(6, {1}, {4}, {4: 3}, {1: 3}, 5, 1)
    shadow = shadow_sequence(p, build_rstar(p, complete_clusters(6)))
    with pytest.raises(ReservoirExhausted) as info:
        realize_balancing(shadow, lambda U, Z: [(U * 2, Z * 2)], {i: range(i * 2, i * 2 + 2) for i in range(6)}, 5)
    assert info.value.needed > info.value.available


def test_b2_with_unequal_sizes():
    succ, _ = ring(3)
    sizes = {0: 4, 1: 3, 2: 4}
    # cluster 1 lost a vertex: kappa*|1| - d+(1) must match kappa*|2| - d-(2)
    assert b2_violations(succ, {1: 0, 0: 2}, {2: 2, 1: 0}, sizes, kappa=2) == []
    assert b2_violations(succ, {1: 0}, {2: 0}, sizes, kappa=2) == [0, 1]


@given(st.integers(0, 10**6))
def test_random_tallies_end_balanced(seed):
    # red clusters sit apart on the ring, as the unwinding spacing guarantees
    rng = random.Random(seed)
    k, m = 16, 6
    spots = rng.sample([0, 4, 8, 12], 4)
    T_in, T_out = set(spots[:2]), set(spots[2:])
    total = rng.randint(1, 6)
    a, b_ = rng.randint(0, total), rng.randint(0, total)
    s_minus = dict(zip(sorted(T_in), (a, total - a)))
    s_plus = dict(zip(sorted(T_out), (b_, total - b_)))
    clean = {2, 6, 10, 14}
    p, shadow, B, d_plus, d_minus = run_balancing(k, m, T_in, T_out, s_plus, s_minus, b=total + 2, c=1, cap=4, clean=clean)
    assert b2_violations(p.successor, d_plus, d_minus) == []
    assert all(u // m not in clean and v // m not in clean for u, v in B)
