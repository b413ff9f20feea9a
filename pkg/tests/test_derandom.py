import math
import random
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from hamdec.derandom import (
    DerandomInstance,
    DerandomizationError,
    DeviationEvent,
    chernoff_bound,
    derandomize,
    minimize_estimator,
)


def test_chernoff_closed_forms():
    # oracle: scripts/derive_oracles.py
    assert chernoff_bound(300, Fraction(1, 10)) == pytest.approx(0.36787944117144233)
    assert chernoff_bound(30, Fraction(9, 10)) == pytest.approx(0.0003035391380788668)
    assert chernoff_bound(100 * Fraction(1, 2), Fraction(9, 10), "lower") == pytest.approx(1.3709590863840845e-06)


def test_chernoff_small_deviation_tends_to_one():
    assert chernoff_bound(10, 1e-9) == pytest.approx(1.0)


@pytest.mark.parametrize("a", [0, 1, Fraction(3, 2)])
def test_chernoff_rejects_out_of_range(a):
    with pytest.raises(ValueError):
        chernoff_bound(10, a)


def test_event_validation():
    with pytest.raises(ValueError):
        DeviationEvent((), "upper", Fraction(1, 2))
    with pytest.raises(ValueError):
        DeviationEvent((0,), "upper", 1)
    with pytest.raises(ValueError):
        DeviationEvent((0,), "sideways", Fraction(1, 2))
    assert DeviationEvent.from_weights([0, 1, 1], "lower", "0.5").support == (1, 2)


def test_single_lower_event():
    inst = DerandomInstance(100, Fraction(1, 2), [DeviationEvent(tuple(range(100)), "lower", Fraction(9, 10))])
    assert inst.score() == pytest.approx(math.exp(-13.5))
    x = derandomize(inst)
    assert sum(x) > 5


def test_no_events_gives_zeros():
    assert derandomize(DerandomInstance(7, Fraction(1, 3))) == [0] * 7


def test_infeasible_score_raises():
    inst = DerandomInstance(4, Fraction(1, 2), [DeviationEvent((0, 1), "upper", Fraction(1, 2))])
    with pytest.raises(ValueError):
        derandomize(inst)
    # the ungated walk still returns an assignment
    assert len(minimize_estimator(inst)) == 4


def test_error_type_is_runtime_error():
    assert issubclass(DerandomizationError, RuntimeError)


def test_neighbourhood_windows_on_dense_toy():
    # degree events of a random split of 60 vertices into halves
    rng = random.Random(8)
    n = 60
    out = {x: [y for y in range(n) if y != x and rng.random() < 0.9] for x in range(n)}
    inn = {y: [x for x in range(n) if y in out[x]] for y in range(n)}
    beta = Fraction(9, 10)
    events = []
    for sup in list(out.values()) + list(inn.values()):
        events += [DeviationEvent(tuple(sup), "upper", beta), DeviationEvent(tuple(sup), "lower", beta)]
    inst = DerandomInstance(n, Fraction(1, 2), events)
    assert inst.feasible()
    x = derandomize(inst)
    for sup in list(out.values()) + list(inn.values()):
        hit = sum(x[j] for j in sup)
        assert (1 - beta) * len(sup) / 2 < hit < (1 + beta) * len(sup) / 2


def balanced_instance(seed, N):
    rng = random.Random(seed)
    events = []
    for _ in range(rng.randint(0, 4)):
        sup = tuple(rng.sample(range(N), rng.randint(N // 2, N)))
        events.append(DeviationEvent(sup, rng.choice(["upper", "lower"]), Fraction(19, 20)))
    return DerandomInstance(N, Fraction(1, 2), events)


@given(st.integers(0, 10**6), st.integers(60, 120))
def test_output_satisfies_every_event(seed, N):
    inst = balanced_instance(seed, N)
    if not inst.feasible():
        return
    x = derandomize(inst)
    assert inst.satisfied_by(x)
    assert derandomize(inst) == x


@given(st.integers(0, 10**6), st.integers(20, 80))
def test_estimator_never_increases(seed, N):
    inst = balanced_instance(seed, N)
    trace: list[float] = []
    minimize_estimator(inst, trace)
    assert all(b <= a + 1e-9 for a, b in zip(trace, trace[1:]))
