import itertools
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from hamdec.expander import ExpanderParams, is_robust_outexpander, robust_out_neighbourhood
from hamdec.graphcore import Multidigraph, blow_up


def complete(n):
    return Multidigraph.from_edges(n, [(u, v) for u in range(n) for v in range(n) if u != v])


def directed_cycle(n):
    return Multidigraph.from_edges(n, [(v, (v + 1) % n) for v in range(n)])


def test_neighbourhood_examples():
    assert robust_out_neighbourhood(complete(4), {0, 1}, Fraction(1, 4)) == {0, 1, 2, 3}
    assert robust_out_neighbourhood(complete(4), set(), Fraction(1, 4)) == frozenset()
    assert robust_out_neighbourhood(directed_cycle(7), {0}, Fraction(1, 7)) == {1}


def test_params_validation():
    with pytest.raises(ValueError):
        ExpanderParams(Fraction(1, 2), Fraction(1, 4))


def test_complete_digraph_holds():
    v = is_robust_outexpander(complete(10), ExpanderParams(Fraction(1, 10), Fraction(1, 5)))
    assert v.status == "holds"
    # all subsets of sizes 2..8
    assert v.checked == sum(len(list(itertools.combinations(range(10), k))) for k in range(2, 9))


def test_cycle_has_counterexample():
    v = is_robust_outexpander(directed_cycle(10), ExpanderParams(Fraction(1, 10), Fraction(1, 5)))
    assert v.violated
    assert len(v.neighbourhood) < len(v.counterexample) + 1


def test_sampled_mode_never_claims_holds():
    v = is_robust_outexpander(complete(12), ExpanderParams("0.1", "0.2"), exhaustive=False, samples=50)
    assert v.status == "no violation found" and v.checked == 50


def test_blow_up_keeps_weakened_expansion():
    nu, tau = Fraction(1, 5), Fraction(1, 5)
    R = complete(5)
    assert is_robust_outexpander(R, ExpanderParams(nu, tau)).status == "holds"
    G, _ = blow_up(R, 2)
    assert is_robust_outexpander(G, ExpanderParams(nu**3, 2 * tau)).status == "holds"


@given(st.integers(3, 9), st.sets(st.integers(0, 8)), st.fractions(Fraction(1, 20), 1))
def test_neighbourhood_is_monotone_in_nu(n, S, nu):
    S = {v for v in S if v < n}
    G = complete(n)
    small = robust_out_neighbourhood(G, S, nu)
    big = robust_out_neighbourhood(G, S, nu / 2)
    assert small <= big
