"""Robust outneighbourhoods and robust outexpander checks."""

from __future__ import annotations

import itertools
import math
import random
from collections.abc import Iterable
from dataclasses import dataclass
from fractions import Fraction

from .graphcore import Multidigraph

DEFAULT_EXHAUSTIVE_CAP = 22


def _frac(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(str(x)) if isinstance(x, float) else Fraction(x)


@dataclass(frozen=True)
class ExpanderParams:
    nu: Fraction
    tau: Fraction
    alpha: Fraction | None = None
    eta: Fraction | None = None

    def __post_init__(self) -> None:
        for name in ("nu", "tau", "alpha", "eta"):
            val = getattr(self, name)
            if val is not None:
                object.__setattr__(self, name, _frac(val))
        if not (0 < self.nu <= self.tau < 1):
            raise ValueError(f"need 0 < nu <= tau < 1, got nu={self.nu}, tau={self.tau}")
        if self.alpha is not None and not (0 < self.alpha <= 1):
            raise ValueError("alpha must lie in (0,1]")
        if self.eta is not None and not (0 < self.eta < 1):
            raise ValueError("eta must lie in (0,1)")


@dataclass(frozen=True)
class ExpanderVerdict:
    """Outcome of an expansion check.

    ``status`` is ``"holds"`` (exhaustive only), ``"counterexample"`` or
    ``"no violation found"`` (sampled only; never a certificate).
    """

    status: str
    counterexample: frozenset[int] | None = None
    neighbourhood: frozenset[int] | None = None
    checked: int = 0

    @property
    def violated(self) -> bool:
        return self.status == "counterexample"

    def describe(self) -> str:
        if self.status == "counterexample":
            return (
                f"counterexample S={sorted(self.counterexample)} with "
                f"|RN(S)|={len(self.neighbourhood)} after {self.checked} sets"
            )
        if self.status == "holds":
            return f"holds ({self.checked} sets checked exhaustively)"
        return f"no violation found in {self.checked} sampled sets"


def robust_out_neighbourhood(G: Multidigraph, S: Iterable[int], nu) -> frozenset[int]:
    """Vertices with at least ``nu * n`` distinct inneighbours in ``S``."""
    S = set(S)
    threshold = _frac(nu) * G.n
    if not S:
        return frozenset()
    return frozenset(v for v in range(G.n) if sum(1 for u in G.in_mult(v) if u in S) >= threshold)


def _size_window(n: int, tau: Fraction) -> range:
    lo = math.ceil(tau * n)
    hi = math.floor((1 - tau) * n)
    return range(max(lo, 0), hi + 1)


def _violates(G: Multidigraph, S: frozenset[int], nu: Fraction) -> frozenset[int] | None:
    rn = robust_out_neighbourhood(G, S, nu)
    return rn if len(rn) < len(S) + nu * G.n else None


def is_robust_outexpander(
    G: Multidigraph,
    params: ExpanderParams,
    exhaustive: bool = True,
    samples: int = 1000,
    seed: int = 0,
    cap: int = DEFAULT_EXHAUSTIVE_CAP,
) -> ExpanderVerdict:
    """Check ``|RN(S)| >= |S| + nu*n`` for every ``S`` in the size window.

    Exhaustive mode enumerates sets in lexicographic order by size and returns
    the first violation. Sampled mode draws ``samples`` sets with a seeded RNG
    and can only falsify.
    """
    sizes = _size_window(G.n, params.tau)
    checked = 0
    if exhaustive:
        if G.n > cap:
            raise ValueError(f"exhaustive check limited to n <= {cap}, got n={G.n}")
        for k in sizes:
            for combo in itertools.combinations(range(G.n), k):
                S = frozenset(combo)
                checked += 1
                rn = _violates(G, S, params.nu)
                if rn is not None:
                    return ExpanderVerdict("counterexample", S, rn, checked)
        return ExpanderVerdict("holds", checked=checked)
    rng = random.Random(seed)
    if len(sizes) == 0:
        return ExpanderVerdict("no violation found", checked=0)
    for _ in range(samples):
        k = rng.choice(sizes)
        S = frozenset(rng.sample(range(G.n), k))
        checked += 1
        rn = _violates(G, S, params.nu)
        if rn is not None:
            return ExpanderVerdict("counterexample", S, rn, checked)
    return ExpanderVerdict("no violation found", checked=checked)


def semidegree_summary(G: Multidigraph) -> dict[str, int | float]:
    return {
        "n": G.n,
        "edges": G.edge_count,
        "min_semidegree": G.min_semidegree(),
        "max_semidegree": G.max_semidegree(),
        "min_out": min(G.out_degrees, default=0),
        "min_in": min(G.in_degrees, default=0),
    }
