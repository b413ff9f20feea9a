"""Chernoff bounds and derandomization by conditional probabilities.

Every event is a sum of Bernoulli(p) variables over a 0/1 weight support. The
goal is an assignment avoiding every deviation: upper events must end strictly
below ``(1+beta)*mean`` and lower events strictly above ``(1-beta)*mean``.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from fractions import Fraction

SLACK = 2.0**-20


def _frac(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(str(x)) if isinstance(x, float) else Fraction(x)


def chernoff_bound(mean, a, tail: str = "upper") -> float:
    """``exp(-a^2 * mean / 3)``, valid for both tails when ``0 < a < 1``."""
    if tail not in ("upper", "lower"):
        raise ValueError(f"tail must be 'upper' or 'lower', got {tail!r}")
    if not (0 < a < 1):
        raise ValueError(f"deviation a must lie in (0,1), got {a}")
    if mean <= 0:
        raise ValueError("mean must be positive")
    return math.exp(-float(a) ** 2 * float(mean) / 3)


@dataclass(frozen=True)
class DeviationEvent:
    """Deviation of ``sum(X_j for j in support)`` from its mean.

    ``support`` lists the variables with weight one.
    """

    support: tuple[int, ...]
    direction: str
    beta: Fraction

    def __post_init__(self) -> None:
        object.__setattr__(self, "support", tuple(sorted(set(self.support))))
        object.__setattr__(self, "beta", _frac(self.beta))
        if not self.support:
            raise ValueError("an event needs at least one variable of weight 1")
        if self.direction not in ("upper", "lower"):
            raise ValueError(f"direction must be 'upper' or 'lower', got {self.direction!r}")
        if not (0 < self.beta < 1):
            raise ValueError("beta must lie in (0,1)")

    @classmethod
    def from_weights(cls, weights: Sequence[int], direction: str, beta) -> DeviationEvent:
        if any(w not in (0, 1) for w in weights):
            raise ValueError("weights must be 0/1")
        return cls(tuple(j for j, w in enumerate(weights) if w), direction, beta)

    def mean(self, p: Fraction) -> Fraction:
        return p * len(self.support)

    def satisfied(self, x: Sequence[int], p: Fraction) -> bool:
        phi = sum(x[j] for j in self.support)
        mu = self.mean(p)
        if self.direction == "upper":
            return phi < (1 + self.beta) * mu
        return phi > (1 - self.beta) * mu


@dataclass(frozen=True)
class DerandomInstance:
    N: int
    p: Fraction
    events: tuple[DeviationEvent, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        object.__setattr__(self, "p", _frac(self.p))
        object.__setattr__(self, "events", tuple(self.events))
        if not (0 < self.p < 1):
            raise ValueError("p must lie in (0,1)")
        for ev in self.events:
            if ev.support[-1] >= self.N or ev.support[0] < 0:
                raise ValueError("event support outside variable range")

    def score(self) -> float:
        """``sum_i exp(-beta_i^2 * mean_i / 3)``; at most 1/2 for feasibility."""
        return math.fsum(math.exp(-float(ev.beta) ** 2 * float(ev.mean(self.p)) / 3) for ev in self.events)

    def feasible(self) -> bool:
        return self.score() <= 0.5 * (1 + SLACK)

    def satisfied_by(self, x: Sequence[int]) -> bool:
        return all(ev.satisfied(x, self.p) for ev in self.events)


class DerandomizationError(RuntimeError):
    pass


def _logsumexp(vals: Iterable[float]) -> float:
    vals = list(vals)
    if not vals:
        return -math.inf
    top = max(vals)
    if top == -math.inf:
        return top
    return top + math.log(math.fsum(math.exp(v - top) for v in vals))


def derandomize(inst: DerandomInstance, trace: list[float] | None = None) -> list[int]:
    """Fix variables one at a time keeping a pessimistic estimator below 1.

    For event ``i`` with signed moment parameter ``s_i`` the estimator term is
    ``exp(s_i*(fixed partial sum) - s_i*threshold_i) * q_i^(unfixed count)``
    where ``q_i = 1 - p + p*exp(s_i)``. Upper events use ``s = ln(1+beta)``
    and lower events ``s = -ln(1/(1-beta))``. If ``trace`` is given, the log of
    the total estimator is appended after every step.
    """
    if not inst.feasible():
        raise ValueError(f"instance infeasible: score {inst.score():.6g} > 1/2")
    x = _walk(inst, trace)
    if not inst.satisfied_by(x):
        bad = [i for i, ev in enumerate(inst.events) if not ev.satisfied(x, inst.p)]
        raise DerandomizationError(f"estimator walk ended with violated events {bad[:5]}")
    return x


def minimize_estimator(inst: DerandomInstance, trace: list[float] | None = None) -> list[int]:
    """The same walk without the feasibility gate.

    Useful when the score exceeds 1/2: the walk still never increases the
    estimator, but the output is not guaranteed and must be checked.
    """
    return _walk(inst, trace)


def _walk(inst: DerandomInstance, trace: list[float] | None) -> list[int]:
    p = float(inst.p)
    s, logq, logterm, remaining = [], [], [], []
    by_var: list[list[int]] = [[] for _ in range(inst.N)]
    for i, ev in enumerate(inst.events):
        beta = float(ev.beta)
        mu = float(ev.mean(inst.p))
        if ev.direction == "upper":
            si = math.log1p(beta)
            thr = (1 + beta) * mu
        else:
            si = math.log1p(-beta)
            thr = (1 - beta) * mu
        lq = math.log1p(p * math.expm1(si))
        s.append(si)
        logq.append(lq)
        remaining.append(len(ev.support))
        logterm.append(-si * thr + lq * len(ev.support))
        for j in ev.support:
            by_var[j].append(i)
    if trace is not None:
        trace.append(_logsumexp(logterm))

    x = [0] * inst.N
    for j in range(inst.N):
        touched = by_var[j]
        if not touched:
            continue
        with_zero = _logsumexp(logterm[i] - logq[i] for i in touched)
        with_one = _logsumexp(logterm[i] - logq[i] + s[i] for i in touched)
        x[j] = 1 if with_one < with_zero else 0
        for i in touched:
            logterm[i] += -logq[i] + (s[i] if x[j] else 0.0)
        if trace is not None:
            trace.append(_logsumexp(logterm))
    return x
