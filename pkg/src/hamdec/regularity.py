"""Density and (super)regularity checks, random edge slicing, trimming and
bounded-degree extraction for bipartite pairs."""

from __future__ import annotations

import math
import random
from collections.abc import Sequence
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .factorflow import maximum_matching
from .graphcore import BipartitePair, Multidigraph

DEFAULT_REGULARITY_CAP = 24
SLICE_RETRIES = 16


def _frac(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(str(x)) if isinstance(x, float) else Fraction(x)


@dataclass(frozen=True)
class RegularityParams:
    """Regularity parameters; ``beta1`` and ``beta2`` are derived from ``beta`` and ``gamma``."""

    eps: Fraction
    d: Fraction
    beta: Fraction
    gamma: Fraction
    xi: Fraction

    def __post_init__(self) -> None:
        for name in ("eps", "d", "beta", "gamma", "xi"):
            object.__setattr__(self, name, _frac(getattr(self, name)))
        if not (0 < self.eps < self.d <= 1):
            raise ValueError("need 0 < eps < d <= 1")

    @property
    def beta1(self) -> Fraction:
        return (1 - 5 * self.gamma) * self.beta

    @property
    def beta2(self) -> Fraction:
        return (1 - self.gamma**2) * self.beta1


@dataclass(frozen=True)
class RegularityVerdict:
    """``status`` is ``"pass"``, ``"violating"`` or ``"no violation found"``.

    A density violation carries the subsets ``X, Y``; a degree or overall
    density violation carries ``vertex`` or ``reason`` instead.
    """

    status: str
    X: frozenset[int] | None = None
    Y: frozenset[int] | None = None
    vertex: int | None = None
    reason: str = ""

    @property
    def ok(self) -> bool:
        return self.status != "violating"


def density(P: BipartitePair) -> Fraction:
    if not P.left or not P.right:
        raise ValueError("density of a pair with an empty class")
    return Fraction(len(P.edges), len(P.left) * len(P.right))


def _matrix(P: BipartitePair) -> np.ndarray:
    li = {a: i for i, a in enumerate(P.left)}
    ri = {b: j for j, b in enumerate(P.right)}
    M = np.zeros((len(P.left), len(P.right)), dtype=np.int64)
    for a, b in P.edges:
        M[li[a], ri[b]] = 1
    return M


def _extreme_subpairs(M: np.ndarray, eps: Fraction, xs: np.ndarray):
    """For each row subset in ``xs`` (boolean rows) find the column subsets of
    every admissible size with the largest and smallest edge counts, and
    yield violating ``(row mask, column index array)`` pairs."""
    a, b = M.shape
    total = int(M.sum())
    num, den = eps.numerator, eps.denominator
    kmin = max(1, math.ceil(eps * b))
    sizes_x = xs.sum(axis=1)
    cols = xs.astype(np.int64) @ M
    order = np.argsort(-cols, axis=1, kind="stable")
    srt = np.take_along_axis(cols, order, axis=1)
    top = np.cumsum(srt, axis=1)
    bottom = np.cumsum(srt[:, ::-1], axis=1)
    for k in range(kmin, b + 1):
        xy = sizes_x * k
        # |e_XY*a*b - total*|X|*k| > eps*|X|*k*a*b, in integers
        for sums, rev in ((top[:, k - 1], False), (bottom[:, k - 1], True)):
            dev = np.abs(sums * a * b - total * xy) * den
            bad = np.nonzero(dev > num * xy * a * b)[0]
            if bad.size:
                i = int(bad[0])
                idx = order[i, ::-1][:k] if rev else order[i, :k]
                return i, idx
    return None


def check_regular(
    P: BipartitePair,
    eps,
    exhaustive: bool | None = None,
    samples: int = 200,
    seed: int = 0,
    cap: int = DEFAULT_REGULARITY_CAP,
) -> RegularityVerdict:
    """Check ``|d(A,B) - d(X,Y)| <= eps`` for all large enough ``X, Y``.

    For a fixed ``X`` the extreme ``Y`` of each size are the columns with the
    most and the fewest edges into ``X``, so only row subsets are enumerated.
    ``exhaustive=None`` picks exhaustive mode when ``|A|+|B| <= cap``.
    """
    eps = _frac(eps)
    a, b = len(P.left), len(P.right)
    if exhaustive is None:
        exhaustive = a + b <= cap
    if exhaustive and a + b > cap:
        raise ValueError(f"exhaustive regularity check limited to |A|+|B| <= {cap}")
    M = _matrix(P)
    swapped = a > b
    left, right = (P.left, P.right)
    if swapped:
        M = M.T
        left, right = right, left
    rows = M.shape[0]
    xmin = max(1, math.ceil(eps * rows))
    if exhaustive:
        masks = np.arange(1 << rows, dtype=np.int64)
        xs = ((masks[:, None] >> np.arange(rows)) & 1).astype(bool)
        xs = xs[xs.sum(axis=1) >= xmin]
        status = "pass"
    else:
        rng = np.random.default_rng(seed)
        xs = np.zeros((samples, rows), dtype=bool)
        for s in range(samples):
            k = int(rng.integers(xmin, rows + 1))
            xs[s, rng.choice(rows, size=k, replace=False)] = True
        status = "no violation found"
    for start in range(0, len(xs), 4096):
        hit = _extreme_subpairs(M, eps, xs[start : start + 4096])
        if hit is not None:
            i, idx = hit
            X = frozenset(left[j] for j in np.nonzero(xs[start + i])[0])
            Y = frozenset(right[int(j)] for j in idx)
            if swapped:
                X, Y = Y, X
            return RegularityVerdict("violating", X, Y, reason="subpair density deviates")
    return RegularityVerdict(status)


def _degree_violation(P: BipartitePair, eps: Fraction, d: Fraction) -> int | None:
    for v in P.left:
        if abs(Fraction(P.degree(v)) - d * len(P.right)) > eps * len(P.right):
            return v
    for v in P.right:
        if abs(Fraction(P.degree(v)) - d * len(P.left)) > eps * len(P.left):
            return v
    return None


def check_eps_d_regular(P: BipartitePair, eps, d, **kw) -> RegularityVerdict:
    eps, d = _frac(eps), _frac(d)
    if abs(density(P) - d) > eps:
        return RegularityVerdict("violating", reason=f"density {density(P)} outside {d}±{eps}")
    return check_regular(P, eps, **kw)


def check_superregular(P: BipartitePair, eps, d, **kw) -> RegularityVerdict:
    """(eps, d)-regularity plus every degree within ``(d ± eps)`` times the other class size."""
    eps, d = _frac(eps), _frac(d)
    v = _degree_violation(P, eps, d)
    if v is not None:
        return RegularityVerdict("violating", vertex=v, reason=f"degree of {v} outside window")
    return check_eps_d_regular(P, eps, d, **kw)


def slice_pair(
    P: BipartitePair, gammas: Sequence, d, eps, seed: int = 0, retries: int = SLICE_RETRIES
) -> list[BipartitePair]:
    """Split ``P`` into ``len(gammas)`` edge-disjoint spanning pairs.

    Each edge joins slice ``k`` with probability ``gammas[k]/d`` (or none).
    Vertices whose degree is within ``(d ± eps)`` of the other class size must
    get slice degree within ``(gamma_k ± eps^(1/12))`` of it; otherwise a new
    seed is tried.
    """
    gammas = [_frac(g) for g in gammas]
    d, eps = _frac(d), _frac(eps)
    if sum(gammas) > d:
        raise ValueError(f"slice probabilities sum to {sum(gammas) / d} > 1")
    probs = [float(g / d) for g in gammas]
    window = float(eps) ** (1 / 12)
    edges = sorted(P.edges)
    typical = [
        (v, len(P.right) if side == 0 else len(P.left))
        for side, cls in enumerate((P.left, P.right))
        for v in cls
        if abs(Fraction(P.degree(v)) - d * (len(P.right) if side == 0 else len(P.left)))
        <= eps * (len(P.right) if side == 0 else len(P.left))
    ]
    for attempt in range(retries):
        rng = random.Random(seed * 1_000_003 + attempt)
        parts: list[set] = [set() for _ in gammas]
        for e in edges:
            x = rng.random()
            acc = 0.0
            for k, pk in enumerate(probs):
                acc += pk
                if x < acc:
                    parts[k].add(e)
                    break
        slices = [BipartitePair(P.left, P.right, frozenset(s)) for s in parts]
        if all(
            abs(J.degree(v) / m - float(g)) <= window for J, g in zip(slices, gammas) for v, m in typical
        ):
            return slices
    raise RuntimeError(f"slice degree post-check failed for {retries} seeds")


def trim_to_superregular(
    G: Multidigraph, clusters: Sequence[Sequence[int]], eps, gamma, strict: bool = True
) -> list[list[int]]:
    """Trim a cycle of clusters ``V_1 .. V_k`` (pairs ``(V_j, V_{j+1})``) to superregular pairs.

    Removes exactly ``ceil(2*eps*m)`` vertices from every cluster, including
    all whose out-degree into the next cluster or in-degree from the previous
    one differs from ``gamma*m`` by more than ``2*eps*m``. With ``strict``
    off, more deviant vertices than that are tolerated and the most deviant
    ones are removed.
    """
    eps, gamma = _frac(eps), _frac(gamma)
    k = len(clusters)
    m = len(clusters[0])
    if any(len(c) != m for c in clusters):
        raise ValueError("clusters must have equal size")
    drop = math.ceil(2 * eps * m)
    out = []
    for j, V in enumerate(clusters):
        nxt = set(clusters[(j + 1) % k])
        prv = set(clusters[(j - 1) % k])
        scored = []
        for v in V:
            dout = sum(1 for w in G.out_mult(v) if w in nxt)
            din = sum(1 for w in G.in_mult(v) if w in prv)
            dev = max(abs(dout - gamma * m), abs(din - gamma * m))
            scored.append((dev, v))
        deviant = [v for dev, v in scored if dev > 2 * eps * m]
        if strict and len(deviant) > drop:
            raise ValueError(f"cluster {j} has {len(deviant)} deviant vertices, more than {drop}")
        scored.sort(key=lambda t: (-t[0], t[1]))
        removed = {v for _, v in scored[:drop]}
        out.append([v for v in V if v not in removed])
    return out


def bounded_degree_subgraph(P: BipartitePair, d0) -> BipartitePair:
    """Union of ``floor(d0*m)`` successively removed maximum matchings.

    Maximum degree is at most ``d0*m``; the average degree must reach
    ``d0*m/8`` or an error is raised.
    """
    d0 = _frac(d0)
    m = max(len(P.left), len(P.right))
    rounds = math.floor(d0 * m)
    remaining = set(P.edges)
    chosen: set = set()
    for _ in range(rounds):
        adj: dict[int, list[int]] = {a: [] for a in P.left}
        for a, b in sorted(remaining):
            adj[a].append(b)
        match = maximum_matching(sorted(P.left), adj)
        if not match:
            break
        for a, b in match.items():
            remaining.discard((a, b))
            chosen.add((a, b))
    H = BipartitePair(P.left, P.right, frozenset(chosen))
    avg = Fraction(2 * len(chosen), len(P.left) + len(P.right))
    if avg < d0 * m / 8:
        raise ValueError(f"average degree {float(avg):.3f} below d0*m/8 = {float(d0 * m / 8):.3f}")
    return H


def pair_from_cycle(G: Multidigraph, clusters: Sequence[Sequence[int]], j: int) -> BipartitePair:
    return BipartitePair.from_graph(G, clusters[j], clusters[(j + 1) % len(clusters)])
