"""End-to-end approximate Hamilton decomposition at desk scale.

The chain is: certified cluster partition, reduced multidigraph ``R(beta)``,
removal of ``W`` and 1-factorization of the remainder, reservoir splitting,
per-type trimming and refinement, double unwinding into slices, bridge and
exceptional vertices, balancing, kappa-regular slice subgraphs, slice
1-factorization, merging and a final verifier.

Every asymptotic inequality of the construction is evaluated with the
configured constants. Failures are recorded per slice or per factor and the run
continues; only verified cycles are returned.
"""

from __future__ import annotations

import json
import logging
import math
import random
import time
from collections import Counter, defaultdict
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import asdict, dataclass, field, fields, replace
from fractions import Fraction
from pathlib import Path

from .balance import (
    BalancingProblem,
    ReservoirExhausted,
    b2_violations,
    balancing_constants,
    build_rstar,
    realize_balancing,
    red_tally,
    shadow_sequence,
)
from .factorflow import (
    CutCertificate,
    DegreePrescription,
    MaxFlow,
    one_factorize,
    prescribed_subgraph,
    superregular_prescribed,
)
from .graphcore import BipartitePair, Multidigraph, OneFactor, factor_from_cycles
from .hammerge import cycle_edges, factor_edges, find_hamilton, is_hamilton_cycle, j_schedule, merge_factor, verify_cycles
from .partition import ClusterPartition, mark_clean_and_red, uniform_refinement
from .regularity import slice_pair, trim_to_superregular
from .unwind import double_unwind, is_prime

log = logging.getLogger(__name__)

Edge = tuple[int, int]
PKey = tuple[int, int, int]  # p-cluster (primary, s-index, p-index)

_RATIONAL = (
    "beta", "gamma", "d", "xi", "eps_tilde", "eps", "eps_prime", "eps_s", "eps_p", "eps_2p",
    "eta", "nu", "tau", "alpha", "d_prime", "h3_fraction", "kappa_scale",
)


def _frac(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(str(x)) if isinstance(x, float) else Fraction(x)


@dataclass(frozen=True)
class PipelineConfig:
    """Constants and run controls.

    The first block mirrors the constant hierarchy of the construction; the
    ordering between them is checked by :meth:`validate` and only reported.
    The desk knobs at the end (``kappa_scale``, ``red_degree_cap``,
    ``balance_b``/``balance_c``, ``balance_degree_cap``, ``h3_fraction``,
    ``r_tilde_mode``) replace quantities that round to zero at small cluster
    sizes; at their defaults the formulas are used unchanged.
    """

    s: int = 4
    p: int = 5
    beta: Fraction = Fraction(1, 10)
    gamma: Fraction = Fraction(1, 10)
    d: Fraction = Fraction(3, 10)
    xi: Fraction = Fraction(1, 20)
    eps_tilde: Fraction = Fraction(1, 20)
    eps: Fraction = Fraction(1, 20)
    eps_prime: Fraction = Fraction(1, 10)
    eps_s: Fraction = Fraction(1, 10)
    eps_p: Fraction = Fraction(1, 10)
    eps_2p: Fraction = Fraction(1, 10)
    eta: Fraction = Fraction(1, 10)
    nu: Fraction = Fraction(1, 20)
    tau: Fraction = Fraction(1, 10)
    alpha: Fraction | None = None
    d_prime: Fraction = Fraction(1, 20)
    seed: int = 0
    hamilton_budget: int = 20_000
    merge_retries: int = 4
    merge_passes: int = 2
    max_clusters: int = 12
    max_types: int | None = None
    trim: bool = True
    refine: bool = True
    balance: bool = True
    bridges: bool = True
    kappa_scale: Fraction = Fraction(1)
    red_degree_cap: int | None = None
    balance_b: int | None = None
    balance_c: int | None = None
    balance_degree_cap: int | None = None
    h3_fraction: Fraction | None = None
    r_tilde_mode: str = "formula"

    def __post_init__(self) -> None:
        for name in _RATIONAL:
            v = getattr(self, name)
            if v is not None:
                object.__setattr__(self, name, _frac(v))
        if self.s < 2 or self.s % 2:
            raise ValueError(f"s must be a positive even integer, got {self.s}")
        if self.p <= 2 or not is_prime(self.p):
            raise ValueError(f"p must be an odd prime, got {self.p}")
        if not (0 < self.beta <= 1 and 0 < self.gamma < Fraction(1, 5)):
            raise ValueError("need 0 < beta <= 1 and 0 < gamma < 1/5")
        if self.r_tilde_mode not in ("formula", "max"):
            raise ValueError("r_tilde_mode must be 'formula' or 'max'")
        if self.kappa_scale <= 0:
            raise ValueError("kappa_scale must be positive")

    @property
    def beta1(self) -> Fraction:
        return (1 - 5 * self.gamma) * self.beta

    @property
    def beta2(self) -> Fraction:
        return (1 - self.gamma**2) * self.beta1

    @property
    def q(self) -> Fraction:
        return self.d_prime / self.beta

    def F(self, r_p: int) -> int:
        """Number of slices per residue class given the first in-red half."""
        return max(r_p // (4 * self.p), 1)

    def kappa(self, m_p: int) -> int:
        return math.floor(self.kappa_scale * (1 - self.gamma) * self.beta1 * m_p)

    def validate(self) -> list[str]:
        """Orderings of the constant hierarchy that fail at these values."""
        chain = [
            ("eps_tilde", self.eps_tilde), ("eps", self.eps), ("eps_prime", self.eps_prime),
            ("xi", self.xi), ("1/p", Fraction(1, self.p)),
        ]
        waivers = [f"{a} < {b} fails ({x} >= {y})" for (a, x), (b, y) in zip(chain, chain[1:]) if not x < y]
        if self.d_prime >= self.beta:
            waivers.append("d_prime < beta fails")
        if self.beta > self.d:
            waivers.append("beta <= d fails")
        if self.nu >= self.tau:
            waivers.append("nu < tau fails")
        if self.kappa_scale != 1:
            waivers.append(f"kappa scaled by {self.kappa_scale}")
        for w in waivers:
            log.info("waiver: %s", w)
        return waivers

    def to_json(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            out[f.name] = str(v) if isinstance(v, Fraction) else v
        return out

    @classmethod
    def from_json(cls, data: Mapping) -> PipelineConfig:
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys {sorted(unknown)}")
        return cls(**{k: (Fraction(v) if k in _RATIONAL and v is not None else v) for k, v in data.items()})

    @classmethod
    def load(cls, path: str | Path) -> PipelineConfig:
        return cls.from_json(json.loads(Path(path).read_text()))


# ------------------------------------------------------------- instances


@dataclass(frozen=True)
class Instance:
    graph: Multidigraph
    partition: ClusterPartition
    reduced: Multidigraph
    kind: str


def random_regular_digraph(L: int, k: int, rng: random.Random, tries: int = 1000) -> Multidigraph:
    """Simple loopless ``k``-regular digraph on ``L`` vertices from ``k`` random permutations."""
    if not 0 <= k < L:
        raise ValueError(f"need 0 <= k < L, got k={k}, L={L}")
    for _ in range(tries):
        edges: set[Edge] = set()
        ok = True
        for _ in range(k):
            perm = list(range(L))
            for _ in range(100):
                rng.shuffle(perm)
                if all(perm[v] != v and (v, perm[v]) not in edges for v in range(L)):
                    break
            else:
                ok = False
                break
            edges.update((v, perm[v]) for v in range(L))
        if ok:
            return Multidigraph.from_edges(L, sorted(edges))
    return Multidigraph.from_edges(L, [(v, (v + j) % L) for v in range(L) for j in range(1, k + 1)])


def regular_bipartite(m: int, r: int, rng: random.Random) -> list[Edge]:
    """Random ``r``-regular bipartite graph on ``m + m`` vertices.

    Starts from a circulant, randomizes by degree-preserving switches and
    relabels the right side.
    """
    if not 0 <= r <= m:
        raise ValueError("need 0 <= r <= m")
    edges = [(a, (a + j) % m) for a in range(m) for j in range(r)]
    present = set(edges)
    if 0 < r < m:
        for _ in range(4 * m * r):
            i, j = rng.randrange(len(edges)), rng.randrange(len(edges))
            (a, b), (c, e) = edges[i], edges[j]
            if a == c or b == e or (a, e) in present or (c, b) in present:
                continue
            present -= {(a, b), (c, e)}
            present |= {(a, e), (c, b)}
            edges[i], edges[j] = (a, e), (c, b)
    perm = list(range(m))
    rng.shuffle(perm)
    return sorted((a, perm[b]) for a, b in edges)


def near_regular_digraph(n: int, k: int, slack: int, rng: random.Random) -> Multidigraph:
    """Simple loopless digraph with every semidegree in ``k - slack .. k``.

    A circulant ``k``-regular digraph is randomized by loop-free switches, then
    random edges are deleted while both endpoints stay above ``k - slack``.
    """
    if not 0 <= k < n or slack < 0:
        raise ValueError("need 0 <= k < n and slack >= 0")
    edges = [(u, (u + j) % n) for u in range(n) for j in range(1, k + 1)]
    present = set(edges)
    for _ in range(4 * n * k):
        i, j = rng.randrange(len(edges)), rng.randrange(len(edges))
        (a, b), (c, e) = edges[i], edges[j]
        if a == e or c == b or (a, e) in present or (c, b) in present:
            continue
        present -= {(a, b), (c, e)}
        present |= {(a, e), (c, b)}
        edges[i], edges[j] = (a, e), (c, b)
    out = Counter(u for u, _ in edges)
    inn = Counter(v for _, v in edges)
    rng.shuffle(edges)
    kept = []
    for u, v in edges:
        if rng.random() < 0.5 and out[u] > k - slack and inn[v] > k - slack:
            out[u] -= 1
            inn[v] -= 1
        else:
            kept.append((u, v))
    return Multidigraph.from_edges(n, sorted(kept))


def generate_instance(
    kind: str,
    seed: int = 0,
    *,
    L: int = 6,
    m: int = 60,
    d=Fraction(1, 2),
    degree: int = 3,
    reduced: Multidigraph | None = None,
    n: int = 25,
    alpha=Fraction(1, 2),
    gamma=None,
) -> Instance:
    """``blowup``: clusters of size ``m`` joined by exactly ``round(d*m)``-regular
    bipartite pairs along a reduced digraph (random ``degree``-regular unless
    given). ``tournament``: circulant regular tournament on odd ``n``.
    ``quasirandom``: every ordered pair independently with probability ``alpha``,
    or, with ``gamma`` given, a randomized digraph whose semidegrees all lie in
    ``(alpha +- gamma) n``. The last two come with a single-cluster partition.
    """
    rng = random.Random(seed)
    if kind == "blowup":
        R = reduced if reduced is not None else random_regular_digraph(L, degree, rng)
        L = R.n
        if m < 1 or not 0 < _frac(d) <= 1:
            raise ValueError("need m >= 1 and 0 < d <= 1")
        r = round(_frac(d) * m)
        edges = []
        for (a, b) in sorted(R.mult):
            edges += [(a * m + u, b * m + v) for u, v in regular_bipartite(m, r, rng)]
        G = Multidigraph.from_edges(L * m, edges)
        P = ClusterPartition((), tuple(tuple(range(a * m, (a + 1) * m)) for a in range(L)))
        return Instance(G, P, R, kind)
    if kind == "tournament":
        if n < 3 or n % 2 == 0:
            raise ValueError("a regular tournament needs odd n >= 3")
        G = Multidigraph.from_edges(n, [(v, (v + j) % n) for v in range(n) for j in range(1, (n - 1) // 2 + 1)])
        return Instance(G, ClusterPartition((), (tuple(range(n)),)), Multidigraph(1), kind)
    if kind == "quasirandom":
        alpha = _frac(alpha)
        if n < 2 or not 0 < alpha <= 1:
            raise ValueError("need n >= 2 and 0 < alpha <= 1")
        if gamma is not None:
            k = round(alpha * n)
            G = near_regular_digraph(n, k, math.floor(min(_frac(gamma) * n, k - (alpha - _frac(gamma)) * n)), rng)
            return Instance(G, ClusterPartition((), (tuple(range(n)),)), Multidigraph(1), kind)
        a = float(alpha)
        G = Multidigraph.from_edges(n, [(u, v) for u in range(n) for v in range(n) if u != v and rng.random() < a])
        return Instance(G, ClusterPartition((), (tuple(range(n)),)), Multidigraph(1), kind)
    raise ValueError(f"unknown instance kind {kind!r}")


# --------------------------------------------------------------- reduction


@dataclass
class Reduction:
    """Base clusters after eviction, ``R(beta)``, ``W`` and the factors of the rest.

    ``pieces[(a, b, c)]`` is the density-``beta`` subpair of ``G`` attached to
    copy ``c`` of the edge ``ab``; ``copies[t][(a, b)]`` is the copy used by
    factor ``t``. Copies ``0 .. W.mult(a, b) - 1`` belong to ``W``.
    """

    clusters: list[tuple[int, ...]]
    exceptional: tuple[int, ...]
    densities: dict[Edge, Fraction]
    reduced: Multidigraph
    pieces: dict[tuple[int, int, int], BipartitePair]
    W: Multidigraph
    r_tilde: int
    factors: list[OneFactor]
    copies: list[dict[Edge, int]]
    alpha_tilde: Fraction
    drop: int
    evicted: dict[str, int]
    waivers: list[str] = field(default_factory=list)

    @property
    def m(self) -> int:
        return len(self.clusters[0]) if self.clusters else 0


def _trim_drop(m: int, eps: Fraction, trim: bool) -> int:
    return math.ceil(2 * eps * m) if trim else 0


def _divisible_size(m: int, unit: int, eps: Fraction, trim: bool) -> int | None:
    for size in range(m, 0, -1):
        rest = size - _trim_drop(size, eps, trim)
        if rest > 0 and rest % unit == 0:
            return size
    return None


def reduce_and_regularize(G: Multidigraph, partition: ClusterPartition, config: PipelineConfig) -> Reduction:
    """Reduced multidigraph, bad-vertex eviction, divisibility trim, ``W`` and factors."""
    cfg = config
    clusters = [tuple(c) for c in partition.clusters]
    L, m = len(clusters), partition.m
    if L > cfg.max_clusters:
        raise ValueError(f"{L} clusters exceed max_clusters={cfg.max_clusters}")
    waivers: list[str] = []
    pairs: dict[Edge, BipartitePair] = {}
    dens: dict[Edge, Fraction] = {}
    for a in range(L):
        for b in range(L):
            if a != b:
                P = BipartitePair.from_graph(G, clusters[a], clusters[b])
                pairs[(a, b)] = P
                dens[(a, b)] = Fraction(len(P.edges), m * m)
    mult = {e: math.floor(x / cfg.beta) for e, x in dens.items() if x >= cfg.d and x >= cfg.beta}
    pieces: dict[tuple[int, int, int], BipartitePair] = {}
    for k, ((a, b), K) in enumerate(sorted(mult.items())):
        sl = slice_pair(pairs[(a, b)], [cfg.beta] * K, dens[(a, b)], cfg.eps_tilde, seed=cfg.seed * 7717 + k)
        for c, piece in enumerate(sl):
            pieces[(a, b, c)] = piece

    # a vertex is bad if its degree in too many of its pieces leaves (beta +- 2 eps~) m
    window = 2 * cfg.eps_tilde * m
    bad_pairs: Counter = Counter()
    incident: Counter = Counter()
    for (a, b, c), P in pieces.items():
        incident[a] += 1
        incident[b] += 1
        for x in P.left:
            if abs(P.degree(x) - cfg.beta * m) > window:
                bad_pairs[x] += 1
        for y in P.right:
            if abs(P.degree(y) - cfg.beta * m) > window:
                bad_pairs[y] += 1
    bad = [[x for x in C if bad_pairs[x] > cfg.xi * incident[a]] for a, C in enumerate(clusters)]
    quota = max((len(b) for b in bad), default=0)
    if quota > cfg.eps_tilde * m / cfg.xi:
        waivers.append(f"{quota} bad vertices in a cluster exceed eps~ m/xi = {float(cfg.eps_tilde * m / cfg.xi):.2f}")
    unit = 2 * cfg.s * cfg.p
    target = _divisible_size(m - quota, unit, cfg.eps, cfg.trim)
    if target is None:
        raise ValueError(f"cluster size {m} too small for 2sp={unit} after trimming")

    removed: list[int] = []
    kept = []
    for a, C in enumerate(clusters):
        order = sorted(C, key=lambda x: (-bad_pairs[x], x))
        out = set(order[: m - target])
        removed += sorted(out)
        kept.append(tuple(x for x in C if x not in out))
    evicted = {"bad": sum(len(b) for b in bad), "fill": L * quota - sum(len(b) for b in bad), "divisibility": L * (m - quota - target)}
    exceptional = tuple(sorted(set(partition.exceptional) | set(removed)))
    keep = set().union(*map(set, kept)) if kept else set()
    pieces = {
        (a, b, c): BipartitePair(kept[a], kept[b], frozenset(e for e in P.edges if e[0] in keep and e[1] in keep))
        for (a, b, c), P in pieces.items()
    }

    Rb = Multidigraph(L, mult)
    alpha_t = cfg.alpha if cfg.alpha is not None else Fraction(G.min_semidegree(), G.n)
    dmin = Rb.min_semidegree() if L > 1 else 0
    if cfg.r_tilde_mode == "formula":
        candidates = [max(min(math.floor((alpha_t - cfg.gamma) * L / cfg.beta), dmin), 0)]
    else:
        candidates = list(range(dmin, -1, -1))
    W = None
    r_tilde = 0
    for r in candidates:
        dem = DegreePrescription(
            {v: Rb.out_degree(v) - r for v in range(L)}, {v: Rb.in_degree(v) - r for v in range(L)}, strict=False
        )
        res = prescribed_subgraph(Rb, dem)
        if res.feasible:
            W, r_tilde = res.subgraph, r
            break
    if W is None:
        raise ValueError(f"no W leaves an r~-regular remainder for r~ in {candidates[:3]}")
    factors = one_factorize(Rb.subtract(W), r_tilde) if r_tilde else []
    nxt = {e: W.multiplicity(*e) for e in mult}
    copies = []
    for F in factors:
        ct = {}
        for e in F.edges():
            ct[e] = nxt[e]
            nxt[e] += 1
        copies.append(ct)
    return Reduction(kept, exceptional, dens, Rb, pieces, W, r_tilde, factors, copies, alpha_t,
                     _trim_drop(target, cfg.eps, cfg.trim), evicted, waivers)


def regularize_almost_regular(G: Multidigraph, alpha, gamma) -> RegularizeResult:
    """Remove a subgraph so that exactly ``floor((alpha - sqrt(gamma)) n)``-regular remains."""
    alpha, gamma = _frac(alpha), _frac(gamma)
    n = G.n
    target = math.floor(alpha * n - _sqrt_frac(gamma) * n)
    if target < 0:
        raise ValueError("target degree is negative")
    lo, hi = (alpha - gamma) * n, (alpha + gamma) * n
    outside = sum(1 for v in range(n) for d in (G.out_degree(v), G.in_degree(v)) if not lo <= d <= hi)
    out_dem = {v: G.out_degree(v) - target for v in range(n)}
    in_dem = {v: G.in_degree(v) - target for v in range(n)}
    if min(list(out_dem.values()) + list(in_dem.values()), default=0) < 0:
        return RegularizeResult(
            None, None, target, None, outside, f"minimum semidegree {G.min_semidegree()} below target {target}"
        )
    res = prescribed_subgraph(G, DegreePrescription(out_dem, in_dem, strict=False))
    if not res.feasible:
        return RegularizeResult(None, None, target, res.certificate, outside, "flow infeasible")
    return RegularizeResult(G.subtract(res.subgraph), res.subgraph, target, None, outside)


@dataclass(frozen=True)
class RegularizeResult:
    remainder: Multidigraph | None
    removed: Multidigraph | None
    target: int
    certificate: CutCertificate | None
    degrees_outside_window: int
    failure: str | None = None

    @property
    def ok(self) -> bool:
        return self.remainder is not None and self.remainder.is_regular(self.target)


def _sqrt_frac(x: Fraction):
    a, b = math.isqrt(x.numerator), math.isqrt(x.denominator)
    if a * a == x.numerator and b * b == x.denominator:
        return Fraction(a, b)
    return Fraction(math.sqrt(x))


# --------------------------------------------------------------- reservoirs


@dataclass
class Reservoirs:
    """Edge-disjoint slices of every ``R(beta)`` piece, keyed ``(a, b, copy)``."""

    gstar: dict[tuple[int, int, int], BipartitePair] = field(default_factory=dict)
    h0_plus: dict[tuple[int, int, int], BipartitePair] = field(default_factory=dict)
    h0_minus: dict[tuple[int, int, int], BipartitePair] = field(default_factory=dict)
    h1_plus: dict[tuple[int, int, int], BipartitePair] = field(default_factory=dict)
    h1_minus: dict[tuple[int, int, int], BipartitePair] = field(default_factory=dict)
    h2: dict[tuple[int, int, int], BipartitePair] = field(default_factory=dict)
    report: dict = field(default_factory=dict)

    NAMES = ("gstar", "h0_plus", "h0_minus", "h1_plus", "h1_minus", "h2")

    def between(self, name: str, a: int, b: int) -> set[Edge]:
        out: set[Edge] = set()
        for (x, y, _), P in getattr(self, name).items():
            if x == a and y == b:
                out |= P.edges
        return out

    def all_edges(self, name: str) -> set[Edge]:
        return set().union(*(P.edges for P in getattr(self, name).values())) if getattr(self, name) else set()


def split_reservoirs(reduction: Reduction, config: PipelineConfig) -> Reservoirs:
    """Split every piece into ``G*`` (density ``beta1``) and five ``gamma*beta`` reservoirs."""
    cfg = config
    res = Reservoirs()
    gammas = [cfg.beta1] + [cfg.gamma * cfg.beta] * 5
    for k, (key, P) in enumerate(sorted(reduction.pieces.items())):
        parts = slice_pair(P, gammas, cfg.beta, cfg.eps_tilde, seed=cfg.seed * 104_729 + k)
        for name, part in zip(Reservoirs.NAMES, parts):
            getattr(res, name)[key] = part
    # (H0) and (H1) are scanned, not enforced
    m = reduction.m
    h0_floor = cfg.gamma * cfg.d * m / 2
    h0_bad = sum(
        1 for P in res.h0_plus.values() for x in P.left if P.degree(x) < h0_floor
    ) + sum(1 for P in res.h0_minus.values() for y in P.right if P.degree(y) < h0_floor)
    n = sum(len(c) for c in reduction.clusters) + len(reduction.exceptional)
    h1_floor = cfg.gamma * reduction.alpha_tilde * n / 3
    out1: Counter = Counter()
    in1: Counter = Counter()
    for P in res.h1_plus.values():
        for a, b in P.edges:
            out1[a] += 1
            in1[b] += 1
    verts = [v for c in reduction.clusters for v in c]
    h1_bad = sum(1 for v in verts if min(out1[v], in1[v]) < h1_floor)
    res.report = {"h0_floor": float(h0_floor), "h0_violations": h0_bad, "h1_floor": float(h1_floor), "h1_violations": h1_bad}
    return res


# ------------------------------------------------------------------ slices


@dataclass
class Slice:
    """One slice: a 1-factor of p-clusters with its vertex sets and red edges.

    ``clusters[V]`` are the vertices of p-cluster ``V`` in this slice and
    ``halves[V]`` its two 2p-subclusters; ``red_half[V]`` says which half of a
    red cluster may carry red edges. ``exceptional`` maps each vertex outside
    the clusters to how it got there (``core``, ``spec``, ``comp`` or ``bridge``).
    """

    index: int
    t: int
    j: int
    d: int
    cycles: tuple[tuple[PKey, ...], ...]
    clusters: dict[PKey, tuple[int, ...]]
    halves: dict[PKey, tuple[tuple[int, ...], tuple[int, ...]]]
    exceptional: dict[int, str]
    T_in: frozenset
    T_out: frozenset
    red_half: dict[PKey, int]
    kappa: int
    n: int
    p: int
    pair_edges: dict[tuple[PKey, PKey], set[Edge]] = field(default_factory=dict)
    red_edges: set[Edge] = field(default_factory=set)
    rp_out: dict[PKey, set[PKey]] = field(default_factory=dict)
    bridges: list[tuple[int, int, int]] = field(default_factory=list)
    red_cap: int = 1
    failure: str | None = None

    @property
    def successor(self) -> dict[PKey, PKey]:
        return {c[k]: c[(k + 1) % len(c)] for c in self.cycles for k in range(len(c))}

    @property
    def predecessor(self) -> dict[PKey, PKey]:
        return {v: u for u, v in self.successor.items()}

    def cluster_of(self) -> dict[int, PKey]:
        return {v: V for V, vs in self.clusters.items() for v in vs}

    def designated(self, V: PKey) -> tuple[int, ...]:
        """The 2p-subcluster of ``V`` allowed to carry red and balancing edges."""
        return self.halves[V][self.red_half.get(V, 0)]

    def pairs(self) -> list[tuple[PKey, PKey]]:
        return [(c[k], c[(k + 1) % len(c)]) for c in self.cycles for k in range(len(c))]

    def checklist(self) -> dict[str, tuple[bool, str]]:
        """The red-edge properties, each checked on its own."""
        kappa = self.kappa
        ex = self.exceptional
        cl = self.cluster_of()
        red_out: Counter = Counter()
        red_in: Counter = Counter()
        for u, v in self.red_edges:
            red_out[u] += 1
            red_in[v] += 1
        out: dict[str, tuple[bool, str]] = {}

        cyc_of = {V: k for k, c in enumerate(self.cycles) for V in c}
        if len(self.cycles) == 1:
            out["Red0"] = (True, "single cycle")
        else:
            seq = [k for _, k, _ in self.bridges]
            ok = set(seq) == set(range(len(self.cycles)))
            for x, k_from, k_to in self.bridges:
                ins = [u for u, v in self.red_edges if v == x]
                outs = [v for u, v in self.red_edges if u == x]
                ok &= len(ins) == kappa and all(cyc_of.get(cl.get(u)) == k_from for u in ins)
                ok &= len(outs) == kappa and all(cyc_of.get(cl.get(v)) == k_to for v in outs)
            out["Red0"] = (ok, f"{len(self.bridges)} bridges over {len(self.cycles)} cycles")
        bad1 = [x for x in ex if red_out[x] != kappa or red_in[x] != kappa]
        out["Red1"] = (not bad1, f"{len(bad1)} exceptional vertices without exact red degree {kappa}")
        bad2 = [e for e in self.red_edges if e[0] in ex and e[1] in ex]
        out["Red2"] = (not bad2, f"{len(bad2)} edges inside the exceptional set")
        worst = max((max(red_out[y], red_in[y]) for y in cl), default=0)
        out["Red3"] = (worst <= self.red_cap, f"max red degree {worst}, cap {self.red_cap}")
        allowed = {v for V in self.T_in | self.T_out for v in self.designated(V)}
        bad4 = [e for e in self.red_edges if not ({e[0], e[1]} - set(ex)) <= allowed]
        out["Red4"] = (not bad4, f"{len(bad4)} red edges outside designated 2p-clusters")
        close = 0
        red = self.T_in | self.T_out
        for c in self.cycles:
            pos = [k for k, V in enumerate(c) if V in red]
            for x in range(len(pos)):
                for y in range(x + 1, len(pos)):
                    gap = pos[y] - pos[x]
                    if min(gap, len(c) - gap) < self.p:
                        close += 1
        out["Red5"] = (close == 0, f"{close} red cluster pairs closer than p")
        bad6 = [e for e in self.red_edges if (e[1] not in ex and cl.get(e[1]) not in self.T_in)
                or (e[0] not in ex and cl.get(e[0]) not in self.T_out)]
        out["Red6"] = (not bad6 and not (self.T_in & self.T_out), f"{len(bad6)} red edges against the in/out split")
        pair_all = set().union(*self.pair_edges.values()) if self.pair_edges else set()
        out["Red7"] = (not (pair_all & self.red_edges), "red and pair edges disjoint")
        return out

    def summary(self) -> dict:
        return {
            "index": self.index, "t": self.t, "j": self.j, "d": self.d,
            "cycles": len(self.cycles), "p_clusters": len(self.clusters),
            "exceptional": dict(Counter(self.exceptional.values())), "red_edges": len(self.red_edges),
            "kappa": self.kappa, "failure": self.failure,
        }


def _chunks(vs: Sequence[int], parts: int) -> list[tuple[int, ...]]:
    size = len(vs) // parts
    return [tuple(vs[k * size : (k + 1) * size]) for k in range(parts)]


def _refine(P: ClusterPartition, ell: int, G: Multidigraph, eps, seed: int, refine: bool) -> ClusterPartition:
    if not refine:
        return ClusterPartition(P.exceptional, tuple(c for C in P.clusters for c in _chunks(sorted(C), ell)))
    return uniform_refinement(P, ell, [G], eps, seed=seed, strict=False)


@dataclass
class _TypeLayout:
    """Trimmed and refined clusters of one original factor type."""

    t: int
    spec: tuple[int, ...]
    halves: dict[PKey, tuple[tuple[int, ...], tuple[int, ...]]]
    m_p: int
    graph: Multidigraph


def _layout_type(G: Multidigraph, red: Reduction, res: Reservoirs, t: int, cfg: PipelineConfig) -> _TypeLayout:
    F, ct = red.factors[t], red.copies[t]
    s, p = cfg.s, cfg.p
    edges = {}
    for (a, b), c in ct.items():
        for e in res.gstar[(a, b, c)].edges:
            edges[e] = 1
    Gt = Multidigraph(G.n, edges)
    trimmed: dict[int, tuple[int, ...]] = {}
    for C in F.cycles:
        cl = [red.clusters[a] for a in C]
        kept = trim_to_superregular(Gt, cl, cfg.eps, cfg.beta1, strict=False) if cfg.trim else [list(c) for c in cl]
        for a, c in zip(C, kept):
            trimmed[a] = tuple(sorted(c))
    L = len(red.clusters)
    spec = tuple(sorted(set().union(*(set(red.clusters[a]) - set(trimmed[a]) for a in range(L)))))
    base = ClusterPartition(tuple(sorted(set(red.exceptional) | set(spec))), tuple(trimmed[a] for a in range(L)))
    seed = cfg.seed * 31 + t
    Ps = _refine(base, s, Gt, cfg.eps_s, seed, cfg.refine)
    Pp = _refine(Ps, p, Gt, cfg.eps_p, seed + 1, cfg.refine)
    P2 = _refine(Pp, 2, Gt, cfg.eps_2p, seed + 2, cfg.refine)
    halves = {}
    for W in range(L):
        for a in range(s):
            for b in range(p):
                idx = (W * s + a) * p + b
                halves[(W, a, b)] = (P2.clusters[2 * idx], P2.clusters[2 * idx + 1])
    return _TypeLayout(t, spec, halves, Pp.m, Gt)


def _take_edges(cands: Sequence[Edge], k: int, load: Counter, end: int) -> list[Edge]:
    return sorted(cands, key=lambda e: (load[e[end]], e))[:k]


def choose_bridges(
    sl: Slice, res: Reservoirs, reduced: Multidigraph, used: set[Edge], comp_used: set[int], rng: random.Random
) -> None:
    """Connect the cycles of the slice through bridge vertices and compensate
    every other p-cluster by removing one more vertex, keeping sizes equal."""
    kappa = sl.kappa
    cyc_of = {V: k for k, c in enumerate(sl.cycles) for V in c}
    pred = sl.predecessor
    h0p = defaultdict(set)
    h0m = defaultdict(set)
    for P in res.h0_plus.values():
        for a, b in P.edges:
            h0p[a].add(b)
    for P in res.h0_minus.values():
        for a, b in P.edges:
            h0m[b].add(a)
    red_load: Counter = Counter()
    touched: set[PKey] = set()
    ell = len(sl.cycles)
    for k in range(ell):
        dst = (k + 1) % ell
        found = None
        for A in sorted(V for V in sl.cycles[k] if pred[V] in sl.T_out and V not in touched):
            src_red = set(sl.designated(pred[A]))
            targets = [B for B in sorted(sl.T_in) if cyc_of[B] == dst and reduced.multiplicity(A[0], B[0])]
            for x in sl.clusters[A]:
                # a bridge must not already carry red edges of an earlier bridge
                if x in sl.exceptional or red_load[x]:
                    continue
                ins = [(y, x) for y in h0m[x] & src_red
                       if y not in sl.exceptional and (y, x) not in used and red_load[y] < sl.red_cap]
                if len(ins) < kappa:
                    continue
                for B in targets:
                    outs = [(x, z) for z in h0p[x] & set(sl.designated(B))
                            if z not in sl.exceptional and (x, z) not in used and red_load[z] < sl.red_cap]
                    if len(outs) >= kappa:
                        found = (A, x, ins, outs)
                        break
                if found:
                    break
            if found:
                break
        if found is None:
            sl.failure = f"no useful bridge vertex from cycle {k} to cycle {dst}"
            return
        A, x, ins, outs = found
        chosen = _take_edges(ins, kappa, red_load, 0) + _take_edges(outs, kappa, red_load, 1)
        for u, v in chosen:
            red_load[u if v == x else v] += 1
        sl.red_edges.update(chosen)
        used.update(chosen)
        sl.exceptional[x] = "bridge"
        sl.bridges.append((x, k, dst))
        touched.add(A)
    for V in sorted(sl.clusters):
        if V in touched:
            continue
        other = 1 - sl.red_half.get(V, 0) if V in sl.T_in | sl.T_out else None
        pool = [v for v in (sl.halves[V][other] if other is not None else sl.clusters[V])
                if v not in comp_used and v not in sl.exceptional]
        if not pool:
            pool = [v for v in sl.clusters[V] if v not in sl.exceptional]
        v = rng.choice(pool)
        comp_used.add(v)
        sl.exceptional[v] = "comp"
    gone = set(sl.exceptional)
    sl.clusters = {V: tuple(v for v in vs if v not in gone) for V, vs in sl.clusters.items()}
    sl.halves = {V: tuple(tuple(v for v in h if v not in gone) for h in hs) for V, hs in sl.halves.items()}


def _red_flow(sl: Slice, G: Multidigraph, blocked: set[Edge], used: set[Edge], direction: str) -> tuple[list[Edge], int]:
    """Give every non-bridge exceptional vertex ``kappa`` red out-edges into the
    designated in-red 2p-clusters (or in-edges from out-red ones)."""
    X = sorted(x for x, kind in sl.exceptional.items() if kind != "bridge")
    need = sl.kappa * len(X)
    if need == 0:
        return [], 0
    side = sl.T_in if direction == "out" else sl.T_out
    targets = {v for V in side for v in sl.designated(V)}
    load: Counter = Counter()
    for u, v in sl.red_edges:
        load[v if u in sl.exceptional else u] += 1
    ids = {x: 2 + k for k, x in enumerate(X)}
    tgt = sorted(targets)
    tid = {y: 2 + len(X) + k for k, y in enumerate(tgt)}
    net = MaxFlow(2 + len(X) + len(tgt))
    arcs = {}
    for x in X:
        net.add_arc(0, ids[x], sl.kappa)
        nbrs = G.out_mult(x) if direction == "out" else G.in_mult(x)
        for y in sorted(nbrs):
            e = (x, y) if direction == "out" else (y, x)
            if y in tid and e not in blocked and e not in used:
                arcs[e] = net.add_arc(ids[x], tid[y], 1)
    for y in tgt:
        net.add_arc(tid[y], 1, max(sl.red_cap - load[y], 0))
    got = net.max_flow(0, 1)
    return [e for e, a in arcs.items() if net.flow_on(a)], need - got


@dataclass
class SliceBuild:
    slices: list[Slice]
    layouts: dict[int, _TypeLayout]
    r_s: int
    r_p: int
    star: dict[int, bool]
    identities: dict[str, bool]


def build_slices(
    G: Multidigraph, reduction: Reduction, reservoirs: Reservoirs, config: PipelineConfig, used: set[Edge]
) -> SliceBuild:
    """Trim, refine and double-unwind every factor type into slices, then add
    bridge vertices and red edges. Edges taken are added to ``used``."""
    cfg = config
    s, p = cfg.s, cfg.p
    types = range(len(reduction.factors) if cfg.max_types is None else min(cfg.max_types, len(reduction.factors)))
    Fc = cfg.F((s - 1) * (p - 1) * reduction.r_tilde)
    rng = random.Random(cfg.seed * 977 + 5)
    reduced = reduction.reduced
    slices: list[Slice] = []
    layouts = {}
    star = {}
    per_type = {}
    residue: Counter = Counter()
    comp_used: set[int] = set()
    for t in types:
        lay = _layout_type(G, reduction, reservoirs, t, cfg)
        layouts[t] = lay
        DU = double_unwind(reduction.factors[t], s, p)
        star[t] = DU.star
        per_type[t] = (len(DU.s_factors), len(DU.p_factors))
        ct = reduction.copies[t]
        kappa = cfg.kappa(lay.m_p)
        cap = cfg.red_degree_cap if cfg.red_degree_cap is not None else max(1, math.floor(math.sqrt(cfg.xi) * cfg.beta1 * lay.m_p))
        if kappa:
            cap = min(cap, kappa)
        for j, dd, cycles in DU.p_factors:
            residue[t % (2 * p)] += 1
            scheme = mark_clean_and_red(DU.s_factors[j], s, p, t + 1, residue[t % (2 * p)], Fc)
            b = scheme.red_p_index - 1
            half = 0 if scheme.k <= p else 1
            T_in = frozenset((W, a, b) for W, a in scheme.in_red)
            T_out = frozenset((W, a, b) for W, a in scheme.out_red)
            keys = sorted(lay.halves)
            sl = Slice(
                index=len(slices), t=t, j=j, d=dd, cycles=tuple(cycles),
                clusters={V: tuple(sorted(lay.halves[V][0] + lay.halves[V][1])) for V in keys},
                halves=dict(lay.halves),
                exceptional={**{v: "core" for v in reduction.exceptional}, **{v: "spec" for v in lay.spec}},
                T_in=T_in, T_out=T_out, red_half={V: half for V in T_in | T_out},
                kappa=kappa, n=G.n, p=p, red_cap=cap,
            )
            sl.rp_out = {V: {Y for Y in keys if Y != V and reduced.multiplicity(V[0], Y[0])} for V in keys}
            if len(sl.cycles) > 1:
                if not cfg.bridges or not (T_in and T_out):
                    sl.failure = "several cycles but no bridges available"
                else:
                    choose_bridges(sl, reservoirs, reduced, used, comp_used, rng)
            for U, V in sl.pairs():
                P = reservoirs.gstar[(U[0], V[0], ct[(U[0], V[0])])]
                A, B = set(sl.clusters[U]), set(sl.clusters[V])
                sl.pair_edges[(U, V)] = {e for e in P.edges if e[0] in A and e[1] in B}
            slices.append(sl)
    owned = set().union(*(e for sl in slices for e in sl.pair_edges.values())) if slices else set()
    blocked = owned | reservoirs.all_edges("h2")
    for sl in slices:
        if sl.failure:
            continue
        outs, miss_out = _red_flow(sl, G, blocked, used, "out")
        ins, miss_in = _red_flow(sl, G, blocked, used, "in")
        if miss_out or miss_in:
            sl.failure = f"red edges short by {miss_out} out and {miss_in} in"
            continue
        sl.red_edges.update(outs + ins)
        used.update(outs + ins)
    r_s = sum(a for a, _ in per_type.values())
    r_p = sum(b for _, b in per_type.values())
    identities = {
        "r_s = (s-1) r~": r_s == (s - 1) * len(per_type),
        "r_p = (p-1) r_s": r_p == (p - 1) * r_s,
        "slices per type = (s-1)(p-1)": all(b == (s - 1) * (p - 1) for _, b in per_type.values()),
    }
    return SliceBuild(slices, layouts, r_s, r_p, star, identities)


# ------------------------------------------------------------ decomposition


@dataclass
class SliceOutcome:
    index: int
    kappa: int
    cycles: list[tuple[int, ...]] = field(default_factory=list)
    factors: int = 0
    failed_factors: list[str] = field(default_factory=list)
    failed_factor_edges: set[Edge] = field(default_factory=set)
    infeasible_pairs: list[tuple[PKey, PKey]] = field(default_factory=list)
    certificates: dict = field(default_factory=dict)
    balancing_edges: set[Edge] = field(default_factory=set)
    slice_edges: set[Edge] = field(default_factory=set)
    b2_violations: list = field(default_factory=list)
    failure: str | None = None

    def summary(self) -> dict:
        return {
            "index": self.index, "kappa": self.kappa, "cycles": len(self.cycles), "factors": self.factors,
            "failed_factors": len(self.failed_factors), "infeasible_pairs": [list(map(list, e)) for e in self.infeasible_pairs],
            "balancing_edges": len(self.balancing_edges), "failure": self.failure,
        }


def pair_imbalance(sl: Slice, red_edges: Iterable[Edge] | None = None) -> dict[tuple[PKey, PKey], int]:
    """``kappa|U| - s+(U) - kappa|U+| + s-(U+)`` for every pair of the slice, without balancing."""
    cl = sl.cluster_of()
    s_plus: Counter = Counter()
    s_minus: Counter = Counter()
    for u, v in sl.red_edges if red_edges is None else red_edges:
        if u in cl:
            s_plus[cl[u]] += 1
        if v in cl:
            s_minus[cl[v]] += 1
    k = sl.kappa
    return {
        (U, V): k * len(sl.clusters[U]) - s_plus[U] - k * len(sl.clusters[V]) + s_minus[V] for U, V in sl.pairs()
    }


def _black_runs(cycle: Sequence[PKey], red: frozenset) -> list[list[int]]:
    """Maximal runs of pair indices whose end clusters are both non-red."""
    K = len(cycle)
    black = [cycle[i] not in red and cycle[(i + 1) % K] not in red for i in range(K)]
    if all(black):
        return [list(range(K))]
    start = next(i for i in range(K) if not black[i])
    runs, cur = [], []
    for step in range(1, K + 1):
        i = (start + step) % K
        if black[i]:
            cur.append(i)
        elif cur:
            runs.append(cur)
            cur = []
    if cur:
        runs.append(cur)
    return runs


def decompose_slice(
    sl: Slice,
    reservoirs: Reservoirs,
    config: PipelineConfig,
    used: set[Edge] | None = None,
    balance: bool | None = None,
) -> SliceOutcome:
    """Balance, extract the kappa-regular slice subgraph, 1-factorize and merge.

    ``used`` holds edges already claimed elsewhere; edges claimed here are
    added to it. With ``balance`` off the red edges are used as they are,
    which exposes unbalanced pairs as flow infeasibility.
    """
    cfg = config
    used = set() if used is None else used
    balance = cfg.balance if balance is None else balance
    out = SliceOutcome(sl.index, sl.kappa)
    if sl.failure:
        out.failure = sl.failure
        return out
    kappa = sl.kappa
    ex = set(sl.exceptional)
    cl = sl.cluster_of()
    succ, pred = sl.successor, sl.predecessor
    red_out: Counter = Counter()
    red_in: Counter = Counter()
    for u, v in sl.red_edges:
        red_out[u] += 1
        red_in[v] += 1
    s_plus, s_minus = red_tally(sl.red_edges, cl, ex, sl.T_in if balance else None, sl.T_out if balance else None)
    bal_out: Counter = Counter()
    bal_in: Counter = Counter()
    B: set[Edge] = set()
    sizes = {V: len(vs) for V, vs in sl.clusters.items()}
    if balance and sl.T_in and sl.T_out and kappa:
        shift: Counter = Counter()
        for U in sl.clusters:
            delta = kappa * (sizes[U] - sizes[succ[U]])
            if delta:
                V = succ[U] if succ[U] in sl.T_in else U if U in sl.T_out else None
                if V is None:
                    out.failure = f"black pair {U}->{succ[U]} has unequal cluster sizes"
                    return out
                shift[V] += delta
        if not (s_plus or s_minus or shift):
            # nothing to balance: every black pair already has equal demands
            balance = False
    if balance and sl.T_in and sl.T_out and kappa:
        m_p = max(sizes.values())
        b, c = balancing_constants(cfg.xi, cfg.beta1, m_p, len(sl.clusters))
        b = cfg.balance_b if cfg.balance_b is not None else b
        c = cfg.balance_c if cfg.balance_c is not None else c
        problem = BalancingProblem(sl.T_in, sl.T_out, s_plus, s_minus, b, c, succ, pred, dict(shift))
        try:
            shadow = shadow_sequence(problem, build_rstar(problem, sl.rp_out))
        except ValueError as exc:
            out.failure = f"shadow sequence: {exc}"
            return out
        if not shadow.feasible:
            out.failure = "shadow sequence infeasible"
            out.certificates["shadow"] = shadow.flow.certificate
            return out
        allowed = {V: sl.designated(V) for V in sl.clusters}
        h2 = defaultdict(set)
        for (a, bb, _), P in reservoirs.h2.items():
            h2[(a, bb)] |= P.edges
        cap = cfg.balance_degree_cap
        if cap is None:
            cap = max(1, math.floor(8 * float(cfg.xi) ** (1 / 6) * float(cfg.beta1) * m_p))
        try:
            B = realize_balancing(shadow, lambda U, Z: h2[(U[0], Z[0])], allowed, cap, used)
        except ReservoirExhausted as exc:
            out.failure = str(exc)
            return out
        for u, v in B:
            bal_out[u] += 1
            bal_in[v] += 1
        d_plus = Counter({V: s_plus.get(V, 0) for V in sl.clusters})
        d_minus = Counter({V: s_minus.get(V, 0) for V in sl.clusters})
        for u, v in B:
            d_plus[cl[u]] += 1
            d_minus[cl[v]] += 1
        out.b2_violations = b2_violations(succ, d_plus, d_minus, sizes, kappa)
        if out.b2_violations:
            out.failure = f"balancing left {len(out.b2_violations)} clusters unbalanced"
            return out
    out.balancing_edges = B

    # optional merge reservoir split off before the flows
    runs = {k: _black_runs(c, sl.T_in | sl.T_out) for k, c in enumerate(sl.cycles)}
    J_pairs = {(k, i) for k, rs in runs.items() for r in rs for i in r}
    pair_at = {(c[i], c[(i + 1) % len(c)]): (k, i) for k, c in enumerate(sl.cycles) for i in range(len(c))}
    h3: dict[tuple[int, int], set[Edge]] = defaultdict(set)
    if cfg.h3_fraction:
        rng = random.Random(cfg.seed * 65_537 + sl.index)
        for key, es in sl.pair_edges.items():
            if pair_at[key] in J_pairs:
                h3[pair_at[key]] = {e for e in sorted(es) if rng.random() < cfg.h3_fraction}

    star_edges: set[Edge] = set(sl.red_edges) | B
    for U, V in sl.pairs():
        avail = sl.pair_edges[(U, V)] - used - h3[pair_at[(U, V)]]
        P = BipartitePair(sl.clusters[U], sl.clusters[V], frozenset(avail))
        m_out = {a: red_out[a] + bal_out[a] for a in P.left}
        m_in = {y: red_in[y] + bal_in[y] for y in P.right}
        try:
            res = superregular_prescribed(P, m_out, m_in, kappa)
        except ValueError as exc:
            out.infeasible_pairs.append((U, V))
            out.certificates[(U, V)] = str(exc)
            continue
        if not res.feasible:
            out.infeasible_pairs.append((U, V))
            out.certificates[(U, V)] = res.certificate
            continue
        star_edges |= {(u, v) for u, v, _ in res.subgraph.edges()}
    if out.infeasible_pairs:
        out.failure = f"{len(out.infeasible_pairs)} pairs admit no prescribed subgraph"
        return out
    odeg: Counter = Counter()
    ideg: Counter = Counter()
    for u, v in star_edges:
        odeg[u] += 1
        ideg[v] += 1
    everyone = set(cl) | ex
    wrong = [v for v in everyone if odeg[v] != kappa or ideg[v] != kappa]
    if wrong or len(everyone) != sl.n:
        out.failure = f"slice subgraph is not {kappa}-regular on all {sl.n} vertices ({len(wrong)} off)"
        return out
    used |= star_edges
    out.slice_edges = star_edges
    if kappa == 0:
        return out

    verts = sorted(everyone)
    idx = {v: k for k, v in enumerate(verts)}
    H = Multidigraph.from_edges(len(verts), [(idx[u], idx[v]) for u, v in star_edges])
    factors = [
        factor_from_cycles([[verts[x] for x in c] for c in f.cycles]) for f in one_factorize(H, kappa)
    ]
    out.factors = len(factors)
    pools: dict[tuple[int, int], set[Edge]] = defaultdict(set)
    for key, es in sl.pair_edges.items():
        if pair_at[key] in J_pairs:
            pools[pair_at[key]] = (es - used) | h3[pair_at[key]]
    sched = j_schedule(kappa, sl.p)
    cluster_cycles = [[sl.clusters[V] for V in c] for c in sl.cycles]
    for f_idx, F in enumerate(factors):
        q = sched[f_idx]
        J = [[r[(q - 1) % len(r)] for r in runs[k]] for k in range(len(sl.cycles))]
        reservoir = {(k, i): pools[(k, i)] for k in range(len(J)) for i in J[k]}
        fm = merge_factor(
            F, cluster_cycles, J, reservoir, seed=cfg.seed * 7 + 1000 * sl.index + f_idx,
            budget=cfg.hamilton_budget, retries=cfg.merge_retries, passes=cfg.merge_passes,
        )
        fe = set(factor_edges(F))
        if not fm.ok:
            out.failed_factors.append(fm.failure or "merge failed")
            out.failed_factor_edges |= fe
            continue
        ce = set(cycle_edges(fm.cycle))
        if not is_hamilton_cycle(Multidigraph.from_edges(sl.n, ce), fm.cycle, range(sl.n)):
            out.failed_factors.append("merged cycle failed verification")
            out.failed_factor_edges |= fe
            continue
        for e in ce - fe:
            key = pair_at.get((cl.get(e[0]), cl.get(e[1])))
            pools[key].discard(e)
            used.add(e)
        for e in fe - ce:
            key = pair_at.get((cl.get(e[0]), cl.get(e[1])))
            if key in J_pairs:
                pools[key].add(e)
            used.discard(e)
        out.cycles.append(tuple(fm.cycle))
    return out


# ---------------------------------------------------------------- end to end


@dataclass
class DecompositionReport:
    mode: str
    n: int
    r: int
    target: float
    count: int
    verified: bool
    problems: list[str] = field(default_factory=list)
    waivers: list[str] = field(default_factory=list)
    stages: dict = field(default_factory=dict)
    identities: dict = field(default_factory=dict)
    accounting: dict = field(default_factory=dict)
    slices: list[dict] = field(default_factory=list)
    failed_factors: int = 0
    failed_slices: int = 0
    runtime_s: float = 0.0

    @property
    def partial(self) -> bool:
        return self.failed_factors > 0 or self.failed_slices > 0

    def to_json(self) -> dict:
        return asdict(self)


def _degenerate(G: Multidigraph, config: PipelineConfig, limit: int | None = None) -> list[tuple[int, ...]]:
    """Peel Hamilton cycles one at a time from what is left of ``G``."""
    rest = dict(Multidigraph(G.n, G.mult).mult)
    cycles = []
    limit = G.min_semidegree() if limit is None else limit
    while len(cycles) < limit:
        H = Multidigraph(G.n, rest)
        res = find_hamilton(H, budget=config.hamilton_budget, seed=config.seed * 131 + len(cycles))
        if res.exhausted:
            break
        for e in cycle_edges(res.cycle):
            rest[e] -= 1
            if not rest[e]:
                del rest[e]
        cycles.append(tuple(res.cycle))
    return cycles


def _account(G: Multidigraph, labelled: Sequence[tuple[str, set[Edge]]]) -> dict:
    """Give every edge of ``G`` the first label whose set contains it."""
    counts: Counter = Counter()
    seen: set[Edge] = set()
    for name, es in labelled:
        fresh = (es & G.mult.keys()) - seen
        counts[name] = len(fresh)
        seen |= fresh
    counts["unassigned"] = len(G.mult.keys() - seen)
    counts["total"] = G.edge_count
    counts["balanced"] = sum(v for k, v in counts.items() if k != "total") == G.edge_count
    return dict(counts)


def _dump_slice(folder: Path, sl: Slice, oc: SliceOutcome) -> None:
    folder.mkdir(parents=True, exist_ok=True)
    data = dict(oc.summary(), red_edges=sorted(map(list, sl.red_edges)),
                balancing=sorted(map(list, oc.balancing_edges)), imbalance_before=[
                    [list(map(list, pair)), v] for pair, v in pair_imbalance(sl).items() if v])
    (folder / f"slice_{oc.index}.json").write_text(json.dumps(data, indent=1))


def approx_decompose(
    G: Multidigraph,
    partition: ClusterPartition | None,
    config: PipelineConfig | None = None,
    debug_dir: str | Path | None = None,
) -> tuple[list[tuple[int, ...]], DecompositionReport]:
    """As many verified edge-disjoint Hamilton cycles as the chain yields.

    Without a partition, or with a single cluster, the degenerate mode peels
    Hamilton cycles directly. With ``debug_dir`` set, every slice's red and
    balancing edges are written to ``slice_<index>.json`` there.
    """
    cfg = config or PipelineConfig()
    t0 = time.perf_counter()
    r = G.min_semidegree()
    target = float((1 - cfg.eta) * r)
    waivers = cfg.validate()
    if partition is None or partition.k <= 1:
        cycles = _degenerate(G, cfg)
        ver = verify_cycles(G, cycles)
        rep = DecompositionReport("degenerate", G.n, r, target, len(cycles), ver.ok, list(ver.problems), waivers)
        rep.runtime_s = time.perf_counter() - t0
        return cycles, rep
    if any(m > 1 for m in G.mult.values()):
        raise ValueError("the cluster pipeline expects a simple digraph")
    stages: dict = {}
    red = reduce_and_regularize(G, partition, cfg)
    stages["reduce"] = {
        "clusters": len(red.clusters), "m": red.m, "core_exceptional": len(red.exceptional), "evicted": red.evicted,
        "r_tilde": red.r_tilde, "alpha_tilde": float(red.alpha_tilde), "reduced_degree": red.reduced.min_semidegree(),
        "W_edges": red.W.edge_count,
    }
    waivers += red.waivers
    res = split_reservoirs(red, cfg)
    stages["reservoirs"] = res.report
    used: set[Edge] = set()
    built = build_slices(G, red, res, cfg, used)
    m_p = next(iter(built.layouts.values())).m_p if built.layouts else 0
    stages["slices"] = {
        "r_s": built.r_s, "r_p": built.r_p, "m_p": m_p, "kappa": cfg.kappa(m_p) if m_p else 0,
        "star": all(built.star.values()), "built": len(built.slices),
        "failed": sum(1 for s in built.slices if s.failure),
    }
    cycles: list[tuple[int, ...]] = []
    outcomes = []
    for sl in built.slices:
        oc = decompose_slice(sl, res, cfg, used)
        outcomes.append(oc)
        if debug_dir is not None:
            _dump_slice(Path(debug_dir), sl, oc)
        cycles += oc.cycles
    ver = verify_cycles(G, cycles)
    cyc_e = set().union(*(set(cycle_edges(c)) for c in cycles)) if cycles else set()
    failed_e = set().union(*(oc.failed_factor_edges for oc in outcomes)) if outcomes else set()
    slice_e = set().union(*(oc.slice_edges for oc in outcomes)) if outcomes else set()
    w_e = set().union(*(P.edges for (a, b, c), P in red.pieces.items() if c < red.W.multiplicity(a, b)), set())
    reserv = set().union(*(res.all_edges(n) for n in Reservoirs.NAMES[1:]))
    gstar = res.all_edges("gstar")
    accounting = _account(G, [
        ("cycles", cyc_e), ("failed_factors", failed_e), ("slice_unmerged", slice_e), ("claimed", used),
        ("W", w_e), ("reservoirs_unused", reserv), ("gstar_unused", gstar),
    ])
    rep = DecompositionReport(
        "clusters", G.n, r, target, len(cycles), ver.ok, list(ver.problems), waivers, stages, built.identities,
        accounting, [dict(sl.summary(), **oc.summary()) for sl, oc in zip(built.slices, outcomes)],
        failed_factors=sum(len(oc.failed_factors) for oc in outcomes),
        failed_slices=sum(1 for oc in outcomes if oc.failure),
    )
    rep.runtime_s = time.perf_counter() - t0
    return cycles, rep


# ------------------------------------------------------------- toy slices


def toy_slice(
    K: int = 6, m_p: int = 20, density=Fraction(4, 5), kappa: int = 8, seed: int = 0
) -> tuple[Multidigraph, Slice, Reservoirs]:
    """One cycle of ``K`` p-clusters joined by random dense pairs; no exceptional vertices."""
    rng = random.Random(seed)
    keys = [(W, 0, 0) for W in range(K)]
    clusters = {V: tuple(range(V[0] * m_p, (V[0] + 1) * m_p)) for V in keys}
    pair_edges = {}
    for k, U in enumerate(keys):
        V = keys[(k + 1) % K]
        pair_edges[(U, V)] = {(a, b) for a in clusters[U] for b in clusters[V] if rng.random() < float(density)}
    G = Multidigraph.from_edges(K * m_p, sorted(set().union(*pair_edges.values())))
    sl = Slice(
        index=0, t=0, j=0, d=0, cycles=(tuple(keys),), clusters=clusters,
        halves={V: (vs[: m_p // 2], vs[m_p // 2 :]) for V, vs in clusters.items()},
        exceptional={}, T_in=frozenset(), T_out=frozenset(), red_half={}, kappa=kappa, n=G.n, p=5,
        pair_edges=pair_edges, red_cap=kappa,
    )
    return G, sl, Reservoirs()


def unbalanced_slice(
    K: int = 8, m_p: int = 12, density=Fraction(3, 4), kappa: int = 3, misroute: bool = True, seed: int = 0
) -> tuple[Multidigraph, Slice, Reservoirs, Edge | None]:
    """A single-cycle slice with one exceptional vertex ``x``.

    ``x`` receives ``kappa`` red edges from the out-red cluster ``V1`` and
    sends ``kappa`` red edges into its successor ``V2``, which is balanced as
    is. With ``misroute`` one of the out-edges lands in ``V4`` instead, the
    smallest change that breaks the count on a pair. Every pair of clusters
    has an ``H2`` reservoir, so balancing can repair it.
    """
    rng = random.Random(seed)
    G, sl, _ = toy_slice(K, m_p, density, kappa, seed)
    keys = list(sl.cycles[0])
    x = G.n
    n = G.n + 1
    V1, V2, V4 = keys[1], keys[2], keys[4]
    half = {V: 0 for V in (V1, V2, V4)}
    red = [(u, x) for u in sl.halves[V1][0][:kappa]]
    outs = [(x, v) for v in sl.halves[V2][0][:kappa]]
    bad = None
    if misroute:
        bad = (x, sl.halves[V4][0][0])
        outs[-1] = bad
    red += outs
    # reservoir pairs between the first halves of every two clusters
    h2 = {}
    used_pairs = set().union(*sl.pair_edges.values())
    for a, U in enumerate(keys):
        for b, V in enumerate(keys):
            if a != b:
                es = {(u, v) for u in sl.halves[U][0] for v in sl.halves[V][0]
                      if (u, v) not in used_pairs and rng.random() < float(density)}
                h2[(a, b, 0)] = BipartitePair(sl.clusters[U], sl.clusters[V], frozenset(es))
    edges = set(G.mult) | set(red) | set().union(*(P.edges for P in h2.values()))
    G = Multidigraph.from_edges(n, sorted(edges))
    T_in = frozenset({V2, V4} if misroute else {V2})
    sl = replace(
        sl, exceptional={x: "core"}, T_in=T_in, T_out=frozenset({V1}), red_half={V: 0 for V in T_in | {V1}},
        n=n, red_edges=set(red), red_cap=kappa,
        rp_out={U: {V for V in keys if V != U} for U in keys},
    )
    return G, sl, Reservoirs(h2=h2), bad
