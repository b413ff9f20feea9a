"""Cluster partitions, uniform refinements, closeness and the clean/red cluster scheme."""

from __future__ import annotations

import json
import math
import random
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .derandom import DerandomInstance, DeviationEvent, derandomize, minimize_estimator
from .graphcore import Multidigraph

REFINE_RETRIES = 16


def _frac(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(str(x)) if isinstance(x, float) else Fraction(x)


@dataclass(frozen=True)
class ClusterPartition:
    """Exceptional set plus an ordered list of equal-size clusters."""

    exceptional: tuple[int, ...]
    clusters: tuple[tuple[int, ...], ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "exceptional", tuple(sorted(self.exceptional)))
        object.__setattr__(self, "clusters", tuple(tuple(c) for c in self.clusters))
        sizes = {len(c) for c in self.clusters}
        if len(sizes) > 1:
            raise ValueError(f"clusters have unequal sizes {sorted(sizes)}")
        seen = set(self.exceptional)
        if len(seen) != len(self.exceptional):
            raise ValueError("repeated exceptional vertex")
        for c in self.clusters:
            for v in c:
                if v in seen:
                    raise ValueError(f"vertex {v} appears twice in the partition")
                seen.add(v)

    @property
    def m(self) -> int:
        return len(self.clusters[0]) if self.clusters else 0

    @property
    def k(self) -> int:
        return len(self.clusters)

    def ground(self) -> set[int]:
        return set(self.exceptional).union(*map(set, self.clusters))

    def cluster_of(self) -> dict[int, int]:
        return {v: i for i, c in enumerate(self.clusters) for v in c}

    def to_json(self) -> dict:
        return {"exceptional": list(self.exceptional), "clusters": [list(c) for c in self.clusters]}

    @classmethod
    def from_json(cls, data: Mapping) -> ClusterPartition:
        return cls(tuple(data.get("exceptional", [])), tuple(tuple(c) for c in data["clusters"]))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json()))

    @classmethod
    def load(cls, path: str | Path) -> ClusterPartition:
        return cls.from_json(json.loads(Path(path).read_text()))


# -------------------------------------------------------------- refinements


@dataclass(frozen=True)
class URefViolation:
    vertex: int
    graph: int
    parent: int
    child: int
    direction: str
    count: int
    parent_count: int


def uref_violations(
    P: ClusterPartition,
    refined: ClusterPartition,
    ell: int,
    graphs: Sequence[Multidigraph],
    eps,
    limit: int | None = None,
) -> list[URefViolation]:
    """Direct scan of the uniform-refinement condition.

    ``refined`` must list the ``ell`` subclusters of ``P.clusters[i]`` at
    positions ``i*ell .. i*ell + ell - 1``.
    """
    eps = _frac(eps)
    out = []
    for gi, G in enumerate(graphs):
        for x in range(G.n):
            for direction, nbrs in (("out", G.out_mult(x)), ("in", G.in_mult(x))):
                for pi, V in enumerate(P.clusters):
                    vs = set(V)
                    total = sum(1 for y in nbrs if y in vs)
                    if total < eps * len(V):
                        continue
                    target = Fraction(total, ell)
                    for ci in range(pi * ell, pi * ell + ell):
                        sub = set(refined.clusters[ci])
                        cnt = sum(1 for y in nbrs if y in sub)
                        if abs(cnt - target) > eps * target:
                            out.append(URefViolation(x, gi, pi, ci, direction, cnt, total))
                            if limit is not None and len(out) >= limit:
                                return out
    return out


def is_refinement(P: ClusterPartition, refined: ClusterPartition, ell: int) -> bool:
    if refined.exceptional != P.exceptional or refined.k != P.k * ell:
        return False
    for i, V in enumerate(P.clusters):
        union = set().union(*map(set, refined.clusters[i * ell : (i + 1) * ell]))
        if union != set(V):
            return False
    return True


def _split_cluster(
    V: Sequence[int], ell: int, graphs: Sequence[Multidigraph], eps: Fraction, rng: random.Random
) -> list[list[int]]:
    """Peel ``ell`` equal parts off ``V``, choosing each part by the
    conditional-probability walk over neighbourhood-count events."""
    m = len(V)
    size = m // ell
    remaining = list(V)
    parts = []
    beta = min(eps / 2, Fraction(1, 2))
    for step in range(ell - 1):
        order = remaining[:]
        rng.shuffle(order)
        pos = {v: j for j, v in enumerate(order)}
        prob = Fraction(1, ell - step)
        events = [DeviationEvent(tuple(range(len(order))), d, beta) for d in ("upper", "lower")]
        need = max(math.ceil(eps * m), 1)
        for G in graphs:
            # supports of out- and in-neighbourhoods inside the remaining part
            outs: dict[int, list[int]] = {}
            ins: dict[int, list[int]] = {}
            for y in order:
                for x in G.in_mult(y):
                    outs.setdefault(x, []).append(pos[y])
                for x in G.out_mult(y):
                    ins.setdefault(x, []).append(pos[y])
            for x in sorted(outs.keys() | ins.keys()):
                for sup in (outs.get(x, ()), ins.get(x, ())):
                    if len(sup) >= need:
                        events.append(DeviationEvent(tuple(sup), "upper", beta))
                        events.append(DeviationEvent(tuple(sup), "lower", beta))
        inst = DerandomInstance(len(order), prob, events)
        x = derandomize(inst) if inst.feasible() else minimize_estimator(inst)
        chosen = [order[j] for j in range(len(order)) if x[j]]
        rest = [order[j] for j in range(len(order)) if not x[j]]
        # equalize: move surplus vertices, last-decided first
        while len(chosen) > size:
            rest.append(chosen.pop())
        while len(chosen) < size:
            chosen.append(rest.pop())
        parts.append(sorted(chosen))
        remaining = rest
    parts.append(sorted(remaining))
    return parts


def uniform_refinement(
    P: ClusterPartition,
    ell: int,
    graphs: Sequence[Multidigraph],
    eps,
    seed: int = 0,
    retries: int = REFINE_RETRIES,
    strict: bool = True,
) -> ClusterPartition:
    """An ``eps``-uniform ``ell``-refinement of ``P`` with respect to ``graphs``.

    Each cluster is split by a derandomized assignment (certified when the
    Chernoff score allows it, best effort otherwise), sizes are equalized, and
    the result is checked by a direct scan. Fresh seeds are tried on failure;
    with ``strict`` off the last attempt is returned even if the scan fails.
    """
    eps = _frac(eps)
    if ell < 1:
        raise ValueError("ell must be positive")
    if ell == 1:
        return P
    if P.m % ell:
        raise ValueError(f"cluster size {P.m} not divisible by {ell}")
    best = None
    for attempt in range(retries):
        rng = random.Random(seed * 7919 + attempt)
        subs: list[list[int]] = []
        for V in P.clusters:
            subs.extend(_split_cluster(V, ell, graphs, eps, rng))
        R = ClusterPartition(P.exceptional, tuple(map(tuple, subs)))
        bad = uref_violations(P, R, ell, graphs, eps, limit=1)
        if not bad:
            return R
        if not strict and attempt == retries - 1:
            return R
        best = bad[0]
    raise RuntimeError(
        f"no {eps}-uniform {ell}-refinement found in {retries} attempts "
        f"(e.g. vertex {best.vertex}); increase the cluster size or eps"
    )


# ---------------------------------------------------------------- closeness


@dataclass(frozen=True)
class AssociationMap:
    """Maps each cluster index of the finer-or-equal partition to its associated cluster."""

    pairs: dict[int, int]
    overlaps: dict[int, int]


@dataclass(frozen=True)
class CloseVerdict:
    close: bool
    association: AssociationMap | None
    reason: str = ""
    witness: int | None = None


def check_close(P: ClusterPartition, Q: ClusterPartition, eps) -> CloseVerdict:
    """Decide whether ``P`` (size ``m``) and ``Q`` (size ``m' <= m``) are eps-close."""
    eps = _frac(eps)
    m, mq = P.m, Q.m
    if m < mq or abs(m - mq) > 2 * eps * mq:
        raise ValueError(f"cluster sizes {m}, {mq} violate m >= m' and |m - m'| <= 2 eps m'")
    V0, V0q = set(P.exceptional), set(Q.exceptional)
    if len(V0 & V0q) < (1 - eps) * len(V0q):
        return CloseVerdict(False, None, "exceptional sets differ too much")
    owner = P.cluster_of()
    pairs, overlaps = {}, {}
    for ui, U in enumerate(Q.clusters):
        counts: dict[int, int] = {}
        for v in U:
            if v in owner:
                counts[owner[v]] = counts.get(owner[v], 0) + 1
        best = min(counts, key=lambda c: (-counts[c], c)) if counts else None
        if best is None or counts[best] < (1 - eps) * mq:
            return CloseVerdict(False, None, f"cluster {ui} has no associated cluster", ui)
        pairs[ui] = best
        overlaps[ui] = counts[best]
    return CloseVerdict(True, AssociationMap(pairs, overlaps))


def refine_close(
    P: ClusterPartition, P_refined: ClusterPartition, ell: int, R: ClusterPartition, eps2
) -> ClusterPartition:
    """Refine ``R`` (close to ``P``) so that it stays close to ``P_refined``.

    For each cluster ``U`` of ``P`` with associated cluster ``V`` of ``R`` and
    each subcluster ``U'`` of ``U``, keep ``(1 - eps2*ell) m'/ell`` vertices of
    ``U' & V``; the leftovers of ``V`` are dealt round-robin by subcluster index.
    """
    eps2 = _frac(eps2)
    mr = R.m
    if mr % ell:
        raise ValueError(f"cluster size {mr} not divisible by {ell}")
    size = mr // ell
    keep = math.floor((1 - eps2 * ell) * size)
    owner = P.cluster_of()
    out: list[list[int]] = []
    for V in R.clusters:
        counts: dict[int, int] = {}
        for v in V:
            if v in owner:
                counts[owner[v]] = counts.get(owner[v], 0) + 1
        if not counts:
            raise ValueError("cluster of R meets no cluster of P")
        ui = min(counts, key=lambda c: (-counts[c], c))
        vs = set(V)
        subs = []
        used: set[int] = set()
        for ci in range(ui * ell, ui * ell + ell):
            inter = [v for v in P_refined.clusters[ci] if v in vs]
            if len(inter) < keep:
                raise ValueError(f"overlap {len(inter)} < {keep}: partitions are not close enough")
            subs.append(inter[:keep])
            used.update(inter[:keep])
        left = [v for v in V if v not in used]
        j = 0
        for v in left:
            while len(subs[j % ell]) >= size:
                j += 1
            subs[j % ell].append(v)
            j += 1
        out.extend(sorted(s) for s in subs)
    return ClusterPartition(R.exceptional, tuple(map(tuple, out)))


# ---------------------------------------------------------- clean/red scheme


@dataclass(frozen=True)
class RedScheme:
    """Clean s-clusters and red 2p-clusters of one slice.

    s-clusters are ``(W, a)`` with ``a`` in ``0..s-1``; the red 2p-cluster of a
    non-clean s-cluster ``U`` is ``U(k)`` with ``k`` in ``1..2p`` and it lies
    inside the p-cluster ``U_l`` with ``l = (k-1) % p + 1``.
    """

    clean: frozenset[tuple[int, int]]
    k: int
    in_red: frozenset[tuple[int, int]]
    out_red: frozenset[tuple[int, int]]
    s: int
    p: int
    red: frozenset[tuple[int, int]] = frozenset()

    @property
    def red_p_index(self) -> int:
        return (self.k - 1) % self.p + 1

    def red_s_clusters(self) -> frozenset[tuple[int, int]]:
        """Every non-clean s-cluster; each carries one red p-cluster."""
        return self.red


def clean_clusters(cycles: Iterable[Sequence[tuple[int, int]]], s: int) -> frozenset[tuple[int, int]]:
    """Last ``K`` s-clusters of every cycle of length ``K*s``."""
    clean = set()
    for cyc in cycles:
        if len(cyc) % s:
            raise ValueError(f"cycle length {len(cyc)} not divisible by s={s}")
        K = len(cyc) // s
        clean.update(cyc[-K:])
    return frozenset(clean)


def mark_clean_and_red(
    cycles: Sequence[Sequence[tuple[int, int]]], s: int, p: int, t: int, f: int, F: int
) -> RedScheme:
    """Annotate one slice of original type ``t`` that is the ``f``-th (1-based)
    slice among those sharing ``t``'s residue class.

    ``cycles`` are the cycles of the s-level 1-factor, each a list of
    s-clusters ``(W, a)``. The red 2p-cluster index is ``k = t mod 2p`` in
    ``1..2p``; in-red s-clusters come from the first half of each primary
    cluster when ``f <= F`` and from the second half otherwise.
    """
    if s % 2:
        raise ValueError("s must be even")
    clean = clean_clusters(cycles, s)
    k = (t - 1) % (2 * p) + 1
    primaries = sorted({W for cyc in cycles for (W, _) in cyc})
    plus, minus = set(), set()
    red = {U for cyc in cycles for U in cyc if U not in clean}
    for W in primaries:
        first = [(W, a) for a in range(s // 2) if (W, a) not in clean]
        second = [(W, a) for a in range(s // 2, s) if (W, a) not in clean]
        plus.update(first[: s // 2 - 1])
        minus.update(second[: s // 2 - 1])
    if f <= F:
        in_red, out_red = plus, minus
    else:
        in_red, out_red = minus, plus
    return RedScheme(clean, k, frozenset(in_red), frozenset(out_red), s, p, frozenset(red))
