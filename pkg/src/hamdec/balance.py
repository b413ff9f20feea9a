"""Red-edge tallies and balancing sequences.

A slice's red edges join exceptional vertices to red clusters. For a 1-factor
of the slice to exist, the red out-degree of every cluster must equal the red
in-degree of its successor on the cluster 1-factor. The shadow sequence is a
cluster-level flow solution that fixes this; realizing it picks concrete edges
from a reservoir.
"""

from __future__ import annotations

import math
from collections import Counter
from collections.abc import Callable, Hashable, Iterable, Mapping
from dataclasses import dataclass, field
from fractions import Fraction

from .factorflow import DegreePrescription, FlowResult, prescribed_subgraph
from .graphcore import Multidigraph

Cluster = Hashable


class ReservoirExhausted(RuntimeError):
    def __init__(self, pair: tuple, needed: int, available: int) -> None:
        super().__init__(f"reservoir on {pair[0]} -> {pair[1]} has {available} usable edges, {needed} needed")
        self.pair = pair
        self.needed = needed
        self.available = available


def red_tally(
    red_edges: Iterable[tuple[int, int]],
    cluster_of: Mapping[int, Cluster],
    exceptional: Iterable[int],
    T_in: Iterable[Cluster] | None = None,
    T_out: Iterable[Cluster] | None = None,
) -> tuple[Counter, Counter]:
    """``s_plus[V]`` counts red edges leaving ``V``; ``s_minus[V]`` those entering it.

    With ``T_in``/``T_out`` given, red edges outside the declared red clusters
    raise ``ValueError``.
    """
    ex = set(exceptional)
    s_plus: Counter = Counter()
    s_minus: Counter = Counter()
    for u, v in red_edges:
        if (u in ex) == (v in ex):
            raise ValueError(f"edge {u}->{v} is not red: exactly one endpoint must be exceptional")
        if v in ex:
            s_plus[cluster_of[u]] += 1
        else:
            s_minus[cluster_of[v]] += 1
    if T_out is not None:
        stray = set(s_plus) - set(T_out)
        if stray:
            raise ValueError(f"red edges leave clusters {sorted(map(str, stray))} not declared out-red")
    if T_in is not None:
        stray = set(s_minus) - set(T_in)
        if stray:
            raise ValueError(f"red edges enter clusters {sorted(map(str, stray))} not declared in-red")
    return s_plus, s_minus


def balancing_constants(xi, beta1, m_p: int, L_p: int) -> tuple[int, int]:
    """Per-edge cap ``b`` and base demand ``c``, rounded up to integers of at least 1."""
    xi, beta1 = Fraction(xi), Fraction(beta1)
    b = math.ceil(float(xi) ** (1 / 6) * float(beta1) * m_p * m_p / max(L_p, 1))
    c = math.ceil(float(xi) ** (1 / 5) * float(beta1) * m_p * m_p)
    return max(b, 1), max(c, 1)


@dataclass(frozen=True)
class BalancingProblem:
    """Red clusters and their red-edge counts on one slice.

    ``successor``/``predecessor`` follow the cluster 1-factor. ``shift`` adds
    to a red cluster's imbalance, which is how unequal cluster sizes (clusters
    that lost a bridge vertex) are accounted for; it is empty normally.
    """

    T_in: frozenset
    T_out: frozenset
    s_plus: Mapping[Cluster, int]
    s_minus: Mapping[Cluster, int]
    b: int
    c: int
    successor: Mapping[Cluster, Cluster]
    predecessor: Mapping[Cluster, Cluster]
    shift: Mapping[Cluster, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "T_in", frozenset(self.T_in))
        object.__setattr__(self, "T_out", frozenset(self.T_out))
        if self.T_in & self.T_out:
            raise ValueError("a cluster cannot be both in-red and out-red")
        if self.b < 1 or self.c < 0:
            raise ValueError("need b >= 1 and c >= 0")

    @property
    def clusters(self) -> tuple:
        return tuple(sorted(self.T_in | self.T_out, key=repr))

    def excess(self, V: Cluster) -> int:
        """Required balancing out-degree of the start cluster minus in-degree of the end cluster."""
        if V in self.T_in:
            return self.s_minus.get(V, 0) + self.shift.get(V, 0)
        return -self.s_plus.get(V, 0) + self.shift.get(V, 0)

    def n_plus(self, V: Cluster) -> int:
        return self.c + max(self.excess(V), 0)

    def n_minus(self, V: Cluster) -> int:
        return self.c + max(-self.excess(V), 0)

    def start(self, V: Cluster) -> Cluster:
        """Cluster whose vertices send the balancing edges represented at ``V``."""
        return self.predecessor[V] if V in self.T_in else V

    def end(self, W: Cluster) -> Cluster:
        """Cluster whose vertices receive the balancing edges represented at ``W``."""
        return W if W in self.T_in else self.successor[W]


@dataclass(frozen=True)
class RStar:
    clusters: tuple
    graph: Multidigraph
    real: dict[tuple[int, int], tuple[Cluster, Cluster]]

    def index(self, V: Cluster) -> int:
        return self.clusters.index(V)


def build_rstar(problem: BalancingProblem, rp_out: Mapping[Cluster, Iterable[Cluster]] | Multidigraph) -> RStar:
    """Auxiliary digraph on the red clusters.

    ``V -> W`` whenever the cluster graph has an edge from ``start(V)`` to
    ``end(W)``. ``rp_out`` is an adjacency map, or a multidigraph whose vertices
    are the clusters themselves.
    """
    if isinstance(rp_out, Multidigraph):
        G = rp_out
        rp_out = {v: G.out_neighbours(v) for v in range(G.n)}
    T = problem.clusters
    if not problem.T_in or not problem.T_out:
        raise ValueError("both T_in and T_out must be non-empty")
    nbrs = {V: set(rp_out.get(V, ())) for V in set(problem.start(X) for X in T)}
    edges = []
    real = {}
    for i, V in enumerate(T):
        a = problem.start(V)
        for j, W in enumerate(T):
            if i != j and problem.end(W) in nbrs[a]:
                edges.append((i, j))
                real[(i, j)] = (a, problem.end(W))
    return RStar(T, Multidigraph.from_edges(len(T), edges), real)


@dataclass(frozen=True)
class ShadowSequence:
    rstar: RStar
    flow: FlowResult

    @property
    def feasible(self) -> bool:
        return self.flow.feasible

    def demands(self) -> dict[tuple[Cluster, Cluster], int]:
        """Number of balancing edges to realize on each cluster pair."""
        out: Counter = Counter()
        if self.flow.subgraph is None:
            return {}
        for u, v, m in self.flow.subgraph.edges():
            out[self.rstar.real[(u, v)]] += m
        return dict(out)


def shadow_sequence(problem: BalancingProblem, rstar: RStar) -> ShadowSequence:
    """Degree-exact sub-multigraph of the ``b``-fold ``R*`` via max-flow."""
    T = rstar.clusters
    plus = {i: problem.n_plus(V) for i, V in enumerate(T)}
    minus = {i: problem.n_minus(V) for i, V in enumerate(T)}
    if sum(plus.values()) != sum(minus.values()):
        raise ValueError(f"shadow demands unbalanced: {sum(plus.values())} vs {sum(minus.values())}")
    fold = Multidigraph(len(T), {e: problem.b for e in rstar.graph.mult})
    return ShadowSequence(rstar, prescribed_subgraph(fold, DegreePrescription(plus, minus), cap_per_pair=problem.b))


def realize_balancing(
    shadow: ShadowSequence,
    reservoir: Callable[[Cluster, Cluster], Iterable[tuple[int, int]]],
    allowed: Mapping[Cluster, Iterable[int]],
    degree_cap: int,
    used: set[tuple[int, int]] | None = None,
) -> set[tuple[int, int]]:
    """Choose the concrete balancing edges.

    For each cluster pair the shadow asks for, ``reservoir(U, Z)`` lists the
    candidate edges; only edges between the designated vertices ``allowed[U]``
    and ``allowed[Z]`` and not in ``used`` qualify. Edges are taken greedily at
    the currently least loaded endpoints, never exceeding ``degree_cap``.
    """
    used = used if used is not None else set()
    outdeg: Counter = Counter()
    indeg: Counter = Counter()
    chosen: set[tuple[int, int]] = set()
    for (U, Z), need in sorted(shadow.demands().items(), key=repr):
        A, B = set(allowed[U]), set(allowed[Z])
        cand = sorted(e for e in set(reservoir(U, Z)) if e[0] in A and e[1] in B and e not in used and e not in chosen)
        got = 0
        while got < need:
            best = None
            for e in cand:
                if e in chosen or outdeg[e[0]] >= degree_cap or indeg[e[1]] >= degree_cap:
                    continue
                key = (outdeg[e[0]] + indeg[e[1]], e)
                if best is None or key < best[0]:
                    best = (key, e)
            if best is None:
                raise ReservoirExhausted((U, Z), need, got)
            e = best[1]
            chosen.add(e)
            outdeg[e[0]] += 1
            indeg[e[1]] += 1
            got += 1
    return chosen


def b2_violations(
    successor: Mapping[Cluster, Cluster],
    d_plus: Mapping[Cluster, int],
    d_minus: Mapping[Cluster, int],
    sizes: Mapping[Cluster, int] | None = None,
    kappa: int = 0,
) -> list[Cluster]:
    """Clusters ``V`` where ``kappa*|V| - d_plus(V) != kappa*|V+| - d_minus(V+)``.

    With equal cluster sizes this is the plain condition ``d_plus(V) = d_minus(V+)``.
    """
    bad = []
    for V, W in successor.items():
        lhs = -d_plus.get(V, 0)
        rhs = -d_minus.get(W, 0)
        if sizes is not None:
            lhs += kappa * sizes[V]
            rhs += kappa * sizes[W]
        if lhs != rhs:
            bad.append(V)
    return bad
