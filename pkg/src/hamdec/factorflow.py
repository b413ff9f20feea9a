"""Bipartite matching, 1-factorization and degree-prescribed subgraphs via max-flow."""

from __future__ import annotations

import warnings
from collections import deque
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field

from .graphcore import BipartitePair, Multidigraph, OneFactor, cycle_decomposition


class MaxFlow:
    """Dinic max-flow with deterministic arc order (insertion order)."""

    def __init__(self, n: int) -> None:
        self.n = n
        self.head: list[list[int]] = [[] for _ in range(n)]
        self.to: list[int] = []
        self.cap: list[int] = []

    def add_arc(self, u: int, v: int, cap: int) -> int:
        idx = len(self.to)
        self.to += [v, u]
        self.cap += [cap, 0]
        self.head[u].append(idx)
        self.head[v].append(idx + 1)
        return idx

    def flow_on(self, arc: int) -> int:
        return self.cap[arc ^ 1]

    def _levels(self, s: int, t: int) -> list[int] | None:
        level = [-1] * self.n
        level[s] = 0
        q = deque([s])
        while q:
            u = q.popleft()
            for a in self.head[u]:
                if self.cap[a] > 0 and level[self.to[a]] < 0:
                    level[self.to[a]] = level[u] + 1
                    q.append(self.to[a])
        return level if level[t] >= 0 else None

    def max_flow(self, s: int, t: int) -> int:
        total = 0
        to, cap, head = self.to, self.cap, self.head
        while True:
            level = self._levels(s, t)
            if level is None:
                return total
            it = [0] * self.n
            while True:
                # iterative DFS for one blocking-flow augmenting path
                path: list[int] = []
                u = s
                while u != t:
                    advanced = False
                    while it[u] < len(head[u]):
                        a = head[u][it[u]]
                        v = to[a]
                        if cap[a] > 0 and level[v] == level[u] + 1:
                            path.append(a)
                            u = v
                            advanced = True
                            break
                        it[u] += 1
                    if not advanced:
                        if u == s:
                            break
                        level[u] = -1
                        a = path.pop()
                        u = to[a ^ 1]
                        it[u] += 1
                if u != t:
                    break
                push = min(cap[a] for a in path)
                for a in path:
                    cap[a] -= push
                    cap[a ^ 1] += push
                total += push

    def source_side(self, s: int) -> set[int]:
        seen = {s}
        q = deque([s])
        while q:
            u = q.popleft()
            for a in self.head[u]:
                if self.cap[a] > 0 and self.to[a] not in seen:
                    seen.add(self.to[a])
                    q.append(self.to[a])
        return seen


# ---------------------------------------------------------------- matching


@dataclass(frozen=True)
class MatchingResult:
    """A perfect matching, or a Hall violator ``S`` with ``|N(S)| < |S|``."""

    matching: dict[int, int] | None
    violator: frozenset[int] | None = None
    neighbourhood: frozenset[int] | None = None

    @property
    def perfect(self) -> bool:
        return self.matching is not None


def maximum_matching(left: Sequence[int], adj: Mapping[int, Sequence[int]]) -> dict[int, int]:
    """Hopcroft-Karp on a bipartite graph; ``adj`` maps left vertices to right ones.

    Left vertices are scanned in the given order and neighbours in the order
    supplied, so the result is deterministic.
    """
    match_l: dict[int, int] = {}
    match_r: dict[int, int] = {}
    # greedy warm start
    for u in left:
        for v in adj.get(u, ()):
            if v not in match_r:
                match_l[u] = v
                match_r[v] = u
                break
    inf = len(left) + 1
    while True:
        dist: dict[int, int] = {}
        q = deque()
        for u in left:
            if u not in match_l:
                dist[u] = 0
                q.append(u)
        found = False
        while q:
            u = q.popleft()
            for v in adj.get(u, ()):
                w = match_r.get(v)
                if w is None:
                    found = True
                elif w not in dist:
                    dist[w] = dist[u] + 1
                    q.append(w)
        if not found:
            return match_l
        ptr = {u: 0 for u in dist}
        for root in left:
            if root in match_l:
                continue
            stack = [root]
            pending: list[int] = []
            while stack:
                u = stack[-1]
                nbrs = adj.get(u, ())
                advanced = False
                while ptr[u] < len(nbrs):
                    v = nbrs[ptr[u]]
                    ptr[u] += 1
                    w = match_r.get(v)
                    if w is None:
                        pending.append(v)
                        # augment along the stack
                        for x, y in zip(stack, pending):
                            match_l[x] = y
                            match_r[y] = x
                        stack = []
                        advanced = True
                        break
                    if dist.get(w, inf) == dist[u] + 1:
                        pending.append(v)
                        stack.append(w)
                        advanced = True
                        break
                if not advanced:
                    dist[u] = inf
                    stack.pop()
                    if pending:
                        pending.pop()


def _hall_violator(left, adj, match_l, match_r) -> tuple[frozenset[int], frozenset[int]]:
    root = next(u for u in left if u not in match_l)
    S, NS = {root}, set()
    q = deque([root])
    while q:
        u = q.popleft()
        for v in adj.get(u, ()):
            if v not in NS:
                NS.add(v)
                w = match_r[v]
                if w not in S:
                    S.add(w)
                    q.append(w)
    return frozenset(S), frozenset(NS)


def perfect_matching(P: BipartitePair) -> MatchingResult:
    """Perfect matching of ``P`` or a Hall-violating left set."""
    if len(P.left) != len(P.right):
        raise ValueError(f"classes differ in size: {len(P.left)} vs {len(P.right)}")
    left = sorted(P.left)
    adj = {u: sorted(P.neighbours(u)) for u in left}
    match_l = maximum_matching(left, adj)
    if len(match_l) == len(left):
        return MatchingResult(dict(sorted(match_l.items())))
    match_r = {v: u for u, v in match_l.items()}
    S, NS = _hall_violator(left, adj, match_l, match_r)
    return MatchingResult(None, S, NS)


# ---------------------------------------------------------- 1-factorization


def _deviant_vertex(G: Multidigraph, r: int) -> int | None:
    for v in range(G.n):
        if G.out_degrees[v] != r or G.in_degrees[v] != r:
            return v
    return None


def _euler_split(mult: dict[tuple[int, int], int], n: int) -> tuple[dict, dict]:
    """Split an even-degree bipartite multigraph into two halves of equal degree.

    Keys ``(u, v)`` are edges from left copy ``u`` to right copy ``v``.
    Even multiplicities are halved directly; the remaining simple edges are
    covered by closed trails whose edges alternate between the halves.
    """
    a: dict = {}
    b: dict = {}
    rest = []
    for e, m in sorted(mult.items()):
        if m // 2:
            a[e] = m // 2
            b[e] = m // 2
        if m % 2:
            rest.append(e)
    # left copy u is node u, right copy v is node n + v
    inc: list[list[int]] = [[] for _ in range(2 * n)]
    for i, (u, v) in enumerate(rest):
        inc[u].append(i)
        inc[n + v].append(i)
    used = [False] * len(rest)
    ptr = [0] * (2 * n)

    def other(i: int, x: int) -> int:
        u, v = rest[i]
        return n + v if x == u else u

    for start in range(2 * n):
        while True:
            while ptr[start] < len(inc[start]) and used[inc[start][ptr[start]]]:
                ptr[start] += 1
            if ptr[start] == len(inc[start]):
                break
            x, colour = start, 0
            while True:
                while ptr[x] < len(inc[x]) and used[inc[x][ptr[x]]]:
                    ptr[x] += 1
                if ptr[x] == len(inc[x]):
                    break
                i = inc[x][ptr[x]]
                used[i] = True
                half = a if colour == 0 else b
                half[rest[i]] = half.get(rest[i], 0) + 1
                colour ^= 1
                x = other(i, x)
            if x != start or colour != 0:
                raise AssertionError("closed trail of odd length in a bipartite graph")
    return a, b


def _peel_matching(mult: dict[tuple[int, int], int], n: int) -> tuple[dict[int, int], dict]:
    adj: dict[int, list[int]] = {u: [] for u in range(n)}
    for (u, v) in sorted(mult):
        adj[u].append(v)
    match = maximum_matching(list(range(n)), adj)
    if len(match) != n:
        raise AssertionError("regular bipartite multigraph without a perfect matching")
    rest = dict(mult)
    for u, v in match.items():
        rest[(u, v)] -= 1
        if not rest[(u, v)]:
            del rest[(u, v)]
    return match, rest


def _factorize(mult: dict, n: int, r: int) -> list[dict[int, int]]:
    if r == 0:
        return []
    if r == 1:
        return [{u: v for (u, v) in mult}]
    if r % 2:
        match, rest = _peel_matching(mult, n)
        return [match] + _factorize(rest, n, r - 1)
    a, b = _euler_split(mult, n)
    return _factorize(a, n, r // 2) + _factorize(b, n, r // 2)


def one_factorize(G: Multidigraph, r: int) -> list[OneFactor]:
    """Split an ``r``-regular loopless multidigraph into ``r`` edge-disjoint 1-factors.

    Works on the bipartite double cover: halving by closed alternating trails
    while the degree is even and peeling one perfect matching when it is odd.
    """
    if r < 0:
        raise ValueError("r must be non-negative")
    bad = _deviant_vertex(G, r)
    if bad is not None:
        raise ValueError(
            f"graph is not {r}-regular: vertex {bad} has out-degree "
            f"{G.out_degrees[bad]} and in-degree {G.in_degrees[bad]}"
        )
    if any(u == v for (u, v) in G.mult):
        raise ValueError("loops cannot appear in a digraph 1-factor")
    return [cycle_decomposition(dict(sorted(m.items()))) for m in _factorize(dict(G.mult), G.n, r)]


# --------------------------------------------------------- prescribed degrees


@dataclass(frozen=True)
class DegreePrescription:
    """Out- and in-degree demands per vertex.

    With ``strict`` the two totals must agree; a non-strict prescription may be
    unbalanced, in which case no subgraph can meet it and the flow reports a cut.
    """

    out_demand: Mapping[int, int]
    in_demand: Mapping[int, int]
    strict: bool = True

    def __post_init__(self) -> None:
        od = dict(self.out_demand) if isinstance(self.out_demand, Mapping) else dict(enumerate(self.out_demand))
        idm = dict(self.in_demand) if isinstance(self.in_demand, Mapping) else dict(enumerate(self.in_demand))
        object.__setattr__(self, "out_demand", od)
        object.__setattr__(self, "in_demand", idm)
        if any(x < 0 for x in od.values()) or any(x < 0 for x in idm.values()):
            raise ValueError("demands must be non-negative")
        if self.strict and sum(od.values()) != sum(idm.values()):
            raise ValueError(f"unbalanced demands: out {sum(od.values())} vs in {sum(idm.values())}")

    @property
    def balanced(self) -> bool:
        return sum(self.out_demand.values()) == sum(self.in_demand.values())

    @property
    def total(self) -> int:
        return max(sum(self.out_demand.values()), sum(self.in_demand.values()))


@dataclass(frozen=True)
class CutCertificate:
    """An s-t cut of the degree network with capacity below the total demand.

    ``out_side`` holds the vertices whose out-copy lies on the source side and
    ``in_side`` those whose in-copy does.
    """

    out_side: frozenset[int]
    in_side: frozenset[int]
    capacity: int
    demand: int


@dataclass(frozen=True)
class FlowResult:
    subgraph: Multidigraph | None
    certificate: CutCertificate | None = None

    @property
    def feasible(self) -> bool:
        return self.subgraph is not None


def cut_capacity(
    arcs: Mapping[tuple[int, int], int], demands: DegreePrescription, out_side: Iterable[int], in_side: Iterable[int]
) -> int:
    """Capacity of the cut given by the source-side vertex copies."""
    S_out, S_in = set(out_side), set(in_side)
    total = sum(d for u, d in demands.out_demand.items() if u not in S_out)
    total += sum(d for v, d in demands.in_demand.items() if v in S_in)
    total += sum(c for (u, v), c in arcs.items() if u in S_out and v not in S_in)
    return total


def _degree_flow(
    vertices_out: Sequence[int],
    vertices_in: Sequence[int],
    arcs: Mapping[tuple[int, int], int],
    demands: DegreePrescription,
) -> tuple[dict[tuple[int, int], int] | None, CutCertificate | None]:
    out_ids = {u: i + 2 for i, u in enumerate(vertices_out)}
    base = 2 + len(vertices_out)
    in_ids = {v: base + i for i, v in enumerate(vertices_in)}
    net = MaxFlow(base + len(vertices_in))
    for u in vertices_out:
        net.add_arc(0, out_ids[u], demands.out_demand.get(u, 0))
    arc_idx = {}
    for (u, v) in sorted(arcs):
        if arcs[(u, v)] > 0:
            arc_idx[(u, v)] = net.add_arc(out_ids[u], in_ids[v], arcs[(u, v)])
    for v in vertices_in:
        net.add_arc(in_ids[v], 1, demands.in_demand.get(v, 0))
    value = net.max_flow(0, 1)
    if demands.balanced and value == demands.total:
        flows = {e: net.flow_on(a) for e, a in arc_idx.items() if net.flow_on(a)}
        return flows, None
    side = net.source_side(0)
    cert = CutCertificate(
        frozenset(u for u in vertices_out if out_ids[u] in side),
        frozenset(v for v in vertices_in if in_ids[v] in side),
        value,
        demands.total,
    )
    return None, cert


def prescribed_subgraph(
    Q: Multidigraph,
    demands: DegreePrescription,
    cap_per_pair: Mapping[tuple[int, int], int] | int | None = None,
) -> FlowResult:
    """Spanning sub-multidigraph with out/in degrees exactly as demanded.

    Each ordered pair may be used up to its multiplicity, or up to
    ``cap_per_pair`` when given (a constant or a per-pair map, never above the
    multiplicity). Returns a min-cut certificate when no such subgraph exists.
    """
    for u in list(demands.out_demand) + list(demands.in_demand):
        if not 0 <= u < Q.n:
            raise ValueError(f"demand on unknown vertex {u}")
    arcs: dict[tuple[int, int], int] = {}
    for e, m in Q.mult.items():
        if cap_per_pair is None:
            arcs[e] = m
        elif isinstance(cap_per_pair, int):
            arcs[e] = min(m, cap_per_pair)
        else:
            arcs[e] = min(m, cap_per_pair.get(e, 0))
    flows, cert = _degree_flow(range(Q.n), range(Q.n), arcs, demands)
    if flows is None:
        return FlowResult(None, cert)
    return FlowResult(Multidigraph(Q.n, flows, Q.allow_loops))


def superregular_prescribed(
    P: BipartitePair, m_out: Mapping[int, int], m_in: Mapping[int, int], kappa: int
) -> FlowResult:
    """Spanning subgraph of ``P`` with degree ``kappa - m_out[a]`` on the left and ``kappa - m_in[b]`` on the right.

    The subgraph is returned as a multidigraph on ``max vertex id + 1``
    vertices whose edges all go from left to right. Unequal demand totals are
    reported like any other infeasibility, with a cut certificate.
    """
    demands = DegreePrescription(
        {a: kappa - m_out.get(a, 0) for a in P.left}, {b: kappa - m_in.get(b, 0) for b in P.right}, strict=False
    )
    arcs = {e: 1 for e in P.edges}
    flows, cert = _degree_flow(sorted(P.left), sorted(P.right), arcs, demands)
    if flows is None:
        return FlowResult(None, cert)
    n = max(P.left + P.right) + 1
    return FlowResult(Multidigraph(n, flows))


def check_flow_parameters(q: float, rho: float, nu: float) -> bool:
    """Advisory check of the feasibility hypothesis ``rho <= q * nu^2 / 3``.

    Emits a warning and returns False when it fails; never raises.
    """
    ok = rho <= q * nu * nu / 3
    if not ok:
        warnings.warn(
            f"rho={rho} exceeds q*nu^2/3={q * nu * nu / 3:.4g}; the flow may be infeasible", stacklevel=2
        )
    return ok
