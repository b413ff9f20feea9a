"""Hamilton cycle search and merging the cycles of a 1-factor.

Merging at a cluster pair ``(V_i, V_{i+1})`` works through the linkage
permutation ``sigma``: following the factor from ``x`` in ``V_{i+1}`` first
re-enters ``V_i`` at ``sigma(x)``. An auxiliary digraph on ``V_i`` with an edge
``u -> sigma(v)`` for every reservoir edge ``u -> v`` turns a replacement
matching whose cycles all merge into a Hamilton cycle of that digraph.
"""

from __future__ import annotations

import random
from collections.abc import Hashable, Iterable, Mapping, Sequence
from dataclasses import dataclass, field

from .factorflow import maximum_matching
from .graphcore import BipartitePair, Multidigraph, OneFactor, cycle_decomposition

DEFAULT_BUDGET = 10**6
DEFAULT_RETRIES = 8


class MergeError(RuntimeError):
    """A pair merge found no replacement matching within its retries."""

    def __init__(self, message: str, stats: Mapping | None = None) -> None:
        super().__init__(message)
        self.stats = dict(stats or {})


class MergePreconditionError(ValueError):
    pass


# ----------------------------------------------------------- Hamilton search


@dataclass(frozen=True)
class HamiltonSearch:
    cycle: tuple[int, ...] | None
    expansions: int

    @property
    def exhausted(self) -> bool:
        return self.cycle is None


def is_hamilton_cycle(G: Multidigraph, cycle: Sequence[int], vertices: Iterable[int] | None = None) -> bool:
    """True iff ``cycle`` visits every vertex of ``vertices`` (default: all of ``G``) once along edges of ``G``."""
    target = set(range(G.n)) if vertices is None else set(vertices)
    if len(cycle) != len(target) or set(cycle) != target or len(cycle) < 2:
        return False
    return all(G.multiplicity(cycle[k], cycle[(k + 1) % len(cycle)]) > 0 for k in range(len(cycle)))


def _patch(succ: list[int], out: list[list[int]], has: list[set[int]], counter: list[int], budget: int) -> bool:
    """Merge the cycles of ``succ`` by two-edge exchanges until one remains."""
    n = len(succ)
    cyc = [-1] * n
    ncyc = 0
    for v in range(n):
        if cyc[v] < 0:
            u = v
            while cyc[u] < 0:
                cyc[u] = ncyc
                u = succ[u]
            ncyc += 1
    pred = [0] * n
    for u, w in enumerate(succ):
        pred[w] = u
    progress = True
    while ncyc > 1 and progress:
        progress = False
        for u in range(n):
            for w in out[u]:
                counter[0] += 1
                if counter[0] > budget:
                    return False
                if cyc[w] == cyc[u]:
                    continue
                v = pred[w]
                su = succ[u]
                if su in has[v]:
                    # u -> w and v -> su join the two cycles
                    succ[u], succ[v] = w, su
                    pred[w], pred[su] = u, v
                    old = cyc[w]
                    x = w
                    while cyc[x] == old:
                        cyc[x] = cyc[u]
                        x = succ[x]
                    ncyc -= 1
                    progress = True
                    break
            if ncyc == 1:
                break
    return ncyc == 1


def _backtrack(out: list[list[int]], has: list[set[int]], start: int, counter: list[int], budget: int):
    n = len(out)
    path = [start]
    on = [False] * n
    on[start] = True
    stack = [iter(sorted(out[start], key=lambda w: len(out[w])))]
    while stack:
        if counter[0] > budget:
            return None
        nxt = next(stack[-1], None)
        if nxt is None:
            stack.pop()
            v = path.pop()
            on[v] = False
            continue
        counter[0] += 1
        if on[nxt]:
            continue
        path.append(nxt)
        on[nxt] = True
        if len(path) == n:
            if start in has[nxt]:
                return path
            path.pop()
            on[nxt] = False
            continue
        stack.append(iter(sorted((w for w in out[nxt] if not on[w]), key=lambda w: len(out[w]))))
    return None


def find_hamilton(G: Multidigraph, budget: int = DEFAULT_BUDGET, seed: int = 0) -> HamiltonSearch:
    """Search for a Hamilton cycle of ``G``.

    Random 1-factors (perfect matchings of the double cover) are patched into
    one cycle by two-edge exchanges; when patching stalls, a Warnsdorff-ordered
    backtracking search runs on the remaining budget. Any cycle returned has
    been verified; ``exhausted`` only means the budget ran out.
    """
    if G.n < 3:
        raise ValueError("Hamilton search needs n >= 3")
    n = G.n
    rng = random.Random(seed)
    out = [sorted(w for w in G.out_mult(v) if w != v) for v in range(n)]
    has = [set(o) for o in out]
    counter = [0]
    if any(not o for o in out) or any(not G.in_mult(v).keys() - {v} for v in range(n)):
        return HamiltonSearch(None, 0)
    attempts = 0
    while counter[0] < budget // 2 and attempts < 64:
        attempts += 1
        adj = {v: rng.sample(out[v], len(out[v])) for v in range(n)}
        order = rng.sample(range(n), n)
        match = maximum_matching(order, adj)
        counter[0] += n
        if len(match) < n:
            # without a 1-factor there is no Hamilton cycle to find
            return HamiltonSearch(None, counter[0])
        succ = [match[v] for v in range(n)]
        shuffled = [rng.sample(o, len(o)) for o in out]
        if _patch(succ, shuffled, has, counter, budget):
            cyc = [0]
            while len(cyc) < n:
                cyc.append(succ[cyc[-1]])
            assert is_hamilton_cycle(G, cyc)
            return HamiltonSearch(tuple(cyc), counter[0])
    path = _backtrack(out, has, rng.randrange(n), counter, budget)
    if path is not None:
        assert is_hamilton_cycle(G, path)
        return HamiltonSearch(tuple(path), counter[0])
    return HamiltonSearch(None, counter[0])


# ------------------------------------------------------------------ linkage


@dataclass(frozen=True)
class LinkagePermutation:
    """``sigma[x]`` is the first vertex of ``V_i`` on the factor walk from ``x`` in ``V_{i+1}``."""

    sigma: Mapping[int, int]

    def inverse(self) -> dict[int, int]:
        return {w: x for x, w in self.sigma.items()}


def linkage(F: OneFactor, V_i: Iterable[int], V_next: Iterable[int]) -> LinkagePermutation:
    Vi = set(V_i)
    sigma = {}
    for x in sorted(V_next):
        seen = {x}
        y = F.successor[x]
        while y not in Vi:
            if y in seen:
                raise ValueError(f"walk from {x} revisits {y} before reaching V_i")
            seen.add(y)
            y = F.successor[y]
        sigma[x] = y
    if len(set(sigma.values())) != len(sigma) or set(sigma.values()) != Vi:
        raise ValueError("linkage is not a bijection onto V_i")
    return LinkagePermutation(sigma)


# --------------------------------------------------------------- contexts


@dataclass(frozen=True)
class MergeContext:
    """A cycle of clusters ``V_1 .. V_k``, the pair indices ``J`` usable for
    merging (index ``i`` stands for ``V_i V_{i+1}``), the reservoir pair graphs
    on those pairs, and the 1-factor being merged."""

    cluster_cycle: tuple[tuple[int, ...], ...]
    J: frozenset[int]
    pair_graphs: Mapping[int, BipartitePair]
    factor: OneFactor

    def pair(self, i: int) -> tuple[tuple[int, ...], tuple[int, ...]]:
        k = len(self.cluster_cycle)
        return self.cluster_cycle[i % k], self.cluster_cycle[(i + 1) % k]

    def violations(self) -> list[str]:
        out = []
        succ = self.factor.successor
        for i in sorted(self.J):
            A, B = self.pair(i)
            if {succ.get(a) for a in A} != set(B):
                out.append(f"factor is not a perfect matching on pair {i}")
        heads = set().union(*(set(self.pair(i)[0]) for i in self.J)) if self.J else set()
        covered = set().union(*map(set, self.cluster_cycle))
        for c in self.factor.cycles:
            if covered.intersection(c) and not heads.intersection(c):
                out.append(f"factor cycle through {c[0]} meets no J pair")
        return out


@dataclass(frozen=True)
class PairMerge:
    factor: OneFactor
    matching: dict[int, int]
    replaced: dict[int, int]
    cycles_before: int
    cycles_after: int
    expansions: int


def _small_hamilton(n: int, edges: set[tuple[int, int]]) -> tuple[int, ...] | None:
    if n == 1:
        return (0,)
    if n == 2:
        return (0, 1) if {(0, 1), (1, 0)} <= edges else None
    return None


def merge_at_pair(
    ctx: MergeContext, i: int, seed: int = 0, budget: int = DEFAULT_BUDGET, retries: int = DEFAULT_RETRIES
) -> PairMerge:
    """Replace the factor's matching on ``V_i V_{i+1}`` so that every cycle meeting ``V_i`` becomes one."""
    if i not in ctx.J:
        raise MergePreconditionError(f"pair {i} is not in J")
    A, B = ctx.pair(i)
    succ = dict(ctx.factor.successor)
    if {succ.get(a) for a in A} != set(B):
        raise MergePreconditionError(f"factor is not a perfect matching on pair {i}")
    P = ctx.pair_graphs[i]
    if not P.edges:
        raise MergePreconditionError(f"reservoir on pair {i} is empty")
    sigma = linkage(ctx.factor, A, B)
    inv = sigma.inverse()
    idx = {a: j for j, a in enumerate(sorted(A))}
    names = sorted(A)
    aux_edges = set()
    for u, v in P.edges:
        if u in idx and v in sigma.sigma:
            w = sigma.sigma[v]
            if w != u:
                aux_edges.add((idx[u], idx[w]))
    m = len(A)
    stats = {"pair": i, "m": m, "aux_edges": len(aux_edges)}
    order = _small_hamilton(m, aux_edges) if m < 3 else None
    spent = 0
    if m >= 3:
        aux = Multidigraph.from_edges(m, sorted(aux_edges))
        for attempt in range(retries):
            res = find_hamilton(aux, budget=budget, seed=seed * 1_000_003 + attempt)
            spent += res.expansions
            if not res.exhausted:
                order = res.cycle
                break
    if order is None:
        stats["expansions"] = spent
        raise MergeError(f"no Hamilton cycle in the auxiliary digraph of pair {i}", stats)
    before = len({ctx.factor.cycle_of(a) for a in A})
    nxt = {names[order[k]]: names[order[(k + 1) % m]] for k in range(m)}
    matching = {u: inv[nxt[u]] for u in names}
    assert all((u, v) in P.edges for u, v in matching.items())
    replaced = {a: succ[a] for a in names}
    succ.update(matching)
    merged = cycle_decomposition(succ)
    # sigma after the new matching visits V_i in one cycle
    assert len({merged.cycle_of(a) for a in A}) == 1
    return PairMerge(merged, matching, replaced, before, 1, spent)


# --------------------------------------------------------- whole factors


def j_schedule(kappa: int, p: int) -> list[int]:
    """1-based index ``q`` of the edge set used for each of ``kappa`` factors.

    ``kappa' = kappa // (p - 4)`` factors share each set and any remainder goes
    to the last one. For ``p < 5`` a single set is used.
    """
    sets = max(p - 4, 1)
    per = max(kappa // sets, 1)
    return [min(j // per + 1, sets) for j in range(kappa)]


@dataclass(frozen=True)
class FactorMerge:
    cycle: tuple[int, ...] | None
    consumed: dict[tuple[int, int], dict[int, int]] = field(default_factory=dict)
    merges: int = 0
    failure: str | None = None

    @property
    def ok(self) -> bool:
        return self.cycle is not None


def merge_factor(
    factor: OneFactor,
    cluster_cycles: Sequence[Sequence[Sequence[int]]],
    J: Sequence[Iterable[int]],
    reservoir: Mapping[tuple[int, int], Iterable[tuple[int, int]]],
    seed: int = 0,
    budget: int = DEFAULT_BUDGET,
    retries: int = DEFAULT_RETRIES,
    passes: int = 1,
) -> FactorMerge:
    """Turn ``factor`` into a Hamilton cycle on its vertex set.

    ``cluster_cycles[k]`` is the k-th cycle ``D_k`` of clusters, ``J[k]`` the
    pair indices of ``D_k`` to merge at, and ``reservoir[(k, i)]`` the edges
    available there. The reservoir is never mutated: consumed matchings are
    returned so the caller commits them only on success.
    """
    Js = [sorted(set(j)) for j in J]
    for k, Jk in enumerate(Js):
        if not Jk:
            return FactorMerge(None, failure=f"cluster cycle {k} has no J pair")
    heads = set()
    for k, Jk in enumerate(Js):
        for i in Jk:
            heads.update(cluster_cycles[k][i])
    for c in factor.cycles:
        if not heads.intersection(c):
            return FactorMerge(None, failure=f"factor cycle through {c[0]} meets no J pair")
    available = {key: set(es) for key, es in reservoir.items()}
    consumed: dict[tuple[int, int], dict[int, int]] = {}
    f = factor
    merges = 0
    for rnd in range(max(passes, 1)):
        for k, (D, Jk) in enumerate(zip(cluster_cycles, Js)):
            for i in Jk:
                if len(f.cycles) == 1:
                    break
                key = (k, i)
                A = tuple(D[i])
                B = tuple(D[(i + 1) % len(D)])
                # release the matching consumed here earlier in this factor
                pool = available.get(key, set()) | set(consumed.get(key, {}).items())
                pool |= {(a, f.successor[a]) for a in A}
                ctx = MergeContext(
                    tuple(map(tuple, D)), frozenset({i}), {i: BipartitePair(A, B, frozenset(pool))}, f
                )
                try:
                    res = merge_at_pair(ctx, i, seed=seed + 7 * merges, budget=budget, retries=retries)
                except (MergeError, MergePreconditionError) as exc:
                    return FactorMerge(None, failure=str(exc))
                f = res.factor
                merges += 1
                taken = {u: v for u, v in res.matching.items() if (u, v) in available.get(key, set())}
                if key in consumed:
                    for u, v in consumed[key].items():
                        if res.matching.get(u) != v:
                            available[key].add((u, v))
                consumed[key] = taken
                for e in taken.items():
                    available[key].discard(e)
        if len(f.cycles) == 1:
            break
    if len(f.cycles) != 1:
        return FactorMerge(None, failure=f"{len(f.cycles)} cycles remain after merging")
    return FactorMerge(f.cycles[0], consumed, merges)


# -------------------------------------------------------------- verifier


@dataclass(frozen=True)
class CycleReport:
    ok: bool
    problems: tuple[str, ...]


def verify_cycles(G: Multidigraph, cycles: Sequence[Sequence[int]], vertices: Iterable[int] | None = None) -> CycleReport:
    """Check that every cycle is Hamilton in ``G`` and no edge is used more often than it occurs."""
    problems = []
    target = set(range(G.n)) if vertices is None else set(vertices)
    usage: dict[tuple[int, int], int] = {}
    for j, c in enumerate(cycles):
        if not is_hamilton_cycle(G, c, target):
            problems.append(f"cycle {j} is not a Hamilton cycle")
        for k in range(len(c)):
            e = (c[k], c[(k + 1) % len(c)])
            usage[e] = usage.get(e, 0) + 1
    for e, u in sorted(usage.items()):
        if u > G.multiplicity(*e):
            problems.append(f"edge {e[0]}->{e[1]} used {u} times")
    return CycleReport(not problems, tuple(problems))


def factor_edges(factor: OneFactor) -> set[tuple[int, int]]:
    return {(u, v) for u, v in factor.successor.items()}


def cycle_edges(cycle: Sequence[Hashable]) -> list[tuple]:
    return [(cycle[k], cycle[(k + 1) % len(cycle)]) for k in range(len(cycle))]
