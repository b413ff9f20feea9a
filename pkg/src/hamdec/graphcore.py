"""Multidigraphs, bipartite pairs, 1-factors and the shared JSON graph format."""

from __future__ import annotations

import json
from collections import Counter, defaultdict
from collections.abc import Iterable, Iterator, Mapping, Sequence
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

Edge = tuple[int, int]


@dataclass(frozen=True, eq=False)
class Multidigraph:
    """Directed multigraph on vertices ``0..n-1``.

    Parallel edges are stored as an integer multiplicity per ordered pair.
    Instances are treated as immutable; every operation returns a new graph.
    """

    n: int
    mult: Mapping[Edge, int] = field(default_factory=dict)
    allow_loops: bool = False

    def __post_init__(self) -> None:
        if self.n < 0:
            raise ValueError("vertex count must be non-negative")
        clean: dict[Edge, int] = {}
        for (u, v), m in self.mult.items():
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise ValueError(f"edge ({u},{v}) outside vertex range 0..{self.n - 1}")
            if m < 0:
                raise ValueError(f"negative multiplicity on ({u},{v})")
            if u == v and m and not self.allow_loops:
                raise ValueError(f"self-loop at {u} not allowed")
            if m:
                clean[(u, v)] = int(m)
        object.__setattr__(self, "mult", clean)

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[Sequence[int]], allow_loops: bool = False) -> Multidigraph:
        """Build from ``(u, v)`` or ``(u, v, mult)`` records, summing repeats."""
        counts: Counter[Edge] = Counter()
        for e in edges:
            u, v = int(e[0]), int(e[1])
            counts[(u, v)] += int(e[2]) if len(e) > 2 else 1
        return cls(n, dict(counts), allow_loops)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Multidigraph):
            return NotImplemented
        return self.n == other.n and self.mult == other.mult

    def __hash__(self) -> int:
        return hash((self.n, frozenset(self.mult.items())))

    def __repr__(self) -> str:
        return f"Multidigraph(n={self.n}, edges={self.edge_count})"

    def multiplicity(self, u: int, v: int) -> int:
        return self.mult.get((u, v), 0)

    def edges(self) -> Iterator[tuple[int, int, int]]:
        """Yield ``(u, v, mult)`` in lexicographic order."""
        for (u, v) in sorted(self.mult):
            yield u, v, self.mult[(u, v)]

    def edge_list(self) -> list[Edge]:
        """All edges with repetition according to multiplicity."""
        return [(u, v) for u, v, m in self.edges() for _ in range(m)]

    @cached_property
    def edge_count(self) -> int:
        return sum(self.mult.values())

    @cached_property
    def _out(self) -> list[dict[int, int]]:
        out: list[dict[int, int]] = [dict() for _ in range(self.n)]
        for (u, v), m in sorted(self.mult.items()):
            out[u][v] = m
        return out

    @cached_property
    def _in(self) -> list[dict[int, int]]:
        inn: list[dict[int, int]] = [dict() for _ in range(self.n)]
        for (u, v), m in sorted(self.mult.items()):
            inn[v][u] = m
        return inn

    def out_neighbours(self, v: int) -> list[int]:
        return list(self._out[v])

    def in_neighbours(self, v: int) -> list[int]:
        return list(self._in[v])

    def out_mult(self, v: int) -> Mapping[int, int]:
        return self._out[v]

    def in_mult(self, v: int) -> Mapping[int, int]:
        return self._in[v]

    def out_degree(self, v: int) -> int:
        return sum(self._out[v].values())

    def in_degree(self, v: int) -> int:
        return sum(self._in[v].values())

    @cached_property
    def out_degrees(self) -> list[int]:
        return [sum(d.values()) for d in self._out]

    @cached_property
    def in_degrees(self) -> list[int]:
        return [sum(d.values()) for d in self._in]

    def min_semidegree(self) -> int:
        if self.n == 0:
            return 0
        return min(min(self.out_degrees), min(self.in_degrees))

    def max_semidegree(self) -> int:
        if self.n == 0:
            return 0
        return max(max(self.out_degrees), max(self.in_degrees))

    def is_regular(self, r: int | None = None) -> bool:
        degs = set(self.out_degrees) | set(self.in_degrees)
        if r is None:
            return len(degs) <= 1
        return degs <= {r} and (self.n == 0 or degs == {r})

    def max_multiplicity(self) -> int:
        return max(self.mult.values(), default=0)

    def add(self, other: Multidigraph) -> Multidigraph:
        """Edge-multiset union."""
        _same_n(self, other)
        counts = Counter(self.mult)
        counts.update(other.mult)
        return Multidigraph(self.n, dict(counts), self.allow_loops or other.allow_loops)

    def subtract(self, other: Multidigraph) -> Multidigraph:
        """Edge-multiset difference; ``other`` must be contained in ``self``."""
        _same_n(self, other)
        counts = dict(self.mult)
        for e, m in other.mult.items():
            have = counts.get(e, 0)
            if m > have:
                raise ValueError(f"cannot remove {m} copies of {e}; only {have} present")
            counts[e] = have - m
        return Multidigraph(self.n, counts, self.allow_loops)

    def contains(self, other: Multidigraph) -> bool:
        return self.n == other.n and all(self.mult.get(e, 0) >= m for e, m in other.mult.items())

    def induced(self, vertices: Iterable[int]) -> Multidigraph:
        """Subgraph on ``vertices``, keeping original vertex ids."""
        keep = set(vertices)
        return Multidigraph(
            self.n, {e: m for e, m in self.mult.items() if e[0] in keep and e[1] in keep}, self.allow_loops
        )

    def simple(self) -> Multidigraph:
        """Underlying simple digraph (multiplicities clipped to one)."""
        return Multidigraph(self.n, {e: 1 for e in self.mult}, self.allow_loops)

    def to_json(self) -> dict:
        return {"n": self.n, "edges": [[u, v, m] for u, v, m in self.edges()]}

    @classmethod
    def from_json(cls, data: Mapping) -> Multidigraph:
        return cls.from_edges(int(data["n"]), data.get("edges", []))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json()))

    @classmethod
    def load(cls, path: str | Path) -> Multidigraph:
        return cls.from_json(json.loads(Path(path).read_text()))


def _same_n(a: Multidigraph, b: Multidigraph) -> None:
    if a.n != b.n:
        raise ValueError(f"vertex counts differ: {a.n} vs {b.n}")


@dataclass(frozen=True)
class BipartitePair:
    """Oriented bipartite graph with every edge going from ``left`` to ``right``."""

    left: tuple[int, ...]
    right: tuple[int, ...]
    edges: frozenset[Edge]

    def __post_init__(self) -> None:
        object.__setattr__(self, "left", tuple(self.left))
        object.__setattr__(self, "right", tuple(self.right))
        object.__setattr__(self, "edges", frozenset(self.edges))
        if not self.left or not self.right:
            raise ValueError("both classes of a bipartite pair must be non-empty")
        ls, rs = set(self.left), set(self.right)
        for a, b in self.edges:
            if a not in ls or b not in rs:
                raise ValueError(f"edge ({a},{b}) does not go from left to right")

    @classmethod
    def from_graph(cls, G: Multidigraph, A: Iterable[int], B: Iterable[int]) -> BipartitePair:
        """The pair ``(A, B)`` of ``G``: all edges of ``G`` from ``A`` to ``B``."""
        A, B = tuple(A), tuple(B)
        bs = set(B)
        return cls(A, B, frozenset((a, b) for a in A for b in G.out_mult(a) if b in bs))

    @cached_property
    def _adj(self) -> dict[int, set[int]]:
        adj: dict[int, set[int]] = {v: set() for v in self.left + self.right}
        for a, b in self.edges:
            adj[a].add(b)
            adj[b].add(a)
        return adj

    def neighbours(self, v: int) -> set[int]:
        return self._adj[v]

    def degree(self, v: int) -> int:
        return len(self._adj[v])

    def to_json(self) -> dict:
        return {"left": list(self.left), "right": list(self.right), "edges": sorted(map(list, self.edges))}

    @classmethod
    def from_json(cls, data: Mapping) -> BipartitePair:
        return cls(tuple(data["left"]), tuple(data["right"]), frozenset((int(a), int(b)) for a, b in data["edges"]))


@dataclass(frozen=True)
class OneFactor:
    """A spanning 1-regular digraph on ``vertices`` stored as a successor map."""

    successor: Mapping[int, int]
    cycles: tuple[tuple[int, ...], ...]

    @property
    def vertices(self) -> list[int]:
        return sorted(self.successor)

    def edges(self) -> list[Edge]:
        return sorted(self.successor.items())

    def predecessor(self) -> dict[int, int]:
        return {v: u for u, v in self.successor.items()}

    def as_graph(self, n: int) -> Multidigraph:
        return Multidigraph.from_edges(n, self.edges())

    def is_hamilton(self) -> bool:
        return len(self.cycles) == 1

    @cached_property
    def _cycle_index(self) -> dict[int, int]:
        return {v: j for j, c in enumerate(self.cycles) for v in c}

    def cycle_of(self, v: int) -> int:
        """Index of the cycle containing ``v``."""
        return self._cycle_index[v]


def cycle_decomposition(successor: Mapping[int, int] | Sequence[int]) -> OneFactor:
    """Split a permutation into its cycles.

    ``successor`` may be a mapping or a sequence indexed by vertex. Each cycle
    starts at its smallest vertex and cycles are ordered by that vertex.
    Fixed points are rejected since a digraph 1-factor has no loops.
    """
    succ = dict(successor) if isinstance(successor, Mapping) else dict(enumerate(successor))
    if sorted(succ.values()) != sorted(succ):
        raise ValueError("successor map is not a bijection on its vertex set")
    seen: set[int] = set()
    cycles = []
    for start in sorted(succ):
        if start in seen:
            continue
        cyc = [start]
        seen.add(start)
        v = succ[start]
        while v != start:
            cyc.append(v)
            seen.add(v)
            v = succ[v]
        if len(cyc) < 2:
            raise ValueError(f"fixed point at {start}; 1-factor cycles need length at least 2")
        cycles.append(tuple(cyc))
    return OneFactor(succ, tuple(cycles))


def factor_from_cycles(cycles: Iterable[Sequence[int]]) -> OneFactor:
    succ: dict[int, int] = {}
    for cyc in cycles:
        for i, v in enumerate(cyc):
            if v in succ:
                raise ValueError(f"vertex {v} appears in two cycles")
            succ[v] = cyc[(i + 1) % len(cyc)]
    return cycle_decomposition(succ)


def blow_up(R: Multidigraph, r: int) -> tuple[Multidigraph, list[int]]:
    """The ``r``-fold blow-up of ``R``.

    Vertex ``x`` of ``R`` becomes ``x*r .. x*r + r - 1``; each edge ``xy`` of
    multiplicity ``m`` becomes a complete ``r x r`` block of multiplicity ``m``.
    Returns the graph and the class index of every new vertex.
    """
    if r < 1:
        raise ValueError("blow-up factor must be at least 1")
    mult = {}
    for (x, y), m in R.mult.items():
        for i in range(r):
            for j in range(r):
                mult[(x * r + i, y * r + j)] = m
    return Multidigraph(R.n * r, mult, R.allow_loops), [v // r for v in range(R.n * r)]


def winds_around(G: Multidigraph, cycle: Sequence[int], assignment: Mapping[int, int] | Sequence[int]) -> bool:
    """True iff every edge of ``G`` goes from some class ``cycle[j]`` to ``cycle[j+1]``."""
    assign = assignment if isinstance(assignment, Mapping) else dict(enumerate(assignment))
    nxt = {c: cycle[(j + 1) % len(cycle)] for j, c in enumerate(cycle)}
    ok = True
    for (u, v) in G.mult:
        if u not in assign or v not in assign or assign[u] is None or assign[v] is None:
            raise ValueError(f"edge ({u},{v}) has an unassigned endpoint")
        if nxt.get(assign[u]) != assign[v]:
            ok = False
    return ok


def classes(assignment: Sequence[int | None]) -> dict[int, list[int]]:
    out: dict[int, list[int]] = defaultdict(list)
    for v, c in enumerate(assignment):
        if c is not None:
            out[c].append(v)
    return dict(out)
