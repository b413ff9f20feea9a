"""Unwinding blown-up cycles into edge-disjoint Hamilton cycles.

A vertex of ``p ⊗ C_n`` is written ``(j, i)`` with class ``j`` in ``1..n`` and
copy ``i`` in ``1..p``; its integer id is ``(j-1)*p + (i-1)``, matching
:func:`hamdec.graphcore.blow_up`.
"""

from __future__ import annotations

from collections.abc import Hashable, Sequence
from dataclasses import dataclass, field
from math import gcd

from .graphcore import OneFactor, factor_from_cycles

Vertex = tuple[int, int]


def is_prime(p: int) -> bool:
    if p < 2:
        return False
    return all(p % q for q in range(2, int(p**0.5) + 1))


def _mod1(a: int, n: int) -> int:
    """Residue of ``a`` mod ``n`` in ``1..n``."""
    r = a % n
    return n if r == 0 else r


def progression(d: int, k: int, p: int) -> int:
    """The ``k``-th term ``{1 + (k-1)d}`` of the progression with step ``d`` mod ``p``."""
    if not 1 <= d <= p - 1:
        raise ValueError(f"step d={d} outside 1..{p - 1}")
    if k < 1:
        raise ValueError("k starts at 1")
    return _mod1(1 + (k - 1) * d, p)


@dataclass(frozen=True)
class Unwinding:
    n: int
    p: int
    cycles: tuple[tuple[Vertex, ...], ...]
    patch_matchings: tuple[dict[int, int], ...] = field(default_factory=tuple)

    def vertex_id(self, v: Vertex) -> int:
        return (v[0] - 1) * self.p + (v[1] - 1)

    def id_cycles(self) -> list[list[int]]:
        return [[self.vertex_id(v) for v in c] for c in self.cycles]

    def edges(self, d: int) -> list[tuple[Vertex, Vertex]]:
        c = self.cycles[d - 1]
        return [(c[k], c[(k + 1) % len(c)]) for k in range(len(c))]

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "p": self.p,
            "cycles": [[list(v) for v in c] for c in self.cycles],
            "patch_matchings": [{str(k): v for k, v in m.items()} for m in self.patch_matchings],
        }


def _coprime_cycle(n: int, p: int, d: int) -> list[Vertex]:
    return [(_mod1(k, n), progression(d, k, p)) for k in range(1, n * p + 1)]


def unwind_cycle(n: int, p: int) -> Unwinding:
    """``p - 1`` edge-disjoint Hamilton cycles of ``p ⊗ C_n``.

    Copies with the same index sit at pairwise distance at least ``p`` on
    every cycle: on all classes when ``gcd(n, p) = 1`` and on classes
    ``1..n-2`` otherwise.
    """
    if p <= 2 or not is_prime(p):
        raise ValueError(f"p must be an odd prime, got {p}")
    if n < 3:
        raise ValueError("the base cycle needs length at least 3")
    if gcd(n, p) == 1:
        return Unwinding(n, p, tuple(tuple(_coprime_cycle(n, p, d)) for d in range(1, p)))
    # classes n-1, n and 1 are merged into class 1 of a cycle of length n-2
    short = n - 2
    cycles = []
    matchings = []
    for d in range(1, p):
        shift = {i: _mod1(i + d, p) for i in range(1, p + 1)}
        matchings.append(shift)
        aux = _coprime_cycle(short, p, d)
        cyc: list[Vertex] = []
        for k, (j, i) in enumerate(aux):
            cyc.append((j, i))
            nj, ni = aux[(k + 1) % len(aux)]
            if j == short and nj == 1:
                cyc.append((n - 1, ni))
                cyc.append((n, shift[ni]))
        cycles.append(tuple(cyc))
    return Unwinding(n, p, tuple(cycles), tuple(matchings))


def cycle_distance(cycle: Sequence[Hashable], a: Hashable, b: Hashable) -> int:
    """Smaller of the two forward distances between ``a`` and ``b`` on ``cycle``."""
    pos = {v: k for k, v in enumerate(cycle)}
    L = len(cycle)
    fwd = (pos[b] - pos[a]) % L
    return min(fwd, (L - fwd) % L)


def distance_violations(U: Unwinding, classes: Sequence[int] | None = None) -> list[tuple[int, int, int, int]]:
    """Pairs ``(d, i, j, j')`` where ``x_j^i`` and ``x_j'^i`` are closer than ``p`` on cycle ``d``."""
    if classes is None:
        classes = range(1, U.n + 1) if gcd(U.n, U.p) == 1 else range(1, U.n - 1)
    classes = list(classes)
    bad = []
    for d, cyc in enumerate(U.cycles, start=1):
        pos = {v: k for k, v in enumerate(cyc)}
        L = len(cyc)
        for i in range(1, U.p + 1):
            for a in range(len(classes)):
                for b in range(a + 1, len(classes)):
                    fwd = (pos[(classes[b], i)] - pos[(classes[a], i)]) % L
                    if min(fwd, L - fwd) < U.p:
                        bad.append((d, i, classes[a], classes[b]))
    return bad


def check_unwinding(U: Unwinding) -> None:
    """Raise if the cycles are not edge-disjoint Hamilton cycles of ``p ⊗ C_n``."""
    every = {(j, i) for j in range(1, U.n + 1) for i in range(1, U.p + 1)}
    seen: set[tuple[Vertex, Vertex]] = set()
    for d, cyc in enumerate(U.cycles, start=1):
        if len(cyc) != len(every) or set(cyc) != every:
            raise AssertionError(f"cycle {d} is not Hamilton")
        for k, u in enumerate(cyc):
            v = cyc[(k + 1) % len(cyc)]
            if _mod1(u[0] + 1, U.n) != v[0]:
                raise AssertionError(f"edge {u}->{v} of cycle {d} skips a class")
            if (u, v) in seen:
                raise AssertionError(f"edge {u}->{v} used twice")
            seen.add((u, v))


# ------------------------------------------------------------ even folds


def _shift_schedule(s: int, K: int) -> list[list[int]]:
    """Shifts ``f[j][d]`` for transitions ``j`` and cycles ``d`` so that each
    transition uses distinct shifts and every total shift is a unit mod ``s``."""
    count = s - 1
    base = [[(d + 1) % s for d in range(count)] for _ in range(max(K - 2, 0))]
    fixed = [sum(row[d] for row in base) for d in range(count)]
    a: list[int] = [0] * count
    b: list[int] = [0] * count
    used_a: set[int] = set()
    used_b: set[int] = set()

    def place(d: int) -> bool:
        if d == count:
            return True
        for x in range(s):
            if x in used_a:
                continue
            for y in range(s):
                if y in used_b or gcd((fixed[d] + x + y) % s, s) != 1:
                    continue
                a[d], b[d] = x, y
                used_a.add(x)
                used_b.add(y)
                if place(d + 1):
                    return True
                used_a.discard(x)
                used_b.discard(y)
        return False

    if K < 2 or not place(0):
        raise ValueError(f"no shift schedule for s={s}, K={K}")
    return base + [a, b]


def unwind_blowup(K: int, s: int) -> list[list[Vertex]]:
    """``s - 1`` edge-disjoint Hamilton cycles of ``s ⊗ C_K`` for any ``s >= 2``.

    Each transition between consecutive classes is a cyclic shift of the copy
    index; the shifts are chosen so the composed shift generates ``Z_s``.
    """
    if s < 2:
        raise ValueError("need s >= 2")
    sched = _shift_schedule(s, K)
    cycles = []
    for d in range(s - 1):
        cyc: list[Vertex] = []
        j, i = 1, 1
        for _ in range(K * s):
            cyc.append((j, i))
            i = (i - 1 + sched[j - 1][d]) % s + 1
            j = j % K + 1
        cycles.append(cyc)
    return cycles


# ------------------------------------------------------- double unwinding


@dataclass(frozen=True)
class DoubleUnwinding:
    """Result of unwinding one primary 1-factor twice.

    ``s_factors[j]`` are cycles over s-clusters ``(W, a)``; ``p_factors`` lists
    ``(j, d, cycles)`` with cycles over p-clusters ``(W, a, b)``. ``star``
    records whether the spacing property held on every p-level cycle.
    """

    s: int
    p: int
    s_factors: tuple[tuple[tuple[tuple[int, int], ...], ...], ...]
    p_factors: tuple[tuple[int, int, tuple[tuple[tuple[int, int, int], ...], ...]], ...]
    star: bool


def star_violations(s_cycle: Sequence[tuple[int, int]], p_cycle: Sequence[tuple[int, int, int]], p: int) -> list:
    """Copies ``b`` of classes ``1..len-2`` of ``s_cycle`` closer than ``p`` on ``p_cycle``."""
    pos = {v: k for k, v in enumerate(p_cycle)}
    L = len(p_cycle)
    bad = []
    heads = list(s_cycle[:-2])
    for b in range(p):
        for x in range(len(heads)):
            for y in range(x + 1, len(heads)):
                u = (*heads[x], b)
                v = (*heads[y], b)
                fwd = (pos[v] - pos[u]) % L
                if min(fwd, L - fwd) < p:
                    bad.append((heads[x], heads[y], b))
    return bad


def double_unwind(factor: OneFactor, s: int, p: int) -> DoubleUnwinding:
    """Unwind every cycle of ``factor`` into ``s - 1`` cycles over s-clusters,
    then every resulting cycle into ``p - 1`` cycles over p-clusters."""
    if s % 2 or s < 2:
        raise ValueError("s must be a positive even integer")
    if p <= 2 or not is_prime(p):
        raise ValueError("p must be an odd prime")
    s_factors: list[list[tuple]] = [[] for _ in range(s - 1)]
    for C in factor.cycles:
        for j, cyc in enumerate(unwind_blowup(len(C), s)):
            s_factors[j].append(tuple((C[cls - 1], copy - 1) for cls, copy in cyc))
    p_factors = []
    star = True
    for j, cycles in enumerate(s_factors):
        per_d: list[list[tuple]] = [[] for _ in range(p - 1)]
        for D in cycles:
            U = unwind_cycle(len(D), p)
            for d, cyc in enumerate(U.cycles):
                pc = tuple((*D[cls - 1], copy - 1) for cls, copy in cyc)
                per_d[d].append(pc)
                if star_violations(D, pc, p):
                    star = False
        for d in range(p - 1):
            p_factors.append((j, d, tuple(per_d[d])))
    return DoubleUnwinding(s, p, tuple(map(tuple, s_factors)), tuple(p_factors), star)


def factor_over_ids(cycles: Sequence[Sequence[Hashable]], ids: dict) -> OneFactor:
    return factor_from_cycles([[ids[v] for v in c] for c in cycles])
