"""Independent oracle values frozen into the test suite.

Nothing here imports hamdec: instances are rebuilt from the same seeded
recipes the tests use and the answers come from networkx or brute force.

    python scripts/derive_oracles.py
"""

import itertools
import json
import math
import random
from fractions import Fraction

import networkx as nx


def derangement(n, seed):
    rng = random.Random(seed)
    while True:
        perm = list(range(n))
        rng.shuffle(perm)
        if all(perm[v] != v for v in range(n)):
            return perm


def cycle_count(perm):
    seen, count = set(), 0
    for s in range(len(perm)):
        if s in seen:
            continue
        count += 1
        v = s
        while v not in seen:
            seen.add(v)
            v = perm[v]
    return count


def random_pair(m, prob, seed, offset=None):
    rng = random.Random(seed)
    offset = m if offset is None else offset
    return {(a, offset + b) for a in range(m) for b in range(m) if rng.random() < prob}


def brute_regular(m, edges, eps):
    """Largest |d(X,Y) - d(A,B)| over all X, Y with at least eps*m vertices."""
    A = range(m)
    adj = [[(a, m + b) in edges for b in range(m)] for a in A]
    d = Fraction(len(edges), m * m)
    kmin = math.ceil(eps * m)
    worst = Fraction(0)
    for k in range(kmin, m + 1):
        for X in itertools.combinations(A, k):
            cols = [sum(adj[a][b] for a in X) for b in range(m)]
            cols.sort()
            for j in range(kmin, m + 1):
                lo = Fraction(sum(cols[:j]), k * j)
                hi = Fraction(sum(cols[-j:]), k * j)
                worst = max(worst, abs(lo - d), abs(hi - d))
    return worst


def random_tournament(n, seed, min_semi):
    for s in itertools.count(seed):
        rng = random.Random(s)
        edges = [(u, v) if rng.random() < 0.5 else (v, u) for u in range(n) for v in range(u + 1, n)]
        G = nx.DiGraph(edges)
        if min(min(d for _, d in G.out_degree()), min(d for _, d in G.in_degree())) >= min_semi:
            return s, G


def main():
    out = {}
    perm = derangement(10, 3)
    out["perm10_seed3"] = {"perm": perm, "cycles": cycle_count(perm)}

    e = random_pair(10, 0.5, 11)
    out["pair10_seed11"] = {"edges": len(e), "worst_deviation_eps0.45": float(brute_regular(10, e, Fraction(45, 100)))}

    e = random_pair(20, 0.5, 5)
    B = nx.Graph()
    B.add_nodes_from(range(40))
    B.add_edges_from(e)
    out["pair20_seed5_matching"] = len(nx.bipartite.maximum_matching(B, top_nodes=range(20))) // 2

    s, T = random_tournament(25, 0, 9)
    out["tournament25"] = {"seed": s, "strongly_connected": nx.is_strongly_connected(T)}

    # complete 4x4 pair, kappa=2, one left and one right vertex owe a red edge
    F = nx.DiGraph()
    for a in range(4):
        F.add_edge("s", ("L", a), capacity=2 - (a == 0))
        for b in range(4):
            F.add_edge(("L", a), ("R", b), capacity=1)
    for b in range(4):
        F.add_edge(("R", b), "t", capacity=2 - (b == 0))
    out["superregular_4x4_flow"] = nx.maximum_flow_value(F, "s", "t")

    out["chernoff"] = {"300_0.1": math.exp(-1.0), "30_0.9": math.exp(-8.1), "lower_100_0.9": math.exp(-13.5)}
    # (1 + d*(k-1)) mod p in 1..p
    out["progression"] = {
        "d1_p3": [((k - 1) % 3) + 1 for k in range(1, 5)],
        "d2_p7": [((2 * (k - 1)) % 7) + 1 for k in range(1, 5)],
    }
    print(json.dumps(out, indent=1))


if __name__ == "__main__":
    main()
