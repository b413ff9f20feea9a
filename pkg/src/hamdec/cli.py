"""Command line entry point: ``hamdec <command> ...``.

Exit codes: 0 success, 2 partial result (some factors or slices failed, or a
check found a violation), 1 error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from fractions import Fraction
from pathlib import Path

from .expander import ExpanderParams, is_robust_outexpander
from .factorflow import one_factorize
from .graphcore import BipartitePair, Multidigraph, factor_from_cycles
from .hammerge import MergeContext, merge_factor, verify_cycles
from .partition import ClusterPartition
from .pipeline import PipelineConfig, approx_decompose, generate_instance
from .regularity import check_eps_d_regular, check_regular, check_superregular
from .unwind import check_unwinding, distance_violations, unwind_cycle

OK, ERROR, PARTIAL = 0, 1, 2


def _write(obj, path: str | None) -> None:
    text = json.dumps(obj, indent=1, default=str)
    if path:
        Path(path).write_text(text)
    else:
        print(text)


def _read(path: str):
    return json.loads(Path(path).read_text())


def load_context(data: dict) -> MergeContext:
    """``{"cluster_cycle": [[...]], "J": [...], "pair_graphs": {"i": pair}, "factor": [[cycle], ...]}``."""
    return MergeContext(
        tuple(tuple(c) for c in data["cluster_cycle"]),
        frozenset(data["J"]),
        {int(k): BipartitePair.from_json(v) for k, v in data["pair_graphs"].items()},
        factor_from_cycles(data["factor"]),
    )


def cmd_check_expander(a: argparse.Namespace) -> int:
    G = Multidigraph.load(a.graph)
    v = is_robust_outexpander(
        G, ExpanderParams(Fraction(a.nu), Fraction(a.tau)), exhaustive=a.exhaustive, samples=a.samples, seed=a.seed
    )
    print(v.describe())
    return PARTIAL if v.violated else OK


def cmd_check_regular(a: argparse.Namespace) -> int:
    P = BipartitePair.from_json(_read(a.pair))
    if a.super:
        if a.d is None:
            raise ValueError("--super needs --d")
        v = check_superregular(P, Fraction(a.eps), Fraction(a.d))
    elif a.d is not None:
        v = check_eps_d_regular(P, Fraction(a.eps), Fraction(a.d))
    else:
        v = check_regular(P, Fraction(a.eps))
    out = {"status": v.status, "reason": v.reason}
    if v.X is not None:
        out.update(X=sorted(v.X), Y=sorted(v.Y))
    if v.vertex is not None:
        out["vertex"] = v.vertex
    print(json.dumps(out))
    return OK if v.ok else PARTIAL


def cmd_factorize(a: argparse.Namespace) -> int:
    G = Multidigraph.load(a.graph)
    factors = one_factorize(G, a.r)
    _write([[list(c) for c in F.cycles] for F in factors], a.out)
    return OK


def cmd_unwind(a: argparse.Namespace) -> int:
    U = unwind_cycle(a.n, a.p)
    check_unwinding(U)
    if distance_violations(U):
        raise AssertionError("distance property failed")
    _write(U.to_json(), a.out)
    return OK


def cmd_merge(a: argparse.Namespace) -> int:
    ctx = load_context(_read(a.context))
    bad = ctx.violations()
    if bad:
        raise ValueError("; ".join(bad))
    J = [sorted(ctx.J)]
    reservoir = {(0, i): set(P.edges) for i, P in ctx.pair_graphs.items()}
    fm = merge_factor(ctx.factor, [ctx.cluster_cycle], J, reservoir, seed=a.seed)
    if not fm.ok:
        print(f"merge failed: {fm.failure}", file=sys.stderr)
        return PARTIAL
    _write(list(fm.cycle), a.out)
    return OK


def cmd_verify(a: argparse.Namespace) -> int:
    G = Multidigraph.load(a.graph)
    cycles = _read(a.cycles)
    rep = verify_cycles(G, cycles)
    for p in rep.problems:
        print(p)
    print(f"{len(cycles)} cycles: {'ok' if rep.ok else 'FAILED'}")
    return OK if rep.ok else ERROR


def cmd_decompose(a: argparse.Namespace) -> int:
    G = Multidigraph.load(a.graph)
    P = ClusterPartition.load(a.partition) if a.partition else None
    cfg = PipelineConfig.load(a.config) if a.config else PipelineConfig()
    if a.seed is not None:
        cfg = PipelineConfig.from_json({**cfg.to_json(), "seed": a.seed})
    cycles, rep = approx_decompose(G, P, cfg, debug_dir=a.debug_dir)
    _write([list(c) for c in cycles], a.out)
    if a.report:
        _write(rep.to_json(), a.report)
    print(f"{rep.count} verified Hamilton cycles (semidegree {rep.r}, target {rep.target:.1f}, mode {rep.mode})")
    if not rep.verified:
        return ERROR
    return PARTIAL if rep.partial else OK


def cmd_gen(a: argparse.Namespace) -> int:
    reduced = Multidigraph.load(a.reduced) if a.reduced else None
    inst = generate_instance(
        a.kind, a.seed, L=a.L, m=a.m, d=Fraction(a.d), degree=a.degree, reduced=reduced, n=a.n,
        alpha=Fraction(a.alpha), gamma=Fraction(a.gamma) if a.gamma is not None else None,
    )
    inst.graph.save(a.out)
    if a.partition_out:
        inst.partition.save(a.partition_out)
    print(f"{inst.kind}: {inst.graph!r}, semidegree {inst.graph.min_semidegree()}")
    return OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hamdec", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check-expander", help="robust outexpansion check")
    p.add_argument("--graph", required=True)
    p.add_argument("--nu", required=True)
    p.add_argument("--tau", required=True)
    p.add_argument("--exhaustive", action="store_true")
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_check_expander)

    p = sub.add_parser("check-regular", help="epsilon-regularity of a bipartite pair")
    p.add_argument("--pair", required=True)
    p.add_argument("--eps", required=True)
    p.add_argument("--d")
    p.add_argument("--super", action="store_true")
    p.set_defaults(func=cmd_check_regular)

    p = sub.add_parser("factorize", help="1-factorize an r-regular multidigraph")
    p.add_argument("--graph", required=True)
    p.add_argument("--r", type=int, required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_factorize)

    p = sub.add_parser("unwind", help="Hamilton cycles of a blown-up cycle")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_unwind)

    p = sub.add_parser("merge", help="merge a 1-factor into a Hamilton cycle")
    p.add_argument("--context", required=True)
    p.add_argument("--out")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_merge)

    p = sub.add_parser("verify", help="check cycles are Hamilton and edge-disjoint")
    p.add_argument("--graph", required=True)
    p.add_argument("--cycles", required=True)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("decompose", help="run the full pipeline")
    p.add_argument("--graph", required=True)
    p.add_argument("--partition")
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--report")
    p.add_argument("--debug-dir", help="write per-slice red and balancing edges here")
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("gen", help="generate a test instance")
    p.add_argument("--kind", choices=("blowup", "tournament", "quasirandom"), required=True)
    p.add_argument("--reduced")
    p.add_argument("--L", type=int, default=6)
    p.add_argument("--m", type=int, default=40)
    p.add_argument("--d", default="1/2")
    p.add_argument("--degree", type=int, default=3)
    p.add_argument("--n", type=int, default=25)
    p.add_argument("--alpha", default="1/2")
    p.add_argument("--gamma")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--partition-out")
    p.set_defaults(func=cmd_gen)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ValueError, AssertionError, RuntimeError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return ERROR


if __name__ == "__main__":
    sys.exit(main())
