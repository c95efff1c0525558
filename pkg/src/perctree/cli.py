"""Command-line front end.

Exit codes: 0 success, 2 usage or invalid input, 3 size guard, 4 fixed point
did not converge.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from typing import Optional, Sequence


from . import builders, closedform, montecarlo, solver
from .structure import InvalidStructureError, StructureFormatError, load, serialize, validate

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_GUARD = 3
EXIT_CONVERGENCE = 4


class UsageError(Exception):
    pass


def _fmt(x: float) -> str:
    return "%.17g" % x


def _emit(text: str, out: Optional[str] = None) -> None:
    if out:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _json(doc) -> str:
    return json.dumps(doc, indent=2) + "\n"


def _cosets(text: str) -> list[list[int]]:
    """``"0,2;1,3"`` -> ``[[0, 2], [1, 3]]``."""
    try:
        return [[int(v) for v in part.split(",")] for part in text.split(";") if part.strip()]
    except ValueError:
        raise UsageError(f"cannot read coset list {text!r}; expected e.g. '0,2;1,3'") from None


def _graph(text: str) -> builders.FiniteGraph:
    try:
        return builders.FiniteGraph.from_spec(text)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _threads(args) -> int:
    return args.threads if args.threads else solver.default_threads()


def _load(path: str):
    structure = load(path)
    report = validate(structure)
    if not report.ok:
        raise InvalidStructureError(report)
    return structure


# ---------------------------------------------------------------------------
# subcommands


def cmd_build(args) -> int:
    family = args.family
    if family == "sl2z":
        s = builders.sl2z()
    elif family == "grandparent":
        s = builders.grandparent()
    elif family == "fball":
        try:
            s = builders.free_group_ball(args.rank, args.k)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    elif family == "free-product":
        if not args.factor or len(args.factor) < 2:
            raise UsageError("free-product needs at least two --factor options")
        s = builders.free_product([_graph(f) for f in args.factor])
    elif family == "amalgam":
        if not (args.g1 and args.g2 and args.cosets1 and args.cosets2):
            raise UsageError("amalgam needs --g1, --cosets1, --g2 and --cosets2")
        try:
            s = builders.amalgam(
                _graph(args.g1), _cosets(args.cosets1), _graph(args.g2), _cosets(args.cosets2)
            )
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    elif family == "hnn":
        if not (args.base and args.h_cosets and args.k_cosets):
            raise UsageError("hnn needs --base, --h-cosets and --k-cosets")
        alpha = [int(v) for v in args.alpha.split(",")] if args.alpha else None
        try:
            s = builders.hnn(_graph(args.base), _cosets(args.h_cosets), _cosets(args.k_cosets), alpha)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    else:  # pragma: no cover - argparse restricts choices
        raise UsageError(f"unknown family {family!r}")
    _emit(serialize(s).decode("utf-8"), args.out)
    return EXIT_OK


def cmd_pc(args) -> int:
    structure = _load(args.structure)
    started = time.perf_counter()
    engine = solver.Engine(structure)
    res = solver.critical_probability(
        structure, grid=args.grid, tol=args.tol, fp_tol=args.fp_tol, threads=_threads(args), engine=engine
    )
    report = {
        "structure": structure.name,
        "p_c": res.p_c,
        "bracket": list(res.bracket),
        "flags": res.flags,
        "tolerance": res.tolerance,
        "fixed_point_tolerance": args.fp_tol,
        "grid": res.grid,
        "color_space_size": res.color_space_size,
        "color_space": engine.colors.to_json(),
        "partition_support_sizes": res.support_sizes,
        "det_residual": res.det_residual,
    }
    if args.timing:
        report["wall_time_s"] = time.perf_counter() - started
    _emit(_json(report))
    return EXIT_OK


def cmd_scan(args) -> int:
    structure = _load(args.structure)
    if args.steps < 1 or not 0.0 <= args.pmin <= args.pmax <= 1.0:
        raise UsageError("need 0 <= pmin <= pmax <= 1 and steps >= 1")
    engine = solver.Engine(structure)
    if args.steps == 1:
        points = [args.pmin]
    else:
        points = [args.pmin + (args.pmax - args.pmin) * i / (args.steps - 1) for i in range(args.steps)]

    def at(p):
        return solver.evaluate(engine, p, args.fp_tol)

    threads = _threads(args)
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(threads) as pool:
            values = list(pool.map(at, points))
    else:
        values = [at(p) for p in points]
    lines = ["p,rho,det_residual"]
    lines += [f"{_fmt(p)},{_fmt(rho)},{_fmt(det)}" for p, (rho, det) in zip(points, values)]
    _emit("\n".join(lines) + "\n")
    return EXIT_OK


def cmd_mc(args) -> int:
    structure = _load(args.structure)
    if args.trials < 1 or args.depth < 0:
        raise UsageError("trials must be >= 1 and depth >= 0")
    threads = _threads(args)
    if args.bracket:
        b = montecarlo.bracket_pc(structure, args.depth, args.trials, args.seed, grid=args.grid, threads=threads)
        doc = {
            "structure": structure.name,
            "p_lo": b.p_lo,
            "p_hi": b.p_hi,
            "depth": b.depth,
            "trials": b.trials,
            "seed": b.seed,
            "generations": list(b.generations),
            "warning": b.warning,
        }
        _emit(_json(doc))
        return EXIT_OK
    if not args.p:
        raise UsageError("mc needs --p or --bracket")
    if any(not 0.0 <= p <= 1.0 for p in args.p):
        raise UsageError("p must lie in [0, 1]")
    graph = montecarlo.unfold(structure, args.depth)
    estimates = montecarlo.estimate_reach(graph, list(args.p), args.trials, args.seed, threads)
    lines = ["p,reach_estimate,ci_lo,ci_hi,trials,depth,seed"]
    for e in estimates:
        lines.append(
            f"{_fmt(e.p)},{_fmt(e.estimate)},{_fmt(e.ci_lo)},{_fmt(e.ci_hi)},{e.trials},{args.depth},{args.seed}"
        )
    _emit("\n".join(lines) + "\n")
    return EXIT_OK


def cmd_chi(args) -> int:
    graphs = [_graph(g) for g in args.graph]
    try:
        chis = [closedform.chi_polynomial(g) for g in graphs]
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    doc = {
        "factors": [
            {"graph": text, "coefficients": list(c.coefficients), "polynomial": str(c)}
            for text, c in zip(args.graph, chis)
        ]
    }
    if len(chis) >= 2:
        doc["free_product_p_c"] = closedform.free_product_pc(chis)
    _emit(_json(doc))
    return EXIT_OK


def cmd_z2z(args) -> int:
    _emit(_json(closedform.z2z_amalgam_pc(tol=args.tol).to_json()))
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="perctree",
        description="Exact bond-percolation thresholds for graphs with a tree-like structure.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def threads_opt(p):
        p.add_argument(
            "--threads",
            type=int,
            default=None,
            help="worker threads (default: $PERCTREE_THREADS or 1); output does not depend on it",
        )

    b = sub.add_parser("build", help="write a structure file for a known family")
    b.add_argument("family", choices=builders.FAMILIES)
    b.add_argument("--out", help="output path (default: stdout)")
    b.add_argument("--factor", action="append", help="free-product factor: k<n> or c<n> (repeat)")
    b.add_argument("--g1", help="amalgam: first factor graph")
    b.add_argument("--cosets1", help="amalgam: cosets of the first factor, e.g. '0,2;1,3'")
    b.add_argument("--g2", help="amalgam: second factor graph")
    b.add_argument("--cosets2", help="amalgam: cosets of the second factor")
    b.add_argument("--base", help="hnn: base graph")
    b.add_argument("--h-cosets", help="hnn: cosets of H")
    b.add_argument("--k-cosets", help="hnn: cosets of K")
    b.add_argument("--alpha", help="hnn: alpha as positions, e.g. '1,0'")
    b.add_argument("--rank", type=int, default=2, help="fball: rank of the free group (2)")
    b.add_argument("--k", type=int, default=2, help="fball: radius of the generating ball (1-3)")
    b.set_defaults(func=cmd_build)

    p = sub.add_parser("pc", help="critical probability as a JSON report")
    p.add_argument("structure")
    p.add_argument("--grid", type=int, default=256, help="scan grid size (default 256)")
    p.add_argument("--tol", type=float, default=1e-10, help="bisection tolerance on p_c (default 1e-10)")
    p.add_argument("--fp-tol", type=float, default=1e-12, help="fixed-point tolerance (default 1e-12)")
    p.add_argument("--timing", action="store_true", help="include wall time (makes output run-dependent)")
    threads_opt(p)
    p.set_defaults(func=cmd_pc)

    s = sub.add_parser("scan", help="CSV table of p, rho(M(p)), det(M(p) - I)")
    s.add_argument("structure")
    s.add_argument("--pmin", type=float, default=0.001)
    s.add_argument("--pmax", type=float, default=0.999)
    s.add_argument("--steps", type=int, default=100)
    s.add_argument("--fp-tol", type=float, default=1e-12, help="fixed-point tolerance (default 1e-12)")
    threads_opt(s)
    s.set_defaults(func=cmd_scan)

    m = sub.add_parser("mc", help="Monte Carlo reach estimates or a bracket for p_c")
    m.add_argument("structure")
    mode = m.add_mutually_exclusive_group(required=True)
    mode.add_argument("--p", type=float, action="append", help="edge probability (repeat for several)")
    mode.add_argument("--bracket", action="store_true", help="bracket p_c")
    m.add_argument("--depth", type=int, default=8)
    m.add_argument("--trials", type=int, default=10_000)
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--grid", type=int, default=200, help="bracket: p grid size (default 200)")
    threads_opt(m)
    m.set_defaults(func=cmd_mc)

    c = sub.add_parser("chi", help="expected cluster-size polynomial of finite graphs")
    c.add_argument("graph", nargs="+", help="k<n> or c<n>; two or more also give the free-product p_c")
    c.set_defaults(func=cmd_chi)

    z = sub.add_parser("z2z", help="closed-form threshold of (Z2 x Z) *_Z2 Z4")
    z.add_argument("--tol", type=float, default=1e-12)
    z.set_defaults(func=cmd_z2z)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "threads", None) is not None and args.threads < 1:
        parser.error("--threads must be >= 1")
    try:
        return args.func(args)
    except (UsageError, StructureFormatError, InvalidStructureError, OSError, ValueError) as exc:
        print(f"perctree: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (solver.GuardError, montecarlo.UnfoldGuardError) as exc:
        print(f"perctree: guard: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except solver.ConvergenceError as exc:
        print(f"perctree: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
