"""
CLI entry point for socheck.

Usage:
    python -m socheck <command> [options]
    socheck <command> [options]

Commands:
    check <problem.json>        Verify first- and second-order conditions at a point
    subdiff <problem.json>      Support interval of a second-order subdifferential
    probe <problem.json>        Ray-calculus probes (--what wdd2|meanvalue|descent|tangent|witness|continuity)
    corpus                      Run the ground-truth corpus
    oracle <problem.json>       Grid search for a dominating feasible point

Exit codes:
    0   CONSISTENT / DEGENERATE / success
    2   REJECTED, or a corpus mismatch
    1   error
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional

import numpy as np

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_REJECTED = 2

DEFAULT_CONFIG = Path(__file__).resolve().parent.parent / "config" / "check_defaults.json"

log = logging.getLogger("socheck.__main__")


def _add_check_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("verifier settings")
    group.add_argument("--mode", choices=["theorem", "corollary"], help="Second-order row construction")
    group.add_argument("--samples", type=int, help="Ball samples per radius")
    group.add_argument("--radii", type=float, nargs="+", help="Decreasing sampling radii")
    group.add_argument("--seed", type=int, help="PRNG seed")
    group.add_argument("--eta", type=float, help="LP slack for the second-order rows")
    group.add_argument(
        "--rays", action=argparse.BooleanOptionalAction, default=None,
        help="Enumerate extreme rays of the critical cone"
    )
    group.add_argument("--random-dirs", type=int, help="Number of random unit directions")
    group.add_argument("--oracle", choices=["auto", "separable", "sampling"], help="Support interval source")
    group.add_argument("--workers", type=int, help="Threads for per-direction LPs")


def parse_args(argv: Optional[list[str]] = None) -> argparse.Namespace:
    """Parse command line arguments."""
    parser = argparse.ArgumentParser(
        prog="socheck",
        description="Second-order optimality verifier for multiobjective C^{1,1} programs"
    )
    parser.add_argument("--debug", action="store_true", help="Enable debug logging")
    parser.add_argument("--quiet", action="store_true", help="Only log warnings and errors")
    parser.add_argument("--log-file", type=Path, help="Path to log file")
    parser.add_argument("--config", type=Path, help="Check configuration JSON")

    sub = parser.add_subparsers(dest="command", required=True)

    check = sub.add_parser("check", help="Verify optimality conditions at a point")
    check.add_argument("problem", type=Path)
    check.add_argument("--point", type=float, nargs="+", help="Candidate point (default: from file)")
    check.add_argument("--dir", type=float, nargs="+", action="append", dest="dirs", help="Extra direction (repeatable)")
    check.add_argument("--out", type=Path, help="Write the report here instead of stdout")
    _add_check_flags(check)

    subdiff = sub.add_parser("subdiff", help="Second-order subdifferential support interval")
    subdiff.add_argument("problem", type=Path)
    subdiff.add_argument("--map", choices=["objectives", "equalities", "qmap"], default="objectives")
    subdiff.add_argument("--fn", type=int, default=0, help="Component index")
    subdiff.add_argument("--at", type=float, nargs="+", required=True)
    subdiff.add_argument("--dir", type=float, nargs="+", required=True)
    subdiff.add_argument("--h", type=float, nargs="+", help="Support direction (default: --dir)")
    _add_check_flags(subdiff)

    probe = sub.add_parser("probe", help="Weak directional derivative and variation probes")
    probe.add_argument("problem", type=Path)
    probe.add_argument(
        "--what",
        choices=["wdd2", "meanvalue", "descent", "tangent", "witness", "continuity"],
        required=True,
    )
    probe.add_argument("--map", choices=["equalities", "qmap"], default="equalities", help="Map for wdd2")
    probe.add_argument("--fn", type=int, default=0, help="Objective index")
    probe.add_argument("--at", type=float, nargs="+", required=True)
    probe.add_argument("--dir", type=float, nargs="+", help="Direction d")
    probe.add_argument("--w", type=float, nargs="+", help="Second-order variation w")
    probe.add_argument("--to", type=float, nargs="+", help="Segment end for meanvalue")
    _add_check_flags(probe)

    corpus = sub.add_parser("corpus", help="Run the ground-truth corpus")
    corpus.add_argument("--all", action="store_true", help="Run every entry (default)")
    corpus.add_argument("--only", nargs="+", help="Entry names, e.g. P2 P5")
    corpus.add_argument("--no-oracle", action="store_true", help="Skip the grid oracle")
    corpus.add_argument("--out", type=Path, help="Write outcomes as JSON")
    _add_check_flags(corpus)

    oracle = sub.add_parser("oracle", help="Grid weak Pareto oracle")
    oracle.add_argument("problem", type=Path)
    oracle.add_argument("--point", type=float, nargs="+")
    oracle.add_argument("--box", type=float, default=1.0, help="Half-width of the search box")
    oracle.add_argument("--resolution", type=int, help="Grid points per axis")

    return parser.parse_args(argv)


def load_config(args: argparse.Namespace):
    """Defaults < config file < CLI flags."""
    from .core.settings import CheckConfig, ConfigManager

    path = args.config or DEFAULT_CONFIG
    if args.config is not None and not path.exists():
        raise FileNotFoundError(f"Config file not found: {path}")
    base = ConfigManager(path).config if path.exists() else CheckConfig()
    return base.with_overrides(
        mode=getattr(args, "mode", None),
        samples=getattr(args, "samples", None),
        radii=tuple(args.radii) if getattr(args, "radii", None) else None,
        seed=getattr(args, "seed", None),
        eta=getattr(args, "eta", None),
        rays=getattr(args, "rays", None),
        random_dirs=getattr(args, "random_dirs", None),
        oracle=getattr(args, "oracle", None),
        workers=getattr(args, "workers", None),
    )


def _point(args: argparse.Namespace, problem) -> np.ndarray:
    if getattr(args, "point", None):
        return np.asarray(args.point, dtype=float)
    if problem.point is None:
        raise ValueError("No candidate point: pass --point or add 'point' to the problem file")
    return problem.point


def _emit(data: dict, out: Optional[Path] = None) -> None:
    text = json.dumps(data, indent=2, allow_nan=False)
    if out is None:
        print(text)
    else:
        from .harness.report import atomic_write
        atomic_write(out, text + "\n")


def cmd_check(args: argparse.Namespace) -> int:
    from .certify.verdict import Overall, verdict
    from .harness.report import load_problem, report_to_json, write_report

    cfg = load_config(args)
    problem = load_problem(args.problem)
    report = verdict(problem, _point(args, problem), cfg, args.dirs)
    if args.out:
        write_report(report, args.out)
    else:
        sys.stdout.write(report_to_json(report))
    for v in report.refuting:
        log.info(f"refuting direction {v.d.tolist()} with margin {v.margin:.6g}")
    return EXIT_REJECTED if report.overall is Overall.REJECTED else EXIT_OK


def cmd_subdiff(args: argparse.Namespace) -> int:
    from .analysis.subgrad2 import estimate_subdiff2, support_along
    from .core.settings import OracleChoice
    from .harness.report import load_problem

    cfg = load_config(args)
    problem = load_problem(args.problem)
    f = getattr(problem, args.map)[args.fn]
    h = args.h or args.dir
    result = support_along(f, args.at, args.dir, h, cfg)
    data = {
        "fn": f.name,
        "at": list(args.at),
        "dir": list(args.dir),
        "h": list(h),
        "support": result.interval.to_list(),
        "exact": result.exact,
    }
    if not result.exact and cfg.oracle is not OracleChoice.SEPARABLE:
        data["estimate"] = estimate_subdiff2(f, args.at, args.dir, cfg).to_dict()
    _emit(data)
    return EXIT_OK


def _require(args: argparse.Namespace, *names: str) -> None:
    missing = [f"--{n}" for n in names if getattr(args, n) is None]
    if missing:
        raise ValueError(f"--what {args.what} needs {', '.join(missing)}")


def cmd_probe(args: argparse.Namespace) -> int:
    from .analysis import raycalc
    from .analysis.subgrad2 import support_along
    from .harness.report import load_problem

    cfg = load_config(args)
    problem = load_problem(args.problem)
    grid = raycalc.ProbeGrid(seed=cfg.seed)

    if args.what == "wdd2":
        _require(args, "dir")
        maps = problem.equalities if args.map == "equalities" else problem.qmap
        data = raycalc.weak_dir2(maps, args.at, args.dir, cfg.eps_sequence, cfg).to_dict()
    elif args.what == "meanvalue":
        _require(args, "to")
        data = raycalc.mean_value_check(problem.objectives[args.fn], args.at, args.to, cfg=cfg).to_dict()
    elif args.what == "descent":
        _require(args, "dir", "w")
        f = problem.objectives[args.fn]
        s_hi = support_along(f, args.at, args.dir, args.dir, cfg).interval.hi
        data = raycalc.descent_variation_probe(f, args.at, args.dir, args.w, grid, s_hi, cfg).to_dict()
        data["wf_membership"] = raycalc.wf_membership(f, args.at, args.dir, args.w, s_hi)
    elif args.what == "tangent":
        _require(args, "dir", "w")
        data = raycalc.tangent_variation_check(problem.equalities, args.at, args.dir, args.w, cfg).to_dict()
    elif args.what == "continuity":
        from .certify.verdict import check_continuity

        checks = check_continuity(problem, args.at, cfg)
        data = {
            "checks": [c.to_dict() for c in checks],
            "suspicious": [c.function for c in checks if c.suspicious],
        }
    else:
        _require(args, "dir", "w")
        data = raycalc.intersection_witness(problem, args.at, args.dir, args.w, grid, cfg).to_dict()
    _emit(data)
    return EXIT_OK


def cmd_corpus(args: argparse.Namespace) -> int:
    from .harness.corpus import default_corpus, run_corpus

    cfg = load_config(args)
    entries = default_corpus(args.only)
    outcomes = run_corpus(entries, cfg, with_oracle=not args.no_oracle)
    for outcome in outcomes:
        row = outcome.to_dict()
        status = "ok" if outcome.passed else "FAIL"
        print(f"{row['name']:<4} expected={row['expected']:<11} got={str(row['overall']):<11} "
              f"oracle={str(row['oracle']):<16} {status}")
        for message in outcome.messages:
            print(f"     {message}")
    if args.out:
        _emit({"outcomes": [o.to_dict() for o in outcomes]}, args.out)
    failed = [o.entry.name for o in outcomes if not o.passed]
    if failed:
        log.error(f"Corpus mismatch: {', '.join(failed)}")
        return EXIT_REJECTED
    return EXIT_OK


def cmd_oracle(args: argparse.Namespace) -> int:
    from .harness.oracle import grid_pareto_oracle
    from .harness.report import load_problem

    problem = load_problem(args.problem)
    result = grid_pareto_oracle(problem, _point(args, problem), args.box, args.resolution)
    _emit(result.to_dict())
    return EXIT_OK


COMMANDS = {
    "check": cmd_check,
    "subdiff": cmd_subdiff,
    "probe": cmd_probe,
    "corpus": cmd_corpus,
    "oracle": cmd_oracle,
}


def main(argv: Optional[list[str]] = None) -> int:
    """Main entry point."""
    args = parse_args(argv)

    from .logging_config import setup_logging
    setup_logging(debug=args.debug, log_file=args.log_file, quiet=args.quiet)
    log.debug(f"CLI args: {args}")

    from .errors import ProblemSchemaError, SocheckError
    try:
        return COMMANDS[args.command](args)
    except ProblemSchemaError as e:
        for issue in e.issues:
            print(f"error: {issue}", file=sys.stderr)
        return EXIT_ERROR
    except (SocheckError, ValueError, KeyError, OSError) as e:
        log.error(f"{args.command} failed: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
