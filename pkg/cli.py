"""Command line for running scenarios.

Subcommands:
    run                 any scenario kind, as written in the file
    build-kernel-modes  the file's grid and kernel as a kernel-mode-build
    convergence         the file's [convergence] study
    ap-sweep            the file's [ap] sweep

Exit codes: 0 success, 1 invalid configuration, 2 runtime failure,
3 acceptance check failed.
"""

import argparse
import sys
from typing import Optional, Sequence

from errors import AcceptanceCheckError, ConfigValidationError, SolverError
from logger import get_logger
from schemas.report import RunReport
from schemas.scenario import ScenarioKind
from utils.scenarios import apply_overrides, load_scenario, run_scenario

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2
EXIT_ACCEPTANCE = 3

SUBCOMMAND_KINDS = {
    "run": None,
    "build-kernel-modes": ScenarioKind.KERNEL_MODE_BUILD,
    "convergence": ScenarioKind.CONVERGENCE_STUDY,
    "ap-sweep": ScenarioKind.AP_SWEEP,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="boltzmann",
        description="Deterministic Boltzmann solver scenarios",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMAND_KINDS:
        sub = subparsers.add_parser(name, help=f"{name} from a TOML scenario file")
        sub.add_argument("--config", required=True, help="scenario TOML file")
        sub.add_argument("--out-dir", default=None, help="output directory (default: <output_dir>/<name>)")
        sub.add_argument("--threads", type=int, default=None, help="worker threads")
        sub.add_argument("--seed", type=int, default=None, help="random seed")
        sub.add_argument("--force", action="store_true", help="lift resource guards")
    return parser


def _summary(report: RunReport) -> str:
    lines = [f"{report.scenario} ({report.kind}): {'PASSED' if report.passed else 'FAILED'} in {report.elapsed_seconds:.2f}s"]
    for check in report.checks:
        mark = "ok  " if check.passed else "FAIL"
        value = "" if check.value is None else f" value={check.value:.6g}"
        threshold = "" if check.threshold is None else f" threshold={check.threshold:.6g}"
        lines.append(f"  [{mark}] {check.name}{value}{threshold}")
    if report.outputs:
        lines.append(f"  report: {report.outputs[-1]}")
    return "\n".join(lines)


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = apply_overrides(load_scenario(args.config), threads=args.threads, seed=args.seed)
        kind = SUBCOMMAND_KINDS[args.command]
        if kind is not None and cfg.kind != kind:
            cfg = cfg.model_copy(update={"kind": kind})
        report = run_scenario(cfg, out_dir=args.out_dir, force=args.force)
    except ConfigValidationError as exc:
        for field, message in exc.errors:
            print(f"invalid config: {field}: {message}", file=sys.stderr)
        return EXIT_VALIDATION
    except AcceptanceCheckError as exc:
        if exc.report is not None:
            print(_summary(exc.report))
        print(str(exc), file=sys.stderr)
        return EXIT_ACCEPTANCE
    except SolverError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (ArithmeticError, MemoryError, OSError) as exc:
        logger.exception(f"Scenario from {args.config} crashed")
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME

    print(_summary(report))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
