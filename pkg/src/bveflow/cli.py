"""Command-line entry point.

Subcommands: run | sweep | compare | verify-galerkin | check-invariants.
Exit codes: 0 success, 1 verdict failure, 2 configuration error,
3 runtime/solver failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .experiments import (
    ConfigError,
    InitialCondition,
    parse_config,
    run_compare,
    run_single,
    run_sweep,
)
from .solver import SimConfig, StepFailure


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bveflow",
        description=(
            "Simulate the nonlocal vertical-equilibrium two-phase flow "
            "models and verify their structural estimates."
        ),
    )
    sub = parser.add_subparsers(dest="command")

    def add_io(p, needs_out=True):
        p.add_argument("--config", type=Path, help="configuration file")
        p.add_argument(
            "--out", type=Path, default=Path("out"), help="output directory"
        )
        p.add_argument(
            "--no-figures", action="store_true", help="skip figure rendering"
        )

    add_io(sub.add_parser("run", help="single simulation with snapshots"))
    sweep = sub.add_parser("sweep", help="front-width sweep over beta^2 values")
    add_io(sweep)
    sweep.add_argument(
        "--beta2",
        type=str,
        default="1e-2,1e-3,1e-4,1e-5",
        help="comma-separated beta^2 list",
    )
    add_io(sub.add_parser("compare", help="pseudo-parabolic vs transport-only run"))
    verify = sub.add_parser(
        "verify-galerkin", help="spectral existence-machinery verification"
    )
    verify.add_argument("--out", type=Path, default=None)
    verify.add_argument("--seed", type=int, default=0)
    check = sub.add_parser(
        "check-invariants", help="randomized structural property suite"
    )
    check.add_argument("--seed", type=int, default=0)
    return parser


def _load_config(path) -> tuple[SimConfig, InitialCondition]:
    if path is None:
        return SimConfig(), InitialCondition()
    try:
        text = Path(path).read_text()
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from err
    return parse_config(text)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2

    try:
        if args.command == "run":
            cfg, ic = _load_config(args.config)
            result = run_single(cfg, ic, args.out, render=not args.no_figures)
            print(
                f"run complete: t = {result.final.t:.6g}, "
                f"{result.report.n_steps} steps, "
                f"{len(result.snapshots)} snapshots -> {args.out}"
            )
            return 0

        if args.command == "sweep":
            cfg, _ = _load_config(args.config)
            try:
                beta2_list = [float(v) for v in args.beta2.split(",") if v.strip()]
            except ValueError as err:
                raise ConfigError(f"bad --beta2 list: {err}") from None
            if not beta2_list:
                raise ConfigError("--beta2 list is empty")
            report = run_sweep(
                cfg, beta2_list, args.out, render=not args.no_figures
            )
            for e in report.entries:
                status = "failed" if e.failed else f"width {e.width:.6g}"
                print(f"beta2 {e.beta2:g}: {status}")
            verdict = "strictly decreasing" if report.monotone else "NOT monotone"
            print(f"front widths {verdict}")
            return 0 if report.monotone else 1

        if args.command == "compare":
            cfg, ic = _load_config(args.config)
            report = run_compare(cfg, args.out, ic=ic, render=not args.no_figures)
            print(
                f"overshoot: pseudo-parabolic {report.bve_overshoot:.6g}, "
                f"transport-only {report.dve_overshoot:.3e}"
            )
            print(
                f"front position: pseudo-parabolic {report.bve_front:.6g}, "
                f"transport-only {report.dve_front:.6g}"
            )
            if report.degenerate:
                print("comparison degenerate: zero trajectories, verdicts vacuous")
            for name, passed in report.verdicts.items():
                print(f"{'PASS' if passed else 'FAIL'} {name}")
            return 0 if report.passed else 1

        if args.command == "verify-galerkin":
            from .galerkin import verification_report

            lines, ok = verification_report(seed=args.seed)
            for line in lines:
                print(line)
            if args.out is not None:
                args.out.mkdir(parents=True, exist_ok=True)
                (args.out / "galerkin_verification.txt").write_text(
                    "\n".join(lines) + "\n"
                )
            return 0 if ok else 1

        if args.command == "check-invariants":
            from .checks import run_invariant_suite

            results = run_invariant_suite(seed=args.seed)
            for res in results:
                print(res.line())
            return 0 if all(r.passed for r in results) else 1

    except ConfigError as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return 2
    except StepFailure as err:
        print(f"solver failure: {err}", file=sys.stderr)
        return 3
    return 2


def app() -> None:
    raise SystemExit(main())
