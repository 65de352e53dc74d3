"""Command-line harness: single runs, parameter sweeps, trajectory clouds,
and margin reports.

Exit codes: 0 on success, 2 when the configured horizon is infeasible,
1 on solver failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from .experiments import (
    ExperimentConfig,
    build_plant_pair,
    emit_trajectory_cloud,
    run_experiment,
    sweep,
    write_results_csv,
    _train_seed,
)
from .margins import ChainViolationError, margin_chain_report
from .svm import ConvergenceError, InseparableDataError
from .sysmodel import InfeasiblePairError
from .trajectories import random_dataset


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="JSON experiment config")
    parser.add_argument("--seed", type=int, help="override the config seed")
    parser.add_argument(
        "--out", type=Path, default=Path("."), help="output directory"
    )
    parser.add_argument(
        "--classifier",
        choices=["model-based", "svm-hard", "svm-soft"],
        help="override the configured classifier",
    )
    parser.add_argument(
        "--no-normalize",
        action="store_true",
        help="train and classify on raw (unnormalized) trajectories",
    )
    parser.add_argument(
        "--soft-C", type=float, help="slack penalty for the soft-margin SVM"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trajclass",
        description=(
            "Classify linear-system output trajectories with a model-based "
            "projection classifier or a max-margin SVM, and quantify margins."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="single experiment -> report.json")
    _add_common(run)

    sw = sub.add_parser("sweep", help="sweep one parameter -> results.csv")
    _add_common(sw)
    sw.add_argument("--axis", choices=["N", "L", "Ts"], required=True)
    sw.add_argument(
        "--values", required=True, help="comma-separated parameter values"
    )
    sw.add_argument(
        "--seeds", type=int, default=5, help="number of seeds per cell"
    )

    cloud = sub.add_parser(
        "cloud", help="normalized trajectory clouds -> cloud_class{1,2}.csv"
    )
    _add_common(cloud)
    cloud.add_argument(
        "--count", type=int, default=1000, help="trajectories per class"
    )

    mr = sub.add_parser(
        "margin-report", help="margins, separation measure, bound -> report.json"
    )
    _add_common(mr)

    return parser


def _load_config(args: argparse.Namespace) -> ExperimentConfig:
    if args.config is not None:
        cfg = ExperimentConfig.from_json(Path(args.config).read_text())
    else:
        cfg = ExperimentConfig()
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.classifier is not None:
        overrides["classifier"] = args.classifier
    if args.no_normalize:
        overrides["normalize"] = False
    if args.soft_C is not None:
        overrides["softC"] = args.soft_C
    return dataclasses.replace(cfg, **overrides) if overrides else cfg


def _cmd_run(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    report = run_experiment(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(report.to_json())
    print(
        f"R_test={report.R_test:.4f} "
        f"(errors {report.errors_class1}+{report.errors_class2}, "
        f"abstentions {report.abstentions}) -> {out / 'report.json'}"
    )
    return 0


def _cmd_sweep(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    values = [v for v in args.values.split(",") if v != ""]
    parsed = [float(v) if args.axis == "Ts" else int(v) for v in values]
    cells = sweep(cfg, args.axis, parsed, n_seeds=args.seeds)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_results_csv(cells, out / "results.csv")
    for cell in cells:
        if cell.error:
            print(f"{args.axis}={cell.value}: error: {cell.error}")
        else:
            print(f"{args.axis}={cell.value}: R_test={cell.mean:.4f} +- {cell.std:.4f}")
    print(f"-> {out / 'results.csv'}")
    return 0


def _cmd_cloud(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    csv1, csv2 = emit_trajectory_cloud(cfg, args.count)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "cloud_class1.csv").write_text(csv1)
    (out / "cloud_class2.csv").write_text(csv2)
    print(f"-> {out / 'cloud_class1.csv'}, {out / 'cloud_class2.csv'}")
    return 0


def _cmd_margin_report(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    sys1, sys2 = build_plant_pair(cfg)
    data = random_dataset(
        sys1, sys2, per_class=cfg.L // 2, N=cfg.N, sigma2=cfg.sigma2,
        seed=_train_seed(cfg.seed),
    )
    report = margin_chain_report(sys1, sys2, cfg.N, data)
    doc = json.loads(report.to_json())
    doc["config"] = cfg.to_dict()
    doc["realization"] = "controllable-canonical"
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(json.dumps(doc))
    print(
        f"bound={report.bound:.6g} <= rho_M={report.rho_M:.6g} "
        f"<= rho_D={report.rho_D:.6g} -> {out / 'report.json'}"
    )
    return 0


_COMMANDS = {
    "run": _cmd_run,
    "sweep": _cmd_sweep,
    "cloud": _cmd_cloud,
    "margin-report": _cmd_margin_report,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except InfeasiblePairError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return 2
    except (InseparableDataError, ConvergenceError, ChainViolationError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
