"""Experiment harness: build the plant pair, run trials, sweep, export CSV.

The default configuration is the loss-of-control-effectiveness scenario: an
open-loop plant G(s) = (s+1)/(s^3 + 11 s^2 + 11 s + 10) against its closure
under proportional gain K = 30, both sampled at Ts.  Class +1 is the open
loop, class -1 the closed loop.
"""

from __future__ import annotations

import csv
import io
import json
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import modelbased, svm
from .margins import ChainViolationError, beta, margin_bound
from .svm import ConvergenceError, InseparableDataError
from .sysmodel import (
    ContinuousSiso,
    InfeasiblePairError,
    LinearSystem,
    close_loop,
    discretize,
    feasibility_check,
    tf_to_ss,
)
from .trajectories import Dataset, normalize, random_dataset

__all__ = [
    "DEFAULT_PLANT",
    "CLASSIFIERS",
    "REALIZATION",
    "InfeasibleConfigError",
    "ExperimentConfig",
    "ValidationReport",
    "SweepCell",
    "build_plant_pair",
    "min_feasible_horizon",
    "run_experiment",
    "sweep",
    "results_csv_text",
    "write_results_csv",
    "emit_trajectory_cloud",
]

DEFAULT_PLANT = ContinuousSiso(num=(1.0, 1.0), den=(10.0, 11.0, 11.0, 1.0))
CLASSIFIERS = ("model-based", "svm-hard", "svm-soft")
REALIZATION = "controllable-canonical"


class InfeasibleConfigError(InfeasiblePairError):
    """The configured horizon cannot support a correct classifier."""

    def __init__(self, message: str, min_feasible_N: int | None = None):
        super().__init__(message)
        self.min_feasible_N = min_feasible_N


@dataclass(frozen=True)
class ExperimentConfig:
    """One classification trial; every field is recorded in the report."""

    tf: ContinuousSiso = DEFAULT_PLANT
    K: float = 30.0  # proportional feedback gain defining the second class
    Ts: float = 0.1  # sampling time, seconds
    N: int = 10  # observation horizon (samples per trajectory)
    L: int = 50  # total training size, split evenly between the classes
    Qv: int = 1000  # validation trajectories per class
    sigma2: float = 100.0  # variance of each initial-state coordinate
    seed: int = 0
    normalize: bool = True  # normalize trajectories before train/classify
    classifier: str = "svm-hard"
    softC: float | None = None  # required when classifier == "svm-soft"

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be >= 1")
        if self.L < 2 or self.L % 2 != 0:
            raise ValueError("L must be an even integer >= 2")
        if self.Qv < 1:
            raise ValueError("Qv must be >= 1")
        if self.Ts <= 0:
            raise ValueError("Ts must be positive")
        if self.sigma2 <= 0:
            raise ValueError("sigma2 must be positive")
        if self.seed < 0:
            raise ValueError("seed must be nonnegative")
        if self.classifier not in CLASSIFIERS:
            raise ValueError(f"classifier must be one of {CLASSIFIERS}")
        if self.classifier == "svm-soft" and not (
            self.softC is not None and self.softC > 0
        ):
            raise ValueError("svm-soft needs a positive softC")

    def to_dict(self) -> dict:
        return {
            "tf": {"num": list(self.tf.num), "den": list(self.tf.den)},
            "K": self.K,
            "Ts": self.Ts,
            "N": self.N,
            "L": self.L,
            "Qv": self.Qv,
            "sigma2": self.sigma2,
            "seed": self.seed,
            "normalize": self.normalize,
            "classifier": self.classifier,
            "softC": self.softC,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        kwargs = dict(doc)
        if "tf" in kwargs and isinstance(kwargs["tf"], dict):
            kwargs["tf"] = ContinuousSiso(
                num=tuple(kwargs["tf"]["num"]), den=tuple(kwargs["tf"]["den"])
            )
        return cls(**kwargs)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        return cls.from_dict(json.loads(text))


def build_plant_pair(cfg: ExperimentConfig) -> tuple[LinearSystem, LinearSystem]:
    """Sampled open-loop and closed-loop systems for the configured plant."""
    A1c, C1c = tf_to_ss(cfg.tf)
    A2c, C2c = tf_to_ss(close_loop(cfg.tf, cfg.K))
    return discretize(A1c, C1c, cfg.Ts), discretize(A2c, C2c, cfg.Ts)


def min_feasible_horizon(
    sys1: LinearSystem, sys2: LinearSystem, cap: int | None = None
) -> int | None:
    """Smallest horizon passing the separation rank test, or None."""
    if cap is None:
        cap = 4 * (sys1.n + sys2.n) + 8
    for N in range(1, cap + 1):
        if feasibility_check(sys1, sys2, N).feasible:
            return N
    return None


# Distinct derived streams per purpose so training, validation and cloud
# data never share draws, while staying collision-free across seed+i sweeps.
def _train_seed(seed: int) -> int:
    return 3 * seed


def _val_seed(seed: int) -> int:
    return 3 * seed + 1


def _cloud_seed(seed: int) -> int:
    return 3 * seed + 2


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of one trial, with enough context to reproduce it."""

    R_test: float
    errors_class1: int
    errors_class2: int
    abstentions: int
    config: dict
    wall_clock_seconds: float
    feasible: bool
    min_feasible_N: int | None
    solver_converged: bool | None
    margin_chain: dict | None
    realization: str = REALIZATION

    def to_json(self) -> str:
        return json.dumps(
            {
                "R_test": self.R_test,
                "errors_class1": self.errors_class1,
                "errors_class2": self.errors_class2,
                "abstentions": self.abstentions,
                "config": self.config,
                "wall_clock_seconds": self.wall_clock_seconds,
                "feasible": self.feasible,
                "min_feasible_N": self.min_feasible_N,
                "solver_converged": self.solver_converged,
                "margin_chain": self.margin_chain,
                "realization": self.realization,
            }
        )


def _normalized_rows(data: Dataset) -> np.ndarray:
    return np.vstack([normalize(t).Y for t in data.items])


def run_experiment(
    cfg: ExperimentConfig, check_margin_chain: bool = True
) -> ValidationReport:
    """Train the configured classifier and score it on fresh validation data.

    Deterministic given the seed.  The model-based classifier requires a
    feasible horizon and raises otherwise; the SVM lanes run regardless and
    record feasibility in the report.  When the hard-margin problem is
    inseparable or does not converge, the solver's capped iterate is used
    for classification and ``solver_converged`` is False in the report.

    For feasible, normalized, converged hard-margin runs the margin chain
    ``bound <= rho_M <= rho_D`` is evaluated on the training set; a
    violation is a hard failure.
    """
    t0 = time.perf_counter()
    sys1, sys2 = build_plant_pair(cfg)
    rep = feasibility_check(sys1, sys2, cfg.N)
    min_N = None if rep.feasible else min_feasible_horizon(sys1, sys2)
    if cfg.classifier == "model-based" and not rep.feasible:
        raise InfeasibleConfigError(
            f"model-based classifier needs a feasible horizon; N={cfg.N} has "
            f"rank {rep.rank} < {rep.required_rank} (minimum feasible N is "
            f"{min_N})",
            min_feasible_N=min_N,
        )
    train = random_dataset(
        sys1, sys2, per_class=cfg.L // 2, N=cfg.N, sigma2=cfg.sigma2,
        seed=_train_seed(cfg.seed),
    )
    val = random_dataset(
        sys1, sys2, per_class=cfg.Qv, N=cfg.N, sigma2=cfg.sigma2,
        seed=_val_seed(cfg.seed),
    )
    val_Y = _normalized_rows(val) if cfg.normalize else val.stacked_Y()
    val_labels = val.labels()

    solver_converged = None
    chain = None
    if cfg.classifier == "model-based":
        clf = modelbased.build(sys1, sys2, cfg.N)
        dec = modelbased.decision_values(clf, val_Y)
        scale = np.einsum("ij,ij->i", val_Y, val_Y)
        pred = np.sign(dec)
        pred[np.abs(dec) <= modelbased.DEFAULT_ABSTAIN_TOL * scale] = 0.0
    else:
        if cfg.classifier == "svm-hard":
            try:
                model = svm.train_hard_margin(train, normalize_flag=cfg.normalize)
            except (InseparableDataError, ConvergenceError) as exc:
                # The trainer attaches its capped/stalled iterate: classify
                # with it anyway and record the non-convergence.
                model = exc.model
        else:
            model = svm.train_soft_margin(
                train, cfg.softC, normalize_flag=cfg.normalize
            )
        solver_converged = model.converged
        dec = svm.predict_batch(model, val_Y)
        pred = np.sign(dec)  # an exact 0 abstains and is counted as an error

    abstentions = int(np.count_nonzero(pred == 0))
    mask1 = val_labels > 0
    errors_class1 = int(np.count_nonzero(pred[mask1] != 1))
    errors_class2 = int(np.count_nonzero(pred[~mask1] != -1))
    R_test = (errors_class1 + errors_class2) / val_labels.size

    if (
        check_margin_chain
        and cfg.classifier == "svm-hard"
        and cfg.normalize
        and rep.feasible
        and solver_converged
    ):
        b = beta(sys1, sys2, cfg.N)
        bound = margin_bound(b, sys1.n, sys2.n)
        clf_mb = modelbased.build(sys1, sys2, cfg.N)
        rho_M = svm.margin(clf_mb.wM, train)
        rho_D = float(model.margin)
        tol = 1e-8
        if bound > rho_M + tol or rho_M > rho_D + tol:
            raise ChainViolationError(
                f"margin chain violated at N={cfg.N}: bound={bound:.6g}, "
                f"rho_M={rho_M:.6g}, rho_D={rho_D:.6g}"
            )
        chain = {
            "beta": b,
            "bound": bound,
            "rho_M": rho_M,
            "rho_D": rho_D,
            "chain_tol": tol,
            "holds": True,
        }

    return ValidationReport(
        R_test=R_test,
        errors_class1=errors_class1,
        errors_class2=errors_class2,
        abstentions=abstentions,
        config=cfg.to_dict(),
        wall_clock_seconds=time.perf_counter() - t0,
        feasible=rep.feasible,
        min_feasible_N=min_N,
        solver_converged=solver_converged,
        margin_chain=chain,
    )


@dataclass(frozen=True)
class SweepCell:
    """Aggregated reports for one value of the swept parameter."""

    axis: str
    value: float
    seeds: tuple[int, ...]
    reports: tuple[ValidationReport, ...] | None
    error: str | None = None

    @property
    def mean(self) -> float | None:
        if not self.reports:
            return None
        return float(np.mean([r.R_test for r in self.reports]))

    @property
    def std(self) -> float | None:
        if not self.reports:
            return None
        vals = [r.R_test for r in self.reports]
        return float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0


def sweep(
    cfg_base: ExperimentConfig,
    axis: str,
    values,
    n_seeds: int = 5,
    check_margin_chain: bool = True,
) -> list[SweepCell]:
    """One cell per value, n_seeds runs per cell with seeds base..base+n-1.

    Cell failures are recorded in the cell and the sweep continues; output
    ordering follows the input value list.
    """
    if axis not in ("N", "L", "Ts"):
        raise ValueError("axis must be one of 'N', 'L', 'Ts'")
    cells: list[SweepCell] = []
    for value in values:
        cast = float(value) if axis == "Ts" else int(value)
        seeds = tuple(cfg_base.seed + i for i in range(n_seeds))
        try:
            cfg_v = replace(cfg_base, **{axis: cast})
            reports = tuple(
                run_experiment(
                    replace(cfg_v, seed=s), check_margin_chain=check_margin_chain
                )
                for s in seeds
            )
            cells.append(
                SweepCell(axis=axis, value=cast, seeds=seeds, reports=reports)
            )
        except Exception as exc:  # recorded per cell, sweep continues
            cells.append(
                SweepCell(
                    axis=axis, value=cast, seeds=seeds, reports=None, error=str(exc)
                )
            )
    return cells


def results_csv_text(cells: list[SweepCell]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["axis_value", "R_test_mean", "R_test_std", "seeds", "error"])
    for cell in cells:
        mean = "" if cell.mean is None else repr(cell.mean)
        std = "" if cell.std is None else repr(cell.std)
        writer.writerow(
            [
                repr(float(cell.value)),
                mean,
                std,
                ";".join(str(s) for s in cell.seeds),
                cell.error or "",
            ]
        )
    return buf.getvalue()


def write_results_csv(cells: list[SweepCell], path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(results_csv_text(cells))


def emit_trajectory_cloud(cfg: ExperimentConfig, count: int) -> tuple[str, str]:
    """CSV text of ``count`` normalized trajectories per class.

    Returns (class1_csv, class2_csv); rows carry the label column followed
    by the N*m trajectory values at 17 significant digits.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    sys1, sys2 = build_plant_pair(cfg)
    data = random_dataset(
        sys1, sys2, per_class=count, N=cfg.N, sigma2=cfg.sigma2,
        seed=_cloud_seed(cfg.seed),
    )
    texts = []
    for label in (1, -1):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["label"] + [f"y_{i}" for i in range(cfg.N * sys1.m)])
        for t in data.items:
            if t.label != label:
                continue
            row = normalize(t).Y
            writer.writerow([label] + [format(v, ".17g") for v in row])
        texts.append(buf.getvalue())
    return texts[0], texts[1]
