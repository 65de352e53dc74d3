"""Dynamics-dependent margin bound and the expected-risk bound.

The separation measure ``beta`` is the squared sine of the smallest
principal angle between the two observability ranges.  On normalized data
it lower-bounds the projection classifier's margin through
``beta / sqrt(2 (n1 + n2))``, and the trained max-margin classifier can
only do better, giving the chain ``bound <= rho_M <= rho_D``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from . import modelbased, svm
from .numerics import principal_angle_cosines, svd
from .sysmodel import (
    InfeasiblePairError,
    LinearSystem,
    feasibility_check,
    observability_matrix,
)
from .trajectories import Dataset

__all__ = [
    "CHAIN_TOL",
    "ChainViolationError",
    "BetaLimit",
    "MarginReport",
    "RiskBoundInput",
    "beta",
    "beta_limit",
    "margin_bound",
    "risk_bound",
    "margin_chain_report",
]

CHAIN_TOL = 1e-8


class ChainViolationError(RuntimeError):
    """The margin chain failed beyond tolerance: indicates a solver bug."""


def beta(sys1: LinearSystem, sys2: LinearSystem, N: int) -> float:
    """Squared sine of the smallest principal angle between the ranges.

    Defined (and positive) only when the pair passes the separation rank
    test; otherwise the subspaces intersect and the measure would be zero.
    """
    report = feasibility_check(sys1, sys2, N)
    if not report.feasible:
        raise InfeasiblePairError(
            f"separation measure undefined at N={N}: rank {report.rank} < "
            f"{report.required_rank} (the measure would be 0)"
        )
    U1 = svd(observability_matrix(sys1, N).O).U
    U2 = svd(observability_matrix(sys2, N).O).U
    cosines = principal_angle_cosines(U1, U2)
    sigma_max = float(cosines[0]) if cosines.size else 0.0
    return 1.0 - sigma_max**2


@dataclass(frozen=True)
class BetaLimit:
    """Finite-horizon proxy for the infinite-horizon separation measure."""

    beta: float
    beta_doubled: float
    N: int
    rel_change: float


def beta_limit(
    sys1: LinearSystem, sys2: LinearSystem, N: int = 500, rel_tol: float = 0.05
) -> BetaLimit:
    """beta at a large horizon, certified by an N -> 2N convergence check.

    Raises when the value at N and at 2N still differ by more than
    ``rel_tol`` relative, meaning the horizon is too short to stand in for
    the infinite-horizon value.
    """
    b1 = beta(sys1, sys2, N)
    b2 = beta(sys1, sys2, 2 * N)
    rel = abs(b1 - b2) / max(abs(b2), 1e-300)
    if rel > rel_tol:
        raise RuntimeError(
            f"separation measure not settled: beta({N})={b1:.6g} vs "
            f"beta({2 * N})={b2:.6g} ({rel:.1%} relative change)"
        )
    return BetaLimit(beta=b1, beta_doubled=b2, N=N, rel_change=rel)


def margin_bound(beta_value: float, n1: int, n2: int) -> float:
    """Margin lower bound beta / sqrt(2 (n1 + n2)) for normalized data."""
    if not 0.0 <= beta_value <= 1.0:
        raise ValueError("beta must lie in [0, 1]")
    if n1 < 1 or n2 < 1:
        raise ValueError("system orders must be >= 1")
    return beta_value / math.sqrt(2.0 * (n1 + n2))


@dataclass(frozen=True)
class RiskBoundInput:
    """Inputs of the margin-based expected-risk bound.

    ``R`` is the data radius (1 for normalized features), ``c`` the
    unspecified leading constant; the output is meaningful up to ``c``.
    """

    L: float
    rho: float
    eta: float
    R: float = 1.0
    c: float = 1.0

    def __post_init__(self):
        if self.L < 1:
            raise ValueError("L must be >= 1")
        if self.rho <= 0:
            raise ValueError("rho must be positive")
        if not 0.0 < self.eta < 1.0:
            raise ValueError("eta must lie in (0, 1)")
        if self.R <= 0:
            raise ValueError("R must be positive")
        if self.c <= 0:
            raise ValueError("c must be positive")


def risk_bound(inp: RiskBoundInput) -> float:
    """(c/L) * ((R/rho)^2 * ln(L)^2 + ln(1/eta)); natural logarithms."""
    log_L = math.log(inp.L)
    return (inp.c / inp.L) * (
        (inp.R**2 / inp.rho**2) * log_L**2 + math.log(1.0 / inp.eta)
    )


@dataclass(frozen=True)
class MarginReport:
    """Margins, separation measure, and the bound tying them together."""

    rho_M: float
    rho_D: float
    beta: float
    bound: float
    n1: int
    n2: int
    N: int
    chain_tol: float = CHAIN_TOL

    def chain_holds(self) -> bool:
        return (
            self.bound <= self.rho_M + self.chain_tol
            and self.rho_M <= self.rho_D + self.chain_tol
        )

    def to_json(self) -> str:
        return json.dumps(
            {
                "rho_M": self.rho_M,
                "rho_D": self.rho_D,
                "beta": self.beta,
                "bound": self.bound,
                "n1": self.n1,
                "n2": self.n2,
                "N": self.N,
                "chain_tol": self.chain_tol,
            }
        )


def margin_chain_report(
    sys1: LinearSystem,
    sys2: LinearSystem,
    N: int,
    data: Dataset,
    chain_tol: float = CHAIN_TOL,
) -> MarginReport:
    """Compute rho_M, rho_D, beta and the bound; assert the chain.

    A violation beyond tolerance is a hard failure (it can only come from a
    broken solver or a broken bound computation), not a warning.
    """
    b = beta(sys1, sys2, N)
    bound = margin_bound(b, sys1.n, sys2.n)
    clf = modelbased.build(sys1, sys2, N)
    rho_M = svm.margin(clf.wM, data)
    model = svm.train_hard_margin(data, normalize_flag=True)
    rho_D = model.margin
    report = MarginReport(
        rho_M=rho_M,
        rho_D=float(rho_D),
        beta=b,
        bound=bound,
        n1=sys1.n,
        n2=sys2.n,
        N=N,
        chain_tol=chain_tol,
    )
    if not report.chain_holds():
        raise ChainViolationError(
            f"margin chain violated: bound={bound:.6g}, rho_M={rho_M:.6g}, "
            f"rho_D={rho_D:.6g} (tol {chain_tol:g})"
        )
    return report
