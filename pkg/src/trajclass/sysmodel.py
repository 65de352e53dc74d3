"""Discrete-time autonomous systems and the machinery around them.

A system is a pair (A, C): state update ``x(t+1) = A x(t)`` and output
``y(t) = C x(t)``.  Observability of (C, A) is enforced at construction,
so everything downstream may assume the order-n observability matrix has
full column rank.  Continuous-time SISO transfer functions enter only as a
way to realize plants that are then sampled with :func:`discretize`.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .numerics import as_matrix, expm, svd

__all__ = [
    "NotObservableError",
    "InfeasiblePairError",
    "LinearSystem",
    "ContinuousSiso",
    "ObservabilityMatrix",
    "FeasibilityReport",
    "observability_matrix",
    "feasibility_check",
    "parallel_interconnection",
    "tf_to_ss",
    "close_loop",
    "discretize",
]

_EPS = float(np.finfo(float).eps)


class NotObservableError(ValueError):
    """(C, A) fails the order-n observability rank test."""


class InfeasiblePairError(ValueError):
    """rank [O1 O2] < n1 + n2: the trajectory sets of the pair overlap."""


def _stack_blocks(A: np.ndarray, C: np.ndarray, N: int) -> np.ndarray:
    # Iterated multiplication, never explicit matrix powers.
    m, n = C.shape
    out = np.empty((N * m, n))
    row = C
    for k in range(N):
        out[k * m : (k + 1) * m] = row
        if k + 1 < N:
            row = row @ A
    return out


def _rank_from_svals(S: np.ndarray, shape: tuple[int, int]) -> int:
    tol = max(shape) * _EPS
    smax = float(S[0]) if S.size else 0.0
    if smax == 0.0:
        return 0
    return int(np.count_nonzero(S > tol * smax))


@dataclass(frozen=True, eq=False)
class LinearSystem:
    """Observable autonomous pair (A, C); raises at construction otherwise."""

    A: np.ndarray
    C: np.ndarray

    def __post_init__(self):
        A = as_matrix(self.A, "A")
        C = as_matrix(self.C, "C")
        if A.shape[0] != A.shape[1]:
            raise ValueError(f"A must be square, got shape {A.shape}")
        if C.shape[1] != A.shape[0]:
            raise ValueError(
                f"C must have {A.shape[0]} columns, got shape {C.shape}"
            )
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "C", C)
        O = _stack_blocks(A, C, A.shape[0])
        rank = _rank_from_svals(svd(O).S, O.shape)
        if rank != A.shape[0]:
            raise NotObservableError(
                f"(C, A) is not observable: order-{A.shape[0]} observability "
                f"matrix has rank {rank}"
            )

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.C.shape[0]

    def to_json(self) -> str:
        return json.dumps({"A": self.A.tolist(), "C": self.C.tolist()})

    @classmethod
    def from_json(cls, text: str) -> "LinearSystem":
        doc = json.loads(text)
        return cls(A=np.asarray(doc["A"], float), C=np.asarray(doc["C"], float))


def _trim_trailing_zeros(coeffs: tuple[float, ...]) -> tuple[float, ...]:
    end = len(coeffs)
    while end > 0 and coeffs[end - 1] == 0.0:
        end -= 1
    return coeffs[:end]


@dataclass(frozen=True)
class ContinuousSiso:
    """Strictly proper SISO transfer function, coefficients ascending in s."""

    num: tuple[float, ...]
    den: tuple[float, ...]

    def __post_init__(self):
        num = tuple(float(c) for c in self.num)
        den = tuple(float(c) for c in self.den)
        if not all(math.isfinite(c) for c in num + den):
            raise ValueError("coefficients must be finite")
        if not den or den[-1] == 0.0:
            raise ValueError("leading denominator coefficient must be nonzero")
        num_eff = _trim_trailing_zeros(num)
        if not num_eff:
            raise ValueError("zero transfer function")
        if len(num_eff) - 1 >= len(den) - 1:
            raise ValueError(
                f"not strictly proper: deg(num)={len(num_eff) - 1} >= "
                f"deg(den)={len(den) - 1}"
            )
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "den", den)

    def __call__(self, s: complex) -> complex:
        """Evaluate the transfer function at a complex point."""
        num = sum(c * s**k for k, c in enumerate(self.num))
        den = sum(c * s**k for k, c in enumerate(self.den))
        return num / den

    def to_json(self) -> str:
        return json.dumps({"num": list(self.num), "den": list(self.den)})

    @classmethod
    def from_json(cls, text: str) -> "ContinuousSiso":
        doc = json.loads(text)
        return cls(num=tuple(doc["num"]), den=tuple(doc["den"]))


@dataclass(frozen=True, eq=False)
class ObservabilityMatrix:
    """Stacked blocks [C; CA; ...; CA^(N-1)] for one system."""

    O: np.ndarray
    N: int
    source: str | None = None


def observability_matrix(
    sys: LinearSystem, N: int, source: str | None = None
) -> ObservabilityMatrix:
    """Order-N observability matrix, built by iterated multiplication."""
    if N < 1:
        raise ValueError("N must be >= 1")
    return ObservabilityMatrix(O=_stack_blocks(sys.A, sys.C, N), N=N, source=source)


@dataclass(frozen=True)
class FeasibilityReport:
    """Rank evidence for the pairwise separation condition."""

    feasible: bool
    rank: int
    required_rank: int
    smallest_singular_value: float
    min_horizon: int
    horizon_warning: str | None = None

    def __bool__(self) -> bool:
        return self.feasible


def feasibility_check(
    sys1: LinearSystem, sys2: LinearSystem, N: int
) -> FeasibilityReport:
    """Test rank [O1 O2] = n1 + n2 and report the evidence.

    The report carries the numerical rank and the smallest singular value of
    the concatenation (the separation margin).  A warning is attached when
    the horizon is too short for the rank condition to be satisfiable at
    all, i.e. when N*m < n1 + n2.
    """
    if sys1.m != sys2.m:
        raise ValueError(f"output dimensions differ: {sys1.m} vs {sys2.m}")
    required = sys1.n + sys2.n
    concat = np.hstack(
        [observability_matrix(sys1, N).O, observability_matrix(sys2, N).O]
    )
    S = svd(concat).S
    rank = _rank_from_svals(S, concat.shape)
    min_horizon = math.ceil(required / sys1.m)
    warning = None
    if N < min_horizon:
        warning = (
            f"horizon N={N} gives only {N * sys1.m} output samples; "
            f"at least N={min_horizon} is needed for rank {required}"
        )
    return FeasibilityReport(
        feasible=(rank == required),
        rank=rank,
        required_rank=required,
        smallest_singular_value=float(S[-1]) if S.size else 0.0,
        min_horizon=min_horizon,
        horizon_warning=warning,
    )


def parallel_interconnection(
    sys1: LinearSystem, sys2: LinearSystem
) -> tuple[np.ndarray, np.ndarray]:
    """Block-diagonal A and side-by-side C of the two systems.

    Returned as a raw (A, C) pair: the interconnection may be unobservable,
    so it intentionally does not come back as a :class:`LinearSystem`.
    """
    if sys1.m != sys2.m:
        raise ValueError(f"output dimensions differ: {sys1.m} vs {sys2.m}")
    A = scipy.linalg.block_diag(sys1.A, sys2.A)
    C = np.hstack([sys1.C, sys2.C])
    return A, C


def tf_to_ss(g: ContinuousSiso) -> tuple[np.ndarray, np.ndarray]:
    """Controllable canonical realization, autonomous part only.

    Only (A_c, C_c) are returned: classification works on zero-input
    responses from random initial conditions, so the input matrix is never
    needed.  The denominator is normalized monic; the numerator coefficients
    (padded with zeros) become the output row.
    """
    den = np.asarray(g.den, float)
    n = den.size - 1
    if n < 1:
        raise ValueError("improper transfer function: constant denominator")
    monic = den / den[-1]
    A = np.zeros((n, n))
    if n > 1:
        A[:-1, 1:] = np.eye(n - 1)
    A[-1, :] = -monic[:-1]
    num = np.trim_zeros(np.asarray(g.num, float), "b")
    C = np.zeros(n)
    C[: num.size] = num / den[-1]
    return A, C.reshape(1, n)


def close_loop(g: ContinuousSiso, K: float) -> ContinuousSiso:
    """Proportional negative feedback: K*g / (1 + K*g).

    In coefficients: num' = K*num and den' = den + K*num after degree
    alignment.  Strict properness keeps the leading denominator coefficient
    intact, so the result is again strictly proper.
    """
    num = np.trim_zeros(np.asarray(g.num, float), "b")
    new_num = float(K) * num
    if not np.any(new_num):
        raise ValueError("feedback closure produced the zero system (K*num = 0)")
    new_den = np.asarray(g.den, float).copy()
    new_den[: new_num.size] += new_num
    if new_den[-1] == 0.0:
        raise ValueError("degenerate cancellation: closed-loop denominator lost degree")
    return ContinuousSiso(num=tuple(new_num), den=tuple(new_den))


def discretize(A_c, C_c, Ts: float) -> LinearSystem:
    """Exact zero-input sampling: A = expm(A_c * Ts), C unchanged.

    Raises :class:`NotObservableError` when sampling destroys observability
    (e.g. eigenvalue aliasing at pathological sampling times), since all
    downstream analysis assumes observable systems.
    """
    if Ts <= 0:
        raise ValueError("sampling time must be positive")
    A_c = as_matrix(A_c, "A_c")
    return LinearSystem(A=expm(A_c * float(Ts)), C=C_c)
