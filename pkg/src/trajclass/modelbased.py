"""Projection classifier built from the two observability ranges.

The classifier is the difference Q = Q1 - Q2 of the orthogonal projections
onto the ranges of the two observability matrices.  The quadratic form
``Y @ Q @ Y`` is positive exactly on the nonzero trajectories of the first
system and negative on those of the second, and equals the difference of
squared point-to-subspace distances.  Written in the squared feature space
(Kronecker self-products) it is the linear functional with weight vector
``wM = vec(Q)``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .numerics import svd, unvec, vec
from .sysmodel import (
    InfeasiblePairError,
    LinearSystem,
    feasibility_check,
    observability_matrix,
)
from .trajectories import ZeroTrajectoryError

__all__ = [
    "ABSTAIN",
    "DEFAULT_ABSTAIN_TOL",
    "ModelBasedClassifier",
    "build",
    "residual_distance",
    "decision_value",
    "decision_values",
    "classify",
    "support_vector_form",
]

ABSTAIN = "abstain"

# Relative to ||Y||^2, the natural scale of the quadratic decision value.
DEFAULT_ABSTAIN_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class ModelBasedClassifier:
    """Immutable after construction; classification methods are pure.

    Instances loaded from JSON carry only (N, m, Q, wM): the per-class
    projections and singular-vector factors are not part of the wire format,
    so ``residual_distance`` and ``support_vector_form`` need a freshly
    built classifier.
    """

    Q: np.ndarray
    wM: np.ndarray
    N: int
    m: int
    n1: int | None = None
    n2: int | None = None
    Q1: np.ndarray | None = None
    Q2: np.ndarray | None = None
    U1: np.ndarray | None = None
    U2: np.ndarray | None = None

    @property
    def dim(self) -> int:
        """Trajectory length N*m the classifier operates on."""
        return self.Q.shape[0]

    def to_json(self) -> str:
        return json.dumps({"N": self.N, "m": self.m, "Q": self.Q.tolist()})

    @classmethod
    def from_json(cls, text: str) -> "ModelBasedClassifier":
        doc = json.loads(text)
        Q = np.asarray(doc["Q"], float)
        return cls(Q=Q, wM=vec(Q), N=int(doc["N"]), m=int(doc["m"]))


def build(sys1: LinearSystem, sys2: LinearSystem, N: int) -> ModelBasedClassifier:
    """Construct the projection classifier for a feasible pair.

    Each projection is formed as U @ U.T from the reduced SVD of the
    observability matrix rather than through an explicit Gramian inverse;
    the two agree but the SVD route stays accurate when the observability
    matrix is ill-conditioned.
    """
    report = feasibility_check(sys1, sys2, N)
    if not report.feasible:
        raise InfeasiblePairError(
            f"pair fails the separation rank test at N={N}: rank "
            f"{report.rank} < {report.required_rank}"
            + (f" ({report.horizon_warning})" if report.horizon_warning else "")
        )
    U1 = svd(observability_matrix(sys1, N).O).U
    U2 = svd(observability_matrix(sys2, N).O).U
    Q1 = U1 @ U1.T
    Q2 = U2 @ U2.T
    Q = Q1 - Q2
    return ModelBasedClassifier(
        Q=Q,
        wM=vec(Q),
        N=N,
        m=sys1.m,
        n1=sys1.n,
        n2=sys2.n,
        Q1=Q1,
        Q2=Q2,
        U1=U1,
        U2=U2,
    )


def _check_dim(clf: ModelBasedClassifier, y: np.ndarray) -> np.ndarray:
    y = np.asarray(y, dtype=float).ravel()
    if y.size != clf.dim:
        raise ValueError(f"trajectory has length {y.size}, expected {clf.dim}")
    return y


def residual_distance(clf: ModelBasedClassifier, Y, class_index: int) -> float:
    """Squared distance from Y to the chosen class's trajectory subspace."""
    y = _check_dim(clf, Y)
    if class_index not in (1, 2):
        raise ValueError("class_index must be 1 or 2")
    Qi = clf.Q1 if class_index == 1 else clf.Q2
    if Qi is None:
        raise ValueError(
            "per-class projections unavailable on a deserialized classifier"
        )
    r = y - Qi @ y
    return float(r @ r)


def decision_value(clf: ModelBasedClassifier, Y) -> float:
    """Quadratic decision value Y @ Q @ Y.

    Equals both the distance gap (class-2 residual minus class-1 residual)
    and the feature-space inner product wM @ kron(Y, Y).
    """
    y = _check_dim(clf, Y)
    return float(y @ clf.Q @ y)


def decision_values(clf: ModelBasedClassifier, Ys: np.ndarray) -> np.ndarray:
    """Vectorized :func:`decision_value` over rows of an (L, N*m) array."""
    Ys = np.asarray(Ys, dtype=float)
    if Ys.ndim != 2 or Ys.shape[1] != clf.dim:
        raise ValueError(f"expected rows of length {clf.dim}, got shape {Ys.shape}")
    return np.einsum("ij,jk,ik->i", Ys, clf.Q, Ys)


def classify(clf: ModelBasedClassifier, Y, abstain_tol: float = DEFAULT_ABSTAIN_TOL):
    """Return +1, -1 or :data:`ABSTAIN` when the decision value is ~0.

    The abstention band is relative to ||Y||^2 so the verdict does not
    depend on trajectory scale.
    """
    y = _check_dim(clf, Y)
    scale = float(y @ y)
    if scale == 0.0:
        raise ZeroTrajectoryError("cannot classify a zero trajectory")
    v = float(y @ clf.Q @ y)
    if abs(v) <= abstain_tol * scale:
        return ABSTAIN
    return 1 if v > 0 else -1


def support_vector_form(
    clf: ModelBasedClassifier,
) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Left singular vectors of the two observability matrices.

    The weight vector decomposes as the sum of the Kronecker self-products
    of the first list minus that of the second, which is exactly the
    support-vector expansion of a max-margin classifier in feature space.
    """
    if clf.U1 is None or clf.U2 is None:
        raise ValueError(
            "singular-vector factors unavailable on a deserialized classifier"
        )
    return (
        [clf.U1[:, k].copy() for k in range(clf.U1.shape[1])],
        [clf.U2[:, k].copy() for k in range(clf.U2.shape[1])],
    )
