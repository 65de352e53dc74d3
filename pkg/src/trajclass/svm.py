"""Max-margin classification in the squared (Kronecker) feature space.

The feature map ``Phi(Y) = kron(Y, Y)`` makes the two trajectory classes
linearly separable through the origin whenever the generating pair passes
the separation rank test, so training solves the through-origin hard-margin
problem.  Its Wolfe dual carries only nonnegativity constraints (no
equality constraint ties the multipliers together), which makes exact
per-coordinate maximization available in closed form; the soft-margin
variant just adds a box upper bound.  Feature-space inner products reduce
to the homogeneous polynomial kernel ``(Y @ Z)**2``, so both training and
prediction can stay in the trajectory space.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .numerics import unvec, vec
from .trajectories import Dataset, fingerprint, normalize

__all__ = [
    "InseparableDataError",
    "ConvergenceError",
    "SoftMarginConfig",
    "SvmModel",
    "DualSolution",
    "FeatureTrainResult",
    "feature_map",
    "kernel",
    "solve_dual",
    "train_hard_margin",
    "train_soft_margin",
    "train_on_features",
    "predict",
    "predict_batch",
    "margin",
    "margin_on_features",
]

DEFAULT_TOL = 1e-8
DEFAULT_MAX_SWEEPS = 100_000

_STALL_CHECK = 50  # sweeps between stall probes (hard margin only)
_STALL_EPS = 1e-10
_GRADIENT_REFRESH = 1000  # sweeps between full gradient recomputations


class InseparableDataError(RuntimeError):
    """No separating hyperplane exists: the hard-margin dual is unbounded.

    Carries the most violated (+1, -1) index pair and the solver state at
    detection (``solution``, and ``model`` when raised by a trainer), so
    callers that must classify anyway can use the stalled iterate.
    """

    def __init__(
        self,
        message: str,
        pair: tuple[int, int] | None = None,
        solution: "DualSolution | None" = None,
        model: "SvmModel | None" = None,
    ):
        super().__init__(message)
        self.pair = pair
        self.solution = solution
        self.model = model


class ConvergenceError(RuntimeError):
    """The dual solver hit its sweep cap before meeting the KKT tolerance.

    Like :class:`InseparableDataError`, carries the capped iterate.
    """

    def __init__(
        self,
        message: str,
        solution: "DualSolution | None" = None,
        model: "SvmModel | None" = None,
    ):
        super().__init__(message)
        self.solution = solution
        self.model = model


@dataclass(frozen=True)
class SoftMarginConfig:
    """Slack penalty for the soft-margin variant."""

    C: float

    def __post_init__(self):
        if not self.C > 0:
            raise ValueError("C must be positive")


def feature_map(Y) -> np.ndarray:
    """Kronecker self-product under the package-wide stacking convention."""
    y = np.asarray(Y, dtype=float).ravel()
    return np.kron(y, y)


def kernel(Y, Z) -> float:
    """Homogeneous polynomial kernel (Y @ Z)**2.

    Equals the inner product of the two Kronecker self-products.
    """
    y = np.asarray(Y, dtype=float).ravel()
    z = np.asarray(Z, dtype=float).ravel()
    if y.size != z.size:
        raise ValueError(f"lengths differ: {y.size} vs {z.size}")
    return float(np.dot(y, z) ** 2)


@dataclass(frozen=True)
class DualSolution:
    mu: np.ndarray
    converged: bool
    kkt_residual: float
    sweeps: int


def _kkt_violation(mu: np.ndarray, g: np.ndarray, C: float | None) -> float:
    # g is the dual gradient 1 - Z mu.  Optimality: g <= 0 where mu = 0,
    # g = 0 in the interior, g >= 0 where mu = C.
    viol = np.maximum(g, 0.0)
    interior = mu > 0
    viol[interior] = np.abs(g[interior])
    if C is not None:
        upper = mu >= C
        viol[upper] = np.maximum(-g[upper], 0.0)
    return float(viol.max())


def _worst_pair(labels: np.ndarray, functional_margins: np.ndarray) -> tuple[int, int]:
    pos = np.where(labels > 0)[0]
    neg = np.where(labels < 0)[0]
    i = int(pos[np.argmin(functional_margins[pos])])
    j = int(neg[np.argmin(functional_margins[neg])])
    return i, j


def solve_dual(
    K: np.ndarray,
    labels: np.ndarray,
    C: float | None = None,
    tol: float = DEFAULT_TOL,
    max_sweeps: int = DEFAULT_MAX_SWEEPS,
) -> DualSolution:
    """Cyclic coordinate ascent on the through-origin dual.

    Maximizes ``sum(mu) - mu @ Z @ mu / 2`` over ``0 <= mu`` (hard margin)
    or ``0 <= mu <= C`` (soft margin), where ``Z = diag(l) K diag(l)`` and
    ``K`` is the kernel Gram matrix.  Each coordinate update
    ``mu_k <- clip(mu_k + (1 - (Z mu)_k) / Z_kk)`` is the exact constrained
    maximizer along that coordinate.  Terminates when the largest KKT
    violation drops below ``tol``.

    The hard-margin dual is unbounded exactly when the data admit no
    separating hyperplane.  In that regime the iterates drift along a flat
    direction of Z without changing the functional margins, which is
    detected by a stalled ``Z mu`` combined with a persistent violation and
    reported as :class:`InseparableDataError` naming the worst offender of
    each class.
    """
    K = np.asarray(K, dtype=float)
    labels = np.asarray(labels, dtype=float).ravel()
    L = labels.size
    if K.shape != (L, L):
        raise ValueError(f"Gram matrix shape {K.shape} does not match {L} labels")
    if not set(np.unique(labels)) <= {1.0, -1.0}:
        raise ValueError("labels must be +1/-1")
    Z = K * np.outer(labels, labels)
    diag = np.diag(Z).copy()
    if np.any(diag <= 0):
        raise ValueError("training point with zero feature vector (Z_kk = 0)")
    mu = np.zeros(L)
    g = np.ones(L)  # dual gradient 1 - Z mu
    last_zmu: np.ndarray | None = None
    for sweep in range(1, max_sweeps + 1):
        for k in range(L):
            new = mu[k] + g[k] / diag[k]
            if new < 0.0:
                new = 0.0
            elif C is not None and new > C:
                new = C
            delta = new - mu[k]
            if delta != 0.0:
                mu[k] = new
                g -= delta * Z[k]
        if sweep % _GRADIENT_REFRESH == 0:
            g = 1.0 - Z @ mu  # shed accumulated floating-point drift
        kkt = _kkt_violation(mu, g, C)
        if kkt <= tol:
            return DualSolution(mu=mu, converged=True, kkt_residual=kkt, sweeps=sweep)
        if C is None and sweep % _STALL_CHECK == 0:
            zmu = 1.0 - g
            if last_zmu is not None:
                moved = float(np.max(np.abs(zmu - last_zmu)))
                if moved < _STALL_EPS and kkt > 100 * tol:
                    pair = _worst_pair(labels, zmu)
                    raise InseparableDataError(
                        "training data are not separable through the origin; "
                        f"most violated pair: indices {pair[0]} (+1) and "
                        f"{pair[1]} (-1)",
                        pair=pair,
                        solution=DualSolution(
                            mu=mu, converged=False, kkt_residual=kkt, sweeps=sweep
                        ),
                    )
            last_zmu = zmu
    g = 1.0 - Z @ mu
    kkt = _kkt_violation(mu, g, C)
    return DualSolution(
        mu=mu, converged=kkt <= tol, kkt_residual=kkt, sweeps=max_sweeps
    )


@dataclass(frozen=True, eq=False)
class SvmModel:
    """Trained through-origin classifier; immutable and safe to share.

    ``training_Y`` holds the trajectories exactly as used during training
    (normalized when ``normalized`` is set); ``w`` is the feature-space
    weight vector, always consistent with the dual expansion
    ``sum_k mu_k l_k kron(Y_k, Y_k)``.
    """

    w: np.ndarray
    mu: np.ndarray
    labels: np.ndarray
    training_Y: np.ndarray
    support_indices: np.ndarray
    normalized: bool
    trained_on: str | None
    margin: float | None
    converged: bool
    kkt_residual: float
    sweeps: int
    slacks: np.ndarray | None = None
    soft_C: float | None = None

    @property
    def dim(self) -> int:
        return self.training_Y.shape[1]

    def to_json(self) -> str:
        idx = self.support_indices
        return json.dumps(
            {
                "mu": self.mu[idx].tolist(),
                "labels": [int(v) for v in self.labels[idx]],
                "support_Y": self.training_Y[idx].tolist(),
                "normalized": bool(self.normalized),
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "SvmModel":
        doc = json.loads(text)
        mu = np.asarray(doc["mu"], float)
        labels = np.asarray(doc["labels"], float)
        Ys = np.asarray(doc["support_Y"], float)
        return cls(
            w=_weights_from_dual(Ys, labels, mu),
            mu=mu,
            labels=labels,
            training_Y=Ys,
            support_indices=np.arange(mu.size),
            normalized=bool(doc["normalized"]),
            trained_on=None,
            margin=None,
            converged=True,
            kkt_residual=float("nan"),
            sweeps=0,
        )


def _training_rows(data: Dataset, normalize_flag: bool) -> np.ndarray:
    if normalize_flag:
        return np.vstack([normalize(t).Y for t in data.items])
    return data.stacked_Y()


def _weights_from_dual(Ys: np.ndarray, labels: np.ndarray, mu: np.ndarray) -> np.ndarray:
    # sum_k (mu l)_k kron(Y_k, Y_k) assembled as vec of sum (mu l)_k Y_k Y_k^T.
    W = Ys.T @ (Ys * (mu * labels)[:, None])
    return vec(W)


def _require_both_labels(labels: np.ndarray) -> None:
    if not (np.any(labels > 0) and np.any(labels < 0)):
        raise ValueError("training data must contain both labels")


def _build_model(
    data: Dataset,
    Ys: np.ndarray,
    labels: np.ndarray,
    sol: DualSolution,
    normalize_flag: bool,
    soft_C: float | None,
) -> SvmModel:
    w = _weights_from_dual(Ys, labels, sol.mu)
    slacks = None
    if soft_C is not None:
        dec = predict_batch_weights(w, Ys)
        slacks = np.maximum(0.0, 1.0 - labels * dec)
    rho = margin(w, data) if np.any(w) else None
    return SvmModel(
        w=w,
        mu=sol.mu,
        labels=labels,
        training_Y=Ys,
        support_indices=np.where(sol.mu > 0)[0],
        normalized=normalize_flag,
        trained_on=fingerprint(data),
        margin=rho,
        converged=sol.converged,
        kkt_residual=sol.kkt_residual,
        sweeps=sol.sweeps,
        slacks=slacks,
        soft_C=soft_C,
    )


def train_hard_margin(
    data: Dataset,
    normalize_flag: bool = True,
    tol: float = DEFAULT_TOL,
    max_sweeps: int = DEFAULT_MAX_SWEEPS,
) -> SvmModel:
    """Maximum-margin separator through the origin of feature space.

    Solves the dual with the kernel Gram matrix of the (optionally
    normalized) training trajectories.  Raises
    :class:`InseparableDataError` when no separator exists and
    :class:`ConvergenceError` when the sweep cap is reached first.
    """
    labels = data.labels()
    _require_both_labels(labels)
    Ys = _training_rows(data, normalize_flag)
    K = (Ys @ Ys.T) ** 2
    try:
        sol = solve_dual(K, labels, C=None, tol=tol, max_sweeps=max_sweeps)
    except InseparableDataError as exc:
        exc.model = _build_model(
            data, Ys, labels, exc.solution, normalize_flag, soft_C=None
        )
        raise
    if not sol.converged:
        raise ConvergenceError(
            f"hard-margin dual did not converge within {max_sweeps} sweeps "
            f"(KKT residual {sol.kkt_residual:.3e})",
            solution=sol,
            model=_build_model(data, Ys, labels, sol, normalize_flag, soft_C=None),
        )
    return _build_model(data, Ys, labels, sol, normalize_flag, soft_C=None)


def train_soft_margin(
    data: Dataset,
    cfg: SoftMarginConfig | float,
    normalize_flag: bool = True,
    tol: float = DEFAULT_TOL,
    max_sweeps: int = DEFAULT_MAX_SWEEPS,
) -> SvmModel:
    """Box-constrained variant: multipliers capped at C, slack recovered.

    Slacks are reported as ``max(0, 1 - l_k * (w @ Phi_k))``; with separable
    data and large C the solution coincides with the hard-margin one.
    """
    C = cfg.C if isinstance(cfg, SoftMarginConfig) else SoftMarginConfig(float(cfg)).C
    labels = data.labels()
    _require_both_labels(labels)
    Ys = _training_rows(data, normalize_flag)
    K = (Ys @ Ys.T) ** 2
    sol = solve_dual(K, labels, C=C, tol=tol, max_sweeps=max_sweeps)
    if not sol.converged:
        raise ConvergenceError(
            f"soft-margin dual did not converge within {max_sweeps} sweeps "
            f"(KKT residual {sol.kkt_residual:.3e})",
            solution=sol,
            model=_build_model(data, Ys, labels, sol, normalize_flag, soft_C=C),
        )
    return _build_model(data, Ys, labels, sol, normalize_flag, soft_C=C)


@dataclass(frozen=True)
class FeatureTrainResult:
    """Solution of the through-origin problem on raw feature vectors."""

    w: np.ndarray
    mu: np.ndarray
    converged: bool
    kkt_residual: float
    sweeps: int


def train_on_features(
    features: np.ndarray,
    labels,
    C: float | None = None,
    tol: float = DEFAULT_TOL,
    max_sweeps: int = DEFAULT_MAX_SWEEPS,
) -> FeatureTrainResult:
    """Train directly on arbitrary feature vectors (rows of ``features``).

    Same solver as the trajectory-level trainers, with the plain linear Gram
    matrix; useful when data live in feature space already.
    """
    F = np.asarray(features, dtype=float)
    labels = np.asarray(labels, dtype=float).ravel()
    _require_both_labels(labels)
    sol = solve_dual(F @ F.T, labels, C=C, tol=tol, max_sweeps=max_sweeps)
    if not sol.converged:
        raise ConvergenceError(
            f"dual did not converge within {max_sweeps} sweeps "
            f"(KKT residual {sol.kkt_residual:.3e})"
        )
    w = F.T @ (sol.mu * labels)
    return FeatureTrainResult(
        w=w,
        mu=sol.mu,
        converged=sol.converged,
        kkt_residual=sol.kkt_residual,
        sweeps=sol.sweeps,
    )


def predict(model: SvmModel, Y, via_kernel: bool = True) -> float:
    """Decision value on a trajectory.

    The kernel path sums over support vectors only; the feature path
    evaluates ``w @ kron(Y, Y)`` through the equivalent quadratic form.  The
    two agree up to roundoff.
    """
    y = np.asarray(Y, dtype=float).ravel()
    if y.size != model.dim:
        raise ValueError(f"trajectory has length {y.size}, expected {model.dim}")
    if via_kernel:
        idx = model.support_indices
        if idx.size == 0:
            return 0.0
        k = (model.training_Y[idx] @ y) ** 2
        return float((model.mu[idx] * model.labels[idx]) @ k)
    W = unvec(model.w, model.dim, model.dim)
    return float(y @ W @ y)


def predict_batch(model: SvmModel, Ys: np.ndarray, via_kernel: bool = True) -> np.ndarray:
    """Vectorized :func:`predict` over rows of an (L, N*m) array."""
    Ys = np.asarray(Ys, dtype=float)
    if Ys.ndim != 2 or Ys.shape[1] != model.dim:
        raise ValueError(f"expected rows of length {model.dim}, got shape {Ys.shape}")
    if via_kernel:
        idx = model.support_indices
        if idx.size == 0:
            return np.zeros(Ys.shape[0])
        G = (model.training_Y[idx] @ Ys.T) ** 2
        return (model.mu[idx] * model.labels[idx]) @ G
    return predict_batch_weights(model.w, Ys)


def predict_batch_weights(w: np.ndarray, Ys: np.ndarray) -> np.ndarray:
    """Decision values of a raw feature-space weight vector on trajectories."""
    Ys = np.asarray(Ys, dtype=float)
    d = Ys.shape[1]
    W = unvec(w, d, d)
    return np.einsum("ij,jk,ik->i", Ys, W, Ys)


def margin(w_or_model, data: Dataset) -> float:
    """Smallest scaled distance ``|w @ Phi_k| / ||w||`` over the dataset.

    Features are always taken from the normalized trajectories, matching
    the scale convention under which margins are comparable across
    classifiers.
    """
    if isinstance(w_or_model, SvmModel):
        w = w_or_model.w
    else:
        w = np.asarray(w_or_model, dtype=float).ravel()
    nw = float(np.linalg.norm(w))
    if nw == 0.0:
        raise ValueError("zero weight vector has no margin")
    Ybar = np.vstack([normalize(t).Y for t in data.items])
    vals = np.abs(predict_batch_weights(w, Ybar))
    return float(vals.min() / nw)


def margin_on_features(w, features: np.ndarray) -> float:
    """Margin evaluated directly on feature-space rows."""
    w = np.asarray(w, dtype=float).ravel()
    nw = float(np.linalg.norm(w))
    if nw == 0.0:
        raise ValueError("zero weight vector has no margin")
    F = np.asarray(features, dtype=float)
    return float(np.abs(F @ w).min() / nw)
