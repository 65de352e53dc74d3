"""Trajectory generation, normalization, labelling and dataset persistence."""

from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import dataclass

import numpy as np

from .sysmodel import LinearSystem, observability_matrix

__all__ = [
    "ZeroTrajectoryError",
    "Trajectory",
    "Dataset",
    "simulate",
    "normalize",
    "random_dataset",
    "dataset_to_json",
    "dataset_from_json",
    "dataset_to_csv",
    "fingerprint",
]

LABEL_SYS1 = 1
LABEL_SYS2 = -1

MAX_REDRAWS = 100


class ZeroTrajectoryError(ValueError):
    """Operation undefined on an identically zero output sequence."""


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Stacked output sequence of N samples, optionally labelled.

    ``Y`` holds col(y(0), ..., y(N-1)) flattened to length N*m.  The label,
    when present, is +1 for the first system and -1 for the second.
    """

    Y: np.ndarray
    N: int
    m: int
    label: int | None = None

    def __post_init__(self):
        Y = np.asarray(self.Y, dtype=float).ravel()
        if Y.size != self.N * self.m:
            raise ValueError(
                f"Y has length {Y.size}, expected N*m = {self.N * self.m}"
            )
        if not np.all(np.isfinite(Y)):
            raise ValueError("trajectory contains non-finite values")
        if self.label not in (None, 1, -1):
            raise ValueError(f"label must be +1, -1 or None, got {self.label!r}")
        object.__setattr__(self, "Y", Y)

    @property
    def is_zero(self) -> bool:
        return not np.any(self.Y)


def simulate(sys: LinearSystem, x0, N: int) -> Trajectory:
    """Zero-input response from x0, stacked output-first.

    Computed by iterating the state update; agrees with the observability
    matrix applied to x0.  A zero result is returned as-is (``is_zero`` set),
    callers decide whether to reject it.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    x = np.asarray(x0, dtype=float).ravel()
    if x.size != sys.n:
        raise ValueError(f"x0 has length {x.size}, expected n={sys.n}")
    if not np.all(np.isfinite(x)):
        raise ValueError("x0 contains non-finite values")
    m = sys.m
    Y = np.empty(N * m)
    for t in range(N):
        Y[t * m : (t + 1) * m] = sys.C @ x
        if t + 1 < N:
            x = sys.A @ x
    return Trajectory(Y=Y, N=N, m=m)


def normalize(t: Trajectory) -> Trajectory:
    """Scale to unit Euclidean norm; label preserved."""
    nrm = float(np.linalg.norm(t.Y))
    if nrm == 0.0:
        raise ZeroTrajectoryError("cannot normalize a zero trajectory")
    return Trajectory(Y=t.Y / nrm, N=t.N, m=t.m, label=t.label)


@dataclass(frozen=True, eq=False)
class Dataset:
    """Ordered labelled trajectories sharing one horizon and output size."""

    items: tuple[Trajectory, ...]
    seed: int | None = None
    source: tuple[str, str] | None = None

    def __post_init__(self):
        items = tuple(self.items)
        if not items:
            raise ValueError("dataset must contain at least one trajectory")
        N, m = items[0].N, items[0].m
        for k, t in enumerate(items):
            if (t.N, t.m) != (N, m):
                raise ValueError(f"item {k} has shape ({t.N}, {t.m}) != ({N}, {m})")
            if t.label not in (1, -1):
                raise ValueError(f"item {k} must carry a +1/-1 label")
            if t.is_zero:
                raise ZeroTrajectoryError(f"item {k} is a zero trajectory")
        object.__setattr__(self, "items", items)

    def __len__(self) -> int:
        return len(self.items)

    @property
    def N(self) -> int:
        return self.items[0].N

    @property
    def m(self) -> int:
        return self.items[0].m

    def labels(self) -> np.ndarray:
        return np.array([t.label for t in self.items], dtype=float)

    def stacked_Y(self) -> np.ndarray:
        """Trajectories as rows of an (L, N*m) array."""
        return np.vstack([t.Y for t in self.items])


def _item_rng(seed: int, class_idx: int, item_idx: int) -> np.random.Generator:
    # One portable PCG64 stream per (seed, class, item): dataset content is
    # independent of generation order, so parallel generation stays stable.
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(class_idx, item_idx))
    return np.random.default_rng(ss)


def random_dataset(
    sys1: LinearSystem,
    sys2: LinearSystem,
    per_class: int,
    N: int,
    sigma2: float,
    seed: int,
) -> Dataset:
    """Balanced dataset from i.i.d. Gaussian initial conditions.

    Each initial state coordinate is drawn N(0, sigma2).  Zero trajectories
    are rejected and redrawn from the same per-item stream, up to
    ``MAX_REDRAWS`` attempts.  Deterministic given the seed.
    """
    if per_class < 1:
        raise ValueError("per_class must be >= 1")
    if sigma2 <= 0:
        raise ValueError("sigma2 must be positive")
    if seed < 0:
        raise ValueError("seed must be a nonnegative integer")
    if sys1.m != sys2.m:
        raise ValueError(f"output dimensions differ: {sys1.m} vs {sys2.m}")
    std = float(np.sqrt(sigma2))
    items: list[Trajectory] = []
    for class_idx, (sys, label) in enumerate(((sys1, LABEL_SYS1), (sys2, LABEL_SYS2))):
        O = observability_matrix(sys, N).O
        rngs = [_item_rng(seed, class_idx, k) for k in range(per_class)]
        X0 = np.column_stack([rng.normal(0.0, std, size=sys.n) for rng in rngs])
        Ys = O @ X0
        for k in range(per_class):
            Y = Ys[:, k]
            attempts = 1
            while not np.any(Y):
                if attempts >= MAX_REDRAWS:
                    raise RuntimeError(
                        f"failed to draw a nonzero trajectory for class "
                        f"{class_idx + 1} item {k} after {MAX_REDRAWS} attempts"
                    )
                Y = O @ rngs[k].normal(0.0, std, size=sys.n)
                attempts += 1
            items.append(Trajectory(Y=Y, N=N, m=sys.m, label=label))
    return Dataset(items=tuple(items), seed=seed, source=("sys1", "sys2"))


def dataset_to_json(data: Dataset) -> str:
    doc = {
        "N": data.N,
        "m": data.m,
        "seed": data.seed,
        "items": [{"label": t.label, "Y": t.Y.tolist()} for t in data.items],
    }
    return json.dumps(doc)


def dataset_from_json(text: str) -> Dataset:
    doc = json.loads(text)
    items = tuple(
        Trajectory(
            Y=np.asarray(item["Y"], float),
            N=int(doc["N"]),
            m=int(doc["m"]),
            label=int(item["label"]),
        )
        for item in doc["items"]
    )
    return Dataset(items=items, seed=doc.get("seed"))


def dataset_to_csv(data: Dataset, path=None) -> str:
    """CSV with columns label, y_0 ... y_{Nm-1}; 17 significant digits."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["label"] + [f"y_{i}" for i in range(data.N * data.m)])
    for t in data.items:
        writer.writerow([t.label] + [format(v, ".17g") for v in t.Y])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text


def fingerprint(data: Dataset) -> str:
    """Stable content hash used to tie trained models to their data."""
    return hashlib.sha256(dataset_to_json(data).encode()).hexdigest()
