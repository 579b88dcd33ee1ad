"""K-means clustering of micro-trip features into driving-condition labels."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .cycles import TripFeatures
from .errors import FormatError, ValidationError

CLUSTER_FORMAT_VERSION = 1


@dataclass(frozen=True)
class ClusterModel:
    centers: np.ndarray  # (k, d) in normalized space
    feat_mean: np.ndarray
    feat_scale: np.ndarray
    inertia: float = 0.0
    inertia_history: tuple[float, ...] = field(default=(), compare=False)
    n_iter: int = 0

    def __post_init__(self):
        if self.centers.ndim != 2 or len(self.centers) < 1:
            raise ValidationError("centers must be a non-empty (k, d) array")
        if np.any(self.feat_scale <= 0):
            raise ValidationError("feature scales must be positive")

    @property
    def k(self) -> int:
        return len(self.centers)

    def transform(self, features: TripFeatures | np.ndarray) -> np.ndarray:
        x = features.as_array() if isinstance(features, TripFeatures) else np.asarray(features, dtype=float)
        return (x - self.feat_mean) / self.feat_scale

    def centers_raw(self) -> np.ndarray:
        return self.centers * self.feat_scale + self.feat_mean


def _as_matrix(features: Sequence[TripFeatures] | np.ndarray) -> np.ndarray:
    if isinstance(features, np.ndarray):
        return np.atleast_2d(features).astype(float)
    return np.array([f.as_array() for f in features], dtype=float)


def normalize(features: Sequence[TripFeatures] | np.ndarray):
    """Z-score each feature column (population std).

    Returns ``(points, mean, scale)``.
    """
    x = _as_matrix(features)
    if len(x) < 2:
        raise ValidationError("need at least 2 samples to normalize")
    mean = x.mean(axis=0)
    scale = x.std(axis=0)
    if np.any(scale <= 0):
        raise ValidationError(f"zero-variance feature column(s): {np.flatnonzero(scale <= 0).tolist()}")
    return (x - mean) / scale, mean, scale


def _sq_dists(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    return ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)


def _kmeanspp(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = len(points)
    centers = [points[rng.integers(n)]]
    d2 = ((points - centers[0]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            # all remaining points coincide with chosen centers
            idx = rng.integers(n)
        else:
            idx = rng.choice(n, p=d2 / total)
        centers.append(points[idx])
        d2 = np.minimum(d2, ((points - points[idx]) ** 2).sum(axis=1))
    return np.array(centers, dtype=float)


def _lloyd(points: np.ndarray, centers: np.ndarray, max_iter: int, tol: float):
    """Lloyd iterations from the given centers; returns (centers, inertia, history, n_iter)."""
    n, k = len(points), len(centers)
    history: list[float] = []
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        d2 = _sq_dists(points, centers)
        labels = d2.argmin(axis=1)
        history.append(float(d2[np.arange(n), labels].sum()))
        new = centers.copy()
        for j in range(k):
            members = points[labels == j]
            if len(members):
                new[j] = members.mean(axis=0)
        # Empty cluster: move its center to the point farthest from its own center.
        for j in range(k):
            if not np.any(labels == j):
                own = d2[np.arange(n), labels]
                far = int(own.argmax())
                new[j] = points[far]
                labels[far] = j
                d2[far, :] = 0.0
        shift = float(np.sqrt(((new - centers) ** 2).sum(axis=1)).max())
        centers = new
        if shift < tol:
            break
    inertia = float(_sq_dists(points, centers).min(axis=1).sum())
    history.append(inertia)
    return centers, inertia, history, n_iter


def kmeans_fit(
    points: np.ndarray,
    k: int = 3,
    seed: int = 0,
    max_iter: int = 300,
    tol: float = 1e-8,
    feat_mean: np.ndarray | None = None,
    feat_scale: np.ndarray | None = None,
    n_init: int = 20,
) -> ClusterModel:
    """Lloyd's algorithm with k-means++ seeding, best of ``n_init`` restarts.

    ``points`` are expected in normalized space; pass the normalization
    constants so they are stored with the model. Restarts draw their seeds
    from one stream, so the result depends only on ``seed``; ties keep the
    earliest restart.
    """
    points = np.asarray(points, dtype=float)
    n, d = points.shape
    if n < k:
        raise ValueError(f"need at least k={k} points, got {n}")
    if n_init < 1:
        raise ValueError("n_init must be at least 1")
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(n_init):
        run = _lloyd(points, _kmeanspp(points, k, rng), max_iter, tol)
        if best is None or run[1] < best[1]:
            best = run
    centers, inertia, history, n_iter = best
    return ClusterModel(
        centers=centers,
        feat_mean=np.zeros(d) if feat_mean is None else np.asarray(feat_mean, dtype=float),
        feat_scale=np.ones(d) if feat_scale is None else np.asarray(feat_scale, dtype=float),
        inertia=inertia,
        inertia_history=tuple(history),
        n_iter=n_iter,
    )


def sort_by_speed(model: ClusterModel) -> ClusterModel:
    """Relabel clusters so center average speed increases with index."""
    order = np.argsort(model.centers[:, 0], kind="stable")
    return ClusterModel(
        centers=model.centers[order],
        feat_mean=model.feat_mean,
        feat_scale=model.feat_scale,
        inertia=model.inertia,
        inertia_history=model.inertia_history,
        n_iter=model.n_iter,
    )


def assign_normalized(model: ClusterModel, point: np.ndarray) -> int:
    d2 = ((model.centers - point) ** 2).sum(axis=1)
    return int(np.argmin(d2))  # argmin returns the first minimum


def assign(model: ClusterModel, feature: TripFeatures | np.ndarray) -> int:
    """Nearest-center label for a raw (unnormalized) feature vector."""
    return assign_normalized(model, model.transform(feature))


def fit_features(features: Sequence[TripFeatures], k: int = 3, seed: int = 0, **kw) -> tuple[ClusterModel, np.ndarray]:
    """Normalize, cluster and relabel by speed; returns the model and labels."""
    pts, mean, scale = normalize(features)
    model = sort_by_speed(kmeans_fit(pts, k=k, seed=seed, feat_mean=mean, feat_scale=scale, **kw))
    labels = np.array([assign_normalized(model, p) for p in pts])
    return model, labels


def save_model(model: ClusterModel, path: str | Path) -> None:
    """Write the cluster model as a small versioned text file.

    Layout::

        itemhev-cluster-model <version>
        k <k>
        dim <d>
        feat_mean <d floats>
        feat_scale <d floats>
        inertia <float>
        center <d floats>      (k lines, row-major)
    """
    fmt = lambda arr: " ".join(repr(float(x)) for x in arr)  # noqa: E731
    lines = [
        f"itemhev-cluster-model {CLUSTER_FORMAT_VERSION}",
        f"k {model.k}",
        f"dim {model.centers.shape[1]}",
        f"feat_mean {fmt(model.feat_mean)}",
        f"feat_scale {fmt(model.feat_scale)}",
        f"inertia {model.inertia!r}",
    ]
    lines += [f"center {fmt(c)}" for c in model.centers]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_model(path: str | Path) -> ClusterModel:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    try:
        tag, version = lines[0].split()
        if tag != "itemhev-cluster-model":
            raise FormatError(f"{path}: not a cluster model file")
        if int(version) != CLUSTER_FORMAT_VERSION:
            raise FormatError(f"{path}: unsupported version {version}")
        fields = {}
        centers = []
        for line in lines[1:]:
            key, *vals = line.split()
            if key == "center":
                centers.append([float(v) for v in vals])
            else:
                fields[key] = vals
        k, dim = int(fields["k"][0]), int(fields["dim"][0])
        model = ClusterModel(
            centers=np.array(centers, dtype=float),
            feat_mean=np.array(fields["feat_mean"], dtype=float),
            feat_scale=np.array(fields["feat_scale"], dtype=float),
            inertia=float(fields["inertia"][0]),
        )
    except FormatError:
        raise
    except (IndexError, KeyError, ValueError) as exc:
        raise FormatError(f"{path}: malformed cluster model ({exc})") from exc
    if model.centers.shape != (k, dim) or model.feat_mean.shape != (dim,) or model.feat_scale.shape != (dim,):
        raise FormatError(f"{path}: shape mismatch")
    return model
