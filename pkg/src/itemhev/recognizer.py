"""Driving-condition classifier trained on K-means labels, plus streaming use."""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import nn
from .clustering import ClusterModel, load_model, save_model
from .cycles import DriveCycle, TripFeatures, extract_features, segment, window_samples
from .errors import TrainingFailure, ValidationError

N_CLASSES = 3


@dataclass(frozen=True)
class RecognitionDataset:
    inputs: np.ndarray  # normalized features, (n, 2)
    labels: np.ndarray  # (n,)
    train_idx: np.ndarray
    val_idx: np.ndarray
    seed: int

    @property
    def x_train(self):
        return self.inputs[self.train_idx]

    @property
    def y_train(self):
        return self.labels[self.train_idx]

    @property
    def x_val(self):
        return self.inputs[self.val_idx]

    @property
    def y_val(self):
        return self.labels[self.val_idx]


def build_dataset(
    features: Sequence[TripFeatures] | np.ndarray,
    labels: Sequence[int],
    cluster_model: ClusterModel,
    val_fraction: float = 0.2,
    seed: int = 0,
    n_classes: int = N_CLASSES,
) -> RecognitionDataset:
    """Stratified shuffle split with the cluster model's normalization applied.

    The validation size is ``round(n * val_fraction)``, shared out across
    classes by largest remainder with at least one sample per class.
    """
    if not 0.0 < val_fraction < 1.0:
        raise ValueError(f"val_fraction must lie in (0, 1), got {val_fraction}")
    raw = (
        np.array([f.as_array() for f in features])
        if not isinstance(features, np.ndarray)
        else np.asarray(features, dtype=float)
    )
    labels = np.asarray(labels, dtype=int)
    if len(raw) != len(labels):
        raise ValidationError("features and labels differ in length")
    if len(labels) < 10:
        raise ValidationError(f"need at least 10 labelled trips, got {len(labels)}")
    if np.any((labels < 0) | (labels >= n_classes)):
        raise ValidationError("label out of range")
    counts = np.bincount(labels, minlength=n_classes)
    if np.any(counts < 2):
        raise ValidationError(f"every class needs at least 2 trips, counts={counts.tolist()}")

    n_val = int(round(len(labels) * val_fraction))
    quota = counts * n_val / len(labels)
    per_class = np.clip(np.floor(quota).astype(int), 1, counts - 1)
    order = np.argsort(-(quota - np.floor(quota)), kind="stable")
    i = 0
    while per_class.sum() < n_val and i < 10 * n_classes:
        c = order[i % n_classes]
        if per_class[c] < counts[c] - 1:
            per_class[c] += 1
        i += 1
    while per_class.sum() > n_val:
        c = int(np.argmax(per_class))
        per_class[c] -= 1

    rng = np.random.default_rng(seed)
    val_parts, train_parts = [], []
    for c in range(n_classes):
        idx = rng.permutation(np.flatnonzero(labels == c))
        val_parts.append(idx[:per_class[c]])
        train_parts.append(idx[per_class[c]:])
    return RecognitionDataset(
        inputs=(raw - cluster_model.feat_mean) / cluster_model.feat_scale,
        labels=labels,
        train_idx=rng.permutation(np.concatenate(train_parts)),
        val_idx=np.sort(np.concatenate(val_parts)),
        seed=seed,
    )


@dataclass
class TrainReport:
    train_accuracy: float
    val_accuracy: float
    final_loss: float
    epochs: int
    loss_curve: list[float] = field(default_factory=list)


def accuracy(net: nn.Mlp, x: np.ndarray, y: np.ndarray) -> float:
    if len(y) == 0:
        return float("nan")
    return float(np.mean(nn.forward(net, x).argmax(axis=1) == y))


def train_classifier(
    ds: RecognitionDataset,
    epochs: int = 400,
    batch: int = 32,
    lr: float = 5e-3,
    seed: int = 0,
    hidden: Sequence[int] = (16, 16),
) -> tuple[nn.Mlp, TrainReport]:
    """Minibatch cross-entropy training with Adam."""
    n_in = ds.inputs.shape[1]
    n_out = max(N_CLASSES, int(ds.labels.max()) + 1)
    net = nn.Mlp.create((n_in, *hidden, n_out), seed=seed, output_activation="softmax")
    opt = nn.AdamState.for_net(net, lr=lr)
    rng = np.random.default_rng(seed + 1)
    x, y = ds.x_train, ds.y_train
    onehot = np.eye(n_out)[y]
    curve: list[float] = []
    loss = float("nan")
    for _ in range(epochs):
        perm = rng.permutation(len(y))
        total = 0.0
        for start in range(0, len(y), batch):
            sel = perm[start:start + batch]
            loss, grads = nn.backward(net, x[sel], onehot[sel], loss="ce")
            if not math.isfinite(loss):
                raise TrainingFailure(f"non-finite cross-entropy at step {opt.step}: {loss}")
            nn.adam_step(net, grads, opt)
            total += loss * len(sel)
        curve.append(total / len(y))
    report = TrainReport(
        train_accuracy=accuracy(net, x, y),
        val_accuracy=accuracy(net, ds.x_val, ds.y_val),
        final_loss=curve[-1] if curve else float("nan"),
        epochs=epochs,
        loss_curve=curve,
    )
    return net, report


@dataclass
class Recognizer:
    """Trained cluster model and classifier used for offline classification."""

    cluster_model: ClusterModel
    net: nn.Mlp
    window_s: float = 20.0
    update_mode: str = "sliding"

    def classify_features(self, feat: TripFeatures) -> int:
        x = self.cluster_model.transform(feat)
        return int(np.argmax(nn.forward(self.net, x)))

    def classify_window(self, samples: np.ndarray, dt: float) -> int:
        return self.classify_features(extract_features(samples, dt))

    def classify_cycle(self, cycle: DriveCycle) -> list[int]:
        """Offline label of every micro-trip of a cycle."""
        return [self.classify_window(t.samples, cycle.dt) for t in segment(cycle, self.window_s)]

    def stream(self, dt: float, mode: str | None = None) -> "SlidingRecognizer":
        return SlidingRecognizer(self, dt, mode or self.update_mode)

    def save(self, directory: str | Path) -> None:
        """Bundle layout: ``clusters.txt``, ``classifier.mlp``, ``manifest.json``."""
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        save_model(self.cluster_model, d / "clusters.txt")
        nn.save(self.net, d / "classifier.mlp")
        manifest = {
            "format": "itemhev-recognizer",
            "version": 1,
            "window_s": self.window_s,
            "update_mode": self.update_mode,
            "files": ["clusters.txt", "classifier.mlp"],
        }
        (d / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, directory: str | Path) -> "Recognizer":
        d = Path(directory)
        manifest = json.loads((d / "manifest.json").read_text(encoding="utf-8"))
        return cls(
            cluster_model=load_model(d / "clusters.txt"),
            net=nn.load(d / "classifier.mlp"),
            window_s=float(manifest["window_s"]),
            update_mode=manifest["update_mode"],
        )


class SlidingRecognizer:
    """Per-episode streaming recognizer over the trailing speed window.

    In ``sliding`` mode the label is refreshed every step once the buffer is
    full; in ``boundary`` mode only when a full non-overlapping window has
    been collected since the previous update. Label 0 is reported until the
    first full window.
    """

    def __init__(self, recognizer: Recognizer, dt: float, mode: str = "sliding"):
        if mode not in ("sliding", "boundary"):
            raise ValueError(f"unknown update mode {mode!r}")
        self.recognizer = recognizer
        self.dt = dt
        self.mode = mode
        self.capacity = window_samples(recognizer.window_s, dt)
        self.buffer: deque[float] = deque(maxlen=self.capacity)
        self.current_label = 0
        self._count = 0

    def reset(self) -> None:
        self.buffer.clear()
        self.current_label = 0
        self._count = 0

    def step(self, v: float) -> int:
        self.buffer.append(float(v))
        self._count += 1
        full = len(self.buffer) == self.capacity
        if full and (self.mode == "sliding" or self._count % self.capacity == 0):
            self.current_label = self.recognizer.classify_window(np.fromiter(self.buffer, float, self.capacity), self.dt)
        return self.current_label


def recognize_step(r: SlidingRecognizer, v: float, dt: float | None = None) -> int:
    if dt is not None and abs(dt - r.dt) > 1e-12:
        raise ValueError(f"step dt {dt} differs from recognizer dt {r.dt}")
    return r.step(v)


def build_recognizer(
    cycles: Sequence[DriveCycle],
    window_s: float = 20.0,
    k: int = 3,
    cluster_seed: int = 0,
    val_fraction: float = 0.2,
    split_seed: int = 0,
    train_seed: int = 0,
    **train_kw,
) -> tuple[Recognizer, TrainReport, RecognitionDataset]:
    """Segment, cluster, and train the classifier in one go."""
    from .clustering import fit_features

    feats = [extract_features(t, c.dt) for c in cycles for t in segment(c, window_s)]
    model, labels = fit_features(feats, k=k, seed=cluster_seed)
    ds = build_dataset(feats, labels, model, val_fraction=val_fraction, seed=split_seed, n_classes=k)
    net, report = train_classifier(ds, seed=train_seed, **train_kw)
    return Recognizer(model, net, window_s), report, ds
