"""Temperature-scaled cosine matching head, NCE loss, and evaluation metrics."""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .autodiff import Tensor, div, log, mul, neg, scale, softmax, sqrt, tsum
from .container import FrameFeatureSequence

logger = logging.getLogger(__name__)

DEFAULT_TAU = 0.07
EVAL_MODES = ("view_average", "prob_average")


@dataclass
class MatchDistribution:
    """K-way matching distribution plus the raw cosine logits."""

    probs: Tensor  # (K,)
    logits: np.ndarray  # (K,) cosines before temperature

    @property
    def n_classes(self) -> int:
        return self.probs.shape[0]

    def predicted(self) -> int:
        return int(np.argmax(self.probs.data))


def match_probabilities(bank: Tensor, video: Tensor, tau: float = DEFAULT_TAU) -> MatchDistribution:
    """softmax over cosine(bank row, video) / tau."""
    if tau <= 0:
        raise ValueError(f"temperature must be positive, got {tau}")
    bank_norms = np.linalg.norm(bank.data, axis=1)
    zero_rows = np.flatnonzero(bank_norms == 0.0)
    if zero_rows.size:
        raise FloatingPointError(
            f"cosine undefined: text bank row {int(zero_rows[0])} has zero norm"
        )
    if np.linalg.norm(video.data) == 0.0:
        raise FloatingPointError("cosine undefined: video representation has zero norm")
    dots = tsum(mul(bank, video), axis=1)
    row_norms = sqrt(tsum(mul(bank, bank), axis=1))
    video_norm = sqrt(tsum(mul(video, video)))
    cosines = div(dots, mul(row_norms, video_norm))
    probs = softmax(scale(cosines, 1.0 / tau), axis=-1)
    return MatchDistribution(probs=probs, logits=cosines.data.copy())


def nce_loss(dist: MatchDistribution, label: int) -> Tensor:
    """-log p(label). Scalar, differentiable through the matching head."""
    k = dist.n_classes
    if not 0 <= label < k:
        raise IndexError(f"label {label} out of range for {k} classes")
    onehot = np.zeros(k)
    onehot[label] = 1.0
    return neg(tsum(mul(log(dist.probs), Tensor(onehot))))


def batch_nce_loss(dists: list[MatchDistribution], labels: list[int]) -> Tensor:
    losses = [nce_loss(d, lbl) for d, lbl in zip(dists, labels)]
    total = losses[0]
    for term in losses[1:]:
        total = total + term
    return scale(total, 1.0 / len(losses))


def topk_indices(probs: np.ndarray, k: int) -> list[int]:
    """Indices of the k highest probabilities; ties break toward the lower
    class index. k is clamped to the number of classes."""
    k = min(k, probs.shape[0])
    order = sorted(range(probs.shape[0]), key=lambda i: (-probs[i], i))
    return order[:k]


@dataclass
class EvalReport:
    top1: float
    top5: float
    per_class: list[float]
    views_per_video: int
    n_videos: int
    n_views: int
    mode: str
    rows: list[dict] = field(default_factory=list, repr=False)

    def __post_init__(self):
        if not 0.0 <= self.top1 <= 1.0 or not 0.0 <= self.top5 <= 1.0:
            raise ValueError("accuracies must lie in [0, 1]")
        if self.top5 < self.top1:
            raise ValueError("top5 cannot be below top1")

    def to_json(self) -> dict:
        return {
            "top1": self.top1,
            "top5": self.top5,
            "per_class": self.per_class,
            "views_per_video": self.views_per_video,
            "n_videos": self.n_videos,
            "n_views": self.n_views,
            "mode": self.mode,
        }

    def save_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def save_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(
                fh, fieldnames=["video_id", "view_id", "predicted", "label", "prob"])
            writer.writeheader()
            writer.writerows(self.rows)


def evaluate(records: list[FrameFeatureSequence],
             forward_fn: Callable[[FrameFeatureSequence], MatchDistribution],
             n_classes: int, mode: str = "view_average", k: int = 5) -> EvalReport:
    """Score a split.

    ``view_average``: every view counts as one sample. ``prob_average``:
    probabilities are averaged over each video's views first, then the
    video is predicted once.
    """
    if mode not in EVAL_MODES:
        raise ValueError(f"unknown eval mode {mode!r}; choose from {EVAL_MODES}")
    if not records:
        raise ValueError("cannot evaluate an empty split")

    per_view = []
    by_video: dict[str, list] = {}
    rows = []
    for rec in records:
        dist = forward_fn(rec)
        probs = dist.probs.data.copy()
        per_view.append((rec, probs))
        by_video.setdefault(rec.video_id, []).append((rec, probs))
        pred = topk_indices(probs, 1)[0]
        rows.append({
            "video_id": rec.video_id,
            "view_id": rec.view_id,
            "predicted": pred,
            "label": rec.label_index,
            "prob": float(probs[pred]),
        })

    view_counts = {len(v) for v in by_video.values()}
    if len(view_counts) > 1:
        logger.warning("uneven view counts per video (%s); evaluating with available views",
                       sorted(view_counts))

    if mode == "view_average":
        samples = [(rec.label_index, probs) for rec, probs in per_view]
    else:
        samples = []
        for views in by_video.values():
            label = views[0][0].label_index
            mean_probs = np.mean([p for _, p in views], axis=0)
            samples.append((label, mean_probs))

    hits1 = hitsk = 0
    class_hits = np.zeros(n_classes)
    class_totals = np.zeros(n_classes)
    for label, probs in samples:
        top = topk_indices(probs, k)
        if top[0] == label:
            hits1 += 1
            class_hits[label] += 1
        if label in top:
            hitsk += 1
        class_totals[label] += 1

    n = len(samples)
    per_class = [float(class_hits[c] / class_totals[c]) if class_totals[c] else 0.0
                 for c in range(n_classes)]
    return EvalReport(
        top1=hits1 / n,
        top5=hitsk / n,
        per_class=per_class,
        views_per_video=int(round(len(per_view) / len(by_video))),
        n_videos=len(by_video),
        n_views=len(per_view),
        mode=mode,
        rows=rows,
    )
