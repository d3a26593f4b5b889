"""Seeded synthetic feature datasets for desk-scale experiments.

Two regimes:

* ``static_separable`` -- each class has its own per-frame mean vector;
  a frame-mean centroid classifier solves it. Frames within a video are
  i.i.d. noise around the class mean.
* ``motion_only`` -- base frame multisets are generated per video slot and
  every class emits one video reordering the *same* multiset with its own
  class permutation. Mean-pooled frames are therefore identical across
  classes for each slot, so only temporal order carries the label.

  Each base multiset is static per-video content plus a ramp of distinct
  magnitudes along one dataset-wide direction. The ramp makes the frame
  ordering *recoverable* from the features: without such an anchor, a
  fresh random multiset in class-k order is distributionally identical to
  the same multiset in any other order, and no classifier (motion-aware
  or not) could generalize past chance.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .container import FrameFeatureSequence, write_feature_file
from .manifest import DatasetManifest, RecordRef, save_manifest

REGIMES = ("static_separable", "motion_only")

_ACTION_NAMES = [
    "walk", "run", "jump", "wave", "climb stairs", "brush hair", "throw",
    "catch", "kick ball", "swing", "push", "pull", "sit", "stand", "turn",
    "clap", "point", "ride bike", "pour", "drink", "eat", "laugh", "smile",
    "shake hands", "hug", "dive",
]


@dataclass
class SynthConfig:
    regime: str = "static_separable"
    n_classes: int = 5
    train_per_class: int = 20
    test_per_class: int = 10
    frames_per_clip: int = 8
    dim: int = 64
    seed: int = 0
    noise: float = 0.5
    ramp: float = 1.0  # motion_only: per-step magnitude of the temporal ramp

    def __post_init__(self):
        if self.regime not in REGIMES:
            raise ValueError(f"unknown regime {self.regime!r}; choose from {REGIMES}")
        if self.n_classes < 2:
            raise ValueError("need at least 2 classes")
        if self.frames_per_clip < 2:
            raise ValueError("need at least 2 frames per clip")
        if self.train_per_class < 1 or self.test_per_class < 1:
            raise ValueError("per-class counts must be positive")
        if self.dim < 1:
            raise ValueError("dim must be positive")
        if self.noise < 0:
            raise ValueError("noise must be nonnegative")


def class_names(n: int) -> list[str]:
    names = list(_ACTION_NAMES[:n])
    for k in range(len(names), n):
        names.append(f"action {k:02d}")
    return names


def _class_permutations(n_classes: int, frames: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Distinct frame orderings, one per class. Class 0 is identity and
    class 1 is reversal (maximally separated); further classes draw random
    distinct permutations."""
    perms = [np.arange(frames), np.arange(frames)[::-1].copy()]
    seen = {tuple(p) for p in perms}
    while len(perms) < n_classes:
        p = rng.permutation(frames)
        if tuple(p) not in seen:
            seen.add(tuple(p))
            perms.append(p)
    return perms[:n_classes]


def generate_records(cfg: SynthConfig) -> tuple[list[FrameFeatureSequence],
                                                list[FrameFeatureSequence],
                                                list[str]]:
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed))
    names = class_names(cfg.n_classes)
    train: list[FrameFeatureSequence] = []
    test: list[FrameFeatureSequence] = []

    if cfg.regime == "static_separable":
        means = rng.normal(0.0, 1.0, (cfg.n_classes, cfg.dim))
        for split, per_class, out in (("train", cfg.train_per_class, train),
                                      ("test", cfg.test_per_class, test)):
            for k in range(cfg.n_classes):
                for i in range(per_class):
                    frames = means[k] + cfg.noise * rng.normal(
                        0.0, 1.0, (cfg.frames_per_clip, cfg.dim))
                    out.append(FrameFeatureSequence(
                        video_id=f"{split}_c{k:02d}_v{i:03d}",
                        view_id=0,
                        frames=frames.astype(np.float32),
                        label_index=k,
                    ))
    else:  # motion_only
        perms = _class_permutations(cfg.n_classes, cfg.frames_per_clip, rng)
        direction = rng.normal(0.0, 1.0, cfg.dim)
        direction /= np.linalg.norm(direction)
        steps = np.arange(1, cfg.frames_per_clip + 1, dtype=np.float64)
        ramp = cfg.ramp * steps[:, None] * direction[None, :]
        for split, per_class, out in (("train", cfg.train_per_class, train),
                                      ("test", cfg.test_per_class, test)):
            for i in range(per_class):
                static = rng.normal(0.0, 1.0, cfg.dim)
                base = static[None, :] + ramp + cfg.noise * rng.normal(
                    0.0, 1.0, (cfg.frames_per_clip, cfg.dim))
                for k in range(cfg.n_classes):
                    out.append(FrameFeatureSequence(
                        video_id=f"{split}_s{i:03d}_c{k:02d}",
                        view_id=0,
                        frames=base[perms[k]].astype(np.float32),
                        label_index=k,
                    ))
    return train, test, names


def synthesize_dataset(cfg: SynthConfig, out_dir) -> DatasetManifest:
    """Write train/test containers plus manifest.json into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    train, test, names = generate_records(cfg)
    write_feature_file(out / "train.mcfv", train)
    write_feature_file(out / "test.mcfv", test)
    manifest = DatasetManifest(
        classes=names,
        dim=cfg.dim,
        splits={
            "train": [RecordRef("train.mcfv", i) for i in range(len(train))],
            "test": [RecordRef("test.mcfv", i) for i in range(len(test))],
        },
        provenance={
            "generator": "motionadapt.synth",
            "regime": cfg.regime,
            "seed": cfg.seed,
            "frames_per_clip": cfg.frames_per_clip,
            "noise": cfg.noise,
            "ramp": cfg.ramp,
        },
    )
    save_manifest(out / "manifest.json", manifest)
    return manifest


def frame_mean_centroid_accuracy(train: list[FrameFeatureSequence],
                                 test: list[FrameFeatureSequence],
                                 n_classes: int) -> float:
    """Nearest-class-centroid baseline on mean-pooled frames.

    This is the oracle that certifies the motion_only regime: temporal
    order is invisible to it, so it must score at chance there.
    """
    dim = train[0].dim
    sums = np.zeros((n_classes, dim))
    counts = np.zeros(n_classes)
    for rec in train:
        sums[rec.label_index] += rec.frames.mean(axis=0)
        counts[rec.label_index] += 1
    centroids = sums / counts[:, None]
    hits = 0
    for rec in test:
        d = np.linalg.norm(centroids - rec.frames.mean(axis=0), axis=1)
        if int(np.argmin(d)) == rec.label_index:
            hits += 1
    return hits / len(test)
