"""Training loop, ablation matrix, parameter accounting, and gradient checks."""

from __future__ import annotations

import csv
import dataclasses
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tape, Tensor, backward, no_grad
from .container import FrameFeatureSequence
from .manifest import DatasetManifest, load_split
from .model import ModelState, TrainConfig, forward
from .objective import EvalReport, batch_nce_loss, evaluate
from .optim import MomentumSGD, cosine_lr

logger = logging.getLogger(__name__)

# Ablation rows mirror the studied toggle combinations:
# (name, motion_stream, map_enabled, mcb_enabled)
ABLATION_ROWS = [
    ("baseline", False, False, False),
    ("mcb_only", False, False, True),
    ("mmb_only", True, False, False),
    ("mmb_map", True, True, False),
    ("full", True, True, True),
]


@dataclass
class TraceEntry:
    step: int
    lr: float
    loss: float


def subsample_shots(records: list[FrameFeatureSequence], shots: int,
                    seed: int) -> list[FrameFeatureSequence]:
    """Keep at most ``shots`` videos per class (few-shot protocol)."""
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0xF5)))
    by_class: dict[int, list[FrameFeatureSequence]] = {}
    for rec in records:
        by_class.setdefault(rec.label_index, []).append(rec)
    kept = []
    for label in sorted(by_class):
        group = by_class[label]
        if len(group) > shots:
            idx = rng.choice(len(group), size=shots, replace=False)
            group = [group[i] for i in sorted(idx)]
        kept.extend(group)
    return kept


def train_on_records(records: list[FrameFeatureSequence], classes: list[str],
                     dim: int, config: TrainConfig,
                     state: ModelState | None = None
                     ) -> tuple[ModelState, list[TraceEntry]]:
    """Core SGD loop. Fully determined by (seed, config, data)."""
    if not records:
        raise ValueError("training split is empty")
    if config.shots is not None:
        records = subsample_shots(records, config.shots, config.seed)
    if state is None:
        state = ModelState.initialize(config, dim, classes)
    params = state.trainable_tensors(config)
    opt = MomentumSGD(params, config.momentum)
    shuffle_rng = np.random.default_rng(np.random.SeedSequence((config.seed, 0x5F)))

    n = len(records)
    steps_per_epoch = math.ceil(n / config.batch_size)
    total_steps = config.max_steps or config.epochs * steps_per_epoch
    trace: list[TraceEntry] = []
    step = 0
    while step < total_steps:
        order = shuffle_rng.permutation(n)
        for start in range(0, n, config.batch_size):
            if step >= total_steps:
                break
            batch = [records[i] for i in order[start:start + config.batch_size]]
            lr = cosine_lr(step, total_steps, config.lr0)
            opt.zero_grad()
            with Tape() as tape:
                dists = [forward(rec, state, config) for rec in batch]
                loss = batch_nce_loss(dists, [rec.label_index for rec in batch])
            backward(tape, loss)
            if lr > 0.0:
                opt.step(lr)
            trace.append(TraceEntry(step=step, lr=lr, loss=loss.item()))
            state.step += 1
            step += 1
    return state, trace


def train(manifest: DatasetManifest, base_dir, config: TrainConfig,
          split: str = "train") -> tuple[ModelState, list[TraceEntry]]:
    records = load_split(manifest, base_dir, split)
    return train_on_records(records, manifest.classes, manifest.dim, config)


def save_loss_trace(path, trace: list[TraceEntry]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "lr", "loss"])
        for entry in trace:
            writer.writerow([entry.step, repr(entry.lr), repr(entry.loss)])


def evaluate_state(records: list[FrameFeatureSequence], state: ModelState,
                   config: TrainConfig | None = None, k: int = 5) -> EvalReport:
    cfg = config or state.config
    with no_grad():
        return evaluate(records, lambda rec: forward(rec, state, cfg, training=False),
                        n_classes=len(state.classes), mode=cfg.eval_mode, k=k)


def ablate(manifest: DatasetManifest, base_dir, config: TrainConfig
           ) -> list[tuple[str, TrainConfig, EvalReport]]:
    """Train and evaluate each toggle row with identical seed and budget."""
    train_records = load_split(manifest, base_dir, "train")
    test_records = load_split(manifest, base_dir, "test")
    results = []
    for name, motion, map_on, mcb in ABLATION_ROWS:
        row_cfg = dataclasses.replace(config, motion_stream=motion,
                                      map_enabled=map_on, mcb_enabled=mcb)
        state, _ = train_on_records(train_records, manifest.classes, manifest.dim, row_cfg)
        report = evaluate_state(test_records, state, row_cfg)
        logger.info("ablation %-9s top1=%.3f top5=%.3f", name, report.top1, report.top5)
        results.append((name, row_cfg, report))
    return results


def save_ablation_csv(path, results: list[tuple[str, TrainConfig, EvalReport]]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["row", "motion_stream", "map_enabled", "mcb_enabled",
                         "top1", "top5", "n_videos", "n_views"])
        for name, cfg, report in results:
            writer.writerow([name, cfg.motion_stream, cfg.map_enabled, cfg.mcb_enabled,
                             repr(report.top1), repr(report.top5),
                             report.n_videos, report.n_views])


# ---------------------------------------------------------------------------
# parameter accounting


def attention_block_param_count(dim: int, expansion: int) -> int:
    hidden = expansion * dim
    projections = 4 * (dim * dim + dim)
    norms = 4 * dim
    ffn = dim * hidden + hidden + hidden * dim + dim
    return projections + norms + ffn


def cross_attention_param_count(dim: int) -> int:
    return 4 * (dim * dim + dim) + 2 * dim


def closed_form_counts(config: TrainConfig, dim: int) -> dict[str, int]:
    """Exact trainable parameter count per group from the config dimensions."""
    lmax = sum(config.frames_per_clip - d for d in range(1, config.max_step + 1))
    block = attention_block_param_count(dim, config.ffn_expansion)
    mid = config.adapter_mid_for(dim)
    return {
        "mmb": 2 * config.depth * block + lmax * dim + config.frames_per_clip * dim + 1,
        "prompts": config.prompt_len * dim,
        "adapter": dim * mid + mid + mid * dim + dim,
        "mcb": 2 * cross_attention_param_count(dim),
    }


def count_params(state: ModelState) -> dict:
    """Closed-form and walked counts per trainable group, plus frozen totals.

    The two counts are computed independently (formula vs tensor walk) and
    must agree.
    """
    formulas = closed_form_counts(state.config, state.dim)
    walked = {name: sum(t.size for _, t in group)
              for name, group in state.group_tensors().items()}
    for name in formulas:
        if formulas[name] != walked[name]:
            raise AssertionError(
                f"parameter count mismatch for {name}: "
                f"closed form {formulas[name]} vs walk {walked[name]}")
    frozen = sum(t.size for _, t in state.frozen_tensors())
    return {
        "groups": {name: {"closed_form": formulas[name], "walked": walked[name]}
                   for name in formulas},
        "trainable_total": sum(formulas.values()),
        "frozen_total": frozen,
    }


# ---------------------------------------------------------------------------
# gradient checking


@dataclass
class GradCheckReport:
    passed: bool
    tolerance: float
    per_group: dict[str, dict] = field(default_factory=dict)
    seconds: float = 0.0

    def worst(self) -> float:
        return max((g["max_rel_err"] for g in self.per_group.values()), default=0.0)


def randomize_trainable(state: ModelState, rng: np.random.Generator,
                        std: float = 0.1) -> None:
    """Move every trainable tensor off its (often zero) init so gradients
    are generic; norm gains stay near 1."""
    for group in state.trainable_groups().values():
        for name, t in group:
            if name.endswith("gain"):
                t.data[...] = 1.0 + std * rng.normal(0.0, 1.0, t.shape)
            else:
                t.data[...] = std * rng.normal(0.0, 1.0, t.shape)


def _relative_error(a: float, f: float) -> float:
    return abs(a - f) / max(1.0, abs(a), abs(f))


def grad_check(config: TrainConfig, tolerance: float = 1e-4, dim: int = 16,
               n_classes: int = 3, n_videos: int = 2, seed: int = 0,
               sample_per_tensor: int = 32, fd_step: float = 1e-5) -> GradCheckReport:
    """Analytic gradients vs central finite differences on a small random batch.

    Every trainable group is covered; within each tensor a seeded random
    subset of up to ``sample_per_tensor`` coordinates is probed (exhaustive
    probing of every scalar is done by the per-op unit tests; end to end it
    would not fit the runtime budget). Frozen groups carry no gradient and
    are absent from the report.
    """
    t0 = time.perf_counter()
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0x6D)))
    classes = [f"action {k:02d}" for k in range(n_classes)]
    state = ModelState.initialize(config, dim, classes)
    randomize_trainable(state, rng)
    frames = [rng.normal(0.0, 1.0, (config.frames_per_clip, dim)) for _ in range(n_videos)]
    labels = [int(rng.integers(n_classes)) for _ in range(n_videos)]

    def batch_loss() -> Tensor:
        dists = [forward(f, state, config) for f in frames]
        return batch_nce_loss(dists, labels)

    for t in state.trainable_tensors(config):
        t.zero_grad()
    with Tape() as tape:
        loss = batch_loss()
    backward(tape, loss)

    report = GradCheckReport(passed=True, tolerance=tolerance)
    for group_name, group in state.trainable_groups(config).items():
        worst = 0.0
        worst_at = ""
        checked = 0
        for tensor_name, t in group:
            flat = t.data.reshape(-1)
            grad = (t.grad if t.grad is not None else np.zeros_like(t.data)).reshape(-1)
            n_coords = flat.size
            if n_coords > sample_per_tensor:
                coords = rng.choice(n_coords, size=sample_per_tensor, replace=False)
            else:
                coords = np.arange(n_coords)
            for c in coords:
                keep = flat[c]
                with no_grad():
                    flat[c] = keep + fd_step
                    hi = batch_loss().item()
                    flat[c] = keep - fd_step
                    lo = batch_loss().item()
                flat[c] = keep
                fd = (hi - lo) / (2.0 * fd_step)
                err = _relative_error(float(grad[c]), fd)
                checked += 1
                if err > worst:
                    worst = err
                    worst_at = f"{tensor_name}[{int(c)}]"
        ok = worst < tolerance if tolerance > 0 else False
        report.per_group[group_name] = {
            "max_rel_err": worst,
            "worst_at": worst_at,
            "checked": checked,
            "passed": ok,
        }
        if not ok:
            report.passed = False
    report.seconds = time.perf_counter() - t0
    return report
