"""Two-stream video encoder over frozen frame features.

The motion stream attends over pairwise frame-representation differences,
the spatial stream attends across the frames themselves, and the pooled
streams are fused into one video-level vector. The motion branch enters
the fusion through a trainable scalar gate that starts at zero, so a
freshly constructed encoder is exactly the spatial-only model.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor, add, avg_pool_rows, gather_rows, mul, sub
from .nn import AttentionBlockParams, attention_block


@dataclass
class PairSelection:
    """All frame index pairs (i, j), 1-based, with 1 <= j - i <= max_step."""

    frames: int
    max_step: int
    pairs: list[tuple[int, int]]

    @property
    def count(self) -> int:
        return len(self.pairs)


def pair_count(frames: int, max_step: int) -> int:
    """Closed form: sum over d = 1..max_step of (frames - d)."""
    return sum(frames - d for d in range(1, max_step + 1))


def select_pairs(frames: int, max_step: int) -> PairSelection:
    if frames < 2:
        raise ValueError(f"need at least 2 frames, got {frames}")
    if not 1 <= max_step <= frames - 1:
        raise ValueError(
            f"max_step must be in [1, frames-1] = [1, {frames - 1}], got {max_step}"
        )
    pairs = [(i, j)
             for i in range(1, frames + 1)
             for j in range(i + 1, min(i + max_step, frames) + 1)]
    sel = PairSelection(frames=frames, max_step=max_step, pairs=pairs)
    assert sel.count == pair_count(frames, max_step)
    return sel


def compute_differences(frames: Tensor, sel: PairSelection) -> Tensor:
    """Row k = frames[j_k] - frames[i_k] in the canonical pair order."""
    if frames.shape[0] != sel.frames:
        raise ValueError(
            f"frame count {frames.shape[0]} does not match selection built for {sel.frames}"
        )
    late = gather_rows(frames, [j - 1 for _, j in sel.pairs])
    early = gather_rows(frames, [i - 1 for i, _ in sel.pairs])
    return sub(late, early)


@dataclass
class MmbParams:
    """Parameters of the two streams plus fusion gate."""

    motion_blocks: list[AttentionBlockParams]
    spatial_blocks: list[AttentionBlockParams]
    pos_motion: Tensor  # (Lmax, D), zero-init
    pos_spatial: Tensor  # (Tmax, D), zero-init
    fusion_gate: Tensor  # scalar, zero-init

    @classmethod
    def create(cls, dim: int, frames: int, max_step: int, depth: int, heads: int,
               expansion: int, rng: np.random.Generator,
               trainable: bool = True) -> "MmbParams":
        lmax = pair_count(frames, max_step)
        return cls(
            motion_blocks=[AttentionBlockParams.create(dim, heads, expansion, rng,
                                                       trainable=trainable)
                           for _ in range(depth)],
            spatial_blocks=[AttentionBlockParams.create(dim, heads, expansion, rng,
                                                        trainable=trainable)
                            for _ in range(depth)],
            pos_motion=Tensor(np.zeros((lmax, dim)), requires_grad=trainable,
                              name="pos_motion"),
            pos_spatial=Tensor(np.zeros((frames, dim)), requires_grad=trainable,
                               name="pos_spatial"),
            fusion_gate=Tensor(0.0, requires_grad=trainable, name="fusion_gate"),
        )

    def tensors(self, prefix: str = "mmb.") -> list[tuple[str, Tensor]]:
        out = []
        for i, blk in enumerate(self.motion_blocks):
            out.extend(blk.tensors(f"{prefix}motion{i}."))
        for i, blk in enumerate(self.spatial_blocks):
            out.extend(blk.tensors(f"{prefix}spatial{i}."))
        out.append((f"{prefix}pos_motion", self.pos_motion))
        out.append((f"{prefix}pos_spatial", self.pos_spatial))
        out.append((f"{prefix}fusion_gate", self.fusion_gate))
        return out


def _run_stream(x: Tensor, blocks: list[AttentionBlockParams], pos: Tensor) -> Tensor:
    n = x.shape[0]
    if pos.shape[0] < n:
        raise ValueError(
            f"positional table has {pos.shape[0]} rows, stream input needs {n}"
        )
    h = add(x, gather_rows(pos, list(range(n))))
    for blk in blocks:
        h = attention_block(h, h, blk)
    return h


def motion_stream(diffs: Tensor, params: MmbParams) -> Tensor:
    """(L, D) difference rows -> (L, D) motion cues."""
    return _run_stream(diffs, params.motion_blocks, params.pos_motion)


def spatial_stream(frames: Tensor, params: MmbParams) -> Tensor:
    """(T, D) frames -> (T, D) cross-frame spatial features."""
    return _run_stream(frames, params.spatial_blocks, params.pos_spatial)


def fuse(motion: Tensor, spatial: Tensor) -> Tensor:
    """Mean over motion rows plus mean over spatial rows."""
    return add(avg_pool_rows(motion), avg_pool_rows(spatial))


def encode_video(frames: Tensor, params: MmbParams,
                 sel: PairSelection) -> tuple[Tensor, Tensor]:
    """Full encoder: returns (video vector, motion cues).

    The motion cues are returned unscaled; only their contribution to the
    fused vector passes through the fusion gate.
    """
    diffs = compute_differences(frames, sel)
    cues = motion_stream(diffs, params)
    spatial = spatial_stream(frames, params)
    gated = mul(cues, params.fusion_gate)
    return fuse(gated, spatial), cues


def encode_video_spatial_only(frames: Tensor, params: MmbParams) -> Tensor:
    """Motion stream removed: video vector is the pooled spatial stream."""
    return avg_pool_rows(spatial_stream(frames, params))
