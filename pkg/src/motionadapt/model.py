"""Model state (trainable and frozen parameter groups) and the forward pass."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor
from .container import FrameFeatureSequence
from .crossmodal import McbParams, communicate
from .objective import DEFAULT_TAU, EVAL_MODES, MatchDistribution, match_probabilities
from .text import (
    FrozenTextTower,
    MotionAdapterParams,
    PromptState,
    adapt_motion,
    encode_all_classes,
    init_prompts,
    token_table_checksum,
)
from .tokenizer import DEFAULT_SLOT_COUNT, DEFAULT_VOCAB_SIZE, TokenTable, build_token_table
from .video import (
    MmbParams,
    PairSelection,
    encode_video,
    encode_video_spatial_only,
    select_pairs,
)

logger = logging.getLogger(__name__)

DEFAULT_PROMPT_INIT = "a common human action of"


@dataclass
class TrainConfig:
    seed: int = 0
    lr0: float = 0.3
    momentum: float = 0.9
    epochs: int = 50
    max_steps: int | None = None
    batch_size: int = 8
    frames_per_clip: int = 8
    max_step: int = 4
    prompt_len: int = 5
    prompt_init: str = DEFAULT_PROMPT_INIT
    adapter_mid: int | None = None  # default: dim // 8
    depth: int = 1
    heads: int = 8
    ffn_expansion: int = 2
    motion_stream: bool = True
    map_enabled: bool = True
    mcb_enabled: bool = True
    mcb_at_eval: bool = True
    tau: float = DEFAULT_TAU
    eval_mode: str = "view_average"
    vocab_size: int = DEFAULT_VOCAB_SIZE
    shots: int | None = None

    def __post_init__(self):
        if self.lr0 < 0:
            raise ValueError("lr0 must be nonnegative")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must be in [0, 1)")
        for name in ("epochs", "batch_size", "frames_per_clip", "max_step",
                     "prompt_len", "depth", "heads", "ffn_expansion", "vocab_size"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be a positive integer")
        if self.max_step > self.frames_per_clip - 1:
            raise ValueError(
                f"max_step {self.max_step} exceeds frames_per_clip-1 = {self.frames_per_clip - 1}"
            )
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if self.eval_mode not in EVAL_MODES:
            raise ValueError(f"eval_mode must be one of {EVAL_MODES}")
        if self.max_steps is not None and self.max_steps < 1:
            raise ValueError("max_steps must be positive when set")
        if self.shots is not None and self.shots < 1:
            raise ValueError("shots must be positive when set")
        if not self.prompt_init.strip():
            raise ValueError("prompt_init must be a nonempty string")

    def adapter_mid_for(self, dim: int) -> int:
        mid = self.adapter_mid if self.adapter_mid is not None else max(1, dim // 8)
        if not 1 <= mid < dim:
            raise ValueError(f"adapter mid {mid} must be in [1, dim) with dim {dim}")
        return mid

    def to_json(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_json(cls, raw: dict) -> "TrainConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**raw)


_WARNED_MAP_WITHOUT_MOTION = False


def _map_active(config: TrainConfig) -> bool:
    global _WARNED_MAP_WITHOUT_MOTION
    if config.map_enabled and not config.motion_stream:
        if not _WARNED_MAP_WITHOUT_MOTION:
            logger.warning(
                "map_enabled without motion_stream: no motion cues exist, forcing zero offset")
            _WARNED_MAP_WITHOUT_MOTION = True
        return False
    return config.map_enabled


@dataclass
class ModelState:
    """All parameter groups plus the frozen stand-in towers."""

    config: TrainConfig
    dim: int
    classes: list[str]
    token_table: TokenTable
    tower: FrozenTextTower
    mmb: MmbParams
    prompts: PromptState
    adapter: MotionAdapterParams
    mcb: McbParams
    pair_sel: PairSelection
    step: int = 0

    @classmethod
    def initialize(cls, config: TrainConfig, dim: int, classes: list[str]) -> "ModelState":
        if dim % config.heads != 0:
            raise ValueError(f"dim {dim} must be divisible by heads {config.heads}")
        if not classes:
            raise ValueError("need at least one class")
        seeds = np.random.SeedSequence(config.seed).spawn(5)
        table_rng, tower_rng, mmb_rng, adapter_rng, mcb_rng = seeds
        table = build_token_table(dim, vocab_size=config.vocab_size,
                                  slot_count=DEFAULT_SLOT_COUNT,
                                  seed=config.seed)
        tower = FrozenTextTower.create(dim, config.heads, config.ffn_expansion,
                                       np.random.default_rng(tower_rng))
        mmb = MmbParams.create(dim, config.frames_per_clip, config.max_step,
                               config.depth, config.heads, config.ffn_expansion,
                               np.random.default_rng(mmb_rng))
        prompts = init_prompts(config.prompt_init, table, config.prompt_len)
        adapter = MotionAdapterParams.create(dim, config.adapter_mid_for(dim),
                                             np.random.default_rng(adapter_rng))
        mcb = McbParams.create(dim, np.random.default_rng(mcb_rng))
        sel = select_pairs(config.frames_per_clip, config.max_step)
        return cls(config=config, dim=dim, classes=list(classes), token_table=table,
                   tower=tower, mmb=mmb, prompts=prompts, adapter=adapter, mcb=mcb,
                   pair_sel=sel)

    # parameter groups ----------------------------------------------------

    def group_tensors(self) -> dict[str, list[tuple[str, Tensor]]]:
        return {
            "mmb": self.mmb.tensors(),
            "prompts": [("prompts.context", self.prompts.context)],
            "adapter": self.adapter.tensors(),
            "mcb": self.mcb.tensors(),
        }

    def trainable_groups(self, config: TrainConfig | None = None
                         ) -> dict[str, list[tuple[str, Tensor]]]:
        """Groups the optimizer may update under the given toggles.

        With the motion stream off only the spatial stream (and its
        positional table) trains; with the prompt learner off the context
        stays at its hand-crafted initialization and the adapter is inert;
        with the communication block off its attentions are inert.
        """
        cfg = config or self.config
        groups: dict[str, list[tuple[str, Tensor]]] = {}
        if cfg.motion_stream:
            groups["mmb"] = self.mmb.tensors()
        else:
            spatial = [(n, t) for n, t in self.mmb.tensors()
                       if n.startswith("mmb.spatial") or n == "mmb.pos_spatial"]
            groups["mmb"] = spatial
        if _map_active(cfg):
            groups["prompts"] = [("prompts.context", self.prompts.context)]
            groups["adapter"] = self.adapter.tensors()
        elif cfg.map_enabled:
            # prompts still learn, but no motion cues exist to adapt
            groups["prompts"] = [("prompts.context", self.prompts.context)]
        if cfg.mcb_enabled:
            groups["mcb"] = self.mcb.tensors()
        return groups

    def trainable_tensors(self, config: TrainConfig | None = None) -> list[Tensor]:
        return [t for group in self.trainable_groups(config).values() for _, t in group]

    def frozen_tensors(self) -> list[tuple[str, Tensor]]:
        return self.tower.tensors() + [("token_table.embedding", Tensor(self.token_table.embedding))]

    def frozen_checksum(self) -> str:
        digest = hashlib.sha256()
        digest.update(self.tower.checksum().encode())
        digest.update(token_table_checksum(self.token_table).encode())
        return digest.hexdigest()

    # serialization --------------------------------------------------------

    def save(self, path) -> None:
        arrays = {}
        for group in self.group_tensors().values():
            for name, t in group:
                arrays[name] = t.data
        for name, t in self.tower.tensors():
            arrays[name] = t.data
        arrays["token_table.embedding"] = self.token_table.embedding
        meta = {
            "config": self.config.to_json(),
            "classes": self.classes,
            "dim": self.dim,
            "step": self.step,
        }
        arrays["meta"] = np.frombuffer(json.dumps(meta, sort_keys=True).encode("utf-8"),
                                       dtype=np.uint8).copy()
        np.savez(path, **arrays)

    @classmethod
    def load(cls, path) -> "ModelState":
        with np.load(path) as payload:
            meta = json.loads(bytes(payload["meta"]).decode("utf-8"))
            config = TrainConfig.from_json(meta["config"])
            state = cls.initialize(config, int(meta["dim"]), list(meta["classes"]))
            state.step = int(meta["step"])
            for group in state.group_tensors().values():
                for name, t in group:
                    t.data[...] = payload[name]
            for name, t in state.tower.tensors():
                t.data[...] = payload[name]
            state.token_table.embedding[...] = payload["token_table.embedding"]
        return state


def forward(record: FrameFeatureSequence | np.ndarray, state: ModelState,
            config: TrainConfig | None = None, training: bool = True) -> MatchDistribution:
    """Frame features -> K-way match distribution under the config's toggles."""
    cfg = config or state.config
    frames_np = record.frames if isinstance(record, FrameFeatureSequence) else record
    frames_np = np.asarray(frames_np, dtype=np.float64)
    if frames_np.ndim != 2 or frames_np.shape[1] != state.dim:
        raise ValueError(
            f"expected frames of shape (T, {state.dim}), got {frames_np.shape}")
    if frames_np.shape[0] != cfg.frames_per_clip:
        raise ValueError(
            f"record has {frames_np.shape[0]} frames, config expects {cfg.frames_per_clip}")
    frames = Tensor(frames_np)

    if cfg.motion_stream:
        video, cues = encode_video(frames, state.mmb, state.pair_sel)
    else:
        video = encode_video_spatial_only(frames, state.mmb)
        cues = None

    offset = adapt_motion(cues, state.adapter) if (_map_active(cfg) and cues is not None) else None
    bank = encode_all_classes(state.prompts, offset, state.classes,
                              state.token_table, state.tower)

    if cfg.mcb_enabled and (training or cfg.mcb_at_eval):
        bank, video = communicate(bank, video, state.mcb)

    return match_probabilities(bank, video, cfg.tau)
