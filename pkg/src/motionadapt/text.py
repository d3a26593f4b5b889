"""Motion-aware prompt learning against a frozen stand-in text tower.

The prompt learner keeps H trainable context vectors shared by all classes.
Motion cues, pooled and pushed through a bottleneck adapter, yield one
offset vector that is summed onto every context row, so the class text
bank becomes video-conditioned. The text tower itself (two causal
attention blocks, positional table, output projection) is frozen random
and never receives gradient updates.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

from .autodiff import (
    Tensor,
    add,
    avg_pool_rows,
    concat_rows,
    gather_rows,
    gelu,
    matmul,
    reshape,
)
from .nn import AttentionBlockParams, attention_block, causal_mask, init_matrix, init_vector
from .tokenizer import TokenTable, tokenize

MAX_PROMPT_LEN = 77


@dataclass
class PromptState:
    """H learnable context vectors plus the text used to initialize them."""

    context: Tensor  # (H, D)
    init_text: str

    @property
    def length(self) -> int:
        return self.context.shape[0]


def init_prompts(init_text: str, table: TokenTable, prompt_len: int,
                 trainable: bool = True) -> PromptState:
    """Seed the context rows from the embeddings of the init text's tokens;
    pad with PAD-embedding copies when the text is shorter than H."""
    if prompt_len < 1:
        raise ValueError("prompt_len must be at least 1")
    ids = tokenize(init_text, table)
    if len(ids) >= prompt_len:
        ids = ids[:prompt_len]
    else:
        ids = ids + [table.pad_id] * (prompt_len - len(ids))
    rows = table.rows(ids).copy()
    return PromptState(context=Tensor(rows, requires_grad=trainable, name="prompt_context"),
                       init_text=init_text)


@dataclass
class MotionAdapterParams:
    """Bottleneck adapter: down-project, GELU, up-project.

    The up-projection starts at zero so the offset is zero at construction
    and the prompts behave as their hand-crafted initialization.
    """

    w_down: Tensor
    b_down: Tensor
    w_up: Tensor
    b_up: Tensor

    @classmethod
    def create(cls, dim: int, mid: int, rng: np.random.Generator,
               trainable: bool = True) -> "MotionAdapterParams":
        if not 1 <= mid < dim:
            raise ValueError(f"adapter mid dim must satisfy 1 <= mid < dim, got {mid} vs {dim}")
        return cls(
            w_down=init_matrix(rng, dim, mid, trainable, name="adapter.w_down"),
            b_down=init_vector(mid, trainable, name="adapter.b_down"),
            w_up=init_matrix(rng, mid, dim, trainable, zero=True, name="adapter.w_up"),
            b_up=init_vector(dim, trainable, name="adapter.b_up"),
        )

    def tensors(self, prefix: str = "adapter.") -> list[tuple[str, Tensor]]:
        return [(prefix + "w_down", self.w_down), (prefix + "b_down", self.b_down),
                (prefix + "w_up", self.w_up), (prefix + "b_up", self.b_up)]


def adapt_motion(cues: Tensor, params: MotionAdapterParams) -> Tensor:
    """(L, D) motion cues -> (D,) offset shared by all context rows."""
    if cues.shape[0] < 1:
        raise ValueError("motion cues must be nonempty")
    pooled = reshape(avg_pool_rows(cues), (1, cues.shape[1]))
    hidden = gelu(add(matmul(pooled, params.w_down), params.b_down))
    offset = add(matmul(hidden, params.w_up), params.b_up)
    return reshape(offset, (offset.shape[1],))


@dataclass
class PromptSequence:
    """Assembled 77-slot token-embedding sequence for one class."""

    rows: Tensor  # (77, D)
    eos_position: int
    class_span: tuple[int, int]


def assemble_prompt(state: PromptState, offset: Tensor | None, class_name: str,
                    table: TokenTable) -> PromptSequence:
    """[SOS][ctx+offset ...][class tokens][.][EOS][PAD...]; offset=None keeps
    the raw context rows (bit-identical to a zero offset)."""
    class_ids = tokenize(class_name, table)
    h = state.length
    used = 1 + h + len(class_ids) + 1 + 1  # SOS, context, class, ".", EOS
    if used > MAX_PROMPT_LEN:
        raise ValueError(
            f"prompt for class {class_name!r} needs {used} slots, budget is {MAX_PROMPT_LEN}"
        )
    ctx = state.context if offset is None else add(state.context, offset)
    dot_id = table.word_id(".")
    head = Tensor(table.rows([table.sos_id]))
    body = Tensor(table.rows(class_ids + [dot_id, table.eos_id]))
    n_pad = MAX_PROMPT_LEN - used
    tail = Tensor(table.rows([table.pad_id] * n_pad)) if n_pad else None
    parts = [head, ctx, body] + ([tail] if tail is not None else [])
    rows = concat_rows(parts)
    eos_position = used - 1
    return PromptSequence(rows=rows, eos_position=eos_position,
                          class_span=(1 + h, 1 + h + len(class_ids)))


@dataclass
class FrozenTextTower:
    """Frozen random stand-in for a pretrained causal text encoder."""

    pos: Tensor  # (77, D)
    blocks: list[AttentionBlockParams]
    proj: Tensor  # (D, D)

    _masks: dict[int, np.ndarray] | None = None

    @classmethod
    def create(cls, dim: int, heads: int, expansion: int,
               rng: np.random.Generator, depth: int = 2) -> "FrozenTextTower":
        # 1/sqrt(D) weights give the stand-in enough mixing that class
        # tokens actually spread the output representations; the tiny
        # pretrained-style 0.02 leaves same-length prompts nearly parallel.
        std = 1.0 / math.sqrt(dim)
        return cls(
            pos=Tensor(rng.normal(0.0, 0.02, (MAX_PROMPT_LEN, dim)), name="tower.pos"),
            blocks=[AttentionBlockParams.create(dim, heads, expansion, rng,
                                                trainable=False, zero_residual=False,
                                                std=std)
                    for _ in range(depth)],
            proj=Tensor(rng.normal(0.0, std, (dim, dim)), name="tower.proj"),
        )

    def mask(self, n: int = MAX_PROMPT_LEN) -> np.ndarray:
        if self._masks is None:
            self._masks = {}
        if n not in self._masks:
            self._masks[n] = causal_mask(n)
        return self._masks[n]

    def tensors(self, prefix: str = "tower.") -> list[tuple[str, Tensor]]:
        out = [(prefix + "pos", self.pos)]
        for i, blk in enumerate(self.blocks):
            out.extend(blk.tensors(f"{prefix}block{i}."))
        out.append((prefix + "proj", self.proj))
        return out

    def checksum(self) -> str:
        digest = hashlib.sha256()
        for name, t in self.tensors():
            digest.update(name.encode())
            digest.update(t.data.tobytes())
        return digest.hexdigest()


def encode_text(seq: PromptSequence, tower: FrozenTextTower) -> Tensor:
    """Causal tower forward; the class representation is the EOS row pushed
    through the output projection.

    The causal mask plus EOS pooling make the PAD tail unreachable, so the
    tower runs on the prefix up to the EOS row only; the result is
    identical to processing all 77 rows (masked scores underflow to an
    exact zero weight after the max shift).
    """
    n = seq.eos_position + 1
    ids = list(range(n))
    x = add(gather_rows(seq.rows, ids), gather_rows(tower.pos, ids))
    mask = tower.mask(n)
    for blk in tower.blocks:
        x = attention_block(x, x, blk, mask=mask)
    pooled = gather_rows(x, [seq.eos_position])
    rep = matmul(pooled, tower.proj)
    return reshape(rep, (rep.shape[1],))


def encode_all_classes(state: PromptState, offset: Tensor | None, classes: list[str],
                       table: TokenTable, tower: FrozenTextTower) -> Tensor:
    """(K, D) text bank; the context and offset are shared by every class."""
    rows = []
    for name in classes:
        seq = assemble_prompt(state, offset, name, table)
        rep = encode_text(seq, tower)
        rows.append(reshape(rep, (1, rep.shape[0])))
    return concat_rows(rows)


def token_table_checksum(table: TokenTable) -> str:
    digest = hashlib.sha256()
    digest.update(np.asarray(table.reserved_ids(), dtype=np.int64).tobytes())
    digest.update(table.embedding.tobytes())
    return digest.hexdigest()
