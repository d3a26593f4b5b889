"""Transformer building blocks composed from the autodiff primitives."""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .autodiff import Tensor, add, gelu, layer_norm, matmul, mha_mix

INIT_STD = 0.02


def init_matrix(rng: np.random.Generator, rows: int, cols: int, trainable: bool,
                zero: bool = False, name: str | None = None,
                std: float = INIT_STD) -> Tensor:
    data = np.zeros((rows, cols)) if zero else rng.normal(0.0, std, (rows, cols))
    return Tensor(data, requires_grad=trainable, name=name)


def init_vector(dim: int, trainable: bool, fill: float = 0.0, name: str | None = None) -> Tensor:
    return Tensor(np.full(dim, fill, dtype=np.float64), requires_grad=trainable, name=name)


@dataclass
class AttentionBlockParams:
    """Parameters of one pre-norm residual block (MHSA + FFN)."""

    wq: Tensor
    bq: Tensor
    wk: Tensor
    bk: Tensor
    wv: Tensor
    bv: Tensor
    wo: Tensor
    bo: Tensor
    ln1_gain: Tensor
    ln1_shift: Tensor
    ln2_gain: Tensor
    ln2_shift: Tensor
    ffn_w1: Tensor
    ffn_b1: Tensor
    ffn_w2: Tensor
    ffn_b2: Tensor
    heads: int
    expansion: int

    @classmethod
    def create(cls, dim: int, heads: int, expansion: int, rng: np.random.Generator,
               trainable: bool = True, zero_residual: bool = True,
               std: float = INIT_STD) -> "AttentionBlockParams":
        """Build a block. ``zero_residual`` zero-inits wo and ffn_w2 so the
        block is the identity map at construction."""
        if dim % heads != 0:
            raise ValueError(f"dim {dim} not divisible by heads {heads}")
        hidden = expansion * dim
        return cls(
            wq=init_matrix(rng, dim, dim, trainable, std=std),
            bq=init_vector(dim, trainable),
            wk=init_matrix(rng, dim, dim, trainable, std=std),
            bk=init_vector(dim, trainable),
            wv=init_matrix(rng, dim, dim, trainable, std=std),
            bv=init_vector(dim, trainable),
            wo=init_matrix(rng, dim, dim, trainable, zero=zero_residual, std=std),
            bo=init_vector(dim, trainable),
            ln1_gain=init_vector(dim, trainable, fill=1.0),
            ln1_shift=init_vector(dim, trainable),
            ln2_gain=init_vector(dim, trainable, fill=1.0),
            ln2_shift=init_vector(dim, trainable),
            ffn_w1=init_matrix(rng, dim, hidden, trainable, std=std),
            ffn_b1=init_vector(hidden, trainable),
            ffn_w2=init_matrix(rng, hidden, dim, trainable, zero=zero_residual, std=std),
            ffn_b2=init_vector(dim, trainable),
            heads=heads,
            expansion=expansion,
        )

    def tensors(self, prefix: str = "") -> list[tuple[str, Tensor]]:
        out = []
        for f in fields(self):
            if f.type == "Tensor" or isinstance(getattr(self, f.name), Tensor):
                out.append((prefix + f.name, getattr(self, f.name)))
        return out


def multi_head_attention(q_input: Tensor, kv_input: Tensor, p: AttentionBlockParams,
                         mask: np.ndarray | None = None) -> Tensor:
    """Scaled dot-product attention with ``p.heads`` heads.

    ``mask``, when given, is an additive (n, m) score bias; rows attend only
    where the mask is 0 (e.g. a causal mask uses a large negative constant
    above the diagonal).
    """
    q = add(matmul(q_input, p.wq), p.bq)
    k = add(matmul(kv_input, p.wk), p.bk)
    v = add(matmul(kv_input, p.wv), p.bv)
    return add(matmul(mha_mix(q, k, v, p.heads, mask=mask), p.wo), p.bo)


def attention_block(x: Tensor, ctx: Tensor, p: AttentionBlockParams,
                    mask: np.ndarray | None = None) -> Tensor:
    """Pre-norm residual block: x + MHSA(LN(x), LN(ctx)), then + FFN(LN(.)).

    Self-attention is ``ctx is x``; with a distinct ctx the same block acts
    as cross attention.
    """
    qn = layer_norm(x, p.ln1_gain, p.ln1_shift)
    kn = qn if ctx is x else layer_norm(ctx, p.ln1_gain, p.ln1_shift)
    h = add(x, multi_head_attention(qn, kn, p, mask=mask))
    hn = layer_norm(h, p.ln2_gain, p.ln2_shift)
    ffn = add(matmul(gelu(add(matmul(hn, p.ffn_w1), p.ffn_b1)), p.ffn_w2), p.ffn_b2)
    return add(h, ffn)


def causal_mask(n: int) -> np.ndarray:
    """Additive lower-triangular mask: position i may attend to j <= i."""
    return np.triu(np.full((n, n), -1e9), k=1)
