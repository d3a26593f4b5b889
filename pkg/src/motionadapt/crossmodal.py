"""Cross-modal pre-matching: two single-head cross attentions whose outputs
are injected into the text bank and video vector as residual prefixes.

Matching attention queries with text rows against the lone video key;
allocating attention queries with the video vector against the text rows.
Output projections are zero at construction, so the block is the identity
until trained.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor, add, layer_norm, matmul, mha_mix, reshape
from .nn import init_matrix, init_vector


@dataclass
class CrossAttentionParams:
    """Single-head cross attention with pre-norm; o_proj zero-initialized."""

    wq: Tensor
    bq: Tensor
    wk: Tensor
    bk: Tensor
    wv: Tensor
    bv: Tensor
    wo: Tensor
    bo: Tensor
    ln_gain: Tensor
    ln_shift: Tensor

    @classmethod
    def create(cls, dim: int, rng: np.random.Generator,
               trainable: bool = True) -> "CrossAttentionParams":
        return cls(
            wq=init_matrix(rng, dim, dim, trainable),
            bq=init_vector(dim, trainable),
            wk=init_matrix(rng, dim, dim, trainable),
            bk=init_vector(dim, trainable),
            wv=init_matrix(rng, dim, dim, trainable),
            bv=init_vector(dim, trainable),
            wo=init_matrix(rng, dim, dim, trainable, zero=True),
            bo=init_vector(dim, trainable),
            ln_gain=init_vector(dim, trainable, fill=1.0),
            ln_shift=init_vector(dim, trainable),
        )

    def tensors(self, prefix: str) -> list[tuple[str, Tensor]]:
        return [(prefix + n, getattr(self, n))
                for n in ("wq", "bq", "wk", "bk", "wv", "bv", "wo", "bo",
                          "ln_gain", "ln_shift")]


@dataclass
class McbParams:
    matching: CrossAttentionParams   # text queries video
    allocating: CrossAttentionParams  # video queries text

    @classmethod
    def create(cls, dim: int, rng: np.random.Generator,
               trainable: bool = True) -> "McbParams":
        return cls(
            matching=CrossAttentionParams.create(dim, rng, trainable),
            allocating=CrossAttentionParams.create(dim, rng, trainable),
        )

    def tensors(self, prefix: str = "mcb.") -> list[tuple[str, Tensor]]:
        return (self.matching.tensors(prefix + "matching.")
                + self.allocating.tensors(prefix + "allocating."))


def _cross_attention(query: Tensor, kv: Tensor, p: CrossAttentionParams) -> Tensor:
    qn = layer_norm(query, p.ln_gain, p.ln_shift)
    kn = layer_norm(kv, p.ln_gain, p.ln_shift)
    q = add(matmul(qn, p.wq), p.bq)
    k = add(matmul(kn, p.wk), p.bk)
    v = add(matmul(kn, p.wv), p.bv)
    return add(matmul(mha_mix(q, k, v, heads=1), p.wo), p.bo)


def _as_row(vec: Tensor) -> Tensor:
    return reshape(vec, (1, vec.shape[0]))


def sma(text: Tensor, video: Tensor, params: CrossAttentionParams) -> Tensor:
    """(K, D) text prefix from attending each text row over the single video
    key; with one key every attention weight is exactly 1."""
    return _cross_attention(text, _as_row(video), params)


def saa(video: Tensor, text: Tensor, params: CrossAttentionParams) -> Tensor:
    """(D,) video prefix from the video query attending over K text keys."""
    out = _cross_attention(_as_row(video), text, params)
    return reshape(out, (out.shape[1],))


def communicate(text: Tensor, video: Tensor,
                params: McbParams) -> tuple[Tensor, Tensor]:
    """Residual injection of both prefixes: identity at construction."""
    text_out = add(text, sma(text, video, params.matching))
    video_out = add(video, saa(video, text, params.allocating))
    return text_out, video_out
