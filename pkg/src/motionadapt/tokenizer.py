"""Deterministic hash-bucketed word tokenizer and frozen embedding table.

Stands in for a learned subword tokenizer: text is lowercased, split on
whitespace and punctuation (punctuation characters are kept as their own
tokens), and each token is mapped into the non-reserved id range with
64-bit FNV-1a. Collisions are possible and acceptable; the mapping is
identical across runs and platforms.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

DEFAULT_VOCAB_SIZE = 4096
DEFAULT_SLOT_COUNT = 8

_WORD_RE = re.compile(r"[\w']+|[^\w\s]")

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_FNV_MASK = 0xFFFFFFFFFFFFFFFF


def fnv1a_64(data: bytes) -> int:
    h = _FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & _FNV_MASK
    return h


@dataclass
class TokenTable:
    """Frozen token-embedding table with reserved control ids.

    Reserved layout: id 0 = PAD, 1 = SOS, 2 = EOS, then one placeholder id
    per learnable prompt slot. Everything above the reserved block is the
    hash range for real words.
    """

    vocab_size: int
    dim: int
    embedding: np.ndarray  # (vocab_size, dim) float64, values on the float32 grid
    pad_id: int
    sos_id: int
    eos_id: int
    slot_ids: list[int]

    def __post_init__(self):
        if self.embedding.shape != (self.vocab_size, self.dim):
            raise ValueError(
                f"embedding shape {self.embedding.shape} does not match "
                f"(vocab_size, dim) = ({self.vocab_size}, {self.dim})"
            )
        reserved = self.reserved_ids()
        if len(set(reserved)) != len(reserved) or max(reserved) >= self.vocab_size:
            raise ValueError("reserved ids must be distinct and < vocab_size")
        if not np.isfinite(self.embedding).all():
            raise ValueError("embedding rows must be finite")

    def reserved_ids(self) -> list[int]:
        return [self.pad_id, self.sos_id, self.eos_id, *self.slot_ids]

    @property
    def hash_base(self) -> int:
        return 3 + len(self.slot_ids)

    def word_id(self, token: str) -> int:
        span = self.vocab_size - self.hash_base
        return self.hash_base + fnv1a_64(token.encode("utf-8")) % span

    def rows(self, ids: list[int]) -> np.ndarray:
        return self.embedding[np.asarray(ids, dtype=np.intp)]


def build_token_table(dim: int, vocab_size: int = DEFAULT_VOCAB_SIZE,
                      slot_count: int = DEFAULT_SLOT_COUNT,
                      seed: int = 0) -> TokenTable:
    """Frozen random embeddings, rounded to the float32 grid so the binary
    container round-trips the exact in-memory values."""
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    emb = rng.normal(0.0, 0.02, (vocab_size, dim)).astype(np.float32).astype(np.float64)
    return TokenTable(
        vocab_size=vocab_size,
        dim=dim,
        embedding=emb,
        pad_id=0,
        sos_id=1,
        eos_id=2,
        slot_ids=list(range(3, 3 + slot_count)),
    )


def tokenize(text: str, table: TokenTable) -> list[int]:
    """Deterministic ids for a class name or prompt string."""
    if not text or not text.strip():
        raise ValueError("cannot tokenize an empty string")
    return [table.word_id(tok) for tok in _WORD_RE.findall(text.lower())]
