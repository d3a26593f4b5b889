"""Dense-tensor algebra with reverse-mode automatic differentiation.

Values live in float64 numpy arrays. Operations executed while a Tape is
active append a record (inputs, output, backward rule) in execution order,
which is a valid topological order by construction. ``backward`` replays
the tape once in reverse and accumulates gradients additively, so shared
subexpressions (fan-out) are handled exactly.
"""

from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np
from scipy.special import erf

__all__ = [
    "Tensor",
    "Tape",
    "no_grad",
    "backward",
    "add",
    "sub",
    "neg",
    "mul",
    "div",
    "scale",
    "matmul",
    "transpose",
    "reshape",
    "gather_rows",
    "concat_rows",
    "slice_cols",
    "concat_cols",
    "tsum",
    "avg_pool_rows",
    "mha_mix",
    "softmax",
    "log",
    "sqrt",
    "exp",
    "gelu",
    "layer_norm",
]

_INV_SQRT2 = 1.0 / math.sqrt(2.0)
_INV_SQRT2PI = 1.0 / math.sqrt(2.0 * math.pi)


class Tensor:
    """A float64 array plus gradient bookkeeping."""

    __slots__ = ("data", "grad", "requires_grad", "name")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def accumulate_grad(self, g: np.ndarray) -> None:
        if g.shape != self.data.shape:
            raise ValueError(
                f"gradient shape {g.shape} does not match tensor shape {self.data.shape}"
            )
        if self.grad is None:
            self.grad = g.copy()
        else:
            self.grad += g

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad}{label})"

    # operator sugar

    def __add__(self, other):
        return add(self, _as_tensor(other))

    def __radd__(self, other):
        return add(_as_tensor(other), self)

    def __sub__(self, other):
        return sub(self, _as_tensor(other))

    def __rsub__(self, other):
        return sub(_as_tensor(other), self)

    def __mul__(self, other):
        return mul(self, _as_tensor(other))

    def __rmul__(self, other):
        return mul(_as_tensor(other), self)

    def __truediv__(self, other):
        return div(self, _as_tensor(other))

    def __matmul__(self, other):
        return matmul(self, _as_tensor(other))

    def __neg__(self):
        return neg(self)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


class _Record:
    __slots__ = ("inputs", "output", "backward_fn")

    def __init__(self, inputs: tuple[Tensor, ...], output: Tensor, backward_fn: Callable):
        self.inputs = inputs
        self.output = output
        self.backward_fn = backward_fn


class Tape:
    """Ordered log of differentiable operations.

    Records hold strong references to their tensors, so node identity (via
    ``id``) is stable for the tape's lifetime.
    """

    def __init__(self):
        self.records: list[_Record] = []
        self.produced: set[int] = set()

    def __enter__(self) -> "Tape":
        _TAPE_STACK.append(self)
        return self

    def __exit__(self, *exc) -> None:
        popped = _TAPE_STACK.pop()
        assert popped is self

    def record(self, inputs: tuple[Tensor, ...], output: Tensor, backward_fn: Callable) -> None:
        self.records.append(_Record(inputs, output, backward_fn))
        self.produced.add(id(output))

    def __len__(self) -> int:
        return len(self.records)


_TAPE_STACK: list[Tape | None] = []


def _active_tape() -> Tape | None:
    return _TAPE_STACK[-1] if _TAPE_STACK else None


class no_grad:
    """Context manager that suspends tape recording."""

    def __enter__(self):
        _TAPE_STACK.append(None)
        return self

    def __exit__(self, *exc):
        _TAPE_STACK.pop()


def backward(tape: Tape, loss: Tensor) -> None:
    """Accumulate d(loss)/d(leaf) into ``.grad`` of every requires_grad leaf.

    The loss must be a scalar (size-1) tensor. Each tape record is visited
    exactly once, in reverse execution order; gradients add across fan-out.
    """
    if loss.size != 1:
        raise ValueError(f"backward requires a scalar loss, got shape {loss.shape}")
    flowing: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    if loss.requires_grad and id(loss) not in tape.produced:
        loss.accumulate_grad(np.ones_like(loss.data))
    for rec in reversed(tape.records):
        out_grad = flowing.pop(id(rec.output), None)
        if out_grad is None:
            continue
        in_grads = rec.backward_fn(out_grad)
        for t, g in zip(rec.inputs, in_grads):
            if g is None:
                continue
            if id(t) in tape.produced:
                key = id(t)
                if key in flowing:
                    flowing[key] = flowing[key] + g
                else:
                    flowing[key] = g
            elif t.requires_grad:
                t.accumulate_grad(np.asarray(g, dtype=np.float64))


def _emit(inputs: Sequence[Tensor], out_data: np.ndarray, backward_fn: Callable) -> Tensor:
    tape = _active_tape()
    requires = any(t.requires_grad for t in inputs) or any(
        tape is not None and id(t) in tape.produced for t in inputs
    )
    out = Tensor(out_data, requires_grad=requires)
    if tape is not None and requires:
        tape.record(tuple(inputs), out, backward_fn)
    return out


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a broadcasted gradient back down to ``shape``."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad.reshape(shape)


# ---------------------------------------------------------------------------
# elementwise arithmetic (numpy broadcasting rules apply)


def add(a: Tensor, b: Tensor) -> Tensor:
    out = a.data + b.data

    def bwd(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _emit((a, b), out, bwd)


def sub(a: Tensor, b: Tensor) -> Tensor:
    out = a.data - b.data

    def bwd(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return _emit((a, b), out, bwd)


def neg(a: Tensor) -> Tensor:
    return _emit((a,), -a.data, lambda g: (-g,))


def mul(a: Tensor, b: Tensor) -> Tensor:
    out = a.data * b.data
    ad, bd = a.data, b.data

    def bwd(g):
        return _unbroadcast(g * bd, a.shape), _unbroadcast(g * ad, b.shape)

    return _emit((a, b), out, bwd)


def div(a: Tensor, b: Tensor) -> Tensor:
    out = a.data / b.data
    ad, bd = a.data, b.data

    def bwd(g):
        return _unbroadcast(g / bd, a.shape), _unbroadcast(-g * ad / (bd * bd), b.shape)

    return _emit((a, b), out, bwd)


def scale(a: Tensor, c: float) -> Tensor:
    """Multiply by a python scalar constant."""
    c = float(c)
    return _emit((a,), a.data * c, lambda g: (g * c,))


# ---------------------------------------------------------------------------
# linear algebra and shape surgery


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul dimension mismatch: {a.shape} x {b.shape}")
    out = a.data @ b.data
    ad, bd = a.data, b.data

    def bwd(g):
        return g @ bd.T, ad.T @ g

    return _emit((a, b), out, bwd)


def transpose(a: Tensor) -> Tensor:
    if a.ndim != 2:
        raise ValueError(f"transpose expects a matrix, got shape {a.shape}")
    return _emit((a,), a.data.T.copy(), lambda g: (g.T,))


def reshape(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    old = a.shape
    return _emit((a,), a.data.reshape(shape).copy(), lambda g: (g.reshape(old),))


def gather_rows(a: Tensor, idx: Sequence[int]) -> Tensor:
    """Select rows by index; repeated indices accumulate in the backward pass."""
    idx = np.asarray(idx, dtype=np.intp)
    if a.ndim != 2:
        raise ValueError(f"gather_rows expects a matrix, got shape {a.shape}")
    if idx.size and (idx.min() < 0 or idx.max() >= a.shape[0]):
        raise IndexError(
            f"row index out of range: table has {a.shape[0]} rows, requested {int(idx.max())}"
        )
    out = a.data[idx].copy()
    rows, cols = a.shape

    def bwd(g):
        da = np.zeros((rows, cols))
        np.add.at(da, idx, g)
        return (da,)

    return _emit((a,), out, bwd)


def concat_rows(parts: Sequence[Tensor]) -> Tensor:
    parts = list(parts)
    out = np.concatenate([p.data for p in parts], axis=0)
    sizes = [p.shape[0] for p in parts]
    splits = np.cumsum(sizes)[:-1]

    def bwd(g):
        return tuple(np.vsplit(g, splits))

    return _emit(tuple(parts), out, bwd)


def slice_cols(a: Tensor, start: int, stop: int) -> Tensor:
    if a.ndim != 2:
        raise ValueError(f"slice_cols expects a matrix, got shape {a.shape}")
    out = a.data[:, start:stop].copy()
    shape = a.shape

    def bwd(g):
        da = np.zeros(shape)
        da[:, start:stop] = g
        return (da,)

    return _emit((a,), out, bwd)


def concat_cols(parts: Sequence[Tensor]) -> Tensor:
    parts = list(parts)
    out = np.concatenate([p.data for p in parts], axis=1)
    sizes = [p.shape[1] for p in parts]
    splits = np.cumsum(sizes)[:-1]

    def bwd(g):
        return tuple(np.hsplit(g, splits))

    return _emit(tuple(parts), out, bwd)


# ---------------------------------------------------------------------------
# reductions


def tsum(a: Tensor, axis: int | None = None, keepdims: bool = False) -> Tensor:
    out = a.data.sum(axis=axis, keepdims=keepdims)
    shape = a.shape

    def bwd(g):
        g = np.asarray(g)
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape).copy(),)

    return _emit((a,), out, bwd)


def avg_pool_rows(a: Tensor) -> Tensor:
    """Arithmetic mean over rows: (n, d) -> (d,)."""
    if a.ndim != 2:
        raise ValueError(f"avg_pool_rows expects a matrix, got shape {a.shape}")
    n = a.shape[0]
    if n == 0:
        raise ValueError("avg_pool_rows requires at least one row")
    out = a.data.mean(axis=0)

    def bwd(g):
        return (np.broadcast_to(g / n, a.shape).copy(),)

    return _emit((a,), out, bwd)


# ---------------------------------------------------------------------------
# nonlinearities


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def bwd(g):
        inner = (g * out).sum(axis=axis, keepdims=True)
        return ((g - inner) * out,)

    return _emit((a,), out, bwd)


def log(a: Tensor) -> Tensor:
    ad = a.data
    return _emit((a,), np.log(ad), lambda g: (g / ad,))


def exp(a: Tensor) -> Tensor:
    out = np.exp(a.data)
    return _emit((a,), out, lambda g: (g * out,))


def sqrt(a: Tensor) -> Tensor:
    out = np.sqrt(a.data)
    return _emit((a,), out, lambda g: (g * 0.5 / out,))


def gelu(a: Tensor) -> Tensor:
    """Exact (erf-form) GELU."""
    x = a.data
    cdf = 0.5 * (1.0 + erf(x * _INV_SQRT2))
    out = x * cdf

    def bwd(g):
        pdf = np.exp(-0.5 * x * x) * _INV_SQRT2PI
        return (g * (cdf + x * pdf),)

    return _emit((a,), out, bwd)


def mha_mix(q: Tensor, k: Tensor, v: Tensor, heads: int,
            mask: np.ndarray | None = None) -> Tensor:
    """Fused multi-head scaled dot-product attention mix.

    q is (n, D); k and v are (m, D); D splits into ``heads`` slices. The
    optional mask is a constant additive (n, m) score bias shared by all
    heads. One fused op keeps the tape short; the backward rule is the
    composition of the einsum and softmax rules.
    """
    n, dim = q.shape
    m = k.shape[0]
    if dim % heads != 0:
        raise ValueError(f"dim {dim} not divisible by heads {heads}")
    if k.shape != (m, dim) or v.shape != (m, dim):
        raise ValueError(f"k/v shapes {k.shape}/{v.shape} incompatible with q {q.shape}")
    head_dim = dim // heads
    inv_scale = 1.0 / math.sqrt(head_dim)
    # (h, rows, head_dim) batched views
    qh = q.data.reshape(n, heads, head_dim).transpose(1, 0, 2)
    kh = k.data.reshape(m, heads, head_dim).transpose(1, 0, 2)
    vh = v.data.reshape(m, heads, head_dim).transpose(1, 0, 2)
    scores = (qh @ kh.transpose(0, 2, 1)) * inv_scale
    if mask is not None:
        scores = scores + mask
    scores -= scores.max(axis=-1, keepdims=True)
    e = np.exp(scores)
    weights = e / e.sum(axis=-1, keepdims=True)
    out = (weights @ vh).transpose(1, 0, 2).reshape(n, dim)

    def bwd(g):
        gh = g.reshape(n, heads, head_dim).transpose(1, 0, 2)
        dweights = gh @ vh.transpose(0, 2, 1)
        dvh = weights.transpose(0, 2, 1) @ gh
        dscores = (dweights - (dweights * weights).sum(axis=-1, keepdims=True)) * weights
        dscores *= inv_scale
        dqh = dscores @ kh
        dkh = dscores.transpose(0, 2, 1) @ qh
        return (dqh.transpose(1, 0, 2).reshape(n, dim),
                dkh.transpose(1, 0, 2).reshape(m, dim),
                dvh.transpose(1, 0, 2).reshape(m, dim))

    return _emit((q, k, v), out, bwd)


def layer_norm(a: Tensor, gain: Tensor, shift: Tensor, eps: float = 1e-6) -> Tensor:
    """Per-row normalization to mean 0, variance 1, then affine gain/shift."""
    if a.ndim != 2:
        raise ValueError(f"layer_norm expects a matrix, got shape {a.shape}")
    x = a.data
    mu = x.mean(axis=1, keepdims=True)
    var = x.var(axis=1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x - mu) * inv_std
    out = xhat * gain.data + shift.data
    gd = gain.data

    def bwd(g):
        gy = g * gd
        m1 = gy.mean(axis=1, keepdims=True)
        m2 = (gy * xhat).mean(axis=1, keepdims=True)
        da = (gy - m1 - xhat * m2) * inv_std
        dgain = (g * xhat).sum(axis=0)
        dshift = g.sum(axis=0)
        return da, _unbroadcast(dgain, gain.shape), _unbroadcast(dshift, shift.shape)

    return _emit((a, gain, shift), out, bwd)
