"""Shared network building blocks: softmax, single-head attention, the
residual feed-forward layer, tokenwise affine maps, layer norm, and the
3x3 convolution used by the feature-map reconstruction phase.

All blocks act on matrices whose rows are tokens; token maps are
matricized at the call site. Everything is a pure function of (input,
parameters).
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import backend
from .errors import DomainError, ShapeError
from .tensors import as_matrix, as_token_map, matrix_from_json, matrix_to_json


def softmax(z) -> np.ndarray:
    """Probability vector exp(z) / sum(exp(z)), computed with max-shift."""
    z = np.asarray(z, dtype=np.float64)
    shifted = z - np.max(z)
    e = np.exp(shifted)
    return e / np.sum(e)


@dataclass(frozen=True)
class AttnParams:
    """Single-head attention weights.

    Square w_q/w_k/w_v follow the d x d formulation (logits
    X Wq Wk^T X^T); rectangular (s, d) matrices follow the projection
    form with optional output map w_o of shape (d, s).
    """

    w_q: np.ndarray
    w_k: np.ndarray
    w_v: np.ndarray
    w_o: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, "w_q", as_matrix(self.w_q))
        object.__setattr__(self, "w_k", as_matrix(self.w_k))
        object.__setattr__(self, "w_v", as_matrix(self.w_v))
        if self.w_o is not None:
            object.__setattr__(self, "w_o", as_matrix(self.w_o))
        if self.w_q.shape != self.w_k.shape:
            raise ShapeError(f"w_q {self.w_q.shape} and w_k {self.w_k.shape} must agree")


def _logits(x: np.ndarray, p: AttnParams) -> np.ndarray:
    d = x.shape[1]
    if p.w_q.shape == (d, d):
        return x @ p.w_q @ p.w_k.T @ x.T
    if p.w_q.shape[1] == d:
        # (s, d) projections: <Wq x_i, Wk x_j>
        return (x @ p.w_q.T) @ (x @ p.w_k.T).T
    raise ShapeError(f"w_q shape {p.w_q.shape} incompatible with d={d}")


def attention_weights(x, p: AttnParams) -> np.ndarray:
    """The row-stochastic matrix D^-1 A, with max-shifted logit rows so
    the raw exponentials never overflow (the normalized weights are
    unchanged by the shift)."""
    x = as_matrix(x)
    logits = _logits(x, p)
    logits = logits - logits.max(axis=1, keepdims=True)
    a = np.exp(logits)
    return a / a.sum(axis=1, keepdims=True)


def attention(x, p: AttnParams) -> np.ndarray:
    """Unmasked softmax attention D^-1 A X Wv (optionally followed by Wo)."""
    x = as_matrix(x)
    d = x.shape[1]
    weights = attention_weights(x, p)
    if p.w_v.shape == (d, d):
        v = x @ p.w_v
    elif p.w_v.shape[1] == d:
        v = x @ p.w_v.T
    else:
        raise ShapeError(f"w_v shape {p.w_v.shape} incompatible with d={d}")
    out = weights @ v
    if p.w_o is not None:
        if p.w_o.shape[1] != out.shape[1]:
            raise ShapeError(f"w_o shape {p.w_o.shape} incompatible with head size {out.shape[1]}")
        out = out @ p.w_o.T
    return out


@dataclass(frozen=True)
class FfnParams:
    """Two-layer ReLU feed-forward weights: w1 (c, d), w2 (d, c)."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "w1", as_matrix(self.w1))
        object.__setattr__(self, "w2", as_matrix(self.w2))
        object.__setattr__(self, "b1", np.asarray(self.b1, dtype=np.float64).ravel())
        object.__setattr__(self, "b2", np.asarray(self.b2, dtype=np.float64).ravel())
        c, d = self.w1.shape
        if self.w2.shape != (d, c) or self.b1.shape != (c,) or self.b2.shape != (d,):
            raise ShapeError("inconsistent FFN parameter shapes")

    @property
    def hidden(self) -> int:
        return self.w1.shape[0]


def ffn(x, p: FfnParams) -> np.ndarray:
    """Residual feed-forward, applied tokenwise to the rows of x."""
    x = as_matrix(x)
    if x.shape[1] != p.w1.shape[1]:
        raise ShapeError(f"ffn expects width {p.w1.shape[1]}, got {x.shape[1]}")
    hidden = np.maximum(x @ p.w1.T + p.b1, 0.0)
    return x + hidden @ p.w2.T + p.b2


def mlp(x, w, b) -> np.ndarray:
    """Tokenwise affine map: row_j -> row_j @ w + b."""
    x = as_matrix(x)
    w = as_matrix(w)
    b = np.asarray(b, dtype=np.float64).ravel()
    if x.shape[1] != w.shape[0] or b.shape != (w.shape[1],):
        raise ShapeError(f"mlp shapes inconsistent: x {x.shape}, w {w.shape}, b {b.shape}")
    return x @ w + b


@dataclass(frozen=True)
class AffineMap:
    """A tokenwise affine map, the concrete form of the per-level tail."""

    w: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "w", as_matrix(self.w))
        object.__setattr__(self, "b", np.asarray(self.b, dtype=np.float64).ravel())

    def __call__(self, x) -> np.ndarray:
        return mlp(x, self.w, self.b)


def layer_norm(x, eps: float = 1e-6) -> np.ndarray:
    """Per-row normalization (x - mean) / sqrt(var + eps).

    eps=0 is the exact textbook form and raises on constant rows; any
    positive eps maps constant rows to zero instead.
    """
    x = as_matrix(x)
    mu = x.mean(axis=1, keepdims=True)
    var = ((x - mu) ** 2).mean(axis=1, keepdims=True)
    if eps == 0.0 and np.any(var == 0.0):
        raise DomainError("layer_norm with eps=0 on a constant row divides by zero")
    return (x - mu) / np.sqrt(var + eps)


@dataclass(frozen=True)
class ConvParams:
    """3x3 convolution weights: kernels (c_out, 3, 3, c_in), scalar bias.

    Padding and stride are fixed to 1 by definition.
    """

    kernels: np.ndarray
    bias: float = 0.0
    padding: int = 1
    stride: int = 1

    def __post_init__(self):
        k = np.asarray(self.kernels, dtype=np.float64)
        if k.ndim != 4 or k.shape[1:3] != (3, 3):
            raise ShapeError(f"kernels must be (c_out, 3, 3, c_in), got {k.shape}")
        object.__setattr__(self, "kernels", k)
        if self.padding != 1 or self.stride != 1:
            raise ShapeError("conv layer is defined with padding=1, stride=1 only")


def conv3x3(tmap, p: ConvParams) -> np.ndarray:
    """Same-size 3x3 convolution with zero padding."""
    t = as_token_map(tmap)
    if t.shape[2] != p.kernels.shape[3]:
        raise ShapeError(f"input has {t.shape[2]} channels, kernels expect {p.kernels.shape[3]}")
    padded = np.zeros((t.shape[0] + 2, t.shape[1] + 2, t.shape[2]))
    padded[1:-1, 1:-1, :] = t
    return backend.conv3x3_apply(padded, np.ascontiguousarray(p.kernels), float(p.bias))


def attn_params_to_json(p: AttnParams) -> dict:
    out = {"w_q": matrix_to_json(p.w_q), "w_k": matrix_to_json(p.w_k), "w_v": matrix_to_json(p.w_v)}
    if p.w_o is not None:
        out["w_o"] = matrix_to_json(p.w_o)
    return out


def attn_params_from_json(obj) -> AttnParams:
    return AttnParams(
        w_q=matrix_from_json(obj["w_q"]),
        w_k=matrix_from_json(obj["w_k"]),
        w_v=matrix_from_json(obj["w_v"]),
        w_o=matrix_from_json(obj["w_o"]) if "w_o" in obj else None,
    )


def ffn_params_to_json(p: FfnParams) -> dict:
    return {
        "w1": matrix_to_json(p.w1),
        "b1": [float(v) for v in p.b1],
        "w2": matrix_to_json(p.w2),
        "b2": [float(v) for v in p.b2],
    }


def ffn_params_from_json(obj) -> FfnParams:
    return FfnParams(
        w1=matrix_from_json(obj["w1"]),
        b1=np.asarray(obj["b1"], dtype=np.float64),
        w2=matrix_from_json(obj["w2"]),
        b2=np.asarray(obj["b2"], dtype=np.float64),
    )
