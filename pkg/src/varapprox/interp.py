"""Bicubic up-interpolation, average-pool downsampling, pyramid layers, and
their explicit dense-matrix materializations.

Both resampling directions are linear in the input, so every operator here
has two routes: a direct stencil evaluation (the hot kernel) and a dense
matrix acting on the (hw, d) matrix view from the left. The two routes
must agree to 1e-10; the test suite checks them against each other and
against an independent brute-force oracle.

Conventions (recorded in every report that uses an operator):
  * anchor for output site i is (i + 0.5) * src / dst - 0.5, clamped to
    [0, src - 1]; taps at floor(anchor) + {-1, 0, 1, 2} per axis,
  * kernel weights are evaluated at the fractional distance from the
    anchor to each tap, then renormalized to sum exactly 1 per site,
  * out-of-range taps clamp to the border,
  * ``literal_offsets=True`` switches to the literal reading where the
    kernel is evaluated at the integer offsets themselves and the anchor
    is the 0-based translation of the 1-based i * src / dst position.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import backend
from .errors import ShapeError
from .tensors import as_token_map, matricize


class Kernel(str, Enum):
    """Supported piecewise-cubic resampling kernels.

    CUBIC_BSPLINE stays within [0, 1] everywhere (the compliant default);
    KEYS_CATMULL_ROM is the classical a=-0.5 interpolating kernel, which
    dips negative on (1, 2) and is offered as an explicit variant.
    """

    CUBIC_BSPLINE = "cubic_bspline"
    KEYS_CATMULL_ROM = "keys_catmull_rom"


def kernel_eval(kind: Kernel, x: float) -> float:
    """Kernel value at a single offset; 0 for |x| >= 2."""
    return float(_kernel_eval_array(kind, np.asarray([x], dtype=np.float64))[0])


def _kernel_eval_array(kind: Kernel, x: np.ndarray) -> np.ndarray:
    ax = np.abs(np.asarray(x, dtype=np.float64))
    out = np.zeros_like(ax)
    near = ax <= 1.0
    mid = (ax > 1.0) & (ax < 2.0)
    if kind == Kernel.CUBIC_BSPLINE:
        out[near] = (3.0 * ax[near] ** 3 - 6.0 * ax[near] ** 2 + 4.0) / 6.0
        out[mid] = (2.0 - ax[mid]) ** 3 / 6.0
    elif kind == Kernel.KEYS_CATMULL_ROM:
        a = -0.5
        out[near] = (a + 2.0) * ax[near] ** 3 - (a + 3.0) * ax[near] ** 2 + 1.0
        out[mid] = a * ax[mid] ** 3 - 5.0 * a * ax[mid] ** 2 + 8.0 * a * ax[mid] - 4.0 * a
    else:
        raise ValueError(f"unknown kernel {kind!r}")
    return out


_OFFSETS = np.array([-1.0, 0.0, 1.0, 2.0])


def _axis_taps(n_src: int, n_dst: int, kind: Kernel, literal: bool):
    """Per-output-site tap indices (n_dst, 4) and normalized weights."""
    i = np.arange(n_dst, dtype=np.float64)
    if literal:
        anchor = (i + 1.0) * n_src / n_dst - 1.0
    else:
        anchor = (i + 0.5) * n_src / n_dst - 0.5
    anchor = np.clip(anchor, 0.0, n_src - 1.0)
    base = np.floor(anchor)
    idx = (base[:, None] + _OFFSETS[None, :]).astype(np.int64)
    if literal:
        w = np.tile(_kernel_eval_array(kind, _OFFSETS), (n_dst, 1))
    else:
        frac = anchor - base
        w = _kernel_eval_array(kind, frac[:, None] - _OFFSETS[None, :])
    np.clip(idx, 0, n_src - 1, out=idx)
    w = w / w.sum(axis=1, keepdims=True)
    return idx, w


def up_interpolate(tmap, dst_h: int, dst_w: int, kind: Kernel = Kernel.CUBIC_BSPLINE,
                   literal_offsets: bool = False) -> np.ndarray:
    """Resample an (h, w, d) map to (dst_h, dst_w, d) by direct stencil."""
    t = as_token_map(tmap)
    h, w, _ = t.shape
    if dst_h < h or dst_w < w:
        raise ShapeError(f"up_interpolate cannot shrink ({h},{w}) -> ({dst_h},{dst_w}); use down_sample")
    ri, rw = _axis_taps(h, dst_h, kind, literal_offsets)
    ci, cw = _axis_taps(w, dst_w, kind, literal_offsets)
    return backend.stencil_apply(np.ascontiguousarray(t), ri, rw, ci, cw)


@dataclass(frozen=True)
class UpInterpOp:
    """Materialized up-interpolation: a (dst_h*dst_w, src_h*src_w) matrix."""

    src_h: int
    src_w: int
    dst_h: int
    dst_w: int
    kernel: Kernel
    literal_offsets: bool
    matrix: np.ndarray

    def apply(self, m) -> np.ndarray:
        m = np.asarray(m, dtype=np.float64)
        if m.shape[0] != self.src_h * self.src_w:
            raise ShapeError(f"operator expects {self.src_h * self.src_w} rows, got {m.shape[0]}")
        return self.matrix @ m


def materialize_up(src_h: int, src_w: int, dst_h: int, dst_w: int,
                   kind: Kernel = Kernel.CUBIC_BSPLINE,
                   literal_offsets: bool = False) -> UpInterpOp:
    """Build the dense matrix equivalent of ``up_interpolate``.

    Row r of the matrix holds the stencil weights of output site
    (r // dst_w, r % dst_w); clamped taps accumulate onto the border
    column, so rows always sum to 1.
    """
    if dst_h < src_h or dst_w < src_w:
        raise ShapeError(f"materialize_up cannot shrink ({src_h},{src_w}) -> ({dst_h},{dst_w})")
    ri, rw = _axis_taps(src_h, dst_h, kind, literal_offsets)
    ci, cw = _axis_taps(src_w, dst_w, kind, literal_offsets)
    mat = np.zeros((dst_h * dst_w, src_h * src_w))
    rows = (np.arange(dst_h)[:, None] * dst_w + np.arange(dst_w)[None, :]).ravel()
    for s in range(4):
        for t in range(4):
            cols = (ri[:, s][:, None] * src_w + ci[:, t][None, :]).ravel()
            vals = (rw[:, s][:, None] * cw[:, t][None, :]).ravel()
            np.add.at(mat, (rows, cols), vals)
    return UpInterpOp(src_h, src_w, dst_h, dst_w, kind, literal_offsets, mat)


def pyramid_up(maps, x_init, kind: Kernel, schedule, literal_offsets: bool = False):
    """One pyramid step: slot 1 is refilled with the initial 1x1xd map and
    every existing map is up-interpolated one schedule level.

    ``schedule`` lists the output shapes (h_i, w_i), level 1 first; input
    map i must already match schedule entry i. With no input maps this is
    the base case and returns ``[x_init]`` unchanged.
    """
    x_init = as_token_map(x_init)
    if x_init.shape[:2] != (1, 1):
        raise ShapeError(f"x_init must be 1x1xd, got {x_init.shape}")
    k = len(maps)
    if len(schedule) < k + 1:
        raise ShapeError(f"schedule has {len(schedule)} levels but {k + 1} are needed")
    out = [x_init]
    for i, m in enumerate(maps):
        m = as_token_map(m)
        want = tuple(schedule[i])
        if m.shape[:2] != want:
            raise ShapeError(f"level {i + 1}: map shape {m.shape[:2]} != schedule entry {want}")
        dst = tuple(schedule[i + 1])
        out.append(up_interpolate(m, dst[0], dst[1], kind, literal_offsets))
    return out


def down_sample(tmap, r: int) -> np.ndarray:
    """r x r average pooling; r must divide both spatial sizes."""
    t = as_token_map(tmap)
    h, w, d = t.shape
    if r < 1 or h % r or w % r:
        raise ShapeError(f"factor {r} does not divide shape ({h},{w})")
    return t.reshape(h // r, r, w // r, r, d).mean(axis=(1, 3))


@dataclass(frozen=True)
class DownSampleOp:
    """Materialized average pooling: ((h/r)*(w/r), h*w), rows sum to 1."""

    h: int
    w: int
    factor: int
    matrix: np.ndarray

    def apply(self, m) -> np.ndarray:
        m = np.asarray(m, dtype=np.float64)
        if m.shape[0] != self.h * self.w:
            raise ShapeError(f"operator expects {self.h * self.w} rows, got {m.shape[0]}")
        return self.matrix @ m


def materialize_down(h: int, w: int, r: int) -> DownSampleOp:
    if r < 1 or h % r or w % r:
        raise ShapeError(f"factor {r} does not divide shape ({h},{w})")
    oh, ow = h // r, w // r
    mat = np.zeros((oh * ow, h * w))
    inv = 1.0 / (r * r)
    for i in range(oh):
        for j in range(ow):
            row = i * ow + j
            for di in range(r):
                for dj in range(r):
                    mat[row, (i * r + di) * w + (j * r + dj)] = inv
    return DownSampleOp(h, w, r, mat)


def up_interpolate_matrix_view(tmap, dst_h: int, dst_w: int,
                               kind: Kernel = Kernel.CUBIC_BSPLINE,
                               literal_offsets: bool = False) -> np.ndarray:
    """Matricized ``up_interpolate`` output, for callers working in (hw, d)."""
    return matricize(up_interpolate(tmap, dst_h, dst_w, kind, literal_offsets))
