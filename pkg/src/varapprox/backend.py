"""Hot numeric kernels: numba-jitted loops with a pure-NumPy fallback.

The default backend is numba whenever it imports; set
``VARAPPROX_BACKEND=numpy`` to force the vectorized NumPy path, or
``VARAPPROX_BACKEND=numba`` to fail loudly when numba is missing.
Both paths are always importable (see ``benchmarks/bench_backends.py``),
only the public ``stencil_apply`` / ``conv3x3_apply`` names are switched.
"""

import os

import numpy as np

try:
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    njit = None
    HAS_NUMBA = False


def _stencil_apply_loops(src, row_idx, row_w, col_idx, col_w):
    # src: (h, w, d); row_idx/row_w: (H, 4); col_idx/col_w: (W, 4)
    H = row_idx.shape[0]
    W = col_idx.shape[0]
    d = src.shape[2]
    out = np.zeros((H, W, d))
    for i in range(H):
        for j in range(W):
            for s in range(4):
                wi = row_w[i, s]
                si = row_idx[i, s]
                for t in range(4):
                    w = wi * col_w[j, t]
                    sj = col_idx[j, t]
                    for c in range(d):
                        out[i, j, c] += w * src[si, sj, c]
    return out


def _stencil_apply_numpy(src, row_idx, row_w, col_idx, col_w):
    # Gather the 4x4 neighborhood of every output site, then contract the
    # separable weights. Independent of the materialized-matrix route.
    patch = src[row_idx[:, None, :, None], col_idx[None, :, None, :], :]
    return np.einsum("is,jt,ijstc->ijc", row_w, col_w, patch)


def _conv3x3_loops(padded, kernels, bias):
    # padded: (h+2, w+2, c_in); kernels: (c_out, 3, 3, c_in)
    h = padded.shape[0] - 2
    w = padded.shape[1] - 2
    c_in = padded.shape[2]
    c_out = kernels.shape[0]
    out = np.full((h, w, c_out), bias)
    for i in range(h):
        for j in range(w):
            for l in range(c_out):
                acc = 0.0
                for m in range(3):
                    for n in range(3):
                        for c in range(c_in):
                            acc += padded[i + m, j + n, c] * kernels[l, m, n, c]
                out[i, j, l] += acc
    return out


def _conv3x3_numpy(padded, kernels, bias):
    h = padded.shape[0] - 2
    w = padded.shape[1] - 2
    out = np.full((h, w, kernels.shape[0]), bias)
    for m in range(3):
        for n in range(3):
            out += np.einsum("ijc,lc->ijl", padded[m : m + h, n : n + w, :], kernels[:, m, n, :])
    return out


if HAS_NUMBA:
    _stencil_apply_numba = njit(cache=True)(_stencil_apply_loops)
    _conv3x3_numba = njit(cache=True)(_conv3x3_loops)
else:
    _stencil_apply_numba = None
    _conv3x3_numba = None


def _select_backend() -> str:
    flag = os.environ.get("VARAPPROX_BACKEND", "").strip().lower()
    if flag == "numpy":
        return "numpy"
    if flag == "numba":
        if not HAS_NUMBA:
            raise ImportError("VARAPPROX_BACKEND=numba but numba is not installed")
        return "numba"
    if flag == "":
        return "numba" if HAS_NUMBA else "numpy"
    raise ValueError(f"unknown VARAPPROX_BACKEND {flag!r}; expected 'numba' or 'numpy'")


_BACKEND = _select_backend()

if _BACKEND == "numba":
    stencil_apply = _stencil_apply_numba
    conv3x3_apply = _conv3x3_numba
else:
    stencil_apply = _stencil_apply_numpy
    conv3x3_apply = _conv3x3_numpy


def active_backend() -> str:
    """Name of the kernel backend selected at import time."""
    return _BACKEND


def warm_up() -> None:
    """Trigger JIT compilation of the hot kernels (no-op on numpy)."""
    src = np.zeros((2, 2, 1))
    idx = np.zeros((2, 4), dtype=np.int64)
    w = np.full((2, 4), 0.25)
    stencil_apply(src, idx, w, idx, w)
    conv3x3_apply(np.zeros((3, 3, 1)), np.zeros((1, 3, 3, 1)), 0.0)
