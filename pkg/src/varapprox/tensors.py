"""Dense token maps, the (h, w, d) <-> (hw, d) flattening convention, and
the norms used throughout the bound checks.

A token map is a float64 array of shape ``(h, w, d)``; its matrix view is
the row-major flattening to ``(h*w, d)`` (row ``k`` holds the token at
``i = k // w``, ``j = k % w``; arrays here are 0-indexed). All library
arithmetic is 64-bit.
"""

import numpy as np

from .errors import ConvergenceError, DomainError, ShapeError


def as_matrix(a) -> np.ndarray:
    m = np.asarray(a, dtype=np.float64)
    if m.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got ndim={m.ndim}")
    return m


def as_token_map(a) -> np.ndarray:
    t = np.asarray(a, dtype=np.float64)
    if t.ndim != 3:
        raise ShapeError(f"expected an (h, w, d) token map, got ndim={t.ndim}")
    return t


def require_finite(a, what: str = "array") -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if not np.all(np.isfinite(a)):
        raise DomainError(f"{what} contains non-finite entries")
    return a


def tensorize(m, h: int, w: int) -> np.ndarray:
    """Reshape an (h*w, d) matrix into its (h, w, d) token map, losslessly."""
    m = as_matrix(m)
    if m.shape[0] != h * w:
        raise ShapeError(f"cannot tensorize {m.shape[0]} rows into {h}x{w}")
    return m.reshape(h, w, m.shape[1])


def matricize(t) -> np.ndarray:
    """Flatten an (h, w, d) token map to its (h*w, d) matrix view."""
    t = as_token_map(t)
    return t.reshape(t.shape[0] * t.shape[1], t.shape[2])


def vector_norm(x, p) -> float:
    """l1, l2, or l-infinity norm of a non-empty vector."""
    x = np.asarray(x, dtype=np.float64).ravel()
    if x.size == 0:
        raise DomainError("vector_norm of an empty vector")
    require_finite(x, "vector")
    if p == 1:
        return float(np.sum(np.abs(x)))
    if p == 2:
        return float(np.sqrt(np.sum(x * x)))
    if p in ("inf", np.inf, float("inf")):
        return float(np.max(np.abs(x)))
    raise DomainError(f"unsupported norm order {p!r}; use 1, 2 or 'inf'")


def frobenius_norm(a) -> float:
    a = np.asarray(a, dtype=np.float64)
    return float(np.sqrt(np.sum(a * a)))


# Deterministic restart stream for power iteration; a fixed constant so
# spectral_norm stays a pure function of its arguments.
_RESTART_SEED = 0x5EED


def spectral_norm(a, tol: float = 1e-10, max_iter: int = 50_000) -> float:
    """Largest singular value via power iteration on A^T A.

    Starts from the normalized all-ones vector; if that start lies in (or
    converges inside) a non-dominant eigenspace, a seeded deterministic
    restart catches it. Raises ConvergenceError after ``max_iter``
    iterations, carrying the last estimate and residual.
    """
    a = as_matrix(a)
    require_finite(a, "matrix")
    if tol <= 0:
        raise DomainError("tol must be positive")
    if not np.any(a):
        return 0.0
    b = a.T @ a
    n = b.shape[0]
    scale = float(np.max(np.abs(b)))

    def run(v, budget):
        lam = 0.0
        for _ in range(budget):
            w = b @ v
            nw = float(np.sqrt(np.sum(w * w)))
            if nw == 0.0:
                return 0.0, v, 0.0, True  # v in the null space; caller restarts
            v = w / nw
            lam = float(v @ (b @ v))
            res = float(np.sqrt(np.sum((b @ v - lam * v) ** 2)))
            if res <= tol * max(lam, scale * 1e-300):
                return lam, v, res, True
        return lam, v, res, False

    rng = np.random.default_rng(_RESTART_SEED)
    v0 = np.ones(n) / np.sqrt(n)
    lam1, v1, res1, ok1 = run(v0, max_iter)
    if ok1 and lam1 == 0.0:
        v1 = rng.standard_normal(n)
        v1 /= np.sqrt(np.sum(v1 * v1))
        lam1, v1, res1, ok1 = run(v1, max_iter)
    # Cross-check against an independent start; keep the larger eigenvalue.
    vr = rng.standard_normal(n)
    vr /= np.sqrt(np.sum(vr * vr))
    lam2, v2, res2, ok2 = run(vr, max_iter)
    if not (ok1 or ok2):
        raise ConvergenceError(
            f"power iteration did not converge within {max_iter} iterations",
            estimate=float(np.sqrt(max(lam1, lam2, 0.0))),
            residual=min(res1, res2),
            iterate=v1 if lam1 >= lam2 else v2,
        )
    lam = max(lam1 if ok1 else 0.0, lam2 if ok2 else 0.0)
    return float(np.sqrt(max(lam, 0.0)))


def token_map_to_json(t) -> dict:
    t = as_token_map(t)
    h, w, d = t.shape
    return {"h": h, "w": w, "d": d, "data": [float(x) for x in t.ravel()]}


def token_map_from_json(obj) -> np.ndarray:
    h, w, d = int(obj["h"]), int(obj["w"]), int(obj["d"])
    data = np.asarray(obj["data"], dtype=np.float64)
    if data.size != h * w * d:
        raise ShapeError(f"data length {data.size} != {h}*{w}*{d}")
    return data.reshape(h, w, d)


def matrix_to_json(m) -> dict:
    m = as_matrix(m)
    return {"rows": m.shape[0], "cols": m.shape[1], "data": [float(x) for x in m.ravel()]}


def matrix_from_json(obj) -> np.ndarray:
    rows, cols = int(obj["rows"]), int(obj["cols"])
    data = np.asarray(obj["data"], dtype=np.float64)
    if data.size != rows * cols:
        raise ShapeError(f"data length {data.size} != {rows}*{cols}")
    return data.reshape(rows, cols)
