"""The flow-based autoregressive pipeline: tokenizer (downsample pyramid),
per-scale autoregressive transformer, linear-path flow, the modulated
flow-matching network, the training loss, and Euler-integration inference.

Scale i (1-based) works at spatial shape (h / r_i, w / r_i) with
r_i = a^(K - i); scale K is the full latent resolution. Sequences fed to
the per-scale transformer are the row-concatenation of the conditioning
map and the up-sampled previous scales, exactly one block per scale.
"""

from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .blocks import (AttnParams, FfnParams, attention, attn_params_from_json,
                     attn_params_to_json, ffn, ffn_params_from_json,
                     ffn_params_to_json, layer_norm, mlp)
from .errors import DomainError, ShapeError
from .interp import Kernel, down_sample, up_interpolate
from .rng import substream
from .tensors import (as_matrix, as_token_map, matricize, matrix_from_json,
                      matrix_to_json, tensorize)


@dataclass(frozen=True)
class ScaleParams:
    """Attention + feed-forward weights of one autoregressive scale."""

    attn: AttnParams
    ffn: FfnParams


@dataclass(frozen=True)
class FlowMatchParams:
    """Weights of one scale's flow-matching network.

    mlp_mod maps c -> 6c and its output is split, in declaration order,
    into the six modulation chunks (alpha1, alpha2, beta1, beta2,
    gamma1, gamma2).
    """

    mlp_mod_w: np.ndarray
    mlp_mod_b: np.ndarray
    attn: AttnParams
    mlp_out_w: np.ndarray
    mlp_out_b: np.ndarray
    ln_eps: float = 1e-6

    def __post_init__(self):
        object.__setattr__(self, "mlp_mod_w", as_matrix(self.mlp_mod_w))
        object.__setattr__(self, "mlp_out_w", as_matrix(self.mlp_out_w))
        object.__setattr__(self, "mlp_mod_b", np.asarray(self.mlp_mod_b, dtype=np.float64).ravel())
        object.__setattr__(self, "mlp_out_b", np.asarray(self.mlp_out_b, dtype=np.float64).ravel())
        c = self.mlp_mod_w.shape[0]
        if self.mlp_mod_w.shape != (c, 6 * c) or self.mlp_mod_b.shape != (6 * c,):
            raise ShapeError("modulation mlp must map c -> 6c")
        if self.mlp_out_w.shape != (c, c) or self.mlp_out_b.shape != (c,):
            raise ShapeError("output mlp must map c -> c")


@dataclass(frozen=True)
class FlowArConfig:
    num_scales: int
    scale_base: int
    h: int
    w: int
    c: int
    tf_scales: Tuple[ScaleParams, ...]
    fm_scales: Tuple[FlowMatchParams, ...]
    steps: int = 8
    kernel: Kernel = Kernel.CUBIC_BSPLINE

    def __post_init__(self):
        object.__setattr__(self, "tf_scales", tuple(self.tf_scales))
        object.__setattr__(self, "fm_scales", tuple(self.fm_scales))
        if self.num_scales < 1 or self.scale_base < 1:
            raise ShapeError("num_scales and scale_base must be positive")
        r1 = self.scale_base ** (self.num_scales - 1)
        if self.h % r1 or self.w % r1:
            raise ShapeError(f"coarsest factor {r1} must divide latent shape ({self.h},{self.w})")
        if len(self.tf_scales) != self.num_scales or len(self.fm_scales) != self.num_scales:
            raise ShapeError("need exactly one ScaleParams and one FlowMatchParams per scale")
        if self.steps < 1:
            raise ShapeError("steps must be >= 1")

    def factor(self, i: int) -> int:
        """Downsampling factor r_i = a^(K-i) of 1-based scale i."""
        return self.scale_base ** (self.num_scales - i)

    def scale_shape(self, i: int) -> Tuple[int, int]:
        r = self.factor(i)
        return self.h // r, self.w // r

    def seq_len(self, i: int) -> int:
        return sum(sh * sw for sh, sw in (self.scale_shape(j) for j in range(1, i + 1)))


def vae_tokenize(x, cfg: FlowArConfig) -> List[np.ndarray]:
    """Token maps Y^1..Y^K, coarsest first: Y^i = downsample(X, r_i)."""
    x = as_token_map(x)
    if x.shape != (cfg.h, cfg.w, cfg.c):
        raise ShapeError(f"latent must be ({cfg.h},{cfg.w},{cfg.c}), got {x.shape}")
    return [down_sample(x, cfg.factor(i)) for i in range(1, cfg.num_scales + 1)]


def build_sequence(z_init, prev_maps: Sequence[np.ndarray], cfg: FlowArConfig, i: int) -> np.ndarray:
    """Sequence Z^i: z_init then each previous map up-sampled one scale."""
    z_init = as_token_map(z_init)
    if z_init.shape[:2] != cfg.scale_shape(1):
        raise ShapeError(f"z_init shape {z_init.shape[:2]} != coarsest scale {cfg.scale_shape(1)}")
    if len(prev_maps) != i - 1:
        raise ShapeError(f"scale {i} needs {i - 1} previous maps, got {len(prev_maps)}")
    blocks = [matricize(z_init)]
    for j, m in enumerate(prev_maps, start=1):
        m = as_token_map(m)
        if m.shape[:2] != cfg.scale_shape(j):
            raise ShapeError(f"previous map {j} has shape {m.shape[:2]}, expected {cfg.scale_shape(j)}")
        dh, dw = cfg.scale_shape(j + 1)
        blocks.append(matricize(up_interpolate(m, dh, dw, cfg.kernel)))
    return np.vstack(blocks)


def ar_forward(i: int, z, cfg: FlowArConfig) -> Tuple[np.ndarray, np.ndarray]:
    """Scale-i transformer FFN(Attn(Z)); also returns the last block.

    The last (h/r_i)*(w/r_i) rows are the scale's predicted token map.
    """
    z = as_matrix(z)
    want = cfg.seq_len(i)
    if z.shape != (want, cfg.c):
        raise ShapeError(f"scale {i} sequence must be ({want},{cfg.c}), got {z.shape}")
    p = cfg.tf_scales[i - 1]
    full = ffn(attention(z, p.attn), p.ffn)
    sh, sw = cfg.scale_shape(i)
    y_hat = tensorize(full[-sh * sw :], sh, sw)
    return full, y_hat


def flow_interpolate(y, f0, t: float) -> np.ndarray:
    """Linear path t*Y + (1-t)*F0 between noise and target."""
    y = as_token_map(y)
    f0 = as_token_map(f0)
    if y.shape != f0.shape:
        raise ShapeError(f"shape mismatch {y.shape} vs {f0.shape}")
    if not 0.0 <= t <= 1.0:
        raise DomainError(f"t={t} outside [0, 1]")
    return t * y + (1.0 - t) * f0


def flow_velocity(y, f0) -> np.ndarray:
    """Path velocity Y - F0, constant in t."""
    y = as_token_map(y)
    f0 = as_token_map(f0)
    if y.shape != f0.shape:
        raise ShapeError(f"shape mismatch {y.shape} vs {f0.shape}")
    return y - f0


def flow_matching_forward(f_t, y_hat, t: float, fm: FlowMatchParams,
                          return_intermediates: bool = False):
    """Velocity prediction for one scale.

    Step 1 modulates on the conditioning map: the c -> 6c affine of
    (y_hat + t) splits into alpha1, alpha2, beta1, beta2, gamma1, gamma2.
    Step 2: Attn(gamma1 * LN(F_t) + beta1) * alpha1.
    Step 3: MLP(gamma2 * LN(step2) + beta2) * alpha2.
    """
    f_t = as_token_map(f_t)
    y_hat = as_token_map(y_hat)
    if f_t.shape != y_hat.shape:
        raise ShapeError(f"shape mismatch {f_t.shape} vs {y_hat.shape}")
    h, w, c = f_t.shape
    if fm.mlp_mod_w.shape[0] != c:
        raise ShapeError(f"flow-matching params built for c={fm.mlp_mod_w.shape[0]}, input has c={c}")
    mod = mlp(matricize(y_hat) + float(t), fm.mlp_mod_w, fm.mlp_mod_b)
    a1, a2, b1, b2, g1, g2 = (mod[:, k * c : (k + 1) * c] for k in range(6))
    inner = attention(g1 * layer_norm(matricize(f_t), fm.ln_eps) + b1, fm.attn) * a1
    out = mlp(g2 * layer_norm(inner, fm.ln_eps) + b2, fm.mlp_out_w, fm.mlp_out_b) * a2
    result = tensorize(out, h, w)
    if return_intermediates:
        return result, {
            "alpha1": a1, "alpha2": a2, "beta1": b1,
            "beta2": b2, "gamma1": g1, "gamma2": g2,
            "attn_modulated": tensorize(inner, h, w),
        }
    return result


NnFn = Callable[[np.ndarray, np.ndarray, float, int], np.ndarray]


def flowar_loss(cfg: FlowArConfig, x, f0s: Sequence[np.ndarray],
                t_draws: Sequence[np.ndarray], z_init=None,
                nn_fn: Optional[NnFn] = None) -> float:
    """Flow-matching training objective on one latent.

    Sums, over scales, the Monte Carlo average over the supplied t draws
    of the squared Frobenius error between the predicted and the true
    path velocity. A prediction off by a constant c therefore costs
    c^2 * (h/r_i * w/r_i * channels) per scale. ``z_init`` defaults to
    the coarsest token map; ``nn_fn(f_t, y_hat, t, scale)`` overrides the
    built-in network (used by oracle tests).
    """
    ys = vae_tokenize(x, cfg)
    if z_init is None:
        z_init = ys[0]
    if len(f0s) != cfg.num_scales or len(t_draws) != cfg.num_scales:
        raise ShapeError("need one F0 draw and one t-draw array per scale")
    if nn_fn is None:
        nn_fn = lambda f_t, y_hat, t, i: flow_matching_forward(f_t, y_hat, t, cfg.fm_scales[i - 1])
    total = 0.0
    for i in range(1, cfg.num_scales + 1):
        y = ys[i - 1]
        f0 = as_token_map(f0s[i - 1])
        if f0.shape != y.shape:
            raise ShapeError(f"scale {i}: F0 shape {f0.shape} != token map shape {y.shape}")
        z = build_sequence(z_init, ys[: i - 1], cfg, i)
        _, y_hat = ar_forward(i, z, cfg)
        v = flow_velocity(y, f0)
        ts = np.atleast_1d(np.asarray(t_draws[i - 1], dtype=np.float64))
        term = 0.0
        for t in ts:
            pred = nn_fn(flow_interpolate(y, f0, float(t)), y_hat, float(t), i)
            diff = np.asarray(pred, dtype=np.float64) - v
            term += float(np.sum(diff * diff))
        total += term / ts.size
    return total


def draw_loss_inputs(cfg: FlowArConfig, seed: int, samples: int):
    """Seeded per-scale F0 draws and t samples for ``flowar_loss``."""
    f0s, t_draws = [], []
    for i in range(1, cfg.num_scales + 1):
        sh, sw = cfg.scale_shape(i)
        f0s.append(substream(seed, "loss-f0", i).standard_normal((sh, sw, cfg.c)))
        t_draws.append(substream(seed, "loss-t", i).uniform(0.0, 1.0, samples))
    return f0s, t_draws


def flowar_infer(cfg: FlowArConfig, z_init, seed: int, steps: Optional[int] = None,
                 record: Optional[list] = None) -> np.ndarray:
    """Generate the finest-scale map by per-scale Euler integration.

    Each scale conditions the transformer on the up-sampled outputs so
    far, draws a fresh seeded Gaussian start, and integrates the learned
    velocity field over t in [0, 1] with ``steps`` Euler steps (velocity
    evaluated at the start of each step, so steps=1 is the single-
    evaluation reading). Fully deterministic given (seed, steps).
    """
    steps = cfg.steps if steps is None else int(steps)
    if steps < 1:
        raise ShapeError("steps must be >= 1")
    z_init = as_token_map(z_init)
    outputs: List[np.ndarray] = []
    for i in range(1, cfg.num_scales + 1):
        z = build_sequence(z_init, outputs, cfg, i)
        _, s_i = ar_forward(i, z, cfg)
        sh, sw = cfg.scale_shape(i)
        f = substream(seed, "infer-f0", i).standard_normal((sh, sw, cfg.c))
        for k in range(steps):
            t = k / steps
            f = f + flow_matching_forward(f, s_i, t, cfg.fm_scales[i - 1]) / steps
            if not np.all(np.isfinite(f)):
                raise DomainError(f"non-finite state at scale {i}, Euler step {k + 1}")
        outputs.append(f)
        if record is not None:
            record.append({
                "scale": i,
                "shape": [sh, sw, cfg.c],
                "seq_len": int(z.shape[0]),
                "cond_norm": float(np.sqrt(np.sum(s_i * s_i))),
                "out_norm": float(np.sqrt(np.sum(f * f))),
            })
    return outputs[-1]


def random_flowar_config(num_scales: int, scale_base: int, h: int, w: int, c: int,
                         seed: int, steps: int = 8,
                         kernel: Kernel = Kernel.CUBIC_BSPLINE) -> FlowArConfig:
    """Seeded Gaussian parameters, scale 1/sqrt(c), for demos and suites."""
    scale = 1.0 / np.sqrt(c)
    tf_scales, fm_scales = [], []
    for i in range(num_scales):
        rng = substream(seed, "flowar-tf", i)
        attn = AttnParams(
            w_q=rng.normal(0.0, scale, (c, c)),
            w_k=rng.normal(0.0, scale, (c, c)),
            w_v=rng.normal(0.0, scale, (c, c)),
        )
        cc = max(4, c)
        f = FfnParams(
            w1=rng.normal(0.0, scale, (cc, c)),
            b1=rng.normal(0.0, scale, cc),
            w2=rng.normal(0.0, scale, (c, cc)),
            b2=rng.normal(0.0, scale, c),
        )
        tf_scales.append(ScaleParams(attn=attn, ffn=f))
        rng = substream(seed, "flowar-fm", i)
        fm_scales.append(FlowMatchParams(
            mlp_mod_w=rng.normal(0.0, scale, (c, 6 * c)),
            mlp_mod_b=rng.normal(0.0, scale, 6 * c),
            attn=AttnParams(
                w_q=rng.normal(0.0, scale, (c, c)),
                w_k=rng.normal(0.0, scale, (c, c)),
                w_v=rng.normal(0.0, scale, (c, c)),
            ),
            mlp_out_w=rng.normal(0.0, scale, (c, c)),
            mlp_out_b=rng.normal(0.0, scale, c),
        ))
    return FlowArConfig(num_scales=num_scales, scale_base=scale_base, h=h, w=w, c=c,
                        tf_scales=tuple(tf_scales), fm_scales=tuple(fm_scales),
                        steps=steps, kernel=kernel)


def config_to_json(cfg: FlowArConfig) -> dict:
    return {
        "num_scales": cfg.num_scales,
        "scale_base": cfg.scale_base,
        "h": cfg.h, "w": cfg.w, "c": cfg.c,
        "steps": cfg.steps,
        "kernel": cfg.kernel.value,
        "tf_scales": [
            {"attn": attn_params_to_json(p.attn), "ffn": ffn_params_to_json(p.ffn)}
            for p in cfg.tf_scales
        ],
        "fm_scales": [
            {
                "mlp_mod_w": matrix_to_json(p.mlp_mod_w),
                "mlp_mod_b": [float(v) for v in p.mlp_mod_b],
                "attn": attn_params_to_json(p.attn),
                "mlp_out_w": matrix_to_json(p.mlp_out_w),
                "mlp_out_b": [float(v) for v in p.mlp_out_b],
                "ln_eps": p.ln_eps,
            }
            for p in cfg.fm_scales
        ],
    }


def config_from_json(obj) -> FlowArConfig:
    tf_scales = tuple(
        ScaleParams(attn=attn_params_from_json(p["attn"]), ffn=ffn_params_from_json(p["ffn"]))
        for p in obj["tf_scales"]
    )
    fm_scales = tuple(
        FlowMatchParams(
            mlp_mod_w=matrix_from_json(p["mlp_mod_w"]),
            mlp_mod_b=np.asarray(p["mlp_mod_b"], dtype=np.float64),
            attn=attn_params_from_json(p["attn"]),
            mlp_out_w=matrix_from_json(p["mlp_out_w"]),
            mlp_out_b=np.asarray(p["mlp_out_b"], dtype=np.float64),
            ln_eps=float(p.get("ln_eps", 1e-6)),
        )
        for p in obj["fm_scales"]
    )
    return FlowArConfig(
        num_scales=int(obj["num_scales"]), scale_base=int(obj["scale_base"]),
        h=int(obj["h"]), w=int(obj["w"]), c=int(obj["c"]),
        tf_scales=tf_scales, fm_scales=fm_scales,
        steps=int(obj.get("steps", 8)),
        kernel=Kernel(obj.get("kernel", Kernel.CUBIC_BSPLINE.value)),
    )
