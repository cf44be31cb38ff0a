"""Seeded default check families behind the ``verify`` subcommands.

Each suite function returns a list of report dicts (one per named check,
sorted by name); all randomness flows from the root seed through named
substreams, so a (seed, samples, alpha) triple pins every verdict.
"""

import math
from typing import List

import numpy as np

from . import analysis, blocks, flowar, interp, tensors
from .analysis import RHS_TOLERANCE, BoundReport
from .errors import HypothesisError
from .rng import substream


def _report(name, lhs, rhs, seed, samples=0, norm_kind="linf", passed=None,
            hypotheses_met=True, **details) -> dict:
    if passed is None:
        passed = bool(hypotheses_met and lhs <= rhs + RHS_TOLERANCE)
    return BoundReport(
        name=name, lhs_measured=float(lhs), rhs_theoretical=float(rhs),
        passed=bool(passed), samples=int(samples), norm_kind=norm_kind,
        seeds={"root": int(seed)}, hypotheses_met=bool(hypotheses_met),
        details=details,
    ).to_dict()


def _linf(a, b) -> float:
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b)))) if np.asarray(a).size else 0.0


# ---------------------------------------------------------------------------
# interp
# ---------------------------------------------------------------------------

def suite_interp(seed: int, samples: int, alpha: str) -> List[dict]:
    out = []
    kernels = [interp.Kernel.CUBIC_BSPLINE, interp.Kernel.KEYS_CATMULL_ROM]

    for literal, tag, cases in ((False, "standard", 100), (True, "literal-offsets", 50)):
        rng = substream(seed, "interp-equivalence", tag)
        worst = 0.0
        for c in range(cases):
            sh, sw = int(rng.integers(1, 7)), int(rng.integers(1, 7))
            dh, dw = int(rng.integers(sh, 13)), int(rng.integers(sw, 13))
            d = int(rng.integers(1, 4))
            k = kernels[c % 2]
            t = rng.uniform(-1.0, 1.0, (sh, sw, d))
            direct = interp.up_interpolate(t, dh, dw, k, literal)
            op = interp.materialize_up(sh, sw, dh, dw, k, literal)
            worst = max(worst, _linf(op.apply(tensors.matricize(t)), tensors.matricize(direct)))
        out.append(_report(f"interp/operator-equivalence-{tag}", worst, 1e-10, seed,
                           samples=cases, cases=cases))

    rng = substream(seed, "interp-rowsums")
    worst_up, worst_down = 0.0, 0.0
    for c in range(40):
        sh, sw = int(rng.integers(1, 7)), int(rng.integers(1, 7))
        dh, dw = int(rng.integers(sh, 13)), int(rng.integers(sw, 13))
        op = interp.materialize_up(sh, sw, dh, dw, kernels[c % 2])
        worst_up = max(worst_up, float(np.max(np.abs(op.matrix.sum(axis=1) - 1.0))))
    for r in (1, 2, 3):
        op = interp.materialize_down(6, 6, r)
        worst_down = max(worst_down, float(np.max(np.abs(op.matrix.sum(axis=1) - 1.0))))
    out.append(_report("interp/up-row-sums", worst_up, 1e-9, seed, samples=40))
    out.append(_report("interp/down-row-sums", worst_down, 1e-12, seed, samples=3))

    rng = substream(seed, "interp-constants")
    worst = 0.0
    for c in range(20):
        value = float(rng.uniform(-3.0, 3.0))
        t = np.full((int(rng.integers(1, 5)), int(rng.integers(1, 5)), 2), value)
        up = interp.up_interpolate(t, t.shape[0] + 3, t.shape[1] + 2, kernels[c % 2])
        worst = max(worst, float(np.max(np.abs(up - value))))
    t = np.full((4, 4, 2), 1.25)
    worst = max(worst, float(np.max(np.abs(interp.down_sample(t, 2) - 1.25))))
    out.append(_report("interp/constant-preservation", worst, 1e-10, seed, samples=21))

    rng = substream(seed, "interp-linearity")
    worst = 0.0
    for c in range(20):
        t1 = rng.uniform(-1.0, 1.0, (3, 3, 2))
        t2 = rng.uniform(-1.0, 1.0, (3, 3, 2))
        a, b = rng.uniform(-2.0, 2.0, 2)
        k = kernels[c % 2]
        lhs = interp.up_interpolate(a * t1 + b * t2, 6, 6, k)
        rhs = a * interp.up_interpolate(t1, 6, 6, k) + b * interp.up_interpolate(t2, 6, 6, k)
        worst = max(worst, _linf(lhs, rhs))
    out.append(_report("interp/linearity", worst, 1e-10, seed, samples=20))

    rng = substream(seed, "interp-channels")
    t = rng.uniform(-1.0, 1.0, (3, 4, 5))
    perm = rng.permutation(5)
    worst = _linf(interp.up_interpolate(t, 7, 8)[:, :, perm],
                  interp.up_interpolate(t[:, :, perm], 7, 8))
    out.append(_report("interp/channel-permutation", worst, 1e-12, seed, samples=1))

    xs = np.arange(-3.0, 3.0 + 1e-12, 1e-3)
    bs = interp._kernel_eval_array(interp.Kernel.CUBIC_BSPLINE, xs)
    violation = max(float(max(0.0, bs.max() - 1.0)), float(max(0.0, -bs.min())))
    out.append(_report("interp/bspline-range", violation, 0.0, seed, samples=xs.size,
                       grid="[-3,3] step 1e-3"))

    ks = interp._kernel_eval_array(interp.Kernel.KEYS_CATMULL_ROM, xs)
    grid_min = float(ks.min())
    # Keys a=-0.5 dips to -2/27 at |x| = 4/3, violating the [0,1] kernel range.
    err = abs(grid_min - (-2.0 / 27.0))
    out.append(_report("interp/keys-range-violation", err, 1e-6, seed, samples=xs.size,
                       passed=bool(grid_min < 0.0 and err <= 1e-6),
                       grid_min=grid_min, expected_min=-2.0 / 27.0))

    x_init = substream(seed, "interp-pyramid").normal(0.0, 1.0, (1, 1, 3))
    base = interp.pyramid_up([], x_init, interp.Kernel.CUBIC_BSPLINE, [(1, 1)])
    exact = 0.0 if (len(base) == 1 and np.array_equal(base[0], x_init)) else 1.0
    out.append(_report("interp/pyramid-base-identity", exact, 0.0, seed, samples=1))

    maps = [x_init, interp.up_interpolate(x_init, 2, 2)]
    lifted = interp.pyramid_up(maps, x_init, interp.Kernel.CUBIC_BSPLINE,
                               [(1, 1), (2, 2), (4, 4)])
    shapes_ok = [m.shape[:2] for m in lifted] == [(1, 1), (2, 2), (4, 4)]
    out.append(_report("interp/pyramid-schedule", 0.0 if shapes_ok else 1.0, 0.0, seed, samples=1))

    rng = substream(seed, "interp-down")
    t = rng.uniform(-1.0, 1.0, (6, 4, 3))
    op = interp.materialize_down(6, 4, 2)
    worst = _linf(op.apply(tensors.matricize(t)), tensors.matricize(interp.down_sample(t, 2)))
    worst = max(worst, _linf(interp.down_sample(np.array([[[1.0], [2.0]], [[3.0], [4.0]]]), 2),
                             np.array([[[2.5]]])))
    out.append(_report("interp/downsample-matrix-exact", worst, 1e-12, seed, samples=2))

    return sorted(out, key=lambda r: r["name"])


# ---------------------------------------------------------------------------
# attention / blocks
# ---------------------------------------------------------------------------

def _random_attn(rng, d, with_output=False) -> blocks.AttnParams:
    s = 1.0 / np.sqrt(d)
    return blocks.AttnParams(
        w_q=rng.normal(0.0, s, (d, d)),
        w_k=rng.normal(0.0, s, (d, d)),
        w_v=rng.normal(0.0, s, (d, d)),
        w_o=rng.normal(0.0, s, (d, d)) if with_output else None,
    )


def suite_attention(seed: int, samples: int, alpha: str) -> List[dict]:
    out = []

    rng = substream(seed, "attn-stochastic")
    worst = 0.0
    for _ in range(100):
        n, d = int(rng.integers(1, 9)), int(rng.integers(1, 5))
        x = rng.uniform(-2.0, 2.0, (n, d))
        w = blocks.attention_weights(x, _random_attn(rng, d))
        worst = max(worst, float(np.max(np.abs(w.sum(axis=1) - 1.0))))
    out.append(_report("attention/row-stochastic", worst, 1e-12, seed, samples=100))

    rng = substream(seed, "attn-permutation")
    worst = 0.0
    for _ in range(100):
        n, d = int(rng.integers(2, 9)), int(rng.integers(1, 5))
        x = rng.uniform(-2.0, 2.0, (n, d))
        p = _random_attn(rng, d)
        pi = rng.permutation(n)
        worst = max(worst, _linf(blocks.attention(x[pi], p), blocks.attention(x, p)[pi]))
    out.append(_report("attention/permutation-equivariance", worst, 1e-10, seed, samples=100))

    rng = substream(seed, "softmax")
    worst_shift, worst_sum = 0.0, 0.0
    for _ in range(50):
        z = rng.uniform(-5.0, 5.0, int(rng.integers(1, 9)))
        c = float(rng.uniform(-100.0, 100.0))
        worst_shift = max(worst_shift, _linf(blocks.softmax(z + c), blocks.softmax(z)))
        s = blocks.softmax(z)
        worst_sum = max(worst_sum, abs(float(s.sum()) - 1.0))
        if np.any(s <= 0.0):
            worst_sum = 1.0
    out.append(_report("attention/softmax-shift-invariance", worst_shift, 1e-12, seed, samples=50))
    out.append(_report("attention/softmax-probability", worst_sum, 1e-12, seed, samples=50))

    rng = substream(seed, "attn-single")
    x = rng.uniform(-2.0, 2.0, (1, 3))
    p = _random_attn(rng, 3)
    out.append(_report("attention/single-token", _linf(blocks.attention(x, p), x @ p.w_v),
                       0.0, seed, samples=1))

    rng = substream(seed, "attn-uniform")
    x = rng.uniform(-2.0, 2.0, (5, 3))
    w_v = rng.normal(0.0, 1.0, (3, 3))
    p = blocks.AttnParams(w_q=np.zeros((3, 3)), w_k=np.zeros((3, 3)), w_v=w_v)
    expected = np.tile(x.mean(axis=0) @ w_v, (5, 1))
    out.append(_report("attention/uniform-is-column-mean", _linf(blocks.attention(x, p), expected),
                       1e-12, seed, samples=1))

    rng = substream(seed, "ffn-residual")
    x = rng.uniform(-2.0, 2.0, (4, 3))
    p = blocks.FfnParams(w1=rng.normal(0.0, 1.0, (4, 3)), b1=rng.normal(0.0, 1.0, 4),
                         w2=np.zeros((3, 4)), b2=np.zeros(3))
    out.append(_report("blocks/ffn-residual", _linf(blocks.ffn(x, p), x), 0.0, seed, samples=1))

    rng = substream(seed, "conv-delta")
    t = rng.uniform(-1.0, 1.0, (4, 5, 2))
    kdelta = np.zeros((2, 3, 3, 2))
    kdelta[0, 1, 1, 0] = 1.0
    kdelta[1, 1, 1, 1] = 1.0
    out.append(_report("blocks/conv-delta-identity",
                       _linf(blocks.conv3x3(t, blocks.ConvParams(kdelta)), t),
                       0.0, seed, samples=1))

    rng = substream(seed, "layernorm")
    worst = 0.0
    for _ in range(30):
        x = rng.uniform(-2.0, 2.0, (int(rng.integers(1, 5)), int(rng.integers(2, 6))))
        x[:, 0] += 1e-3  # keep rows non-constant for the eps=0 exact mode
        y = blocks.layer_norm(x, eps=0.0)
        worst = max(worst, float(np.max(np.abs(y.mean(axis=1)))))
        worst = max(worst, float(np.max(np.abs(((y - y.mean(axis=1, keepdims=True)) ** 2).mean(axis=1) - 1.0))))
    out.append(_report("blocks/layernorm-row-stats", worst, 1e-9, seed, samples=30))

    return sorted(out, key=lambda r: r["name"])


# ---------------------------------------------------------------------------
# contextual mapping
# ---------------------------------------------------------------------------

def _distinct_token_dataset(rng):
    d = int(rng.integers(2, 5))
    length = int(rng.integers(2, 5))
    vocab_size = int(rng.integers(length, 9))
    vocab = rng.normal(0.0, 1.0, (vocab_size, d))
    norms = np.sqrt(np.sum(vocab * vocab, axis=1))
    vocab = vocab / norms[:, None] * rng.uniform(0.5, 2.0, vocab_size)[:, None]
    n_seq = int(rng.integers(2, 4))
    seqs = []
    for _ in range(n_seq):
        picks = rng.choice(vocab_size, size=length, replace=False)
        seqs.append(vocab[picks])
    return seqs, d


def suite_contextual(seed: int, samples: int, alpha: str) -> List[dict]:
    out = []

    trials = 100
    failures = 0
    worst_margin = -math.inf
    for trial in range(trials):
        rng = substream(seed, "contextual-trial", trial)
        seqs, d = _distinct_token_dataset(rng)
        attn = _random_attn(rng, d)
        sep = analysis.check_separateness(seqs)
        rep = analysis.contextual_mapping_check(
            lambda s: blocks.attention(s, attn), seqs, eps=sep.delta)
        if not rep.distinct_ok:
            failures += 1
        else:
            margin = rep.log_paper_delta - math.log(rep.delta_measured)
            worst_margin = max(worst_margin, margin)
    if not math.isfinite(worst_margin):
        worst_margin = 1.0
    out.append(_report("contextual/attention-distinct-ok", failures, 0.0, seed,
                       samples=trials, trials=trials, w_o_used=False))
    out.append(_report("contextual/log-delta-dominates-paper", worst_margin, 0.0, seed,
                       samples=trials,
                       note="log(paper delta) - log(measured delta), must be <= 0"))

    # Shared token, different vocabularies: the identity map cannot separate.
    a, b, c = np.array([1.0, 0.0]), np.array([0.0, 1.0]), np.array([1.0, 1.0])
    seqs = [np.stack([a, b]), np.stack([a, c])]
    rep = analysis.contextual_mapping_check(lambda s: s, seqs, eps=1.0)
    out.append(_report("contextual/identity-counterexample", 0.0 if not rep.distinct_ok else 1.0,
                       0.0, seed, samples=1,
                       note="identity must fail distinct_ok on the shared-token fixture"))

    sep = analysis.check_separateness([np.array([[2.0, 0.0], [0.0, 3.0]])])
    err = max(abs(sep.gamma_min - 2.0), abs(sep.gamma_max - 3.0),
              abs(sep.delta - math.sqrt(13.0)), abs(sep.kappa - 1.5))
    out.append(_report("contextual/separateness-basis-oracle", err, 1e-12, seed, samples=1))

    single = analysis.check_separateness([np.array([[2.0, 0.0]])])
    ok = math.isinf(single.delta) and single.sep_class is analysis.SeparationClass.TOKENWISE
    out.append(_report("contextual/separateness-single-token", 0.0 if ok else 1.0, 0.0, seed,
                       samples=1))

    return sorted(out, key=lambda r: r["name"])


# ---------------------------------------------------------------------------
# perturbation lemmas
# ---------------------------------------------------------------------------

def _left_matmul(a):
    return lambda x: a @ x


def _left_affine(a, c):
    return lambda x: a @ x + c


def _scaled_to(rng, shape, spec_norm):
    a = rng.normal(0.0, 1.0, shape)
    return a / tensors.spectral_norm(a) * spec_norm


def suite_perturbation(seed: int, samples: int, alpha: str) -> List[dict]:
    out = []

    trials = 100
    all_pass = True
    worst_slack = math.inf
    for trial in range(trials):
        rng = substream(seed, "two-layer", trial)
        m, m2, d = int(rng.integers(2, 5)), int(rng.integers(2, 5)), int(rng.integers(1, 4))
        g_mat = rng.normal(0.0, 1.0, (m2, m))
        c1 = rng.normal(0.0, 1.0, (m2, d))
        eps1 = float(np.sqrt(np.sum(c1 * c1)))
        f_mat = rng.normal(0.0, 1.0, (m2, m2))
        c2 = rng.normal(0.0, 0.3, (m2, d))
        eps2 = float(np.sqrt(np.sum(c2 * c2)))
        k1 = tensors.spectral_norm(f_mat) * (1.0 + 1e-9)
        rep = analysis.two_layer_bound_check(
            f=_left_affine(f_mat, c2), g=_left_matmul(g_mat),
            tau=_left_matmul(f_mat), phi=_left_affine(g_mat, c1),
            k1=k1, eps1=eps1, eps2=eps2, in_shape=(m, d),
            alpha=alpha, samples=min(samples, 100), seed=seed + trial,
            name=f"two-layer-trial-{trial}")
        all_pass = all_pass and rep.passed and rep.hypotheses_met
        worst_slack = min(worst_slack, rep.slack)
    out.append(_report("perturbation/two-layer-random", 0.0 if all_pass else 1.0, 0.0, seed,
                       samples=trials, norm_kind=alpha, worst_slack=worst_slack))

    # Tightness: tau = f = K1 * identity, g = phi + constant of norm eps1.
    rng = substream(seed, "two-layer-tight")
    k1 = 2.0
    c1 = rng.normal(0.0, 1.0, (3, 2))
    c1 *= 0.05 / np.sqrt(np.sum(c1 * c1))
    eps1 = 0.05
    f = lambda x: k1 * x
    g_mat = rng.normal(0.0, 1.0, (3, 3))
    rep = analysis.two_layer_bound_check(
        f=f, g=_left_affine(g_mat, c1), tau=f, phi=_left_matmul(g_mat),
        k1=k1, eps1=eps1, eps2=0.0, in_shape=(3, 2), alpha=alpha,
        samples=min(samples, 200), seed=seed, name="two-layer-tightness")
    eq_err = abs(rep.lhs_measured - rep.rhs_theoretical)
    out.append(_report("perturbation/two-layer-tightness", eq_err, 1e-9, seed,
                       samples=rep.samples, norm_kind=alpha,
                       passed=bool(rep.passed and eq_err <= 1e-9),
                       lhs=rep.lhs_measured, rhs=rep.rhs_theoretical))

    trials = 30
    all_pass = True
    for trial in range(trials):
        rng = substream(seed, "one-layer", trial)
        n = int(rng.integers(2, 6))
        j = int(rng.integers(1, n + 1))
        k2 = 2.0
        m, d = 3, 2
        mats = [_scaled_to(rng, (m, m), k2 * rng.uniform(0.3, 1.0)) for _ in range(n)]
        c = rng.normal(0.0, 1.0, (m, d))
        eps = 0.1
        c *= eps / np.sqrt(np.sum(c * c))
        vs = [_left_matmul(a) for a in mats]
        us = list(vs)
        us[j - 1] = _left_affine(mats[j - 1], c)
        rep = analysis.one_layer_substitution_check(
            us, vs, j=j, eps=eps, k2=k2, in_shape=(m, d), alpha=alpha,
            samples=min(samples, 100), seed=seed + trial, regime="linear",
            name=f"one-layer-trial-{trial}")
        all_pass = all_pass and rep.passed and rep.hypotheses_met
    out.append(_report("perturbation/one-layer-linear-random", 0.0 if all_pass else 1.0,
                       0.0, seed, samples=trials, norm_kind=alpha))

    # Tightness: v = 2*identity everywhere, three doubling layers past j.
    rng = substream(seed, "one-layer-tight")
    n, j, k2, eps = 4, 1, 2.0, 0.05
    c = rng.normal(0.0, 1.0, (3, 2))
    c *= eps / np.sqrt(np.sum(c * c))
    double = lambda x: 2.0 * x
    vs = [double] * n
    us = [_left_affine(2.0 * np.eye(3), c)] + [double] * (n - 1)
    rep = analysis.one_layer_substitution_check(
        us, vs, j=j, eps=eps, k2=k2, in_shape=(3, 2), alpha=alpha,
        samples=min(samples, 200), seed=seed, name="one-layer-tightness")
    eq_err = abs(rep.lhs_measured - 8.0 * eps)
    out.append(_report("perturbation/one-layer-tightness", eq_err, 1e-9, seed,
                       samples=rep.samples, norm_kind=alpha,
                       passed=bool(rep.passed and eq_err <= 1e-9),
                       lhs=rep.lhs_measured, rhs=rep.rhs_theoretical))

    trials = 20
    all_pass = True
    for trial in range(trials):
        rng = substream(seed, "telescoping", trial)
        n, m, d = 3, 3, 2
        us, vs = [], []
        for _ in range(n):
            a = rng.normal(0.0, 0.7, (m, m))
            us.append(_left_affine(a, rng.normal(0.0, 0.2, (m, d))))
            vs.append(_left_affine(a + rng.normal(0.0, 0.05, (m, m)),
                                   rng.normal(0.0, 0.2, (m, d))))
        rep = analysis.telescoping_check(us, vs, in_shape=(m, d), alpha=alpha,
                                         samples=min(samples, 100), seed=seed + trial,
                                         name=f"telescoping-trial-{trial}")
        all_pass = all_pass and rep.passed
    out.append(_report("perturbation/telescoping-random", 0.0 if all_pass else 1.0, 0.0,
                       seed, samples=trials, norm_kind=alpha))

    rng = substream(seed, "telescoping-single")
    a = rng.normal(0.0, 1.0, (3, 3))
    rep = analysis.telescoping_check(
        [_left_matmul(a)], [_left_affine(a, rng.normal(0.0, 0.1, (3, 2)))],
        in_shape=(3, 2), alpha=alpha, samples=min(samples, 200), seed=seed,
        name="telescoping-single")
    out.append(_report("perturbation/telescoping-single-term",
                       abs(rep.lhs_measured - rep.rhs_theoretical), 1e-12, seed,
                       samples=rep.samples, norm_kind=alpha))

    return sorted(out, key=lambda r: r["name"])


# ---------------------------------------------------------------------------
# universality
# ---------------------------------------------------------------------------

def _universality_stack(rng, mode: str, depth: int, k2: float, d: int):
    """Linear model stacks whose resampling layers are real materialized
    operators; target layers add small constant offsets, so every layer
    hypothesis holds by construction."""
    if mode == "up":
        shapes = [(1, 1), (2, 2), (4, 4), (8, 8), (16, 16)][: depth + 1]
        ops = [interp.materialize_up(*shapes[i], *shapes[i + 1]).matrix for i in range(depth)]
    else:
        shapes = [(16, 16), (8, 8), (4, 4), (2, 2), (1, 1)][-(depth + 1):]
        ops = [interp.materialize_down(*shapes[i], 2).matrix for i in range(depth)]
    target_pairs, model_pairs, k1s, eps1s, eps2s = [], [], [], [], []
    for i in range(depth):
        phi = ops[i]
        rows = phi.shape[0]
        t_mat = rng.normal(0.0, 1.0, (rows, rows))
        budget = 0.95 * k2 / (tensors.spectral_norm(t_mat) * max(tensors.spectral_norm(phi), 1e-12))
        t_mat = t_mat * budget * rng.uniform(0.5, 1.0)
        c1 = rng.normal(0.0, 1.0, (rows, d))
        c1 *= 0.02 / np.sqrt(np.sum(c1 * c1))
        c2 = rng.normal(0.0, 1.0, (rows, d))
        c2 *= 0.02 / np.sqrt(np.sum(c2 * c2))
        target_pairs.append((_left_affine(t_mat, c2), _left_affine(phi, c1)))
        model_pairs.append((_left_matmul(t_mat), _left_matmul(phi)))
        k1s.append(tensors.spectral_norm(t_mat) * (1.0 + 1e-9))
        eps1s.append(0.02)
        eps2s.append(0.02)
    in_rows = shapes[0][0] * shapes[0][1]
    return target_pairs, model_pairs, k1s, eps1s, eps2s, (in_rows, d)


def suite_universality(seed: int, samples: int, alpha: str) -> List[dict]:
    out = []
    for mode in ("up", "down"):
        for k2 in (2.5, 3.0):
            rng = substream(seed, "universality", mode, str(k2))
            depth = 3
            tp, mp, k1s, e1s, e2s, in_shape = _universality_stack(rng, mode, depth, k2, d=2)
            rep = analysis.universality_bound_check(
                tp, mp, k2=k2, k1s=k1s, eps1s=e1s, eps2s=e2s, mode=mode,
                in_shape=in_shape, alpha=alpha, samples=min(samples, 200),
                seed=seed, name=f"universality-{mode}-k2-{k2}")
            geo = rep.details["rhs_geometric"]
            out.append(_report(f"universality/{mode}-k2-{k2}", rep.lhs_measured, geo, seed,
                               samples=rep.samples, norm_kind=alpha,
                               passed=bool(rep.passed), hypotheses_met=rep.hypotheses_met,
                               rhs_geometric=geo, rhs_k2n=rep.rhs_theoretical,
                               depth=depth, per_layer=rep.details["per_layer"]))

    rng = substream(seed, "universality", "reject")
    tp, mp, k1s, e1s, e2s, in_shape = _universality_stack(rng, "up", 2, 2.5, d=2)
    try:
        analysis.universality_bound_check(tp, mp, k2=2.0, k1s=k1s, eps1s=e1s, eps2s=e2s,
                                          mode="up", in_shape=in_shape, alpha=alpha,
                                          samples=16, seed=seed)
        rejected, message = False, ""
    except HypothesisError as e:
        rejected, message = "Assume K_2 > 2" in str(e), str(e)
    out.append(_report("universality/reject-k2-2", 0.0 if rejected else 1.0, 0.0, seed,
                       samples=0, note=message))

    rng = substream(seed, "universality", "exact")
    tp, mp, k1s, e1s, e2s, in_shape = _universality_stack(rng, "up", 2, 2.5, d=2)
    exact_pairs = [(t, t2) for (t, t2) in mp]
    rep = analysis.universality_bound_check(
        exact_pairs, mp, k2=2.5, k1s=k1s, eps1s=e1s, eps2s=e2s, mode="up",
        in_shape=in_shape, alpha=alpha, samples=min(samples, 100), seed=seed,
        name="universality-exact")
    out.append(_report("universality/exact-model-zero", rep.lhs_measured, 1e-12, seed,
                       samples=rep.samples, norm_kind=alpha))

    return sorted(out, key=lambda r: r["name"])


# ---------------------------------------------------------------------------
# flowar
# ---------------------------------------------------------------------------

def _constant_velocity_config(seed: int, k: int, a: int, h: int, w: int, c: int,
                              velocity: np.ndarray) -> flowar.FlowArConfig:
    """A config whose flow-matching network is the constant field
    ``velocity`` per channel: zero modulation weights with the alpha2
    chunk biased to one, zero output weights, output bias = velocity."""
    base = flowar.random_flowar_config(k, a, h, w, c, seed)
    fm = []
    for p in base.fm_scales:
        b = np.zeros(6 * c)
        b[c : 2 * c] = 1.0  # alpha2 = 1
        fm.append(flowar.FlowMatchParams(
            mlp_mod_w=np.zeros((c, 6 * c)), mlp_mod_b=b,
            attn=p.attn, mlp_out_w=np.zeros((c, c)), mlp_out_b=velocity,
        ))
    return flowar.FlowArConfig(
        num_scales=k, scale_base=a, h=h, w=w, c=c,
        tf_scales=base.tf_scales, fm_scales=tuple(fm),
        steps=base.steps, kernel=base.kernel,
    )


def suite_flowar(seed: int, samples: int, alpha: str) -> List[dict]:
    out = []
    rng = substream(seed, "flowar-flow")
    worst_end, worst_aff = 0.0, 0.0
    for _ in range(100):
        y = rng.normal(0.0, 1.0, (2, 2, 3))
        f0 = rng.normal(0.0, 1.0, (2, 2, 3))
        t, s = rng.uniform(0.0, 1.0, 2)
        if not np.array_equal(flowar.flow_interpolate(y, f0, 0.0), f0):
            worst_end = 1.0
        if not np.array_equal(flowar.flow_interpolate(y, f0, 1.0), y):
            worst_end = 1.0
        lhs = flowar.flow_interpolate(y, f0, t) - flowar.flow_interpolate(y, f0, s)
        worst_aff = max(worst_aff, _linf(lhs, (t - s) * flowar.flow_velocity(y, f0)))
    out.append(_report("flowar/flow-endpoints-bit-exact", worst_end, 0.0, seed, samples=100))
    out.append(_report("flowar/flow-affinity", worst_aff, 1e-12, seed, samples=100))

    cfg = flowar.random_flowar_config(3, 2, 4, 4, 2, seed=seed)
    x = substream(seed, "flowar-latent").normal(0.0, 1.0, (4, 4, 2))
    ys = flowar.vae_tokenize(x, cfg)
    shapes_ok = [y.shape[:2] for y in ys] == [(1, 1), (2, 2), (4, 4)]
    out.append(_report("flowar/tokenizer-shapes", 0.0 if shapes_ok else 1.0, 0.0, seed, samples=1))

    worst = 0.0
    for i, y in enumerate(ys, start=1):
        op = interp.materialize_down(cfg.h, cfg.w, cfg.factor(i))
        worst = max(worst, _linf(op.apply(tensors.matricize(x)), tensors.matricize(y)))
    out.append(_report("flowar/tokenizer-matrix-consistency", worst, 1e-12, seed, samples=3))

    f0s, ts = flowar.draw_loss_inputs(cfg, seed, min(samples, 16))
    oracle = lambda f_t, y_hat, t, i: flowar.flow_velocity(ys[i - 1], f0s[i - 1])
    out.append(_report("flowar/loss-oracle-zero",
                       flowar.flowar_loss(cfg, x, f0s, ts, nn_fn=oracle), 0.0, seed,
                       samples=min(samples, 16)))

    c_off = 0.5
    offset = lambda f_t, y_hat, t, i: flowar.flow_velocity(ys[i - 1], f0s[i - 1]) + c_off
    total_elems = sum(y.size for y in ys)
    loss = flowar.flowar_loss(cfg, x, f0s, ts, nn_fn=offset)
    out.append(_report("flowar/loss-offset-closed-form",
                       abs(loss - c_off**2 * total_elems), 1e-9, seed,
                       samples=min(samples, 16), expected=c_off**2 * total_elems))

    velocity = np.array([0.75, -1.5])
    worst = 0.0
    for steps in (1, 2, 3, 5, 8):
        ccfg = _constant_velocity_config(seed, 2, 2, 2, 2, 2, velocity)
        z_init = substream(seed, "flowar-zinit").normal(0.0, 1.0, (1, 1, 2))
        got = flowar.flowar_infer(ccfg, z_init, seed=seed + 7, steps=steps)
        f0 = substream(seed + 7, "infer-f0", 2).standard_normal((2, 2, 2))
        worst = max(worst, _linf(got, f0 + velocity))
    out.append(_report("flowar/euler-constant-field", worst, 1e-12, seed, samples=5))

    z_init = substream(seed, "flowar-zinit").normal(0.0, 1.0, (1, 1, 2))
    small = flowar.random_flowar_config(2, 2, 2, 2, 2, seed=seed + 1)
    got = flowar.flowar_infer(small, z_init, seed=seed + 3, steps=1)
    f0 = substream(seed + 3, "infer-f0", 2).standard_normal((2, 2, 2))
    s1 = flowar.flowar_infer(small, z_init, seed=seed + 3, steps=1, record=(rec := []))
    z2 = flowar.build_sequence(z_init, [_infer_scale_one(small, z_init, seed + 3)], small, 2)
    _, cond = flowar.ar_forward(2, z2, small)
    manual = f0 + flowar.flow_matching_forward(f0, cond, 0.0, small.fm_scales[1])
    out.append(_report("flowar/single-step-reduction", _linf(got, manual), 0.0, seed, samples=1))

    ledger_ok = (rec[0]["shape"] == [1, 1, 2] and rec[1]["shape"] == [2, 2, 2]
                 and rec[0]["seq_len"] == 1 and rec[1]["seq_len"] == 5)
    out.append(_report("flowar/inference-shape-ledger", 0.0 if ledger_ok else 1.0, 0.0,
                       seed, samples=1))

    again = flowar.flowar_infer(small, z_init, seed=seed + 3, steps=1)
    out.append(_report("flowar/inference-determinism",
                       0.0 if np.array_equal(s1, again) else 1.0, 0.0, seed, samples=2))

    fd_err = _loss_gradient_check(seed, min(max(samples, 4), 16))
    out.append(_report("flowar/loss-directional-derivative", fd_err, 1e-4, seed,
                       samples=min(max(samples, 4), 16),
                       note="relative error, central differences vs analytic"))

    return sorted(out, key=lambda r: r["name"])


def _infer_scale_one(cfg, z_init, seed):
    """Scale-1 output of the inference pipeline, recomputed standalone."""
    _, s_1 = flowar.ar_forward(1, flowar.build_sequence(z_init, [], cfg, 1), cfg)
    f = substream(seed, "infer-f0", 1).standard_normal((*cfg.scale_shape(1), cfg.c))
    return f + flowar.flow_matching_forward(f, s_1, 0.0, cfg.fm_scales[0])


def _loss_gradient_check(seed: int, samples: int) -> float:
    """Relative error between the central finite difference of the loss in
    one output-bias coordinate and the analytic derivative of the
    quadratic; exact up to rounding because the loss is quadratic."""
    cfg = flowar.random_flowar_config(2, 2, 2, 2, 2, seed=seed + 11)
    x = substream(seed, "fd-latent").normal(0.0, 1.0, (2, 2, 2))
    f0s, ts = flowar.draw_loss_inputs(cfg, seed + 13, samples)
    scale_i, coord = 2, 1

    def loss_with(delta: float) -> float:
        fm = list(cfg.fm_scales)
        b = fm[scale_i - 1].mlp_out_b.copy()
        b[coord] += delta
        fm[scale_i - 1] = flowar.FlowMatchParams(
            mlp_mod_w=fm[scale_i - 1].mlp_mod_w, mlp_mod_b=fm[scale_i - 1].mlp_mod_b,
            attn=fm[scale_i - 1].attn, mlp_out_w=fm[scale_i - 1].mlp_out_w,
            mlp_out_b=b, ln_eps=fm[scale_i - 1].ln_eps)
        cfg2 = flowar.FlowArConfig(num_scales=cfg.num_scales, scale_base=cfg.scale_base,
                                   h=cfg.h, w=cfg.w, c=cfg.c, tf_scales=cfg.tf_scales,
                                   fm_scales=tuple(fm), steps=cfg.steps, kernel=cfg.kernel)
        return flowar.flowar_loss(cfg2, x, f0s, ts)

    step = 1e-3
    fd = (loss_with(step) - loss_with(-step)) / (2.0 * step)

    ys = flowar.vae_tokenize(x, cfg)
    y, f0 = ys[scale_i - 1], f0s[scale_i - 1]
    z = flowar.build_sequence(ys[0], ys[: scale_i - 1], cfg, scale_i)
    _, y_hat = flowar.ar_forward(scale_i, z, cfg)
    v = flowar.flow_velocity(y, f0)
    analytic = 0.0
    draws = np.atleast_1d(ts[scale_i - 1])
    for t in draws:
        pred, inter = flowar.flow_matching_forward(
            flowar.flow_interpolate(y, f0, float(t)), y_hat, float(t),
            cfg.fm_scales[scale_i - 1], return_intermediates=True)
        resid = tensors.matricize(pred - v)
        a2 = inter["alpha2"]
        analytic += 2.0 * float(np.sum(a2[:, coord] * resid[:, coord]))
    analytic /= draws.size
    return abs(fd - analytic) / max(abs(analytic), 1e-12)


SUITES = {
    "interp": suite_interp,
    "attention": suite_attention,
    "contextual": suite_contextual,
    "perturbation": suite_perturbation,
    "universality": suite_universality,
    "flowar": suite_flowar,
}


def run_suite(name: str, seed: int, samples: int, alpha: str) -> List[dict]:
    if name == "all":
        reports = []
        for key in sorted(SUITES):
            reports.extend(SUITES[key](seed, samples, alpha))
        return sorted(reports, key=lambda r: r["name"])
    if name not in SUITES:
        raise KeyError(name)
    return SUITES[name](seed, samples, alpha)
