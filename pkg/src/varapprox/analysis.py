"""Empirical verification tools: token separateness, contextual-mapping
measurement, Monte Carlo function norms, Lipschitz estimation, and the
perturbation / substitution / telescoping / universality bound checks.

Function distances integrate over the uniform cube [-1, 1]^dims (the
measure is normalized, so a constant integrand estimates its own norm);
``alpha='sup'`` takes the max over the sampled points instead, which
lower-bounds the true sup. Outputs are compared in Frobenius norm. Every
estimate is deterministic given its seed, and every report records the
sampling metadata that produced it.
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, Sequence

import numpy as np

from .errors import DomainError, HypothesisError, ShapeError
from .rng import substream
from .tensors import as_matrix

# Slack added to every theoretical right-hand side so that a pass/fail
# verdict is never decided by the last floating-point bit.
RHS_TOLERANCE = 1e-7


def _fro(a) -> float:
    a = np.asarray(a, dtype=np.float64)
    return float(np.sqrt(np.sum(a * a)))


def sample_cube(rng: np.random.Generator, shape, n: int) -> np.ndarray:
    """n points drawn uniformly from [-1, 1]^shape."""
    return rng.uniform(-1.0, 1.0, (n, *tuple(shape)))


class Alpha(str, Enum):
    L2 = "l2"
    SUP = "sup"


def _as_alpha(alpha) -> Alpha:
    if alpha in (2, "2", "l2", Alpha.L2):
        return Alpha.L2
    if alpha in ("sup", Alpha.SUP):
        return Alpha.SUP
    raise DomainError(f"unsupported alpha {alpha!r}; use 2/'l2' or 'sup'")


def _distance_on_points(f, g, points, alpha: Alpha) -> float:
    vals = []
    for x in points:
        fx = np.asarray(f(x), dtype=np.float64)
        gx = np.asarray(g(x), dtype=np.float64)
        if fx.shape != gx.shape:
            raise ShapeError(f"output shapes differ: {fx.shape} vs {gx.shape}")
        vals.append(_fro(fx - gx))
    vals = np.asarray(vals)
    if alpha == Alpha.SUP:
        return float(vals.max())
    return float(np.sqrt(np.mean(vals**2)))


def estimate_fn_distance(f, g, in_shape, alpha="l2", samples: int = 1000, seed: int = 0) -> float:
    """Monte Carlo estimate of the function-norm distance ||f - g||."""
    alpha = _as_alpha(alpha)
    points = sample_cube(substream(seed, "fn-distance"), in_shape, samples)
    return _distance_on_points(f, g, points, alpha)


def estimate_lipschitz(f, in_shape, pairs: int = 200, seed: int = 0) -> float:
    """Max sampled ratio ||f(x)-f(y)|| / ||x-y||; exact for linear maps
    up to sampling of the extremal direction."""
    rng = substream(seed, "lipschitz")
    xs = sample_cube(rng, in_shape, pairs)
    ys = sample_cube(rng, in_shape, pairs)
    best = 0.0
    for x, y in zip(xs, ys):
        dxy = _fro(x - y)
        if dxy == 0.0:
            continue
        best = max(best, _fro(np.asarray(f(x)) - np.asarray(f(y))) / dxy)
    return best


# ---------------------------------------------------------------------------
# Separateness and contextual mapping
# ---------------------------------------------------------------------------

class SeparationClass(str, Enum):
    """Which of the three separateness condition sets the data satisfies.

    With finite embeddings the norm upper bound always holds, so only the
    positive lower bound can fail; DELTA_ONLY and NONE are kept for
    taxonomy completeness.
    """

    TOKENWISE = "tokenwise"
    GAMMA_DELTA = "gamma_delta"
    DELTA_ONLY = "delta_only"
    NONE = "none"


@dataclass(frozen=True)
class SeparationReport:
    gamma_min: float
    gamma_max: float
    delta: float  # +inf when no two distinct token values exist
    kappa: float
    sep_class: SeparationClass

    def to_dict(self) -> dict:
        return {
            "gamma_min": self.gamma_min,
            "gamma_max": self.gamma_max,
            "delta": self.delta if math.isfinite(self.delta) else "inf",
            "kappa": self.kappa if math.isfinite(self.kappa) else "inf",
            "class": self.sep_class.value,
        }


def _token_rows(embeddings) -> np.ndarray:
    rows = [as_matrix(x) for x in embeddings]
    if not rows:
        raise ShapeError("need at least one embedding sequence")
    d = rows[0].shape[1]
    for r in rows:
        if r.shape[1] != d:
            raise ShapeError("all sequences must share the channel width")
    return np.vstack(rows)


def check_separateness(embeddings: Sequence[np.ndarray]) -> SeparationReport:
    """Measure (gamma_min, gamma_max, delta) over every token of every
    sequence; delta is the exact pairwise minimum over distinct-valued
    tokens (this is the brute force the tests cross-check)."""
    tokens = _token_rows(embeddings)
    norms = np.sqrt(np.sum(tokens * tokens, axis=1))
    gamma_min = float(norms.min())
    gamma_max = float(norms.max())
    delta = math.inf
    for i in range(tokens.shape[0]):
        for j in range(i + 1, tokens.shape[0]):
            if not np.array_equal(tokens[i], tokens[j]):
                delta = min(delta, float(np.sqrt(np.sum((tokens[i] - tokens[j]) ** 2))))
    kappa = gamma_max / gamma_min if gamma_min > 0 else math.inf
    sep_class = SeparationClass.TOKENWISE if gamma_min > 0 else SeparationClass.GAMMA_DELTA
    return SeparationReport(gamma_min, gamma_max, delta, kappa, sep_class)


def _vocab(seq: np.ndarray) -> frozenset:
    return frozenset(tuple(map(float, row)) for row in seq)


@dataclass(frozen=True)
class ContextualMappingReport:
    gamma_measured: float
    delta_measured: float
    paper_gamma: float
    log_paper_delta: float
    distinct_ok: bool
    vocab_size: int
    seq_len: int
    kappa: float

    def to_dict(self) -> dict:
        return {
            "gamma_measured": self.gamma_measured,
            "delta_measured": self.delta_measured,
            "paper_gamma": self.paper_gamma,
            "log_paper_delta": self.log_paper_delta,
            "distinct_ok": self.distinct_ok,
            "vocab_size": self.vocab_size,
            "seq_len": self.seq_len,
            "kappa": self.kappa,
        }


def log_paper_delta(eps: float, vocab_size: int, d: int, kappa: float,
                    gamma_max: float, seq_len: int) -> float:
    """log of the guaranteed output separation; the raw value underflows
    for any realistic inputs, so all comparisons happen in log space."""
    return -5.0 / eps * vocab_size**4 * d * kappa * gamma_max * math.log(seq_len)


def contextual_mapping_check(q: Callable[[np.ndarray], np.ndarray],
                             embeddings: Sequence[np.ndarray],
                             eps: float) -> ContextualMappingReport:
    """Measure whether q separates every (token, context) pair.

    delta_measured is the minimum output distance over pairs whose
    vocabularies differ or whose tokens differ; distinct_ok requires it
    to be strictly positive. Requires pairwise-distinct tokens inside
    each sequence and a positive minimum token norm.
    """
    seqs = [as_matrix(x) for x in embeddings]
    n = seqs[0].shape[0]
    d = seqs[0].shape[1]
    for idx, s in enumerate(seqs):
        if s.shape != (n, d):
            raise ShapeError(f"sequence {idx} has shape {s.shape}, expected ({n},{d})")
        for k in range(n):
            for l in range(k + 1, n):
                if np.array_equal(s[k], s[l]):
                    raise HypothesisError(
                        f"hypothesis violated: sequence {idx} repeats a token at positions {k} and {l}"
                    )
    sep = check_separateness(seqs)
    if sep.gamma_min <= 0:
        raise HypothesisError("hypothesis violated: a token has zero norm, kappa is infinite")
    vocabs = [_vocab(s) for s in seqs]
    vocab_size = len(frozenset().union(*vocabs))
    outputs = [np.asarray(q(s), dtype=np.float64) for s in seqs]
    gamma_measured = max(float(np.max(np.sqrt(np.sum(o * o, axis=1)))) for o in outputs)
    delta_measured = math.inf
    flat = [(i, k) for i in range(len(seqs)) for k in range(n)]
    for a in range(len(flat)):
        i, k = flat[a]
        for b in range(a + 1, len(flat)):
            j, l = flat[b]
            if vocabs[i] != vocabs[j] or not np.array_equal(seqs[i][k], seqs[j][l]):
                delta_measured = min(delta_measured, _fro(outputs[i][k] - outputs[j][l]))
    return ContextualMappingReport(
        gamma_measured=gamma_measured,
        delta_measured=delta_measured,
        paper_gamma=sep.gamma_max + eps / 4.0,
        log_paper_delta=log_paper_delta(eps, vocab_size, d, sep.kappa, sep.gamma_max, n),
        distinct_ok=bool(delta_measured > 0.0),
        vocab_size=vocab_size,
        seq_len=n,
        kappa=sep.kappa,
    )


# ---------------------------------------------------------------------------
# Bound reports
# ---------------------------------------------------------------------------

@dataclass
class BoundReport:
    name: str
    lhs_measured: float
    rhs_theoretical: float
    passed: bool
    samples: int
    norm_kind: str
    seeds: Dict[str, int]
    hypotheses_met: bool = True
    details: Dict[str, object] = field(default_factory=dict)

    @property
    def slack(self) -> float:
        return self.rhs_theoretical - self.lhs_measured

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "lhs_measured": self.lhs_measured,
            "rhs_theoretical": self.rhs_theoretical,
            "slack": self.slack,
            "pass": self.passed,
            "hypotheses_met": self.hypotheses_met,
            "samples": self.samples,
            "norm_kind": self.norm_kind,
            "seeds": dict(self.seeds),
            "details": dict(self.details),
        }


def _compose(fns):
    def run(x):
        for fn in fns:
            x = fn(x)
        return x

    return run


def two_layer_bound_check(f, g, tau, phi, k1: float, eps1: float, eps2: float,
                          in_shape, alpha="l2", samples: int = 500, seed: int = 0,
                          name: str = "two-layer") -> BoundReport:
    """Check ||f.g - tau.phi|| <= K1*eps1 + eps2.

    The two approximation hypotheses are measured first (inner layer on
    the input cube, outer layer on its own input shape); a violated
    hypothesis flags the report instead of silently passing.
    """
    alpha = _as_alpha(alpha)
    e1 = estimate_fn_distance(g, phi, in_shape, alpha, samples, seed)
    mid_shape = np.asarray(g(np.zeros(tuple(in_shape)))).shape
    e2 = estimate_fn_distance(f, tau, mid_shape, alpha, samples, seed + 1)
    hyp = e1 <= eps1 + RHS_TOLERANCE and e2 <= eps2 + RHS_TOLERANCE
    lhs = estimate_fn_distance(_compose([g, f]), _compose([phi, tau]), in_shape, alpha, samples, seed + 2)
    rhs = k1 * eps1 + eps2
    return BoundReport(
        name=name, lhs_measured=lhs, rhs_theoretical=rhs,
        passed=bool(hyp and lhs <= rhs + RHS_TOLERANCE),
        samples=samples, norm_kind=alpha.value, seeds={"root": seed},
        hypotheses_met=bool(hyp),
        details={"eps1_measured": e1, "eps2_measured": e2, "k1": k1,
                 "eps1": eps1, "eps2": eps2},
    )


def _check_growth(v, points, k2: float) -> bool:
    for x in points:
        nx = _fro(x)
        if _fro(v(x)) > k2 * nx + RHS_TOLERANCE:
            return False
    return True


def _check_linear(v, shape, rng) -> bool:
    x = rng.uniform(-1.0, 1.0, tuple(shape))
    y = rng.uniform(-1.0, 1.0, tuple(shape))
    a, b = 0.7, -1.3
    lhs = np.asarray(v(a * x + b * y), dtype=np.float64)
    rhs = a * np.asarray(v(x), dtype=np.float64) + b * np.asarray(v(y), dtype=np.float64)
    return _fro(lhs - rhs) <= 1e-8 * max(1.0, _fro(rhs))


def one_layer_substitution_check(us, vs, j: int, eps: float, k2: float,
                                 in_shape, alpha="l2", samples: int = 500,
                                 seed: int = 0, regime: str = "linear",
                                 name: str = "one-layer") -> BoundReport:
    """Check the single-substitution bound K2^(n-j) * eps.

    Compares the chain that keeps u at slot j against the chain that
    swaps in v there; later layers are the v's in both chains. In the
    'linear' regime (the lemma as proved) each v past slot j is
    spot-checked for linearity; 'lipschitz' skips that and labels the
    report as the extension.
    """
    alpha = _as_alpha(alpha)
    us, vs = list(us), list(vs)
    n = len(us)
    if len(vs) != n:
        raise ShapeError("us and vs must have equal length")
    if not 1 <= j <= n:
        raise DomainError(f"j={j} outside 1..{n}")
    if regime not in ("linear", "lipschitz"):
        raise DomainError(f"unknown regime {regime!r}")

    chain_a = _compose(us[:j] + vs[j:])          # u_1..u_j then v_{j+1}..v_n
    chain_b = _compose(us[: j - 1] + vs[j - 1:])  # u_1..u_{j-1} then v_j..v_n

    points = sample_cube(substream(seed, name, "points"), in_shape, samples)
    prefix = _compose(us[: j - 1])
    reached = [np.asarray(prefix(x), dtype=np.float64) for x in points]
    eps_measured = max(_fro(np.asarray(us[j - 1](w)) - np.asarray(vs[j - 1](w))) for w in reached)
    hyp = eps_measured <= eps + RHS_TOLERANCE

    # growth and (in the lemma's regime) linearity of the trailing v's
    rng = substream(seed, name, "linearity")
    state = [np.asarray(vs[j - 1](w), dtype=np.float64) for w in reached]
    for i in range(j, n):
        if not _check_growth(vs[i], state, k2):
            hyp = False
        if regime == "linear" and not _check_linear(vs[i], state[0].shape, rng):
            hyp = False
        state = [np.asarray(vs[i](w), dtype=np.float64) for w in state]

    lhs = _distance_on_points(chain_a, chain_b, points, alpha)
    rhs = k2 ** (n - j) * eps
    return BoundReport(
        name=name, lhs_measured=lhs, rhs_theoretical=rhs,
        passed=bool(hyp and lhs <= rhs + RHS_TOLERANCE),
        samples=samples, norm_kind=alpha.value, seeds={"root": seed},
        hypotheses_met=bool(hyp),
        details={"depth": n, "j": j, "k2": k2, "eps": eps,
                 "eps_measured": eps_measured, "regime": regime},
    )


def telescoping_check(us, vs, in_shape, alpha="l2", samples: int = 500,
                      seed: int = 0, name: str = "telescoping") -> BoundReport:
    """Check that the full-composition distance is at most the sum of the
    n single-substitution hybrid distances, all estimated on one shared
    sample set."""
    alpha = _as_alpha(alpha)
    us, vs = list(us), list(vs)
    n = len(us)
    if len(vs) != n:
        raise ShapeError("us and vs must have equal length")
    points = sample_cube(substream(seed, name, "points"), in_shape, samples)
    lhs = _distance_on_points(_compose(us), _compose(vs), points, alpha)
    terms = []
    for j in range(1, n + 1):
        chain_a = _compose(us[:j] + vs[j:])
        chain_b = _compose(us[: j - 1] + vs[j - 1:])
        terms.append(_distance_on_points(chain_a, chain_b, points, alpha))
    rhs = float(sum(terms))
    return BoundReport(
        name=name, lhs_measured=lhs, rhs_theoretical=rhs,
        passed=bool(lhs <= rhs + RHS_TOLERANCE),
        samples=samples, norm_kind=alpha.value, seeds={"root": seed},
        details={"depth": n, "hybrid_terms": terms},
    )


def universality_bound_check(target_pairs, model_pairs, k2: float,
                             k1s, eps1s, eps2s, mode: str = "up",
                             in_shape=None, alpha="l2", samples: int = 500,
                             seed: int = 0, name: str = "universality") -> BoundReport:
    """Check the global approximation bound for a stack of (outer, inner)
    layer pairs against its model stack.

    target_pairs[i] = (f_i, g_i), model_pairs[i] = (tau_i, phi_i); the
    inner layers resample upward (mode='up') or downward (mode='down'),
    which only labels the report, the math is identical. Requires
    K2 > 2; reports both the geometric-sum form
    (K2^n - 1)/(K2 - 1) * max_i(K1_i eps1_i + eps2_i) and the K2^n form.
    """
    if k2 <= 2.0:
        raise HypothesisError(f'hypothesis violated: "Assume K_2 > 2" (got K_2 = {k2})')
    if mode not in ("up", "down"):
        raise DomainError(f"unknown mode {mode!r}")
    alpha = _as_alpha(alpha)
    n = len(target_pairs)
    if not (len(model_pairs) == len(k1s) == len(eps1s) == len(eps2s) == n):
        raise ShapeError("per-layer argument lists must all have length n")

    hyp = True
    per_layer = []
    shape = tuple(in_shape)
    for i in range(n):
        f_i, g_i = target_pairs[i]
        tau_i, phi_i = model_pairs[i]
        e1 = estimate_fn_distance(g_i, phi_i, shape, alpha, samples, seed + 3 * i)
        mid_shape = np.asarray(g_i(np.zeros(shape))).shape
        e2 = estimate_fn_distance(f_i, tau_i, mid_shape, alpha, samples, seed + 3 * i + 1)
        layer_ok = e1 <= eps1s[i] + RHS_TOLERANCE and e2 <= eps2s[i] + RHS_TOLERANCE
        growth_pts = sample_cube(substream(seed, name, "growth", i), shape, min(samples, 64))
        layer_ok = layer_ok and _check_growth(_compose([phi_i, tau_i]), growth_pts, k2)
        hyp = hyp and layer_ok
        per_layer.append({"eps1_measured": e1, "eps2_measured": e2,
                          "budget": k1s[i] * eps1s[i] + eps2s[i], "ok": bool(layer_ok)})
        shape = np.asarray(f_i(np.zeros(mid_shape))).shape

    target = _compose([fn for pair in target_pairs for fn in (pair[1], pair[0])])
    model = _compose([fn for pair in model_pairs for fn in (pair[1], pair[0])])
    lhs = estimate_fn_distance(target, model, in_shape, alpha, samples, seed + 1000)
    budget = max(p["budget"] for p in per_layer)
    rhs_geometric = (k2**n - 1.0) / (k2 - 1.0) * budget
    rhs = k2**n * budget
    return BoundReport(
        name=name, lhs_measured=lhs, rhs_theoretical=rhs,
        passed=bool(hyp and lhs <= rhs_geometric + RHS_TOLERANCE
                    and rhs_geometric <= rhs + RHS_TOLERANCE),
        samples=samples, norm_kind=alpha.value, seeds={"root": seed},
        hypotheses_met=bool(hyp),
        details={"mode": mode, "depth": n, "k2": k2,
                 "rhs_geometric": rhs_geometric, "per_layer": per_layer,
                 "layer_budget_max": budget},
    )
