"""The multi-scale autoregressive transformer stack: per-level blocks of
(pyramid up-interpolation, attention over the full concatenated sequence,
optional tokenwise tail), and the composed function class.

The per-level tail realizes the abstract non-attention component: an
affine map, a layer norm, a residual feed-forward layer, or nothing. All
forwards are pure, so identical inputs give bit-identical outputs.
"""

from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .blocks import AffineMap, AttnParams, FfnParams, attention, ffn, layer_norm
from .errors import ShapeError
from .interp import Kernel, pyramid_up, up_interpolate
from .rng import substream
from .tensors import as_matrix, as_token_map, matricize


@dataclass(frozen=True)
class LayerNormTail:
    eps: float = 1e-6


Tail = Union[None, AffineMap, LayerNormTail, FfnParams]


def apply_tail(x: np.ndarray, tail: Tail) -> np.ndarray:
    if tail is None:
        return x
    if isinstance(tail, AffineMap):
        return tail(x)
    if isinstance(tail, LayerNormTail):
        return layer_norm(x, tail.eps)
    if isinstance(tail, FfnParams):
        return ffn(x, tail)
    raise TypeError(f"unsupported tail {type(tail).__name__}")


def tail_kind(tail: Tail) -> str:
    if tail is None:
        return "none"
    if isinstance(tail, AffineMap):
        return "affine"
    if isinstance(tail, LayerNormTail):
        return "layer_norm"
    return "ffn"


@dataclass(frozen=True)
class ScaleSchedule:
    """Spatial shapes (h_i, w_i) per level, plus the channel count.

    Level 1 is always (1, 1) and shapes never shrink; the stacked
    sequence length after level i is sum of h_j * w_j for j <= i.
    """

    levels: Tuple[Tuple[int, int], ...]
    d: int

    def __post_init__(self):
        levels = tuple((int(h), int(w)) for h, w in self.levels)
        object.__setattr__(self, "levels", levels)
        if not levels:
            raise ShapeError("schedule needs at least one level")
        if levels[0] != (1, 1):
            raise ShapeError(f"level 1 must be (1, 1), got {levels[0]}")
        for i in range(1, len(levels)):
            if levels[i][0] < levels[i - 1][0] or levels[i][1] < levels[i - 1][1]:
                raise ShapeError(f"level {i + 1} {levels[i]} shrinks below level {i} {levels[i - 1]}")
        if self.d < 1:
            raise ShapeError("d must be positive")

    @property
    def depth(self) -> int:
        return len(self.levels)

    def rows_through(self, level: int) -> int:
        return sum(h * w for h, w in self.levels[:level])

    @property
    def total_rows(self) -> int:
        return self.rows_through(self.depth)


@dataclass(frozen=True)
class LevelParams:
    attn: AttnParams
    tail: Tail = None


@dataclass(frozen=True)
class VarStackParams:
    schedule: ScaleSchedule
    levels: Tuple[LevelParams, ...]
    kernel: Kernel = Kernel.CUBIC_BSPLINE
    literal_offsets: bool = False

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(self.levels))
        if len(self.levels) != self.schedule.depth:
            raise ShapeError(
                f"{len(self.levels)} level params for a {self.schedule.depth}-level schedule"
            )


def split_maps(x: np.ndarray, shapes: Sequence[Tuple[int, int]], d: int) -> List[np.ndarray]:
    """Cut a stacked (n, d) sequence back into its per-level token maps."""
    x = as_matrix(x)
    if x.shape[1] != d:
        raise ShapeError(f"expected width {d}, got {x.shape[1]}")
    total = sum(h * w for h, w in shapes)
    if x.shape[0] != total:
        raise ShapeError(f"sequence has {x.shape[0]} rows, shapes need {total}")
    out, at = [], 0
    for h, w in shapes:
        out.append(x[at : at + h * w].reshape(h, w, d))
        at += h * w
    return out


def stack_maps(maps: Sequence[np.ndarray]) -> np.ndarray:
    return np.vstack([matricize(m) for m in maps])


def var_block(x, level: LevelParams, from_shapes, to_shapes, d: int,
              x_init=None, kernel: Kernel = Kernel.CUBIC_BSPLINE,
              literal_offsets: bool = False) -> np.ndarray:
    """One block: up-interpolate the pyramid, attend, apply the tail.

    ``to_shapes`` one longer than ``from_shapes`` grows the pyramid
    (slot 1 refilled from ``x_init``); equal lengths up-interpolate each
    map in place. The empty ``from_shapes`` base case emits just
    ``x_init``.
    """
    from_shapes = [tuple(s) for s in from_shapes]
    to_shapes = [tuple(s) for s in to_shapes]
    maps = split_maps(x, from_shapes, d) if from_shapes else []
    if len(to_shapes) == len(from_shapes) + 1:
        if x_init is None:
            raise ShapeError("pyramid growth needs x_init for slot 1")
        if to_shapes[0] != (1, 1):
            raise ShapeError(f"grown slot 1 must be (1, 1), got {to_shapes[0]}")
        maps = pyramid_up(maps, as_token_map(x_init), kernel, to_shapes, literal_offsets)
    elif len(to_shapes) == len(from_shapes):
        for i, (m, dst) in enumerate(zip(maps, to_shapes)):
            if dst[0] < m.shape[0] or dst[1] < m.shape[1]:
                raise ShapeError(f"level {i + 1}: cannot shrink {m.shape[:2]} to {dst}")
        maps = [up_interpolate(m, dst[0], dst[1], kernel, literal_offsets)
                for m, dst in zip(maps, to_shapes)]
    else:
        raise ShapeError(
            f"to_shapes must have len(from_shapes) or len(from_shapes)+1 entries, "
            f"got {len(to_shapes)} for {len(from_shapes)}"
        )
    seq = stack_maps(maps)
    seq = attention(seq, level.attn)
    return apply_tail(seq, level.tail)


def var_forward(x_init, params: VarStackParams, ledger: Optional[list] = None) -> np.ndarray:
    """Run the full stack on a 1x1xd initial map.

    Level i grows the pyramid by one scale, attends over all rows so far,
    and applies the level tail; the output has exactly
    ``schedule.total_rows`` rows. Pass a list as ``ledger`` to collect
    (level, rows, frobenius norm) tuples.
    """
    x_init = as_token_map(x_init)
    sched = params.schedule
    if x_init.shape != (1, 1, sched.d):
        raise ShapeError(f"x_init must be (1, 1, {sched.d}), got {x_init.shape}")
    x = np.zeros((0, sched.d))
    for r, level in enumerate(params.levels, start=1):
        try:
            x = var_block(
                x, level,
                from_shapes=sched.levels[: r - 1],
                to_shapes=sched.levels[:r],
                d=sched.d, x_init=x_init,
                kernel=params.kernel, literal_offsets=params.literal_offsets,
            )
        except ShapeError as e:
            raise ShapeError(f"level {r}: {e}") from e
        if ledger is not None:
            ledger.append((r, x.shape[0], float(np.sqrt(np.sum(x * x)))))
    return x


@dataclass(frozen=True)
class BlockConfig:
    """One composable block of the function class."""

    level: LevelParams
    from_shapes: Tuple[Tuple[int, int], ...]
    to_shapes: Tuple[Tuple[int, int], ...]
    d: int
    kernel: Kernel = Kernel.CUBIC_BSPLINE
    literal_offsets: bool = False
    x_init: Optional[np.ndarray] = None


def compose_class(blocks: Sequence[BlockConfig]) -> Callable[[np.ndarray], np.ndarray]:
    """Compose blocks into one sequence-to-sequence function.

    Shape compatibility between consecutive blocks is checked here, at
    composition time.
    """
    blocks = list(blocks)
    if not blocks:
        raise ShapeError("compose_class needs at least one block")
    for a, b in zip(blocks, blocks[1:]):
        if tuple(a.to_shapes) != tuple(b.from_shapes) or a.d != b.d:
            raise ShapeError(f"block outputs {a.to_shapes} do not feed block inputs {b.from_shapes}")

    def composed(x: np.ndarray) -> np.ndarray:
        for blk in blocks:
            x = var_block(x, blk.level, blk.from_shapes, blk.to_shapes, blk.d,
                          x_init=blk.x_init, kernel=blk.kernel,
                          literal_offsets=blk.literal_offsets)
        return x

    return composed


def minimal_class_block(d: int, seed: int = 0) -> LevelParams:
    """A block in the minimal function class: head size 1, 4 hidden neurons."""
    rng = substream(seed, "minimal-class")
    scale = 1.0 / np.sqrt(d)
    attn = AttnParams(
        w_q=rng.normal(0.0, scale, (1, d)),
        w_k=rng.normal(0.0, scale, (1, d)),
        w_v=rng.normal(0.0, scale, (1, d)),
        w_o=rng.normal(0.0, scale, (d, 1)),
    )
    ffn_p = FfnParams(
        w1=rng.normal(0.0, scale, (4, d)),
        b1=rng.normal(0.0, scale, 4),
        w2=rng.normal(0.0, scale, (d, 4)),
        b2=rng.normal(0.0, scale, d),
    )
    return LevelParams(attn=attn, tail=ffn_p)


def random_stack_params(schedule: ScaleSchedule, seed: int,
                        kernel: Kernel = Kernel.CUBIC_BSPLINE,
                        tail: str = "affine") -> VarStackParams:
    """Seeded Gaussian parameters, scale 1/sqrt(d) so logits stay O(1)."""
    d = schedule.d
    scale = 1.0 / np.sqrt(d)
    levels = []
    for i in range(schedule.depth):
        rng = substream(seed, "var-level", i)
        attn = AttnParams(
            w_q=rng.normal(0.0, scale, (d, d)),
            w_k=rng.normal(0.0, scale, (d, d)),
            w_v=rng.normal(0.0, scale, (d, d)),
        )
        if tail == "affine":
            t: Tail = AffineMap(rng.normal(0.0, scale, (d, d)), rng.normal(0.0, scale, d))
        elif tail == "layer_norm":
            t = LayerNormTail()
        elif tail == "ffn":
            c = max(4, d)
            t = FfnParams(
                w1=rng.normal(0.0, scale, (c, d)),
                b1=rng.normal(0.0, scale, c),
                w2=rng.normal(0.0, scale, (d, c)),
                b2=rng.normal(0.0, scale, d),
            )
        elif tail == "none":
            t = None
        else:
            raise ValueError(f"unknown tail kind {tail!r}")
        levels.append(LevelParams(attn=attn, tail=t))
    return VarStackParams(schedule=schedule, levels=tuple(levels), kernel=kernel)
