"""Multimodal (temporal, height, width) rotary positions.

Rotary pairs are split 2:3:3 into temporal, height and width segments. With
granularity ``x = head_dim // 16`` the pair ranges are ``[0, 2x)``,
``[2x, 5x)`` and ``[5x, 8x)``. All segments share one frequency basis; only
the position component that drives the rotation differs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Union

import numpy as np

from . import _kernels
from .errors import ConfigurationError, DimensionMismatchError, InvalidDimensionError, InvalidInputError
from .rotary import FrequencyBasis

__all__ = [
    "DimensionLayout",
    "Image",
    "Position3D",
    "Text",
    "Video",
    "apply_mrope",
    "apply_mrope_batch",
    "assign_positions",
    "mrope_score",
    "parse_span",
]

TEMPORAL, HEIGHT, WIDTH = 0, 1, 2
SEGMENT_NAMES = ("temporal", "height", "width")


class Position3D(NamedTuple):
    i_t: int
    i_h: int
    i_w: int


@dataclass(frozen=True)
class DimensionLayout:
    """The 2x:3x:3x split of ``8x`` rotary pairs."""

    granularity: int

    def __post_init__(self):
        if self.granularity < 1:
            raise InvalidDimensionError(f"granularity must be >= 1, got {self.granularity}")

    @classmethod
    def for_head_dim(cls, head_dim: int) -> "DimensionLayout":
        if head_dim <= 0 or head_dim % 16:
            raise InvalidDimensionError(f"M-RoPE needs head_dim divisible by 16, got {head_dim}")
        return cls(head_dim // 16)

    @property
    def temporal_blocks(self) -> range:
        return range(0, 2 * self.granularity)

    @property
    def height_blocks(self) -> range:
        return range(2 * self.granularity, 5 * self.granularity)

    @property
    def width_blocks(self) -> range:
        return range(5 * self.granularity, 8 * self.granularity)

    @property
    def total_blocks(self) -> int:
        return 8 * self.granularity

    @property
    def head_dim(self) -> int:
        return 16 * self.granularity

    def segment_ids(self) -> np.ndarray:
        """Position-component index (0=t, 1=h, 2=w) driving each pair."""
        x = self.granularity
        return np.repeat(np.array([TEMPORAL, HEIGHT, WIDTH], dtype=np.int64), [2 * x, 3 * x, 3 * x])

    def segment_name(self, d: int) -> str:
        return SEGMENT_NAMES[int(self.segment_ids()[d])]

    def check(self, basis: FrequencyBasis) -> None:
        if basis.n_blocks != self.total_blocks:
            raise ConfigurationError(
                f"layout expects {self.total_blocks} rotary pairs, basis has {basis.n_blocks}"
            )


@dataclass(frozen=True)
class Text:
    length: int


@dataclass(frozen=True)
class Image:
    grid_h: int
    grid_w: int


@dataclass(frozen=True)
class Video:
    frames: int
    grid_h: int
    grid_w: int


ModalitySpan = Union[Text, Image, Video]


def _span_positions(span: ModalitySpan, p: int) -> list[Position3D]:
    if isinstance(span, Text):
        if span.length < 1:
            raise InvalidInputError(f"text span needs length >= 1, got {span.length}")
        return [Position3D(p + k, p + k, p + k) for k in range(span.length)]
    if isinstance(span, Image):
        frames, gh, gw = 1, span.grid_h, span.grid_w
    elif isinstance(span, Video):
        frames, gh, gw = span.frames, span.grid_h, span.grid_w
    else:
        raise TypeError(f"unknown span type {type(span).__name__}")
    if min(frames, gh, gw) < 1:
        raise InvalidInputError(f"span counts must be >= 1: {span}")
    return [
        Position3D(p + f, p + r, p + c)
        for f in range(frames)
        for r in range(gh)
        for c in range(gw)
    ]


def assign_positions(spans) -> list[Position3D]:
    """Assign (t, h, w) indices to every token of an interleaved sequence.

    Text repeats one running index on all three components. Images hold t at
    the span base and walk (h, w) row-major from the base. Videos advance t
    once per frame. Each span starts one past the largest component emitted
    so far.
    """
    spans = list(spans)
    if not spans:
        raise InvalidInputError("at least one span is required")
    out: list[Position3D] = []
    offset = 0
    for span in spans:
        emitted = _span_positions(span, offset)
        out.extend(emitted)
        offset = 1 + max(max(pos) for pos in emitted)
    return out


def parse_span(text: str) -> ModalitySpan:
    """Parse ``text:N``, ``image:HxW`` or ``video:FxHxW``."""
    kind, _, dims = text.partition(":")
    try:
        nums = [int(v) for v in dims.lower().split("x")]
    except ValueError:
        raise InvalidInputError(f"bad span {text!r}") from None
    kind = kind.strip().lower()
    if kind == "text" and len(nums) == 1:
        return Text(*nums)
    if kind == "image" and len(nums) == 2:
        return Image(*nums)
    if kind == "video" and len(nums) == 3:
        return Video(*nums)
    raise InvalidInputError(f"bad span {text!r}; expected text:N, image:HxW or video:FxHxW")


def _phases(basis: FrequencyBasis, layout: DimensionLayout, positions: np.ndarray) -> np.ndarray:
    return positions[:, layout.segment_ids()].astype(np.float64) * basis.as_array()[None, :]


def apply_mrope_batch(basis: FrequencyBasis, layout: DimensionLayout, positions, x) -> np.ndarray:
    """Rotate row ``k`` of ``x`` to the 3D position ``positions[k]``."""
    layout.check(basis)
    x = np.ascontiguousarray(x, dtype=np.float64)
    positions = np.asarray(positions, dtype=np.int64).reshape(-1, 3)
    if x.ndim != 2 or x.shape[1] != basis.head_dim or positions.shape[0] != x.shape[0]:
        raise DimensionMismatchError(
            f"expected x of shape (n, {basis.head_dim}) with n positions, got {x.shape}, {positions.shape}"
        )
    if positions.size and positions.min() < 0:
        raise InvalidInputError("position components must be non-negative")
    return _kernels.rotate_pairs(x, _phases(basis, layout, positions))


def apply_mrope(basis: FrequencyBasis, layout: DimensionLayout, pos, v) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (basis.head_dim,):
        raise DimensionMismatchError(f"expected vector of length {basis.head_dim}, got shape {v.shape}")
    return apply_mrope_batch(basis, layout, [tuple(pos)], v[None, :])[0]


def mrope_score(basis, layout, pos_m, pos_n, q, k) -> float:
    """Inner product of ``q`` rotated to ``pos_m`` with ``k`` rotated to ``pos_n``."""
    return float(apply_mrope(basis, layout, pos_m, q) @ apply_mrope(basis, layout, pos_n, k))
