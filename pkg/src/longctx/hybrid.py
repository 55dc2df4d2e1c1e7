"""Hybrid-resolution frame layouts under a visual-token budget.

Frames are grouped ``group_size`` at a time. The first frame of every group
is encoded at ``hi_res_tokens``; the rest get ``hi_res_tokens // compression``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ConfigurationError, InvalidInputError

__all__ = ["BudgetComparison", "FramePlan", "HybridConfig", "compare_budgets", "plan", "tradeoff_table"]


@dataclass(frozen=True)
class HybridConfig:
    group_size: int
    hi_res_tokens: int
    compression: int = 1

    def __post_init__(self):
        if self.group_size < 1 or self.hi_res_tokens < 1 or self.compression < 1:
            raise ConfigurationError("group_size, hi_res_tokens and compression must all be >= 1")
        if self.hi_res_tokens % self.compression:
            raise ConfigurationError(
                f"hi_res_tokens {self.hi_res_tokens} is not divisible by compression {self.compression}"
            )

    @property
    def lo_res_tokens(self) -> int:
        return self.hi_res_tokens // self.compression

    @classmethod
    def uniform(cls, tokens_per_frame: int) -> "HybridConfig":
        return cls(1, tokens_per_frame, 1)


@dataclass(frozen=True)
class FramePlan:
    frames: int
    groups: int
    per_frame_tokens: tuple[int, ...]
    total_tokens: int
    avg_tokens_per_frame: float

    def to_dict(self) -> dict:
        return {
            "frames": self.frames,
            "groups": self.groups,
            "per_frame_tokens": list(self.per_frame_tokens),
            "total_tokens": self.total_tokens,
            "avg_tokens_per_frame": self.avg_tokens_per_frame,
        }


def plan(frames: int, config: HybridConfig) -> FramePlan:
    """Per-frame token layout; a trailing partial group still opens hi-res."""
    if frames < 1:
        raise InvalidInputError("frames must be >= 1")
    hi, lo, L = config.hi_res_tokens, config.lo_res_tokens, config.group_size
    per_frame = tuple(hi if k % L == 0 else lo for k in range(frames))
    total = sum(per_frame)
    return FramePlan(frames, math.ceil(frames / L), per_frame, total, total / frames)


def tradeoff_table(token_budget: int, frame_counts) -> list[tuple[int, int]]:
    """``(frames, budget // frames)`` rows for a fixed visual-token budget."""
    if token_budget <= 0:
        raise InvalidInputError("token budget must be positive")
    rows = []
    for n in frame_counts:
        if n <= 0:
            raise InvalidInputError(f"frame count must be positive, got {n}")
        rows.append((int(n), token_budget // n))
    return rows


@dataclass(frozen=True)
class BudgetComparison:
    uniform_frames: int
    uniform_tokens_per_frame: int
    uniform_total: int
    hybrid_frames: int
    hybrid_total: int
    hybrid_hi_res_tokens: int
    hybrid_lo_res_tokens: int
    hybrid_avg_tokens_per_frame: float
    total_ratio: float
    hi_res_advantage: float


def compare_budgets(uniform_frames: int, uniform_tokens: int, hybrid_frames: int, config: HybridConfig) -> BudgetComparison:
    uniform = plan(uniform_frames, HybridConfig.uniform(uniform_tokens))
    hybrid = plan(hybrid_frames, config)
    return BudgetComparison(
        uniform_frames=uniform_frames,
        uniform_tokens_per_frame=uniform_tokens,
        uniform_total=uniform.total_tokens,
        hybrid_frames=hybrid_frames,
        hybrid_total=hybrid.total_tokens,
        hybrid_hi_res_tokens=config.hi_res_tokens,
        hybrid_lo_res_tokens=config.lo_res_tokens,
        hybrid_avg_tokens_per_frame=hybrid.avg_tokens_per_frame,
        total_ratio=hybrid.total_tokens / uniform.total_tokens,
        hi_res_advantage=config.hi_res_tokens / uniform_tokens,
    )
