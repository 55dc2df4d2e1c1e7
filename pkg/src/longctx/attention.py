"""Single-head attention with rotary embeddings and a synthetic needle harness.

The harness stands in for a visual needle-in-a-haystack test. Each trial
draws unit-norm random keys for a row of "images", replaces the needle
image's key with the query direction, lays the images out as consecutive
image spans and asks whether the query (placed right after the last image)
scores the needle highest. Every token of an image carries that image's
key; the image score is the mean over its tokens. Position-embedding
distortion is the only way the needle can lose.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from . import _kernels
from .errors import ConfigurationError, DimensionMismatchError, InvalidInputError
from .extension import ExtensionPlan
from .mrope import DimensionLayout, Image, Text, apply_mrope_batch, assign_positions
from .rotary import FrequencyBasis, apply_rotary_batch

__all__ = [
    "AttentionInput",
    "HaystackConfig",
    "HaystackCurve",
    "MRoPE",
    "RoPE",
    "attention",
    "effective_length",
    "haystack_curve",
    "item_grid",
    "run_haystack",
]


def _as_basis(source) -> FrequencyBasis:
    if isinstance(source, ExtensionPlan):
        return source.basis()
    if isinstance(source, FrequencyBasis):
        return source
    raise TypeError(f"expected ExtensionPlan or FrequencyBasis, got {type(source).__name__}")


@dataclass(frozen=True)
class RoPE:
    """1D rotary embedding using a plan's (or basis') angles."""

    plan: Union[ExtensionPlan, FrequencyBasis]

    @property
    def basis(self) -> FrequencyBasis:
        return _as_basis(self.plan)


@dataclass(frozen=True)
class MRoPE:
    plan: Union[ExtensionPlan, FrequencyBasis]
    layout: Optional[DimensionLayout] = None

    @property
    def basis(self) -> FrequencyBasis:
        return _as_basis(self.plan)

    def resolved_layout(self) -> DimensionLayout:
        layout = self.layout or DimensionLayout.for_head_dim(self.basis.head_dim)
        layout.check(self.basis)
        return layout


Embedding = Optional[Union[RoPE, MRoPE]]


@dataclass
class AttentionInput:
    X: np.ndarray
    W_q: np.ndarray
    W_k: np.ndarray
    W_v: np.ndarray
    positions: Sequence = ()
    embedding: Embedding = None


def _rotate(x: np.ndarray, positions, embedding: Embedding) -> np.ndarray:
    if embedding is None:
        return x
    if isinstance(embedding, RoPE):
        return apply_rotary_batch(embedding.basis, positions, x)
    if isinstance(embedding, MRoPE):
        return apply_mrope_batch(embedding.basis, embedding.resolved_layout(), positions, x)
    raise TypeError(f"unknown embedding mode {embedding!r}")


def _softmax_rows(scores: np.ndarray) -> np.ndarray:
    z = scores - scores.max(axis=1, keepdims=True)
    np.exp(z, out=z)
    z /= z.sum(axis=1, keepdims=True)
    return z


def attention(inp: AttentionInput, return_weights: bool = False):
    """``softmax(Q K^T / sqrt(d_k)) V`` with rotary applied to Q and K rows."""
    X = np.asarray(inp.X, dtype=np.float64)
    W_q, W_k, W_v = (np.asarray(w, dtype=np.float64) for w in (inp.W_q, inp.W_k, inp.W_v))
    if X.ndim != 2:
        raise DimensionMismatchError(f"X must be a matrix, got shape {X.shape}")
    d_model = X.shape[1]
    for name, w in (("W_q", W_q), ("W_k", W_k), ("W_v", W_v)):
        if w.ndim != 2 or w.shape[0] != d_model:
            raise DimensionMismatchError(f"{name} must have {d_model} rows, got shape {w.shape}")
    if W_q.shape != W_k.shape:
        raise DimensionMismatchError("W_q and W_k must have the same shape")
    d_k = W_q.shape[1]
    if inp.embedding is not None:
        if d_k % 2:
            raise DimensionMismatchError(f"d_k must be even for rotary embeddings, got {d_k}")
        if len(inp.positions) != X.shape[0]:
            raise DimensionMismatchError(f"{X.shape[0]} tokens but {len(inp.positions)} positions")

    Q = _rotate(X @ W_q, inp.positions, inp.embedding)
    K = _rotate(X @ W_k, inp.positions, inp.embedding)
    V = X @ W_v
    weights = _softmax_rows(Q @ K.T / math.sqrt(d_k))
    out = weights @ V
    return (out, weights) if return_weights else out


def item_grid(tokens_per_item: int) -> tuple[int, int]:
    """Most square (rows, cols) grid holding exactly ``tokens_per_item`` tokens."""
    if tokens_per_item < 1:
        raise ConfigurationError("tokens_per_item must be >= 1")
    rows = max(r for r in range(1, math.isqrt(tokens_per_item) + 1) if tokens_per_item % r == 0)
    return rows, tokens_per_item // rows


@dataclass(frozen=True)
class HaystackConfig:
    num_items: int
    tokens_per_item: int = 64
    d_k: int = 64
    needle_index: Optional[int] = None
    trials: int = 200
    seed: int = 0
    embedding: Embedding = None

    def validate(self) -> None:
        if self.num_items < 1:
            raise ConfigurationError("num_items must be >= 1")
        if self.needle_index is not None and not 0 <= self.needle_index < self.num_items:
            raise ConfigurationError(f"needle_index {self.needle_index} outside [0, {self.num_items})")
        if self.trials < 1:
            raise ConfigurationError("trials must be >= 1")
        if self.d_k < 2 or self.d_k % 2:
            raise ConfigurationError(f"d_k must be even and >= 2, got {self.d_k}")
        item_grid(self.tokens_per_item)
        if self.embedding is not None and self.embedding.basis.head_dim != self.d_k:
            raise ConfigurationError(
                f"embedding head_dim {self.embedding.basis.head_dim} does not match d_k {self.d_k}"
            )


def _layout_positions(config: HaystackConfig):
    """Token positions, owning item per token, and the query position."""
    gh, gw = item_grid(config.tokens_per_item)
    spans = [Image(gh, gw)] * config.num_items + [Text(1)]
    pos = np.asarray(assign_positions(spans), dtype=np.int64)
    owner = np.repeat(np.arange(config.num_items, dtype=np.int64), config.tokens_per_item)
    return pos[:-1], owner, pos[-1]


def _trial_vectors(config: HaystackConfig, trial: int):
    rng = np.random.default_rng([config.seed, trial])
    q = rng.standard_normal(config.d_k)
    q /= np.linalg.norm(q)
    keys = rng.standard_normal((config.num_items, config.d_k))
    keys /= np.linalg.norm(keys, axis=1, keepdims=True)
    needle = config.needle_index
    if needle is None:
        needle = int(rng.integers(config.num_items))
    keys[needle] = q
    return q, keys, needle


def run_haystack(config: HaystackConfig) -> float:
    """Fraction of trials in which the needle image gets the top score."""
    config.validate()
    tok_pos, owner, query_pos = _layout_positions(config)
    emb = config.embedding
    if isinstance(emb, MRoPE):
        layout = emb.resolved_layout()
        segment = layout.segment_ids()
        key_pos = tok_pos
        q_pos = query_pos
    elif isinstance(emb, RoPE):
        # 1D rotary sees the flattened token order.
        segment = np.zeros(config.d_k // 2, dtype=np.int64)
        key_pos = np.arange(len(owner), dtype=np.int64)[:, None]
        q_pos = np.array([len(owner)], dtype=np.int64)
    elif emb is None:
        segment = None
    else:
        raise ConfigurationError(f"unknown embedding mode {emb!r}")

    if emb is not None:
        angles = emb.basis.as_array()
        q_phase = (q_pos[segment].astype(np.float64) * angles)[None, :]

    hits = 0
    for trial in range(config.trials):
        q, keys, needle = _trial_vectors(config, trial)
        if emb is None:
            scores = keys @ q
        else:
            q_rot = _kernels.rotate_pairs(q[None, :], q_phase)[0]
            scores = _kernels.pooled_scores(
                q_rot, keys[owner], key_pos, angles, segment, owner, config.num_items
            )
        hits += int(np.argmax(scores) == needle)
    return hits / config.trials


@dataclass(frozen=True)
class HaystackCurve:
    points: tuple[tuple[int, float], ...] = field(default_factory=tuple)

    def __post_init__(self):
        counts = [c for c, _ in self.points]
        if any(b <= a for a, b in zip(counts, counts[1:])):
            raise InvalidInputError("context_items must be strictly increasing")


def haystack_curve(item_counts, config: HaystackConfig) -> HaystackCurve:
    """Success rate at each item count, all other settings taken from ``config``."""
    counts = sorted(set(int(n) for n in item_counts))
    points = []
    for n in counts:
        cfg = HaystackConfig(
            num_items=n,
            tokens_per_item=config.tokens_per_item,
            d_k=config.d_k,
            needle_index=None if config.needle_index is None else min(config.needle_index, n - 1),
            trials=config.trials,
            seed=config.seed,
            embedding=config.embedding,
        )
        points.append((n, run_haystack(cfg)))
    return HaystackCurve(tuple(points))


def effective_length(curve: HaystackCurve, threshold: float = 0.6) -> Optional[int]:
    """Largest item count whose success rate reaches ``threshold``, else None."""
    if not curve.points:
        raise InvalidInputError("curve is empty")
    if not 0.0 < threshold < 1.0:
        raise InvalidInputError(f"threshold must lie in (0, 1), got {threshold}")
    passing = [n for n, rate in curve.points if rate >= threshold]
    return max(passing) if passing else None
