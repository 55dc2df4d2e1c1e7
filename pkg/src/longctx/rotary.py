"""One-dimensional rotary position embedding.

Vectors are split into adjacent pairs ``(v[2d], v[2d+1])``; pair ``d`` is
rotated by ``i * angles[d]`` for position ``i``. Dimension indices are
zero-based, so ``angles[0] == 1`` for every base.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import DimensionMismatchError, InvalidBaseError, InvalidDimensionError, LongCtxError

__all__ = [
    "FrequencyBasis",
    "apply_rotary",
    "apply_rotary_batch",
    "basis_from_angles",
    "make_basis",
    "rotation_matrix",
    "wavelength",
]


@dataclass(frozen=True)
class FrequencyBasis:
    """Per-pair rotation speeds for a head of size ``head_dim``."""

    head_dim: int
    base: float
    angles: tuple[float, ...]

    @property
    def n_blocks(self) -> int:
        return self.head_dim // 2

    def as_array(self) -> np.ndarray:
        return np.asarray(self.angles, dtype=np.float64)


def _check_head_dim(head_dim: int) -> None:
    if isinstance(head_dim, bool) or not isinstance(head_dim, (int, np.integer)):
        raise InvalidDimensionError(f"head_dim must be an integer, got {head_dim!r}")
    if head_dim < 2 or head_dim % 2:
        raise InvalidDimensionError(f"head_dim must be even and >= 2, got {head_dim}")


def make_basis(head_dim: int, base: float) -> FrequencyBasis:
    """Build the rotary frequency basis ``angles[d] = base ** (-2d / head_dim)``.

    Raises:
        InvalidDimensionError: ``head_dim`` is odd, zero or negative.
        InvalidBaseError: ``base`` is not strictly positive.
    """
    _check_head_dim(head_dim)
    if not base > 0 or not math.isfinite(base):
        raise InvalidBaseError(f"base must be a positive finite number, got {base!r}")
    base = float(base)
    # math.pow is correctly rounded for the cases that matter (10000 ** -0.5 == 0.01).
    angles = tuple(math.pow(base, -2.0 * d / head_dim) for d in range(head_dim // 2))
    return FrequencyBasis(int(head_dim), base, angles)


def basis_from_angles(angles, base: float = float("nan")) -> FrequencyBasis:
    """Wrap an explicit angle table (e.g. an extension plan) as a basis."""
    angles = tuple(float(a) for a in angles)
    if not angles:
        raise InvalidDimensionError("angle table is empty")
    return FrequencyBasis(2 * len(angles), base, angles)


def wavelength(basis: FrequencyBasis, d: int) -> float:
    """Position period ``2*pi / angles[d]`` of rotary pair ``d``."""
    if not 0 <= d < basis.n_blocks:
        raise IndexError(f"dimension index {d} outside [0, {basis.n_blocks})")
    return 2.0 * math.pi / basis.angles[d]


def _check_position(i: int) -> None:
    if i < 0:
        raise LongCtxError(f"positions must be non-negative, got {i}")


def rotation_matrix(basis: FrequencyBasis, i: int) -> np.ndarray:
    """Dense block-diagonal rotation for position ``i``."""
    _check_position(i)
    dim = basis.head_dim
    out = np.zeros((dim, dim))
    phase = i * basis.as_array()
    c = np.cos(phase)
    s = np.sin(phase)
    idx = np.arange(0, dim, 2)
    out[idx, idx] = c
    out[idx, idx + 1] = -s
    out[idx + 1, idx] = s
    out[idx + 1, idx + 1] = c
    return out


def apply_rotary(basis: FrequencyBasis, i: int, v) -> np.ndarray:
    """Rotate ``v`` to position ``i`` without building the dense matrix."""
    _check_position(i)
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (basis.head_dim,):
        raise DimensionMismatchError(f"expected vector of length {basis.head_dim}, got shape {v.shape}")
    phase = (i * basis.as_array())[None, :]
    return _kernels.rotate_pairs(v[None, :], phase)[0]


def apply_rotary_batch(basis: FrequencyBasis, positions, x) -> np.ndarray:
    """Rotate row ``k`` of ``x`` to ``positions[k]``."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    positions = np.asarray(positions, dtype=np.int64)
    if x.ndim != 2 or x.shape[1] != basis.head_dim or positions.shape != (x.shape[0],):
        raise DimensionMismatchError(
            f"expected x of shape (n, {basis.head_dim}) and n positions, got {x.shape} and {positions.shape}"
        )
    if positions.size and positions.min() < 0:
        raise LongCtxError("positions must be non-negative")
    phase = positions[:, None].astype(np.float64) * basis.as_array()[None, :]
    return _kernels.rotate_pairs(x, phase)
