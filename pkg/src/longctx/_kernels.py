"""Hot numeric kernels with a numba path and a pure-numpy fallback.

The numba path is used when numba imports cleanly and the environment
variable ``LONGCTX_DISABLE_NUMBA`` is unset (or ``0``). Both paths are always
importable under explicit names so they can be benchmarked and cross-checked.
"""

from __future__ import annotations

import os

import numpy as np

__all__ = [
    "BACKEND",
    "HAVE_NUMBA",
    "pooled_scores",
    "pooled_scores_numpy",
    "rotate_pairs",
    "rotate_pairs_numpy",
]


def rotate_pairs_numpy(x: np.ndarray, phase: np.ndarray) -> np.ndarray:
    """Rotate each adjacent pair ``(x[:, 2d], x[:, 2d+1])`` by ``phase[:, d]``."""
    c = np.cos(phase)
    s = np.sin(phase)
    x0 = x[:, 0::2]
    x1 = x[:, 1::2]
    out = np.empty_like(x)
    out[:, 0::2] = x0 * c - x1 * s
    out[:, 1::2] = x0 * s + x1 * c
    return out


def pooled_scores_numpy(
    query: np.ndarray,
    keys: np.ndarray,
    positions: np.ndarray,
    angles: np.ndarray,
    segment: np.ndarray,
    owner: np.ndarray,
    n_groups: int,
) -> np.ndarray:
    """Mean rotated dot product of ``query`` against each group of keys.

    ``query`` is already rotated. Key row ``j`` is rotated block-wise, block
    ``d`` by ``positions[j, segment[d]] * angles[d]``, dotted with ``query``
    and averaged into ``owner[j]``.
    """
    phase = positions[:, segment].astype(np.float64) * angles
    rotated = rotate_pairs_numpy(keys, phase)
    per_token = rotated @ query
    sums = np.bincount(owner, weights=per_token, minlength=n_groups)
    counts = np.bincount(owner, minlength=n_groups)
    return sums / counts


try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False


if HAVE_NUMBA:

    @numba.njit(cache=True)
    def rotate_pairs_numba(x, phase):
        n, dim = x.shape
        out = np.empty_like(x)
        for i in range(n):
            for d in range(dim // 2):
                c = np.cos(phase[i, d])
                s = np.sin(phase[i, d])
                a = x[i, 2 * d]
                b = x[i, 2 * d + 1]
                out[i, 2 * d] = a * c - b * s
                out[i, 2 * d + 1] = a * s + b * c
        return out

    @numba.njit(cache=True)
    def pooled_scores_numba(query, keys, positions, angles, segment, owner, n_groups):
        n, dim = keys.shape
        sums = np.zeros(n_groups)
        counts = np.zeros(n_groups)
        for j in range(n):
            acc = 0.0
            for d in range(dim // 2):
                ph = positions[j, segment[d]] * angles[d]
                c = np.cos(ph)
                s = np.sin(ph)
                a = keys[j, 2 * d]
                b = keys[j, 2 * d + 1]
                acc += (a * c - b * s) * query[2 * d] + (a * s + b * c) * query[2 * d + 1]
            sums[owner[j]] += acc
            counts[owner[j]] += 1.0
        return sums / counts

    __all__ += ["pooled_scores_numba", "rotate_pairs_numba"]


def _use_numba() -> bool:
    flag = os.environ.get("LONGCTX_DISABLE_NUMBA", "0").strip().lower()
    return HAVE_NUMBA and flag in ("", "0", "false", "no")


if _use_numba():
    BACKEND = "numba"
    rotate_pairs = rotate_pairs_numba
    pooled_scores = pooled_scores_numba
else:
    BACKEND = "numpy"
    rotate_pairs = rotate_pairs_numpy
    pooled_scores = pooled_scores_numpy
