"""Independent reference routines the tests compare the package against.

Nothing here imports the code under test beyond plain data types.
"""

import itertools
import math

import numpy as np


def dense_rotation(angles, i):
    """Entrywise block-diagonal rotation built from scalar cos/sin calls."""
    n = 2 * len(angles)
    m = [[0.0] * n for _ in range(n)]
    for d, th in enumerate(angles):
        a = i * th
        m[2 * d][2 * d] = math.cos(a)
        m[2 * d][2 * d + 1] = -math.sin(a)
        m[2 * d + 1][2 * d] = math.sin(a)
        m[2 * d + 1][2 * d + 1] = math.cos(a)
    return np.array(m)


def dense_mrope(angles, pos3, granularity):
    """Assemble A_1..A_8x one block at a time, choosing t/h/w per block."""
    x = granularity
    n = 2 * len(angles)
    m = np.zeros((n, n))
    for d, th in enumerate(angles):
        if d < 2 * x:
            idx = pos3[0]
        elif d < 5 * x:
            idx = pos3[1]
        else:
            idx = pos3[2]
        a = idx * th
        m[2 * d:2 * d + 2, 2 * d:2 * d + 2] = [[math.cos(a), -math.sin(a)], [math.sin(a), math.cos(a)]]
    return m


def enumerate_positions(spans):
    """Brute-force (t, h, w) ids for spans given as tuples.

    ``("text", n)``, ``("image", h, w)`` or ``("video", f, h, w)``.
    """
    out = []
    base = 0
    for span in spans:
        kind = span[0]
        here = []
        if kind == "text":
            for k in range(span[1]):
                here.append((base + k,) * 3)
        else:
            f, h, w = (1, span[1], span[2]) if kind == "image" else span[1:]
            for ft in range(f):
                for r in range(h):
                    for c in range(w):
                        here.append((base + ft, base + r, base + c))
        out.extend(here)
        base = max(v for p in here for v in p) + 1
    return out


def three_step_attention(X, Wq, Wk, Wv, rot_q=None, rot_k=None):
    """Literal matmul -> softmax -> matmul, with optional per-row rotation matrices."""
    Q = X @ Wq
    K = X @ Wk
    V = X @ Wv
    if rot_q is not None:
        Q = np.stack([rot_q[i] @ Q[i] for i in range(len(Q))])
        K = np.stack([rot_k[i] @ K[i] for i in range(len(K))])
    S = Q @ K.T / math.sqrt(Q.shape[1])
    W = np.zeros_like(S)
    for i in range(S.shape[0]):
        e = [math.exp(v - max(S[i])) for v in S[i]]
        tot = sum(e)
        W[i] = [v / tot for v in e]
    return W @ V, W


def min_bins(lengths, capacity):
    """Exact minimum number of bins, by exhaustive branch and bound."""
    items = sorted(lengths, reverse=True)
    if not items:
        return 0
    best = [len(items)]

    def place(k, loads):
        if len(loads) >= best[0]:
            return
        if k == len(items):
            best[0] = len(loads)
            return
        seen = set()
        for b in range(len(loads)):
            if loads[b] + items[k] <= capacity and loads[b] not in seen:
                seen.add(loads[b])
                loads[b] += items[k]
                place(k + 1, loads)
                loads[b] -= items[k]
        loads.append(items[k])
        place(k + 1, loads)
        loads.pop()

    place(0, [])
    return best[0]


def min_bins_bruteforce(lengths, capacity):
    """Assign every item to a bin label in all possible ways (tiny instances only)."""
    n = len(lengths)
    for k in range(1, n + 1):
        for labels in itertools.product(range(k), repeat=n):
            loads = [0] * k
            for L, b in zip(lengths, labels):
                loads[b] += L
            if max(loads) <= capacity:
                return k
    return n
