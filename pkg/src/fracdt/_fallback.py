"""Pure numpy versions of the compiled kernels in ``_core.pyx``."""

import numpy as np


def range_scan(S, gap):
    """Per column, max of |S[b] - S[a]| over row pairs with b - a >= gap."""
    S = np.ascontiguousarray(S, dtype=np.float64)
    K, P = S.shape
    best = np.zeros(P)
    if K <= gap:
        return best
    lo = np.full(P, np.inf)
    hi = np.full(P, -np.inf)
    for b in range(gap, K):
        np.minimum(lo, S[b - gap], out=lo)
        np.maximum(hi, S[b - gap], out=hi)
        np.maximum(best, S[b] - lo, out=best)
        np.maximum(best, hi - S[b], out=best)
    return best


def mean_oscillation_1d(f, w):
    f = np.ascontiguousarray(f, dtype=np.float64)
    m = f.shape[0]
    width = 2 * w + 1
    if width > m:
        raise ValueError("window wider than the grid")
    mean = np.zeros(m)
    for d in range(-w, w + 1):
        mean += np.roll(f, -d)
    mean /= width
    acc = np.zeros(m)
    for d in range(-w, w + 1):
        acc += np.abs(np.roll(f, -d) - mean)
    return acc / width


def window_max_1d(g, w):
    """Periodic sliding max via a doubling (sparse table) scheme."""
    g = np.ascontiguousarray(g, dtype=np.float64)
    m = g.shape[0]
    width = 2 * w + 1
    if width >= m:
        return np.full(m, g.max())
    # level[i] = max of g over [i, i + span)
    level = g.copy()
    span = 1
    while 2 * span <= width:
        level = np.maximum(level, np.roll(level, -span))
        span *= 2
    left = np.roll(level, w)
    right = np.roll(level, w - width + span)
    return np.maximum(left, right)


def mean_oscillation_2d(f, offsets):
    f = np.ascontiguousarray(f, dtype=np.float64)
    offsets = np.asarray(offsets)
    mean = np.zeros_like(f)
    for di, dj in offsets:
        mean += np.roll(f, (-di, -dj), axis=(0, 1))
    mean /= len(offsets)
    acc = np.zeros_like(f)
    for di, dj in offsets:
        acc += np.abs(np.roll(f, (-di, -dj), axis=(0, 1)) - mean)
    return acc / len(offsets)


def offset_max_2d(g, offsets):
    g = np.ascontiguousarray(g, dtype=np.float64)
    out = np.full_like(g, -np.inf)
    for di, dj in np.asarray(offsets):
        np.maximum(out, np.roll(g, (-di, -dj), axis=(0, 1)), out=out)
    return out
