"""Compiled counting loops behind the feature extractors.

Each kernel takes one image and returns raw integer counts; normalization
happens in :mod:`stegid.features`.
"""
import numpy as np
from numba import njit

HR = 5  # histogram half-range
CR = 2  # co-occurrence half-range
MT = 4  # Markov clipping threshold
JT = 4  # joint-density threshold

# zero-based (row, col) modes; must match features.HIST_MODES / DUAL_MODES
_HIST_R = np.array([0, 1, 2, 1, 0], dtype=np.int64)
_HIST_C = np.array([1, 0, 0, 1, 2], dtype=np.int64)
_DUAL_R = np.array([1, 2, 3, 0, 1, 2, 0, 1, 0], dtype=np.int64)
_DUAL_C = np.array([0, 0, 0, 1, 1, 1, 2, 2, 3], dtype=np.int64)


@njit(cache=True)
def dct_counts(c):
    """Histogram, dual-histogram, variation and co-occurrence counts.

    ``c`` is one image's ``(by, bx, 8, 8)`` coefficient array. Returns
    (global[11], local[5, 11], dual[11, 9], variation_sum, cooc[25]).
    """
    by, bx = c.shape[0], c.shape[1]
    nh = 2 * HR + 1
    nc = 2 * CR + 1
    glob = np.zeros(nh, np.int64)
    local = np.zeros((5, nh), np.int64)
    dual = np.zeros((nh, 9), np.int64)
    cooc = np.zeros(nc * nc, np.int64)
    for i in range(by):
        for j in range(bx):
            for u in range(8):
                for v in range(8):
                    x = c[i, j, u, v]
                    if -HR <= x <= HR:
                        glob[x + HR] += 1
            for k in range(5):
                x = c[i, j, _HIST_R[k], _HIST_C[k]]
                if -HR <= x <= HR:
                    local[k, x + HR] += 1
            for k in range(9):
                x = c[i, j, _DUAL_R[k], _DUAL_C[k]]
                x = min(max(x, -HR), HR)
                dual[x + HR, k] += 1
    var = 0
    nb = by * bx
    # consecutive blocks in row-scan order, then in column-scan order
    for order in range(2):
        for t in range(nb - 1):
            if order == 0:
                i0, j0 = t // bx, t % bx
                i1, j1 = (t + 1) // bx, (t + 1) % bx
            else:
                i0, j0 = t % by, t // by
                i1, j1 = (t + 1) % by, (t + 1) // by
            for u in range(8):
                for v in range(8):
                    a = c[i0, j0, u, v]
                    b = c[i1, j1, u, v]
                    var += abs(a - b)
                    if -CR <= a <= CR and -CR <= b <= CR:
                        cooc[(a + CR) * nc + b + CR] += 1
    return glob, local, dual, var, cooc


@njit(cache=True)
def _clip(x, t):
    return min(max(x, -t), t)


@njit(cache=True)
def markov_counts(mag):
    """Transition counts ``(4, 9, 9)`` in the order h, v, d, m.

    ``mag`` is the ``(H, W)`` array of coefficient magnitudes laid out like
    pixels. The m direction steps from (r, c+1) to (r+1, c).
    """
    h, w = mag.shape
    k = 2 * MT + 1
    out = np.zeros((4, k, k), np.int64)
    for r in range(h):
        for cc in range(w - 2):
            s = _clip(mag[r, cc] - mag[r, cc + 1], MT)
            d = _clip(mag[r, cc + 1] - mag[r, cc + 2], MT)
            out[0, s + MT, d + MT] += 1
    for r in range(h - 2):
        for cc in range(w):
            s = _clip(mag[r, cc] - mag[r + 1, cc], MT)
            d = _clip(mag[r + 1, cc] - mag[r + 2, cc], MT)
            out[1, s + MT, d + MT] += 1
    for r in range(h - 2):
        for cc in range(w - 2):
            s = _clip(mag[r, cc] - mag[r + 1, cc + 1], MT)
            d = _clip(mag[r + 1, cc + 1] - mag[r + 2, cc + 2], MT)
            out[2, s + MT, d + MT] += 1
    for r in range(h - 2):
        for cc in range(w - 2):
            s = _clip(mag[r, cc + 2] - mag[r + 1, cc + 1], MT)
            d = _clip(mag[r + 1, cc + 1] - mag[r + 2, cc], MT)
            out[3, s + MT, d + MT] += 1
    return out


@njit(cache=True)
def _bump(counts, a, b, c):
    if a <= JT and b <= JT and c <= JT:
        k = JT + 1
        counts[(a * k + b) * k + c] += 1


@njit(cache=True)
def joint_counts(a):
    """Intra- and inter-block triple counts of magnitudes ``(by, bx, 8, 8)``.

    Returns (intra[3, 125], inter[3, 125]); the three rows are the
    horizontal, vertical and diagonal directions.
    """
    by, bx = a.shape[0], a.shape[1]
    k3 = (JT + 1) ** 3
    intra = np.zeros((3, k3), np.int64)
    inter = np.zeros((3, k3), np.int64)
    for i in range(by):
        for j in range(bx):
            for u in range(8):
                for v in range(6):
                    _bump(intra[0], a[i, j, u, v], a[i, j, u, v + 1], a[i, j, u, v + 2])
            for u in range(6):
                for v in range(8):
                    _bump(intra[1], a[i, j, u, v], a[i, j, u + 1, v], a[i, j, u + 2, v])
            for u in range(6):
                for v in range(6):
                    _bump(intra[2], a[i, j, u, v], a[i, j, u + 1, v + 1], a[i, j, u + 2, v + 2])
            for u in range(8):
                for v in range(8):
                    if j + 2 < bx:
                        _bump(inter[0], a[i, j, u, v], a[i, j + 1, u, v], a[i, j + 2, u, v])
                    if i + 2 < by:
                        _bump(inter[1], a[i, j, u, v], a[i + 1, j, u, v], a[i + 2, j, u, v])
                    if i + 2 < by and j + 2 < bx:
                        _bump(inter[2], a[i, j, u, v], a[i + 1, j + 1, u, v], a[i + 2, j + 2, u, v])
    return intra, inter
