"""Slow, loop-based reference implementations written directly from the
definitions. They share no code with the package under test.
"""
import itertools
import math

import numpy as np


def markov_oracle(coefs):
    """Four 9x9 transition matrices from a (by, bx, 8, 8) coefficient array."""
    by, bx = coefs.shape[:2]
    H, W = 8 * by, 8 * bx
    mag = [[0] * W for _ in range(H)]
    for i in range(by):
        for j in range(bx):
            for u in range(8):
                for v in range(8):
                    mag[8 * i + u][8 * j + v] = abs(int(coefs[i, j, u, v]))

    def clip(x):
        return max(-4, min(4, x))

    steps = {
        "h": ((0, 0), (0, 1), (0, 2)),
        "v": ((0, 0), (1, 0), (2, 0)),
        "d": ((0, 0), (1, 1), (2, 2)),
        "m": ((0, 2), (1, 1), (2, 0)),
    }
    out = {}
    for name, (a, b, c) in steps.items():
        counts = [[0] * 9 for _ in range(9)]
        for r in range(H):
            for s in range(W):
                pts = [(r + dr, s + dc) for dr, dc in (a, b, c)]
                if any(not (0 <= y < H and 0 <= x < W) for y, x in pts):
                    continue
                (y0, x0), (y1, x1), (y2, x2) = pts
                first = clip(mag[y0][x0] - mag[y1][x1])
                second = clip(mag[y1][x1] - mag[y2][x2])
                counts[first + 4][second + 4] += 1
        M = np.zeros((9, 9))
        for i in range(9):
            tot = sum(counts[i])
            if tot:
                for j in range(9):
                    M[i, j] = counts[i][j] / tot
        out[name] = M
    return out


def li250_oracle(coefs):
    by, bx = coefs.shape[:2]
    a = np.abs(coefs).astype(int)
    M, N = by, bx

    def density(triples, denom):
        f = np.zeros(125)
        for x, y, z in triples:
            if x <= 4 and y <= 4 and z <= 4:
                f[25 * x + 5 * y + z] += 1
        return f / denom

    h, v, d = [], [], []
    for m in range(M):
        for n in range(N):
            for u in range(8):
                for w in range(6):
                    h.append((a[m, n, u, w], a[m, n, u, w + 1], a[m, n, u, w + 2]))
            for u in range(6):
                for w in range(8):
                    v.append((a[m, n, u, w], a[m, n, u + 1, w], a[m, n, u + 2, w]))
            for u in range(6):
                for w in range(6):
                    d.append((a[m, n, u, w], a[m, n, u + 1, w + 1], a[m, n, u + 2, w + 2]))
    intra = (density(h, 48 * M * N) + density(v, 48 * M * N) + density(d, 36 * M * N)) / 3
    h, v, d = [], [], []
    for m in range(M):
        for n in range(N):
            for u in range(8):
                for w in range(8):
                    if n + 2 < N:
                        h.append((a[m, n, u, w], a[m, n + 1, u, w], a[m, n + 2, u, w]))
                    if m + 2 < M:
                        v.append((a[m, n, u, w], a[m + 1, n, u, w], a[m + 2, n, u, w]))
                    if m + 2 < M and n + 2 < N:
                        d.append((a[m, n, u, w], a[m + 1, n + 1, u, w], a[m + 2, n + 2, u, w]))
    inter = (
        density(h, 64 * M * (N - 2)) + density(v, 64 * (M - 2) * N) + density(d, 64 * (M - 2) * (N - 2))
    ) / 3
    return np.concatenate([intra, inter])


def k_distance_oracle(d, p, k):
    others = sorted(d[p][o] for o in range(len(d)) if o != p)
    return others[k - 1]


def lof_oracle(d, k):
    n = len(d)
    kd = [k_distance_oracle(d, p, k) for p in range(n)]
    neigh = [[o for o in range(n) if o != p and d[p][o] <= kd[p]] for p in range(n)]
    lrd = []
    for p in range(n):
        s = sum(max(kd[o], d[p][o]) for o in neigh[p])
        lrd.append(len(neigh[p]) / s if s > 0 else math.inf)
    out = []
    for p in range(n):
        ratios = []
        for o in neigh[p]:
            if math.isinf(lrd[p]):
                ratios.append(1.0 if math.isinf(lrd[o]) else 0.0)
            else:
                ratios.append(lrd[o] / lrd[p])
        out.append(sum(ratios) / len(ratios))
    return out


def linkage_oracle(d, A, B, kind):
    if kind == "single":
        return min(d[x][y] for x in A for y in B)
    if kind == "complete":
        return max(d[x][y] for x in A for y in B)
    if kind == "centroid":
        return sum(d[x][y] for x in A for y in B) / (len(A) * len(B))
    U = list(A) + list(B)
    total = sum(d[u][v] for u in U for v in U if u != v)
    return total / (len(U) ** 2 - len(U))


def agglomerate_oracle(d, kind):
    """Naive re-scan: list of (members A, members B, height)."""
    clusters = [frozenset([i]) for i in range(len(d))]
    merges = []
    while len(clusters) > 1:
        best = None
        for A, B in itertools.combinations(clusters, 2):
            if min(B) < min(A):
                A, B = B, A
            key = (linkage_oracle(d, sorted(A), sorted(B), kind), min(A), min(B))
            if best is None or key < best[0]:
                best = (key, A, B)
        (h, _, _), A, B = best
        merges.append((tuple(sorted(A)), tuple(sorted(B)), h))
        clusters = [c for c in clusters if c not in (A, B)] + [A | B]
    return merges


def mmd2_oracle(X, Y, k):
    m = len(X)
    s = 0.0
    for i in range(m):
        for j in range(m):
            if i != j:
                s += k(X[i], X[j]) + k(Y[i], Y[j]) - k(X[i], Y[j]) - k(X[j], Y[i])
    return s / (m * m - m)


def avg_distance_oracle(F, G):
    tot = 0.0
    for f in F:
        for g in G:
            tot += math.sqrt(sum((a - b) ** 2 for a, b in zip(f, g)))
    return tot / (len(F) * len(G))


def median_oracle(V):
    ds = sorted(
        math.sqrt(sum((a - b) ** 2 for a, b in zip(V[i], V[j]))) for i in range(len(V)) for j in range(i + 1, len(V))
    )
    n = len(ds)
    return ds[n // 2] if n % 2 else 0.5 * (ds[n // 2 - 1] + ds[n // 2])


def dct_hist_oracle(coefs):
    """Uncalibrated histogram part (165 entries) of one coefficient array."""
    by, bx = coefs.shape[:2]
    total = 64 * by * bx
    glob = [0] * 11
    for v in coefs.ravel():
        if -5 <= v <= 5:
            glob[v + 5] += 1
    local = []
    for r, c in [(0, 1), (1, 0), (2, 0), (1, 1), (0, 2)]:
        h = [0] * 11
        for i in range(by):
            for j in range(bx):
                v = coefs[i, j, r, c]
                if -5 <= v <= 5:
                    h[v + 5] += 1
        local += h
    dual = []
    modes = [(1, 0), (2, 0), (3, 0), (0, 1), (1, 1), (2, 1), (0, 2), (1, 2), (0, 3)]
    for dv in range(-5, 6):
        for r, c in modes:
            cnt = 0
            for i in range(by):
                for j in range(bx):
                    v = max(-5, min(5, int(coefs[i, j, r, c])))
                    cnt += v == dv
            dual.append(cnt)
    return np.array(glob + local + dual, dtype=float) / total
