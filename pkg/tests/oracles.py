"""Reference computations that share no code with the package.

They are slow and simple on purpose: brute-force grids, full SVDs and plain
summation loops.
"""

from __future__ import annotations

import math

import numpy as np


def objective(v, D, w, lam, rho):
    v = np.asarray(v, dtype=np.float64)
    D = np.asarray(D, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    r = v - D @ w
    return float(r @ r + lam * (rho * np.abs(w).sum() + 0.5 * (1 - rho) * (w @ w)))


def soft(x, t):
    return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)


def _profile_last(c, G, lam, rho, W):
    """For each row of W (first N-1 coords), the exact minimiser over the last coordinate."""
    n = G.shape[0] - 1
    b = c[n] - W @ G[:n, n]
    return soft(2 * b, lam * rho) / (2 * G[n, n] + lam * (1 - rho))


def _quad(vv, c, G, lam, rho, W):
    return vv - 2 * W @ c + np.einsum("ij,jk,ik->i", W, G, W) + lam * (
        rho * np.abs(W).sum(axis=1) + 0.5 * (1 - rho) * (W * W).sum(axis=1)
    )


def grid_oracle(v, D, lam, rho, step=1e-3, bound=2.0):
    """Minimise the elastic-net objective by exhaustive grid plus compass refinement.

    N = 1 and N = 2 use a full grid over [-bound, bound]^N.  For N = 3 the
    first two coordinates are gridded and the third is minimised exactly,
    which is a one-dimensional soft-threshold.
    """
    v = np.asarray(v, dtype=np.float64)
    D = np.asarray(D, dtype=np.float64)
    N = D.shape[1]
    if not 1 <= N <= 3:
        raise ValueError("grid oracle supports N <= 3")
    G = D.T @ D
    c = D.T @ v
    vv = float(v @ v)
    axis = np.arange(-bound, bound + step / 2, step)
    best_val, best_w = math.inf, None
    if N == 1:
        W = axis[:, None]
        vals = _quad(vv, c, G, lam, rho, W)
        i = int(np.argmin(vals))
        best_val, best_w = vals[i], W[i].copy()
    else:
        for a in axis:
            if N == 2:
                W = np.column_stack([np.full_like(axis, a), axis])
            else:
                W2 = np.column_stack([np.full_like(axis, a), axis])
                W = np.column_stack([W2, _profile_last(c, G, lam, rho, W2)])
            vals = _quad(vv, c, G, lam, rho, W)
            i = int(np.argmin(vals))
            if vals[i] < best_val:
                best_val, best_w = vals[i], W[i].copy()
    w = _compass(lambda x: objective(v, D, x, lam, rho), best_w, step)
    return w, objective(v, D, w, lam, rho)


def _compass(f, x, step, min_step=1e-12):
    x = np.array(x, dtype=np.float64)
    fx = f(x)
    h = step
    n = x.size
    dirs = [e for i in range(n) for e in (np.eye(n)[i], -np.eye(n)[i])]
    if n > 1:
        for i in range(n):
            for j in range(i + 1, n):
                for si in (1, -1):
                    for sj in (1, -1):
                        d = np.zeros(n)
                        d[i], d[j] = si, sj
                        dirs.append(d / math.sqrt(2))
    while h > min_step:
        moved = False
        for d in dirs:
            y = x + h * d
            fy = f(y)
            if fy < fx:
                x, fx, moved = y, fy, True
                break
        if not moved:
            h /= 2
    return x


def least_squares(v, D):
    return np.linalg.lstsq(np.asarray(D, np.float64), np.asarray(v, np.float64), rcond=None)[0]


def column_means(rows):
    """Row mean by explicit summation."""
    rows = np.asarray(rows, dtype=np.float64)
    total = [0.0] * rows.shape[1]
    for r in rows:
        for j, x in enumerate(r):
            total[j] += float(x)
    return np.array([t / rows.shape[0] for t in total])


def top_singular_vector(rows):
    x = np.asarray(rows, dtype=np.float64)
    xc = x - x.mean(axis=0)
    _, _, vt = np.linalg.svd(xc, full_matrices=False)
    return vt[0]


def angle(a, b):
    """Unsigned angle between two lines."""
    a = np.asarray(a, np.float64)
    b = np.asarray(b, np.float64)
    cos = abs(a @ b) / (np.linalg.norm(a) * np.linalg.norm(b))
    return math.acos(min(1.0, cos))


def kkt_violation(v, D, w, lam, rho):
    """Largest stationarity violation of the elastic-net objective."""
    v = np.asarray(v, np.float64)
    D = np.asarray(D, np.float64)
    w = np.asarray(w, np.float64)
    g = 2 * D.T @ (v - D @ w)
    worst = 0.0
    for j in range(w.size):
        if w[j] != 0:
            worst = max(worst, abs(g[j] - lam * rho * np.sign(w[j]) - lam * (1 - rho) * w[j]))
        else:
            worst = max(worst, abs(g[j]) - lam * rho)
    return worst


def coherence(D):
    Dn = D / np.linalg.norm(D, axis=0)
    G = np.abs(Dn.T @ Dn)
    np.fill_diagonal(G, 0)
    return float(G.max())
