"""Numba-jitted implementations of the hot kernels.

Accumulations use Neumaier-compensated loops so results do not depend on
evaluation order and stay bit-identical across runs.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def _comp_sum(x):
    s = 0.0
    c = 0.0
    for i in range(x.shape[0]):
        v = x[i]
        t = s + v
        if abs(s) >= abs(v):
            c += (s - t) + v
        else:
            c += (v - t) + s
        s = t
    return s + c


@njit(cache=True)
def _stable_dot(a, b):
    s = 0.0
    c = 0.0
    for i in range(a.shape[0]):
        v = a[i] * b[i]
        t = s + v
        if abs(s) >= abs(v):
            c += (s - t) + v
        else:
            c += (v - t) + s
        s = t
    return s + c


def stable_sum(x):
    """Order-stable sum of a 1-D float array."""
    return _comp_sum(np.ascontiguousarray(x, dtype=np.float64))


def stable_dot(a, b):
    """Order-stable inner product of two 1-D float arrays."""
    return _stable_dot(
        np.ascontiguousarray(a, dtype=np.float64),
        np.ascontiguousarray(b, dtype=np.float64),
    )


@njit(cache=True)
def _group_demean(values, codes, n_groups):
    n, m = values.shape
    sums = np.zeros((n_groups, m))
    counts = np.zeros(n_groups, dtype=np.int64)
    for i in range(n):
        g = codes[i]
        counts[g] += 1
        for j in range(m):
            sums[g, j] += values[i, j]
    means = np.zeros((n_groups, m))
    for g in range(n_groups):
        d = counts[g] if counts[g] > 0 else 1
        for j in range(m):
            means[g, j] = sums[g, j] / d
    out = np.empty((n, m))
    for i in range(n):
        g = codes[i]
        for j in range(m):
            out[i, j] = values[i, j] - means[g, j]
    return out, counts


def group_demean(values, codes, n_groups):
    """Subtract the group mean from every column of ``values``."""
    return _group_demean(
        np.ascontiguousarray(values, dtype=np.float64),
        np.ascontiguousarray(codes, dtype=np.int64),
        n_groups,
    )


@njit(cache=True)
def _batch_simple_ols(y, x, min_obs):
    n_rows, n_cols = y.shape
    alpha = np.full(n_rows, np.nan)
    beta = np.full(n_rows, np.nan)
    n_used = np.zeros(n_rows, dtype=np.int64)
    r2 = np.full(n_rows, np.nan)
    fitted = np.zeros(n_rows, dtype=np.bool_)

    for s in range(n_rows):
        n = 0
        sx = 0.0
        cx_ = 0.0
        sy = 0.0
        cy_ = 0.0
        for t in range(n_cols):
            yv = y[s, t]
            xv = x[t]
            if np.isfinite(yv) and np.isfinite(xv):
                n += 1
                tt = sx + xv
                if abs(sx) >= abs(xv):
                    cx_ += (sx - tt) + xv
                else:
                    cx_ += (xv - tt) + sx
                sx = tt
                tt = sy + yv
                if abs(sy) >= abs(yv):
                    cy_ += (sy - tt) + yv
                else:
                    cy_ += (yv - tt) + sy
                sy = tt
        n_used[s] = n
        if n < min_obs or n == 0:
            continue
        mx = (sx + cx_) / n
        my = (sy + cy_) / n
        sxx = 0.0
        sxy = 0.0
        syy = 0.0
        for t in range(n_cols):
            yv = y[s, t]
            xv = x[t]
            if np.isfinite(yv) and np.isfinite(xv):
                dx = xv - mx
                dy = yv - my
                sxx += dx * dx
                sxy += dx * dy
                syy += dy * dy
        if sxx <= 0.0:
            continue
        b = sxy / sxx
        beta[s] = b
        alpha[s] = my - b * mx
        if syy <= 0.0:
            r2[s] = 1.0
        else:
            v = sxy * sxy / (sxx * syy)
            if v < 0.0:
                v = 0.0
            elif v > 1.0:
                v = 1.0
            r2[s] = v
        fitted[s] = True
    return alpha, beta, n_used, r2, fitted


def batch_simple_ols(y, x, min_obs):
    """Per-row OLS of ``y`` on a shared regressor ``x`` with an intercept.

    Same contract as the numpy backend: NaNs drop observations row-wise,
    short or degenerate rows come back unfitted.
    """
    return _batch_simple_ols(
        np.ascontiguousarray(y, dtype=np.float64),
        np.ascontiguousarray(x, dtype=np.float64),
        int(min_obs),
    )
