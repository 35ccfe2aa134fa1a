"""Pure-numpy reference implementations of the hot kernels.

Scalar accumulations use ``math.fsum`` (exact Shewchuk summation); row-wise
reductions rely on numpy's pairwise summation, which is deterministic for a
fixed array layout.
"""

import math

import numpy as np


def stable_sum(x):
    """Order-stable sum of a 1-D float array."""
    return math.fsum(np.asarray(x, dtype=np.float64))


def stable_dot(a, b):
    """Order-stable inner product of two 1-D float arrays."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return math.fsum(a * b)


def group_demean(values, codes, n_groups):
    """Subtract the group mean from every column of ``values``.

    Parameters
    ----------
    values : (n, m) float64 array
    codes : (n,) integer array with entries in [0, n_groups)
    n_groups : int

    Returns
    -------
    demeaned : (n, m) float64 array
    counts : (n_groups,) int64 group sizes
    """
    values = np.asarray(values, dtype=np.float64)
    codes = np.asarray(codes, dtype=np.int64)
    counts = np.bincount(codes, minlength=n_groups).astype(np.int64)
    sums = np.zeros((n_groups, values.shape[1]), dtype=np.float64)
    np.add.at(sums, codes, values)
    denom = np.maximum(counts, 1).astype(np.float64)
    means = sums / denom[:, None]
    return values - means[codes], counts


def batch_simple_ols(y, x, min_obs):
    """Per-row OLS of ``y`` on a shared regressor ``x`` with an intercept.

    NaN entries in either input drop that observation for the affected row.
    Rows with fewer than ``min_obs`` usable observations, or with a constant
    regressor on the usable set, come back unfitted (NaN estimates).

    Returns ``(alpha, beta, n_used, r_squared, fitted)`` arrays of length
    ``y.shape[0]``.
    """
    y = np.asarray(y, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    mask = np.isfinite(y) & np.isfinite(x)[None, :]
    n = mask.sum(axis=1)
    safe_n = np.maximum(n, 1).astype(np.float64)

    yz = np.where(mask, y, 0.0)
    xz = np.where(mask, x[None, :], 0.0)
    mx = xz.sum(axis=1) / safe_n
    my = yz.sum(axis=1) / safe_n

    cx = np.where(mask, x[None, :] - mx[:, None], 0.0)
    cy = np.where(mask, y - my[:, None], 0.0)
    sxx = (cx * cx).sum(axis=1)
    sxy = (cx * cy).sum(axis=1)
    syy = (cy * cy).sum(axis=1)

    fitted = (n >= min_obs) & (sxx > 0.0)
    beta = np.full(y.shape[0], np.nan)
    alpha = np.full(y.shape[0], np.nan)
    r2 = np.full(y.shape[0], np.nan)

    ok = fitted
    beta[ok] = sxy[ok] / sxx[ok]
    alpha[ok] = my[ok] - beta[ok] * mx[ok]
    # constant response: the intercept fits it exactly
    const_y = ok & (syy <= 0.0)
    vary_y = ok & (syy > 0.0)
    r2[const_y] = 1.0
    r2[vary_y] = np.clip(sxy[vary_y] ** 2 / (sxx[vary_y] * syy[vary_y]), 0.0, 1.0)
    return alpha, beta, n.astype(np.int64), r2, fitted
