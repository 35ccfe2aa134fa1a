"""Deterministic least-squares and inference kernel.

Everything downstream (market models, event regressions, panel models) runs
through :func:`ols_fit`.  Coefficients come from a Householder QR solve;
reported sums of squares go through the order-stable kernels so that repeated
and parallel evaluations are bit-identical.  Fixed effects are absorbed by
within-group demeaning (:func:`absorb_groups`), which reproduces the slope
coefficients of the explicit-dummy regression.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special
from scipy.linalg import solve_triangular

from . import kernels
from .errors import (
    DegenerateSeries,
    InsufficientObservations,
    RankDeficient,
)

SE_TYPES = ("classical", "robust", "cluster")

_EPS = np.finfo(np.float64).eps


@dataclass(frozen=True)
class DesignMatrix:
    """Validated regressor block: ordered labels plus an n x k value matrix.

    Invariants enforced at construction: entries are finite, there is at
    least one more observation than regressor, and no column is constant
    unless it is the declared intercept in position 0.
    """

    labels: tuple
    values: np.ndarray
    has_intercept: bool = False

    def __post_init__(self):
        values = np.ascontiguousarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise ValueError("design values must be a 2-D matrix")
        labels = tuple(str(v) for v in self.labels)
        n, k = values.shape
        if len(labels) != k:
            raise ValueError(f"{len(labels)} labels for {k} columns")
        if len(set(labels)) != len(labels):
            raise ValueError("duplicate regressor labels")
        if not np.isfinite(values).all():
            raise ValueError("design matrix contains non-finite entries")
        if n < k + 1:
            raise InsufficientObservations(
                f"{n} observations cannot identify {k} regressors"
            )
        col_min = values.min(axis=0)
        col_max = values.max(axis=0)
        constant = col_min == col_max
        if self.has_intercept:
            if constant[0] and col_min[0] != 0.0:
                constant[0] = False
            else:
                raise ValueError("has_intercept declared but column 0 is not a nonzero constant")
        if constant.any():
            bad = [labels[j] for j in np.flatnonzero(constant)]
            raise RankDeficient(
                bad,
                f"column(s) {', '.join(bad)} are constant; "
                "only the declared intercept may be constant",
            )
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "values", values)

    @classmethod
    def build(cls, columns, intercept=True):
        """Assemble a design from an ordered ``{label: column}`` mapping."""
        labels = list(columns)
        cols = [np.asarray(columns[name], dtype=np.float64) for name in labels]
        if not cols:
            raise ValueError("no columns supplied")
        n = cols[0].shape[0]
        if intercept:
            labels = ["const"] + labels
            cols = [np.ones(n)] + cols
        return cls(tuple(labels), np.column_stack(cols), has_intercept=intercept)

    @property
    def n_obs(self):
        return self.values.shape[0]

    @property
    def n_regressors(self):
        return self.values.shape[1]


@dataclass(frozen=True)
class OlsFit:
    """Coefficient estimates with classical/robust/cluster inference."""

    labels: tuple
    coefficients: np.ndarray
    standard_errors: np.ndarray
    t_stats: np.ndarray
    p_values: np.ndarray
    residuals: np.ndarray
    r_squared: float
    df_resid: int
    n_obs: int
    se_type: str
    df_inference: int

    def _index(self, label):
        try:
            return self.labels.index(label)
        except ValueError:
            raise KeyError(f"no regressor named {label!r}") from None

    def coef(self, label):
        return float(self.coefficients[self._index(label)])

    def se(self, label):
        return float(self.standard_errors[self._index(label)])

    def t(self, label):
        return float(self.t_stats[self._index(label)])

    def p(self, label):
        return float(self.p_values[self._index(label)])


@dataclass(frozen=True)
class StandardizationStats:
    """Location/scale record for a standardized series.

    ``sd_population`` divides by n, ``sd_sample`` by n - 1; the two satisfy
    ``sd_sample = sd_population * sqrt(n / (n - 1))``.
    """

    mean: float
    sd_population: float
    sd_sample: float
    n: int

    def zscore(self, value, divisor="population"):
        sd = self.sd_population if divisor == "population" else self.sd_sample
        return (value - self.mean) / sd


@dataclass(frozen=True)
class AbsorbedDesign:
    """Within-demeaned design plus the bookkeeping for df correction."""

    x: DesignMatrix
    y: np.ndarray
    n_groups: int
    n_singletons: int

    @property
    def df_absorbed(self):
        return self.n_groups


def _check_rank(r_diag, labels, n):
    scale = np.abs(r_diag).max() if r_diag.size else 0.0
    tol = max(n, len(labels)) * _EPS * max(scale, 1e-300)
    bad = np.abs(r_diag) <= tol
    if bad.any():
        # with unpivoted QR, a vanishing R[j, j] marks column j as dependent
        # on columns 0..j-1
        offenders = [labels[j] for j in np.flatnonzero(bad)]
        raise RankDeficient(
            offenders,
            f"column(s) {', '.join(offenders)} are linear combinations of "
            "earlier columns",
        )


def ols_fit(X, y, se_type="classical", cluster=None, df_absorbed=0):
    """Least-squares fit of ``y`` on a validated :class:`DesignMatrix`.

    Parameters
    ----------
    X : DesignMatrix
    y : (n,) response vector, finite
    se_type : "classical" (homoskedastic, default), "robust" (HC1) or
        "cluster" (cluster-robust; requires ``cluster`` labels per row)
    cluster : per-row cluster labels, required when ``se_type="cluster"``
    df_absorbed : degrees of freedom already absorbed by demeaning (the
        number of groups removed by :func:`absorb_groups`)

    Two-sided p-values use the Student-t distribution with the residual
    degrees of freedom (clusters: G - 1).  R-squared is computed against the
    mean of ``y`` when the design has an intercept (or absorbed effects),
    against zero otherwise.
    """
    if se_type not in SE_TYPES:
        raise ValueError(f"se_type must be one of {SE_TYPES}, got {se_type!r}")
    y = np.ascontiguousarray(y, dtype=np.float64)
    if y.ndim != 1 or y.shape[0] != X.n_obs:
        raise ValueError("response length does not match design rows")
    if not np.isfinite(y).all():
        raise ValueError("response contains non-finite entries")

    n, k = X.values.shape
    df_resid = n - k - int(df_absorbed)
    if df_resid <= 0:
        raise InsufficientObservations(
            f"df_resid = {n} - {k} - {df_absorbed} <= 0"
        )

    q, r = np.linalg.qr(X.values)
    _check_rank(np.diag(r), X.labels, n)
    beta = solve_triangular(r, q.T @ y, lower=False)
    resid = y - X.values @ beta
    ssr = kernels.stable_dot(resid, resid)

    r_inv = solve_triangular(r, np.eye(k), lower=False)
    xtx_inv = r_inv @ r_inv.T

    if se_type == "classical":
        cov = (ssr / df_resid) * xtx_inv
        df_inference = df_resid
    elif se_type == "robust":
        scores = X.values * resid[:, None]
        meat = scores.T @ scores
        cov = (n / df_resid) * (xtx_inv @ meat @ xtx_inv)
        df_inference = df_resid
    else:
        if cluster is None:
            raise ValueError("se_type='cluster' requires cluster labels")
        codes, n_groups = _factorize(cluster, n)
        if n_groups < 2:
            raise ValueError("cluster-robust errors need at least 2 clusters")
        scores = X.values * resid[:, None]
        sums = np.zeros((n_groups, k))
        np.add.at(sums, codes, scores)
        meat = sums.T @ sums
        factor = (n_groups / (n_groups - 1)) * ((n - 1) / df_resid)
        cov = factor * (xtx_inv @ meat @ xtx_inv)
        df_inference = n_groups - 1

    se = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    t = np.zeros(k)
    nonzero = se > 0
    t[nonzero] = beta[nonzero] / se[nonzero]
    # exact fits: se == 0 with a nonzero coefficient is infinitely significant
    t[~nonzero & (beta != 0)] = np.inf * np.sign(beta[~nonzero & (beta != 0)])
    p = student_t_p(t, df_inference)

    centered = X.has_intercept or df_absorbed > 0
    if centered:
        ybar = kernels.stable_sum(y) / n
        dev = y - ybar
        tss = kernels.stable_dot(dev, dev)
    else:
        tss = kernels.stable_dot(y, y)
    tiny = n * _EPS * max(tss, 1.0)
    if tss <= tiny:
        r_squared = 1.0 if ssr <= tiny else 0.0
    else:
        r_squared = float(np.clip(1.0 - ssr / tss, 0.0, 1.0))

    return OlsFit(
        labels=X.labels,
        coefficients=beta,
        standard_errors=se,
        t_stats=t,
        p_values=np.asarray(p, dtype=np.float64),
        residuals=resid,
        r_squared=r_squared,
        df_resid=df_resid,
        n_obs=n,
        se_type=se_type,
        df_inference=df_inference,
    )


def student_t_p(t, df):
    """Two-sided Student-t p-value via the regularized incomplete beta.

    p = I_{df / (df + t^2)}(df / 2, 1/2), which equals 2 * (1 - F_t(|t|; df))
    and is exactly 1 at t = 0.  ``df`` must be a positive integer; ``t`` may
    be a scalar or an array (infinities map to p = 0).
    """
    df = int(df)
    if df < 1:
        raise ValueError(f"df must be >= 1, got {df}")
    t_arr = np.asarray(t, dtype=np.float64)
    with np.errstate(invalid="ignore"):
        x = df / (df + t_arr * t_arr)
    x = np.where(np.isinf(t_arr), 0.0, x)
    p = special.betainc(df / 2.0, 0.5, x)
    if np.isscalar(t) or np.ndim(t) == 0:
        return float(p)
    return p


def standardize(series, divisor="population"):
    """Z-score a series, returning the scores and the scale record.

    ``divisor`` picks which standard deviation the scores divide by;
    the returned :class:`StandardizationStats` always carries both.
    """
    if divisor not in ("population", "sample"):
        raise ValueError(f"divisor must be population|sample, got {divisor!r}")
    x = np.ascontiguousarray(series, dtype=np.float64)
    n = x.shape[0]
    if n < 2:
        raise DegenerateSeries(f"cannot standardize a series of length {n}")
    mean = kernels.stable_sum(x) / n
    dev = x - mean
    ss = kernels.stable_dot(dev, dev)
    if ss <= 0.0:
        raise DegenerateSeries("cannot standardize a constant series")
    sd_pop = np.sqrt(ss / n)
    sd_samp = np.sqrt(ss / (n - 1))
    sd = sd_pop if divisor == "population" else sd_samp
    stats = StandardizationStats(
        mean=float(mean),
        sd_population=float(sd_pop),
        sd_sample=float(sd_samp),
        n=n,
    )
    return dev / sd, stats


def _factorize(groups, n_expected):
    labels = np.asarray(groups)
    if labels.shape[0] != n_expected:
        raise ValueError("group labels do not match the number of rows")
    uniques, codes = np.unique(labels, return_inverse=True)
    return codes.astype(np.int64), len(uniques)


def absorb_groups(X, y, groups):
    """Demean a design and response within categorical groups.

    Equivalent to including one dummy per group: an :func:`ols_fit` on the
    demeaned data with ``df_absorbed=result.n_groups`` reproduces the slope
    coefficients of the explicit-dummy regression.  The intercept column, if
    declared, is dropped (demeaning absorbs it).  Singleton groups are legal;
    their rows demean to zero and are counted in ``n_singletons``.
    """
    y = np.ascontiguousarray(y, dtype=np.float64)
    if y.shape[0] != X.n_obs:
        raise ValueError("response length does not match design rows")
    codes, n_groups = _factorize(groups, X.n_obs)

    if X.has_intercept:
        labels = X.labels[1:]
        mat = X.values[:, 1:]
    else:
        labels = X.labels
        mat = X.values
    if mat.shape[1] == 0:
        raise ValueError("nothing left to demean: design holds only the intercept")

    stacked = np.column_stack([mat, y])
    demeaned, counts = kernels.group_demean(stacked, codes, n_groups)
    n_singletons = int((counts == 1).sum())

    try:
        x_new = DesignMatrix(labels, demeaned[:, :-1], has_intercept=False)
    except RankDeficient as err:
        raise RankDeficient(
            err.labels,
            f"column(s) {', '.join(err.labels)} are constant within every "
            "group and were annihilated by demeaning",
        ) from None
    return AbsorbedDesign(
        x=x_new,
        y=demeaned[:, -1],
        n_groups=n_groups,
        n_singletons=n_singletons,
    )
