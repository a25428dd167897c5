"""Estimator statistics: Wilson intervals, score z, log-log fits, chi-square."""

from __future__ import annotations

import math

import numpy as np
from scipy.stats import chi2

Z95 = 1.959963984540054


class StatsError(ValueError):
    pass


def wilson_interval(count: int, n: int, z: float = Z95):
    """Wilson score interval for a binomial rate (robust for small rates)."""
    if n <= 0:
        return 0.0, 1.0
    phat = count / n
    z2 = z * z
    denom = 1.0 + z2 / n
    center = phat + z2 / (2 * n)
    rad = z * math.sqrt(phat * (1 - phat) / n + z2 / (4 * n * n))
    lo = 0.0 if count == 0 else max(0.0, (center - rad) / denom)
    hi = 1.0 if count == n else min(1.0, (center + rad) / denom)
    return lo, hi


def score_z(count: int, n: int, p_ref: float) -> float:
    """Standardized score of an observed count under a reference rate; the
    Wilson interval at level z contains p_ref iff |score_z| <= z."""
    if not 0 < p_ref < 1:
        if p_ref in (0.0, 1.0):
            return 0.0 if count / n == p_ref else math.inf
        raise StatsError(f"reference rate {p_ref} outside [0,1]")
    return (count / n - p_ref) / math.sqrt(p_ref * (1 - p_ref) / n)


def fit_loglog(points):
    """Weighted least-squares slope of log p against log x.

    `points` holds (x, p, sigma) triples with p > 0; weights are the
    delta-method variances (sigma/p)^2.  With all sigmas zero the fit is
    unweighted and the standard error comes from the residuals.
    Returns (slope, stderr).
    """
    pts = [(float(x), float(p), float(s)) for x, p, s in points]
    if len(pts) < 3:
        raise StatsError(f"need at least 3 points, got {len(pts)}")
    if any(p <= 0 for _, p, _ in pts):
        raise StatsError("nonpositive estimates cannot be fit in log space")
    if any(s < 0 for _, _, s in pts):
        raise StatsError("negative sigma")

    lx = np.array([math.log(x) for x, _, _ in pts])
    lp = np.array([math.log(p) for _, p, _ in pts])
    sig = np.array([s / p for _, p, s in pts])

    X = np.column_stack([np.ones_like(lx), lx])
    if np.all(sig == 0):
        beta, res, *_ = np.linalg.lstsq(X, lp, rcond=None)
        dof = len(pts) - 2
        s2 = float(res[0]) / dof if res.size and dof > 0 else 0.0
        cov = s2 * np.linalg.inv(X.T @ X)
        return float(beta[1]), float(math.sqrt(max(cov[1, 1], 0.0)))
    if np.any(sig == 0):
        raise StatsError("mixed zero and nonzero sigmas")
    W = 1.0 / sig**2
    XtW = X.T * W
    cov = np.linalg.inv(XtW @ X)
    beta = cov @ (XtW @ lp)
    return float(beta[1]), float(math.sqrt(cov[1, 1]))


def chi_square_gof(counts, expected, min_expected: float = 5.0):
    """Goodness-of-fit test against fully specified expected counts.

    Adjacent bins are merged until every expected count reaches
    `min_expected`.  Returns (statistic, dof, p_value).
    """
    counts = np.asarray(counts, dtype=np.float64)
    expected = np.asarray(expected, dtype=np.float64)
    if counts.shape != expected.shape:
        raise StatsError("counts and expected must align")
    mc, me = [], []
    acc_c = acc_e = 0.0
    for c, e in zip(counts, expected):
        acc_c += c
        acc_e += e
        if acc_e >= min_expected:
            mc.append(acc_c)
            me.append(acc_e)
            acc_c = acc_e = 0.0
    if acc_e > 0:
        if me:
            mc[-1] += acc_c
            me[-1] += acc_e
        else:
            mc.append(acc_c)
            me.append(acc_e)
    mc = np.array(mc)
    me = np.array(me)
    if me.size < 2:
        raise StatsError("not enough mass to form two bins")
    stat = float(np.sum((mc - me) ** 2 / me))
    dof = me.size - 1
    return stat, dof, float(chi2.sf(stat, dof))
