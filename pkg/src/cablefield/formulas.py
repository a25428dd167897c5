"""Closed-form reference laws for the level-zero cluster observables.

These are the exact values Monte Carlo estimates are tested against: the
arctan law for the drop in the killed Green value, its arcsin form, the
two-point connection probability, and the density of the cluster capacity
on a graph conditioned to hit a distinguished vertex.  All evaluators are
pure; probabilities are clamped to [0, 1] only after asserting the raw
value was within 1e-12 of the interval.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad


class FormulaError(ValueError):
    pass


def _clamp(p: float) -> float:
    if not -1e-12 <= p <= 1 + 1e-12:
        raise FormulaError(f"probability {p} outside [0,1] beyond tolerance")
    return min(max(p, 0.0), 1.0)


def lupu_arctan(g00: float, g0x: float, t: float) -> float:
    """P(drop in the killed-at-base Green value at x is >= t), equal to
    arctan(g(0,x) / sqrt(t g(0,0))) / pi for thresholds t in the range of
    the drop."""
    if t <= 0:
        raise FormulaError(f"threshold must be positive, got {t}")
    if g00 <= 0:
        raise FormulaError("g(0,0) must be positive")
    return _clamp(math.atan(g0x / math.sqrt(t * g00)) / math.pi)


def lupu_arcsin(g00: float, g0x: float, s: float) -> float:
    """Equivalent arcsin form: P(g(x,x) - g_cluster(x,x) >= s) equals
    arcsin(g(0,x) / sqrt(s g(0,0))) / pi."""
    if s <= 0 or g00 <= 0:
        raise FormulaError("s and g(0,0) must be positive")
    arg = g0x / math.sqrt(s * g00)
    if arg > 1 + 1e-12:
        raise FormulaError(f"arcsin argument {arg} exceeds 1")
    return _clamp(math.asin(min(arg, 1.0)) / math.pi)


def two_point(g00: float, gxx: float, g0x: float) -> float:
    """Connection probability of the base and x inside the level-0 cluster:
    arcsin(g(0,x) / sqrt(g(0,0) g(x,x))) / pi."""
    if g0x * g0x > g00 * gxx * (1 + 1e-12):
        raise FormulaError("inputs violate Cauchy-Schwarz")
    return lupu_arcsin(g00, g0x, gxx)


def cap_support_edge(g0_killed_x: float, h0: float) -> float:
    """Smallest possible capacity of a nonempty cluster on the transformed
    graph: h(0)^2 / g_{x}(0), the reciprocal diagonal Green value there."""
    return h0 * h0 / g0_killed_x


def cap_transform_density(u, t: float, g0_killed_x: float, h0: float):
    """Density of the cluster capacity at level -t on the graph conditioned
    to hit x, with respect to Lebesgue measure on (support edge, infinity):

        1 / (2 pi u sqrt(u G - 1)) * exp(-t^2 u / 2),   G = g_{x}(0)/h(0)^2,

    and zero below the support edge."""
    if g0_killed_x <= 0 or h0 <= 0:
        raise FormulaError("g_{x}(0) and h(0) must be positive")
    beta = cap_support_edge(g0_killed_x, h0)
    u = np.asarray(u, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        val = np.exp(-0.5 * t * t * u) / (
            2.0 * math.pi * u * np.sqrt(u / beta - 1.0))
    out = np.where(u > beta, val, 0.0)
    return float(out) if out.ndim == 0 else out


def cap_density_mass(t: float, g0_killed_x: float, h0: float,
                     lo=None, hi=None) -> float:
    """Integral of the capacity density over (lo, hi) by adaptive
    quadrature after the substitution u = beta * sec^2(theta), which
    removes the inverse-square-root singularity at the support edge."""
    beta = cap_support_edge(g0_killed_x, h0)
    lo = beta if lo is None else max(float(lo), beta)
    theta1 = math.acos(min(1.0, math.sqrt(beta / lo))) if lo > 0 else 0.0
    theta2 = math.pi / 2 if hi is None or math.isinf(hi) \
        else math.acos(math.sqrt(beta / float(hi)))
    if theta2 <= theta1:
        return 0.0
    c = 0.5 * t * t * beta

    def integrand(theta):
        sec2 = 1.0 / (math.cos(theta) ** 2)
        return math.exp(-c * sec2) / math.pi

    val, _ = quad(integrand, theta1, theta2, epsabs=1e-13, epsrel=1e-10,
                  limit=200)
    return val


def gaussian_mixture_residual(u: float, gx: float) -> float:
    """Residual of the Gaussian average identity
    (2 pi g)^{-1/2} int exp(-t^2 u/2 - t^2/(2g)) dt = 1/sqrt(u g + 1)."""
    def integrand(t):
        return math.exp(-0.5 * t * t * u - 0.5 * t * t / gx)

    val, _ = quad(integrand, -np.inf, np.inf, epsabs=1e-13, epsrel=1e-11)
    lhs = val / math.sqrt(2 * math.pi * gx)
    return abs(lhs - 1.0 / math.sqrt(u * gx + 1.0))


@dataclass(frozen=True)
class ExponentReferences:
    alpha: float
    nu: float
    cap_tail_exponent: float
    one_arm_exponent: float


def exponent_references(alpha) -> ExponentReferences:
    """Reference exponents for a lattice of polynomial growth degree alpha:
    the capacity tail decays with power -1/2 and the one-arm probability
    with power -nu/2 where nu = alpha - 2."""
    alpha = float(alpha)
    if alpha <= 2:
        raise FormulaError(f"growth degree must exceed 2, got {alpha}")
    nu = alpha - 2.0
    return ExponentReferences(alpha=alpha, nu=nu, cap_tail_exponent=-0.5,
                              one_arm_exponent=-nu / 2.0)
