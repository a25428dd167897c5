import math

import numpy as np
import pytest

from cablefield.formulas import (FormulaError, cap_density_mass,
                                 cap_support_edge, cap_transform_density,
                                 exponent_references,
                                 gaussian_mixture_residual, lupu_arcsin,
                                 lupu_arctan, two_point)


def test_arctan_hand_value():
    # (1/pi) arctan((1/3) / sqrt((1/2)(2/3))) = 1/6
    assert abs(lupu_arctan(2 / 3, 1 / 3, 0.5) - 1 / 6) < 1e-15


def test_arctan_vanishing_correlation():
    assert lupu_arctan(2 / 3, 0.0, 0.3) == 0.0


def test_arctan_rejects_nonpositive_threshold():
    with pytest.raises(FormulaError):
        lupu_arctan(2 / 3, 1 / 3, 0.0)


def test_arcsin_hand_value():
    assert abs(lupu_arcsin(2 / 3, 1 / 3, 2 / 3) - 1 / 6) < 1e-15


def test_arcsin_saturates_at_half():
    assert abs(lupu_arcsin(1.0, 1.0, 1.0) - 0.5) < 1e-15


def test_arcsin_rejects_argument_above_one():
    with pytest.raises(FormulaError):
        lupu_arcsin(1.0, 1.0, 0.5)


def test_two_point_p2k():
    assert abs(two_point(2 / 3, 2 / 3, 1 / 3) - 1 / 6) < 1e-15


def test_two_point_rejects_cauchy_schwarz_violation():
    with pytest.raises(FormulaError):
        two_point(1.0, 1.0, 1.1)


def test_two_point_uncorrelated_never_connects():
    assert two_point(1.0, 1.0, 0.0) == 0.0


def test_arctan_arcsin_consistency_sweep():
    # arctan(a/b) = arcsin(a / sqrt(a^2 + b^2)) written through the shift
    # s = t + g(x) - g_base(x)
    rng = np.random.default_rng(17)
    for _ in range(10_000):
        g00 = rng.uniform(0.2, 3.0)
        gxx = rng.uniform(0.2, 3.0)
        g0x = rng.uniform(0.0, 1.0) * math.sqrt(g00 * gxx) * 0.999
        g0kx = gxx - g0x**2 / g00
        t = rng.uniform(1e-6, 1.0) * g0kx
        s = t + gxx - g0kx
        assert abs(lupu_arctan(g00, g0x, t) - lupu_arcsin(g00, g0x, s)) \
            < 1e-12


def test_two_point_monotonicities():
    base = two_point(1.0, 1.0, 0.5)
    assert two_point(1.0, 1.0, 0.6) > base
    assert two_point(1.2, 1.0, 0.5) < base
    assert two_point(1.0, 1.2, 0.5) < base


def test_density_support():
    assert cap_transform_density(0.3, 0.0, 0.5, 0.5) == 0.0
    edge = cap_support_edge(0.5, 0.5)  # = 1/2
    assert edge == 0.5
    assert cap_transform_density(edge * 0.999, 0.0, 0.5, 0.5) == 0.0
    assert cap_transform_density(edge * 1.5, 0.0, 0.5, 0.5) > 0.0


def test_density_total_mass_half():
    # quadrature over the full support at t = 0 carries the nonempty mass
    for g0kx, h0 in ((0.5, 0.5), (1.3, 0.4), (0.9, 0.95)):
        mass = cap_density_mass(0.0, g0kx, h0)
        assert abs(mass - 0.5) < 1e-6


def test_density_mass_is_additive():
    g0kx, h0 = 0.5, 0.5
    lo = cap_support_edge(g0kx, h0)
    cut = 3.0
    total = cap_density_mass(0.0, g0kx, h0)
    assert abs(cap_density_mass(0.0, g0kx, h0, lo, cut)
               + cap_density_mass(0.0, g0kx, h0, cut, None) - total) < 1e-10


def test_density_matches_quadrature_of_pointwise_values():
    from scipy.integrate import quad

    g0kx, h0, t = 0.8, 0.6, 0.7
    beta = cap_support_edge(g0kx, h0)
    direct, _ = quad(lambda u: cap_transform_density(u, t, g0kx, h0),
                     beta * (1 + 1e-12), np.inf, limit=400)
    assert abs(direct - cap_density_mass(t, g0kx, h0)) < 1e-6


def test_gaussian_mixture_identity():
    for u, gx in ((0.5, 0.7), (2.0, 0.25), (10.0, 1.5)):
        assert gaussian_mixture_residual(u, gx) < 1e-10


def test_evaluators_are_pure():
    a = lupu_arctan(0.7, 0.3, 0.2)
    b = lupu_arctan(0.7, 0.3, 0.2)
    assert a == b
    d1 = cap_transform_density(1.7, 0.3, 0.6, 0.5)
    d2 = cap_transform_density(1.7, 0.3, 0.6, 0.5)
    assert d1 == d2


def test_exponent_references():
    ref = exponent_references(3)
    assert ref.nu == 1.0
    assert ref.one_arm_exponent == -0.5
    assert ref.cap_tail_exponent == -0.5
    assert exponent_references(4).nu == 2.0


def test_exponent_references_rejects_low_alpha():
    with pytest.raises(FormulaError):
        exponent_references(2)
