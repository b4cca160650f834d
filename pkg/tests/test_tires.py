"""Tire force curve, friction-ellipse cap, spin momentum."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from motoraceline.errors import InfeasibleForceError
from motoraceline.tires import (
    TireParams,
    lateral_force,
    max_lateral_force,
    peak_major_axis,
    wheel_spin_momentum,
)


def test_max_lateral_force_values():
    p = TireParams(d4=1.2, d7=0.15)
    assert_allclose(max_lateral_force(1000.0, 0.0, 0.0, p), 1200.0, rtol=1e-15)
    assert_allclose(max_lateral_force(1000.0, 720.0, 0.0, p), 960.0, rtol=1e-15)
    d0 = peak_major_axis(1000.0, 0.0, p)
    assert_allclose(max_lateral_force(1000.0, d0, 0.0, p), 0.0, atol=1e-9)


def test_max_lateral_force_infeasible_raises():
    p = TireParams()
    with pytest.raises(InfeasibleForceError):
        max_lateral_force(1000.0, 1300.0, 0.0, p)


def test_lateral_force_zero_at_zero_inputs():
    p = TireParams()
    assert_allclose(lateral_force(0.0, 0.0, 1000.0, 0.0, p), 0.0, atol=1e-15)


def test_lateral_force_linear_regime():
    p = TireParams()
    fz = 2000.0
    a = 1e-5
    stiffness = p.d4 * fz * p.C_alpha * p.B_alpha
    assert_allclose(lateral_force(a, 0.0, fz, 0.0, p) / a, stiffness, rtol=1e-6)


def test_lateral_force_frozen_value():
    # value computed by a standalone scalar evaluation of the formula
    p = TireParams()
    got = lateral_force(0.05, 0.3, 1177.2, 0.0, p)
    assert_allclose(got, 1025.2401267949015, rtol=1e-13)


def test_lateral_force_odd_and_bounded():
    p = TireParams()
    rng = np.random.default_rng(8)
    for _ in range(200):
        fz = rng.uniform(100, 4000)
        c = rng.uniform(-0.8, 0.8)
        d0 = peak_major_axis(fz, c, p)
        fx = rng.uniform(-0.95, 0.95) * d0
        x = rng.uniform(-1.0, 1.0)
        # odd in the combined argument alpha + k_gamma * c
        plus = lateral_force(x - p.k_gamma * c, c, fz, fx, p)
        minus = lateral_force(-x - p.k_gamma * c, c, fz, fx, p)
        assert abs(plus + minus) < 1e-12 * max(1.0, abs(plus))
        # bounded by the cap, which is itself bounded by d4*Fz
        fy_max = max_lateral_force(fz, fx, c, p)
        assert abs(plus) <= fy_max + 1e-9
        assert fy_max <= p.d4 * fz + 1e-9
        # sign follows the combined argument for small arguments
        s = lateral_force(0.01 - p.k_gamma * c, c, fz, fx, p)
        assert s > 0.0


def test_peak_monotonicity():
    p = TireParams()
    fz = 1500.0
    # decreasing in |Fx|
    fy = [max_lateral_force(fz, fx, 0.2, p) for fx in [0.0, 300.0, 900.0, 1500.0]]
    assert all(a > b for a, b in zip(fy, fy[1:]))
    # decreasing in c^2
    fy = [max_lateral_force(fz, 200.0, c, p) for c in [0.0, 0.3, 0.6, 1.0]]
    assert all(a > b for a, b in zip(fy, fy[1:]))


def test_smoothed_cap_stays_close_and_differentiable():
    p = TireParams(smooth_eps=1.0)
    exact = TireParams()
    assert abs(
        max_lateral_force(1000.0, 700.0, 0.1, p) - max_lateral_force(1000.0, 700.0, 0.1, exact)
    ) < 1e-3
    # at the boundary the smoothed value is tiny instead of exactly zero
    d0 = peak_major_axis(1000.0, 0.0, p)
    assert 0.0 < max_lateral_force(1000.0, d0, 0.0, p, check=False) < 1.0
    # and beyond it, evaluation stays finite instead of raising
    assert np.isfinite(max_lateral_force(1000.0, d0 + 50.0, 0.0, p, check=False))


def test_wheel_spin_momentum():
    p = TireParams(radius=0.3, I_spin=0.6)
    assert_allclose(wheel_spin_momentum(0.0, p), 0.0)
    assert_allclose(wheel_spin_momentum(20.0, p), 40.0, rtol=1e-15)
    heavy = TireParams(radius=0.3, I_spin=1.2)
    assert_allclose(wheel_spin_momentum(20.0, heavy), 80.0, rtol=1e-15)
