"""Tire geometry: camber/steer coupling, contact velocity, slip angle."""

import json
import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from motoraceline.errors import LowSpeedError, TrackFormatError
from motoraceline.kinematics import BodyVelocity
from motoraceline.motorcycle import (
    MotorcycleParams,
    front_tire_angles,
    load_params,
    params_from_dict,
    rear_tire_angles,
    slip_angle,
    tire_contact_velocity,
)


def rot_x(a):
    return np.array([[1, 0, 0], [0, math.cos(a), -math.sin(a)], [0, math.sin(a), math.cos(a)]])


def rotate_about(axis, angle, v):
    """Rodrigues rotation, the oracle for the printed angle expressions."""
    axis = np.asarray(axis) / np.linalg.norm(axis)
    return (
        v * math.cos(angle)
        + np.cross(axis, v) * math.sin(angle)
        + axis * (axis @ v) * (1 - math.cos(angle))
    )


def wheel_plane_normal(c, gamma, eps):
    """Compose steer about the raked axis, then body camber about e1."""
    steer_axis = np.array([-math.sin(eps), 0.0, math.cos(eps)])
    n = rotate_about(steer_axis, gamma, np.array([0.0, 1.0, 0.0]))
    return rot_x(-c) @ n


def angles_from_normal(n):
    c_t = -math.asin(n[2])
    gamma_t = math.atan2(-n[0], n[1])
    return c_t, gamma_t


def test_front_tire_angles_trivial_cases():
    c_f, g_f = front_tire_angles(0.3, 0.0, 0.5)
    assert_allclose((c_f, g_f), (0.3, 0.0), atol=1e-15)
    c_f, g_f = front_tire_angles(0.0, 0.1, 0.0)
    assert_allclose((c_f, g_f), (0.0, 0.1), atol=1e-15)


def test_front_tire_angles_frozen_value():
    c_f, g_f = front_tire_angles(0.0, 0.1, math.pi / 6)
    assert_allclose(c_f, 0.04993746099295852, atol=1e-12)
    assert_allclose(g_f, 0.08667467289298249, atol=1e-12)


def test_front_tire_angles_match_rotation_composition():
    # acceptance grid: every printed-angle pair reproduces the composed
    # rotation's wheel-plane normal to 1e-10, at the 30 deg rake of the
    # default parameter set
    eps = math.radians(30.0)
    for c in np.linspace(-0.6, 0.6, 13):
        for gamma in np.linspace(-0.7, 0.7, 15):
            n = wheel_plane_normal(c, gamma, eps)
            c_ref, g_ref = angles_from_normal(n)
            c_f, g_f = front_tire_angles(c, gamma, eps)
            assert abs(c_f - c_ref) < 1e-10
            assert abs(g_f - g_ref) < 1e-10
            # and the reconstructed normal matches
            n_back = np.array(
                [
                    -math.cos(c_f) * math.sin(g_f),
                    math.cos(c_f) * math.cos(g_f),
                    -math.sin(c_f),
                ]
            )
            assert np.max(np.abs(n_back - n)) < 1e-10


def test_front_tire_angles_zero_rake_reduction():
    for c in [-0.4, 0.0, 0.5]:
        c_f, g_f = front_tire_angles(c, 0.3, 0.0)
        if c == 0.0:
            assert_allclose(g_f, 0.3, atol=1e-14)
        n = wheel_plane_normal(c, 0.3, 0.0)
        c_ref, g_ref = angles_from_normal(n)
        assert_allclose((c_f, g_f), (c_ref, g_ref), atol=1e-12)


def test_rear_tire_angles():
    for c in [0.0, 0.4, -0.2]:
        assert_allclose(rear_tire_angles(c), (c, 0.0), atol=1e-15)


def test_tire_contact_velocity():
    p = MotorcycleParams()
    v = BodyVelocity(10.0, 0.0, 0.0)
    assert_allclose(tire_contact_velocity(v, 0.0, 0.0, p, "front"), (10.0, 0.0))
    v = BodyVelocity(10.0, 0.0, 0.5)
    assert_allclose(tire_contact_velocity(v, 0.0, 0.0, p, "front"), (10.0, 0.375))
    assert_allclose(tire_contact_velocity(v, 0.0, 0.0, p, "rear"), (10.0, -0.375))
    # rigid-body transfer oracle: v + omega x offset for random motions
    rng = np.random.default_rng(2)
    for _ in range(50):
        v1, v2, w1, w2, w3 = rng.uniform(-5, 5, 5)
        v1 += 10.0
        vel = BodyVelocity(v1, v2, w3)
        omega = np.array([w1, w2, w3])
        for wheel, arm in [("front", p.lf), ("rear", -p.lr)]:
            offset = np.array([arm, 0.0, -p.r])
            vt = np.array([v1, v2, 0.0]) + np.cross(omega, offset)
            got = tire_contact_velocity(vel, w1, w2, p, wheel)
            assert_allclose(got, vt[:2], atol=1e-12)


def test_slip_angle_basics():
    assert_allclose(
        slip_angle(10.0 * math.cos(0.1), 10.0 * math.sin(0.1), 0.1), 0.0, atol=1e-15
    )
    assert_allclose(slip_angle(10.0, 1.0, 0.0), 0.09966865249116204, atol=1e-15)
    assert_allclose(slip_angle(10.0, 0.0, 0.05), -0.05, atol=1e-12)


def test_slip_angle_scale_invariance_and_antisymmetry():
    rng = np.random.default_rng(4)
    for _ in range(100):
        v1, v2 = rng.uniform(0.5, 30), rng.uniform(-10, 10)
        g = rng.uniform(-0.7, 0.7)
        a = slip_angle(v1, v2, g)
        for k in [0.5, 3.0, 17.0]:
            assert_allclose(slip_angle(k * v1, k * v2, g), a, atol=1e-14)
        assert_allclose(slip_angle(v1, -v2, -g), -a, atol=1e-14)


def test_slip_angle_low_speed_raises():
    with pytest.raises(LowSpeedError):
        slip_angle(0.01, 0.02, 0.0)


def test_params_defaults_match_table():
    p = MotorcycleParams()
    assert p.m == 240.0 and p.I11 == 18.0 and p.I22 == 60.0 and p.I33 == 48.0
    assert p.lf == 0.75 and p.lr == 0.75 and p.h == 0.5 and p.r == 0.1
    assert_allclose(p.epsilon, math.radians(30.0))
    assert p.gamma_max == 0.7 and p.d_max == 0.05 and p.dddot_max == 0.5
    assert p.P_max == 50e3 and p.g == 9.81
    assert_allclose(p.weight, 2354.4)


def test_params_json_roundtrip(tmp_path):
    raw = {
        "m": 250.0,
        "epsilon_deg": 25.0,
        "front_tire": {"d4": 1.1, "radius": 0.29},
        "I12": 0.5,
    }
    path = tmp_path / "params.json"
    path.write_text(json.dumps(raw))
    p = load_params(path)
    assert p.m == 250.0
    assert_allclose(p.epsilon, math.radians(25.0))
    assert p.front_tire.d4 == 1.1 and p.front_tire.radius == 0.29
    assert p.rear_tire.d4 == 1.2
    assert p.I12 == 0.5


@pytest.mark.parametrize(
    "raw,needle",
    [
        ({"m": -10.0}, "m"),
        ({"m": "heavy"}, "params.m"),
        ({"front_tire": {"grip": 2.0}}, "front_tire.grip"),
        ({"h": 0.05}, "h"),
    ],
)
def test_params_validation_errors(raw, needle):
    with pytest.raises(TrackFormatError) as err:
        params_from_dict(raw)
    assert needle in str(err.value)
