"""Shared fixtures and finite-difference oracle helpers."""

from __future__ import annotations

import numpy as np
import pytest

from motoraceline import geometry


def fd_position_derivatives(surface, s, y, h=1e-5, h2=1e-3):
    """Central-difference first/second derivatives of the surface position.

    Independent oracle for the analytic tangent and curvature vectors: only
    the position field of neighboring samples is used. Second derivatives use
    a larger step (roundoff in the double difference scales with |x|/h^2).
    """

    def pos(ss, yy):
        return np.asarray(surface.evaluator(float(ss), float(yy)).position, dtype=float)

    x_s = (pos(s + h, y) - pos(s - h, y)) / (2 * h)
    x_y = (pos(s, y + h) - pos(s, y - h)) / (2 * h)
    p0 = pos(s, y)
    x_ss = (pos(s + h2, y) - 2 * p0 + pos(s - h2, y)) / h2**2
    x_yy = (pos(s, y + h2) - 2 * p0 + pos(s, y - h2)) / h2**2
    x_sy = (
        pos(s + h2, y + h2) - pos(s + h2, y - h2) - pos(s - h2, y + h2) + pos(s - h2, y - h2)
    ) / (4 * h2**2)
    return x_s, x_y, x_ss, x_sy, x_yy


def fd_normal_derivatives(surface, s, y, h=1e-6):
    """Central differences of the unit normal along s and y."""

    def normal(ss, yy):
        return np.asarray(surface.evaluator(float(ss), float(yy)).normal, dtype=float)

    n_s = (normal(s + h, y) - normal(s - h, y)) / (2 * h)
    n_y = (normal(s, y + h) - normal(s, y - h)) / (2 * h)
    return n_s, n_y


def sample_arrays(sample):
    """Sample fields as float numpy arrays (for tests on the numeric path)."""
    return {
        "position": np.asarray(sample.position, dtype=float),
        "x_s": np.asarray(sample.x_s, dtype=float),
        "x_y": np.asarray(sample.x_y, dtype=float),
        "x_ss": np.asarray(sample.x_ss, dtype=float),
        "x_sy": np.asarray(sample.x_sy, dtype=float),
        "x_yy": np.asarray(sample.x_yy, dtype=float),
        "normal": np.asarray(sample.normal, dtype=float),
        "form1": np.asarray(sample.form1, dtype=float),
        "form2": np.asarray(sample.form2, dtype=float),
    }


@pytest.fixture(scope="session")
def oracle_surfaces():
    return {
        "plane": geometry.plane(),
        "cylinder_valley": geometry.cylinder(10.0, valley=True),
        "cylinder_crest": geometry.cylinder(25.0, valley=False),
        "sphere": geometry.sphere_patch(40.0),
        "flat_ring": geometry.flat_ring(50.0),
        "banked_ring": geometry.banked_ring(60.0, np.deg2rad(20.0)),
    }
