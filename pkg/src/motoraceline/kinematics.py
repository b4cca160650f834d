"""Pose kinematics of the tangent-constrained body frame.

The body frame sits at a fixed normal offset ``n`` above the surface and
stays tangent to it, so its full 3D pose is determined by ``(s, y, theta_s)``.
This module maps body-frame velocities to parameter rates, gives the in-plane
angular velocity the tangency constraint induces, and reconstructs the frame
(and gravity components) in world coordinates.

All functions are pure and scalar-generic: they accept floats, arrays, or
dual numbers in any velocity/pose slot except ``s``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import ad
from .errors import OffsetSingularityError
from .geometry import SurfaceSample

OFFSET_COND_LIMIT = 1e8


@dataclass
class Pose:
    """Body-frame pose parameters: ``(s, y, theta_s)`` plus the fixed offset n."""

    s: object
    y: object
    theta_s: object
    n: float = 0.0


@dataclass
class BodyVelocity:
    """In-plane body velocities and the normal angular rate (v3 is zero)."""

    v1: object
    v2: object
    w3: object


def wrap_angle(theta):
    """Wrap an angle to (-pi, pi] via its cos/sin pair."""
    wrapped = np.arctan2(np.sin(theta), np.cos(theta))
    return np.where(wrapped <= -math.pi, math.pi, wrapped)


def surface_jacobian(sample: SurfaceSample, theta_s):
    """Jacobian J between surface tangents and the in-plane body axes.

    Rows are ``x_s`` and ``x_y`` expressed against ``(e1, e2)``; computed from
    ``theta_s`` and the tangent norms rather than explicit dot products.
    """
    ct, st = ad.cos(theta_s), ad.sin(theta_s)
    rel = theta_s - sample.theta_p
    cr, sr = ad.cos(rel), ad.sin(rel)
    return (
        (ct * sample.norm_xs, -st * sample.norm_xs),
        (sr * sample.norm_xy, cr * sample.norm_xy),
    )


def offset_matrix(sample: SurfaceSample, n):
    """(I - n II), guarded against the focal-offset singularity."""
    a = tuple(
        tuple(sample.form1[i][j] - n * sample.form2[i][j] for j in range(2))
        for i in range(2)
    )
    scalar = all(np.ndim(ad.value_of(a[i][j])) == 0 for i in range(2) for j in range(2))
    cond = ad.cond22(a) if scalar else _batch_cond(a)
    if cond > OFFSET_COND_LIMIT:
        raise OffsetSingularityError(
            f"(I - n II) condition {cond:.2e} exceeds {OFFSET_COND_LIMIT:.0e} "
            f"(normal offset n={ad.value_of(n)} near focal distance)"
        )
    return a


def _batch_cond(a):
    """Worst Frobenius-based condition estimate over a batched 2x2 matrix."""
    m = np.stack(
        [np.broadcast_arrays(*(ad.value_of(a[i][j]) for j in range(2))) for i in range(2)]
    ).astype(float)
    det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
    fro2 = (m * m).sum(axis=(0, 1))
    with np.errstate(divide="ignore"):
        cond = fro2 / np.abs(det)
    return float(np.max(cond))


def pose_rates(pose: Pose, vel: BodyVelocity, sample: SurfaceSample):
    """Rates of (s, y, theta_s) from body velocities.

    ``[s_dot, y_dot] = (I - n II)^-1 J [v1, v2]`` and theta_s_dot adds the
    parametrization-turning corrections built from x_ss and x_yy.
    """
    jac = surface_jacobian(sample, pose.theta_s)
    a = offset_matrix(sample, pose.n)
    rhs = ad.matvec22(jac, (vel.v1, vel.v2))
    s_dot, y_dot = ad.solve22(a, rhs)
    ee = ad.dot3(sample.x_s, sample.x_s)
    k_s = ad.dot3(ad.cross3(sample.x_ss, sample.x_s), sample.normal) / ee
    k_y = ad.dot3(ad.cross3(sample.x_yy, sample.x_s), sample.normal) / ee
    theta_s_dot = vel.w3 + k_s * s_dot + k_y * y_dot
    return s_dot, y_dot, theta_s_dot


def _induced_map(pose: Pose, sample: SurfaceSample, u1, u2):
    """Apply J^-1 II (I - n II)^-1 J to an in-plane pair, returning (out1, out2)."""
    jac = surface_jacobian(sample, pose.theta_s)
    a = offset_matrix(sample, pose.n)
    v = ad.matvec22(jac, (u1, u2))
    v = ad.solve22(a, v)
    v = ad.matvec22(sample.form2, v)
    return ad.solve22(jac, v)


def induced_angular_velocity(pose: Pose, vel: BodyVelocity, sample: SurfaceSample):
    """In-plane angular velocity (w1, w2) the tangency constraint induces."""
    m1, m2 = _induced_map(pose, sample, vel.v1, vel.v2)
    # the map yields [-w2, w1]
    return m2, -m1


def induced_angular_acceleration(pose: Pose, accel, sample: SurfaceSample):
    """In-plane angular acceleration from (v1_dot, v2_dot).

    Same matrix pipeline as the velocity map; the time derivatives of the
    curvature matrices are neglected (gradually-varying curvature).
    """
    m1, m2 = _induced_map(pose, sample, accel[0], accel[1])
    return m2, -m1


def body_frame_in_world(pose: Pose, sample: SurfaceSample):
    """World components of (e1, e2, e3): ``[e1 e2] = [x_s x_y] I^-1 J``, e3 = normal."""
    jac = surface_jacobian(sample, pose.theta_s)
    b = ad.matmul22(ad.inv22(sample.form1), jac)
    e1 = ad.add3(ad.scale3(b[0][0], sample.x_s), ad.scale3(b[1][0], sample.x_y))
    e2 = ad.add3(ad.scale3(b[0][1], sample.x_s), ad.scale3(b[1][1], sample.x_y))
    return e1, e2, sample.normal


def gravity_components(pose: Pose, sample: SurfaceSample, g_vec):
    """Body-frame components of a world-frame acceleration vector.

    Uses the ``I^-1 J`` projection for the in-plane pair, so frames are never
    explicitly normalized.
    """
    jac = surface_jacobian(sample, pose.theta_s)
    b = ad.matmul22(ad.inv22(sample.form1), jac)
    gs = ad.dot3(sample.x_s, g_vec)
    gy = ad.dot3(sample.x_y, g_vec)
    g1 = gs * b[0][0] + gy * b[1][0]
    g2 = gs * b[0][1] + gy * b[1][1]
    g3 = ad.dot3(sample.normal, g_vec)
    return g1, g2, g3
