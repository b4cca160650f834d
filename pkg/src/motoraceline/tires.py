"""Tire lateral force, friction-ellipse peak cap, and wheel spin momentum.

Longitudinal force is always an input; lateral force comes from a
magic-formula-shaped stand-in curve

    Fy = Fy_max * sin(C * atan(B * (alpha + k_gamma * c_t)))

whose peak is capped by the printed friction ellipse

    Fy_max = sqrt(D0^2 - Fx^2),   D0 = d4 * Fz / (1 + d7 * c_t^2).

The cap is exact; the shape coefficients (B, C, k_gamma) are configurable
stand-ins for an unpublished coefficient set (defaults documented in the
README). A per-params ``smooth_eps`` softens the ellipse sqrt near its
boundary so optimizer iterates stay differentiable; the default 0 is exact.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import ad
from .errors import InfeasibleForceError


@dataclass(frozen=True)
class TireParams:
    d4: float = 1.2
    d7: float = 0.15
    B_alpha: float = 8.0
    C_alpha: float = 1.6
    k_gamma: float = 0.07
    radius: float = 0.3
    I_spin: float = 0.6
    smooth_eps: float = 0.0

    def __post_init__(self):
        if not (self.d4 > 0 and self.d7 >= 0 and self.B_alpha > 0 and self.C_alpha > 0):
            raise ValueError("TireParams: require d4 > 0, d7 >= 0, B_alpha, C_alpha > 0")
        if self.radius <= 0 or self.I_spin < 0:
            raise ValueError("TireParams: require radius > 0 and I_spin >= 0")


@dataclass
class TireForces:
    Fx: object
    Fy: object
    Fz: object


def peak_major_axis(Fz, c_t, params: TireParams):
    """Ellipse major axis D0 = d4 Fz / (1 + d7 c_t^2)."""
    return params.d4 * Fz / (1.0 + params.d7 * c_t * c_t)


def max_lateral_force(Fz, Fx, c_t, params: TireParams, check: bool = True):
    """Peak lateral force under combined loading: sqrt(D0^2 - Fx^2).

    With ``check`` (the default), an Fx beyond the major axis raises
    InfeasibleForceError; the optimizer instead enforces feasibility as a
    path constraint and evaluates with ``check=False`` plus a smoothing eps.
    """
    d0 = peak_major_axis(Fz, c_t, params)
    margin = d0 * d0 - Fx * Fx
    if check:
        mv = ad.value_of(margin)
        if np.any(np.asarray(mv) < -1e-9 * np.maximum(1.0, np.asarray(ad.value_of(d0)) ** 2)):
            raise InfeasibleForceError(
                f"|Fx| = {np.max(np.abs(ad.value_of(Fx))):.1f} N exceeds D0 = "
                f"{np.min(ad.value_of(d0)):.1f} N"
            )
    return ad.sqrt(ad.smooth_relu(margin, params.smooth_eps))


def lateral_force(alpha, c_t, Fz, Fx, params: TireParams, check: bool = True):
    """Lateral force from slip and camber, capped by the friction ellipse.

    Camber enters as an equivalent-slip shift ``k_gamma * c_t`` (camber
    thrust); the curve is odd in the combined argument and bounded by
    ``max_lateral_force`` for any input.
    """
    fy_max = max_lateral_force(Fz, Fx, c_t, params, check=check)
    arg = alpha + params.k_gamma * c_t
    return fy_max * ad.sin(params.C_alpha * ad.atan(params.B_alpha * arg))


def cornering_stiffness(Fz, params: TireParams):
    """Small-angle dFy/dalpha at zero camber and zero Fx."""
    return params.d4 * Fz * params.C_alpha * params.B_alpha


def wheel_spin_momentum(v_t1, params: TireParams):
    """Spin angular momentum magnitude: (v_t1 / radius) * I_spin.

    The wheel spin rate is approximated by the rolling rate of the contact
    point; the momentum is directed along the chassis pitch axis.
    """
    return v_t1 / params.radius * params.I_spin
