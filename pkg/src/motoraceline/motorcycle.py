"""Motorcycle parameters and camber/rake/steer tire geometry.

The chassis is assumed to roll about a camber axis a fixed height ``r`` above
the road; the steering head is raked by ``epsilon``. Tire camber and steer
angles are measured against the body frame, so the front tire's angles couple
the handlebar steer, the rake, and the body camber.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

from . import ad
from .errors import DomainError, LowSpeedError, TrackFormatError
from .tires import TireParams

MIN_CONTACT_SPEED = 0.1  # m/s, below this the slip angle is meaningless


@dataclass(frozen=True)
class MotorcycleParams:
    """Physical constants of the rider-vehicle system.

    Inertia entries are chassis-frame; off-diagonals default to zero but stay
    configurable. ``fork_offset`` is carried for completeness only; it enters
    no dynamic equation under the camber-axis assumption.
    """

    m: float = 240.0
    I11: float = 18.0
    I22: float = 60.0
    I33: float = 48.0
    I12: float = 0.0
    I13: float = 0.0
    I23: float = 0.0
    lf: float = 0.75
    lr: float = 0.75
    h: float = 0.5
    r: float = 0.1
    epsilon: float = math.radians(30.0)
    g: float = 9.81
    gamma_max: float = 0.7
    d_max: float = 0.05
    dddot_max: float = 0.5
    P_max: float = 50e3
    c_max: float = 1.2  # solver box bound on camber, not a Table value
    fork_offset: float = 0.0
    rho_cda: float = 0.0  # lumped 0.5*rho*Cd*A is (rho_cda/2); 0 disables drag
    front_tire: TireParams = field(default_factory=lambda: TireParams(I_spin=0.6))
    rear_tire: TireParams = field(default_factory=lambda: TireParams(I_spin=0.8))

    def __post_init__(self):
        checks = [
            ("m", self.m > 0),
            ("h", self.h > self.r > 0),
            ("lf", self.lf > 0),
            ("lr", self.lr > 0),
            ("P_max", self.P_max > 0),
            ("inertia", _inertia_pd(self)),
        ]
        for name, ok in checks:
            if not ok:
                raise ValueError(f"MotorcycleParams.{name}: invalid value")

    @property
    def weight(self) -> float:
        return self.m * self.g


def _inertia_pd(p) -> bool:
    import numpy as np

    mat = np.array(
        [
            [p.I11, p.I12, p.I13],
            [p.I12, p.I22, p.I23],
            [p.I13, p.I23, p.I33],
        ]
    )
    return bool(np.all(np.linalg.eigvalsh(mat) > 0))


@dataclass
class TireState:
    """Geometry state of one tire: camber, steer, slip, contact velocity."""

    camber: object
    steer: object
    slip: object
    v1: object
    v2: object


def front_tire_angles(c, gamma, eps):
    """Front tire camber and steer from body camber, handlebar steer, and rake.

    The wheel-plane normal after the steer-then-camber rotation gives
    ``c_f = asin(sin c cos g + cos c sin eps sin g)`` and the atan2 form of
    the steer expression (correct quadrants at large angles).
    """
    arg = ad.sin(c) * ad.cos(gamma) + ad.cos(c) * ad.sin(eps) * ad.sin(gamma)
    argv = ad.value_of(arg)
    import numpy as np

    if np.any(np.abs(argv) > 1.0 + 1e-12):
        raise DomainError(f"front camber asin argument {argv} outside [-1, 1]")
    c_f = ad.asin(arg)
    gamma_f = ad.atan2(
        ad.cos(eps) * ad.sin(gamma),
        ad.cos(c) * ad.cos(gamma) - ad.sin(c) * ad.sin(eps) * ad.sin(gamma),
    )
    return c_f, gamma_f


def rear_tire_angles(c):
    """The rear tire is unsteered: it cambers exactly with the body."""
    return c, 0.0 * c


def tire_contact_velocity(vel, w1, w2, params: MotorcycleParams, wheel: str):
    """Contact-point velocity by rigid transfer from the reference location.

    The contact sits at ``(+lf or -lr, 0, -r)`` in body coordinates, so
    ``v_t = v_b + omega x offset`` gives the in-plane pair below.
    """
    if wheel == "front":
        arm = params.lf
    elif wheel == "rear":
        arm = -params.lr
    else:
        raise ValueError(f"wheel must be 'front' or 'rear', got {wheel!r}")
    v_t1 = vel.v1 - w2 * params.r
    v_t2 = vel.v2 + arm * vel.w3 + w1 * params.r
    return v_t1, v_t2


def slip_angle(v_t1, v_t2, gamma_t):
    """Angle between the tire symmetry plane and its contact velocity."""
    import numpy as np

    speed = np.hypot(ad.value_of(v_t1), ad.value_of(v_t2))
    if np.any(speed < MIN_CONTACT_SPEED):
        raise LowSpeedError(
            f"contact speed {np.min(speed):.3f} m/s below {MIN_CONTACT_SPEED}; "
            "slip angle undefined"
        )
    cg, sg = ad.cos(gamma_t), ad.sin(gamma_t)
    return ad.atan2(v_t2 * cg - v_t1 * sg, v_t1 * cg + v_t2 * sg)


# ---------------------------------------------------------------------------
# parameter file I/O
# ---------------------------------------------------------------------------

_TIRE_KEYS = {"d4", "d7", "B_alpha", "C_alpha", "k_gamma", "radius", "I_spin"}


def params_from_dict(raw: dict) -> MotorcycleParams:
    """Build MotorcycleParams from the JSON layout; field-path errors."""
    if not isinstance(raw, dict):
        raise TrackFormatError("params: expected a JSON object")

    def num(key, default=None, path="params"):
        if key not in raw:
            if default is None:
                raise TrackFormatError(f"{path}.{key}: missing")
            return default
        v = raw[key]
        if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v):
            raise TrackFormatError(f"{path}.{key}: expected finite number, got {v!r}")
        return float(v)

    defaults = MotorcycleParams()

    def tire(section, fallback: TireParams) -> TireParams:
        sub = raw.get(section)
        if sub is None:
            return fallback
        if not isinstance(sub, dict):
            raise TrackFormatError(f"params.{section}: expected object")
        bad = set(sub) - _TIRE_KEYS
        if bad:
            raise TrackFormatError(f"params.{section}.{sorted(bad)[0]}: unknown key")
        kwargs = {}
        for key in _TIRE_KEYS & set(sub):
            v = sub[key]
            if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v):
                raise TrackFormatError(f"params.{section}.{key}: expected finite number")
            kwargs[key] = float(v)
        return replace(fallback, **kwargs)

    try:
        return MotorcycleParams(
            m=num("m", defaults.m),
            I11=num("I11", defaults.I11),
            I22=num("I22", defaults.I22),
            I33=num("I33", defaults.I33),
            I12=num("I12", defaults.I12),
            I13=num("I13", defaults.I13),
            I23=num("I23", defaults.I23),
            lf=num("lf", defaults.lf),
            lr=num("lr", defaults.lr),
            h=num("h", defaults.h),
            r=num("r", defaults.r),
            epsilon=math.radians(num("epsilon_deg", math.degrees(defaults.epsilon))),
            g=num("g", defaults.g),
            gamma_max=num("gamma_max", defaults.gamma_max),
            d_max=num("d_max", defaults.d_max),
            dddot_max=num("dddot_max", defaults.dddot_max),
            P_max=num("P_max", defaults.P_max),
            c_max=num("c_max", defaults.c_max),
            fork_offset=num("fork_offset", defaults.fork_offset),
            rho_cda=num("rho_cda", defaults.rho_cda),
            front_tire=tire("front_tire", defaults.front_tire),
            rear_tire=tire("rear_tire", defaults.rear_tire),
        )
    except ValueError as exc:
        raise TrackFormatError(f"params: {exc}") from exc


def load_params(path) -> MotorcycleParams:
    with open(path) as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise TrackFormatError(f"{path}: invalid JSON ({exc})") from exc
    return params_from_dict(raw)
