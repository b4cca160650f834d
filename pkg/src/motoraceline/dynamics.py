"""Vehicle dynamics: momentum rates, applied forces, and the DAE residual.

The equations of motion are the semi-explicit index-1 DAE

    dz/dt = f(z, u, a),      0 = g(z, u, a),

where ``g`` equates the net force and moment demanded by Newtonian mechanics
(with the chosen reference location on the camber axis) to the force and
moment supplied by gravity, tires, and optional aero drag.

The mechanics side is assembled with :class:`~motoraceline.ad.TimeJet`
arithmetic: every scalar state carries its prescribed time derivatives, the
body basis vectors carry the skew-matrix transport law, and the chain rule
runs mechanically instead of through hand-expanded closed forms. Curvature
time-derivatives are dropped exactly where the in-plane angular acceleration
approximation drops them (the jets are seeded with that approximation).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import ad
from .ad import TimeJet, add3, cross3, frame_dt, jet, scale3, sub3
from .kinematics import (
    BodyVelocity,
    Pose,
    gravity_components,
    induced_angular_acceleration,
    induced_angular_velocity,
    pose_rates,
)
from .motorcycle import (
    MIN_CONTACT_SPEED,
    MotorcycleParams,
    front_tire_angles,
    rear_tire_angles,
    slip_angle,
    tire_contact_velocity,
)
from .tires import lateral_force, wheel_spin_momentum

STATE_FIELDS = ("s", "y", "theta_s", "v1", "v2", "w3", "c", "c_dot", "d", "d_dot")
ALG_FIELDS = ("v1_dot", "v2_dot", "w3_dot", "c_ddot", "Fz_f", "Fz_r")
INPUT_FIELDS = ("gamma", "d_ddot", "Fx_f", "Fx_r")


@dataclass
class State:
    s: object
    y: object
    theta_s: object
    v1: object
    v2: object
    w3: object
    c: object
    c_dot: object
    d: object
    d_dot: object

    def as_array(self):
        return np.array([getattr(self, f) for f in STATE_FIELDS])

    @classmethod
    def from_array(cls, arr):
        return cls(*arr)


@dataclass
class AlgebraicState:
    v1_dot: object = 0.0
    v2_dot: object = 0.0
    w3_dot: object = 0.0
    c_ddot: object = 0.0
    Fz_f: object = 0.0
    Fz_r: object = 0.0

    def as_array(self):
        return np.array([getattr(self, f) for f in ALG_FIELDS])

    @classmethod
    def from_array(cls, arr):
        return cls(*arr)


@dataclass
class Input:
    gamma: object = 0.0
    d_ddot: object = 0.0
    Fx_f: object = 0.0
    Fx_r: object = 0.0

    def as_array(self):
        return np.array([getattr(self, f) for f in INPUT_FIELDS])

    @classmethod
    def from_array(cls, arr):
        return cls(*arr)


def body_pose(state: State, params: MotorcycleParams) -> Pose:
    """Pose of the reference location; its normal offset is the camber-axis height."""
    return Pose(state.s, state.y, state.theta_s, n=params.r)


def com_position(c, d, params: MotorcycleParams):
    """Body components of the COM offset (h-r) e3_m + d e2_m."""
    ch, sh = ad.cos(c), ad.sin(c)
    hr = params.h - params.r
    return (0.0 * (c + d), hr * sh + d * ch, hr * ch - d * sh)


def _omega_jets(state: State, alg: AlgebraicState, sample, params):
    """Angular velocity jets seeded with the induced-rotation identities."""
    pose = body_pose(state, params)
    vel = BodyVelocity(state.v1, state.v2, state.w3)
    w1, w2 = induced_angular_velocity(pose, vel, sample)
    w1_dot, w2_dot = induced_angular_acceleration(pose, (alg.v1_dot, alg.v2_dot), sample)
    return (jet(w1, w1_dot), jet(w2, w2_dot), jet(state.w3, alg.w3_dot))


def _com_velocity_jets(state, alg, inp, omega, params):
    c = jet(state.c, state.c_dot, alg.c_ddot)
    d = jet(state.d, state.d_dot, inp.d_ddot)
    rho = com_position(c, d, params)
    vb = (jet(state.v1, alg.v1_dot), jet(state.v2, alg.v2_dot), 0.0)
    return add3(vb, frame_dt(rho, omega))


def net_force_mechanics(state: State, alg: AlgebraicState, inp: Input, sample, params):
    """Body components of m * d/dt(v_com) demanded by the current motion."""
    omega = _omega_jets(state, alg, sample, params)
    v_com = _com_velocity_jets(state, alg, inp, omega, params)
    acc = frame_dt(v_com, omega)
    return tuple(params.m * _val(a) for a in acc)


def net_moment_mechanics(state: State, alg: AlgebraicState, inp: Input, sample, params):
    """Body components of d/dt(l) about the COM, chassis plus wheel spin."""
    omega = _omega_jets(state, alg, sample, params)
    c = jet(state.c, state.c_dot, alg.c_ddot)
    ch, sh = ad.cos(c), ad.sin(c)

    # chassis angular velocity in its own (motorcycle) frame; positive camber
    # rotates the chassis by -c about e1 under the frame relations above, so
    # the roll rate enters with a minus sign
    wm1 = omega[0] - c.dt()
    wm2 = omega[1] * ch - omega[2] * sh
    wm3 = omega[1] * sh + omega[2] * ch

    p = params
    L1 = p.I11 * wm1 + p.I12 * wm2 + p.I13 * wm3
    L2 = p.I12 * wm1 + p.I22 * wm2 + p.I23 * wm3
    L3 = p.I13 * wm1 + p.I23 * wm2 + p.I33 * wm3

    # spin momentum of both wheels, along the chassis pitch axis e2_m
    v_t1 = jet(state.v1, alg.v1_dot) - omega[1] * p.r
    spin = wheel_spin_momentum(v_t1, p.front_tire) + wheel_spin_momentum(v_t1, p.rear_tire)

    # express e1_m, e2_m, e3_m components in the body basis and assemble
    l = (
        L1,
        (L2 + spin) * ch + L3 * sh,
        -(L2 + spin) * sh + L3 * ch,
    )
    kk = frame_dt(l, omega)
    return tuple(_val(k) for k in kk)


def _val(x):
    return x.value if isinstance(x, TimeJet) else x


def _slip_or_static(v_t1, v_t2, gamma_t):
    """Slip angle, with the static convention alpha = 0 below contact speed."""
    speed = np.hypot(
        np.asarray(ad.value_of(v_t1), dtype=float),
        np.asarray(ad.value_of(v_t2), dtype=float),
    )
    if np.all(speed >= MIN_CONTACT_SPEED):
        return slip_angle(v_t1, v_t2, gamma_t)
    if np.any(speed >= MIN_CONTACT_SPEED):
        raise ValueError("mixed static/moving contact speeds in one batch")
    return 0.0 * (v_t1 + v_t2 + gamma_t)


def tire_force_vectors(state: State, alg: AlgebraicState, inp: Input, sample, params):
    """Body-frame force vectors and COM-relative contact positions per wheel."""
    pose = body_pose(state, params)
    vel = BodyVelocity(state.v1, state.v2, state.w3)
    w1, w2 = induced_angular_velocity(pose, vel, sample)

    c_f, gamma_f = front_tire_angles(state.c, inp.gamma, params.epsilon)
    c_r, gamma_r = rear_tire_angles(state.c)

    rho = com_position(state.c, state.d, params)
    out = []
    for wheel, c_t, g_t, Fz, Fx, tire, arm in (
        ("front", c_f, gamma_f, alg.Fz_f, inp.Fx_f, params.front_tire, params.lf),
        ("rear", c_r, gamma_r, alg.Fz_r, inp.Fx_r, params.rear_tire, -params.lr),
    ):
        v_t1, v_t2 = tire_contact_velocity(vel, w1, w2, params, wheel)
        alpha = _slip_or_static(v_t1, v_t2, g_t)
        Fy = lateral_force(alpha, c_t, Fz, Fx, tire, check=False)
        cg, sg = ad.cos(g_t), ad.sin(g_t)
        force = (Fx * cg - Fy * sg, Fx * sg + Fy * cg, Fz)
        contact = sub3((arm, 0.0, -params.r), rho)
        out.append((force, contact))
    return out


def applied_force_moment(state: State, alg: AlgebraicState, inp: Input, sample, params):
    """Total applied force and moment (about the COM) in body components."""
    pose = body_pose(state, params)
    g1, g2, g3 = gravity_components(pose, sample, (0.0, 0.0, -params.g))
    force = [params.m * g1, params.m * g2, params.m * g3]
    moment = [0.0, 0.0, 0.0]
    for tire_force, contact in tire_force_vectors(state, alg, inp, sample, params):
        force = add3(force, tire_force)
        moment = add3(moment, cross3(contact, tire_force))
    if params.rho_cda > 0.0:
        # quadratic drag along -e1 applied at the COM (forward motion assumed)
        force = add3(force, (-0.5 * params.rho_cda * state.v1 * state.v1, 0.0, 0.0))
    return tuple(force), tuple(moment)


def dae_residual(state: State, inp: Input, alg: AlgebraicState, sample, params):
    """Six-component residual [force balance; moment balance], zero on-model.

    Units are physical (N, N m); callers that need a scale-free measure divide
    by the vehicle weight.
    """
    f_mech = net_force_mechanics(state, alg, inp, sample, params)
    k_mech = net_moment_mechanics(state, alg, inp, sample, params)
    f_app, k_app = applied_force_moment(state, alg, inp, sample, params)
    return np.array(
        [
            f_mech[0] - f_app[0],
            f_mech[1] - f_app[1],
            f_mech[2] - f_app[2],
            k_mech[0] - k_app[0],
            k_mech[1] - k_app[1],
            k_mech[2] - k_app[2],
        ]
    )


def state_derivative(state: State, inp: Input, alg: AlgebraicState, sample, params=None):
    """Ten-component dz/dt; pose rates from kinematics, the rest plumbing."""
    n = params.r if params is not None else 0.0
    pose = Pose(state.s, state.y, state.theta_s, n=n)
    vel = BodyVelocity(state.v1, state.v2, state.w3)
    s_dot, y_dot, th_dot = pose_rates(pose, vel, sample)
    return np.array(
        [
            s_dot,
            y_dot,
            th_dot,
            alg.v1_dot,
            alg.v2_dot,
            alg.w3_dot,
            state.c_dot,
            alg.c_ddot,
            state.d_dot,
            inp.d_ddot,
        ]
    )
