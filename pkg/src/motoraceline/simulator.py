"""Forward integration of the semi-explicit DAE.

Serves as the independent verification oracle for the dynamics residual and
as the replay validator for raceline solutions: at every accepted step the
algebraic state satisfies ``g = 0`` to ``newton_tol`` (measured scale-free,
i.e. force rows divided by the vehicle weight and moment rows by weight times
COM height).

The default scheme is implicit midpoint with a combined Newton solve over
``(z_next, a_mid)``; an explicit RK4 with per-stage algebraic solves is
available for cross-checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import ad
from .dynamics import AlgebraicState, Input, State, dae_residual, state_derivative
from .errors import LowSpeedError, NewtonConvergenceError
from .geometry import SurfaceDefinition, wrap_s
from .kinematics import BodyVelocity, Pose, pose_rates
from .motorcycle import MotorcycleParams

MIN_SIM_SPEED = 0.5  # m/s; below this the model has no balance physics


@dataclass
class SimConfig:
    step_size: float = 1e-3
    newton_tol: float = 1e-10
    max_newton_iters: int = 50
    scheme: str = "implicit_midpoint"  # or "rk4"

    def __post_init__(self):
        if self.step_size <= 0 or self.newton_tol <= 0:
            raise ValueError("SimConfig: step_size and newton_tol must be positive")
        if self.scheme not in ("implicit_midpoint", "rk4"):
            raise ValueError(f"SimConfig.scheme: unknown scheme {self.scheme!r}")


@dataclass
class Trajectory:
    """Simulation output: aligned arrays of time, state, algebraic state."""

    times: np.ndarray
    states: np.ndarray  # (n, 10)
    algs: np.ndarray  # (n, 6)
    residuals: np.ndarray  # (n,) scale-free residual inf-norms

    def state(self, k) -> State:
        return State.from_array(self.states[k])

    def alg(self, k) -> AlgebraicState:
        return AlgebraicState.from_array(self.algs[k])

    def __len__(self):
        return len(self.times)


def _residual_scale(params: MotorcycleParams) -> np.ndarray:
    w = params.weight
    return np.array([w, w, w, w * params.h, w * params.h, w * params.h])


def static_normal_forces(params: MotorcycleParams) -> np.ndarray:
    """Upright static (Fz_f, Fz_r) from the wheelbase lever balance."""
    w = params.weight
    total = params.lf + params.lr
    return np.array([w * params.lr / total, w * params.lf / total])


def residual_norm(g, params: MotorcycleParams) -> float:
    """Scale-free inf-norm of a dae_residual vector."""
    return float(np.max(np.abs(np.asarray(g, dtype=float) / _residual_scale(params))))


def solve_algebraic(
    state: State,
    inp: Input,
    sample,
    params: MotorcycleParams,
    guess: AlgebraicState | None = None,
    tol: float = 1e-10,
    max_iters: int = 50,
) -> AlgebraicState:
    """Newton-solve g(z, u, a) = 0 for the algebraic state.

    The Jacobian dg/da comes from forward AD through the full residual;
    convergence is measured on the scale-free residual.
    """
    if guess is None:
        a = np.concatenate([np.zeros(4), static_normal_forces(params)])
    else:
        a = guess.as_array().astype(float)
    scale = _residual_scale(params)
    best = math.inf
    for _ in range(max_iters):
        seeds = ad.seed_duals(list(a))
        alg = AlgebraicState.from_array(seeds)
        res = dae_residual(state, inp, alg, sample, params)
        r = np.array([ad.value_of(ri) for ri in res], dtype=float)
        norm = float(np.max(np.abs(r / scale)))
        if norm <= tol:
            return AlgebraicState.from_array(a)
        jac = np.array([ri.dot for ri in res], dtype=float)
        try:
            step = np.linalg.solve(jac, r)
        except np.linalg.LinAlgError as exc:
            raise NewtonConvergenceError(
                f"singular algebraic Jacobian (residual {norm:.3e})", residual=norm
            ) from exc
        a = a - step
        if not np.all(np.isfinite(a)) or norm > 1e6 * max(best, 1.0):
            raise NewtonConvergenceError(
                f"algebraic Newton diverged (residual {norm:.3e})", residual=norm
            )
        best = min(best, norm)
    raise NewtonConvergenceError(
        f"algebraic Newton did not reach tol={tol:.1e} in {max_iters} iterations "
        f"(last residual {norm:.3e})",
        residual=norm,
    )


class Simulator:
    """Time-marching integrator bound to one surface and parameter set."""

    def __init__(self, surface: SurfaceDefinition, params: MotorcycleParams,
                 config: SimConfig | None = None):
        self.surface = surface
        self.params = params
        self.config = config or SimConfig()
        self._scale = _residual_scale(params)
        self._state_scale = np.array(
            [10.0, 1.0, 1.0, 10.0, 10.0, 1.0, 1.0, 1.0, 0.05, 0.5]
        )

    def sample_at(self, state_arr):
        s = wrap_s(self.surface, float(state_arr[0]))
        return self.surface.evaluator(s, float(state_arr[1]))

    def solve_algebraic(self, state: State, inp: Input,
                        guess: AlgebraicState | None = None) -> AlgebraicState:
        sample = self.sample_at(state.as_array())
        return solve_algebraic(
            state, inp, sample, self.params, guess,
            tol=self.config.newton_tol, max_iters=self.config.max_newton_iters,
        )

    def _check_speed(self, state_arr):
        if abs(float(state_arr[3])) < MIN_SIM_SPEED:
            raise LowSpeedError(
                f"|v1| = {abs(float(state_arr[3])):.2f} m/s below {MIN_SIM_SPEED}; "
                "the model has no stationary-balance physics"
            )

    def step(self, state: State, inp_fn, t: float, a_guess: AlgebraicState | None = None):
        """One step of the configured scheme; returns (state, alg_at_stage)."""
        z = state.as_array().astype(float)
        self._check_speed(z)
        if self.config.scheme == "rk4":
            return self._step_rk4(z, inp_fn, t, a_guess)
        return self._step_midpoint(z, inp_fn, t, a_guess)

    # -- implicit midpoint with a combined (z_next, a_mid) Newton solve ----
    def _step_midpoint(self, z, inp_fn, t, a_guess):
        h = self.config.step_size
        u_mid = inp_fn(t + 0.5 * h)

        # explicit predictor for the step endpoint
        alg0 = solve_algebraic(
            State.from_array(z), u_mid, self.sample_at(z), self.params, a_guess,
            tol=max(self.config.newton_tol, 1e-9), max_iters=self.config.max_newton_iters,
        )
        f0 = state_derivative(
            State.from_array(z), u_mid, alg0, self.sample_at(z), self.params
        ).astype(float)
        q = np.concatenate([z + h * f0, alg0.as_array().astype(float)])

        tol = self.config.newton_tol
        for _ in range(self.config.max_newton_iters):
            seeds = ad.seed_duals(list(q))
            z_next = seeds[:10]
            a_mid = AlgebraicState.from_array(seeds[10:])
            z_mid = [0.5 * (zi + zn) for zi, zn in zip(z, z_next)]
            state_mid = State.from_array(z_mid)
            sample_mid = self.surface.evaluator(
                wrap_s(self.surface, float(ad.value_of(z_mid[0]))), z_mid[1]
            )
            f = state_derivative(state_mid, u_mid, a_mid, sample_mid, self.params)
            g = dae_residual(state_mid, u_mid, a_mid, sample_mid, self.params)
            res = [zn - zi - h * fi for zn, zi, fi in zip(z_next, z, f)] + list(g)
            r = np.array([ad.value_of(ri) for ri in res], dtype=float)
            norm = float(
                max(
                    np.max(np.abs(r[:10] / self._state_scale)) / max(h, 1e-6),
                    np.max(np.abs(r[10:] / self._scale)),
                )
            )
            if norm <= tol:
                break
            jac = np.array([ri.dot for ri in res], dtype=float)
            try:
                dq = np.linalg.solve(jac, r)
            except np.linalg.LinAlgError as exc:
                raise NewtonConvergenceError(
                    f"singular midpoint Jacobian at t={t:.4f}", residual=norm
                ) from exc
            q = q - dq
            if not np.all(np.isfinite(q)):
                raise NewtonConvergenceError(
                    f"midpoint Newton diverged at t={t:.4f}", residual=norm
                )
        else:
            raise NewtonConvergenceError(
                f"midpoint Newton did not converge at t={t:.4f} (residual {norm:.3e})",
                residual=norm,
            )
        return State.from_array(q[:10]), AlgebraicState.from_array(q[10:])

    # -- explicit RK4 with per-stage algebraic solves ----------------------
    def _step_rk4(self, z, inp_fn, t, a_guess):
        h = self.config.step_size
        a = a_guess

        def rate(zs, ts):
            nonlocal a
            state = State.from_array(zs)
            sample = self.sample_at(zs)
            u = inp_fn(ts)
            a = solve_algebraic(
                state, u, sample, self.params, a,
                tol=self.config.newton_tol, max_iters=self.config.max_newton_iters,
            )
            return state_derivative(state, u, a, sample, self.params).astype(float), a

        k1, a1 = rate(z, t)
        k2, _ = rate(z + 0.5 * h * k1, t + 0.5 * h)
        k3, _ = rate(z + 0.5 * h * k2, t + 0.5 * h)
        k4, a4 = rate(z + h * k3, t + h)
        z_next = z + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        return State.from_array(z_next), a4

    def simulate(self, initial: State, input_schedule, duration: float) -> Trajectory:
        """March from ``initial`` for ``duration`` seconds.

        ``input_schedule`` maps time to an :class:`Input`. Residuals are
        logged per step; the trajectory is replayable from the arrays.
        """
        n = int(round(duration / self.config.step_size))
        times = np.empty(n + 1)
        states = np.empty((n + 1, 10))
        algs = np.empty((n + 1, 6))
        residuals = np.empty(n + 1)

        state = initial
        alg = self.solve_algebraic(initial, input_schedule(0.0))
        times[0] = 0.0
        states[0] = [float(v) for v in initial.as_array()]
        algs[0] = alg.as_array().astype(float)
        residuals[0] = self._logged_residual(state, input_schedule(0.0), alg)

        t = 0.0
        for k in range(1, n + 1):
            state, alg = self.step(state, input_schedule, t, a_guess=alg)
            t += self.config.step_size
            times[k] = t
            states[k] = state.as_array().astype(float)
            algs[k] = alg.as_array().astype(float)
            residuals[k] = self._logged_residual(state, input_schedule(t), alg)
        return Trajectory(times, states, algs, residuals)

    def _logged_residual(self, state, inp, alg):
        sample = self.sample_at(state.as_array())
        g = dae_residual(state, inp, alg, sample, self.params)
        return residual_norm(g, self.params)


# ---------------------------------------------------------------------------
# steady circular trim (verification oracle)
# ---------------------------------------------------------------------------


def find_circular_trim(
    surface: SurfaceDefinition,
    v1: float,
    y: float,
    params: MotorcycleParams,
    tol: float = 1e-10,
    max_iters: int = 60,
):
    """Steady-state cornering on a ring-like surface at fixed (v1, y).

    Solves for (theta_s, v2, c, gamma, Fx_r, Fz_f, Fz_r) such that the DAE
    residual vanishes with zero accelerations and the path stays on the ring
    (y_dot = 0, theta_s_dot = 0; w3 follows from the heading-rate identity).
    Returns (State, AlgebraicState, Input).
    """
    s0 = 0.0
    sample = surface.evaluator(s0, y)

    def assemble(q):
        theta_s, v2, c, gamma, fx_r, fz_f, fz_r = q
        pose = Pose(s0, y, theta_s, n=params.r)
        vel0 = BodyVelocity(v1, v2, 0.0)
        s_dot, y_dot, th_dot0 = pose_rates(pose, vel0, sample)
        w3 = -(th_dot0 - 0.0)  # cancel the curvature correction: theta_s_dot = 0
        state = State(s0, y, theta_s, v1, v2, w3, c, 0.0, 0.0, 0.0)
        alg = AlgebraicState(0.0, 0.0, 0.0, 0.0, fz_f, fz_r)
        inp = Input(gamma, 0.0, 0.0, fx_r)
        g = dae_residual(state, inp, alg, sample, params)
        return state, alg, inp, list(g) + [y_dot]

    # initial guess: point-mass lean for the local ring radius
    radius = abs(float(np.asarray(sample.position[0])) ** 2 + float(np.asarray(sample.position[1])) ** 2) ** 0.5
    c0 = math.atan2(v1 * v1, params.g * radius)
    w = params.weight
    q = np.array([0.0, 0.0, c0, 0.0, 0.0, 0.5 * w, 0.5 * w])
    scale = np.concatenate([_residual_scale(params), [10.0]])
    for _ in range(max_iters):
        seeds = ad.seed_duals(list(q))
        _, _, _, res = assemble(seeds)
        r = np.array([ad.value_of(ri) for ri in res], dtype=float)
        if float(np.max(np.abs(r / scale))) <= tol:
            state, alg, inp, _ = assemble(q)
            return state, alg, inp
        jac = np.array([ri.dot for ri in res], dtype=float)
        q = q - np.linalg.solve(jac, r)
    raise NewtonConvergenceError(
        f"trim search did not converge (residual {float(np.max(np.abs(r / scale))):.3e})",
        residual=float(np.max(np.abs(r / scale))),
    )
