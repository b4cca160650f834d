"""Minimum-time raceline transcription and solve driver.

The periodic minimum-time problem is transcribed by direct collocation on
right-endpoint Radau points over K uniform intervals of the ``s`` coordinate.
``s`` is the independent variable: the nine remaining differential states are
propagated via ``dz/ds = f / s_dot`` with a hard lower bound on ``s_dot``,
and lap time is the collocation quadrature of ``1 / s_dot``.

Decision variables per interval: the nine interval-start states plus, at each
collocation node, nine states, six algebraic states, and four inputs. Normal
and longitudinal tire forces are carried normalized by the vehicle weight.
Path constraints: nonnegative normal forces, |Fx| bounded by the normal force
(linear in the normalized variables), the friction-ellipse domain, the
rear-wheel power cap ``Fx_r * v1 <= P_max``, and ``s_dot >= s_dot_min``,
alongside the parameter box bounds.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp

from . import ad, nlp
from .collocation import (
    collocation_nodes,
    differentiation_matrix,
    partial_time_matrix,
)
from .dynamics import AlgebraicState, Input, State, dae_residual, state_derivative
from .errors import TranscriptionError
from .geometry import SurfaceDefinition
from .motorcycle import MotorcycleParams
from .simulator import _residual_scale, residual_norm, static_normal_forces
from .tires import peak_major_axis

N_STATE = 9  # y, theta_s, v1, v2, w3, c, c_dot, d, d_dot (s is independent)
N_ALG = 6
N_INPUT = 4
N_NODE = N_STATE + N_ALG + N_INPUT

# per-node nonlinear constraint rows: 9 collocation + 6 dae + s_dot,
# ellipse front/rear, power
N_NL = N_STATE + N_ALG + 4
N_LIN_NODE = 4  # Fz_t +- Fx_t >= 0, linear in the normalized variables


@dataclass
class CollocationConfig:
    num_intervals: int = 24
    degree: int = 3
    nlp_tol: float = 1e-6
    max_iter: int = 3000
    s_dot_min: float = 1.0
    method: str = "trust-constr"
    ellipse_margin: float = 1e-3  # normalized-force margin kept inside D0
    smooth_eps: float = 1e-4  # ellipse sqrt smoothing for iterates (normalized)

    def __post_init__(self):
        if self.num_intervals < 8:
            raise ValueError("CollocationConfig: need at least 8 intervals")
        if self.degree not in (2, 3, 4, 5):
            raise ValueError("CollocationConfig: degree must be in 2..5")
        if self.s_dot_min <= 0:
            raise ValueError("CollocationConfig: s_dot_min must be positive")


@dataclass
class RacelineProblem:
    surface: SurfaceDefinition
    params: MotorcycleParams

    def __post_init__(self):
        if not self.surface.periodic:
            raise TranscriptionError("raceline problems need a periodic surface")
        if self.params.P_max <= 0:
            raise ValueError("P_max must be positive")

    @property
    def force_scale(self) -> float:
        return self.params.weight


@dataclass
class RacelineSolution:
    lap_time: float
    s_nodes: np.ndarray  # (N,)
    states: np.ndarray  # (N, 10) including s
    algs: np.ndarray  # (N, 6) physical forces
    inputs: np.ndarray  # (N, 4) physical forces
    times: np.ndarray  # (N,) elapsed time at each node
    stats: dict
    config: dict

    def to_dict(self) -> dict:
        # wall time varies run to run; keep solution files bit-deterministic
        stats = {k: v for k, v in self.stats.items() if k != "wall_time"}
        return {
            "lap_time": self.lap_time,
            "config": self.config,
            "stats": stats,
            "s": self.s_nodes.tolist(),
            "states": self.states.tolist(),
            "algebraic": self.algs.tolist(),
            "inputs": self.inputs.tolist(),
            "times": self.times.tolist(),
        }

    def save_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1, sort_keys=True)
            fh.write("\n")

    @classmethod
    def from_dict(cls, raw) -> "RacelineSolution":
        return cls(
            lap_time=float(raw["lap_time"]),
            s_nodes=np.asarray(raw["s"], dtype=float),
            states=np.asarray(raw["states"], dtype=float),
            algs=np.asarray(raw["algebraic"], dtype=float),
            inputs=np.asarray(raw["inputs"], dtype=float),
            times=np.asarray(raw["times"], dtype=float),
            stats=dict(raw["stats"]),
            config=dict(raw["config"]),
        )

    @classmethod
    def load_json(cls, path) -> "RacelineSolution":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    CSV_COLUMNS = (
        "s,y,theta_s,v1,v2,w3,c,c_dot,d,d_dot,gamma,Fx_f,Fx_r,Fz_f,Fz_r,time"
    )

    def save_csv(self, path):
        cols = np.column_stack(
            [
                self.states,  # s, y, theta_s, v1, v2, w3, c, c_dot, d, d_dot
                self.inputs[:, 0],  # gamma
                self.inputs[:, 2],  # Fx_f
                self.inputs[:, 3],  # Fx_r
                self.algs[:, 4],  # Fz_f
                self.algs[:, 5],  # Fz_r
                self.times,
            ]
        )
        header = self.CSV_COLUMNS
        np.savetxt(path, cols, delimiter=",", header=header, comments="", fmt="%.12g")


class Transcription:
    """Layout, constant matrices, and batched evaluators of the NLP."""

    def __init__(self, problem: RacelineProblem, config: CollocationConfig):
        self.problem = problem
        self.config = config
        self.params = replace(
            problem.params,
            front_tire=replace(
                problem.params.front_tire,
                smooth_eps=config.smooth_eps * problem.force_scale**2,
            ),
            rear_tire=replace(
                problem.params.rear_tire,
                smooth_eps=config.smooth_eps * problem.force_scale**2,
            ),
        )
        K, p = config.num_intervals, config.degree
        self.K, self.p = K, p
        self.n_nodes = K * p
        self.h = problem.surface.s_length / K
        self.nodes, self.weights = collocation_nodes(p)
        self.dmat = differentiation_matrix(p)
        self.tmat = partial_time_matrix(p)

        # decision vector layout
        self.n = K * (N_STATE + p * N_NODE) + N_STATE
        self.x0_off = np.array(
            [k * (N_STATE + p * N_NODE) for k in range(K)]
        )
        self.node_off = np.array(
            [
                [k * (N_STATE + p * N_NODE) + N_STATE + j * N_NODE for j in range(p)]
                for k in range(K)
            ]
        )
        self.end_off = self.n - N_STATE

        # collocation s grid
        self.s_nodes = np.concatenate(
            [k * self.h + self.nodes * self.h for k in range(K)]
        )
        # sanity: the surface must be regular along the initial grid
        for k in range(K):
            for j in range(p):
                s = float(self.s_nodes[k * p + j])
                try:
                    problem.surface.evaluator(s, 0.0)
                except Exception as exc:
                    raise TranscriptionError(
                        f"surface evaluation failed at (s={s:.2f}, y=0): {exc}"
                    ) from exc

        self.g_scale = 1.0 / _residual_scale(problem.params)
        self._build_rows()
        self._build_linear()
        self._build_bounds()
        self._cache = {}

    # ---------------------------------------------------------------- rows
    def _build_rows(self):
        K, p = self.K, self.p
        self.m_nl = self.n_nodes * N_NL
        self.m_cont = K * N_STATE
        self.m_per = N_STATE
        self.m_lin = self.n_nodes * N_LIN_NODE
        self.m = self.m_nl + self.m_cont + self.m_per + self.m_lin
        self.rows_cont = self.m_nl
        self.rows_per = self.rows_cont + self.m_cont
        self.rows_lin = self.rows_per + self.m_per

        # scatter pattern of per-node dense (N_NL x N_NODE) Jacobian blocks
        rows = np.empty(self.n_nodes * N_NL * N_NODE, dtype=np.int64)
        cols = np.empty_like(rows)
        idx = 0
        for node in range(self.n_nodes):
            k, j = divmod(node, p)
            base_row = node * N_NL
            base_col = self.node_off[k, j]
            for r in range(N_NL):
                for c in range(N_NODE):
                    rows[idx] = base_row + r
                    cols[idx] = base_col + c
                    idx += 1
        self._nl_rows, self._nl_cols = rows, cols

    def _build_linear(self):
        """Constant part of the constraint map (collocation sums, continuity,
        periodicity, linear friction rows)."""
        K, p = self.K, self.p
        rows, cols, data = [], [], []

        # collocation: sum_r D[r, j] Z_r (state blocks; Z_0 is the interval start)
        for k in range(K):
            for j in range(p):
                row0 = (k * p + j) * N_NL
                for i in range(N_STATE):
                    rows.append(row0 + i)
                    cols.append(self.x0_off[k] + i)
                    data.append(self.dmat[0, j])
                    for r in range(1, p + 1):
                        rows.append(row0 + i)
                        cols.append(self.node_off[k, r - 1] + i)
                        data.append(self.dmat[r, j])

        # continuity: X0_{k+1} - Z_p^k = 0 (X_end closes the last interval)
        for k in range(K):
            nxt = self.x0_off[k + 1] if k + 1 < K else self.end_off
            for i in range(N_STATE):
                rows.append(self.rows_cont + k * N_STATE + i)
                cols.append(nxt + i)
                data.append(1.0)
                rows.append(self.rows_cont + k * N_STATE + i)
                cols.append(self.node_off[k, p - 1] + i)
                data.append(-1.0)

        # periodicity: X_end - X0_0 = 0
        for i in range(N_STATE):
            rows.append(self.rows_per + i)
            cols.append(self.end_off + i)
            data.append(1.0)
            rows.append(self.rows_per + i)
            cols.append(self.x0_off[0] + i)
            data.append(-1.0)

        # linear friction rows: Fz_t -+ Fx_t >= 0 on the normalized variables
        for node in range(self.n_nodes):
            k, j = divmod(node, p)
            base = self.node_off[k, j]
            fz_f = base + N_STATE + 4
            fz_r = base + N_STATE + 5
            fx_f = base + N_STATE + N_ALG + 2
            fx_r = base + N_STATE + N_ALG + 3
            for q, (fz, fx, sign) in enumerate(
                [(fz_f, fx_f, -1.0), (fz_f, fx_f, 1.0), (fz_r, fx_r, -1.0), (fz_r, fx_r, 1.0)]
            ):
                row = self.rows_lin + node * N_LIN_NODE + q
                rows.append(row)
                cols.append(fz)
                data.append(1.0)
                rows.append(row)
                cols.append(fx)
                data.append(sign)

        self.a_lin = sp.coo_matrix(
            (data, (rows, cols)), shape=(self.m, self.n)
        ).tocsr()

        # constraint bounds
        c_lb = np.zeros(self.m)
        c_ub = np.zeros(self.m)
        for node in range(self.n_nodes):
            row0 = node * N_NL + N_STATE + N_ALG
            c_ub[row0 : row0 + 4] = np.inf  # s_dot, ellipse x2, power margins
        c_ub[self.rows_lin :] = np.inf
        self.c_lb, self.c_ub = c_lb, c_ub

    def _build_bounds(self):
        par = self.problem.params
        lo = np.full(self.n, -np.inf)
        hi = np.full(self.n, np.inf)
        ylo, yhi = [], []
        K, p = self.K, self.p
        for k in range(K):
            for j in range(p):
                b = self.problem.surface.y_bounds(float(self.s_nodes[k * p + j]))
                ylo.append(float(np.min(b[0])))
                yhi.append(float(np.max(b[1])))
        ylo = np.asarray(ylo)
        yhi = np.asarray(yhi)

        def state_bounds(idx, y_lo, y_hi):
            lo[idx + 0], hi[idx + 0] = y_lo, y_hi
            lo[idx + 1], hi[idx + 1] = -1.5, 1.5  # theta_s
            lo[idx + 2], hi[idx + 2] = self.config.s_dot_min * 0.5, 120.0  # v1
            lo[idx + 3], hi[idx + 3] = -15.0, 15.0  # v2
            lo[idx + 4], hi[idx + 4] = -4.0, 4.0  # w3
            lo[idx + 5], hi[idx + 5] = -par.c_max, par.c_max  # c
            lo[idx + 6], hi[idx + 6] = -8.0, 8.0  # c_dot
            lo[idx + 7], hi[idx + 7] = -par.d_max, par.d_max  # d
            lo[idx + 8], hi[idx + 8] = -2.0, 2.0  # d_dot

        for k in range(K):
            jstart = k * p
            state_bounds(self.x0_off[k], ylo[jstart], yhi[jstart])
            for j in range(p):
                idx = self.node_off[k, j]
                state_bounds(idx, ylo[jstart + j], yhi[jstart + j])
                a = idx + N_STATE
                lo[a + 0], hi[a + 0] = -80.0, 80.0  # v1_dot
                lo[a + 1], hi[a + 1] = -80.0, 80.0  # v2_dot
                lo[a + 2], hi[a + 2] = -30.0, 30.0  # w3_dot
                lo[a + 3], hi[a + 3] = -60.0, 60.0  # c_ddot
                lo[a + 4], hi[a + 4] = 0.0, 6.0  # Fz_f / weight
                lo[a + 5], hi[a + 5] = 0.0, 6.0  # Fz_r / weight
                u = a + N_ALG
                lo[u + 0], hi[u + 0] = -par.gamma_max, par.gamma_max
                lo[u + 1], hi[u + 1] = -par.dddot_max, par.dddot_max
                lo[u + 2], hi[u + 2] = -3.0, 3.0  # Fx_f / weight
                lo[u + 3], hi[u + 3] = -3.0, 3.0  # Fx_r / weight
        state_bounds(self.end_off, ylo[-1], yhi[-1])
        self.x_lb, self.x_ub = lo, hi

    # ---------------------------------------------------------- evaluation
    def gather(self, x):
        """Node variables as (channel, N) arrays in physical units."""
        K, p = self.K, self.p
        idx = self.node_off.reshape(-1)
        states = np.stack([x[idx + i] for i in range(N_STATE)])
        algs = np.stack([x[idx + N_STATE + i] for i in range(N_ALG)])
        inputs = np.stack([x[idx + N_STATE + N_ALG + i] for i in range(N_INPUT)])
        return states, algs, inputs

    def _node_outputs(self, x, order):
        """Batched nonlinear node outputs and derivatives.

        Returns (values (N_NL, N), jac (N_NL, 19, N) or None,
        hess (N_NL, 19, 19, N) or None, sdot dual-like).
        """
        states, algs, inputs = self.gather(x)
        vals = np.concatenate([states, algs, inputs], axis=0)
        if order == 0:
            chans = list(vals)
        else:
            chans = ad.seed_duals(list(vals), second_order=(order == 2))
        fs = self.problem.force_scale
        state = State(
            self.s_nodes, chans[0], chans[1], chans[2], chans[3], chans[4],
            chans[5], chans[6], chans[7], chans[8],
        )
        alg = AlgebraicState(
            chans[9], chans[10], chans[11], chans[12],
            chans[13] * fs, chans[14] * fs,
        )
        inp = Input(chans[15], chans[16], chans[17] * fs, chans[18] * fs)
        sample = self.problem.surface.evaluator(self.s_nodes, state.y)
        par = self.params

        f = state_derivative(state, inp, alg, sample, par)
        g = dae_residual(state, inp, alg, sample, par)
        s_dot = f[0]
        inv_sdot = 1.0 / s_dot

        outs = []
        for i in range(1, 10):  # collocation nonlinearity: -h * f_i / s_dot
            outs.append(-self.h * (f[i] * inv_sdot))
        for i in range(6):
            outs.append(g[i] * self.g_scale[i])
        outs.append(s_dot - self.config.s_dot_min)

        # friction-ellipse margins in normalized force units
        from .motorcycle import front_tire_angles, rear_tire_angles

        c_f, _ = front_tire_angles(state.c, inp.gamma, par.epsilon)
        c_r, _ = rear_tire_angles(state.c)
        margin = self.config.ellipse_margin
        for c_t, fz_hat, fx_hat, tire in (
            (c_f, chans[13], chans[17], par.front_tire),
            (c_r, chans[14], chans[18], par.rear_tire),
        ):
            d0_hat = peak_major_axis(fz_hat, c_t, tire)
            outs.append(d0_hat * d0_hat - fx_hat * fx_hat - margin * margin)

        # power cap, normalized: P_max/weight - Fx_r_hat * v1
        p_hat = self.problem.params.P_max / fs
        outs.append(p_hat - chans[18] * state.v1)

        values = np.stack([np.asarray(ad.value_of(o), dtype=float) for o in outs])
        jac = hess = None
        if order >= 1:
            jac = np.stack(
                [
                    o.dot if isinstance(o, ad.Dual) else np.zeros((19, self.n_nodes))
                    for o in outs
                ]
            )
        if order == 2:
            hess = np.stack(
                [
                    o.hes if isinstance(o, ad.Dual2) else np.zeros((19, 19, self.n_nodes))
                    for o in outs
                ]
            )
        return values, jac, hess, outs[N_STATE + N_ALG]

    def _evaluate(self, x, order):
        """Cache the batched node evaluation; higher orders serve lower ones."""
        key = x.tobytes()
        cached = self._cache.get(key)
        if cached is not None and cached[0] >= order:
            return cached[1]
        payload = self._node_outputs(x, order)
        self._cache = {key: (order, payload)}
        return payload

    # objective: lap time = sum_k h * sum_j b_j / s_dot
    def objective(self, x):
        values, _, _, _ = self._evaluate(np.asarray(x, dtype=float), 0)
        s_dot = values[N_STATE + N_ALG] + self.config.s_dot_min
        w = np.tile(self.weights, self.K)
        return float(np.sum(self.h * w / s_dot))

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        _, jac, _, sdot_out = self._evaluate(x, 1)
        s_dot = np.asarray(ad.value_of(sdot_out)) + self.config.s_dot_min
        w = np.tile(self.weights, self.K)
        coef = -self.h * w / s_dot**2  # d(1/s_dot)
        grad = np.zeros(self.n)
        contrib = coef * sdot_out.dot  # (19, N)
        idx = self.node_off.reshape(-1)
        for i in range(N_NODE):
            np.add.at(grad, idx + i, contrib[i])
        return grad

    def constraints(self, x):
        x = np.asarray(x, dtype=float)
        values, _, _, _ = self._evaluate(x, 0)
        c = self.a_lin @ x
        c[: self.m_nl] += values.T.reshape(-1)
        return c

    def jacobian(self, x):
        x = np.asarray(x, dtype=float)
        _, jac, _, _ = self._evaluate(x, 1)
        # jac: (N_NL, 19, N) -> per node dense blocks in row-major node order
        data = np.transpose(jac, (2, 0, 1)).reshape(-1)
        j_nl = sp.coo_matrix(
            (data, (self._nl_rows, self._nl_cols)), shape=(self.m, self.n)
        ).tocsr()
        return self.a_lin + j_nl

    def lagrangian_hessian(self, x, obj_weight, lam):
        x = np.asarray(x, dtype=float)
        _, _, hess, sdot_out = self._evaluate(x, 2)
        lam = np.asarray(lam)
        if lam.ndim == 0:
            lam = np.zeros(self.m)
        # weights per node output from the multipliers of the nonlinear rows
        w = lam[: self.m_nl].reshape(self.n_nodes, N_NL).T  # (N_NL, N)
        hsum = np.einsum("on,oijn->ijn", w, hess)
        if obj_weight != 0.0:
            s_dot = np.asarray(ad.value_of(sdot_out)) + self.config.s_dot_min
            wq = np.tile(self.weights, self.K)
            c1 = -obj_weight * self.h * wq / s_dot**2
            c2 = 2.0 * obj_weight * self.h * wq / s_dot**3
            outer = sdot_out.dot[:, None, :] * sdot_out.dot[None, :, :]
            hsum = hsum + c1 * sdot_out.hes + c2 * outer
        # scatter (19,19,N) blocks
        nvar = N_NODE
        idx = self.node_off.reshape(-1)
        rr = np.repeat(np.arange(nvar), nvar)
        cc = np.tile(np.arange(nvar), nvar)
        rows = (idx[None, :] + rr[:, None]).reshape(-1)
        cols = (idx[None, :] + cc[:, None]).reshape(-1)
        data = hsum.reshape(nvar * nvar, self.n_nodes).reshape(-1)
        return sp.coo_matrix((data, (rows, cols)), shape=(self.n, self.n)).tocsr()

    # ------------------------------------------------------------- helpers
    def split_solution(self, x):
        """Per-node arrays (states incl. s, physical forces) from a solution."""
        states, algs, inputs = self.gather(x)
        fs = self.problem.force_scale
        full_states = np.column_stack([self.s_nodes, states.T])
        algs = algs.T.copy()
        algs[:, 4:] *= fs
        inputs = inputs.T.copy()
        inputs[:, 2:] *= fs
        return full_states, algs, inputs

    def node_times(self, x):
        states, _, _ = self.gather(x)
        # recompute s_dot per node
        values, _, _, _ = self._evaluate(np.asarray(x, dtype=float), 0)
        s_dot = values[N_STATE + N_ALG] + self.config.s_dot_min
        inv = (1.0 / s_dot).reshape(self.K, self.p)
        times = np.zeros(self.K * self.p)
        t0 = 0.0
        for k in range(self.K):
            partial = self.h * (self.tmat @ inv[k])
            times[k * self.p : (k + 1) * self.p] = t0 + partial
            t0 += self.h * float(self.weights @ inv[k])
        return times, t0


def transcribe(problem: RacelineProblem, config: CollocationConfig) -> Transcription:
    return Transcription(problem, config)


def initial_guess(problem: RacelineProblem, config: CollocationConfig,
                  transcription: Transcription | None = None,
                  rng: np.random.Generator | None = None,
                  perturbation: float = 0.0) -> np.ndarray:
    """Centerline guess: y = 0, constant speed, upright, static normal forces.

    The speed is the largest constant value whose centerline curvature demand
    stays within 110% of the friction budget; the yaw rate tracks the
    centerline heading so the kinematic rows start near-feasible.
    """
    tr = transcription or Transcription(problem, config)
    par = problem.params
    surf = problem.surface

    # centerline heading-rate coefficient per node
    kappas = []
    for s in tr.s_nodes:
        smp = surf.evaluator(float(s), 0.0)
        ee = float(ad.value_of(ad.dot3(smp.x_s, smp.x_s)))
        ks = float(
            ad.value_of(ad.dot3(ad.cross3(smp.x_ss, smp.x_s), smp.normal))
        ) / ee
        norm = float(ad.value_of(smp.norm_xs))
        kappas.append((ks, norm))
    kmax = max(abs(k) / n for k, n in kappas)
    mu = min(par.front_tire.d4, par.rear_tire.d4)
    if kmax > 1e-9:
        v = np.sqrt(1.1 * mu * par.g / kmax)
    else:
        v = 30.0
    v = float(np.clip(v, max(2.0 * config.s_dot_min, 5.0), 60.0))

    fz_hat = static_normal_forces(par) / par.weight
    x = np.zeros(tr.n)

    def fill_state(idx, node):
        ks, norm = kappas[node]
        x[idx + 0] = 0.0  # y
        x[idx + 1] = 0.0  # theta_s
        x[idx + 2] = v
        x[idx + 3] = 0.0
        x[idx + 4] = -ks * (v / norm)  # w3 keeps theta_s_dot ~ 0
        x[idx + 5 : idx + 9] = 0.0

    for k in range(tr.K):
        fill_state(tr.x0_off[k], k * tr.p)
        for j in range(tr.p):
            node = k * tr.p + j
            idx = tr.node_off[k, j]
            fill_state(idx, node)
            x[idx + N_STATE + 4] = fz_hat[0]
            x[idx + N_STATE + 5] = fz_hat[1]
    fill_state(tr.end_off, 0)

    if perturbation > 0.0 and rng is not None:
        jitter = rng.normal(0.0, perturbation, size=tr.n)
        x = np.clip(x + jitter, tr.x_lb, tr.x_ub)
    return x


def warm_start_guess(problem: RacelineProblem, config: CollocationConfig,
                     transcription: Transcription | None = None) -> np.ndarray:
    """Quasi-static warm start: nodewise cornering trim on the centerline.

    A curvature-limited speed profile is laid along the centerline and every
    node gets the steady-cornering solution (camber, steer, yaw rate, normal
    forces) of the local surface sample at that speed; nodes where the trim
    solve fails keep the plain centerline guess. This routinely cuts the
    interior-point iteration count severalfold versus the flat guess.
    """
    from .simulator import solve_algebraic  # local import to avoid a cycle
    from .kinematics import BodyVelocity, Pose, pose_rates
    from .errors import MotoRacelineError

    tr = transcription or Transcription(problem, config)
    par = problem.params
    surf = problem.surface
    x = initial_guess(problem, config, tr)

    # curvature-limited speed profile, smoothed along s
    kappas = np.zeros(tr.n_nodes)
    norms = np.ones(tr.n_nodes)
    for i, s in enumerate(tr.s_nodes):
        smp = surf.evaluator(float(s), 0.0)
        ee = float(ad.value_of(ad.dot3(smp.x_s, smp.x_s)))
        kappas[i] = float(
            ad.value_of(ad.dot3(ad.cross3(smp.x_ss, smp.x_s), smp.normal))
        ) / ee
        norms[i] = float(ad.value_of(smp.norm_xs))
    mu = 0.65 * min(par.front_tire.d4, par.rear_tire.d4)
    with np.errstate(divide="ignore"):
        v_cap = np.sqrt(mu * par.g / np.maximum(np.abs(kappas) / norms, 1e-6))
    v_prof = np.clip(v_cap, 2.0 * config.s_dot_min, 45.0)
    width = max(3, tr.n_nodes // 12)
    kernel = np.ones(width) / width
    padded = np.concatenate([v_prof[-width:], v_prof, v_prof[:width]])
    v_prof = np.convolve(padded, kernel, mode="same")[width:-width]

    mg = par.weight
    for i in range(tr.n_nodes):
        k, j = divmod(i, tr.p)
        v1 = float(v_prof[i])
        trimmed = _node_trim(surf, float(tr.s_nodes[i]), v1, par)
        if trimmed is None:
            continue
        theta_s, v2, w3, c, gamma, fx_r, fz_f, fz_r = trimmed
        idx = tr.node_off[k, j]
        x[idx + 0] = 0.0
        x[idx + 1] = theta_s
        x[idx + 2] = v1
        x[idx + 3] = v2
        x[idx + 4] = w3
        x[idx + 5] = c
        x[idx + N_STATE + 4] = fz_f / mg
        x[idx + N_STATE + 5] = fz_r / mg
        x[idx + N_STATE + N_ALG + 0] = gamma
        x[idx + N_STATE + N_ALG + 3] = fx_r / mg
    # interval starts and the endpoint copy their right-node values
    for k in range(tr.K):
        src = tr.node_off[k - 1, tr.p - 1] if k > 0 else tr.node_off[tr.K - 1, tr.p - 1]
        x[tr.x0_off[k] : tr.x0_off[k] + N_STATE] = x[src : src + N_STATE]
    x[tr.end_off : tr.end_off + N_STATE] = x[
        tr.node_off[tr.K - 1, tr.p - 1] : tr.node_off[tr.K - 1, tr.p - 1] + N_STATE
    ]
    return np.clip(x, tr.x_lb, tr.x_ub)


def _node_trim(surf, s, v1, par):
    """Steady cornering at one surface sample; None if the solve fails."""
    from .kinematics import BodyVelocity, Pose, pose_rates
    from .errors import MotoRacelineError

    sample = surf.evaluator(s, 0.0)

    def assemble(q):
        theta_s, v2, c, gamma, fx_r, fz_f, fz_r = q
        pose = Pose(s, 0.0, theta_s, n=par.r)
        s_dot, y_dot, th_dot0 = pose_rates(pose, BodyVelocity(v1, v2, 0.0), sample)
        w3 = -th_dot0
        state = State(s, 0.0, theta_s, v1, v2, w3, c, 0.0, 0.0, 0.0)
        alg = AlgebraicState(0.0, 0.0, 0.0, 0.0, fz_f, fz_r)
        inp = Input(gamma, 0.0, 0.0, fx_r)
        g = dae_residual(state, inp, alg, sample, par)
        return state, list(g) + [y_dot]

    fz = static_normal_forces(par)
    q = np.array([0.0, 0.0, 0.0, 0.0, 0.0, fz[0], fz[1]])
    scale = np.concatenate([_residual_scale(par), [10.0]])
    try:
        for _ in range(40):
            seeds = ad.seed_duals(list(q))
            _, res = assemble(seeds)
            r = np.array([ad.value_of(ri) for ri in res], dtype=float)
            if float(np.max(np.abs(r / scale))) <= 1e-9:
                theta_s, v2, c, gamma, fx_r, fz_f, fz_r = q
                state, _ = assemble(q)
                if abs(c) > 1.15 or fz_f < 0 or fz_r < 0:
                    return None
                return theta_s, v2, float(state.w3), c, gamma, fx_r, fz_f, fz_r
            jac = np.array([ri.dot for ri in res], dtype=float)
            q = q - np.linalg.solve(jac, r)
            if not np.all(np.isfinite(q)):
                return None
    except (MotoRacelineError, np.linalg.LinAlgError):
        return None
    return None


def _to_nlp(tr: Transcription, x0: np.ndarray) -> nlp.NlpProblem:
    return nlp.NlpProblem(
        x0=x0,
        x_lb=tr.x_lb,
        x_ub=tr.x_ub,
        c_lb=tr.c_lb,
        c_ub=tr.c_ub,
        objective=tr.objective,
        gradient=tr.gradient,
        constraints=tr.constraints,
        jacobian=tr.jacobian,
        lagrangian_hessian=tr.lagrangian_hessian,
    )


def replay_residuals(tr: Transcription, x: np.ndarray) -> np.ndarray:
    """Physical-units DAE residual inf-norm at every collocation point."""
    states, algs, inputs = tr.split_solution(x)
    par = tr.problem.params
    out = np.zeros(len(states))
    for i, (zs, za, zu) in enumerate(zip(states, algs, inputs)):
        sample = tr.problem.surface.evaluator(float(zs[0]), float(zs[1]))
        g = dae_residual(
            State.from_array(zs), Input.from_array(zu),
            AlgebraicState.from_array(za), sample, par,
        )
        out[i] = np.max(np.abs(g.astype(float)))
    return out


def solve_raceline(problem: RacelineProblem, config: CollocationConfig,
                   guess: np.ndarray | None = None) -> RacelineSolution:
    """Transcribe, solve, polish, and package the periodic minimum-time NLP.

    The returned point is the interior-point solution pushed through an
    active-set Newton polish (quadratic local convergence on the identified
    active set), falling back to an equality-only polish if the crossover is
    rejected.
    """
    t_start = time.perf_counter()
    tr = Transcription(problem, config)
    x0 = guess if guess is not None else warm_start_guess(problem, config, tr)
    nlp_problem = _to_nlp(tr, x0)
    result = nlp.solve_nlp(
        nlp_problem, method=config.method, tol=config.nlp_tol,
        max_iter=config.max_iter,
    )
    x, lam, kkt_polished, ok = nlp.active_set_newton_polish(nlp_problem, result.x)
    if ok:
        result.kkt_residual = min(result.kkt_residual, kkt_polished)
    else:
        x = result.x
    x = nlp.polish_equalities(nlp_problem, x, tol=1e-9)

    states, algs, inputs = tr.split_solution(x)
    times, lap_time = tr.node_times(x)
    residuals = replay_residuals(tr, x)
    gap = np.max(np.abs(x[tr.end_off : tr.end_off + N_STATE]
                        - x[tr.x0_off[0] : tr.x0_off[0] + N_STATE]))
    stats = {
        "solver": result.solver,
        "success": bool(result.success),
        "status": result.status,
        "iterations": result.iterations,
        "kkt_residual": result.kkt_residual,
        "constraint_violation": nlp.constraint_violation(nlp_problem, x),
        "replay_residual_max": float(np.max(residuals)),
        "periodicity_gap": float(gap),
        "objective": float(tr.objective(x)),
    }
    wall = time.perf_counter() - t_start

    solution = RacelineSolution(
        lap_time=float(lap_time),
        s_nodes=tr.s_nodes.copy(),
        states=states,
        algs=algs,
        inputs=inputs,
        times=times,
        stats=stats,
        config={
            "num_intervals": config.num_intervals,
            "degree": config.degree,
            "nlp_tol": config.nlp_tol,
            "s_dot_min": config.s_dot_min,
            "method": config.method,
            "surface": problem.surface.name,
            "s_length": problem.surface.s_length,
        },
    )
    solution.stats["wall_time"] = wall  # reported, never written to files
    return solution
