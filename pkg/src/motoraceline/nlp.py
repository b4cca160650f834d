"""Pluggable NLP solver interface and the shipped adapters.

The contract is a standard sparse NLP:

    minimize f(x)  subject to  c_lb <= c(x) <= c_ub,  x_lb <= x <= x_ub

with callbacks for the objective, gradient, constraints, sparse Jacobian,
and (optionally) the Lagrangian Hessian. Equalities are rows with
``c_lb == c_ub``.

Shipped backends:

* ``trust-constr`` -- scipy's sparse interior-point/trust-region method,
  fed exact first derivatives and the exact Lagrangian Hessian.
* ``slsqp``        -- scipy's dense SQP, a reference fallback for small
  problems (constraint Jacobians are densified).

Third-party solvers (e.g. an IPOPT binding) plug in through the
``MOTORACELINE_NLP_PLUGIN`` environment variable naming a
``module:function`` that accepts ``(problem, options)`` and returns an
:class:`NlpResult`.
"""

from __future__ import annotations

import importlib
import os
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.optimize import Bounds, NonlinearConstraint, minimize

from .errors import SolverFailureError

PLUGIN_ENV = "MOTORACELINE_NLP_PLUGIN"


@dataclass
class NlpProblem:
    x0: np.ndarray
    x_lb: np.ndarray
    x_ub: np.ndarray
    c_lb: np.ndarray
    c_ub: np.ndarray
    objective: Callable
    gradient: Callable
    constraints: Callable
    jacobian: Callable  # -> scipy.sparse matrix
    lagrangian_hessian: Callable | None = None  # (x, obj_weight, lam) -> sparse

    @property
    def n(self):
        return len(self.x0)

    @property
    def m(self):
        return len(self.c_lb)

    @property
    def equality_mask(self):
        return self.c_lb == self.c_ub


@dataclass
class NlpResult:
    x: np.ndarray
    success: bool
    status: str
    iterations: int
    objective: float
    constr_violation: float
    kkt_residual: float
    wall_time: float
    multipliers: np.ndarray | None = None
    solver: str = ""
    extra: dict = field(default_factory=dict)


def constraint_violation(problem: NlpProblem, x) -> float:
    c = problem.constraints(x)
    over = np.maximum(c - problem.c_ub, 0.0)
    under = np.maximum(problem.c_lb - c, 0.0)
    xo = np.maximum(x - problem.x_ub, 0.0)
    xu = np.maximum(problem.x_lb - x, 0.0)
    return float(max(np.max(over + under, initial=0.0), np.max(xo + xu, initial=0.0)))


def kkt_stationarity(problem: NlpProblem, x, lam=None) -> float:
    """Inf-norm of the projected Lagrangian gradient.

    If multipliers are missing they are estimated by least squares over the
    near-active constraint rows. Bound constraints are handled by projecting
    the gradient at (near-)active bounds.
    """
    g = problem.gradient(x)
    jac = problem.jacobian(x).tocsr()
    c = problem.constraints(x)
    tol_act = 1e-6
    active = (problem.equality_mask
              | (c <= problem.c_lb + tol_act)
              | (c >= problem.c_ub - tol_act))
    rows = np.flatnonzero(active)
    if lam is not None:
        grad_l = g + jac.T @ lam
    elif len(rows):
        sub = jac[rows]
        lam_est = sp.linalg.lsqr(sub.T, -g, atol=1e-12, btol=1e-12)[0]
        grad_l = g + sub.T @ lam_est
    else:
        grad_l = g
    # project out components that push into active variable bounds
    at_lb = x <= problem.x_lb + tol_act
    at_ub = x >= problem.x_ub - tol_act
    proj = grad_l.copy()
    proj[at_lb & (proj > 0)] = 0.0
    proj[at_ub & (proj < 0)] = 0.0
    return float(np.max(np.abs(proj)))


def solve_nlp(problem: NlpProblem, method: str = "trust-constr",
              tol: float = 1e-6, max_iter: int = 3000,
              options: dict | None = None) -> NlpResult:
    """Dispatch to the configured backend (env plugin wins over ``method``)."""
    plugin = os.environ.get(PLUGIN_ENV)
    if plugin:
        mod_name, _, fn_name = plugin.partition(":")
        fn = getattr(importlib.import_module(mod_name), fn_name or "solve")
        return fn(problem, dict(options or {}, tol=tol, max_iter=max_iter))
    if method == "trust-constr":
        return _solve_trust_constr(problem, tol, max_iter, options or {})
    if method == "slsqp":
        return _solve_slsqp(problem, tol, max_iter, options or {})
    raise SolverFailureError(f"unknown NLP method {method!r}")


def _solve_trust_constr(problem, tol, max_iter, options) -> NlpResult:
    hess = None
    con_hess = None
    if problem.lagrangian_hessian is not None:
        zero_lam = np.zeros(problem.m)

        def hess(x):  # noqa: F811
            return problem.lagrangian_hessian(x, 1.0, zero_lam)

        def con_hess(x, v):
            return problem.lagrangian_hessian(x, 0.0, np.asarray(v))

    constraint = NonlinearConstraint(
        problem.constraints, problem.c_lb, problem.c_ub,
        jac=problem.jacobian, hess=con_hess,
    )
    bounds = Bounds(problem.x_lb, problem.x_ub)
    t0 = time.perf_counter()
    res = minimize(
        problem.objective, problem.x0, jac=problem.gradient, hess=hess,
        method="trust-constr", constraints=[constraint], bounds=bounds,
        options=dict(
            {"gtol": tol, "xtol": 1e-12, "maxiter": max_iter, "verbose": 0},
            **options,
        ),
    )
    wall = time.perf_counter() - t0
    lam = None
    if getattr(res, "v", None):
        lam = np.asarray(res.v[0])
    viol = constraint_violation(problem, res.x)
    return NlpResult(
        x=np.asarray(res.x),
        success=bool(res.status in (1, 2)) and viol <= 1e3 * tol,
        status=str(res.message),
        iterations=int(res.niter),
        objective=float(res.fun),
        constr_violation=viol,
        kkt_residual=float(res.optimality),
        wall_time=wall,
        multipliers=lam,
        solver="trust-constr",
        extra={"cg_stop": getattr(res, "cg_stop_cond", None)},
    )


def _solve_slsqp(problem, tol, max_iter, options) -> NlpResult:
    if problem.n > 1500:
        raise SolverFailureError(
            f"slsqp fallback is dense; {problem.n} variables is too large"
        )
    eq = problem.equality_mask
    ineq = ~eq
    lb_rows = np.flatnonzero(ineq & np.isfinite(problem.c_lb))
    ub_rows = np.flatnonzero(ineq & np.isfinite(problem.c_ub))
    eq_rows = np.flatnonzero(eq)

    def dense_jac(x):
        return np.asarray(problem.jacobian(x).todense())

    cons = []
    if len(eq_rows):
        cons.append(
            {
                "type": "eq",
                "fun": lambda x: problem.constraints(x)[eq_rows] - problem.c_lb[eq_rows],
                "jac": lambda x: dense_jac(x)[eq_rows],
            }
        )
    if len(lb_rows):
        cons.append(
            {
                "type": "ineq",
                "fun": lambda x: problem.constraints(x)[lb_rows] - problem.c_lb[lb_rows],
                "jac": lambda x: dense_jac(x)[lb_rows],
            }
        )
    if len(ub_rows):
        cons.append(
            {
                "type": "ineq",
                "fun": lambda x: problem.c_ub[ub_rows] - problem.constraints(x)[ub_rows],
                "jac": lambda x: -dense_jac(x)[ub_rows],
            }
        )
    t0 = time.perf_counter()
    res = minimize(
        problem.objective, problem.x0, jac=problem.gradient, method="SLSQP",
        bounds=list(zip(problem.x_lb, problem.x_ub)), constraints=cons,
        options=dict({"maxiter": max_iter, "ftol": tol * 1e-3}, **options),
    )
    wall = time.perf_counter() - t0
    viol = constraint_violation(problem, res.x)
    return NlpResult(
        x=np.asarray(res.x),
        success=bool(res.success) and viol <= 1e3 * tol,
        status=str(res.message),
        iterations=int(res.nit),
        objective=float(res.fun),
        constr_violation=viol,
        kkt_residual=kkt_stationarity(problem, res.x),
        wall_time=wall,
        solver="slsqp",
    )


def active_set_newton_polish(problem: NlpProblem, x, tol: float = 1e-8,
                             act_tol: float = 1e-3, max_iters: int = 25):
    """Crossover polish: damped Newton on the active-set KKT system.

    Interior-point iterates identify the active set long before they satisfy
    tight tolerances (variables hover about a barrier-parameter distance from
    their bounds, hence the loose ``act_tol``); fixing that set and running
    Newton on stationarity plus the active rows converges quadratically.
    Steps are damped to keep the KKT residual monotone. Returns
    ``(x, lam, kkt, ok)``; on sign or feasibility failure callers keep the
    unpolished point. Requires a Lagrangian Hessian.
    """
    if problem.lagrangian_hessian is None:
        return x, None, np.inf, False
    x = x.copy()
    n = problem.n
    c = problem.constraints(x)
    eq = problem.equality_mask
    act_lo = (~eq) & (c <= problem.c_lb + act_tol) & np.isfinite(problem.c_lb)
    act_hi = (~eq) & (c >= problem.c_ub - act_tol) & np.isfinite(problem.c_ub)
    act_rows = np.flatnonzero(eq | act_lo | act_hi)
    targets = np.where(eq | act_lo, problem.c_lb, problem.c_ub)[act_rows]
    span = np.minimum(problem.x_ub - problem.x_lb, 1.0)
    fixed_lo = x <= problem.x_lb + act_tol * span
    fixed_hi = x >= problem.x_ub - act_tol * span
    free = ~(fixed_lo | fixed_hi)
    x[fixed_lo] = problem.x_lb[fixed_lo]
    x[fixed_hi] = problem.x_ub[fixed_hi]
    nf, na = int(free.sum()), len(act_rows)
    free_idx = np.flatnonzero(free)
    if na == 0:
        return x, None, kkt_stationarity(problem, x), True

    def residual(xx, lam):
        g = problem.gradient(xx)
        jac = problem.jacobian(xx).tocsr()
        grad_l = (g + jac.T @ lam)[free]
        c_act = problem.constraints(xx)[act_rows] - targets
        return grad_l, c_act, jac

    lam_full = np.zeros(problem.m)
    grad_l, c_act, jac = residual(x, lam_full)
    res = max(np.max(np.abs(grad_l)), np.max(np.abs(c_act)))
    converged = res <= tol
    for _ in range(max_iters):
        if converged:
            break
        ja = jac[act_rows][:, free_idx].tocsc()
        hess = problem.lagrangian_hessian(x, 1.0, lam_full).tocsr()
        hff = hess[free_idx][:, free_idx]
        kkt = sp.bmat(
            [[hff + 1e-9 * sp.eye(nf), ja.T], [ja, -1e-11 * sp.eye(na)]],
            format="csc",
        )
        lam_act = lam_full[act_rows]
        # solve for (dx, lam_new); the rhs rebuilds stationarity around lam_act
        try:
            sol = sp.linalg.splu(kkt).solve(
                np.concatenate([-grad_l + ja.T @ lam_act, -c_act])
            )
        except RuntimeError:
            return x, lam_full, np.inf, False
        dx = sol[:nf]
        lam_new = np.zeros(problem.m)
        lam_new[act_rows] = sol[nf:]

        # damped update, monotone in the KKT residual
        alpha = 1.0
        improved = False
        for _ in range(8):
            x_try = x.copy()
            x_try[free_idx] = x[free_idx] + alpha * dx
            np.clip(x_try, problem.x_lb, problem.x_ub, out=x_try)
            lam_try = lam_full + alpha * (lam_new - lam_full)
            g_try, c_try, jac_try = residual(x_try, lam_try)
            res_try = max(np.max(np.abs(g_try)), np.max(np.abs(c_try)))
            if res_try < (1.0 - 1e-4 * alpha) * res or res_try <= tol:
                x, lam_full = x_try, lam_try
                grad_l, c_act, jac = g_try, c_try, jac_try
                res = res_try
                improved = True
                break
            alpha *= 0.5
        if not improved:
            return x, lam_full, np.inf, False
        converged = res <= tol

    if not converged:
        return x, lam_full, np.inf, False

    # multiplier signs: with c >= lb rows active, stationarity g + J^T lam = 0
    # requires lam <= 0 there (and the reverse at upper bounds)
    lam_act = lam_full[act_rows]
    is_lo = act_lo[act_rows]
    is_hi = act_hi[act_rows]
    sign_ok = np.all(lam_act[is_lo] <= 1e-7) and np.all(lam_act[is_hi] >= -1e-7)
    viol = constraint_violation(problem, x)
    kkt_res = kkt_stationarity(problem, x, lam_full)
    ok = bool(sign_ok and viol <= 100 * tol)
    return x, lam_full, kkt_res, ok


def polish_equalities(problem: NlpProblem, x, tol: float = 1e-9,
                      max_iters: int = 8) -> np.ndarray:
    """Gauss-Newton polish of the equality rows after the solver returns.

    Interior-point methods stop with feasibility around their tolerance; a
    few minimum-norm Newton corrections push the equality residual to the
    replay-validation level without moving the local optimum measurably.
    Steps are clipped to the variable bounds.
    """
    eq_rows = np.flatnonzero(problem.equality_mask)
    if not len(eq_rows):
        return x
    target = problem.c_lb[eq_rows]
    x = x.copy()
    for _ in range(max_iters):
        r = problem.constraints(x)[eq_rows] - target
        if np.max(np.abs(r)) <= tol:
            break
        jac = problem.jacobian(x).tocsr()[eq_rows]
        dx = sp.linalg.lsqr(jac, -r, atol=1e-14, btol=1e-14, iter_lim=2000)[0]
        x = np.clip(x + dx, problem.x_lb, problem.x_ub)
    return x
