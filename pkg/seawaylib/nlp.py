# seawaylib/nlp.py
"""Sequential quadratic programming for smooth NLPs.

    min f(z)  s.t.  c_eq(z) = 0,  c_in(z) >= 0,  lower <= z <= upper

Damped BFGS Hessian, elastic QP subproblems solved by the active-set method
in `seawaylib.qp`, and an l1-merit backtracking line search.
"""

import enum
import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, TextIO

import numpy as np

from seawaylib.config import TRACE
from seawaylib.errors import DimensionError, NumericalFailure
from seawaylib.qp import solve_qp

logger = logging.getLogger(__name__)


class SolveStatus(enum.Enum):
    CONVERGED = "converged"
    MAX_ITER = "max_iter"
    INFEASIBLE_QP = "infeasible_qp"
    QP_FAILURE = "qp_failure"
    NUMERICAL_FAILURE = "numerical_failure"


@dataclass
class NlpSpec:
    """Callbacks and bounds of one nonlinear program.

    Jacobian callbacks return dense (rows x n_vars) arrays. `objective_hessian`
    is optional and only used when the solver is asked to seed BFGS with it.
    """

    n_vars: int
    objective: Callable[[np.ndarray], float]
    objective_gradient: Callable[[np.ndarray], np.ndarray]
    equality: Callable[[np.ndarray], np.ndarray]
    equality_jacobian: Callable[[np.ndarray], np.ndarray]
    inequality: Callable[[np.ndarray], np.ndarray]
    inequality_jacobian: Callable[[np.ndarray], np.ndarray]
    lower: np.ndarray
    upper: np.ndarray
    objective_hessian: Optional[Callable[[np.ndarray], np.ndarray]] = None
    sparsity: dict = field(default_factory=dict)

    def __post_init__(self):
        self.lower = np.broadcast_to(np.asarray(self.lower, dtype=float), (self.n_vars,)).copy()
        self.upper = np.broadcast_to(np.asarray(self.upper, dtype=float), (self.n_vars,)).copy()
        if np.any(self.lower > self.upper):
            raise DimensionError("NLP has lower > upper on some variable")


@dataclass
class SolverOptions:
    tol_kkt: float = 1e-6
    tol_feas: float = 1e-6
    max_iter: int = 200
    hessian_init: str = "identity"
    elastic_weight: float = 1e4
    armijo: float = 1e-4
    backtrack: float = 0.5
    min_step: float = 1e-10
    damped_reset: int = 5

    @classmethod
    def from_mapping(cls, data) -> "SolverOptions":
        known = {k: data[k] for k in cls.__dataclass_fields__ if k in data}
        opts = cls(**known)
        if opts.hessian_init not in ("identity", "objective"):
            raise ValueError(f"hessian_init must be 'identity' or 'objective', got {opts.hessian_init!r}")
        return opts


@dataclass
class Derivatives:
    f: float
    grad: np.ndarray
    c_eq: np.ndarray
    J_eq: np.ndarray
    c_in: np.ndarray
    J_in: np.ndarray


@dataclass
class SolveReport:
    z_star: np.ndarray
    objective: float
    kkt_residual: float
    violation: float
    iterations: int
    status: SolveStatus
    lam_eq: np.ndarray
    mu_in: np.ndarray
    history: list = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return self.status is SolveStatus.CONVERGED

    def usable(self, tol_feas: float) -> bool:
        """Converged, or stopped on the iteration cap at a feasible point."""
        return self.converged or (
            self.status is SolveStatus.MAX_ITER and self.violation <= tol_feas
        )


def gradients(spec: NlpSpec, z) -> Derivatives:
    """Evaluate f, its gradient, and both constraint blocks with their Jacobians."""
    z = np.asarray(z, dtype=float)
    if not np.all(np.isfinite(z)):
        raise NumericalFailure("Non-finite decision vector passed to gradients()")
    n = spec.n_vars
    d = Derivatives(
        f=float(spec.objective(z)),
        grad=np.asarray(spec.objective_gradient(z), dtype=float).reshape(n),
        c_eq=np.asarray(spec.equality(z), dtype=float).reshape(-1),
        J_eq=np.asarray(spec.equality_jacobian(z), dtype=float).reshape(-1, n),
        c_in=np.asarray(spec.inequality(z), dtype=float).reshape(-1),
        J_in=np.asarray(spec.inequality_jacobian(z), dtype=float).reshape(-1, n),
    )
    if d.J_eq.shape[0] != d.c_eq.size or d.J_in.shape[0] != d.c_in.size:
        raise DimensionError(
            f"Jacobian rows ({d.J_eq.shape[0]}, {d.J_in.shape[0]}) do not match "
            f"constraint sizes ({d.c_eq.size}, {d.c_in.size})"
        )
    if not np.isfinite(d.f):
        raise NumericalFailure("Objective is not finite", row=None)
    bad = np.flatnonzero(~np.isfinite(d.grad))
    if bad.size:
        raise NumericalFailure(f"Objective gradient is not finite at entry {bad[0]}", row=int(bad[0]))
    for name, c, J in (("equality", d.c_eq, d.J_eq), ("inequality", d.c_in, d.J_in)):
        bad_rows = np.flatnonzero(~np.isfinite(c) | ~np.all(np.isfinite(J), axis=1))
        if bad_rows.size:
            raise NumericalFailure(
                f"Non-finite {name} constraint or Jacobian in row {bad_rows[0]}",
                row=int(bad_rows[0]),
            )
    return d


def check_gradients(spec: NlpSpec, z, h: float = 1e-6) -> float:
    """Largest relative error between analytic derivatives and central differences."""
    z = np.asarray(z, dtype=float)
    d = gradients(spec, z)
    fd_grad = np.zeros(spec.n_vars)
    fd_eq = np.zeros_like(d.J_eq)
    fd_in = np.zeros_like(d.J_in)
    for j in range(spec.n_vars):
        e = np.zeros(spec.n_vars)
        e[j] = h
        fd_grad[j] = (spec.objective(z + e) - spec.objective(z - e)) / (2 * h)
        fd_eq[:, j] = (np.asarray(spec.equality(z + e)) - np.asarray(spec.equality(z - e))) / (2 * h)
        fd_in[:, j] = (np.asarray(spec.inequality(z + e)) - np.asarray(spec.inequality(z - e))) / (2 * h)
    worst = 0.0
    for analytic, approx in ((d.grad, fd_grad), (d.J_eq, fd_eq), (d.J_in, fd_in)):
        if analytic.size == 0:
            continue
        scale = np.maximum(1.0, np.abs(approx))
        worst = max(worst, float(np.max(np.abs(analytic - approx) / scale)))
    return worst


def _violation(d: Derivatives, ord=np.inf) -> float:
    parts = [np.abs(d.c_eq), np.maximum(0.0, -d.c_in)]
    v = np.concatenate(parts)
    if v.size == 0:
        return 0.0
    return float(np.linalg.norm(v, ord))


def _merit(d: Derivatives, penalty: float) -> float:
    return d.f + penalty * _violation(d, ord=1)


def _kkt(spec: NlpSpec, z, d: Derivatives, lam_eq, mu_in):
    """(stationarity, complementarity) at z, with bound multipliers eliminated."""
    r = d.grad - d.J_eq.T @ lam_eq - d.J_in.T @ mu_in
    tol_b = 1e-9
    at_lb = np.isfinite(spec.lower) & (z <= spec.lower + tol_b)
    at_ub = np.isfinite(spec.upper) & (z >= spec.upper - tol_b)
    res = np.abs(r)
    res[at_lb] = np.maximum(0.0, -r[at_lb])
    res[at_ub] = np.maximum(0.0, r[at_ub])
    both = at_lb & at_ub
    res[both] = 0.0
    scale = max(1.0, float(np.linalg.norm(d.grad, np.inf)))
    stationarity = float(np.max(res)) / scale if res.size else 0.0
    comp = np.concatenate([np.abs(mu_in * d.c_in), np.maximum(0.0, -mu_in)])
    complementarity = float(np.max(comp)) if comp.size else 0.0
    return stationarity, complementarity


def _start_point(spec: NlpSpec, d: Derivatives, z):
    """Feasible start for the elastic QP: equalities solved with bounded variables frozen."""
    n = spec.n_vars
    lo, hi = spec.lower - z, spec.upper - z
    step = np.zeros(n)
    if d.c_eq.size:
        free = ~(np.isfinite(spec.lower) | np.isfinite(spec.upper))
        if np.any(free):
            sol, *_ = np.linalg.lstsq(d.J_eq[:, free], -d.c_eq, rcond=None)
            step[free] = sol
        resid = d.J_eq @ step + d.c_eq
        if np.linalg.norm(resid, np.inf) > 1e-9 * max(1.0, float(np.linalg.norm(d.c_eq, np.inf))):
            return None
    return np.clip(step, lo, hi)


def _solve_subproblem(spec, d, z, B, weight, hint):
    """Elastic QP in (dz, t): inequality rows relaxed by t >= 0 at cost weight * sum(t)."""
    n = spec.n_vars
    m_in = d.c_in.size
    step0 = _start_point(spec, d, z)
    elastic_eq = step0 is None
    m_eq = d.c_eq.size
    n_t = m_in + (2 * m_eq if elastic_eq else 0)
    N = n + n_t
    delta = 1e-6

    H = np.zeros((N, N))
    H[:n, :n] = B
    H[n:, n:] = delta * np.eye(n_t)
    g = np.concatenate([d.grad, weight * np.ones(n_t)])

    A_eq = np.zeros((m_eq, N))
    A_eq[:, :n] = d.J_eq
    b_eq = -d.c_eq
    if elastic_eq:
        A_eq[:, n + m_in : n + m_in + m_eq] = -np.eye(m_eq)
        A_eq[:, n + m_in + m_eq :] = np.eye(m_eq)
    A_in = np.zeros((m_in, N))
    A_in[:, :n] = d.J_in
    A_in[:, n : n + m_in] = np.eye(m_in)
    b_in = -d.c_in

    lb = np.concatenate([spec.lower - z, np.zeros(n_t)])
    ub = np.concatenate([spec.upper - z, np.full(n_t, np.inf)])

    x0 = np.zeros(N)
    if elastic_eq:
        x0[:n] = np.clip(np.zeros(n), lb[:n], ub[:n])
        r = d.J_eq @ x0[:n] + d.c_eq
        x0[n + m_in : n + m_in + m_eq] = np.maximum(r, 0.0)
        x0[n + m_in + m_eq :] = np.maximum(-r, 0.0)
    else:
        x0[:n] = step0
    lin = d.J_in @ x0[:n] + d.c_in
    x0[n : n + m_in] = np.maximum(-lin, 0.0)

    res = solve_qp(H, g, A_eq, b_eq, A_in, b_in, lb, ub, x0, hint=hint)
    return res, n, elastic_eq


def solve(
    spec: NlpSpec,
    z0,
    opts: Optional[SolverOptions] = None,
    trace: Optional[TextIO] = None,
) -> SolveReport:
    """Run SQP from z0 (clipped into the variable box)."""
    opts = opts or SolverOptions()
    n = spec.n_vars
    z = np.clip(np.asarray(z0, dtype=float).reshape(n), spec.lower, spec.upper)

    try:
        d = gradients(spec, z)
    except NumericalFailure as e:
        logger.warning("SQP start point rejected: %s", e)
        return SolveReport(z, float("nan"), float("inf"), float("inf"), 0,
                           SolveStatus.NUMERICAL_FAILURE, np.zeros(0), np.zeros(0))

    def initial_hessian(at):
        if opts.hessian_init == "objective" and spec.objective_hessian is not None:
            H0 = np.asarray(spec.objective_hessian(at), dtype=float)
            return 0.5 * (H0 + H0.T) + 1e-6 * np.eye(n)
        return np.eye(n)

    B = initial_hessian(z)
    lam = np.zeros(d.c_eq.size)
    mu = np.zeros(d.c_in.size)
    penalty = 1.0
    hint = None
    damped_in_row = 0
    reset_used = False
    status = SolveStatus.MAX_ITER
    history = []
    stationarity, complementarity = _kkt(spec, z, d, lam, mu)
    it = 0

    for it in range(1, opts.max_iter + 1):
        viol = _violation(d)
        if (
            it > 1
            and max(stationarity, complementarity) <= opts.tol_kkt
            and viol <= opts.tol_feas
        ):
            status = SolveStatus.CONVERGED
            it -= 1
            break

        weight = max(opts.elastic_weight, 10.0 * penalty)
        res, _, elastic_eq = _solve_subproblem(spec, d, z, B, weight, hint)
        if not res.ok:
            logger.debug(
                "QP subproblem stopped (%s, %d iterations) at SQP iteration %d; retrying with a fresh Hessian",
                res.status.value, res.iterations, it,
            )
            B = initial_hessian(z)
            damped_in_row = 0
            res, _, elastic_eq = _solve_subproblem(spec, d, z, B, weight, None)
        if not res.ok:
            logger.debug("QP subproblem failed again (%s) at SQP iteration %d", res.status.value, it)
            status = SolveStatus.QP_FAILURE
            break
        step = res.x[:n]
        lam_qp = res.lam_eq
        mu_qp = res.mu_in
        hint = [("row", i) for i in res.active_rows] + [
            (kind, j) for j, kind in res.fixed.items() if j < n
        ]

        step_norm = float(np.linalg.norm(step, np.inf))
        if step_norm <= 1e-12 * max(1.0, float(np.linalg.norm(z, np.inf))):
            lam, mu = lam_qp, mu_qp
            stationarity, complementarity = _kkt(spec, z, d, lam, mu)
            if viol > opts.tol_feas:
                status = SolveStatus.INFEASIBLE_QP
            elif max(stationarity, complementarity) <= opts.tol_kkt:
                status = SolveStatus.CONVERGED
            else:
                status = SolveStatus.NUMERICAL_FAILURE
            break

        # penalty update so that the step is a descent direction of the merit
        mult_norm = float(np.max(np.abs(np.concatenate([lam_qp, mu_qp, [0.0]]))))
        penalty = max(penalty, 1.1 * mult_norm + 1e-8)
        lin_eq = d.c_eq + d.J_eq @ step
        lin_in = d.c_in + d.J_in @ step
        viol1 = _violation(d, ord=1)
        lin_viol1 = float(np.sum(np.abs(lin_eq)) + np.sum(np.maximum(0.0, -lin_in)))
        reduction = viol1 - lin_viol1
        quad = float(d.grad @ step + 0.5 * step @ B @ step)
        if reduction > 1e-12 and quad > 0:
            penalty = max(penalty, quad / (0.9 * reduction))
        dphi = float(d.grad @ step) - penalty * reduction

        phi0 = _merit(d, penalty)
        alpha = 1.0
        accepted = None
        while alpha >= opts.min_step:
            z_try = np.clip(z + alpha * step, spec.lower, spec.upper)
            try:
                d_try = gradients(spec, z_try)
            except NumericalFailure:
                alpha *= opts.backtrack
                continue
            phi = _merit(d_try, penalty)
            if phi <= phi0 + opts.armijo * alpha * min(dphi, 0.0):
                accepted = (z_try, d_try, phi)
                break
            alpha *= opts.backtrack

        if accepted is None:
            if not reset_used:
                logger.debug("Line search failed at SQP iteration %d; resetting Hessian", it)
                B = initial_hessian(z)
                reset_used = True
                continue
            status = SolveStatus.NUMERICAL_FAILURE
            break

        z_new, d_new, phi_new = accepted
        s = z_new - z
        grad_lag_old = d.grad - d.J_eq.T @ lam_qp - d.J_in.T @ mu_qp
        grad_lag_new = d_new.grad - d_new.J_eq.T @ lam_qp - d_new.J_in.T @ mu_qp
        y = grad_lag_new - grad_lag_old
        Bs = B @ s
        sBs = float(s @ Bs)
        sy = float(s @ y)
        if sBs > 1e-16:
            if sy < 0.2 * sBs:
                theta = 0.8 * sBs / (sBs - sy)
                y = theta * y + (1.0 - theta) * Bs
                sy = float(s @ y)
                damped_in_row += 1
            else:
                damped_in_row = 0
            B = B + np.outer(y, y) / sy - np.outer(Bs, Bs) / sBs
            B = 0.5 * (B + B.T)
        if damped_in_row >= opts.damped_reset or not np.all(np.isfinite(B)):
            B = initial_hessian(z_new)
            damped_in_row = 0

        z, d = z_new, d_new
        lam, mu = lam_qp, mu_qp
        stationarity, complementarity = _kkt(spec, z, d, lam, mu)
        kkt = max(stationarity, complementarity)
        entry = {
            "iter": it,
            "objective": d.f,
            "kkt": kkt,
            "step_norm": float(np.linalg.norm(s, np.inf)),
            "alpha": alpha,
            "merit_before": phi0,
            "merit_after": phi_new,
            "penalty": penalty,
            "elastic_eq": elastic_eq,
        }
        history.append(entry)
        line = f"{it:4d} {d.f:.9e} {kkt:.3e} {entry['step_norm']:.3e} {phi_new:.9e}"
        logger.log(TRACE, "sqp %s", line)
        if trace is not None:
            trace.write(line + "\n")

    violation = _violation(d)
    kkt_residual = max(stationarity, complementarity)
    if status is SolveStatus.MAX_ITER and kkt_residual <= opts.tol_kkt and violation <= opts.tol_feas:
        status = SolveStatus.CONVERGED
    logger.debug(
        "SQP finished: status=%s iterations=%d objective=%.6g kkt=%.2e violation=%.2e",
        status.value, it, d.f, kkt_residual, violation,
    )
    return SolveReport(
        z_star=z,
        objective=d.f,
        kkt_residual=kkt_residual,
        violation=violation,
        iterations=it,
        status=status,
        lam_eq=lam,
        mu_in=mu,
        history=history,
    )
