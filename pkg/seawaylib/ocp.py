# seawaylib/ocp.py
"""One receding-horizon instance of the robust MPC-CBF problem.

Multiple-shooting transcription with the decision vector

    z = [x_1 .. x_N, u_0 .. u_{N-1}]            (alternating min-max)
    z = [x_1 .. x_N, u_0 .. u_{N-1}, s_0 .. s_{N-1}]   (epigraph min-max)

x_0 is the measured state and is not a variable.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, TextIO

import numpy as np

from seawaylib.errors import DimensionError
from seawaylib.flow import DisturbanceGrid
from seawaylib.nlp import NlpSpec, SolveReport, SolverOptions, SolveStatus, solve
from seawaylib.safety import (
    BorderLine,
    CbfParams,
    border_h,
    border_h_gradient,
    obstacle_h,
    obstacle_h_gradient,
)
from seawaylib.vessel import INPUT_DIM, STATE_DIM, VesselParams, discrete_step_jacobians

logger = logging.getLogger(__name__)

MINMAX_MODES = ("alternating", "epigraph")
MAX_OUTER_ITERATIONS = 5


def _vec(value, n) -> np.ndarray:
    if hasattr(value, "as_array"):
        value = value.as_array()
    return np.asarray(value, dtype=float).reshape(n)


def _omega_bar(omega) -> np.ndarray:
    w = np.asarray(omega, dtype=float).reshape(-1)
    return np.array([w[0], w[1], 0.0])


@dataclass(frozen=True)
class Weights:
    Q: np.ndarray
    Q_T: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        for name, dim in (("Q", STATE_DIM), ("Q_T", STATE_DIM), ("R", INPUT_DIM)):
            M = np.asarray(getattr(self, name), dtype=float)
            if M.ndim == 1:
                M = np.diag(M)
            if M.shape != (dim, dim):
                raise DimensionError(f"Weight {name} must be {dim}x{dim}, got shape {M.shape}")
            if np.any(M != np.diag(np.diag(M))):
                raise ValueError(f"Weight {name} must be diagonal")
            if np.any(np.diag(M) < 0):
                raise ValueError(f"Weight {name} needs non-negative diagonal entries")
            object.__setattr__(self, name, M)

    @classmethod
    def from_diagonals(cls, q, q_t, r) -> "Weights":
        return cls(np.diag(q), np.diag(q_t), np.diag(r))


@dataclass(frozen=True)
class InputBounds:
    u_min: np.ndarray
    u_max: np.ndarray

    def __post_init__(self):
        lo = _vec(self.u_min, INPUT_DIM)
        hi = _vec(self.u_max, INPUT_DIM)
        if not np.all(lo < hi):
            raise ValueError(f"Input bounds need u_min < u_max per axis, got {lo} / {hi}")
        object.__setattr__(self, "u_min", lo)
        object.__setattr__(self, "u_max", hi)

    def clip(self, u) -> np.ndarray:
        return np.clip(_vec(u, INPUT_DIM), self.u_min, self.u_max)


class HardBorderConstraint:
    """Pure state rows border_h(P_k) >= 0, one per border, applied at x_1 .. x_N."""

    def __init__(self, borders: Sequence[BorderLine], vessel: VesselParams):
        self.borders = list(borders)
        self.vessel = vessel

    @property
    def count(self) -> int:
        return len(self.borders)

    def values(self, x) -> np.ndarray:
        return np.array([border_h(x[:2], b, self.vessel) for b in self.borders])

    def jacobian(self, x) -> np.ndarray:
        J = np.zeros((self.count, STATE_DIM))
        for i, b in enumerate(self.borders):
            J[i, :2] = border_h_gradient(x[:2], b)
        return J


@dataclass
class OcpProblem:
    N: int
    x0: np.ndarray
    r_d: np.ndarray
    u_prev: np.ndarray
    omega_prev: np.ndarray
    weights: Weights
    bounds: InputBounds
    obstacles: list
    borders: list
    cbf: CbfParams
    omega_seq: np.ndarray
    vessel: VesselParams
    Ts: float
    minmax: str = "alternating"
    grid: Optional[DisturbanceGrid] = None
    state_constraints: list = field(default_factory=list)

    def __post_init__(self):
        if int(self.N) < 1:
            raise DimensionError(f"Horizon N must be >= 1, got {self.N}")
        self.N = int(self.N)
        self.x0 = _vec(self.x0, STATE_DIM)
        self.r_d = _vec(self.r_d, STATE_DIM)
        self.u_prev = _vec(self.u_prev, INPUT_DIM)
        self.omega_prev = _omega_bar(self.omega_prev)
        seq = np.asarray(self.omega_seq, dtype=float)
        if seq.ndim != 2 or seq.shape[0] != self.N or seq.shape[1] not in (2, 3):
            raise DimensionError(
                f"omega_seq must have shape ({self.N}, 2|3), got {seq.shape}"
            )
        self.omega_seq = np.array([_omega_bar(w) for w in seq])
        if self.minmax not in MINMAX_MODES:
            raise ValueError(f"minmax must be one of {MINMAX_MODES}, got {self.minmax!r}")
        if self.minmax == "epigraph" and self.grid is None:
            raise DimensionError("Epigraph min-max needs a disturbance grid")
        if self.Ts <= 0:
            raise ValueError(f"Sampling time must be positive, got {self.Ts}")

    @property
    def n_states(self) -> int:
        return STATE_DIM * self.N

    @property
    def n_inputs(self) -> int:
        return INPUT_DIM * self.N

    @property
    def n_slacks(self) -> int:
        return self.N if self.minmax == "epigraph" else 0

    @property
    def n_vars(self) -> int:
        return self.n_states + self.n_inputs + self.n_slacks

    def unpack(self, z):
        """(states (N+1, 6) including x0, inputs (N, 3), slacks (n_slacks,))."""
        z = np.asarray(z, dtype=float)
        if z.size != self.n_vars:
            raise DimensionError(f"Decision vector has {z.size} entries, expected {self.n_vars}")
        xs = np.vstack([self.x0, z[: self.n_states].reshape(self.N, STATE_DIM)])
        us = z[self.n_states : self.n_states + self.n_inputs].reshape(self.N, INPUT_DIM)
        return xs, us, z[self.n_states + self.n_inputs :]

    def pack(self, states, inputs, slacks=None) -> np.ndarray:
        states = np.asarray(states, dtype=float).reshape(-1, STATE_DIM)
        if states.shape[0] == self.N + 1:
            states = states[1:]
        parts = [states.ravel(), np.asarray(inputs, dtype=float).ravel()]
        if self.n_slacks:
            parts.append(np.zeros(self.N) if slacks is None else np.asarray(slacks, dtype=float))
        z = np.concatenate(parts)
        if z.size != self.n_vars:
            raise DimensionError(f"Packed vector has {z.size} entries, expected {self.n_vars}")
        return z

    def constraint_counts(self) -> dict:
        n_rows = self.N * (len(self.obstacles) + len(self.borders))
        return {
            "equality": self.N * STATE_DIM,
            "input_bound": 2 * self.n_inputs,
            "cbf": n_rows,
            "state": self.N * sum(c.count for c in self.state_constraints),
            "epigraph": self.N * 4 if self.minmax == "epigraph" else 0,
        }

    def _x_slice(self, k) -> slice:
        """Columns of x_k in z (k >= 1)."""
        return slice(STATE_DIM * (k - 1), STATE_DIM * k)

    def _pos_slice(self, k) -> slice:
        """Columns of the (x, y) position of x_k in z (k >= 1)."""
        start = STATE_DIM * (k - 1)
        return slice(start, start + 2)

    def _u_slice(self, k) -> slice:
        start = self.n_states + INPUT_DIM * k
        return slice(start, start + INPUT_DIM)


@dataclass
class OcpSolution:
    states: np.ndarray
    inputs: np.ndarray
    objective: float
    worst_case_cost_trace: np.ndarray
    status: SolveStatus
    omega_seq: np.ndarray
    outer_iterations: int
    z: np.ndarray
    report: SolveReport
    usable: bool = True

    @property
    def first_input(self) -> np.ndarray:
        return self.inputs[0].copy()


def stage_cost(x, u, u_prev_eff, omega, omega_prev, w: Weights, r_d) -> float:
    """(x - r_d)' Q (x - r_d) + du' R du with du = (u - w_bar) - (u_prev - w_prev_bar)."""
    e = _vec(x, STATE_DIM) - _vec(r_d, STATE_DIM)
    du = (_vec(u, INPUT_DIM) - _omega_bar(omega)) - (
        _vec(u_prev_eff, INPUT_DIM) - _omega_bar(omega_prev)
    )
    return float(e @ w.Q @ e + du @ w.R @ du)


def terminal_cost(xN, w: Weights, r_d) -> float:
    e = _vec(xN, STATE_DIM) - _vec(r_d, STATE_DIM)
    return float(e @ w.Q_T @ e)


def worst_case_omega(x, u, u_prev_eff, omega_prev, grid: DisturbanceGrid, w: Weights, r_d) -> np.ndarray:
    """Grid disturbance maximizing the stage cost.

    Ties go to the first pair in row-major order (w_x outer, w_y inner).
    """
    pairs = grid.pairs()
    if pairs.size == 0:
        raise ValueError("Disturbance grid is empty")
    e = _vec(x, STATE_DIM) - _vec(r_d, STATE_DIM)
    state_term = float(e @ w.Q @ e)
    base = _vec(u, INPUT_DIM) - (_vec(u_prev_eff, INPUT_DIM) - _omega_bar(omega_prev))
    W = np.zeros((pairs.shape[0], INPUT_DIM))
    W[:, :2] = pairs
    D = base - W
    costs = state_term + np.einsum("ij,jk,ik->i", D, w.R, D)
    best = int(np.argmax(costs))
    return np.array([pairs[best, 0], pairs[best, 1], 0.0])


def worst_case_sequence(problem: OcpProblem, z, grid: DisturbanceGrid) -> np.ndarray:
    """Per-stage worst-case disturbances along the predicted trajectory in z."""
    xs, us, _ = problem.unpack(z)
    seq = np.zeros((problem.N, INPUT_DIM))
    u_before, w_before = problem.u_prev, problem.omega_prev
    for k in range(problem.N):
        seq[k] = worst_case_omega(xs[k], us[k], u_before, w_before, grid, problem.weights, problem.r_d)
        u_before, w_before = us[k], seq[k]
    return seq


def stage_costs(problem: OcpProblem, z) -> np.ndarray:
    """L values along z with the problem's omega_seq."""
    xs, us, _ = problem.unpack(z)
    out = np.zeros(problem.N)
    u_before, w_before = problem.u_prev, problem.omega_prev
    for k in range(problem.N):
        out[k] = stage_cost(xs[k], us[k], u_before, problem.omega_seq[k], w_before,
                            problem.weights, problem.r_d)
        u_before, w_before = us[k], problem.omega_seq[k]
    return out


def cbf_residuals(problem: OcpProblem, z) -> np.ndarray:
    """Unscaled h(P_{k+1}) - (1 - gamma) h(P_k), stage-major, obstacles before borders."""
    xs, _, _ = problem.unpack(z)
    rows = []
    for k in range(problem.N):
        for obs in problem.obstacles:
            h0, h1 = obstacle_h(xs[k], obs, problem.vessel.r_a), obstacle_h(xs[k + 1], obs, problem.vessel.r_a)
            rows.append(h1 - (1.0 - problem.cbf.gamma_o) * h0)
        for line in problem.borders:
            h0, h1 = border_h(xs[k], line, problem.vessel), border_h(xs[k + 1], line, problem.vessel)
            rows.append(h1 - (1.0 - problem.cbf.gamma_b) * h0)
    return np.array(rows)


class _Transcription:
    """Callback bundle behind the NlpSpec; caches the dynamics sweep per z."""

    def __init__(self, problem: OcpProblem):
        self.p = problem
        v = problem.vessel
        pos0 = problem.x0[:2]
        self.scale_obs = np.array(
            [1.0 / max(1.0, abs(obstacle_h(pos0, o, v.r_a))) for o in problem.obstacles]
        )
        self.scale_border = np.array(
            [1.0 / max(1.0, abs(border_h(pos0, b, v))) for b in problem.borders]
        )
        self.corners = (
            np.column_stack([problem.grid.corners(), np.zeros(4)])
            if problem.minmax == "epigraph"
            else np.zeros((0, 3))
        )
        self._key = None
        self._sweep = None

    def _dynamics(self, z):
        key = np.asarray(z, dtype=float).tobytes()
        if key != self._key:
            p = self.p
            xs, us, _ = p.unpack(z)
            nxt, A, B = [], [], []
            for k in range(p.N):
                x_next, A_d, B_d = discrete_step_jacobians(xs[k], us[k], p.omega_seq[k], p.Ts, p.vessel)
                nxt.append(x_next)
                A.append(A_d)
                B.append(B_d)
            self._key, self._sweep = key, (xs, nxt, A, B)
        return self._sweep

    # objective

    def _deltas(self, us, omegas):
        p = self.p
        prev_u = np.vstack([p.u_prev, us[:-1]])
        prev_w = np.vstack([p.omega_prev, omegas[:-1]])
        return (us - omegas) - (prev_u - prev_w)

    def objective(self, z) -> float:
        p = self.p
        xs, us, s = p.unpack(z)
        total = terminal_cost(xs[p.N], p.weights, p.r_d)
        if p.minmax == "epigraph":
            return total + float(np.sum(s))
        return total + float(np.sum(stage_costs(p, z)))

    def objective_gradient(self, z) -> np.ndarray:
        p = self.p
        xs, us, _ = p.unpack(z)
        g = np.zeros(p.n_vars)
        g[p._x_slice(p.N)] = 2.0 * p.weights.Q_T @ (xs[p.N] - p.r_d)
        if p.minmax == "epigraph":
            g[p.n_states + p.n_inputs :] = 1.0
            return g
        for k in range(1, p.N):
            g[p._x_slice(k)] += 2.0 * p.weights.Q @ (xs[k] - p.r_d)
        D = self._deltas(us, p.omega_seq)
        for k in range(p.N):
            gk = 2.0 * p.weights.R @ D[k]
            g[p._u_slice(k)] += gk
            if k >= 1:
                g[p._u_slice(k - 1)] -= gk
        return g

    def objective_hessian(self, z) -> np.ndarray:
        p = self.p
        H = np.zeros((p.n_vars, p.n_vars))
        s = p._x_slice(p.N)
        H[s, s] = 2.0 * p.weights.Q_T
        if p.minmax == "epigraph":
            return H
        for k in range(1, p.N):
            s = p._x_slice(k)
            H[s, s] += 2.0 * p.weights.Q
        R2 = 2.0 * p.weights.R
        for k in range(p.N):
            a = p._u_slice(k)
            H[a, a] += R2
            if k >= 1:
                b = p._u_slice(k - 1)
                H[b, b] += R2
                H[a, b] -= R2
                H[b, a] -= R2
        return H

    # dynamics

    def equality(self, z) -> np.ndarray:
        xs, nxt, _, _ = self._dynamics(z)
        return np.concatenate([xs[k + 1] - nxt[k] for k in range(self.p.N)])

    def equality_jacobian(self, z) -> np.ndarray:
        p = self.p
        _, _, A, B = self._dynamics(z)
        J = np.zeros((p.N * STATE_DIM, p.n_vars))
        for k in range(p.N):
            rows = slice(STATE_DIM * k, STATE_DIM * (k + 1))
            J[rows, p._x_slice(k + 1)] = np.eye(STATE_DIM)
            if k >= 1:
                J[rows, p._x_slice(k)] = -A[k]
            J[rows, p._u_slice(k)] = -B[k]
        return J

    # inequalities: CBF rows, state-constraint hook rows, epigraph rows

    def inequality(self, z) -> np.ndarray:
        p = self.p
        xs, us, s = p.unpack(z)
        parts = []
        if p.obstacles or p.borders:
            res = cbf_residuals(p, z).reshape(p.N, -1)
            res = res * np.concatenate([self.scale_obs, self.scale_border])
            parts.append(res.ravel())
        for hook in p.state_constraints:
            parts.append(np.concatenate([hook.values(xs[k]) for k in range(1, p.N + 1)]))
        if p.minmax == "epigraph":
            rows = []
            u_before, w_before = p.u_prev, p.omega_prev
            for k in range(p.N):
                for c in self.corners:
                    rows.append(s[k] - stage_cost(xs[k], us[k], u_before, c, w_before, p.weights, p.r_d))
                u_before, w_before = us[k], p.omega_seq[k]
            parts.append(np.array(rows))
        return np.concatenate(parts) if parts else np.zeros(0)

    def inequality_jacobian(self, z) -> np.ndarray:
        p = self.p
        xs, us, _ = p.unpack(z)
        v = p.vessel
        blocks = []
        if p.obstacles or p.borders:
            n_per = len(p.obstacles) + len(p.borders)
            J = np.zeros((p.N * n_per, p.n_vars))
            row = 0
            for k in range(p.N):
                for i, obs in enumerate(p.obstacles):
                    sc, decay = self.scale_obs[i], 1.0 - p.cbf.gamma_o
                    J[row, p._pos_slice(k + 1)] = sc * obstacle_h_gradient(xs[k + 1], obs, v.r_a)
                    if k >= 1:
                        J[row, p._pos_slice(k)] = -sc * decay * obstacle_h_gradient(xs[k], obs, v.r_a)
                    row += 1
                for j, line in enumerate(p.borders):
                    sc, decay = self.scale_border[j], 1.0 - p.cbf.gamma_b
                    grad = border_h_gradient(xs[k + 1], line)
                    J[row, p._pos_slice(k + 1)] = sc * grad
                    if k >= 1:
                        J[row, p._pos_slice(k)] = -sc * decay * grad
                    row += 1
            blocks.append(J)
        for hook in p.state_constraints:
            J = np.zeros((p.N * hook.count, p.n_vars))
            for k in range(1, p.N + 1):
                J[hook.count * (k - 1) : hook.count * k, p._x_slice(k)] = hook.jacobian(xs[k])
            blocks.append(J)
        if p.minmax == "epigraph":
            J = np.zeros((4 * p.N, p.n_vars))
            u_before, w_before = p.u_prev, p.omega_prev
            for k in range(p.N):
                for c_idx, c in enumerate(self.corners):
                    row = 4 * k + c_idx
                    J[row, p.n_states + p.n_inputs + k] = 1.0
                    if k >= 1:
                        J[row, p._x_slice(k)] = -2.0 * p.weights.Q @ (xs[k] - p.r_d)
                    du = (us[k] - c) - (u_before - w_before)
                    J[row, p._u_slice(k)] = -2.0 * p.weights.R @ du
                    if k >= 1:
                        J[row, p._u_slice(k - 1)] = 2.0 * p.weights.R @ du
                u_before, w_before = us[k], p.omega_seq[k]
            blocks.append(J)
        return np.vstack(blocks) if blocks else np.zeros((0, p.n_vars))


def assemble(problem: OcpProblem) -> NlpSpec:
    """NLP for one horizon with the problem's omega_seq held fixed."""
    t = _Transcription(problem)
    lower = np.full(problem.n_vars, -np.inf)
    upper = np.full(problem.n_vars, np.inf)
    for k in range(problem.N):
        lower[problem._u_slice(k)] = problem.bounds.u_min
        upper[problem._u_slice(k)] = problem.bounds.u_max
    return NlpSpec(
        n_vars=problem.n_vars,
        objective=t.objective,
        objective_gradient=t.objective_gradient,
        equality=t.equality,
        equality_jacobian=t.equality_jacobian,
        inequality=t.inequality,
        inequality_jacobian=t.inequality_jacobian,
        lower=lower,
        upper=upper,
        objective_hessian=t.objective_hessian,
        sparsity={
            "horizon": problem.N,
            "state_dim": STATE_DIM,
            "input_dim": INPUT_DIM,
            "counts": problem.constraint_counts(),
        },
    )


def initial_guess(problem: OcpProblem) -> np.ndarray:
    """States held at x0, zero inputs."""
    return problem.pack(np.tile(problem.x0, (problem.N, 1)), np.zeros((problem.N, INPUT_DIM)))


def shift_solution(problem: OcpProblem, previous: OcpSolution) -> np.ndarray:
    """Previous solution advanced one step, last state and input repeated."""
    xs = previous.states[1:]
    xs = np.vstack([xs[1:], xs[-1:]])
    us = np.vstack([previous.inputs[1:], previous.inputs[-1:]])
    us = np.clip(us, problem.bounds.u_min, problem.bounds.u_max)
    if xs.shape[0] != problem.N:
        return initial_guess(problem)
    return problem.pack(xs, us)


def _fill_slacks(problem: OcpProblem, z) -> np.ndarray:
    """Set epigraph slacks to the largest corner stage cost so the start is feasible."""
    if problem.minmax != "epigraph":
        return z
    xs, us, _ = problem.unpack(z)
    corners = np.column_stack([problem.grid.corners(), np.zeros(4)])
    s = np.zeros(problem.N)
    u_before, w_before = problem.u_prev, problem.omega_prev
    for k in range(problem.N):
        s[k] = max(stage_cost(xs[k], us[k], u_before, c, w_before, problem.weights, problem.r_d)
                   for c in corners)
        u_before, w_before = us[k], problem.omega_seq[k]
    z = np.array(z, dtype=float)
    z[problem.n_states + problem.n_inputs :] = s
    return z


def solve_ocp(
    problem: OcpProblem,
    z0=None,
    grid: Optional[DisturbanceGrid] = None,
    opts: Optional[SolverOptions] = None,
    trace: Optional[TextIO] = None,
    max_outer: int = MAX_OUTER_ITERATIONS,
) -> OcpSolution:
    """Alternate worst-case selection and NLP solves until omega_seq repeats.

    With `grid=None` the problem's omega_seq is used as given and a single
    solve is made (the nominal controller passes zeros).
    """
    opts = opts or SolverOptions()
    z = initial_guess(problem) if z0 is None else _fill_slacks(problem, np.asarray(z0, dtype=float))

    current = problem
    if grid is not None:
        current = replace(problem, omega_seq=worst_case_sequence(problem, z, grid))

    outer = 0
    best = None
    for outer in range(1, max(1, max_outer) + 1):
        report = solve(assemble(current), _fill_slacks(current, z), opts, trace=trace)
        if not report.usable(opts.tol_feas):
            logger.debug("OCP solve failed at outer iteration %d: %s", outer, report.status.value)
            if best is None:
                best = (current, report, outer)
            break
        best = (current, report, outer)
        z = report.z_star
        if grid is None:
            break
        seq = worst_case_sequence(current, z, grid)
        if np.array_equal(seq, current.omega_seq):
            break
        if outer == max_outer:
            logger.debug("Outer min-max loop hit its cap of %d iterations", max_outer)
            break
        logger.debug("Worst-case disturbance sequence changed at outer iteration %d", outer)
        current = replace(current, omega_seq=seq)

    # a failed re-solve falls back to the last usable pair
    solved, report, outer = best
    xs, us, _ = solved.unpack(report.z_star)
    return OcpSolution(
        states=xs,
        inputs=us,
        objective=report.objective,
        worst_case_cost_trace=stage_costs(solved, report.z_star),
        status=report.status,
        omega_seq=solved.omega_seq.copy(),
        outer_iterations=outer,
        z=report.z_star,
        report=report,
        usable=report.usable(opts.tol_feas),
    )
