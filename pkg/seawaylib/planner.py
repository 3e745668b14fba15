# seawaylib/planner.py
"""Closed-loop receding-horizon control against the flow field, plus run comparison.

The scenario argument is a `seawaylib.scenario.ScenarioConfig`.
"""

import enum
import logging
from dataclasses import dataclass, field
from typing import Optional, TextIO

import numpy as np

from seawaylib.errors import ComparisonError, RunAborted
from seawaylib.flow import make_grid, realized_disturbance
from seawaylib.ocp import (
    HardBorderConstraint,
    OcpProblem,
    OcpSolution,
    shift_solution,
    solve_ocp,
    stage_cost,
)
from seawaylib.safety import safety_values
from seawaylib.vessel import INPUT_DIM, STATE_DIM, ControlInput, State, discrete_step

logger = logging.getLogger(__name__)

MAX_CONSECUTIVE_FAILURES = 2


class ControllerVariant(enum.Enum):
    RMPC_CBF = "rmpc_cbf"
    MPC_NOMINAL = "mpc_nominal"
    RMPC_HARD_BORDER = "rmpc_hard_border"

    @property
    def cli_name(self) -> str:
        return _CLI_NAMES[self]

    @property
    def robust(self) -> bool:
        return self is not ControllerVariant.MPC_NOMINAL

    @classmethod
    def parse(cls, name) -> "ControllerVariant":
        if isinstance(name, cls):
            return name
        key = str(name).strip().lower()
        for variant, cli in _CLI_NAMES.items():
            if key in (variant.value, cli):
                return variant
        choices = ", ".join(_CLI_NAMES.values())
        raise ValueError(f"Unknown controller variant {name!r} (choose from {choices})")


_CLI_NAMES = {
    ControllerVariant.RMPC_CBF: "rmpc-cbf",
    ControllerVariant.MPC_NOMINAL: "mpc",
    ControllerVariant.RMPC_HARD_BORDER: "rmpc-hard",
}


@dataclass
class PlannerMemory:
    """What one plan_step hands to the next."""

    u_prev: np.ndarray = field(default_factory=lambda: np.zeros(INPUT_DIM))
    omega_prev: np.ndarray = field(default_factory=lambda: np.zeros(INPUT_DIM))
    last_solution: Optional[OcpSolution] = None
    failures: int = 0


@dataclass
class StepDiagnostics:
    status: str
    usable: bool
    objective: float
    omega_wc: np.ndarray
    outer_iterations: int
    held: bool
    solution: OcpSolution


@dataclass
class LogRecord:
    t: float
    state: np.ndarray
    tau: np.ndarray
    omega_wc: np.ndarray
    omega_r: np.ndarray
    stage_cost: float
    objective: float
    h_obs: np.ndarray
    h_border: np.ndarray
    status: str
    outer_iterations: int
    flag: str = ""


@dataclass
class TrajectoryLog:
    scenario_hash: str
    variant: ControllerVariant
    Ts: float
    n_obstacles: int
    n_borders: int
    records: list = field(default_factory=list)
    reached_goal: bool = False
    aborted: bool = False
    abort_reason: str = ""
    final_state: Optional[np.ndarray] = None

    def __len__(self):
        return len(self.records)

    def column(self, name) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=float)

    @property
    def times(self) -> np.ndarray:
        return self.column("t")

    @property
    def states(self) -> np.ndarray:
        return np.array([r.state for r in self.records]).reshape(len(self.records), STATE_DIM)

    @property
    def taus(self) -> np.ndarray:
        return np.array([r.tau for r in self.records]).reshape(len(self.records), INPUT_DIM)

    @property
    def h_obs(self) -> np.ndarray:
        return np.array([r.h_obs for r in self.records]).reshape(len(self.records), self.n_obstacles)

    @property
    def h_border(self) -> np.ndarray:
        return np.array([r.h_border for r in self.records]).reshape(len(self.records), self.n_borders)

    def min_margin_series(self) -> np.ndarray:
        """min over all safety functions, per logged step."""
        h = np.hstack([self.h_obs, self.h_border])
        if h.shape[1] == 0:
            return np.full(len(self.records), np.inf)
        return h.min(axis=1)

    def min_margin(self) -> float:
        series = self.min_margin_series()
        return float(series.min()) if series.size else float("inf")

    def safety_violated(self, tol: float = 1e-5) -> bool:
        return self.min_margin() < -tol


def build_problem(state, memory: PlannerMemory, cfg, variant: ControllerVariant) -> OcpProblem:
    """The OCP solved at `state` for a given controller variant."""
    x0 = state.as_array() if isinstance(state, State) else np.asarray(state, dtype=float)
    borders = list(cfg.borders)
    hooks = []
    if variant is ControllerVariant.RMPC_HARD_BORDER:
        hooks = [HardBorderConstraint(borders, cfg.vessel)]
        borders = []
    robust = variant.robust
    return OcpProblem(
        N=cfg.N,
        x0=x0,
        r_d=cfg.r_d,
        u_prev=memory.u_prev,
        omega_prev=memory.omega_prev,
        weights=cfg.weights,
        bounds=cfg.input_bounds,
        obstacles=list(cfg.obstacles),
        borders=borders,
        cbf=cfg.cbf,
        omega_seq=np.zeros((cfg.N, INPUT_DIM)),
        vessel=cfg.vessel,
        Ts=cfg.Ts,
        minmax=cfg.minmax if robust else "alternating",
        grid=make_grid(cfg.disturbance) if robust else None,
        state_constraints=hooks,
    )


def plan_step(state, memory: PlannerMemory, cfg, variant=None, trace: Optional[TextIO] = None):
    """Solve the OCP at `state` and return (u0, diagnostics); updates `memory`.

    A failed solve holds the previous input. The second failure in a row
    raises RunAborted.
    """
    variant = ControllerVariant.parse(variant or cfg.variant)
    x0 = state.as_array() if isinstance(state, State) else np.asarray(state, dtype=float)
    if not np.all(np.isfinite(x0)):
        raise RunAborted(f"Non-finite vessel state {x0}")
    problem = build_problem(x0, memory, cfg, variant)
    z0 = shift_solution(problem, memory.last_solution) if memory.last_solution is not None else None
    sol = solve_ocp(
        problem,
        z0=z0,
        grid=problem.grid,
        opts=cfg.solver,
        trace=trace,
        max_outer=cfg.max_outer,
    )

    if sol.usable:
        tau = cfg.input_bounds.clip(sol.first_input)
        memory.failures = 0
        memory.last_solution = sol
        memory.omega_prev = sol.omega_seq[0].copy()
        held = False
    else:
        memory.failures += 1
        logger.warning(
            "OCP solve failed (%s); holding previous input %s (failure %d of %d)",
            sol.status.value, np.array2string(memory.u_prev, precision=3),
            memory.failures, MAX_CONSECUTIVE_FAILURES,
        )
        if memory.failures >= MAX_CONSECUTIVE_FAILURES:
            raise RunAborted(
                f"{memory.failures} consecutive solver failures (last status {sol.status.value})",
                hint="Try a smaller sampling time, a longer horizon, or hessian_init = \"objective\"",
            )
        tau = memory.u_prev.copy()
        memory.last_solution = None
        held = True
    memory.u_prev = tau.copy()

    diag = StepDiagnostics(
        status=sol.status.value,
        usable=sol.usable,
        objective=sol.objective,
        omega_wc=sol.omega_seq[0].copy(),
        outer_iterations=sol.outer_iterations,
        held=held,
        solution=sol,
    )
    return ControlInput.from_array(tau), diag


def _disturbance(cfg, x) -> np.ndarray:
    if not cfg.flow_enabled:
        return np.zeros(3)
    return realized_disturbance(x[0], x[1], cfg.flow_amplitude)


def _distance_to_goal(cfg, x) -> float:
    return float(np.hypot(x[0] - cfg.goal[0], x[1] - cfg.goal[1]))


def run_closed_loop(cfg, variant=None, trace: Optional[TextIO] = None, step_cap: Optional[int] = None) -> TrajectoryLog:
    """Plan, apply u0 to the disturbed plant, repeat until the goal tolerance or the step cap."""
    variant = ControllerVariant.parse(variant or cfg.variant)
    cap = int(step_cap or cfg.step_cap)
    log = TrajectoryLog(
        scenario_hash=cfg.config_hash,
        variant=variant,
        Ts=cfg.Ts,
        n_obstacles=len(cfg.obstacles),
        n_borders=len(cfg.borders),
    )
    memory = PlannerMemory()
    x = np.array([cfg.start[0], cfg.start[1], cfg.start[2], 0.0, 0.0, 0.0])
    w_r_prev = np.zeros(3)
    logger.info("Running %s on scenario %s (hash %s)", variant.cli_name, cfg.name, log.scenario_hash)

    for k in range(cap):
        t = k * cfg.Ts
        h_o, h_b = safety_values(x[:2], cfg.obstacles, cfg.borders, cfg.vessel)
        if _distance_to_goal(cfg, x) < cfg.tolerance:
            nan3 = np.full(3, np.nan)
            log.records.append(
                LogRecord(t, x.copy(), nan3, nan3[:2], nan3[:2], np.nan, np.nan, h_o, h_b, "goal", 0, "goal")
            )
            log.reached_goal = True
            break

        u_before = memory.u_prev.copy()
        try:
            tau, diag = plan_step(x, memory, cfg, variant, trace=trace)
        except RunAborted as e:
            logger.error("Run aborted at t=%.2f s: %s", t, e)
            log.aborted = True
            log.abort_reason = str(e)
            break
        tau = tau.as_array()
        w_r = _disturbance(cfg, x)
        realized = stage_cost(x, tau, u_before, w_r, w_r_prev, cfg.weights, cfg.r_d)
        log.records.append(
            LogRecord(
                t=t,
                state=x.copy(),
                tau=tau,
                omega_wc=diag.omega_wc[:2],
                omega_r=w_r[:2],
                stage_cost=realized,
                objective=diag.objective,
                h_obs=h_o,
                h_border=h_b,
                status=diag.status,
                outer_iterations=diag.outer_iterations,
                flag="hold" if diag.held else "",
            )
        )
        x = discrete_step(x, tau, w_r, cfg.Ts, cfg.vessel)
        w_r_prev = w_r
        if k % 25 == 0:
            logger.debug("t=%6.2f pos=(%.3f, %.3f) dist=%.3f", t, x[0], x[1], _distance_to_goal(cfg, x))

    log.final_state = x.copy()
    if not log.reached_goal:
        # terminal row: the last plant state with its safety values
        h_o, h_b = safety_values(x[:2], cfg.obstacles, cfg.borders, cfg.vessel)
        nan3 = np.full(3, np.nan)
        status = "aborted" if log.aborted else "step_cap"
        log.records.append(
            LogRecord(len(log.records) * cfg.Ts, x.copy(), nan3, nan3[:2], nan3[:2], np.nan, np.nan,
                      h_o, h_b, status, 0, "final")
        )
    if not log.reached_goal and not log.aborted:
        logger.warning("Step cap of %d reached %.3f m from the goal", cap, _distance_to_goal(cfg, x))
    return log


@dataclass
class ComparisonReport:
    scenario_hash: str
    labels: list
    time: np.ndarray
    series: dict
    summary: dict

    SERIES = ("speed", "tau_x", "tau_y", "tau_n", "cumulative_cost", "min_h")

    def delta(self, a: str, b: str) -> dict:
        """Per-series difference a - b on the common time grid."""
        return {name: self.series[a][name] - self.series[b][name] for name in self.SERIES}


def _pad(values, n) -> np.ndarray:
    out = np.full(n, np.nan)
    out[: len(values)] = values
    return out


def _summary(log: TrajectoryLog) -> dict:
    states = log.states
    taus = log.taus
    applied = np.all(np.isfinite(taus), axis=1)
    speed = np.hypot(states[:, 3], states[:, 4]) if len(states) else np.zeros(0)
    dtau = np.abs(np.diff(taus[applied], axis=0))
    objective = log.column("objective")
    objective = objective[np.isfinite(objective)]
    path = np.sum(np.hypot(np.diff(states[:, 0]), np.diff(states[:, 1]))) if len(states) > 1 else 0.0
    return {
        "arrival_time": float(log.records[-1].t) if log.reached_goal else float("nan"),
        "reached_goal": bool(log.reached_goal),
        "aborted": bool(log.aborted),
        "total_cost": float(np.nansum(log.column("stage_cost"))) if len(log) else 0.0,
        "min_margin": log.min_margin(),
        "max_dtau": float(dtau.max()) if dtau.size else 0.0,
        "rms_objective": float(np.sqrt(np.mean(objective**2))) if objective.size else float("nan"),
        "mean_speed": float(speed.mean()) if speed.size else 0.0,
        "path_length": float(path),
        "control_effort": float(np.sum(taus[applied] ** 2)),
        "steps": int(np.count_nonzero(applied)),
    }


def compare_runs(logs) -> ComparisonReport:
    """Align runs of the same scenario on a common time grid and summarize them."""
    logs = list(logs)
    if len(logs) < 2:
        raise ComparisonError(f"compare_runs needs at least 2 logs, got {len(logs)}")
    hashes = {log.scenario_hash for log in logs}
    if len(hashes) > 1:
        raise ComparisonError(f"Logs come from different scenarios (hashes {sorted(hashes)})")
    Ts = logs[0].Ts
    n = max(len(log) for log in logs)
    labels, series, summary = [], {}, {}
    for log in logs:
        label = log.variant.cli_name
        suffix = 2
        while label in series:
            label = f"{log.variant.cli_name}#{suffix}"
            suffix += 1
        labels.append(label)
        states, taus = log.states, log.taus
        cost = log.column("stage_cost")
        series[label] = {
            "speed": _pad(np.hypot(states[:, 3], states[:, 4]), n),
            "tau_x": _pad(taus[:, 0], n),
            "tau_y": _pad(taus[:, 1], n),
            "tau_n": _pad(taus[:, 2], n),
            "cumulative_cost": _pad(np.cumsum(np.nan_to_num(cost)), n),
            "min_h": _pad(log.min_margin_series(), n),
        }
        summary[label] = _summary(log)
    return ComparisonReport(
        scenario_hash=hashes.pop(),
        labels=labels,
        time=np.arange(n) * Ts,
        series=series,
        summary=summary,
    )
