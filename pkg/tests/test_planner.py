import dataclasses
import functools

import numpy as np
import pytest

import seaway
from seawaylib import planner
from seawaylib.planner import LogRecord, build_problem
from seawaylib.safety import safety_values


def _scenario(**changes):
    cfg = seaway.load_scenario(seaway.shipped_scenario_path())
    return dataclasses.replace(cfg, **changes) if changes else cfg


def _quick(**changes):
    """Shipped channel with a short horizon and a coarse disturbance grid."""
    base = dict(N=4, disturbance=seaway.DisturbanceBounds(-np.sqrt(2), np.sqrt(2), 5))
    base.update(changes)
    return _scenario(**base)


def _record(t, x, tau, cost=1.0, h_obs=(1.0, 2.0, 3.0), h_border=(0.5, 4.0)):
    return LogRecord(
        t=t,
        state=np.asarray(x, dtype=float),
        tau=np.asarray(tau, dtype=float),
        omega_wc=np.zeros(2),
        omega_r=np.zeros(2),
        stage_cost=cost,
        objective=10.0,
        h_obs=np.asarray(h_obs, dtype=float),
        h_border=np.asarray(h_border, dtype=float),
        status="converged",
        outer_iterations=1,
    )


def _synthetic_log(variant="rmpc-cbf", scenario_hash="abc", steps=4):
    log = seaway.TrajectoryLog(
        scenario_hash=scenario_hash,
        variant=seaway.ControllerVariant.parse(variant),
        Ts=0.2,
        n_obstacles=3,
        n_borders=2,
    )
    for k in range(steps):
        x = [0.5 * k, 2.0, 0.0, 1.0, 0.0, 0.0]
        log.records.append(_record(0.2 * k, x, [float(k), 0.0, -1.0]))
    return log


def _failed_solution(problem):
    N = problem.N
    return seaway.OcpSolution(
        states=np.zeros((N + 1, 6)),
        inputs=np.zeros((N, 3)),
        objective=float("nan"),
        worst_case_cost_trace=np.zeros(N),
        status=seaway.SolveStatus.INFEASIBLE_QP,
        omega_seq=np.zeros((N, 3)),
        outer_iterations=1,
        z=np.zeros(problem.n_vars),
        report=None,
        usable=False,
    )


def test_variant_names():
    V = seaway.ControllerVariant
    assert V.parse("rmpc-cbf") is V.RMPC_CBF
    assert V.parse("mpc_nominal") is V.MPC_NOMINAL
    assert V.parse("MPC") is V.MPC_NOMINAL
    assert V.parse("rmpc-hard") is V.RMPC_HARD_BORDER
    assert [v.cli_name for v in V] == ["rmpc-cbf", "mpc", "rmpc-hard"]
    with pytest.raises(ValueError, match="rmpc-cbf"):
        V.parse("lqr")


def test_build_problem_per_variant():
    cfg = _quick()
    x0 = np.array([0.0, 2.0, 0.0, 0.0, 0.0, 0.0])
    memory = seaway.PlannerMemory()
    robust = build_problem(x0, memory, cfg, seaway.ControllerVariant.RMPC_CBF)
    assert robust.grid is not None and len(robust.borders) == 2
    nominal = build_problem(x0, memory, cfg, seaway.ControllerVariant.MPC_NOMINAL)
    assert nominal.grid is None
    assert len(nominal.borders) == 2 and len(nominal.obstacles) == 3
    hard = build_problem(x0, memory, cfg, seaway.ControllerVariant.RMPC_HARD_BORDER)
    assert hard.borders == [] and len(hard.obstacles) == 3
    assert hard.constraint_counts()["state"] == 4 * 2


def test_plan_step_at_start_is_bounded():
    cfg = _quick()
    memory = seaway.PlannerMemory()
    start = seaway.State.at_rest(*cfg.start)
    tau, diag = seaway.plan_step(start, memory, cfg)
    u = tau.as_array()
    assert np.all(np.isfinite(u))
    assert np.all(np.abs(u) <= 8.0)
    assert diag.usable and not diag.held
    assert np.array_equal(memory.u_prev, u)
    assert memory.last_solution is diag.solution


def test_first_full_horizon_step_in_open_channel_is_solved():
    cfg = _scenario(obstacles=(), borders=(), flow_enabled=False)
    start = seaway.State.at_rest(*cfg.start)
    tau, diag = seaway.plan_step(start, seaway.PlannerMemory(), cfg, seaway.ControllerVariant.MPC_NOMINAL)
    assert diag.usable and not diag.held
    assert diag.status in ("converged", "max_iter")
    assert tau.as_array()[0] > 0


def test_robust_objective_bounds_nominal_objective():
    cfg = _quick(disturbance=seaway.DisturbanceBounds(-np.sqrt(2), np.sqrt(2), 21))
    start = seaway.State.at_rest(*cfg.start)
    _, robust = seaway.plan_step(start, seaway.PlannerMemory(), cfg, seaway.ControllerVariant.RMPC_CBF)
    _, nominal = seaway.plan_step(start, seaway.PlannerMemory(), cfg, seaway.ControllerVariant.MPC_NOMINAL)
    assert robust.usable and nominal.usable
    assert robust.objective >= nominal.objective


def test_plan_step_at_goal_is_near_zero():
    cfg = _quick(flow_enabled=False)
    memory = seaway.PlannerMemory()
    tau, diag = seaway.plan_step(cfg.r_d, memory, cfg, seaway.ControllerVariant.MPC_NOMINAL)
    assert np.allclose(tau.as_array(), 0.0, atol=1e-4)
    assert diag.objective == pytest.approx(0.0, abs=1e-6)


def test_plan_step_rejects_non_finite_state():
    cfg = _quick()
    with pytest.raises(seaway.RunAborted):
        seaway.plan_step([np.nan, 2, 0, 0, 0, 0], seaway.PlannerMemory(), cfg)


def test_short_closed_loop_run():
    cfg = _quick()
    log = seaway.run_closed_loop(cfg, step_cap=3)
    assert len(log) == 4
    assert np.allclose(log.times, [0.0, 0.2, 0.4, 0.6])
    assert log.scenario_hash == cfg.config_hash
    assert log.variant is seaway.ControllerVariant.RMPC_CBF
    assert not log.reached_goal and not log.aborted
    assert np.all(np.abs(log.taus[:-1]) <= 8.0)
    assert log.h_obs.shape == (4, 3) and log.h_border.shape == (4, 2)
    assert np.allclose(log.states[0], [0, 2, 0, 0, 0, 0])
    for r in log.records[:-1]:
        assert r.omega_r.shape == (2,)
        assert abs(np.hypot(*r.omega_r)) <= np.sqrt(2) + 1e-12


def test_step_cap_run_ends_with_final_state_row():
    cfg = _quick()
    log = seaway.run_closed_loop(cfg, step_cap=2)
    last = log.records[-1]
    assert (last.status, last.flag) == ("step_cap", "final")
    assert np.all(np.isnan(last.tau)) and np.isnan(last.stage_cost)
    assert np.array_equal(last.state, log.final_state)
    h_o, h_b = safety_values(log.final_state[:2], cfg.obstacles, cfg.borders, cfg.vessel)
    assert np.array_equal(last.h_obs, h_o) and np.array_equal(last.h_border, h_b)
    assert not np.allclose(log.final_state, log.states[-2])
    assert seaway.compare_runs([log, log]).summary["rmpc-cbf"]["steps"] == 2


def test_closed_loop_is_reproducible():
    cfg = _quick(N=3)
    a = seaway.run_closed_loop(cfg, seaway.ControllerVariant.MPC_NOMINAL, step_cap=2)
    b = seaway.run_closed_loop(cfg, seaway.ControllerVariant.MPC_NOMINAL, step_cap=2)
    assert np.array_equal(a.states, b.states)
    assert np.array_equal(a.taus, b.taus, equal_nan=True)


def test_start_within_tolerance_ends_with_goal_row():
    cfg = _quick(start=np.array([24.9, 3.0, 0.0]))
    log = seaway.run_closed_loop(cfg)
    assert log.reached_goal
    assert len(log) == 1
    row = log.records[0]
    assert row.status == "goal"
    assert np.all(np.isnan(row.tau))


def test_solver_failures_hold_then_abort(monkeypatch):
    monkeypatch.setattr(planner, "solve_ocp", lambda problem, **kw: _failed_solution(problem))
    cfg = _quick()
    log = seaway.run_closed_loop(cfg, step_cap=10)
    assert log.aborted
    assert "consecutive" in log.abort_reason
    assert len(log) == 2
    assert log.records[0].flag == "hold"
    assert np.array_equal(log.records[0].tau, np.zeros(3))
    last = log.records[-1]
    assert (last.status, last.flag) == ("aborted", "final")
    assert last.t == pytest.approx(0.2)
    assert np.array_equal(last.state, log.final_state)
    assert np.isfinite(log.min_margin())


def test_single_failure_holds_previous_input(monkeypatch):
    cfg = _quick()
    memory = seaway.PlannerMemory(u_prev=np.array([1.0, -2.0, 0.5]))
    monkeypatch.setattr(planner, "solve_ocp", lambda problem, **kw: _failed_solution(problem))
    tau, diag = seaway.plan_step(cfg.r_d, memory, cfg)
    assert diag.held and not diag.usable
    assert tau.as_array().tolist() == [1.0, -2.0, 0.5]
    assert memory.failures == 1
    with pytest.raises(seaway.RunAborted):
        seaway.plan_step(cfg.r_d, memory, cfg)


# -- logs and comparison --------------------------------------------------------


def test_log_margins():
    log = _synthetic_log()
    assert log.min_margin_series().tolist() == [0.5] * 4
    assert log.min_margin() == 0.5
    assert not log.safety_violated()
    log.records[2] = _record(0.4, [1, 2, 0, 1, 0, 0], [0, 0, 0], h_obs=(-0.1, 1, 1))
    assert log.min_margin() == -0.1
    assert log.safety_violated()


def test_compare_identical_logs_gives_zero_delta():
    a, b = _synthetic_log(), _synthetic_log()
    rep = seaway.compare_runs([a, b])
    assert rep.labels == ["rmpc-cbf", "rmpc-cbf#2"]
    assert np.allclose(rep.time, [0.0, 0.2, 0.4, 0.6])
    for name, diff in rep.delta("rmpc-cbf", "rmpc-cbf#2").items():
        assert np.all(diff == 0), name


def test_compare_summary_metrics():
    rep = seaway.compare_runs([_synthetic_log(), _synthetic_log("mpc", steps=2)])
    s = rep.summary["rmpc-cbf"]
    assert s["steps"] == 4
    assert s["max_dtau"] == 1.0
    assert s["total_cost"] == 4.0
    assert s["min_margin"] == 0.5
    assert s["path_length"] == pytest.approx(1.5)
    assert s["mean_speed"] == 1.0
    assert np.isnan(s["arrival_time"])
    # shorter run is padded on the common grid
    assert np.isnan(rep.series["mpc"]["tau_x"][3])
    assert rep.series["rmpc-cbf"]["cumulative_cost"].tolist() == [1.0, 2.0, 3.0, 4.0]


def test_compare_rejects_mismatched_scenarios():
    with pytest.raises(seaway.ComparisonError):
        seaway.compare_runs([_synthetic_log(), _synthetic_log(scenario_hash="other")])
    with pytest.raises(seaway.ComparisonError):
        seaway.compare_runs([_synthetic_log()])


# -- full-length runs on the shipped channel --------------------------------------


@functools.lru_cache(maxsize=None)
def _shipped_run(variant):
    return seaway.run_closed_loop(_scenario(), variant)


def _cbf_chain(h, gamma):
    """h_{k+1} - (1 - gamma) h_k per constraint along a logged run."""
    return h[1:] - (1.0 - gamma) * h[:-1]


@pytest.mark.slow
def test_robust_run_is_safe_and_reaches_goal():
    cfg = _scenario()
    log = seaway.run_closed_loop(cfg)
    assert log.reached_goal and not log.aborted
    assert len(log) <= cfg.step_cap
    assert log.min_margin() >= -1e-5
    assert np.all(np.abs(log.taus[:-1]) <= 8.0)


@pytest.mark.slow
def test_nominal_run_violates_safety_under_flow():
    violated = False
    for amplitude in (1.0, 1.5):
        cfg = _scenario().with_flow(amplitude=amplitude)
        log = seaway.run_closed_loop(cfg, seaway.ControllerVariant.MPC_NOMINAL)
        if log.safety_violated():
            violated = True
            break
    assert violated


@pytest.mark.slow
def test_open_channel_nominal_run_heads_for_goal():
    cfg = _scenario(obstacles=(), borders=(), flow_enabled=False)
    log = seaway.run_closed_loop(cfg, seaway.ControllerVariant.MPC_NOMINAL)
    assert log.reached_goal
    xy = log.states[:, :2]
    dist = np.hypot(xy[:, 0] - 25.0, xy[:, 1] - 3.0)
    tail = dist[5:]
    assert np.all(np.diff(tail) <= 1e-6)
    assert np.max(np.abs(xy[:, 1] - (2.0 + xy[:, 0] / 25.0))) < 0.5


@pytest.mark.slow
def test_all_variants_compare():
    logs = [_shipped_run(v) for v in seaway.ControllerVariant]
    rep = seaway.compare_runs(logs)
    assert rep.labels == ["rmpc-cbf", "mpc", "rmpc-hard"]
    for label in rep.labels:
        assert np.isfinite(rep.summary[label]["max_dtau"])
    assert rep.summary["rmpc-cbf"]["min_margin"] >= -1e-5


@pytest.mark.slow
def test_hard_border_variant_keeps_less_clearance():
    hard = _shipped_run(seaway.ControllerVariant.RMPC_HARD_BORDER)
    cbf = _shipped_run(seaway.ControllerVariant.RMPC_CBF)
    assert hard.reached_goal and not hard.aborted
    assert hard.h_border.min() >= -1e-5
    assert hard.h_border.min() < cbf.h_border.min()


@pytest.mark.slow
def test_robust_run_keeps_discrete_cbf_chain():
    cfg = _scenario()
    log = _shipped_run(seaway.ControllerVariant.RMPC_CBF)
    assert log.reached_goal
    assert np.all(_cbf_chain(log.h_obs, cfg.cbf.gamma_o) >= -1e-4)
    assert np.all(_cbf_chain(log.h_border, cfg.cbf.gamma_b) >= -1e-4)
