# seawaylib/api.py
from seawaylib.errors import (
    ComparisonError,
    DimensionError,
    NumericalFailure,
    ParameterError,
    RunAborted,
    ScenarioError,
    SeawayError,
    SingularMassError,
)
from seawaylib.flow import (
    FLOW_BOUND,
    DisturbanceBounds,
    DisturbanceGrid,
    flow_angle,
    flow_field,
    flow_force,
    make_grid,
    realized_disturbance,
)
from seawaylib.nlp import NlpSpec, SolveReport, SolverOptions, SolveStatus, check_gradients, gradients, solve
from seawaylib.ocp import (
    HardBorderConstraint,
    InputBounds,
    OcpProblem,
    OcpSolution,
    Weights,
    assemble,
    cbf_residuals,
    solve_ocp,
    stage_cost,
    terminal_cost,
    worst_case_omega,
)
from seawaylib.planner import (
    ComparisonReport,
    ControllerVariant,
    PlannerMemory,
    TrajectoryLog,
    compare_runs,
    plan_step,
    run_closed_loop,
)
from seawaylib.paths import shipped_scenario_path, shipped_vessel_path
from seawaylib.qp import QpStatus, solve_qp
from seawaylib.resolution import get_scenario_with_source
from seawaylib.safety import (
    BorderLine,
    CbfParams,
    Obstacle,
    border_distance,
    border_h,
    cbf_residual,
    obstacle_h,
)
from seawaylib.scenario import ScenarioConfig, load_scenario, scenario_hash
from seawaylib.tables import read_log, write_comparison, write_log, write_summary
from seawaylib.vessel import (
    ControlInput,
    Pose,
    State,
    Velocity,
    VesselParams,
    allocation_matrix,
    continuous_dynamics,
    coriolis_a,
    coriolis_rb,
    damping,
    discrete_step,
    discrete_step_jacobians,
    inverse_allocation,
    load_vessel_params,
    mass_matrix,
    rotation_matrix,
    thruster_allocation,
)

__all__ = [
    # errors
    "SeawayError",
    "ParameterError",
    "SingularMassError",
    "ScenarioError",
    "DimensionError",
    "NumericalFailure",
    "ComparisonError",
    "RunAborted",
    # vessel
    "Pose",
    "Velocity",
    "State",
    "ControlInput",
    "VesselParams",
    "load_vessel_params",
    "rotation_matrix",
    "mass_matrix",
    "coriolis_rb",
    "coriolis_a",
    "damping",
    "allocation_matrix",
    "thruster_allocation",
    "inverse_allocation",
    "continuous_dynamics",
    "discrete_step",
    "discrete_step_jacobians",
    # safety
    "Obstacle",
    "BorderLine",
    "CbfParams",
    "obstacle_h",
    "border_distance",
    "border_h",
    "cbf_residual",
    # flow
    "FLOW_BOUND",
    "DisturbanceBounds",
    "DisturbanceGrid",
    "make_grid",
    "flow_force",
    "flow_angle",
    "flow_field",
    "realized_disturbance",
    # solvers
    "QpStatus",
    "solve_qp",
    "NlpSpec",
    "SolverOptions",
    "SolveStatus",
    "SolveReport",
    "gradients",
    "check_gradients",
    "solve",
    # ocp
    "Weights",
    "InputBounds",
    "HardBorderConstraint",
    "OcpProblem",
    "OcpSolution",
    "stage_cost",
    "terminal_cost",
    "worst_case_omega",
    "assemble",
    "cbf_residuals",
    "solve_ocp",
    # planner
    "ControllerVariant",
    "PlannerMemory",
    "TrajectoryLog",
    "ComparisonReport",
    "plan_step",
    "run_closed_loop",
    "compare_runs",
    # scenario / io
    "ScenarioConfig",
    "load_scenario",
    "scenario_hash",
    "shipped_scenario_path",
    "shipped_vessel_path",
    "get_scenario_with_source",
    "write_log",
    "read_log",
    "write_comparison",
    "write_summary",
]
