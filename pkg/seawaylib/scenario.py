# seawaylib/scenario.py
import hashlib
import logging
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from seawaylib.config import dump_toml, read_toml
from seawaylib.errors import ParameterError, ScenarioError
from seawaylib.flow import DisturbanceBounds
from seawaylib.nlp import SolverOptions
from seawaylib.ocp import MAX_OUTER_ITERATIONS, MINMAX_MODES, InputBounds, Weights
from seawaylib.paths import resolve_reference
from seawaylib.planner import ControllerVariant
from seawaylib.safety import BorderLine, CbfParams, Obstacle, border_h, obstacle_h
from seawaylib.vessel import VesselParams, load_vessel_params

logger = logging.getLogger(__name__)

SCHEMA = "seaway-scenario/1"


@dataclass(frozen=True)
class ScenarioConfig:
    """A validated scenario. Borders are unit-normalized with P_i on their safe side."""

    name: str
    vessel: VesselParams
    vessel_ref: str
    obstacles: tuple
    borders: tuple
    start: np.ndarray
    goal: np.ndarray
    weights: Weights
    N: int
    Ts: float
    disturbance: DisturbanceBounds
    cbf: CbfParams
    input_bounds: InputBounds
    step_cap: int = 600
    tolerance: float = 0.3
    variant: ControllerVariant = ControllerVariant.RMPC_CBF
    minmax: str = "alternating"
    max_outer: int = MAX_OUTER_ITERATIONS
    flow_enabled: bool = True
    flow_amplitude: float = 1.0
    solver: SolverOptions = field(default_factory=SolverOptions)
    source: Optional[str] = None

    @property
    def r_d(self) -> np.ndarray:
        """Goal pose with zero velocities."""
        return np.array([self.goal[0], self.goal[1], self.goal[2], 0.0, 0.0, 0.0])

    @property
    def config_hash(self) -> str:
        return scenario_hash(self)

    def with_variant(self, variant) -> "ScenarioConfig":
        return replace(self, variant=ControllerVariant.parse(variant))

    def with_flow(self, enabled: Optional[bool] = None, amplitude: Optional[float] = None) -> "ScenarioConfig":
        return replace(
            self,
            flow_enabled=self.flow_enabled if enabled is None else bool(enabled),
            flow_amplitude=self.flow_amplitude if amplitude is None else float(amplitude),
        )

    def canonical(self) -> dict:
        """Everything that defines the physical scenario; the variant is not part of it."""
        return {
            "schema": SCHEMA,
            "vessel": self.vessel.to_mapping(),
            "obstacles": [[o.ox, o.oy, o.radius] for o in self.obstacles],
            "borders": [[b.a, b.b, b.c] for b in self.borders],
            "route": {
                "start": [float(v) for v in self.start],
                "goal": [float(v) for v in self.goal],
                "tolerance": float(self.tolerance),
                "step_cap": int(self.step_cap),
            },
            "controller": {
                "horizon": int(self.N),
                "Ts": float(self.Ts),
                "minmax": self.minmax,
                "max_outer": int(self.max_outer),
                "gamma_obstacle": float(self.cbf.gamma_o),
                "gamma_border": float(self.cbf.gamma_b),
                "u_min": [float(v) for v in self.input_bounds.u_min],
                "u_max": [float(v) for v in self.input_bounds.u_max],
            },
            "weights": {
                "Q": [float(v) for v in np.diag(self.weights.Q)],
                "Q_T": [float(v) for v in np.diag(self.weights.Q_T)],
                "R": [float(v) for v in np.diag(self.weights.R)],
            },
            "disturbance": {
                "w_min": float(self.disturbance.w_min),
                "w_max": float(self.disturbance.w_max),
                "levels": int(self.disturbance.n_levels),
            },
            "flow": {"enabled": bool(self.flow_enabled), "amplitude": float(self.flow_amplitude)},
        }


def _sorted(value):
    if isinstance(value, dict):
        return {k: _sorted(value[k]) for k in sorted(value)}
    if isinstance(value, list):
        return [_sorted(v) for v in value]
    return value


def scenario_hash(cfg: ScenarioConfig) -> str:
    """Short sha256 over the canonical TOML text (keys sorted, so load order is irrelevant)."""
    text = dump_toml(_sorted(cfg.canonical()))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


def _table(data, key, source):
    value = data.get(key, {})
    if not isinstance(value, dict):
        raise ScenarioError(f"{source}: [{key}] must be a table")
    return value


def _floats(value, n, name, source):
    try:
        arr = np.asarray(value, dtype=float).reshape(-1)
    except (TypeError, ValueError):
        raise ScenarioError(f"{source}: field '{name}' must be a list of {n} numbers") from None
    if arr.size != n:
        raise ScenarioError(f"{source}: field '{name}' must have {n} entries, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise ScenarioError(f"{source}: field '{name}' has non-finite entries")
    return arr


def _number(table, key, name, source, default=None, kind=float):
    if key not in table:
        if default is None:
            raise ScenarioError(f"{source}: missing field '{name}'")
        return default
    try:
        return kind(table[key])
    except (TypeError, ValueError):
        raise ScenarioError(f"{source}: field '{name}' must be a number, got {table[key]!r}") from None


def scenario_from_mapping(data: dict, source: str = "<scenario>", base_file: Optional[str] = None) -> ScenarioConfig:
    """Build and validate a ScenarioConfig from parsed TOML."""
    schema = data.get("schema", SCHEMA)
    if schema != SCHEMA:
        raise ScenarioError(f"{source}: unsupported schema {schema!r} (expected {SCHEMA!r})")

    vessel_ref = data.get("vessel", "cybership2.toml")
    if not isinstance(vessel_ref, str):
        raise ScenarioError(f"{source}: field 'vessel' must be a file reference")
    overrides = _table(data, "vessel_overrides", source)
    try:
        vessel = load_vessel_params(resolve_reference(vessel_ref, base_file), overrides or None)
    except ParameterError as e:
        raise ScenarioError(f"{source}: vessel: {e}", hint=e.hint) from None

    route = _table(data, "route", source)
    if "start" not in route or "goal" not in route:
        raise ScenarioError(f"{source}: [route] needs 'start' and 'goal' poses")
    start = _floats(route["start"], 3, "route.start", source)
    goal = _floats(route["goal"], 3, "route.goal", source)
    step_cap = _number(route, "step_cap", "route.step_cap", source, 600, int)
    tolerance = _number(route, "tolerance", "route.tolerance", source, 0.3)
    if step_cap < 1:
        raise ScenarioError(f"{source}: route.step_cap must be >= 1, got {step_cap}")
    if not tolerance > 0:
        raise ScenarioError(f"{source}: route.tolerance must be > 0, got {tolerance}")

    obstacles = []
    for i, item in enumerate(data.get("obstacles", [])):
        if not isinstance(item, dict) or "center" not in item or "radius" not in item:
            raise ScenarioError(f"{source}: obstacle {i} needs 'center' and 'radius'")
        center = _floats(item["center"], 2, f"obstacles[{i}].center", source)
        try:
            obstacles.append(Obstacle(float(center[0]), float(center[1]), float(item["radius"])))
        except (TypeError, ValueError) as e:
            raise ScenarioError(f"{source}: obstacle {i}: {e}") from None

    borders = []
    for j, item in enumerate(data.get("borders", [])):
        if not isinstance(item, dict) or "line" not in item:
            raise ScenarioError(f"{source}: border {j} needs 'line = [a, b, c]'")
        a, b, c = _floats(item["line"], 3, f"borders[{j}].line", source)
        try:
            line = BorderLine(float(a), float(b), float(c))
        except ValueError as e:
            raise ScenarioError(f"{source}: border {j}: {e}") from None
        oriented = line.oriented_toward(start)
        if oriented.a * line.a + oriented.b * line.b < 0:
            logger.info("Border %d flipped so that the start position is on its safe side", j)
        borders.append(oriented)

    ctrl = _table(data, "controller", source)
    N = _number(ctrl, "horizon", "controller.horizon", source, 10, int)
    Ts = _number(ctrl, "Ts", "controller.Ts", source, 0.2)
    if N < 1:
        raise ScenarioError(f"{source}: controller.horizon must be >= 1, got {N}")
    if not Ts > 0:
        raise ScenarioError(f"{source}: controller.Ts must be > 0, got {Ts}")
    minmax = str(ctrl.get("minmax", "alternating"))
    if minmax not in MINMAX_MODES:
        raise ScenarioError(f"{source}: controller.minmax must be one of {MINMAX_MODES}, got {minmax!r}")
    max_outer = _number(ctrl, "max_outer", "controller.max_outer", source, MAX_OUTER_ITERATIONS, int)
    try:
        variant = ControllerVariant.parse(ctrl.get("variant", "rmpc-cbf"))
        cbf = CbfParams(
            _number(ctrl, "gamma_obstacle", "controller.gamma_obstacle", source, 0.15),
            _number(ctrl, "gamma_border", "controller.gamma_border", source, 0.9),
        )
        bounds = InputBounds(
            _floats(ctrl.get("u_min", [-8.0, -8.0, -8.0]), 3, "controller.u_min", source),
            _floats(ctrl.get("u_max", [8.0, 8.0, 8.0]), 3, "controller.u_max", source),
        )
    except ValueError as e:
        raise ScenarioError(f"{source}: controller: {e}") from None

    wt = _table(data, "weights", source)
    try:
        weights = Weights.from_diagonals(
            _floats(wt.get("Q", [2, 2, 2, 1, 1, 1]), 6, "weights.Q", source),
            _floats(wt.get("Q_T", [3, 3, 3, 1, 1, 1]), 6, "weights.Q_T", source),
            _floats(wt.get("R", [0.1, 0.1, 0.01]), 3, "weights.R", source),
        )
    except ValueError as e:
        raise ScenarioError(f"{source}: weights: {e}") from None

    dist = _table(data, "disturbance", source)
    bound = float(np.sqrt(2.0))
    try:
        disturbance = DisturbanceBounds(
            _number(dist, "w_min", "disturbance.w_min", source, -bound),
            _number(dist, "w_max", "disturbance.w_max", source, bound),
            _number(dist, "levels", "disturbance.levels", source, 20, int),
        )
    except ValueError as e:
        raise ScenarioError(f"{source}: disturbance: {e}") from None

    flow = _table(data, "flow", source)
    amplitude = _number(flow, "amplitude", "flow.amplitude", source, 1.0)
    if amplitude < 0:
        raise ScenarioError(f"{source}: flow.amplitude must be >= 0, got {amplitude}")

    try:
        solver = SolverOptions.from_mapping(_table(data, "solver", source))
    except (TypeError, ValueError) as e:
        raise ScenarioError(f"{source}: solver: {e}") from None

    cfg = ScenarioConfig(
        name=str(data.get("name", "scenario")),
        vessel=vessel,
        vessel_ref=vessel_ref,
        obstacles=tuple(obstacles),
        borders=tuple(borders),
        start=start,
        goal=goal,
        weights=weights,
        N=N,
        Ts=Ts,
        disturbance=disturbance,
        cbf=cbf,
        input_bounds=bounds,
        step_cap=step_cap,
        tolerance=tolerance,
        variant=variant,
        minmax=minmax,
        max_outer=max_outer,
        flow_enabled=bool(flow.get("enabled", True)),
        flow_amplitude=amplitude,
        solver=solver,
        source=source,
    )
    validate_scenario(cfg)
    return cfg


def validate_scenario(cfg: ScenarioConfig):
    """Start and goal must be strictly safe for every obstacle and border."""
    src = cfg.source or "<scenario>"
    for label, pose in (("start", cfg.start), ("goal", cfg.goal)):
        for i, obs in enumerate(cfg.obstacles):
            if obstacle_h(pose[:2], obs, cfg.vessel.r_a) <= 0:
                raise ScenarioError(
                    f"{src}: route.{label} {tuple(pose[:2])} lies inside inflated obstacle {i} "
                    f"(center ({obs.ox}, {obs.oy}), radius {obs.radius} + r_a {cfg.vessel.r_a})"
                )
        for j, line in enumerate(cfg.borders):
            if border_h(pose[:2], line, cfg.vessel) <= 0:
                raise ScenarioError(
                    f"{src}: route.{label} {tuple(pose[:2])} is not strictly inside border {j} "
                    f"(clearance must exceed the half-diagonal {cfg.vessel.half_diagonal:.3f} m)"
                )


def load_scenario(path) -> ScenarioConfig:
    """Load, validate and sign-normalize a scenario file."""
    try:
        data = read_toml(path)
    except FileNotFoundError:
        raise ScenarioError(f"Scenario file not found: {path}") from None
    except (OSError, ValueError) as e:
        raise ScenarioError(f"Cannot parse scenario file {path}: {e}") from None
    cfg = scenario_from_mapping(data, source=str(path), base_file=str(path))
    logger.debug(
        "Loaded scenario %s from %s: %d obstacles, %d borders, hash %s",
        cfg.name, path, len(cfg.obstacles), len(cfg.borders), cfg.config_hash,
    )
    return cfg


def scenario_to_mapping(cfg: ScenarioConfig) -> dict:
    """Scenario as TOML-ready data (the inverse of scenario_from_mapping)."""
    data = cfg.canonical()
    data["name"] = cfg.name
    data["vessel"] = cfg.vessel_ref
    data["vessel_overrides"] = cfg.vessel.to_mapping()
    data["obstacles"] = [{"center": [o.ox, o.oy], "radius": o.radius} for o in cfg.obstacles]
    data["borders"] = [{"line": [b.a, b.b, b.c]} for b in cfg.borders]
    data["controller"]["variant"] = cfg.variant.cli_name
    data["solver"] = {
        k: getattr(cfg.solver, k) for k in cfg.solver.__dataclass_fields__
    }
    return data


def save_scenario(cfg: ScenarioConfig, path):
    with open(path, "w") as f:
        f.write(dump_toml(scenario_to_mapping(cfg)))
