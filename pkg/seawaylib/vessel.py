# seawaylib/vessel.py
"""3-DOF surface vessel model.

    eta_dot = J(psi) nu
    (M_RB + M_A) nu_dot + (C_RB(nu) + C_A(nu) + D(nu)) nu = tau + tau_d

State vectors are always flattened as [x, y, psi, u, v, r]. One fixed-step
RK4 update (`discrete_step`) serves both as the predictor inside the optimal
control problem and as the simulated plant.
"""

import logging
from dataclasses import dataclass, fields
from typing import Union

import numpy as np

from seawaylib.config import read_toml
from seawaylib.errors import ParameterError, SingularMassError

logger = logging.getLogger(__name__)

STATE_DIM = 6
INPUT_DIM = 3

INJECTION_MODES = ("direct", "allocation")
CURRENT_MODELS = ("none",)


@dataclass(frozen=True)
class Pose:
    x: float
    y: float
    psi: float


@dataclass(frozen=True)
class Velocity:
    u: float
    v: float
    r: float

    def as_array(self) -> np.ndarray:
        return np.array([self.u, self.v, self.r], dtype=float)


@dataclass(frozen=True)
class State:
    eta: Pose
    nu: Velocity

    def as_array(self) -> np.ndarray:
        return np.array(
            [self.eta.x, self.eta.y, self.eta.psi, self.nu.u, self.nu.v, self.nu.r],
            dtype=float,
        )

    @classmethod
    def from_array(cls, arr) -> "State":
        a = np.asarray(arr, dtype=float).reshape(STATE_DIM)
        return cls(Pose(a[0], a[1], a[2]), Velocity(a[3], a[4], a[5]))

    @classmethod
    def at_rest(cls, x: float, y: float, psi: float = 0.0) -> "State":
        return cls(Pose(float(x), float(y), float(psi)), Velocity(0.0, 0.0, 0.0))


@dataclass(frozen=True)
class ControlInput:
    X: float
    Y: float
    N: float

    def as_array(self) -> np.ndarray:
        return np.array([self.X, self.Y, self.N], dtype=float)

    @classmethod
    def from_array(cls, arr) -> "ControlInput":
        a = np.asarray(arr, dtype=float).reshape(INPUT_DIM)
        return cls(a[0], a[1], a[2])


@dataclass(frozen=True)
class VesselParams:
    """Inertial, hydrodynamic and geometric constants.

    Damping coefficients are stored in the sign convention of
    d11 = X_u + X_absu_u|u| + X_uuu u_r^2 (and likewise for the other entries),
    so a dissipative hull has positive diagonal damping terms.
    """

    m: float
    I_z: float
    x_g: float
    X_du: float
    Y_dv: float
    Y_dr: float
    N_dv: float
    N_dr: float
    X_u: float
    X_absu_u: float
    X_uuu: float
    Y_v: float
    Y_absv_v: float
    Y_absr_v: float
    Y_r: float
    Y_absv_r: float
    Y_absr_r: float
    N_v: float
    N_absv_v: float
    N_absr_v: float
    N_r: float
    N_absv_r: float
    N_absr_r: float
    l_x: float
    l_y: float
    w: float
    l: float
    r_a: float
    disturbance_injection: str = "direct"
    current: str = "none"

    def __post_init__(self):
        for name in PARAM_KEYS:
            value = getattr(self, name)
            if not np.isfinite(value):
                raise ParameterError(f"Vessel parameter '{name}' is not finite: {value}")
        for name in ("m", "I_z", "w", "l", "r_a"):
            if getattr(self, name) <= 0:
                raise ParameterError(
                    f"Vessel parameter '{name}' must be > 0, got {getattr(self, name)}"
                )
        if self.disturbance_injection not in INJECTION_MODES:
            raise ParameterError(
                f"disturbance_injection must be one of {INJECTION_MODES}, "
                f"got {self.disturbance_injection!r}"
            )
        if self.current not in CURRENT_MODELS:
            raise ParameterError(
                f"current must be one of {CURRENT_MODELS}, got {self.current!r}"
            )
        M = mass_matrix(self)
        cond = np.linalg.cond(M)
        if not np.isfinite(cond) or cond > 1e12:
            raise SingularMassError(
                f"Total mass matrix M_RB + M_A is singular (condition number {cond:.3g})"
            )
        object.__setattr__(self, "_M_inv", np.linalg.inv(M))

    @property
    def M_inv(self) -> np.ndarray:
        return self._M_inv  # type: ignore[attr-defined]

    @property
    def half_diagonal(self) -> float:
        return float(np.hypot(self.w, self.l) / 2.0)

    @classmethod
    def from_mapping(cls, data, source="<mapping>") -> "VesselParams":
        missing = [k for k in PARAM_KEYS if k not in data]
        if missing:
            raise ParameterError(
                f"Vessel parameter file {source} is missing key '{missing[0]}'"
                + (f" (and {len(missing) - 1} more)" if len(missing) > 1 else "")
            )
        kwargs = {}
        for k in PARAM_KEYS:
            try:
                kwargs[k] = float(data[k])
            except (TypeError, ValueError):
                raise ParameterError(
                    f"Vessel parameter '{k}' in {source} is not a number: {data[k]!r}"
                ) from None
        for k in OPTION_KEYS:
            if k in data:
                kwargs[k] = str(data[k])
        return cls(**kwargs)

    def to_mapping(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


OPTION_KEYS = ("disturbance_injection", "current")
PARAM_KEYS = tuple(f.name for f in fields(VesselParams) if f.name not in OPTION_KEYS)


def load_vessel_params(path, overrides=None) -> VesselParams:
    """Load a flat key/value TOML parameter file; `overrides` replace file values."""
    try:
        data = read_toml(path)
    except FileNotFoundError:
        raise ParameterError(f"Vessel parameter file not found: {path}") from None
    except (OSError, ValueError) as e:
        raise ParameterError(f"Cannot parse vessel parameter file {path}: {e}") from None
    data.pop("provenance", None)
    if overrides:
        data.update(overrides)
    params = VesselParams.from_mapping(data, source=str(path))
    logger.debug("Loaded vessel parameters from %s (m=%g, I_z=%g)", path, params.m, params.I_z)
    return params


StateLike = Union[State, np.ndarray, list, tuple]


def _as_state_vector(s: StateLike) -> np.ndarray:
    if isinstance(s, State):
        return s.as_array()
    return np.asarray(s, dtype=float).reshape(STATE_DIM)


def _as_velocity_vector(nu) -> np.ndarray:
    if isinstance(nu, Velocity):
        return nu.as_array()
    return np.asarray(nu, dtype=float).reshape(3)


def _as_input_vector(tau) -> np.ndarray:
    if isinstance(tau, ControlInput):
        return tau.as_array()
    return np.asarray(tau, dtype=float).reshape(INPUT_DIM)


def rotation_matrix(psi: float) -> np.ndarray:
    c, s = np.cos(psi), np.sin(psi)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def _rotation_matrix_dpsi(psi: float) -> np.ndarray:
    c, s = np.cos(psi), np.sin(psi)
    return np.array([[-s, -c, 0.0], [c, -s, 0.0], [0.0, 0.0, 0.0]])


def rigid_body_mass(p: VesselParams) -> np.ndarray:
    return np.array(
        [
            [p.m, 0.0, 0.0],
            [0.0, p.m, p.m * p.x_g],
            [0.0, p.m * p.x_g, p.I_z],
        ]
    )


def added_mass(p: VesselParams) -> np.ndarray:
    return np.array(
        [
            [-p.X_du, 0.0, 0.0],
            [0.0, -p.Y_dv, -p.Y_dr],
            [0.0, -p.N_dv, -p.N_dr],
        ]
    )


def mass_matrix(p: VesselParams) -> np.ndarray:
    return rigid_body_mass(p) + added_mass(p)


def coriolis_rb(nu, p: VesselParams) -> np.ndarray:
    u, v, r = _as_velocity_vector(nu)
    a = p.m * (p.x_g * r + v)
    b = p.m * u
    return np.array([[0.0, 0.0, -a], [0.0, 0.0, b], [a, -b, 0.0]])


def coriolis_a(nu, nu_ref, p: VesselParams) -> np.ndarray:
    r = _as_velocity_vector(nu)[2]
    u_r, v_r, _ = _as_velocity_vector(nu_ref)
    c13 = p.Y_dv * v_r + 0.5 * (p.N_dv + p.Y_dr) * r
    c23 = -p.X_du * u_r
    return np.array([[0.0, 0.0, c13], [0.0, 0.0, c23], [-c13, -c23, 0.0]])


def damping(nu, nu_ref, p: VesselParams) -> np.ndarray:
    u, _, r = _as_velocity_vector(nu)
    u_r, v_r, _ = _as_velocity_vector(nu_ref)
    d11 = p.X_u + p.X_absu_u * abs(u) + p.X_uuu * u_r**2
    d22 = p.Y_v + p.Y_absv_v * abs(v_r) + p.Y_absr_v * abs(r)
    d23 = p.Y_r + p.Y_absv_r * abs(v_r) + p.Y_absr_r * abs(r)
    d32 = p.N_v + p.N_absv_v * abs(v_r) + p.N_absr_v * abs(r)
    d33 = p.N_r + p.N_absv_r * abs(v_r) + p.N_absr_r * abs(r)
    return np.array([[d11, 0.0, 0.0], [0.0, d22, d23], [0.0, d32, d33]])


def relative_velocity(nu, p: VesselParams) -> np.ndarray:
    """Velocity relative to the water; with `current = "none"` this is nu itself."""
    return _as_velocity_vector(nu)


def allocation_matrix(p: VesselParams) -> np.ndarray:
    return np.array(
        [
            [0.0, 0.0, 1.0],
            [1.0, 0.0, 0.0],
            [p.l_x, -p.l_y, p.l_y],
        ]
    )


def thruster_allocation(F, p: VesselParams) -> ControlInput:
    """Net body force/moment tau = B_T F from the three actuator forces."""
    F = np.asarray(F, dtype=float).reshape(3)
    return ControlInput.from_array(allocation_matrix(p) @ F)


def inverse_allocation(tau, p: VesselParams) -> np.ndarray:
    """Actuator forces F that produce `tau` (B_T is invertible whenever l_y != 0)."""
    B = allocation_matrix(p)
    return np.linalg.lstsq(B, _as_input_vector(tau), rcond=None)[0]


def disturbance_force(omega, p: VesselParams) -> np.ndarray:
    """Body-frame generalized force produced by the disturbance [w_x, w_y, *]."""
    w = np.asarray(omega, dtype=float).reshape(3)
    w = np.array([w[0], w[1], 0.0])
    if p.disturbance_injection == "allocation":
        return allocation_matrix(p) @ w
    return w


def _coupling_forces(nu: np.ndarray, p: VesselParams) -> np.ndarray:
    nu_r = relative_velocity(nu, p)
    N = coriolis_rb(nu, p) + coriolis_a(nu, nu_r, p) + damping(nu, nu_r, p)
    return N @ nu


def _coupling_jacobian(nu: np.ndarray, p: VesselParams) -> np.ndarray:
    """d/dnu of (C_RB + C_A + D)(nu) nu, with u_r = u and v_r = v."""
    u, v, r = nu
    nu_r = relative_velocity(nu, p)
    N = coriolis_rb(nu, p) + coriolis_a(nu, nu_r, p) + damping(nu, nu_r, p)
    su, sv, sr = np.sign(u), np.sign(v), np.sign(r)
    half = 0.5 * (p.N_dv + p.Y_dr)

    dN_du = np.array(
        [
            [p.X_absu_u * su + 2.0 * p.X_uuu * u, 0.0, 0.0],
            [0.0, 0.0, p.m - p.X_du],
            [0.0, -p.m + p.X_du, 0.0],
        ]
    )
    dN_dv = np.array(
        [
            [0.0, 0.0, -p.m + p.Y_dv],
            [0.0, p.Y_absv_v * sv, p.Y_absv_r * sv],
            [p.m - p.Y_dv, p.N_absv_v * sv, p.N_absv_r * sv],
        ]
    )
    dN_dr = np.array(
        [
            [0.0, 0.0, -p.m * p.x_g + half],
            [0.0, p.Y_absr_v * sr, p.Y_absr_r * sr],
            [p.m * p.x_g - half, p.N_absr_v * sr, p.N_absr_r * sr],
        ]
    )
    return N + np.column_stack([dN_du @ nu, dN_dv @ nu, dN_dr @ nu])


def continuous_dynamics(s: StateLike, tau, omega, p: VesselParams) -> np.ndarray:
    """State derivative [J(psi) nu ; M^-1 (tau + tau_d - (C_RB + C_A + D) nu)]."""
    x = _as_state_vector(s)
    nu = x[3:]
    eta_dot = rotation_matrix(x[2]) @ nu
    force = _as_input_vector(tau) + disturbance_force(omega, p) - _coupling_forces(nu, p)
    return np.concatenate([eta_dot, p.M_inv @ force])


def continuous_jacobians(s: StateLike, tau, omega, p: VesselParams):
    """Return (A, B) = (df/dx, df/dtau) of `continuous_dynamics`."""
    x = _as_state_vector(s)
    nu = x[3:]
    A = np.zeros((STATE_DIM, STATE_DIM))
    A[0:3, 2] = _rotation_matrix_dpsi(x[2]) @ nu
    A[0:3, 3:6] = rotation_matrix(x[2])
    A[3:6, 3:6] = -p.M_inv @ _coupling_jacobian(nu, p)
    B = np.zeros((STATE_DIM, INPUT_DIM))
    B[3:6, :] = p.M_inv
    return A, B


def _rk4(x, tau, omega, Ts, p):
    k1 = continuous_dynamics(x, tau, omega, p)
    k2 = continuous_dynamics(x + 0.5 * Ts * k1, tau, omega, p)
    k3 = continuous_dynamics(x + 0.5 * Ts * k2, tau, omega, p)
    k4 = continuous_dynamics(x + Ts * k3, tau, omega, p)
    return x + (Ts / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def discrete_step(s: StateLike, tau, omega, Ts: float, p: VesselParams):
    """One RK4 step of length Ts with tau and omega held constant.

    Returns a State when given a State, a 6-vector otherwise.
    """
    if Ts <= 0:
        raise ValueError(f"Sampling time must be positive, got {Ts}")
    x_next = _rk4(_as_state_vector(s), _as_input_vector(tau), omega, float(Ts), p)
    if isinstance(s, State):
        return State.from_array(x_next)
    return x_next


def discrete_step_jacobians(s: StateLike, tau, omega, Ts: float, p: VesselParams):
    """Return (x_next, A_d, B_d) with A_d = dx_next/dx and B_d = dx_next/dtau.

    Sensitivities are propagated forward through the four RK4 stages.
    """
    x = _as_state_vector(s)
    u = _as_input_vector(tau)
    h = float(Ts)
    eye = np.eye(STATE_DIM)

    x1 = x
    k1 = continuous_dynamics(x1, u, omega, p)
    A1, B = continuous_jacobians(x1, u, omega, p)
    dk1_dx, dk1_du = A1, B

    x2 = x + 0.5 * h * k1
    k2 = continuous_dynamics(x2, u, omega, p)
    A2, _ = continuous_jacobians(x2, u, omega, p)
    dk2_dx = A2 @ (eye + 0.5 * h * dk1_dx)
    dk2_du = A2 @ (0.5 * h * dk1_du) + B

    x3 = x + 0.5 * h * k2
    k3 = continuous_dynamics(x3, u, omega, p)
    A3, _ = continuous_jacobians(x3, u, omega, p)
    dk3_dx = A3 @ (eye + 0.5 * h * dk2_dx)
    dk3_du = A3 @ (0.5 * h * dk2_du) + B

    x4 = x + h * k3
    k4 = continuous_dynamics(x4, u, omega, p)
    A4, _ = continuous_jacobians(x4, u, omega, p)
    dk4_dx = A4 @ (eye + h * dk3_dx)
    dk4_du = A4 @ (h * dk3_du) + B

    x_next = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    A_d = eye + (h / 6.0) * (dk1_dx + 2.0 * dk2_dx + 2.0 * dk3_dx + dk4_dx)
    B_d = (h / 6.0) * (dk1_du + 2.0 * dk2_du + 2.0 * dk3_du + dk4_du)
    return x_next, A_d, B_d
