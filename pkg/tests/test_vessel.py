import dataclasses

import numpy as np
import pytest

import seaway


def _params(**overrides):
    return seaway.load_vessel_params(seaway.shipped_vessel_path(), overrides or None)


def _random_tuple(rng):
    """State, input and disturbance inside the envelope reachable with |tau| <= 8."""
    s = np.array(
        [
            rng.uniform(-5, 5),
            rng.uniform(-5, 5),
            rng.uniform(-np.pi, np.pi),
            rng.uniform(-1.0, 1.0),
            rng.uniform(-0.4, 0.4),
            rng.uniform(-0.4, 0.4),
        ]
    )
    tau = rng.uniform(-8, 8, size=3)
    omega = np.array([*rng.uniform(-np.sqrt(2), np.sqrt(2), size=2), 0.0])
    return s, tau, omega


def test_rotation_matrix_cases():
    assert np.array_equal(seaway.rotation_matrix(0.0), np.eye(3))
    J = seaway.rotation_matrix(np.pi / 2)
    assert np.allclose(J, [[0, -1, 0], [1, 0, 0], [0, 0, 1]], atol=1e-15)


def test_rotation_matrix_is_orthonormal():
    rng = np.random.default_rng(0)
    for psi in rng.uniform(-10.0, 10.0, size=1000):
        J = seaway.rotation_matrix(psi)
        assert np.max(np.abs(J @ J.T - np.eye(3))) <= 1e-12
        assert abs(np.linalg.det(J) - 1.0) <= 1e-12


def test_coriolis_matrices_are_skew_symmetric():
    p = _params()
    assert np.array_equal(seaway.coriolis_rb([0, 0, 0], p), np.zeros((3, 3)))
    rng = np.random.default_rng(1)
    for _ in range(20):
        nu = rng.uniform(-2, 2, size=3)
        C_rb = seaway.coriolis_rb(nu, p)
        C_a = seaway.coriolis_a(nu, nu, p)
        assert np.array_equal(C_rb + C_rb.T, np.zeros((3, 3)))
        assert np.array_equal(C_a + C_a.T, np.zeros((3, 3)))


def test_coriolis_rb_hand_expansion():
    p = _params()
    u, v, r = 1.0, 0.5, 0.2
    C = seaway.coriolis_rb([u, v, r], p)
    assert C[0, 2] == pytest.approx(-p.m * (p.x_g * r + v))
    assert C[1, 2] == pytest.approx(p.m * u)
    assert C[2, 0] == pytest.approx(p.m * (p.x_g * r + v))
    assert C[2, 1] == pytest.approx(-p.m * u)
    assert C[0, 0] == C[0, 1] == C[1, 0] == C[1, 1] == C[2, 2] == 0.0


def test_damping_structure_and_values():
    p = _params()
    D0 = seaway.damping([0, 0, 0], [0, 0, 0], p)
    assert D0[0, 0] == p.X_u
    assert D0[1, 1] == p.Y_v
    assert D0[1, 2] == p.Y_r
    assert D0[2, 1] == p.N_v
    assert D0[2, 2] == p.N_r

    nu = [1.0, 0.3, 0.1]
    D = seaway.damping(nu, nu, p)
    for i, j in ((0, 1), (0, 2), (1, 0), (2, 0)):
        assert D[i, j] == 0.0
    assert D[1, 1] == pytest.approx(p.Y_v + p.Y_absv_v * 0.3 + p.Y_absr_v * 0.1)
    # dissipative hull: positive surge and sway damping
    assert D[0, 0] > 0 and D[1, 1] > 0


def test_thruster_allocation_examples():
    p = _params(l_x=0.5, l_y=0.2)
    assert seaway.thruster_allocation([0, 0, 0], p).as_array().tolist() == [0.0, 0.0, 0.0]
    assert np.allclose(seaway.thruster_allocation([1, 0, 0], p).as_array(), [0, 1, 0.5])
    assert np.allclose(seaway.thruster_allocation([0, 1, 1], p).as_array(), [1, 0, 0], atol=1e-15)
    tau = np.array([2.0, -1.0, 0.3])
    F = seaway.inverse_allocation(tau, p)
    assert np.allclose(seaway.allocation_matrix(p) @ F, tau)


def test_continuous_dynamics_equilibrium_and_kinematics():
    p = _params()
    rest = seaway.State.at_rest(1.0, 2.0, 0.4)
    assert np.array_equal(seaway.continuous_dynamics(rest, [0, 0, 0], [0, 0, 0], p), np.zeros(6))
    s = np.array([0.0, 0.0, 0.0, 1.0, 0.0, 0.0])
    xdot = seaway.continuous_dynamics(s, [0, 0, 0], [0, 0, 0], p)
    assert np.allclose(xdot[:3], [1.0, 0.0, 0.0])


def test_continuous_dynamics_matches_independent_evaluator():
    p = _params()
    s = np.array([1.0, -2.0, 0.7, 0.8, -0.2, 0.15])
    tau = np.array([1.0, 0.0, 0.0])
    u, v, r = s[3:]

    M = np.array(
        [
            [p.m - p.X_du, 0, 0],
            [0, p.m - p.Y_dv, p.m * p.x_g - p.Y_dr],
            [0, p.m * p.x_g - p.N_dv, p.I_z - p.N_dr],
        ]
    )
    c13 = -p.m * (p.x_g * r + v) + p.Y_dv * v + 0.5 * (p.N_dv + p.Y_dr) * r
    c23 = p.m * u - p.X_du * u
    C = np.array([[0, 0, c13], [0, 0, c23], [-c13, -c23, 0]])
    D = np.array(
        [
            [p.X_u + p.X_absu_u * abs(u) + p.X_uuu * u * u, 0, 0],
            [0, p.Y_v + p.Y_absv_v * abs(v) + p.Y_absr_v * abs(r), p.Y_r + p.Y_absv_r * abs(v) + p.Y_absr_r * abs(r)],
            [0, p.N_v + p.N_absv_v * abs(v) + p.N_absr_v * abs(r), p.N_r + p.N_absv_r * abs(v) + p.N_absr_r * abs(r)],
        ]
    )
    c, sn = np.cos(s[2]), np.sin(s[2])
    eta_dot = np.array([c * u - sn * v, sn * u + c * v, r])
    nu_dot = np.linalg.solve(M, tau - (C + D) @ s[3:])

    got = seaway.continuous_dynamics(s, tau, [0, 0, 0], p)
    assert np.allclose(got, np.concatenate([eta_dot, nu_dot]), rtol=1e-12, atol=1e-12)


def test_discrete_step_fixed_point_and_types():
    p = _params()
    rest = seaway.State.at_rest(3.0, 1.0, -0.2)
    nxt = seaway.discrete_step(rest, seaway.ControlInput(0, 0, 0), [0, 0, 0], 0.2, p)
    assert isinstance(nxt, seaway.State)
    assert nxt == rest
    with pytest.raises(ValueError):
        seaway.discrete_step(rest, [0, 0, 0], [0, 0, 0], 0.0, p)


def test_rk4_agrees_with_fine_step_reference():
    p = _params()
    rng = np.random.default_rng(7)
    Ts, substeps = 0.2, 200
    for _ in range(100):
        s, tau, omega = _random_tuple(rng)
        rk4 = seaway.discrete_step(s, tau, omega, Ts, p)
        x = s.copy()
        for _ in range(substeps):
            x = seaway.discrete_step(x, tau, omega, Ts / substeps, p)
        assert np.all(np.abs(rk4 - x) <= 1e-4 * np.maximum(1.0, np.abs(x)))


def test_rk4_tracks_fine_euler_at_rest_start():
    p = _params()
    tau = np.array([8.0, -8.0, 8.0])
    omega = np.array([1.0, 1.0, 0.0])
    rk4 = seaway.discrete_step(np.zeros(6), tau, omega, 0.2, p)
    x, h = np.zeros(6), 0.2 / 2000
    for _ in range(2000):
        x = x + h * seaway.continuous_dynamics(x, tau, omega, p)
    assert np.all(np.abs(rk4 - x) <= 1e-4 * np.maximum(1.0, np.abs(x)))


def test_disturbance_divergence_grows_from_rest():
    p = _params()
    a = b = np.zeros(6)
    gaps = []
    for _ in range(5):
        a = seaway.discrete_step(a, [0, 0, 0], [0, 0, 0], 0.2, p)
        b = seaway.discrete_step(b, [0, 0, 0], [0.1, 0, 0], 0.2, p)
        gaps.append(b[0] - a[0])
    assert all(g2 > g1 for g1, g2 in zip(gaps, gaps[1:]))


def test_discrete_step_jacobians_match_finite_differences():
    p = _params()
    rng = np.random.default_rng(3)
    eps = 1e-6
    for _ in range(100):
        s, tau, omega = _random_tuple(rng)
        x_next, A, B = seaway.discrete_step_jacobians(s, tau, omega, 0.2, p)
        assert np.allclose(x_next, seaway.discrete_step(s, tau, omega, 0.2, p))
        for j in range(6):
            e = np.zeros(6)
            e[j] = eps
            fd = (seaway.discrete_step(s + e, tau, omega, 0.2, p) - seaway.discrete_step(s - e, tau, omega, 0.2, p)) / (2 * eps)
            assert np.allclose(A[:, j], fd, rtol=1e-4, atol=1e-6)
        for j in range(3):
            e = np.zeros(3)
            e[j] = eps
            fd = (seaway.discrete_step(s, tau + e, omega, 0.2, p) - seaway.discrete_step(s, tau - e, omega, 0.2, p)) / (2 * eps)
            assert np.allclose(B[:, j], fd, rtol=1e-4, atol=1e-6)


def test_allocation_injection_uses_thruster_map():
    p = _params(disturbance_injection="allocation")
    w = np.array([0.5, -0.3, 0.0])
    rest = np.zeros(6)
    direct = seaway.continuous_dynamics(rest, seaway.allocation_matrix(p) @ w, [0, 0, 0], p)
    injected = seaway.continuous_dynamics(rest, [0, 0, 0], w, p)
    assert np.allclose(direct, injected)


def test_missing_parameter_is_named(tmp_path):
    text = seaway.shipped_vessel_path().read_text()
    lines = [ln for ln in text.splitlines() if not ln.startswith("Y_absv_v")]
    path = tmp_path / "vessel.toml"
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(seaway.ParameterError, match="Y_absv_v"):
        seaway.load_vessel_params(path)


def test_singular_mass_matrix_rejected():
    p = _params()
    with pytest.raises(seaway.SingularMassError):
        dataclasses.replace(p, m=2.0, X_du=2.0)


def test_unknown_current_model_rejected():
    with pytest.raises(seaway.ParameterError, match="current"):
        _params(current="tidal")
