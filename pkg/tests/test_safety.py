import dataclasses

import numpy as np
import pytest

import seaway


def _params(**overrides):
    p = seaway.load_vessel_params(seaway.shipped_vessel_path())
    return dataclasses.replace(p, **overrides) if overrides else p


def test_obstacle_h_examples():
    obs = seaway.Obstacle(5.0, 5.0, 1.0)
    assert seaway.obstacle_h((5.0, 6.5), obs, 0.5) == pytest.approx(0.0, abs=1e-15)
    assert seaway.obstacle_h((5.0, 5.0), obs, 0.5) == -1.0
    assert seaway.obstacle_h((5.0, 8.0), obs, 0.5) == pytest.approx(3.0)


def test_obstacle_rejects_nonpositive_radius():
    with pytest.raises(ValueError):
        seaway.Obstacle(0.0, 0.0, 0.0)


def test_border_distance_examples():
    assert seaway.border_distance((3, 2), seaway.BorderLine(0, 1, 0)) == 2.0
    assert seaway.border_distance((3, 2), seaway.BorderLine(0, -1, 6)) == 4.0
    line = seaway.BorderLine(1, 1, -1).normalized()
    assert seaway.border_distance((1, 1), line) == pytest.approx(1 / np.sqrt(2))


def test_border_h_uses_half_diagonal():
    p = _params(w=0.6, l=0.8)
    assert p.half_diagonal == pytest.approx(0.5)
    line = seaway.BorderLine(0, 1, 0)
    assert seaway.border_h((0, 0.5), line, p) == pytest.approx(0.0)
    assert seaway.border_h((0, 2.0), line, p) == pytest.approx(1.5)
    assert seaway.border_h((0, 0.2), line, p) == pytest.approx(-0.3)


def test_border_orientation_toward_point():
    line = seaway.BorderLine(0, 2, -12)  # y = 6, safe side above
    oriented = line.oriented_toward((0, 2))
    assert (oriented.a, oriented.b, oriented.c) == (-0.0, -1.0, 6.0)
    assert oriented.oriented_toward((0, 2)) == oriented
    with pytest.raises(ValueError):
        seaway.BorderLine(0, 0, 1)


def test_cbf_residual_examples():
    assert seaway.cbf_residual(1.0, 1.0, 0.5) == 0.5
    assert seaway.cbf_residual(0.0, 1.0, 1.0) == 0.0
    for h in (0.0, 0.3, 2.0):
        assert seaway.cbf_residual(h, 0.0, 0.4) == h


def test_cbf_params_range():
    seaway.CbfParams(0.15, 1.0)
    for bad in (0.0, -0.1, 1.5):
        with pytest.raises(ValueError):
            seaway.CbfParams(bad, 0.9)


def test_cbf_condition_keeps_safe_set_invariant():
    rng = np.random.default_rng(21)
    for gamma in (0.15, 0.9, 1.0):
        for _ in range(200):
            h = rng.uniform(0.0, 3.0)
            for _ in range(30):
                candidate = rng.uniform(-1.0, 3.0)
                if seaway.cbf_residual(candidate, h, gamma) >= 0:
                    h = candidate
                    assert h >= 0
        # slowest admissible decay stays on the boundary of the condition
        h = 2.0
        for _ in range(30):
            h_next = (1.0 - gamma) * h
            assert seaway.cbf_residual(h_next, h, gamma) == pytest.approx(0.0, abs=1e-12)
            assert h_next >= 0
            h = h_next


def test_obstacle_h_is_translation_invariant():
    rng = np.random.default_rng(22)
    for _ in range(200):
        obs = seaway.Obstacle(*rng.uniform(-20, 20, size=2), rng.uniform(0.1, 3.0))
        pos = rng.uniform(-20, 20, size=2)
        d = rng.uniform(-50, 50, size=2)
        moved = seaway.Obstacle(obs.ox + d[0], obs.oy + d[1], obs.radius)
        assert seaway.obstacle_h(pos + d, moved, 0.65) == pytest.approx(
            seaway.obstacle_h(pos, obs, 0.65), rel=1e-9, abs=1e-9
        )


def test_border_h_decreases_linearly_toward_line():
    p = _params()
    rng = np.random.default_rng(23)
    for _ in range(100):
        line = seaway.BorderLine(*rng.uniform(-3, 3, size=3)).normalized()
        pos = rng.uniform(-10, 10, size=2)
        normal = np.array([line.a, line.b])
        h0 = seaway.border_h(pos, line, p)
        for t in (0.1, 0.5, 2.0):
            assert seaway.border_h(pos - t * normal, line, p) == pytest.approx(h0 - t, abs=1e-9)
            assert seaway.border_h(pos + t * normal, line, p) == pytest.approx(h0 + t, abs=1e-9)


def test_border_normalization_is_idempotent():
    rng = np.random.default_rng(24)
    for _ in range(100):
        once = seaway.BorderLine(*rng.uniform(-5, 5, size=3)).normalized()
        twice = once.normalized()
        assert np.hypot(once.a, once.b) == pytest.approx(1.0, abs=1e-15)
        assert np.allclose([twice.a, twice.b, twice.c], [once.a, once.b, once.c], rtol=1e-15, atol=1e-15)
