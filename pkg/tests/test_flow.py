import numpy as np
import pytest

import seaway


def test_flow_force_examples():
    assert seaway.flow_force(0.0, 0.0) == 0.0
    assert seaway.flow_force(np.pi / 2, 0.0) == pytest.approx(np.sqrt(2))


def test_flow_angle_examples():
    assert seaway.flow_angle(np.pi / 2, 0.0) == pytest.approx(np.pi / 4)
    assert seaway.flow_angle(0.0, np.pi / 2) == pytest.approx(-np.pi / 4)
    assert seaway.flow_angle(0.0, 0.0) == 0.0


def test_realized_disturbance_examples():
    assert np.array_equal(seaway.realized_disturbance(0.0, 0.0), np.zeros(3))
    assert np.allclose(seaway.realized_disturbance(np.pi / 2, 0.0), [1.0, 1.0, 0.0])
    rng = np.random.default_rng(0)
    for x, y in rng.uniform(-10, 30, size=(50, 2)):
        w = seaway.realized_disturbance(x, y)
        assert np.hypot(w[0], w[1]) == pytest.approx(seaway.flow_force(x, y))
        assert w[2] == 0.0


def test_amplitude_scales_disturbance():
    w1 = seaway.realized_disturbance(1.0, 0.3)
    w15 = seaway.realized_disturbance(1.0, 0.3, amplitude=1.5)
    assert np.allclose(w15, 1.5 * w1)


def test_flow_bounded_over_channel_and_inside_modeled_box():
    xs = np.linspace(-2.0, 27.0, 200)
    ys = np.linspace(0.0, 6.0, 200)
    wx, wy = seaway.flow_field(xs, ys)
    force = np.hypot(wx, wy)
    assert force.max() <= np.sqrt(2) + 1e-12
    b = seaway.DisturbanceBounds(-np.sqrt(2), np.sqrt(2), 20)
    assert np.all((wx >= b.w_min - 1e-12) & (wx <= b.w_max + 1e-12))
    assert np.all((wy >= b.w_min - 1e-12) & (wy <= b.w_max + 1e-12))


def test_flow_field_matches_pointwise():
    xs = np.array([0.0, 1.0, 2.5])
    ys = np.array([0.5, 3.0])
    wx, wy = seaway.flow_field(xs, ys)
    assert wx.shape == (3, 2)
    for i, x in enumerate(xs):
        for j, y in enumerate(ys):
            w = seaway.realized_disturbance(x, y)
            assert wx[i, j] == pytest.approx(w[0])
            assert wy[i, j] == pytest.approx(w[1])


def test_make_grid_levels():
    g = seaway.make_grid(seaway.DisturbanceBounds(-np.sqrt(2), np.sqrt(2), 2))
    assert g.levels_x.tolist() == [-np.sqrt(2), np.sqrt(2)]
    g = seaway.make_grid(seaway.DisturbanceBounds(-np.sqrt(2), np.sqrt(2), 20))
    assert g.size == 400
    assert np.allclose(np.diff(g.levels_x), 2 * np.sqrt(2) / 19)
    assert g.levels_x[0] == -np.sqrt(2) and g.levels_x[-1] == np.sqrt(2)
    g = seaway.make_grid(seaway.DisturbanceBounds(-1.0, 1.0, 3))
    assert g.levels_x.tolist() == [-1.0, 0.0, 1.0]


def test_grid_pairs_row_major():
    g = seaway.make_grid(seaway.DisturbanceBounds(-1.0, 1.0, 3))
    pairs = g.pairs()
    assert pairs[0].tolist() == [-1.0, -1.0]
    assert pairs[1].tolist() == [-1.0, 0.0]
    assert pairs[3].tolist() == [0.0, -1.0]
    assert g.contains(pairs[4])
    assert not g.contains([0.5, 0.0])


def test_disturbance_bounds_validation():
    with pytest.raises(ValueError):
        seaway.DisturbanceBounds(1.0, -1.0, 5)
    with pytest.raises(ValueError):
        seaway.DisturbanceBounds(-1.0, 1.0, 1)


def test_flow_is_2pi_periodic():
    rng = np.random.default_rng(25)
    for x, y in rng.uniform(-10, 40, size=(500, 2)):
        w = seaway.realized_disturbance(x, y)
        for dx, dy in ((2 * np.pi, 0.0), (0.0, 2 * np.pi), (-2 * np.pi, 4 * np.pi)):
            assert seaway.flow_force(x + dx, y + dy) == pytest.approx(seaway.flow_force(x, y), abs=1e-12)
            assert np.allclose(seaway.realized_disturbance(x + dx, y + dy), w, atol=1e-12)
