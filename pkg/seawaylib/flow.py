# seawaylib/flow.py
"""Sinusoidal water-flow field acting on the plant, and the quantized
disturbance set the robust optimizer maximizes over."""

from dataclasses import dataclass
from typing import Optional

import numpy as np

FLOW_BOUND = float(np.sqrt(2.0))


@dataclass(frozen=True)
class DisturbanceBounds:
    w_min: float
    w_max: float
    n_levels: int

    def __post_init__(self):
        if not self.w_min < self.w_max:
            raise ValueError(f"Disturbance bounds need w_min < w_max, got [{self.w_min}, {self.w_max}]")
        if int(self.n_levels) < 2:
            raise ValueError(f"Disturbance grid needs at least 2 levels, got {self.n_levels}")


@dataclass(frozen=True)
class DisturbanceGrid:
    levels_x: np.ndarray
    levels_y: np.ndarray

    @property
    def size(self) -> int:
        return len(self.levels_x) * len(self.levels_y)

    def pairs(self) -> np.ndarray:
        """All (w_x, w_y) pairs in row-major order (w_x outer, w_y inner)."""
        wx, wy = np.meshgrid(self.levels_x, self.levels_y, indexing="ij")
        return np.column_stack([wx.ravel(), wy.ravel()])

    def corners(self) -> np.ndarray:
        lx, ly = self.levels_x, self.levels_y
        return np.array([[lx[0], ly[0]], [lx[0], ly[-1]], [lx[-1], ly[0]], [lx[-1], ly[-1]]])

    def contains(self, omega, tol: float = 1e-12) -> bool:
        return bool(
            np.min(np.abs(self.levels_x - omega[0])) <= tol
            and np.min(np.abs(self.levels_y - omega[1])) <= tol
        )


def _levels(b: DisturbanceBounds) -> np.ndarray:
    levels = np.linspace(b.w_min, b.w_max, int(b.n_levels))
    levels[0], levels[-1] = b.w_min, b.w_max
    return levels


def make_grid(b: DisturbanceBounds, b_y: Optional[DisturbanceBounds] = None) -> DisturbanceGrid:
    """N_w uniformly spaced levels per axis, endpoints included.

    The same bounds are used for both axes unless `b_y` is given.
    """
    return DisturbanceGrid(_levels(b), _levels(b_y if b_y is not None else b))


def flow_force(x: float, y: float) -> float:
    return float(np.sqrt(np.sin(x + y) ** 2 + np.sin(x - y) ** 2))


def flow_angle(x: float, y: float) -> float:
    """Full-circle flow direction; 0 where the flow vanishes."""
    sp, sm = np.sin(x + y), np.sin(x - y)
    if sp == 0.0 and sm == 0.0:
        return 0.0
    return float(np.arctan2(sm, sp))


def realized_disturbance(x: float, y: float, amplitude: float = 1.0) -> np.ndarray:
    """Disturbance [f cos(beta), f sin(beta), 0] felt by the plant at (x, y)."""
    f = amplitude * flow_force(x, y)
    beta = flow_angle(x, y)
    return np.array([f * np.cos(beta), f * np.sin(beta), 0.0])


def flow_field(xs, ys, amplitude: float = 1.0):
    """Vectorized field on a mesh; returns (w_x, w_y) arrays shaped like the mesh."""
    X, Y = np.meshgrid(np.asarray(xs, dtype=float), np.asarray(ys, dtype=float), indexing="ij")
    sp, sm = np.sin(X + Y), np.sin(X - Y)
    f = amplitude * np.sqrt(sp**2 + sm**2)
    beta = np.where((sp == 0.0) & (sm == 0.0), 0.0, np.arctan2(sm, sp))
    return f * np.cos(beta), f * np.sin(beta)
