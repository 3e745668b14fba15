# seawaylib/safety.py
"""Safety functions for circular obstacles and straight channel borders, and
the discrete-time barrier condition h_next - (1 - gamma) h_now >= 0."""

from dataclasses import dataclass

import numpy as np

from seawaylib.vessel import VesselParams


@dataclass(frozen=True)
class Obstacle:
    ox: float
    oy: float
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"Obstacle radius must be > 0, got {self.radius}")


@dataclass(frozen=True)
class BorderLine:
    """Line a x + b y + c = 0; the safe side has a x + b y + c >= 0."""

    a: float
    b: float
    c: float

    def __post_init__(self):
        if self.a == 0 and self.b == 0:
            raise ValueError("Border line needs (a, b) != (0, 0)")

    def normalized(self) -> "BorderLine":
        n = float(np.hypot(self.a, self.b))
        if n == 1.0:
            return self
        return BorderLine(self.a / n, self.b / n, self.c / n)

    def flipped(self) -> "BorderLine":
        return BorderLine(-self.a, -self.b, -self.c)

    def oriented_toward(self, point) -> "BorderLine":
        """Normalized copy whose safe side contains `point` (unchanged if it already does)."""
        line = self.normalized()
        if line.a * point[0] + line.b * point[1] + line.c < 0:
            return line.flipped()
        return line


@dataclass(frozen=True)
class CbfParams:
    gamma_o: float
    gamma_b: float

    def __post_init__(self):
        for name in ("gamma_o", "gamma_b"):
            g = getattr(self, name)
            if not 0 < g <= 1:
                raise ValueError(f"{name} must lie in (0, 1], got {g}")


def obstacle_h(pos, obs: Obstacle, r_a: float) -> float:
    rr = obs.radius + r_a
    dx, dy = pos[0] - obs.ox, pos[1] - obs.oy
    return -1.0 + (dx * dx + dy * dy) / (rr * rr)


def obstacle_h_gradient(pos, obs: Obstacle, r_a: float) -> np.ndarray:
    """d h / d(x, y)."""
    rr = obs.radius + r_a
    return np.array([2.0 * (pos[0] - obs.ox), 2.0 * (pos[1] - obs.oy)]) / (rr * rr)


def border_distance(pos, line: BorderLine) -> float:
    return (line.a * pos[0] + line.b * pos[1] + line.c) / float(np.hypot(line.a, line.b))


def border_h(pos, line: BorderLine, p: VesselParams) -> float:
    return border_distance(pos, line) - p.half_diagonal


def border_h_gradient(pos, line: BorderLine) -> np.ndarray:
    n = float(np.hypot(line.a, line.b))
    return np.array([line.a / n, line.b / n])


def cbf_residual(h_next: float, h_now: float, gamma: float) -> float:
    """(h_next - h_now) + gamma h_now; the barrier condition holds iff this is >= 0."""
    return (h_next - h_now) + gamma * h_now


def safety_values(pos, obstacles, borders, p: VesselParams):
    """(h_obs, h_border) arrays at a position, in scenario order."""
    h_o = np.array([obstacle_h(pos, o, p.r_a) for o in obstacles], dtype=float)
    h_b = np.array([border_h(pos, b, p) for b in borders], dtype=float)
    return h_o, h_b
