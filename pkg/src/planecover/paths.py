"""Sampled geodesic paths and a fixed-step RK4 stepper."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import CubicHermiteSpline


class NonEscaping(ValueError):
    """Raised when a path has not left a region by the end of its domain."""


@dataclass(eq=False)
class GeodesicPath:
    """A geodesic in some ambient chart.

    ``points``/``velocities`` are chart samples at ``times``.  If
    ``closed_form`` is given it is used for evaluation; otherwise samples are
    interpolated with cubic Hermite splines.
    """

    times: np.ndarray
    points: np.ndarray
    velocities: np.ndarray
    provenance: str = "ode"
    speed: float = 1.0
    closed_form: Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]] | None = None
    extra: dict = field(default_factory=dict)
    _spline: CubicHermiteSpline | None = field(default=None, repr=False)

    @property
    def domain(self) -> tuple[float, float]:
        return float(self.times[0]), float(self.times[-1])

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def eval(self, t):
        """(point, velocity) at time(s) ``t``."""
        t = np.asarray(t, dtype=float)
        if self.closed_form is not None:
            return self.closed_form(t)
        if self._spline is None:
            self._spline = CubicHermiteSpline(self.times, self.points, self.velocities, axis=0)
        return self._spline(t), self._spline(t, 1)

    def position(self, t):
        return self.eval(t)[0]

    def reversed(self) -> "GeodesicPath":
        """Same curve traversed backwards, t -> -t."""
        cf = None
        if self.closed_form is not None:
            f = self.closed_form

            def cf(t):
                p, v = f(-np.asarray(t, dtype=float))
                return p, -v

        return GeodesicPath(-self.times[::-1], self.points[::-1], -self.velocities[::-1],
                            self.provenance, self.speed, cf, dict(self.extra))


def closed_form_path(func, t_min: float, t_max: float, speed: float = 1.0,
                     num: int = 401, provenance: str = "closed-form", **extra) -> GeodesicPath:
    """Wrap a closed form ``t -> (points, velocities)`` with reference samples on a grid."""
    ts = np.linspace(t_min, t_max, num)
    p, v = func(ts)
    return GeodesicPath(ts, np.asarray(p), np.asarray(v), provenance, speed, func, dict(extra))


def rk4_step(rhs, y, h):
    k1 = rhs(y)
    k2 = rhs(y + 0.5 * h * k1)
    k3 = rhs(y + 0.5 * h * k2)
    k4 = rhs(y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def rk4_integrate(rhs, y0, h, n_steps):
    ys = np.empty((n_steps + 1, len(y0)))
    ys[0] = y0
    y = np.asarray(y0, dtype=float)
    for k in range(n_steps):
        y = rk4_step(rhs, y, h)
        ys[k + 1] = y
    return ys
