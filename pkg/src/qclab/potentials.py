"""External potentials, evaluable on a grid or at arbitrary points.

The analytic kinds (free, harmonic, barrier) carry exact derivatives,
which the characteristic integrators need.  The barrier is a Gaussian
bump so it stays smooth (a hard-edged step would break the spectral and
characteristic machinery).  Tabulated potentials interpolate with a
periodic cubic spline.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .grids import SpatialGrid, check_field


@dataclass(frozen=True)
class PotentialSpec:
    kind: str  # free | harmonic | barrier | tabulated
    omega: float = 0.0
    height: float = 0.0
    width: float = 0.0
    center: float = 0.0
    samples: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        if self.kind not in ("free", "harmonic", "barrier", "tabulated"):
            raise ValueError(f"unknown potential kind {self.kind!r}")
        if self.kind == "harmonic" and self.omega <= 0:
            raise ValueError("harmonic potential needs omega > 0")
        if self.kind == "barrier" and self.width <= 0:
            raise ValueError("barrier potential needs width > 0")
        if self.kind == "tabulated":
            if self.samples is None:
                raise ValueError("tabulated potential needs samples")
            if not np.all(np.isfinite(self.samples)):
                raise ValueError("tabulated potential samples must be finite")


def free() -> PotentialSpec:
    return PotentialSpec(kind="free")


def harmonic(omega: float) -> PotentialSpec:
    return PotentialSpec(kind="harmonic", omega=float(omega))


def barrier(height: float, width: float, center: float = 0.0) -> PotentialSpec:
    return PotentialSpec(kind="barrier", height=float(height), width=float(width), center=float(center))


def tabulated(samples: np.ndarray) -> PotentialSpec:
    return PotentialSpec(kind="tabulated", samples=np.asarray(samples, dtype=float))


class Potential:
    """A PotentialSpec bound to a grid and a mass, ready to evaluate."""

    def __init__(self, spec: PotentialSpec, grid: SpatialGrid, m: float):
        self.spec = spec
        self.grid = grid
        self.m = float(m)
        if spec.kind == "tabulated":
            samples = check_field(spec.samples, grid)
            # periodic spline so values and slopes exist off-grid
            xs = np.append(grid.x, grid.x_max)
            vs = np.append(samples, samples[0])
            self._spline = CubicSpline(xs, vs, bc_type="periodic")
        else:
            self._spline = None

    def values(self, x: np.ndarray | None = None) -> np.ndarray:
        x = self.grid.x if x is None else np.asarray(x, dtype=float)
        s = self.spec
        if s.kind == "free":
            return np.zeros_like(x)
        if s.kind == "harmonic":
            return 0.5 * self.m * s.omega ** 2 * x ** 2
        if s.kind == "barrier":
            return s.height * np.exp(-((x - s.center) ** 2) / (2.0 * s.width ** 2))
        return self._spline(self._wrap(x))

    def derivative(self, x: np.ndarray | None = None) -> np.ndarray:
        x = self.grid.x if x is None else np.asarray(x, dtype=float)
        s = self.spec
        if s.kind == "free":
            return np.zeros_like(x)
        if s.kind == "harmonic":
            return self.m * s.omega ** 2 * x
        if s.kind == "barrier":
            return -((x - s.center) / s.width ** 2) * self.values(x)
        return self._spline(self._wrap(x), 1)

    def curvature(self, x: np.ndarray | None = None) -> np.ndarray:
        x = self.grid.x if x is None else np.asarray(x, dtype=float)
        s = self.spec
        if s.kind == "free":
            return np.zeros_like(x)
        if s.kind == "harmonic":
            return np.full_like(x, self.m * s.omega ** 2)
        if s.kind == "barrier":
            g = (x - s.center) / s.width ** 2
            return (g ** 2 - 1.0 / s.width ** 2) * self.values(x)
        return self._spline(self._wrap(x), 2)

    def _wrap(self, x: np.ndarray) -> np.ndarray:
        g = self.grid
        return g.x_min + np.mod(x - g.x_min, g.length)
