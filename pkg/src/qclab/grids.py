"""Uniform periodic grids and spectral differential calculus.

Everything downstream (wave solver, hydrodynamic fields, phase-space
advection) lives on these grids.  Space is always periodic; derivatives
are Fourier multipliers, so they are exact for band-limited fields.
Scenarios are expected to keep all interesting density away from the
domain edge, which makes the periodic wrap physically invisible.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class SpatialGrid:
    """Uniform periodic 1D grid: n samples at x_min + k*dx, k in [0, n).

    n must be a power of two (>= 8) so transforms are fast and the
    Nyquist mode is unambiguous.
    """

    n: int
    x_min: float
    x_max: float

    def __post_init__(self) -> None:
        if not isinstance(self.n, (int, np.integer)) or not _is_power_of_two(int(self.n)) or self.n < 8:
            raise ValueError(f"grid size must be a power of two >= 8, got {self.n}")
        if not self.x_max > self.x_min:
            raise ValueError(f"inverted grid bounds: x_min={self.x_min}, x_max={self.x_max}")

    @property
    def length(self) -> float:
        return self.x_max - self.x_min

    @property
    def dx(self) -> float:
        return self.length / self.n

    @cached_property
    def x(self) -> np.ndarray:
        return self.x_min + self.dx * np.arange(self.n)

    @cached_property
    def k(self) -> np.ndarray:
        """Angular wavenumbers in FFT ordering."""
        return 2.0 * np.pi * np.fft.fftfreq(self.n, d=self.dx)

    @cached_property
    def k_gradient(self) -> np.ndarray:
        """Wavenumbers for first derivatives: Nyquist mode zeroed.

        An odd-order derivative of the (real) Nyquist mode has no
        consistent sample representation, so it is dropped.
        """
        k = self.k.copy()
        k[self.n // 2] = 0.0
        return k


def make_grid(n: int, x_min: float, x_max: float) -> SpatialGrid:
    """Build a periodic grid; fails on non-power-of-two n or inverted bounds."""
    return SpatialGrid(n=int(n), x_min=float(x_min), x_max=float(x_max))


@dataclass(frozen=True)
class PhaseSpaceGrid:
    """Tensor grid for (x, p) fields: periodic x axis, bounded p axis.

    p samples sit at p_min + j*dp, j in [0, n_p), mirroring the x
    convention.  The p axis is not periodic; fields are expected to
    vanish well inside the p bounds.
    """

    x_axis: SpatialGrid
    n_p: int
    p_min: float
    p_max: float

    def __post_init__(self) -> None:
        if self.n_p < 8:
            raise ValueError(f"momentum axis needs at least 8 samples, got {self.n_p}")
        if not self.p_max > self.p_min:
            raise ValueError(f"inverted momentum bounds: p_min={self.p_min}, p_max={self.p_max}")

    @property
    def dp(self) -> float:
        return (self.p_max - self.p_min) / self.n_p

    @cached_property
    def p(self) -> np.ndarray:
        return self.p_min + self.dp * np.arange(self.n_p)

    @property
    def cell_area(self) -> float:
        return self.x_axis.dx * self.dp

    @property
    def shape(self) -> tuple[int, int]:
        return (self.x_axis.n, self.n_p)


def check_field(field: np.ndarray, grid: SpatialGrid) -> np.ndarray:
    """Validate that a 1D field is aligned with its grid."""
    field = np.asarray(field)
    if field.shape != (grid.n,):
        raise ValueError(f"field shape {field.shape} does not match grid size {grid.n}")
    return field


def check_field_2d(field: np.ndarray, grid: PhaseSpaceGrid) -> np.ndarray:
    field = np.asarray(field)
    if field.shape != grid.shape:
        raise ValueError(f"field shape {field.shape} does not match phase-space grid {grid.shape}")
    return field


def gradient(field: np.ndarray, grid: SpatialGrid) -> np.ndarray:
    """Spectral d/dx under periodic boundary conditions.

    Real input returns a real field, complex input a complex one.
    """
    field = check_field(field, grid)
    out = np.fft.ifft(1j * grid.k_gradient * np.fft.fft(field))
    if np.iscomplexobj(field):
        return out
    return out.real


def laplacian(field: np.ndarray, grid: SpatialGrid) -> np.ndarray:
    """Spectral d2/dx2 under periodic boundary conditions."""
    field = check_field(field, grid)
    out = np.fft.ifft(-(grid.k ** 2) * np.fft.fft(field))
    if np.iscomplexobj(field):
        return out
    return out.real


def integrate(field: np.ndarray, grid: SpatialGrid) -> float:
    """Periodic rectangle rule; spectrally accurate for smooth periodic fields."""
    field = check_field(field, grid)
    return float(np.sum(field) * grid.dx)


def integrate_2d(field: np.ndarray, grid: PhaseSpaceGrid) -> float:
    field = check_field_2d(field, grid)
    return float(np.sum(field) * grid.cell_area)
