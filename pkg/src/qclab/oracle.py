"""Independent reference dynamics used only for cross-checking.

Two kinds of oracle live here and deliberately share no code with the
production solver:

* a plain linear split-step propagator (no density-curvature term at
  all), used to verify that the nonlinear flow at interpolation weight
  lam matches linear dynamics run at the rescaled action constant
  hbar*sqrt(1-lam);
* closed-form solutions (spreading free packet, harmonic coherent
  state) for direct pointwise comparison.
"""

from __future__ import annotations

import numpy as np

from .grids import SpatialGrid, check_field


def linear_step(psi: np.ndarray, grid: SpatialGrid, V: np.ndarray,
                m: float, hbar: float, dt: float) -> np.ndarray:
    """One Strang step of i*hbar dpsi/dt = [-(hbar^2/2m) d2/dx2 + V] psi."""
    psi = check_field(psi, grid)
    V = check_field(V, grid)
    half = np.exp(-1j * V * (dt / (2.0 * hbar)))
    kinetic = np.exp(-1j * (hbar * dt / (2.0 * m)) * grid.k ** 2)
    out = half * psi
    out = np.fft.ifft(kinetic * np.fft.fft(out))
    return half * out


def linear_evolve(psi: np.ndarray, grid: SpatialGrid, V: np.ndarray,
                  m: float, hbar: float, dt: float, n_steps: int,
                  renormalize: bool = True) -> np.ndarray:
    """Repeated linear_step; renormalizes like the production solver does."""
    for _ in range(n_steps):
        psi = linear_step(psi, grid, V, m, hbar, dt)
        if renormalize:
            norm = np.sqrt(np.sum(np.abs(psi) ** 2) * grid.dx)
            psi = psi / norm
    return psi


def free_gaussian(x: np.ndarray, t: float, m: float, hbar: float,
                  s0: float, x0: float = 0.0, p0: float = 0.0) -> np.ndarray:
    """Exact free evolution of a Gaussian packet.

    At t=0 the density is a normal law with standard deviation s0
    centered at x0 and mean momentum p0; the density width grows as
    s0*sqrt(1 + (hbar*t / 2m s0^2)^2).
    """
    xc = x - x0 - p0 * t / m
    z = 1.0 + 1j * hbar * t / (2.0 * m * s0 ** 2)
    psi = (2.0 * np.pi * s0 ** 2) ** (-0.25) / np.sqrt(z) * np.exp(-xc ** 2 / (4.0 * s0 ** 2 * z))
    return psi * np.exp(1j * (p0 * (x - x0) - p0 ** 2 * t / (2.0 * m)) / hbar)


def free_gaussian_width(t: float, m: float, hbar: float, s0: float) -> float:
    return s0 * np.sqrt(1.0 + (hbar * t / (2.0 * m * s0 ** 2)) ** 2)


def coherent_state_center(t: float, omega: float, x0: float, p0: float = 0.0,
                          m: float = 1.0) -> float:
    """Center trajectory of a displaced harmonic ground state."""
    return x0 * np.cos(omega * t) + p0 / (m * omega) * np.sin(omega * t)


def effective_hbar_for(hbar: float, lam: float) -> float:
    """Rescaled action constant under which node-free interpolating
    dynamics coincides with linear dynamics (independent restatement,
    used to cross-check the solver's own mapping)."""
    return hbar * np.sqrt(1.0 - lam)
