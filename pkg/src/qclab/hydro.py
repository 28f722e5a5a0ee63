"""Polar (density/action) view of a wave state and its hydrodynamic laws.

A normalized complex state psi factors as sqrt(rho) * exp(i*S/hbar).
This module converts between the two pictures and evaluates the
pointwise laws the pair (rho, S) obeys: the modified Hamilton-Jacobi
equation with the interpolation-weighted density-curvature potential,
the continuity equation, the velocity field, and the conserved energy
functional of the interpolating flow.

Node handling: the polar factorization is singular where rho -> 0.  A
relative density floor (node_eps, default 1e-12) regularizes divisions,
and the action is frozen at its nearest well-defined value inside dead
zones.  The floor is additive (rho + eps*peak) rather than a hard max:
a hard max kinks sqrt(rho) at the crossover and a spectral Laplacian
of a kinked field rings over the whole domain.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grids import SpatialGrid, check_field, gradient, integrate, laplacian

DEFAULT_NODE_EPS = 1e-12
DEFAULT_Q_CAP = 1e6


@dataclass(frozen=True)
class PhysicalParams:
    """Mass, diffusion scale, the action constant tied to them, and the
    quantum-classical interpolation weight.

    Exactly one of sigma/hbar is given; the other derives from
    hbar = m * sigma.
    """

    m: float
    sigma: float
    hbar: float
    lam: float

    def __post_init__(self) -> None:
        if self.m <= 0:
            raise ValueError(f"mass must be positive, got {self.m}")
        if self.sigma <= 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"lambda out of [0,1]: {self.lam}")
        if not np.isclose(self.hbar, self.m * self.sigma, rtol=1e-12, atol=0.0):
            raise ValueError(
                f"hbar={self.hbar} inconsistent with m*sigma={self.m * self.sigma}"
            )


def make_params(m: float = 1.0, sigma: float | None = None,
                hbar: float | None = None, lam: float = 0.0) -> PhysicalParams:
    if sigma is None and hbar is None:
        raise ValueError("give one of sigma or hbar")
    if sigma is None:
        sigma = hbar / m
    elif hbar is None:
        hbar = m * sigma
    return PhysicalParams(m=float(m), sigma=float(sigma), hbar=float(hbar), lam=float(lam))


@dataclass
class MadelungFields:
    """Density and continuous action representative on a common grid."""

    rho: np.ndarray
    S: np.ndarray

    def copy(self) -> "MadelungFields":
        return MadelungFields(rho=self.rho.copy(), S=self.S.copy())


def _nearest_valid_fill(values: np.ndarray, valid: np.ndarray) -> np.ndarray:
    """Replace entries outside `valid` by the nearest valid entry
    (periodic index distance)."""
    n = values.size
    idx_valid = np.flatnonzero(valid)
    if idx_valid.size == 0:
        raise ValueError("no valid samples to fill from")
    if idx_valid.size == n:
        return values
    # extend valid indices one period both ways, then pick the nearest
    ext = np.concatenate([idx_valid - n, idx_valid, idx_valid + n])
    targets = np.flatnonzero(~valid)
    pos = np.searchsorted(ext, targets)
    left = ext[np.clip(pos - 1, 0, ext.size - 1)]
    right = ext[np.clip(pos, 0, ext.size - 1)]
    nearest = np.where(targets - left <= right - targets, left, right)
    out = values.copy()
    out[targets] = values[np.mod(nearest, n)]
    return out


def decompose(psi: np.ndarray, grid: SpatialGrid, params: PhysicalParams,
              node_eps: float = DEFAULT_NODE_EPS) -> MadelungFields:
    """Polar factorization psi -> (rho, S).

    S is hbar times the unwrapped phase, anchored so that at the density
    maximum it equals hbar*arg(psi) there; inside dead zones
    (rho < node_eps * peak) S is held at the nearest valid value.
    """
    psi = check_field(psi, grid)
    rho = np.abs(psi) ** 2
    peak = rho.max()
    if peak == 0.0:
        raise ValueError("cannot decompose an identically zero state")
    S = params.hbar * np.unwrap(np.angle(psi))
    i0 = int(np.argmax(rho))
    # the correction is an exact multiple of 2*pi*hbar
    S = S + (params.hbar * np.angle(psi[i0]) - S[i0])
    valid = rho >= node_eps * peak
    S = _nearest_valid_fill(S, valid)
    return MadelungFields(rho=rho, S=S)


def reconstruct(fields: MadelungFields, grid: SpatialGrid,
                params: PhysicalParams) -> np.ndarray:
    """Inverse of decompose: psi = sqrt(rho) * exp(i*S/hbar)."""
    rho = check_field(fields.rho, grid)
    S = check_field(fields.S, grid)
    if np.any(rho < 0):
        raise ValueError("density must be nonnegative")
    return np.sqrt(rho) * np.exp(1j * S / params.hbar)


def quantum_potential(rho: np.ndarray, grid: SpatialGrid, params: PhysicalParams,
                      node_eps: float = DEFAULT_NODE_EPS,
                      q_cap: float = DEFAULT_Q_CAP) -> np.ndarray:
    """Density-curvature potential -(hbar^2/2m) * lap(sqrt(rho))/sqrt(rho).

    Evaluated on the softly floored density so it stays finite and smooth
    through near-nodes, then clamped to +-q_cap.  Invariant under
    rho -> c*rho because the floor scales with the peak.
    """
    rho = check_field(rho, grid)
    amp = np.sqrt(rho + node_eps * rho.max())
    q = -(params.hbar ** 2 / (2.0 * params.m)) * laplacian(amp, grid) / amp
    return np.clip(q, -q_cap, q_cap)


def probability_current(psi: np.ndarray, grid: SpatialGrid,
                        params: PhysicalParams) -> np.ndarray:
    """j = (hbar/m) * Im(conj(psi) * dpsi/dx); smooth even across nodes."""
    psi = check_field(psi, grid)
    return (params.hbar / params.m) * np.imag(np.conj(psi) * gradient(psi, grid))


def phase_gradient(fields: MadelungFields, grid: SpatialGrid, params: PhysicalParams,
                   node_eps: float = DEFAULT_NODE_EPS) -> np.ndarray:
    """dS/dx, computed as m*j/rho on the reconstructed state.

    Equals the direct derivative of S wherever rho > 0, but unlike a
    spectral derivative of S it tolerates phase winding (plane waves)
    and the frozen-action dead zones without global ringing.
    """
    psi = reconstruct(fields, grid, params)
    rho_safe = fields.rho + node_eps * fields.rho.max()
    return params.m * probability_current(psi, grid, params) / rho_safe


def velocity_field(fields: MadelungFields, grid: SpatialGrid, params: PhysicalParams,
                   node_eps: float = DEFAULT_NODE_EPS) -> np.ndarray:
    """Transport velocity v = (dS/dx)/m."""
    return phase_gradient(fields, grid, params, node_eps) / params.m


def velocity_from_psi(psi: np.ndarray, grid: SpatialGrid, params: PhysicalParams,
                      node_eps: float = DEFAULT_NODE_EPS) -> np.ndarray:
    """Transport velocity straight from the wave samples: j / rho."""
    psi = check_field(psi, grid)
    rho = np.abs(psi) ** 2
    return probability_current(psi, grid, params) / (rho + node_eps * rho.max())


DEFAULT_MASK_EPS = 1e-6


def hj_residual(fields: MadelungFields, V: np.ndarray, grid: SpatialGrid,
                params: PhysicalParams, dS_dt: np.ndarray,
                node_eps: float = DEFAULT_NODE_EPS,
                q_cap: float = DEFAULT_Q_CAP,
                mask_eps: float = DEFAULT_MASK_EPS) -> np.ndarray:
    """Pointwise defect of the interpolated Hamilton-Jacobi law:

        dS/dt + (dS/dx)^2 / 2m + V + (1 - lambda) * Q

    Zero for an exact solution; masked to 0 where rho < mask_eps * peak.
    The mask threshold sits far above the node_eps floor on purpose: at
    densities near the floor the regularized Q is off by order one, so a
    mask at the floor scale would report that artifact, not the law.
    """
    V = check_field(V, grid)
    dS_dt = check_field(dS_dt, grid)
    gradS = phase_gradient(fields, grid, params, node_eps)
    Q = quantum_potential(fields.rho, grid, params, node_eps, q_cap)
    res = dS_dt + gradS ** 2 / (2.0 * params.m) + V + (1.0 - params.lam) * Q
    res = np.where(fields.rho < mask_eps * fields.rho.max(), 0.0, res)
    return res


def continuity_residual(fields: MadelungFields, grid: SpatialGrid,
                        params: PhysicalParams, drho_dt: np.ndarray) -> np.ndarray:
    """Pointwise defect of d(rho)/dt + d/dx (rho * dS/dx / m)."""
    drho_dt = check_field(drho_dt, grid)
    psi = reconstruct(fields, grid, params)
    j = probability_current(psi, grid, params)
    return drho_dt + gradient(j, grid)


def energy_functional(fields: MadelungFields, V: np.ndarray, grid: SpatialGrid,
                      params: PhysicalParams,
                      node_eps: float = DEFAULT_NODE_EPS) -> float:
    """Conserved energy of the interpolating flow:

        E = int rho [ (dS/dx)^2/2m + V ] dx
            + (1 - lambda) * (hbar^2/8m) * int (drho/dx)^2 / rho dx

    The second term is the Fisher-information part that the interpolation
    weight suppresses.
    """
    V = check_field(V, grid)
    rho = fields.rho
    rho_safe = rho + node_eps * rho.max()
    psi = reconstruct(fields, grid, params)
    j = probability_current(psi, grid, params)
    kinetic = params.m * j ** 2 / (2.0 * rho_safe)
    drho = gradient(rho, grid)
    fisher = (params.hbar ** 2 / (8.0 * params.m)) * drho ** 2 / rho_safe
    total = kinetic + rho * V + (1.0 - params.lam) * fisher
    return integrate(total, grid)
