"""Single-valued classical momentum sheets, their characteristic
evolution, incoherent mixtures, and phase-insensitive observables.

A sheet is a density rho(x) riding on the momentum profile p = dS/dx.
Projected to phase space it is a ridge f(x,p) = rho(x) * N(p; dS/dx, w)
with N a normalized Gaussian regularization of the delta profile, kept
exactly column-normalized so the p-marginal reproduces rho.

Mixtures are weighted sums of such ridges: no cross terms, so any
observable built from the mixture density is blind to per-sheet phase
offsets and to relative phases between sheets.  That is the operational
form of the classical phase superselection rule, and it is what lets
trajectory streams cross at the ensemble level.

Sheets evolve by characteristics: particles carry density through the
deformation Jacobian and accumulate the classical action.  Evolution is
only meaningful while the sheet stays single-valued; the first fold
(Jacobian collapse) is flagged as a caustic and the run halts there.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator

from .grids import PhaseSpaceGrid, SpatialGrid, check_field, integrate
from .hydro import MadelungFields, PhysicalParams, decompose
from .kvn import husimi
from .potentials import Potential

DEFAULT_J_MIN = 1e-3
SUPPORT_EPS = 1e-10


@dataclass
class LagrangianSheet:
    rho: np.ndarray
    S: np.ndarray
    w: float = 1.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.w <= 1.0:
            raise ValueError(f"sheet weight out of [0,1]: {self.w}")
        if np.any(self.rho < 0):
            raise ValueError("sheet density must be nonnegative")


@dataclass
class SheetMixture:
    sheets: list[LagrangianSheet]

    def __post_init__(self) -> None:
        total = sum(s.w for s in self.sheets)
        if abs(total - 1.0) > 1e-10:
            raise ValueError(f"mixture weights sum to {total}, expected 1")


@dataclass
class CausticReport:
    min_abs_jacobian: float
    caustic_time: float | None
    halted: bool
    t_final: float


def momentum_profile(S: np.ndarray, grid: SpatialGrid) -> np.ndarray:
    """dS/dx by local differences; safe for winding (non-periodic) actions."""
    S = check_field(S, grid)
    return np.gradient(S, grid.dx)


def project_sheet(fields: MadelungFields, grid2d: PhaseSpaceGrid,
                  params: PhysicalParams, delta_width: float | None = None) -> np.ndarray:
    """Phase-space ridge of a (rho, S) pair.

    delta_width defaults to 4 momentum cells and must cover at least 2;
    each column is normalized so the p-marginal equals rho exactly.
    """
    x_axis = grid2d.x_axis
    rho = check_field(fields.rho, x_axis)
    if delta_width is None:
        delta_width = 4.0 * grid2d.dp
    if delta_width < 2.0 * grid2d.dp:
        raise ValueError(
            f"delta_width={delta_width} under-resolved: needs >= 2 momentum cells "
            f"(dp={grid2d.dp})")
    mu = momentum_profile(fields.S, x_axis)
    live = rho > SUPPORT_EPS * rho.max()
    below = grid2d.p_min - mu[live]
    above = mu[live] - grid2d.p_max
    overshoot = max(below.max(initial=0.0), above.max(initial=0.0))
    if overshoot > 3.0 * delta_width:
        raise ValueError(
            f"momentum profile leaves the p domain by {overshoot:.3g} "
            f"(> 3*delta_width={3 * delta_width:.3g})")

    ridge = np.exp(-((grid2d.p[None, :] - mu[:, None]) ** 2) / (2.0 * delta_width ** 2))
    z = ridge.sum(axis=1) * grid2d.dp
    out = np.zeros(grid2d.shape)
    ok = z > 0
    out[ok] = rho[ok, None] * ridge[ok] / z[ok, None]
    if np.any(live & ~ok):
        raise ValueError("ridge fell entirely outside the p domain on a live column")
    return out


def mixture_density(mix: SheetMixture, grid2d: PhaseSpaceGrid,
                    params: PhysicalParams,
                    delta_width: float | None = None) -> np.ndarray:
    """Incoherent weighted sum of sheet ridges."""
    out = np.zeros(grid2d.shape)
    for sheet in mix.sheets:
        if sheet.w == 0.0:
            continue
        out += sheet.w * project_sheet(
            MadelungFields(rho=sheet.rho, S=sheet.S), grid2d, params, delta_width)
    return out


def superselected_expectation(mix: SheetMixture, observable: np.ndarray,
                              grid2d: PhaseSpaceGrid, params: PhysicalParams,
                              delta_width: float | None = None) -> float:
    """Average of A(x,p) against the mixture density.

    Depends on the sheets only through (rho_j, dS_j/dx, w_j): shifting
    any S_j by a constant or re-phasing sheets relative to each other
    cannot change the value.
    """
    from .kvn import expectation

    f = mixture_density(mix, grid2d, params, delta_width)
    return expectation(observable, f, grid2d)


@dataclass
class SheetEnsemble:
    """Characteristics carrier for sheet evolution: particle positions,
    momenta, carried density, accumulated action, and the deformation
    tangent whose x component is the Jacobian."""

    x: np.ndarray
    p: np.ndarray
    rho0: np.ndarray
    action: np.ndarray
    dx: np.ndarray       # tangent delta-x, starts at 1
    dp: np.ndarray       # tangent delta-p, starts at dS''(x0)
    t: float = 0.0
    min_abs_jacobian: float = 1.0
    caustic_time: float | None = field(default=None)

    @property
    def jacobian(self) -> np.ndarray:
        return self.dx


def sample_sheet(sheet: LagrangianSheet, grid: SpatialGrid,
                 n_particles: int) -> SheetEnsemble:
    """Stratified (deterministic, seedless) sampling of the sheet support."""
    rho = check_field(sheet.rho, grid)
    live = np.flatnonzero(rho > SUPPORT_EPS * rho.max())
    a, b = grid.x[live[0]], grid.x[live[-1]]
    x0 = a + (np.arange(n_particles) + 0.5) * (b - a) / n_particles
    p_grid = momentum_profile(sheet.S, grid)
    p0 = np.interp(x0, grid.x, p_grid)
    rho0 = np.interp(x0, grid.x, rho)
    S0 = np.interp(x0, grid.x, sheet.S)
    curvature = np.gradient(p0, x0)
    return SheetEnsemble(x=x0, p=p0, rho0=rho0, action=S0,
                         dx=np.ones(n_particles), dp=curvature)


def _ensemble_step(ens: SheetEnsemble, potential: Potential,
                   params: PhysicalParams, dt: float, j_min: float) -> None:
    """One velocity-Verlet step of particles and tangents plus the
    action increment (trapezoid of the Lagrangian)."""
    m = params.m
    lag0 = ens.p ** 2 / (2.0 * m) - potential.values(ens.x)

    p_half = ens.p - (dt / 2.0) * potential.derivative(ens.x)
    dp_half = ens.dp - (dt / 2.0) * potential.curvature(ens.x) * ens.dx
    x_new = ens.x + dt * p_half / m
    dx_new = ens.dx + dt * dp_half / m
    p_new = p_half - (dt / 2.0) * potential.derivative(x_new)
    dp_new = dp_half - (dt / 2.0) * potential.curvature(x_new) * dx_new

    lag1 = p_new ** 2 / (2.0 * m) - potential.values(x_new)
    ens.action = ens.action + (dt / 2.0) * (lag0 + lag1)
    ens.x, ens.p, ens.dx, ens.dp = x_new, p_new, dx_new, dp_new
    ens.t += dt

    min_j = float(np.min(np.abs(ens.dx)))
    ens.min_abs_jacobian = min(ens.min_abs_jacobian, min_j)
    if min_j <= j_min and ens.caustic_time is None:
        ens.caustic_time = ens.t


@dataclass
class SheetFrame:
    """Sheet data rebuilt on the grid after a characteristic push."""
    rho: np.ndarray
    S: np.ndarray
    p: np.ndarray
    mass_drift: float


def rebuild_sheet(ens: SheetEnsemble, grid: SpatialGrid) -> SheetFrame:
    """Monotone (shape-preserving) rebuild of (rho, S, p) on the grid.

    Density transports through the Jacobian; outside the particle span
    rho is 0 and S, p hold their edge values.  The returned rho is
    renormalized to unit mass with the raw drift reported.
    """
    if np.any(np.diff(ens.x) <= 0):
        raise ValueError("sheet folded: particle order lost, rebuild impossible")
    rho_part = ens.rho0 / np.abs(ens.jacobian)
    x = grid.x
    inside = (x >= ens.x[0]) & (x <= ens.x[-1])

    rho = np.zeros(grid.n)
    rho[inside] = PchipInterpolator(ens.x, rho_part)(x[inside])
    rho = np.clip(rho, 0.0, None)

    S = np.empty(grid.n)
    S_in = PchipInterpolator(ens.x, ens.action)
    S[inside] = S_in(x[inside])
    S[x < ens.x[0]] = ens.action[0]
    S[x > ens.x[-1]] = ens.action[-1]

    p = np.empty(grid.n)
    p[inside] = PchipInterpolator(ens.x, ens.p)(x[inside])
    p[x < ens.x[0]] = ens.p[0]
    p[x > ens.x[-1]] = ens.p[-1]

    mass = integrate(rho, grid)
    if mass <= 0:
        raise ValueError("rebuilt sheet carries no mass")
    return SheetFrame(rho=rho / mass, S=S, p=p, mass_drift=abs(mass - 1.0))


def evolve_sheet(sheet: LagrangianSheet, potential: Potential,
                 params: PhysicalParams, grid: SpatialGrid, dt: float,
                 t_end: float, n_particles: int = 4096,
                 j_min: float = DEFAULT_J_MIN) -> tuple[LagrangianSheet, CausticReport]:
    """Classical evolution of a sheet up to t_end or its first caustic.

    Returns the rebuilt sheet (at t_end, or at the flagged time if a
    fold was reached) together with the caustic report.
    """
    ens = sample_sheet(sheet, grid, n_particles)
    n_steps = int(round(t_end / dt)) if t_end > 0 else 0
    for _ in range(n_steps):
        _ensemble_step(ens, potential, params, dt, j_min)
        if ens.caustic_time is not None:
            break
    frame = rebuild_sheet(ens, grid)
    report = CausticReport(
        min_abs_jacobian=ens.min_abs_jacobian,
        caustic_time=ens.caustic_time,
        halted=ens.caustic_time is not None,
        t_final=ens.t,
    )
    return LagrangianSheet(rho=frame.rho, S=frame.S, w=sheet.w), report


def f_sigma_lambda(psi: np.ndarray, grid: SpatialGrid, params: PhysicalParams,
                   grid2d: PhaseSpaceGrid, delta_width: float | None = None,
                   s_coh: float | None = None,
                   clamp_negative: bool = False) -> np.ndarray:
    """Interpolating phase-space density of a wave state.

    The sheet of the state is its polar ridge; the spread field is the
    coherent-window density minus that ridge, weighted by (1 - lambda):

        F = sheet + (1 - lambda) * (husimi - sheet)

    At lambda=1 the output IS the sheet (bitwise); at lambda=0 it is the
    coherent-window density (bitwise).  In between F can dip slightly
    below zero where the window density undershoots the ridge;
    clamp_negative=True floors it at 0 (off by default).
    """
    fields = decompose(psi, grid, params)
    sheet = project_sheet(fields, grid2d, params, delta_width)
    one_minus = 1.0 - params.lam
    if one_minus == 0.0:
        out = sheet
    else:
        hus = husimi(psi, grid, params, grid2d, s_coh)
        out = hus if one_minus == 1.0 else sheet + one_minus * (hus - sheet)
    if clamp_negative:
        out = np.clip(out, 0.0, None)
    return out
