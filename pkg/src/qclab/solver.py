"""Time evolution of the interpolating wave equation

    i*hbar dpsi/dt = [ -(hbar^2/2m) d2/dx2 + V - lambda*Q[psi] ] psi

where Q is the density-curvature potential of the hydro module.  At
lambda=0 this is ordinary linear wave mechanics; at lambda=1 the
curvature term is fully subtracted and the polar pair (rho, S) obeys
the classical Hamilton-Jacobi and continuity laws.

Scheme: Strang splitting.  Half-step of the local multiplier
exp(-i (V - lambda*Q) dt / 2 hbar), full spectral kinetic step, second
local half-step.  Q is refreshed from the current density at each local
sub-step with a configurable number of fixed-point sweeps (the local
factor leaves the density invariant, so the first sweep is already
self-consistent; extra sweeps are kept for the config contract).  Each
factor has unit modulus, so the step conserves the norm to roundoff;
the state is renormalized anyway and the raw drift reported.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .grids import SpatialGrid, check_field, gradient, integrate
from .hydro import (
    DEFAULT_NODE_EPS,
    DEFAULT_Q_CAP,
    MadelungFields,
    PhysicalParams,
    decompose,
    energy_functional,
    quantum_potential,
)


class NumericalFailure(RuntimeError):
    """A step produced non-finite samples; carries the simulation time."""

    def __init__(self, message: str, t: float):
        super().__init__(f"{message} (t={t})")
        self.t = t


@dataclass
class WaveState:
    grid: SpatialGrid
    psi: np.ndarray
    t: float = 0.0

    def norm(self) -> float:
        return float(np.sqrt(integrate(np.abs(self.psi) ** 2, self.grid)))

    def normalized(self) -> "WaveState":
        return replace(self, psi=self.psi / self.norm())


@dataclass(frozen=True)
class SolverConfig:
    dt: float
    nonlinear_iters: int = 2
    node_eps: float = DEFAULT_NODE_EPS
    q_cap: float = DEFAULT_Q_CAP

    def __post_init__(self) -> None:
        if self.dt <= 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.nonlinear_iters < 1:
            raise ValueError("nonlinear_iters must be >= 1")


def effective_hbar(params: PhysicalParams) -> float:
    """Action constant of the equivalent linear dynamics: hbar*sqrt(1-lambda)."""
    return params.hbar * float(np.sqrt(1.0 - params.lam))


def stability_limit(grid: SpatialGrid, params: PhysicalParams) -> float:
    """Largest dt we accept: keeps the Nyquist-mode kinetic phase advance
    per step at or below a quarter turn at the effective action constant.
    Beyond that the split-step feedback through Q can hit aliasing
    resonances and go modulationally unstable."""
    h_eff = effective_hbar(params)
    return grid.dx ** 2 * params.m / (np.pi * h_eff + np.finfo(float).tiny)


def _local_half_step(psi: np.ndarray, V: np.ndarray, grid: SpatialGrid,
                     params: PhysicalParams, cfg: SolverConfig,
                     half_dt: float) -> np.ndarray:
    out = psi
    for _ in range(cfg.nonlinear_iters):
        Q = quantum_potential(np.abs(out) ** 2, grid, params, cfg.node_eps, cfg.q_cap)
        out = psi * np.exp(-1j * (V - params.lam * Q) * (half_dt / params.hbar))
    return out


def step(state: WaveState, V: np.ndarray, params: PhysicalParams,
         cfg: SolverConfig) -> tuple[WaveState, float]:
    """Advance one dt; returns the renormalized state and the
    pre-renormalization norm."""
    grid = state.grid
    V = check_field(V, grid)
    dt = cfg.dt
    kinetic = np.exp(-1j * (params.hbar * dt / (2.0 * params.m)) * grid.k ** 2)

    psi = _local_half_step(state.psi, V, grid, params, cfg, dt / 2.0)
    psi = np.fft.ifft(kinetic * np.fft.fft(psi))
    psi = _local_half_step(psi, V, grid, params, cfg, dt / 2.0)

    if not np.all(np.isfinite(psi.view(float))):
        raise NumericalFailure("non-finite wave samples after step", state.t + dt)
    norm = float(np.sqrt(integrate(np.abs(psi) ** 2, grid)))
    return WaveState(grid=grid, psi=psi / norm, t=state.t + dt), norm


@dataclass
class Snapshot:
    state: WaveState
    fields: MadelungFields
    t: float
    norm_pre: float       # pre-renormalization norm at the snapshot step
    max_drift: float      # max |norm-1| over steps since the previous snapshot
    energy: float
    width: float
    center: float
    hj_res_l2: float = 0.0
    cont_res_l2: float = 0.0


@dataclass
class EvolutionResult:
    snapshots: list[Snapshot] = field(default_factory=list)
    velocities: list[tuple[float, np.ndarray]] = field(default_factory=list)

    @property
    def max_norm_drift(self) -> float:
        return max((s.max_drift for s in self.snapshots), default=0.0)


def density_moments(rho: np.ndarray, grid: SpatialGrid) -> tuple[float, float]:
    """(center, width) with width the root second central moment."""
    mass = integrate(rho, grid)
    center = integrate(rho * grid.x, grid) / mass
    var = integrate(rho * (grid.x - center) ** 2, grid) / mass
    return center, float(np.sqrt(max(var, 0.0)))


def _align_action(S_ref: np.ndarray, S: np.ndarray, hbar: float,
                  mask: np.ndarray) -> np.ndarray:
    """Shift S by the multiple of 2*pi*hbar that best matches S_ref.

    The polar anchor can hop one phase branch between snapshots; this
    removes the hop so time differences of S are meaningful.
    """
    two_pi_h = 2.0 * np.pi * hbar
    delta = np.median((S_ref - S)[mask]) if mask.any() else 0.0
    return S + two_pi_h * np.round(delta / two_pi_h)


def _fill_residuals(result: EvolutionResult, V: np.ndarray, grid: SpatialGrid,
                    params: PhysicalParams, cfg: SolverConfig) -> None:
    from .hydro import continuity_residual, hj_residual  # local to avoid cycle noise

    snaps = result.snapshots
    if len(snaps) < 2:
        return
    for j, snap in enumerate(snaps):
        prev = snaps[max(j - 1, 0)]
        nxt = snaps[min(j + 1, len(snaps) - 1)]
        dt_span = nxt.t - prev.t
        if dt_span == 0.0:
            continue
        peak = snap.fields.rho.max()
        mask = snap.fields.rho >= cfg.node_eps * peak
        S_prev = _align_action(snap.fields.S, prev.fields.S, params.hbar, mask)
        S_next = _align_action(snap.fields.S, nxt.fields.S, params.hbar, mask)
        dS_dt = (S_next - S_prev) / dt_span
        drho_dt = (nxt.fields.rho - prev.fields.rho) / dt_span
        hj = hj_residual(snap.fields, V, grid, params, dS_dt, cfg.node_eps, cfg.q_cap)
        cont = continuity_residual(snap.fields, grid, params, drho_dt)
        snap.hj_res_l2 = float(np.sqrt(integrate(hj ** 2, grid)))
        snap.cont_res_l2 = float(np.sqrt(integrate(cont ** 2, grid)))


def evolve(state: WaveState, V: np.ndarray, params: PhysicalParams,
           cfg: SolverConfig, n_steps: int, output_every: int = 1,
           velocity_every: int | None = None) -> EvolutionResult:
    """Run n_steps of the interpolating flow, snapshotting every
    output_every steps (plus the initial and final states).

    Each snapshot carries the polar fields and the standard diagnostics:
    pre-renormalization norm, energy, width, center, and the two
    hydrodynamic residual norms (central time differences of the stored
    snapshots; one-sided at the ends).  When velocity_every is set, the
    transport velocity is additionally recorded on its own (usually
    finer) cadence for trajectory integration.
    """
    from .hydro import velocity_from_psi

    grid = state.grid
    V = check_field(V, grid)
    if cfg.dt > stability_limit(grid, params):
        raise ValueError(
            f"dt={cfg.dt} exceeds the spectral stability guard "
            f"{stability_limit(grid, params):.3e} for this grid"
        )
    if output_every < 1:
        raise ValueError("output_every must be >= 1")

    state = state.normalized()

    def snap_of(s: WaveState, norm_pre: float, max_drift: float) -> Snapshot:
        fields = decompose(s.psi, grid, params, cfg.node_eps)
        center, width = density_moments(fields.rho, grid)
        energy = energy_functional(fields, V, grid, params, cfg.node_eps)
        return Snapshot(state=s, fields=fields, t=s.t, norm_pre=norm_pre,
                        max_drift=max_drift, energy=energy, width=width, center=center)

    result = EvolutionResult()
    result.snapshots.append(snap_of(state, 1.0, 0.0))
    if velocity_every:
        result.velocities.append((0.0, velocity_from_psi(state.psi, grid, params,
                                                         cfg.node_eps)))
    drift_acc = 0.0
    for i in range(1, n_steps + 1):
        state, norm_pre = step(state, V, params, cfg)
        drift_acc = max(drift_acc, abs(norm_pre - 1.0))
        if i % output_every == 0 or i == n_steps:
            result.snapshots.append(snap_of(state, norm_pre, drift_acc))
            drift_acc = 0.0
        if velocity_every and (i % velocity_every == 0 or i == n_steps):
            result.velocities.append((state.t, velocity_from_psi(state.psi, grid,
                                                                 params, cfg.node_eps)))
    _fill_residuals(result, V, grid, params, cfg)
    return result
