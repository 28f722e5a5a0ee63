"""Complex-amplitude phase-space dynamics on an (x, p) grid.

The amplitude is transported along the classical Hamiltonian flow of
H = p^2/2m + V(x): both modulus and phase advect, so the modulus
squared obeys the Liouville transport law and the phase obeys the same
convective law.  Because classical observables multiply by functions of
(x, p), expectations depend on |Psi|^2 only and any pointwise phase
relabeling is unobservable.

Scheme: semi-Lagrangian.  Each node is backtracked one velocity-Verlet
step (time-reversible, symplectic) and the previous amplitude is
interpolated at the foot with tensor-product 4-point Lagrange cubics,
periodic in x.  Feet that leave the p range pick up amplitude 0; runs
are expected to keep mass away from the p boundary.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grids import PhaseSpaceGrid, SpatialGrid, check_field, check_field_2d, integrate_2d
from .hydro import PhysicalParams
from .potentials import Potential


@dataclass
class PhaseSpaceAmplitude:
    grid: PhaseSpaceGrid
    Psi: np.ndarray
    t: float = 0.0

    def mass(self) -> float:
        return integrate_2d(np.abs(self.Psi) ** 2, self.grid)

    def normalized(self) -> "PhaseSpaceAmplitude":
        return PhaseSpaceAmplitude(self.grid, self.Psi / np.sqrt(self.mass()), self.t)


@dataclass
class PhaseSpacePolar:
    f: np.ndarray    # density |Psi|^2
    phi: np.ndarray  # phase, wrapped to (-pi, pi]


def kvn_polar(amp: PhaseSpaceAmplitude) -> PhaseSpacePolar:
    Psi = check_field_2d(amp.Psi, amp.grid)
    return PhaseSpacePolar(f=np.abs(Psi) ** 2, phi=np.angle(Psi))


def _lagrange_cubic_weights(a: np.ndarray) -> tuple[np.ndarray, ...]:
    """Weights of the interpolating cubic through nodes -1, 0, 1, 2 at
    offset a in [0, 1) from node 0."""
    w_m1 = -a * (a - 1.0) * (a - 2.0) / 6.0
    w_0 = (a + 1.0) * (a - 1.0) * (a - 2.0) / 2.0
    w_p1 = -(a + 1.0) * a * (a - 2.0) / 2.0
    w_p2 = (a + 1.0) * a * (a - 1.0) / 6.0
    return w_m1, w_0, w_p1, w_p2


class LiouvilleStepper:
    """Semi-Lagrangian stepper with feet and weights precomputed once.

    The characteristic flow is autonomous, so for a fixed dt every step
    gathers from the same stencil with the same weights.
    """

    PAD = 2  # zero columns added on each p side for boundary stencils

    def __init__(self, grid: PhaseSpaceGrid, potential: Potential,
                 params: PhysicalParams, dt: float):
        self.grid = grid
        self.dt = float(dt)
        x_axis = grid.x_axis
        X = x_axis.x[:, None]
        P = grid.p[None, :]

        xf, pf = self._backtracked_feet(X, P, potential, params.m, self.dt)
        disp_x = np.max(np.abs(xf - X))
        disp_p = np.max(np.abs(pf - P))
        if disp_x > 2.0 * x_axis.dx or disp_p > 2.0 * grid.dp:
            raise ValueError(
                f"dt={dt} moves characteristic feet by ({disp_x / x_axis.dx:.2f}, "
                f"{disp_p / grid.dp:.2f}) cells; the guard allows at most 2"
            )

        sx = (xf - x_axis.x_min) / x_axis.dx
        ix0 = np.floor(sx).astype(np.int64)
        ax = sx - ix0
        sp = (pf - grid.p_min) / grid.dp
        ip0 = np.floor(sp).astype(np.int64)
        ap = sp - ip0

        self.inside = (pf >= grid.p_min) & (pf <= grid.p_max - grid.dp)
        wx = _lagrange_cubic_weights(ax)
        wp = _lagrange_cubic_weights(ap)

        n_pad = grid.n_p + 2 * self.PAD
        flats = []
        weights = []
        for a in range(4):
            ia = np.mod(ix0 + (a - 1), x_axis.n)
            for b in range(4):
                jb = np.clip(ip0 + (b - 1) + self.PAD, 0, n_pad - 1)
                flats.append((ia * n_pad + jb).ravel())
                weights.append((wx[a] * wp[b]).ravel())
        self._flats = flats
        self._weights = weights
        self._n_pad = n_pad

    @staticmethod
    def _backtracked_feet(X: np.ndarray, P: np.ndarray, potential: Potential,
                          m: float, dt: float) -> tuple[np.ndarray, np.ndarray]:
        # velocity-Verlet for time -dt: kick, drift, kick
        p_half = P + (dt / 2.0) * potential.derivative(X)
        xf = X - dt * p_half / m
        pf = p_half + (dt / 2.0) * potential.derivative(xf)
        return np.broadcast_to(xf, np.broadcast_shapes(X.shape, P.shape)).copy(), \
            np.broadcast_to(pf, np.broadcast_shapes(X.shape, P.shape)).copy()

    def apply(self, Psi: np.ndarray) -> np.ndarray:
        grid = self.grid
        padded = np.zeros((grid.x_axis.n, self._n_pad), dtype=complex)
        padded[:, self.PAD:self.PAD + grid.n_p] = Psi
        flat = padded.ravel()
        out = np.zeros(grid.shape[0] * grid.shape[1], dtype=complex)
        for idx, w in zip(self._flats, self._weights):
            out += w * flat.take(idx)
        out = out.reshape(grid.shape)
        out[~self.inside] = 0.0
        return out


def liouville_step(amp: PhaseSpaceAmplitude, potential: Potential,
                   params: PhysicalParams, dt: float) -> PhaseSpaceAmplitude:
    """One semi-Lagrangian step of the phase-space amplitude."""
    Psi = check_field_2d(amp.Psi, amp.grid)
    stepper = LiouvilleStepper(amp.grid, potential, params, dt)
    return PhaseSpaceAmplitude(amp.grid, stepper.apply(Psi), amp.t + dt)


def liouville_residual(f_snapshots: list[np.ndarray], potential: Potential,
                       params: PhysicalParams, grid: PhaseSpaceGrid,
                       dt: float) -> float:
    """L2 norm of df/dt + (p/m) df/dx - V'(x) df/dp on stored density
    snapshots: central differences in t and p, spectral derivative in x.
    Averaged over the interior snapshots."""
    if len(f_snapshots) < 3:
        raise ValueError("need at least three snapshots for a centered residual")
    fs = [check_field_2d(f, grid) for f in f_snapshots]
    x_axis = grid.x_axis
    kx = x_axis.k_gradient[:, None]
    P = grid.p[None, :]
    Vp = potential.derivative(x_axis.x)[:, None]
    norms = []
    for j in range(1, len(fs) - 1):
        df_dt = (fs[j + 1] - fs[j - 1]) / (2.0 * dt)
        df_dx = np.real(np.fft.ifft(1j * kx * np.fft.fft(fs[j], axis=0), axis=0))
        df_dp = np.gradient(fs[j], grid.dp, axis=1)
        res = df_dt + (P / params.m) * df_dx - Vp * df_dp
        norms.append(np.sqrt(integrate_2d(res ** 2, grid)))
    return float(np.mean(norms))


def expectation(observable: np.ndarray, f: np.ndarray, grid: PhaseSpaceGrid) -> float:
    """Phase-space average of a classical observable A(x, p) against a density."""
    observable = check_field_2d(observable, grid)
    f = check_field_2d(f, grid)
    return integrate_2d(observable * f, grid)


def husimi(psi: np.ndarray, grid: SpatialGrid, params: PhysicalParams,
           grid2d: PhaseSpaceGrid, s_coh: float | None = None) -> np.ndarray:
    """Coherent-window phase-space density of a configuration-space state.

    H(x0, p0) = |<g_{x0,p0}|psi>|^2 / (2 pi hbar) with a normalized
    Gaussian window of spatial width s_coh (default sqrt(hbar/2m), the
    natural diffusion scale).  The result is renormalized to unit mass
    on the grid so the p truncation never leaks mass.
    """
    psi = check_field(psi, grid)
    if grid2d.x_axis != grid:
        raise ValueError("phase-space x axis must match the state grid")
    if s_coh is None:
        s_coh = float(np.sqrt(params.hbar / (2.0 * params.m)))
    x = grid.x
    # periodic signed displacement of each sample from the window center
    d = x - grid.x_min
    d = np.where(d > grid.length / 2.0, d - grid.length, d)
    env = (2.0 * np.pi * s_coh ** 2) ** (-0.25) * np.exp(-(d ** 2) / (4.0 * s_coh ** 2))
    env_hat = np.fft.fft(env)

    out = np.empty(grid2d.shape)
    for j, p0 in enumerate(grid2d.p):
        w = psi * np.exp(-1j * p0 * x / params.hbar)
        # circular cross-correlation: C[i0] = sum_j env[j-i0] * w[j]
        overlap = np.fft.ifft(np.fft.fft(w) * np.conj(env_hat)) * grid.dx
        out[:, j] = np.abs(overlap) ** 2
    out /= 2.0 * np.pi * params.hbar
    total = integrate_2d(out, grid2d)
    if total <= 0:
        raise ValueError("degenerate state: zero phase-space mass")
    return out / total
