"""The release gate: every acceptance property at its pinned tolerance.

Each check is a standalone function returning a CheckResult; the CLI
`validate` command runs them in order and the pytest acceptance module
asserts them one by one, so the gate has a single source of truth.

Full mode runs the desk-scale configurations; --fast shrinks grids and
horizons for a smoke run and widens the resolution-bound tolerances
accordingly (fast results are labelled and are not the release gate).
"""

from __future__ import annotations

import filecmp
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .grids import PhaseSpaceGrid, integrate, integrate_2d, make_grid
from .hydro import MadelungFields, decompose, make_params
from .kvn import expectation, husimi
from .oracle import free_gaussian, linear_step
from .potentials import Potential, harmonic
from .runner import demo_scenario, run, run_kvn
from .scenario import scenario_from_dict
from .sheets import (
    LagrangianSheet,
    SheetMixture,
    evolve_sheet,
    f_sigma_lambda,
    mixture_density,
    project_sheet,
)
from .solver import SolverConfig, WaveState, effective_hbar, evolve


@dataclass
class CheckResult:
    name: str
    passed: bool
    measured: str
    tolerance: str
    seconds: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"[{status}] {self.name}: measured {self.measured} "
                f"(tolerance {self.tolerance}) [{self.seconds:.1f}s]")


@dataclass
class Settings:
    fast: bool = False

    @property
    def n(self) -> int:
        return 512 if self.fast else 1024

    @property
    def dt(self) -> float:
        return 2e-3 if self.fast else 1e-3

    @property
    def t_end(self) -> float:
        return 1.0 if self.fast else 2.0

    @property
    def lambdas(self) -> tuple[float, ...]:
        return (0.5,) if self.fast else (0.25, 0.5, 0.75)

    @property
    def kvn_n(self) -> int:
        return 128 if self.fast else 256

    @property
    def kvn_l1_tol(self) -> float:
        return 1e-2 if self.fast else 1e-3

    @property
    def demo_t_end(self) -> float:
        return 1.2 if self.fast else 1.8


def _gaussian_scenario(st: Settings, lam: float) -> dict:
    # domain sized so dt=1e-3 at n=1024 sits inside the spectral guard
    return {
        "physics": {"m": 1.0, "sigma": 1.0, "lambda": lam},
        "grid": {"n": st.n, "x_min": -32.0, "x_max": 32.0},
        "potential": {"kind": "free"},
        "initial_state": {"kind": "gaussian", "x0": 0.0, "p0": 0.0, "s0": 1.0},
        "time": {"dt": st.dt, "t_end": st.t_end,
                 "output_every": max(1, int(round(0.05 / st.dt)))},
    }


def check_quantum_endpoint(st: Settings, out_dir: Path, stash: dict) -> CheckResult:
    """Free packet at lambda=0 spreads on the analytic width law."""
    t0 = time.perf_counter()
    scenario = scenario_from_dict(_gaussian_scenario(st, 0.0))
    res = run(scenario, out_dir / "c01_quantum_endpoint")
    target = np.sqrt(1.0 + (st.t_end / 2.0) ** 2)
    err = abs(res["final_width"] - target) / target
    stash["c1"] = res
    return CheckResult("quantum endpoint width law", err <= 1e-3,
                       f"relative width error {err:.2e}", "<= 1e-3",
                       time.perf_counter() - t0)


def check_classical_endpoint(st: Settings, out_dir: Path, stash: dict) -> CheckResult:
    """Zero-phase density is frozen at lambda=1."""
    t0 = time.perf_counter()
    scenario = scenario_from_dict(_gaussian_scenario(st, 1.0))
    res = run(scenario, out_dir / "c02_classical_endpoint")
    rho0 = res["snapshots"][0].fields.rho
    sup = max(float(np.max(np.abs(s.fields.rho - rho0))) for s in res["snapshots"])
    stash["c2"] = res
    return CheckResult("classical endpoint frozen density", sup <= 1e-6,
                       f"sup density drift {sup:.2e}", "<= 1e-6",
                       time.perf_counter() - t0)


def check_effective_hbar_oracle(st: Settings, out_dir: Path, stash: dict) -> CheckResult:
    """Nonlinear density matches an independent linear run at the
    rescaled action constant."""
    t0 = time.perf_counter()
    grid = make_grid(st.n, -32.0, 32.0)
    V = np.zeros(grid.n)
    psi0 = np.exp(-grid.x ** 2 / 4.0).astype(complex)
    psi0 /= np.sqrt(integrate(np.abs(psi0) ** 2, grid))
    cfg = SolverConfig(dt=st.dt)
    n_steps = int(round(st.t_end / st.dt))
    every = max(1, n_steps // 20)

    worst = 0.0
    results = {}
    for lam in st.lambdas:
        params = make_params(m=1.0, hbar=1.0, lam=lam)
        res = evolve(WaveState(grid, psi0.copy()), V, params, cfg, n_steps, every)
        h_eff = effective_hbar(params)
        psi_lin = psi0.copy()
        step_idx = 0
        for snap in res.snapshots:
            target_idx = int(round(snap.t / st.dt))
            while step_idx < target_idx:
                psi_lin = linear_step(psi_lin, grid, V, params.m, h_eff, st.dt)
                psi_lin /= np.sqrt(integrate(np.abs(psi_lin) ** 2, grid))
                step_idx += 1
            err = float(np.sqrt(integrate(
                (snap.fields.rho - np.abs(psi_lin) ** 2) ** 2, grid)))
            worst = max(worst, err)
        results[lam] = res
    stash["c3"] = results
    return CheckResult("effective action-constant oracle", worst <= 1e-3,
                       f"max L2 density error {worst:.2e} over lambdas {st.lambdas}",
                       "<= 1e-3", time.perf_counter() - t0)


def check_conservation(st: Settings, out_dir: Path, stash: dict) -> CheckResult:
    """Norm drift per step and energy drift over all standard runs."""
    t0 = time.perf_counter()
    # harmonic coherent state at lambda=0 joins the standard set
    grid = make_grid(512, -16.0, 16.0)
    params = make_params(m=1.0, hbar=1.0, lam=0.0)
    pot = Potential(harmonic(1.0), grid, params.m)
    s0 = np.sqrt(0.5)
    psi0 = np.exp(-(grid.x - 1.0) ** 2 / (4.0 * s0 ** 2)).astype(complex)
    psi0 /= np.sqrt(integrate(np.abs(psi0) ** 2, grid))
    res_h = evolve(WaveState(grid, psi0), pot.values(), params,
                   SolverConfig(dt=1e-3), int(round(st.t_end / 1e-3)), 100)

    runs = [stash["c1"], stash["c2"]]
    snapshot_sets = [r["snapshots"] for r in runs]
    snapshot_sets += [r.snapshots for r in stash["c3"].values()]
    snapshot_sets += [res_h.snapshots]
    drifts = [r["max_norm_drift"] for r in runs]
    drifts += [r.max_norm_drift for r in stash["c3"].values()]
    drifts += [res_h.max_norm_drift]

    max_drift = max(drifts)
    max_e = 0.0
    for snaps in snapshot_sets:
        e0 = snaps[0].energy
        scale = max(abs(e0), 1.0)
        max_e = max(max_e, max(abs(s.energy - e0) / scale for s in snaps))
    ok = max_drift <= 1e-8 and max_e <= 1e-4
    return CheckResult("norm and energy conservation", ok,
                       f"max norm drift {max_drift:.2e}, max energy drift {max_e:.2e}",
                       "norm <= 1e-8, energy <= 1e-4", time.perf_counter() - t0)


def _analytic_residual_norms(delta: float, n: int = 1024) -> tuple[float, float]:
    """Hydro residual norms on the exact free packet with time
    derivatives taken by central differences of spacing delta."""
    from .hydro import continuity_residual, hj_residual
    from .solver import _align_action

    grid = make_grid(n, -20.0, 20.0)
    params = make_params(m=1.0, hbar=1.0, lam=0.0)
    V = np.zeros(grid.n)
    t_mid = 0.5
    fields = {}
    for tag, t in (("-", t_mid - delta), ("0", t_mid), ("+", t_mid + delta)):
        fields[tag] = decompose(free_gaussian(grid.x, t, 1.0, 1.0, 1.0), grid, params)
    mask = fields["0"].rho >= 1e-12 * fields["0"].rho.max()
    S_m = _align_action(fields["0"].S, fields["-"].S, params.hbar, mask)
    S_p = _align_action(fields["0"].S, fields["+"].S, params.hbar, mask)
    dS_dt = (S_p - S_m) / (2.0 * delta)
    drho_dt = (fields["+"].rho - fields["-"].rho) / (2.0 * delta)
    hj = hj_residual(fields["0"], V, grid, params, dS_dt)
    cont = continuity_residual(fields["0"], grid, params, drho_dt)
    return (float(np.sqrt(integrate(hj ** 2, grid))),
            float(np.sqrt(integrate(cont ** 2, grid))))


def check_residual_convergence(st: Settings, out_dir: Path, stash: dict) -> CheckResult:
    """Hydro residuals shrink by >= 1.8x when the time spacing halves."""
    t0 = time.perf_counter()
    hj1, cont1 = _analytic_residual_norms(0.02)
    hj2, cont2 = _analytic_residual_norms(0.01)
    r_hj = hj1 / hj2
    r_cont = cont1 / cont2
    ok = r_hj >= 1.8 and r_cont >= 1.8
    return CheckResult("hydro residual convergence", ok,
                       f"reduction factors hj {r_hj:.2f}, continuity {r_cont:.2f}",
                       ">= 1.8 each", time.perf_counter() - t0)


def _kvn_scenario(st: Settings) -> dict:
    return {
        "physics": {"m": 1.0, "sigma": 1.0, "lambda": 1.0},
        "grid": {"n": st.kvn_n, "x_min": -8.0, "x_max": 8.0},
        "phase_space": {"n_p": st.kvn_n, "p_min": -8.0, "p_max": 8.0},
        "potential": {"kind": "harmonic", "omega": 1.0},
        "initial_state": {"kind": "gaussian", "x0": 1.0, "p0": 0.0,
                          "s0": float(np.sqrt(0.5))},
        "time": {"dt": 2.0 * np.pi / 2000.0, "t_end": 2.0 * np.pi,
                 "output_every": 100},
        "output": {"phasespace_every": 10},
    }


def _free_streaming_residual(n: int, delta: float) -> float:
    """Liouville residual on the exact free-streaming Gaussian."""
    from .kvn import liouville_residual
    from .potentials import free

    grid = make_grid(n, -8.0, 8.0)
    grid2d = PhaseSpaceGrid(x_axis=grid, n_p=n, p_min=-8.0, p_max=8.0)
    params = make_params(m=1.0, hbar=1.0, lam=1.0)
    pot = Potential(free(), grid, params.m)
    X = grid.x[:, None]
    P = grid2d.p[None, :]

    def blob(t: float) -> np.ndarray:
        xc = X - P * t
        return np.exp(-(xc - 1.0) ** 2 / 2.0 - P ** 2 / 2.0) / (2.0 * np.pi)

    snaps = [blob(-delta), blob(0.0), blob(delta)]
    return liouville_residual(snaps, pot, params, grid2d, delta)


def check_kvn(st: Settings, out_dir: Path, stash: dict) -> CheckResult:
    """Recurrence after one harmonic period, residual refinement, and
    phase relabeling invariance of observables."""
    t0 = time.perf_counter()
    scenario = scenario_from_dict(_kvn_scenario(st))
    res = run_kvn(scenario, out_dir / "c06_kvn_recurrence")
    l1 = res["l1_final"]

    r_coarse = _free_streaming_residual(st.kvn_n, 0.04)
    r_fine = _free_streaming_residual(2 * st.kvn_n, 0.02)
    ratio = r_coarse / r_fine

    # phase relabeling: densities, hence expectations, cannot see it
    grid2d = scenario.phase_space
    f0 = res["snaps"][0][1]
    Psi = np.sqrt(f0).astype(complex)
    rng = np.random.default_rng(0)
    theta = rng.uniform(-np.pi, np.pi, size=Psi.shape)
    Psi_re = Psi * np.exp(1j * theta)
    X = scenario.grid.x[:, None]
    P = grid2d.p[None, :]
    rel = 0.0
    for A in (np.ones_like(f0), X + 0.0 * P, P + 0.0 * X, X * P, P ** 2 + 0.0 * X):
        e0 = expectation(A, np.abs(Psi) ** 2, grid2d)
        e1 = expectation(A, np.abs(Psi_re) ** 2, grid2d)
        scale = max(expectation(np.abs(A), np.abs(Psi) ** 2, grid2d), 1e-300)
        rel = max(rel, abs(e1 - e0) / scale)
    ok = l1 <= st.kvn_l1_tol and ratio >= 1.8 and rel <= 1e-12
    return CheckResult(
        "phase-space recurrence, residual refinement, superselection", ok,
        f"period L1 {l1:.2e}, refinement x{ratio:.2f}, relabeling {rel:.2e}",
        f"L1 <= {st.kvn_l1_tol:g}, refinement >= 1.8, relabeling <= 1e-12",
        time.perf_counter() - t0)


def check_sheet_projection(st: Settings, out_dir: Path, stash: dict) -> CheckResult:
    """Exact p-marginal of the ridge and mixture mass additivity."""
    t0 = time.perf_counter()
    grid = make_grid(512, -16.0, 16.0)
    grid2d = PhaseSpaceGrid(x_axis=grid, n_p=128, p_min=-6.0, p_max=6.0)
    params = make_params(m=1.0, hbar=1.0, lam=1.0)

    rho1 = np.exp(-(grid.x + 3.0) ** 2 / 2.0)
    rho1 /= integrate(rho1, grid)
    rho2 = np.exp(-(grid.x - 3.0) ** 2 / 2.0)
    rho2 /= integrate(rho2, grid)
    s1 = LagrangianSheet(rho=rho1, S=1.5 * grid.x, w=0.5)
    s2 = LagrangianSheet(rho=rho2, S=-1.5 * grid.x, w=0.5)

    f1 = project_sheet(MadelungFields(rho=rho1, S=s1.S), grid2d, params)
    marginal_err = float(np.max(np.abs(f1.sum(axis=1) * grid2d.dp - rho1)))

    mix = SheetMixture(sheets=[s1, s2])
    f_mix = mixture_density(mix, grid2d, params)
    mass_err = abs(integrate_2d(f_mix, grid2d) - 1.0)
    ok = marginal_err <= 1e-10 and mass_err <= 1e-10
    return CheckResult("sheet projection marginals and mixture mass", ok,
                       f"marginal error {marginal_err:.2e}, mass error {mass_err:.2e}",
                       "<= 1e-10 each", time.perf_counter() - t0)


def check_crossing_dichotomy(st: Settings, out_dir: Path, stash: dict) -> CheckResult:
    """Coherent two-packet state gives zero trajectory crossings; the
    matching two-sheet mixture crosses; the focusing sheet reports its
    caustic on time."""
    t0 = time.perf_counter()
    coherent = demo_scenario("coherent")
    mixture = demo_scenario("mixture")
    coherent["time"]["t_end"] = st.demo_t_end
    mixture["time"]["t_end"] = st.demo_t_end
    res_c = run(scenario_from_dict(coherent), out_dir / "c08_demo_coherent")
    res_m = run(scenario_from_dict(mixture), out_dir / "c08_demo_mixture")

    # focusing caustic: all characteristics of a zero-phase sheet under a
    # harmonic potential meet at a quarter period
    grid = make_grid(512, -16.0, 16.0)
    params = make_params(m=1.0, hbar=1.0, lam=1.0)
    pot = Potential(harmonic(1.0), grid, params.m)
    rho = np.exp(-grid.x ** 2 / 2.0)
    rho /= integrate(rho, grid)
    sheet = LagrangianSheet(rho=rho, S=np.zeros(grid.n), w=1.0)
    dt = 1e-3
    _, report = evolve_sheet(sheet, pot, params, grid, dt=dt, t_end=2.0,
                             n_particles=2048)
    caustic_ok = (report.caustic_time is not None
                  and abs(report.caustic_time - np.pi / 2.0) <= 2.0 * dt)

    ok = (res_c["crossings"] == 0 and res_m["crossings"] >= 1 and caustic_ok)
    caustic_str = ("none" if report.caustic_time is None
                   else f"{report.caustic_time:.4f}")
    return CheckResult(
        "crossing dichotomy and caustic flag", ok,
        f"coherent crossings {res_c['crossings']}, mixture crossings "
        f"{res_m['crossings']}, caustic at t={caustic_str} (target pi/2)",
        "0 / >= 1 / pi/2 +- 2dt", time.perf_counter() - t0)


def check_interpolating_density_endpoints(st: Settings, out_dir: Path,
                                          stash: dict) -> CheckResult:
    """The interpolating phase-space density hits the sheet at lambda=1
    and the coherent-window density at lambda=0, with intermediate
    momentum variance strictly between."""
    t0 = time.perf_counter()
    grid = make_grid(512, -16.0, 16.0)
    grid2d = PhaseSpaceGrid(x_axis=grid, n_p=128, p_min=-6.0, p_max=6.0)
    psi = np.exp(-grid.x ** 2 / 4.0).astype(complex) * np.exp(1j * 1.0 * grid.x)
    psi /= np.sqrt(integrate(np.abs(psi) ** 2, grid))

    def p_var(f: np.ndarray) -> float:
        P = grid2d.p[None, :]
        mean = integrate_2d(P * f, grid2d)
        return integrate_2d((P - mean) ** 2 * f, grid2d)

    p1 = make_params(m=1.0, hbar=1.0, lam=1.0)
    p0 = make_params(m=1.0, hbar=1.0, lam=0.0)
    ph = make_params(m=1.0, hbar=1.0, lam=0.5)
    F1 = f_sigma_lambda(psi, grid, p1, grid2d)
    F0 = f_sigma_lambda(psi, grid, p0, grid2d)
    Fh = f_sigma_lambda(psi, grid, ph, grid2d)

    sheet = project_sheet(decompose(psi, grid, p1), grid2d, p1)
    hus = husimi(psi, grid, p0, grid2d)
    exact1 = np.array_equal(F1, sheet)
    exact0 = np.array_equal(F0, hus)
    v1, v0, vh = p_var(F1), p_var(F0), p_var(Fh)
    between = min(v0, v1) < vh < max(v0, v1)
    ok = exact1 and exact0 and between
    return CheckResult(
        "interpolating density endpoints", ok,
        f"lambda=1 identical: {exact1}, lambda=0 identical: {exact0}, "
        f"p-variances {v1:.4f} < {vh:.4f} < {v0:.4f}: {between}",
        "bitwise endpoints, strict betweenness", time.perf_counter() - t0)


def check_determinism(st: Settings, out_dir: Path, stash: dict) -> CheckResult:
    """Rerunning a scenario reproduces the CSV bodies byte for byte."""
    t0 = time.perf_counter()
    data = _gaussian_scenario(st, 0.25)
    data["time"]["t_end"] = 0.2
    data["trajectories"] = {"n_particles": 8}
    a = out_dir / "c10_determinism_a"
    b = out_dir / "c10_determinism_b"
    run(scenario_from_dict(data), a)
    run(scenario_from_dict(data), b)
    names = sorted(p.name for p in a.glob("*.csv"))
    same = all(filecmp.cmp(a / nm, b / nm, shallow=False) for nm in names)
    return CheckResult("rerun determinism", same,
                       f"byte-identical CSV bodies across reruns: {same} ({names})",
                       "identical", time.perf_counter() - t0)


ALL_CHECKS = [
    check_quantum_endpoint,
    check_classical_endpoint,
    check_effective_hbar_oracle,
    check_conservation,
    check_residual_convergence,
    check_kvn,
    check_sheet_projection,
    check_crossing_dichotomy,
    check_interpolating_density_endpoints,
    check_determinism,
]


def run_validation(out_dir: str | Path, fast: bool = False,
                   echo=print) -> list[CheckResult]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    st = Settings(fast=fast)
    stash: dict = {}
    results = []
    for check in ALL_CHECKS:
        result = check(st, out_dir, stash)
        echo(result.line())
        results.append(result)
    n_fail = sum(not r.passed for r in results)
    echo(f"{len(results) - n_fail}/{len(results)} checks passed"
         + (" (fast mode)" if fast else ""))
    return results
