"""Pipeline orchestration and bit-stable file output.

Every run writes a self-contained directory: metadata.json with the
fully resolved scenario and library versions, summary.csv with the
per-snapshot diagnostics, density.csv in long form, and optionally
trajectories.csv and phasespace.csv.  Floats are serialized with 17
significant digits, so rerunning a scenario reproduces the CSV bodies
byte for byte; a non-finite value anywhere aborts the write instead of
leaking NaN into the output.
"""

from __future__ import annotations

import json
from dataclasses import replace
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .grids import integrate
from .hydro import quantum_potential
from .kvn import LiouvilleStepper, PhaseSpaceAmplitude, husimi, liouville_residual
from .potentials import Potential
from .scenario import ConfigError, Scenario, build_initial_psi, build_mixture
from .sheets import SheetEnsemble, _ensemble_step, rebuild_sheet, sample_sheet
from .solver import NumericalFailure, WaveState, evolve
from .trajectories import advect_particles

SUMMARY_HEADER = ["t", "norm", "energy", "width", "center", "hj_res_l2", "cont_res_l2"]
DENSITY_HEADER = ["t", "x", "rho", "S", "Q"]
TRAJECTORY_HEADER = ["t", "particle_id", "x"]
PHASESPACE_HEADER = ["t", "x", "p", "f"]
SWEEP_HEADER = ["lambda", "regime", "final_width", "final_energy",
                "hj_res_l2", "cont_res_l2"]
KVN_SUMMARY_HEADER = ["t", "mass", "energy", "l1_vs_t0", "liouville_res_l2"]


def _fmt(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    v = float(value)
    if not np.isfinite(v):
        raise NumericalFailure("refusing to write a non-finite value to CSV", float("nan"))
    return format(v, ".17g")


def write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


BUNDLE_FILES = ("metadata.json", "summary.csv", "density.csv", "trajectories.csv",
                "phasespace.csv", "kvn_summary.csv")


def _clean_bundle(out_dir: Path) -> None:
    """Remove bundle files from previous runs so a directory never mixes
    outputs of different configurations."""
    for name in BUNDLE_FILES:
        try:
            (out_dir / name).unlink()
        except FileNotFoundError:
            pass


def _write_metadata(out_dir: Path, scenario: Scenario, mode: str) -> None:
    meta = {
        "mode": mode,
        "scenario": scenario.to_dict(),
        "versions": {
            "qclab": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
    }
    (out_dir / "metadata.json").write_text(
        json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _support_positions(rho: np.ndarray, grid, n: int) -> np.ndarray:
    """Stratified fan of test particles across the density support."""
    live = np.flatnonzero(rho > 1e-10 * rho.max())
    a, b = grid.x[live[0]], grid.x[live[-1]]
    return a + (np.arange(n) + 0.5) * (b - a) / n


def run(scenario: Scenario, out_dir: str | Path) -> dict:
    """Execute the scenario pipeline and write the output bundle.

    Returns a small dict of final diagnostics (used by sweeps and demos).
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _clean_bundle(out_dir)
    if scenario.is_mixture:
        return _run_mixture(scenario, out_dir)
    return _run_wave(scenario, out_dir)


def _run_wave(scenario: Scenario, out_dir: Path) -> dict:
    grid, params, cfg = scenario.grid, scenario.params, scenario.solver_cfg
    potential = Potential(scenario.potential_spec, grid, params.m)
    V = potential.values()
    psi0 = build_initial_psi(scenario)
    state = WaveState(grid=grid, psi=psi0, t=0.0)

    velocity_every = scenario.trajectories_n and max(1, scenario.output_every // 4)
    result = evolve(state, V, params, cfg, scenario.n_steps(),
                    scenario.output_every, velocity_every=velocity_every)

    summary_rows = [
        (s.t, s.norm_pre, s.energy, s.width, s.center, s.hj_res_l2, s.cont_res_l2)
        for s in result.snapshots
    ]
    write_csv(out_dir / "summary.csv", SUMMARY_HEADER, summary_rows)

    def density_rows():
        for s in result.snapshots:
            Q = quantum_potential(s.fields.rho, grid, params, cfg.node_eps, cfg.q_cap)
            for i in range(grid.n):
                yield (s.t, grid.x[i], s.fields.rho[i], s.fields.S[i], Q[i])

    write_csv(out_dir / "density.csv", DENSITY_HEADER, density_rows())

    crossings = None
    if scenario.trajectories_n and len(result.velocities) >= 2:
        x0 = _support_positions(result.snapshots[0].fields.rho, grid,
                                scenario.trajectories_n)
        traj = advect_particles(result.velocities, x0, grid)
        write_csv(out_dir / "trajectories.csv", TRAJECTORY_HEADER,
                  ((traj.times[j], i, traj.positions[j, i])
                   for j in range(traj.times.size)
                   for i in range(traj.positions.shape[1])))
        from .trajectories import crossing_count
        crossings = crossing_count(traj)

    if scenario.phase_space is not None:
        from .sheets import f_sigma_lambda

        def ps_rows():
            for si, s in enumerate(result.snapshots):
                if si % scenario.phasespace_every:
                    continue
                F = f_sigma_lambda(s.state.psi, grid, params, scenario.phase_space,
                                   scenario.sheet_delta_width, scenario.s_coh)
                for i in range(scenario.phase_space.shape[0]):
                    for j in range(scenario.phase_space.shape[1]):
                        yield (s.t, grid.x[i], scenario.phase_space.p[j], F[i, j])

        write_csv(out_dir / "phasespace.csv", PHASESPACE_HEADER, ps_rows())

    _write_metadata(out_dir, scenario, "wave")
    last = result.snapshots[-1]
    return {
        "final_width": last.width,
        "final_energy": last.energy,
        "hj_res_l2": last.hj_res_l2,
        "cont_res_l2": last.cont_res_l2,
        "max_norm_drift": result.max_norm_drift,
        "crossings": crossings,
        "snapshots": result.snapshots,
    }


def _run_mixture(scenario: Scenario, out_dir: Path) -> dict:
    grid, params = scenario.grid, scenario.params
    potential = Potential(scenario.potential_spec, grid, params.m)
    V = potential.values()
    mixture = build_mixture(scenario)

    n_steps = scenario.n_steps()
    every = scenario.output_every
    dt = scenario.dt

    ensembles = [sample_sheet(s, grid, scenario.sheet_n_particles)
                 for s in mixture.sheets]
    weights = [s.w for s in mixture.sheets]

    snap_times: list[float] = []
    frames: list[list] = []          # per snapshot: list of SheetFrame per sheet
    raw_masses: list[float] = []

    def take_snapshot(t: float) -> None:
        sheet_frames = [rebuild_sheet(e, grid) for e in ensembles]
        snap_times.append(t)
        frames.append(sheet_frames)
        raw_masses.append(sum(w * (1.0 - f.mass_drift) for w, f in
                              zip(weights, sheet_frames)))

    take_snapshot(0.0)
    caustic_time = None
    for i in range(1, n_steps + 1):
        for ens in ensembles:
            _ensemble_step(ens, potential, params, dt, scenario.sheet_j_min)
        hit = [e.caustic_time for e in ensembles if e.caustic_time is not None]
        if hit:
            caustic_time = min(hit)
            take_snapshot(i * dt)
            break
        if i % every == 0 or i == n_steps:
            take_snapshot(i * dt)

    summary_rows = []
    for j, (t, sheet_frames) in enumerate(zip(snap_times, frames)):
        rho_mix = sum(w * f.rho for w, f in zip(weights, sheet_frames))
        center = integrate(rho_mix * grid.x, grid)
        width = float(np.sqrt(max(integrate(rho_mix * (grid.x - center) ** 2, grid), 0.0)))
        energy = sum(w * integrate(f.rho * (f.p ** 2 / (2.0 * params.m) + V), grid)
                     for w, f in zip(weights, sheet_frames))
        hj, cont = _mixture_residuals(j, snap_times, frames, weights, V, grid, params)
        summary_rows.append((t, raw_masses[j], energy, width, center, hj, cont))
    write_csv(out_dir / "summary.csv", SUMMARY_HEADER, summary_rows)

    def density_rows():
        for t, sheet_frames in zip(snap_times, frames):
            rho_mix = sum(w * f.rho for w, f in zip(weights, sheet_frames))
            S_mean = sum(w * f.S for w, f in zip(weights, sheet_frames))
            Q = quantum_potential(rho_mix, grid, params)
            for i in range(grid.n):
                yield (t, grid.x[i], rho_mix[i], S_mean[i], Q[i])

    write_csv(out_dir / "density.csv", DENSITY_HEADER, density_rows())

    crossings = None
    if scenario.trajectories_n and len(snap_times) >= 2:
        per_sheet = max(1, scenario.trajectories_n // len(mixture.sheets))
        all_positions = []
        for sheet_idx, sheet in enumerate(mixture.sheets):
            x0 = _support_positions(sheet.rho, grid, per_sheet)
            v_snaps = [(t, fr[sheet_idx].p / params.m)
                       for t, fr in zip(snap_times, frames)]
            traj = advect_particles(v_snaps, x0, grid)
            all_positions.append(traj.positions)
        union = np.concatenate(all_positions, axis=1)
        order = np.argsort(union[0], kind="stable")
        union = union[:, order]
        times_arr = np.array(snap_times)
        write_csv(out_dir / "trajectories.csv", TRAJECTORY_HEADER,
                  ((times_arr[j], i, union[j, i])
                   for j in range(times_arr.size)
                   for i in range(union.shape[1])))
        from .trajectories import TrajectorySet, crossing_count
        crossings = crossing_count(TrajectorySet(
            times=times_arr, positions=union, initial_positions=union[0]))

    if scenario.phase_space is not None:
        from .hydro import MadelungFields
        from .sheets import project_sheet

        def ps_rows():
            for si, (t, sheet_frames) in enumerate(zip(snap_times, frames)):
                if si % scenario.phasespace_every:
                    continue
                F = sum(w * project_sheet(MadelungFields(rho=f.rho, S=f.S),
                                          scenario.phase_space, params,
                                          scenario.sheet_delta_width)
                        for w, f in zip(weights, sheet_frames))
                for i in range(scenario.phase_space.shape[0]):
                    for j in range(scenario.phase_space.shape[1]):
                        yield (t, grid.x[i], scenario.phase_space.p[j], F[i, j])

        write_csv(out_dir / "phasespace.csv", PHASESPACE_HEADER, ps_rows())

    _write_metadata(out_dir, scenario, "mixture")
    last = summary_rows[-1]
    return {
        "final_width": last[3],
        "final_energy": last[2],
        "hj_res_l2": last[5],
        "cont_res_l2": last[6],
        "caustic_time": caustic_time,
        "crossings": crossings,
        "snap_times": snap_times,
        "frames": frames,
    }


def _mixture_residuals(j, snap_times, frames, weights, V, grid, params):
    """Weighted classical HJ and continuity residual norms at snapshot j."""
    from .hydro import MadelungFields, continuity_residual, hj_residual

    if len(snap_times) < 2:
        return 0.0, 0.0
    prev = max(j - 1, 0)
    nxt = min(j + 1, len(snap_times) - 1)
    span = snap_times[nxt] - snap_times[prev]
    if span == 0.0:
        return 0.0, 0.0
    hj_total = 0.0
    cont_total = 0.0
    for s, w in enumerate(weights):
        fields = MadelungFields(rho=frames[j][s].rho, S=frames[j][s].S)
        dS_dt = (frames[nxt][s].S - frames[prev][s].S) / span
        drho_dt = (frames[nxt][s].rho - frames[prev][s].rho) / span
        hj = hj_residual(fields, V, grid, params, dS_dt)
        cont = continuity_residual(fields, grid, params, drho_dt)
        hj_total += w * float(np.sqrt(integrate(hj ** 2, grid)))
        cont_total += w * float(np.sqrt(integrate(cont ** 2, grid)))
    return hj_total, cont_total


def run_kvn(scenario: Scenario, out_dir: str | Path) -> dict:
    """Phase-space amplitude pipeline: advect sqrt of the initial
    coherent-window density along the classical flow."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _clean_bundle(out_dir)
    grid, params = scenario.grid, scenario.params
    grid2d = scenario.phase_space
    if grid2d is None:
        raise ConfigError("kvn pipeline needs a phase_space section")
    potential = Potential(scenario.potential_spec, grid, params.m)

    psi0 = build_initial_psi(scenario)
    f0 = husimi(psi0, grid, params, grid2d, scenario.s_coh)
    amp = PhaseSpaceAmplitude(grid2d, np.sqrt(f0).astype(complex), 0.0).normalized()

    edge_mass = (amp.Psi[:, :3], amp.Psi[:, -3:])
    edge = sum(float(np.sum(np.abs(e) ** 2)) * grid2d.cell_area for e in edge_mass)
    if edge > 1e-10:
        raise ConfigError(
            f"initial phase-space mass within 3 cells of the p boundary is "
            f"{edge:.2e} (> 1e-10); widen the p domain")

    stepper = LiouvilleStepper(grid2d, potential, params, scenario.dt)
    n_steps = scenario.n_steps()
    every = scenario.output_every

    f_first = np.abs(amp.Psi) ** 2
    snaps = [(0.0, f_first)]
    Psi = amp.Psi
    for i in range(1, n_steps + 1):
        Psi = stepper.apply(Psi)
        if not np.all(np.isfinite(Psi.view(float))):
            raise NumericalFailure("non-finite phase-space amplitude", i * scenario.dt)
        if i % every == 0 or i == n_steps:
            snaps.append((i * scenario.dt, np.abs(Psi) ** 2))

    dt_snap = every * scenario.dt
    rows = []
    for j, (t, f) in enumerate(snaps):
        mass = float(np.sum(f)) * grid2d.cell_area
        X = grid.x[:, None]
        P = grid2d.p[None, :]
        H = P ** 2 / (2.0 * params.m) + potential.values(X)
        energy = float(np.sum(H * f)) * grid2d.cell_area
        l1 = float(np.sum(np.abs(f - f_first))) * grid2d.cell_area
        if 0 < j < len(snaps) - 1:
            res = liouville_residual([snaps[j - 1][1], f, snaps[j + 1][1]],
                                     potential, params, grid2d, dt_snap)
        else:
            res = 0.0
        rows.append((t, mass, energy, l1, res))
    write_csv(out_dir / "kvn_summary.csv", KVN_SUMMARY_HEADER, rows)

    def ps_rows():
        for si, (t, f) in enumerate(snaps):
            if si % scenario.phasespace_every:
                continue
            for i in range(grid2d.shape[0]):
                for j2 in range(grid2d.shape[1]):
                    yield (t, grid.x[i], grid2d.p[j2], f[i, j2])

    write_csv(out_dir / "phasespace.csv", PHASESPACE_HEADER, ps_rows())
    _write_metadata(out_dir, scenario, "kvn")
    return {"l1_final": rows[-1][3], "mass_final": rows[-1][1], "snaps": snaps}


def sweep_lambda(scenario: Scenario, lambdas: list[float],
                 out_dir: str | Path) -> list[dict]:
    """One run per interpolation weight plus a sweep.csv overview."""
    if not lambdas:
        raise ConfigError("sweep needs at least one lambda")
    for lam in lambdas:
        if not 0.0 <= lam <= 1.0:
            raise ConfigError(f"lambda out of [0,1]: {lam}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    rows = []
    results = []
    for lam in lambdas:
        sub = replace(scenario, params=replace(scenario.params, lam=float(lam)))
        res = run(sub, out_dir / f"lambda_{lam:g}")
        regime = "quantum" if lam == 0.0 else ("classical" if lam == 1.0 else "interpolating")
        rows.append((lam, regime, res["final_width"], res["final_energy"],
                     res["hj_res_l2"], res["cont_res_l2"]))
        results.append(res)
    write_csv(out_dir / "sweep.csv",
              SWEEP_HEADER, ((r[0], r[1], r[2], r[3], r[4], r[5]) for r in rows))
    return results


DEMO_CROSSING_BASE = {
    "physics": {"m": 1.0, "sigma": 1.0, "lambda": 1.0},
    "grid": {"n": 1024, "x_min": -24.0, "x_max": 24.0},
    "phase_space": {"n_p": 128, "p_min": -4.0, "p_max": 4.0},
    "potential": {"kind": "free"},
    "time": {"dt": 5e-4, "t_end": 1.8, "output_every": 40},
    "trajectories": {"n_particles": 64},
    "output": {"phasespace_every": 45},
}


def demo_scenario(mode: str) -> dict:
    """Built-in two-packet scenarios for the crossing dichotomy.

    The same pair of packets either forms one coherent state (whose
    single-valued velocity field forbids trajectory crossing) or an
    incoherent two-sheet mixture (whose per-sheet streams pass through
    each other).
    """
    data = json.loads(json.dumps(DEMO_CROSSING_BASE))
    if mode == "coherent":
        data["initial_state"] = {
            "kind": "superposition",
            "components": [
                {"x0": -5.0, "p0": 1.0, "s0": 1.0},
                {"x0": 5.0, "p0": -1.0, "s0": 1.0},
            ],
        }
        data["solver"] = {"q_cap": 1e4}
        # interference fringes carry unbounded local momentum, so no
        # finite p window can hold this state's ridge projection
        del data["phase_space"]
    elif mode == "mixture":
        data["initial_state"] = {
            "kind": "mixture",
            "sheets": [
                {"x0": -5.0, "s0": 1.0, "p0": 1.0, "weight": 0.5},
                {"x0": 5.0, "s0": 1.0, "p0": -1.0, "weight": 0.5},
            ],
        }
        data["time"] = {"dt": 1e-3, "t_end": 1.8, "output_every": 10}
    else:
        raise ConfigError(f"unknown demo mode {mode!r}")
    return data
