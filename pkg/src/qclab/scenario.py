"""Scenario files: strict JSON parsing, validation, and state builders.

A scenario is one JSON object per file.  Unknown keys are errors, not
warnings: a silently misspelled physics parameter is the worst failure
mode a simulation config can have.  All numeric invariants the solver
modules rely on are re-validated here at load time so a bad file fails
before any compute starts.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .grids import PhaseSpaceGrid, SpatialGrid, integrate, make_grid
from .hydro import DEFAULT_NODE_EPS, DEFAULT_Q_CAP, PhysicalParams
from .potentials import PotentialSpec
from . import potentials
from .sheets import LagrangianSheet, SheetMixture
from .solver import SolverConfig, stability_limit

BOUNDARY_DENSITY_TOL = 1e-10


class ConfigError(ValueError):
    """Malformed or invalid scenario input (CLI exit code 2)."""


def _require_keys(section: dict, allowed: dict[str, bool], where: str) -> None:
    """allowed maps key -> required?"""
    for key in section:
        if key not in allowed:
            raise ConfigError(f"unknown key {key!r} in {where}")
    for key, required in allowed.items():
        if required and key not in section:
            raise ConfigError(f"missing key {key!r} in {where}")


def _number(section: dict, key: str, where: str, default=None):
    if key not in section:
        return default
    v = section[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{where}.{key} must be a number, got {v!r}")
    return float(v)


def _integer(section: dict, key: str, where: str, default=None):
    if key not in section:
        return default
    v = section[key]
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{where}.{key} must be an integer, got {v!r}")
    return v


@dataclass
class Scenario:
    params: PhysicalParams
    grid: SpatialGrid
    phase_space: PhaseSpaceGrid | None
    potential_spec: PotentialSpec
    initial: dict
    dt: float
    t_end: float
    output_every: int
    solver_cfg: SolverConfig
    trajectories_n: int | None
    sheet_delta_width: float | None
    sheet_n_particles: int
    sheet_j_min: float
    phasespace_every: int
    s_coh: float | None

    @property
    def is_mixture(self) -> bool:
        return self.initial["kind"] == "mixture"

    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt)) if self.t_end > 0 else 0

    def to_dict(self) -> dict:
        """Fully resolved scenario (derived quantities and defaults filled)."""
        d = {
            "physics": {
                "m": self.params.m,
                "sigma": self.params.sigma,
                "hbar": self.params.hbar,
                "lambda": self.params.lam,
            },
            "grid": {"n": self.grid.n, "x_min": self.grid.x_min, "x_max": self.grid.x_max},
            "potential": _potential_to_dict(self.potential_spec),
            "initial_state": self.initial,
            "time": {"dt": self.dt, "t_end": self.t_end, "output_every": self.output_every},
            "solver": {
                "nonlinear_iters": self.solver_cfg.nonlinear_iters,
                "node_eps": self.solver_cfg.node_eps,
                "q_cap": self.solver_cfg.q_cap,
            },
            "output": {"phasespace_every": self.phasespace_every},
        }
        if self.phase_space is not None:
            d["phase_space"] = {
                "n_p": self.phase_space.n_p,
                "p_min": self.phase_space.p_min,
                "p_max": self.phase_space.p_max,
            }
        if self.trajectories_n is not None:
            d["trajectories"] = {"n_particles": self.trajectories_n}
        d["sheets"] = {
            "delta_width": self.sheet_delta_width,
            "n_particles": self.sheet_n_particles,
            "j_min": self.sheet_j_min,
        }
        if self.s_coh is not None:
            d["kvn"] = {"s_coh": self.s_coh}
        return d


def _potential_to_dict(spec: PotentialSpec) -> dict:
    if spec.kind == "free":
        return {"kind": "free"}
    if spec.kind == "harmonic":
        return {"kind": "harmonic", "omega": spec.omega}
    if spec.kind == "barrier":
        return {"kind": "barrier", "height": spec.height, "width": spec.width,
                "center": spec.center}
    return {"kind": "tabulated", "samples": list(map(float, spec.samples))}


def _parse_physics(section: dict) -> PhysicalParams:
    _require_keys(section, {"m": True, "sigma": False, "hbar": False, "lambda": True},
                  "physics")
    m = _number(section, "m", "physics")
    lam = _number(section, "lambda", "physics")
    sigma = _number(section, "sigma", "physics")
    hbar = _number(section, "hbar", "physics")
    if m is None or m <= 0:
        raise ConfigError(f"physics.m must be positive, got {m}")
    if lam is None or not 0.0 <= lam <= 1.0:
        raise ConfigError(f"lambda out of [0,1]: {lam}")
    if sigma is None and hbar is None:
        raise ConfigError("physics needs one of sigma or hbar (hbar = m*sigma)")
    if sigma is not None and hbar is not None:
        if not np.isclose(hbar, m * sigma, rtol=1e-12, atol=0.0):
            raise ConfigError(
                f"sigma and hbar are inconsistent: the identity hbar = m*sigma "
                f"requires hbar = {m * sigma}, got {hbar}")
    if sigma is None:
        sigma = hbar / m
    if hbar is None:
        hbar = m * sigma
    if sigma <= 0:
        raise ConfigError(f"physics.sigma must be positive, got {sigma}")
    return PhysicalParams(m=m, sigma=sigma, hbar=hbar, lam=lam)


def _parse_potential(section: dict) -> PotentialSpec:
    if "kind" not in section:
        raise ConfigError("potential needs a 'kind'")
    kind = section["kind"]
    try:
        if kind == "free":
            _require_keys(section, {"kind": True}, "potential")
            return potentials.free()
        if kind == "harmonic":
            _require_keys(section, {"kind": True, "omega": True}, "potential")
            return potentials.harmonic(_number(section, "omega", "potential"))
        if kind == "barrier":
            _require_keys(section, {"kind": True, "height": True, "width": True,
                                    "center": False}, "potential")
            return potentials.barrier(_number(section, "height", "potential"),
                                      _number(section, "width", "potential"),
                                      _number(section, "center", "potential", 0.0))
        if kind == "tabulated":
            _require_keys(section, {"kind": True, "samples": True}, "potential")
            return potentials.tabulated(np.asarray(section["samples"], dtype=float))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    raise ConfigError(f"unknown potential kind {kind!r}")


_GAUSSIAN_KEYS = {"kind": False, "x0": True, "p0": False, "s0": True,
                  "amplitude": False, "phase": False}


def _parse_initial(section: dict) -> dict:
    if "kind" not in section:
        raise ConfigError("initial_state needs a 'kind'")
    kind = section["kind"]
    where = "initial_state"
    if kind == "gaussian":
        _require_keys(section, _GAUSSIAN_KEYS | {"kind": True}, where)
        return {"kind": "gaussian",
                "x0": _number(section, "x0", where),
                "p0": _number(section, "p0", where, 0.0),
                "s0": _positive(_number(section, "s0", where), "s0")}
    if kind == "superposition":
        _require_keys(section, {"kind": True, "components": True}, where)
        comps = section["components"]
        if not isinstance(comps, list) or not comps:
            raise ConfigError("superposition needs a nonempty component list")
        out = []
        for i, comp in enumerate(comps):
            w = f"{where}.components[{i}]"
            _require_keys(comp, _GAUSSIAN_KEYS, w)
            out.append({
                "x0": _number(comp, "x0", w),
                "p0": _number(comp, "p0", w, 0.0),
                "s0": _positive(_number(comp, "s0", w), "s0"),
                "amplitude": _number(comp, "amplitude", w, 1.0),
                "phase": _number(comp, "phase", w, 0.0),
            })
        return {"kind": "superposition", "components": out}
    if kind == "plane_wave":
        _require_keys(section, {"kind": True, "k": True}, where)
        return {"kind": "plane_wave", "k": _number(section, "k", where)}
    if kind == "tabulated":
        _require_keys(section, {"kind": True, "real": True, "imag": False}, where)
        return {"kind": "tabulated",
                "real": [float(v) for v in section["real"]],
                "imag": [float(v) for v in section.get("imag", [])] or None}
    if kind == "mixture":
        _require_keys(section, {"kind": True, "sheets": True}, where)
        entries = section["sheets"]
        if not isinstance(entries, list) or not entries:
            raise ConfigError("mixture needs a nonempty sheet list")
        out = []
        total_w = 0.0
        for i, entry in enumerate(entries):
            w = f"{where}.sheets[{i}]"
            _require_keys(entry, {"x0": True, "s0": True, "p0": False, "weight": True}, w)
            weight = _number(entry, "weight", w)
            if weight is None or weight < 0 or weight > 1:
                raise ConfigError(f"{w}.weight out of [0,1]: {weight}")
            total_w += weight
            out.append({"x0": _number(entry, "x0", w),
                        "s0": _positive(_number(entry, "s0", w), "s0"),
                        "p0": _number(entry, "p0", w, 0.0),
                        "weight": weight})
        if abs(total_w - 1.0) > 1e-10:
            raise ConfigError(f"mixture weights sum to {total_w}, expected 1")
        return {"kind": "mixture", "sheets": out}
    raise ConfigError(f"unknown initial_state kind {kind!r}")


def _positive(v: float | None, name: str) -> float:
    if v is None or v <= 0:
        raise ConfigError(f"{name} must be positive, got {v}")
    return v


def scenario_from_dict(data: dict) -> Scenario:
    _require_keys(data, {
        "physics": True, "grid": True, "phase_space": False, "potential": True,
        "initial_state": True, "time": True, "solver": False,
        "trajectories": False, "sheets": False, "output": False, "kvn": False,
    }, "scenario")

    params = _parse_physics(data["physics"])

    gsec = data["grid"]
    _require_keys(gsec, {"n": True, "x_min": True, "x_max": True}, "grid")
    try:
        grid = make_grid(_integer(gsec, "n", "grid"),
                         _number(gsec, "x_min", "grid"),
                         _number(gsec, "x_max", "grid"))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    phase_space = None
    if "phase_space" in data:
        psec = data["phase_space"]
        _require_keys(psec, {"n_p": True, "p_min": True, "p_max": True}, "phase_space")
        try:
            phase_space = PhaseSpaceGrid(
                x_axis=grid,
                n_p=_integer(psec, "n_p", "phase_space"),
                p_min=_number(psec, "p_min", "phase_space"),
                p_max=_number(psec, "p_max", "phase_space"))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    potential_spec = _parse_potential(data["potential"])
    if potential_spec.kind == "tabulated" and len(potential_spec.samples) != grid.n:
        raise ConfigError(
            f"tabulated potential has {len(potential_spec.samples)} samples "
            f"for a grid of {grid.n}")

    initial = _parse_initial(data["initial_state"])
    if initial["kind"] == "tabulated":
        if len(initial["real"]) != grid.n:
            raise ConfigError("tabulated initial state does not match the grid size")
        if initial["imag"] is not None and len(initial["imag"]) != grid.n:
            raise ConfigError("tabulated initial state imag part does not match the grid size")

    tsec = data["time"]
    _require_keys(tsec, {"dt": True, "t_end": True, "output_every": False}, "time")
    dt = _number(tsec, "dt", "time")
    t_end = _number(tsec, "t_end", "time")
    output_every = _integer(tsec, "output_every", "time", 1)
    if dt is None or dt <= 0:
        raise ConfigError(f"time.dt must be positive, got {dt}")
    if t_end is None or t_end < 0:
        raise ConfigError(f"time.t_end must be nonnegative, got {t_end}")
    if output_every < 1:
        raise ConfigError(f"time.output_every must be >= 1, got {output_every}")

    ssec = data.get("solver", {})
    _require_keys(ssec, {"nonlinear_iters": False, "node_eps": False, "q_cap": False},
                  "solver")
    try:
        solver_cfg = SolverConfig(
            dt=dt,
            nonlinear_iters=_integer(ssec, "nonlinear_iters", "solver", 2),
            node_eps=_number(ssec, "node_eps", "solver", DEFAULT_NODE_EPS),
            q_cap=_number(ssec, "q_cap", "solver", DEFAULT_Q_CAP))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    if not initial["kind"] == "mixture" and dt > stability_limit(grid, params):
        raise ConfigError(
            f"time.dt={dt} exceeds the spectral stability guard "
            f"{stability_limit(grid, params):.3e} for this grid and lambda")

    trajectories_n = None
    if "trajectories" in data:
        trsec = data["trajectories"]
        _require_keys(trsec, {"n_particles": True}, "trajectories")
        trajectories_n = _integer(trsec, "n_particles", "trajectories")
        if trajectories_n < 1:
            raise ConfigError("trajectories.n_particles must be >= 1")

    shsec = data.get("sheets", {})
    _require_keys(shsec, {"delta_width": False, "n_particles": False, "j_min": False},
                  "sheets")
    sheet_delta_width = _number(shsec, "delta_width", "sheets", None)
    sheet_n_particles = _integer(shsec, "n_particles", "sheets", 4096)
    sheet_j_min = _number(shsec, "j_min", "sheets", 1e-3)

    osec = data.get("output", {})
    _require_keys(osec, {"phasespace_every": False}, "output")
    phasespace_every = _integer(osec, "phasespace_every", "output", 1)
    if phasespace_every < 1:
        raise ConfigError("output.phasespace_every must be >= 1")

    s_coh = None
    if "kvn" in data:
        ksec = data["kvn"]
        _require_keys(ksec, {"s_coh": False}, "kvn")
        s_coh = _number(ksec, "s_coh", "kvn", None)
        if s_coh is not None and s_coh <= 0:
            raise ConfigError("kvn.s_coh must be positive")

    if initial["kind"] == "mixture" and phase_space is None:
        raise ConfigError("mixture scenarios need a phase_space section")

    return Scenario(params=params, grid=grid, phase_space=phase_space,
                    potential_spec=potential_spec, initial=initial, dt=dt,
                    t_end=t_end, output_every=output_every, solver_cfg=solver_cfg,
                    trajectories_n=trajectories_n,
                    sheet_delta_width=sheet_delta_width,
                    sheet_n_particles=sheet_n_particles, sheet_j_min=sheet_j_min,
                    phasespace_every=phasespace_every, s_coh=s_coh)


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read scenario file {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"scenario parse error in {path} at line {exc.lineno}, "
            f"column {exc.colno}: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"scenario file {path} must hold a JSON object")
    return scenario_from_dict(data)


def build_initial_psi(scenario: Scenario) -> np.ndarray:
    """Construct and normalize the initial wave samples."""
    grid, params = scenario.grid, scenario.params
    init = scenario.initial
    x = grid.x
    kind = init["kind"]
    if kind == "gaussian":
        psi = _gaussian_packet(x, init["x0"], init["p0"], init["s0"], params.hbar)
    elif kind == "superposition":
        psi = np.zeros(grid.n, dtype=complex)
        for comp in init["components"]:
            psi += comp["amplitude"] * np.exp(1j * comp["phase"]) * _gaussian_packet(
                x, comp["x0"], comp["p0"], comp["s0"], params.hbar)
    elif kind == "plane_wave":
        k = init["k"]
        mode = k * grid.length / (2.0 * np.pi)
        if abs(mode - round(mode)) > 1e-9:
            raise ConfigError(
                f"plane wave k={k} is not commensurate with the periodic domain "
                f"(k*L/2pi = {mode})")
        psi = np.exp(1j * k * x) / np.sqrt(grid.length)
    elif kind == "tabulated":
        re = np.asarray(init["real"], dtype=float)
        im = np.asarray(init["imag"], dtype=float) if init["imag"] is not None else 0.0
        psi = re + 1j * im
    else:
        raise ConfigError(f"initial_state kind {kind!r} does not describe a wave state")
    norm = np.sqrt(integrate(np.abs(psi) ** 2, grid))
    if norm == 0:
        raise ConfigError("initial state has zero norm")
    psi = psi / norm
    _warn_boundary_density(np.abs(psi) ** 2, scenario)
    return psi


def build_mixture(scenario: Scenario) -> SheetMixture:
    grid = scenario.grid
    sheets = []
    for entry in scenario.initial["sheets"]:
        rho = np.exp(-((grid.x - entry["x0"]) ** 2) / (2.0 * entry["s0"] ** 2))
        rho /= integrate(rho, grid)
        S = entry["p0"] * grid.x
        sheets.append(LagrangianSheet(rho=rho, S=S, w=entry["weight"]))
    return SheetMixture(sheets=sheets)


def _gaussian_packet(x: np.ndarray, x0: float, p0: float, s0: float,
                     hbar: float) -> np.ndarray:
    return ((2.0 * np.pi * s0 ** 2) ** (-0.25)
            * np.exp(-((x - x0) ** 2) / (4.0 * s0 ** 2))
            * np.exp(1j * p0 * (x - x0) / hbar))


def _warn_boundary_density(rho: np.ndarray, scenario: Scenario) -> None:
    peak = rho.max()
    edge = max(rho[:3].max(), rho[-3:].max())
    if edge > BOUNDARY_DENSITY_TOL * peak:
        warnings.warn(
            f"initial density at the domain boundary is {edge / peak:.2e} of the "
            f"peak; the periodic wrap may contaminate the run", stacklevel=2)
