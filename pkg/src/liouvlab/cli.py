"""Command-line entry point: named experiments with reproducible outputs.

Each experiment loads a strict JSON config (all values in 1/us and rad/us, or
MHz with --units mhz), runs the corresponding pipeline, writes CSV/JSON
datasets with pinned number formatting, and emits a RunManifest with content
hashes. Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

import argparse
import math
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__, analysis, io, numerics
from .config import (
    ExperimentConfig,
    apply_units,
    deep_merge,
    load_config_file,
    nest_override,
    parse_set_override,
    resolve,
)
from .dynamics import IntegratorConfig, integrate_constant, integrate_scheduled
from .errors import ConfigError, LiouvlabError
from .liouvillian import build_superoperator, ep_scan, pair_branches, steady_state, vec
from .model import DriveParams, Rates, basis_ket, make_system, minus_x, plus_x
from .trajectories import run_ensemble, run_trajectory

TWO_PI = 2.0 * math.pi

EXPERIMENT_DEFAULTS: dict[str, dict] = {
    "spectrum": {
        "system": {"dim": 2, "gamma_e": 4.4, "gamma_phi": 0.1},
        "scan": {"J_start": 0.0, "J_stop": 2.0, "J_step": 0.005, "Delta": 0.0},
    },
    "ep-map": {
        "system": {"dim": 2, "gamma_e": 4.5, "gamma_phi": 0.0},
        "scan": {"J_range": [0.05, 1.1], "Delta_range": [-1.1, 1.1], "resolution": 45},
    },
    "fig1": {
        "system": {"dim": 2, "gamma_e": 4.4, "gamma_phi": 0.1},
        "scan": {
            "J_start": 0.1, "J_stop": 1.8, "J_step": 0.05,
            "window": 10.0, "n_samples": 500,
            "heatmap_t_max": 3.0, "heatmap_samples": 301,
        },
    },
    "fig2": {
        "system": {"dim": 2, "gamma_e": 4.6, "gamma_phi": 0.2},
        "schedule": {"T": 2.0, "J_max": 16.0, "Delta_max": 10.0 * math.pi},
        "integrator": {"dt": 1e-3},
        "ensemble": {"n": 1000, "master_seed": 12345, "dt": 5e-4, "store_every": 20},
    },
    "fig4": {
        "system": {
            "dim": 3, "gamma_e": 4.2, "gamma_phi": 0.2,
            "gamma_f": 0.3, "gamma_f_extra": 0.75,
        },
        "scan": {
            "J_start": 0.2, "J_stop": 1.8, "J_step": 0.05,
            "window": 10.0, "n_samples": 500,
            "heatmap_t_max": 3.0, "heatmap_samples": 301,
        },
    },
    "sweeps": {
        "system": {"dim": 2, "gamma_e": 4.6, "gamma_phi": 0.2},
        "schedule": {"T": 2.0, "J_max": 16.0, "Delta_max": 10.0 * math.pi},
        "scan": {
            "T_values": [0.25 + 0.125 * i for i in range(19)],
            "Delta_max_values": [TWO_PI * (0.5 + 0.5 * i) for i in range(16)],
        },
    },
    "steady-state": {
        "system": {"dim": 2, "gamma_e": 4.4, "gamma_phi": 0.1, "J": 1.8, "Delta": 0.0},
    },
    "trajectories": {
        "system": {"dim": 2, "gamma_e": 4.6, "gamma_phi": 0.2},
        "schedule": {"T": 2.0, "J_max": 16.0, "Delta_max": 10.0 * math.pi},
        "ensemble": {"n": 1000, "master_seed": 12345, "dt": 5e-4, "store_every": 20},
    },
}


def _density(psi: np.ndarray) -> np.ndarray:
    return np.outer(psi, psi.conj())


def _bloch_of_states(states: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Bloch components of an array of qubit pure states (n, 2)."""
    pair = states[:, 0] * states[:, 1].conj()
    x = 2.0 * pair.real
    y = -2.0 * pair.imag
    z = np.abs(states[:, 0]) ** 2 - np.abs(states[:, 1]) ** 2
    return x, y, z


def _j_grid(scan: dict) -> np.ndarray:
    if "J_values" in scan:
        grid = np.asarray(scan["J_values"], dtype=float)
    else:
        start = float(scan.get("J_start", 0.0))
        stop = float(scan.get("J_stop", 0.0))
        step = float(scan.get("J_step", 0.0))
        if step <= 0.0 or stop < start:
            raise ConfigError("scan needs J_values or J_start <= J_stop with J_step > 0")
        grid = np.arange(start, stop + 0.5 * step, step)
    if grid.ndim != 1 or len(grid) == 0:
        raise ConfigError("empty J grid")
    return grid


def _scheduled_steps(T: float, dt: float) -> int:
    return max(1000, int(math.ceil(T / dt)))


# ---------------------------------------------------------------------------
# Commands


def cmd_spectrum(cfg: ExperimentConfig) -> list[Path]:
    """Eigenvalue branches versus J at fixed Delta, with EP markers."""
    J_grid = _j_grid(cfg.scan)
    Delta = float(cfg.scan.get("Delta", 0.0))
    raw = []
    for J in J_grid:
        system = cfg.system.with_drive(DriveParams(J=float(J), Delta=Delta))
        sop = build_superoperator(system)
        raw.append(numerics.eig_general(sop.matrix).eigenvalues)
    branches = pair_branches(raw)
    n_modes = branches.shape[1]

    markers = [analysis.ep_coupling(cfg.system.rates, 2)]
    if cfg.system.dim == 3:
        markers.append(cfg.system.rates.gamma_e / 4.0)
    step = float(J_grid[1] - J_grid[0]) if len(J_grid) > 1 else 0.0
    near_ep = np.zeros(len(J_grid), dtype=int)
    for m in markers:
        near_ep |= np.abs(J_grid - m) <= max(step, 1e-12)

    header = (
        ["J"]
        + [f"re_{k}" for k in range(n_modes)]
        + [f"im_{k}" for k in range(n_modes)]
        + ["near_ep"]
    )
    rows = [
        [J, *branches[i].real, *branches[i].imag, int(near_ep[i])]
        for i, J in enumerate(J_grid)
    ]
    out = []
    if cfg.wants("csv"):
        out.append(io.write_csv(cfg.output_dir / "spectrum.csv", header, rows))
    if cfg.wants("json"):
        out.append(io.write_json(cfg.output_dir / "spectrum_summary.json", {
            "n_branches": n_modes,
            "ep_markers": markers,
            "J_min": float(J_grid[0]),
            "J_max": float(J_grid[-1]),
            "Delta": Delta,
        }))
    return out


def cmd_ep_map(cfg: ExperimentConfig) -> list[Path]:
    """Grid survey of the (J, Delta) plane with EP lines and triple points."""
    scan = cfg.scan
    J_range = tuple(map(float, scan.get("J_range", [0.05, 1.1])))
    Delta_range = tuple(map(float, scan.get("Delta_range", [-1.1, 1.1])))
    resolution = int(scan.get("resolution", 45))
    ep_map = ep_scan(cfg.system, J_range, Delta_range, resolution, threads=cfg.threads)

    out = []
    if cfg.wants("csv"):
        header = ["J", "Delta", "gap", "angle", "ep_order"]
        rows = [
            [ep_map.J_values[iJ], ep_map.Delta_values[iD],
             ep_map.gap[iD, iJ], ep_map.angle[iD, iJ], int(ep_map.ep_order[iD, iJ])]
            for iD in range(len(ep_map.Delta_values))
            for iJ in range(len(ep_map.J_values))
        ]
        out.append(io.write_csv(cfg.output_dir / "ep_map_grid.csv", header, rows))
        line_rows = [
            [line_id, k, point[0], point[1]]
            for line_id, line in enumerate(ep_map.ep_lines)
            for k, point in enumerate(line)
        ]
        out.append(io.write_csv(
            cfg.output_dir / "ep_map_lines.csv",
            ["line_id", "point_idx", "J", "Delta"],
            line_rows,
        ))
    if cfg.wants("json"):
        out.append(io.write_json(cfg.output_dir / "ep_map_summary.json", {
            "n_lines": len(ep_map.ep_lines),
            "line_lengths": [int(len(line)) for line in ep_map.ep_lines],
            "ep3_points": [list(p) for p in ep_map.ep3_points],
            "J_range": list(J_range),
            "Delta_range": list(Delta_range),
            "resolution": resolution,
        }))
    return out


def cmd_fig1(cfg: ExperimentConfig) -> list[Path]:
    """Qubit excited-population dynamics across J plus the transition scan."""
    if cfg.system.dim != 2:
        raise ConfigError("this experiment needs a dim=2 system")
    scan = cfg.scan
    J_grid = _j_grid(scan)
    t_hm = np.linspace(0.0, float(scan.get("heatmap_t_max", 3.0)),
                       int(scan.get("heatmap_samples", 301)))
    rho0 = _density(basis_ket(2, 1))

    heat_rows = []
    cut_series = {}
    cut_values = (float(J_grid[0]), float(J_grid[-1]))
    for J in J_grid:
        system = cfg.system.with_drive(DriveParams(J=float(J), Delta=cfg.system.drive.Delta))
        evo = integrate_constant(system, rho0, t_hm, cfg.integrator)
        pop_e = evo.states[:, 1, 1].real
        heat_rows.extend([float(J), float(t), float(p)] for t, p in zip(t_hm, pop_e))
        if float(J) in cut_values:
            cut_series[float(J)] = pop_e

    scan_result = analysis.scan_transition(
        cfg.system, J_grid,
        window=float(scan.get("window", 10.0)),
        n_samples=int(scan.get("n_samples", 500)),
        cfg=cfg.integrator,
    )

    out = []
    if cfg.wants("csv"):
        out.append(io.write_csv(cfg.output_dir / "fig1_heatmap.csv",
                                ["J", "t", "rho_ee"], heat_rows))
        cut_header = ["t"] + [f"rho_ee_J{J:g}" for J in cut_values]
        cut_rows = [
            [float(t)] + [float(cut_series[J][i]) for J in cut_values]
            for i, t in enumerate(t_hm)
        ]
        out.append(io.write_csv(cfg.output_dir / "fig1_cuts.csv", cut_header, cut_rows))
        header, rows = scan_result.table()
        out.append(io.write_csv(cfg.output_dir / "fig1_transition.csv", header, rows))
    if cfg.wants("json"):
        out.append(io.write_json(cfg.output_dir / "fig1_summary.json", {
            "j_ep": scan_result.j_ep,
            "transition_estimate": scan_result.transition_estimate(),
            "n_fit_failures": len(scan_result.failures),
            "cut_J_values": list(cut_values),
        }))
    return out


def cmd_fig2(cfg: ExperimentConfig) -> list[Path]:
    """Encircling runs (Lindblad), one seeded trajectory, and an ensemble."""
    if cfg.schedule is None or cfg.system.dim != 2:
        raise ConfigError("this experiment needs a dim=2 system with a schedule")
    schedule = cfg.schedule
    n_steps = _scheduled_steps(schedule.T, cfg.integrator.dt)

    runs = {}
    for state_tag, psi in (("plus", plus_x()), ("minus", minus_x())):
        for direction in ("ccw", "cw"):
            evo = integrate_scheduled(
                cfg.system, replace(schedule, direction=direction),
                _density(psi), n_steps, cfg.integrator,
            )
            runs[(state_tag, direction)] = evo

    times = runs[("plus", "ccw")].times
    header = ["t"]
    columns = [times]
    for state_tag in ("plus", "minus"):
        for direction in ("ccw", "cw"):
            obs = runs[(state_tag, direction)].observables
            for comp in ("x", "y", "z"):
                header.append(f"{comp}_{state_tag}_{direction}")
                columns.append(obs[comp])
    bloch_rows = np.column_stack(columns)

    chi_plus = analysis.chirality(
        runs[("plus", "cw")].final_state, runs[("plus", "ccw")].final_state)
    chi_minus = analysis.chirality(
        runs[("minus", "cw")].final_state, runs[("minus", "ccw")].final_state)

    # stochastic side: one seeded trajectory plus the averaged ensemble
    traj = run_trajectory(
        cfg.system, plus_x(), cfg.ensemble_dt, cfg.master_seed,
        schedule=schedule, store_every=cfg.ensemble_store_every,
    )
    tx, ty, tz = _bloch_of_states(traj.states)

    ens_steps = int(round(schedule.T / cfg.ensemble_dt))
    if ens_steps < 1000:
        raise ConfigError("ensemble.dt too coarse: schedule needs >= 1000 steps")
    ens = run_ensemble(
        cfg.system, schedule, plus_x(), cfg.ensemble_dt,
        cfg.ensemble_n, cfg.master_seed, store_every=cfg.ensemble_store_every,
    )
    lind_cfg = IntegratorConfig(dt=cfg.ensemble_dt, store_every=cfg.ensemble_store_every)
    lind = integrate_scheduled(cfg.system, schedule, _density(plus_x()), ens_steps, lind_cfg)
    td = np.array([
        numerics.trace_distance(ens.mean_density[i], lind.states[i])
        for i in range(len(ens.times))
    ])
    ens_obs = {
        "x": 2.0 * ens.mean_density[:, 0, 1].real,
        "y": -2.0 * ens.mean_density[:, 0, 1].imag,
        "z": (ens.mean_density[:, 0, 0] - ens.mean_density[:, 1, 1]).real,
    }

    out = []
    if cfg.wants("csv"):
        out.append(io.write_csv(cfg.output_dir / "fig2_bloch.csv", header, bloch_rows))
        traj_rows = np.column_stack([traj.times, tx, ty, tz])
        out.append(io.write_csv(cfg.output_dir / "fig2_trajectory.csv",
                                ["t", "x", "y", "z"], traj_rows))
        ens_rows = np.column_stack([
            ens.times, ens_obs["x"], ens_obs["y"], ens_obs["z"],
            lind.observables["x"], lind.observables["y"], lind.observables["z"], td,
        ])
        out.append(io.write_csv(
            cfg.output_dir / "fig2_ensemble.csv",
            ["t", "x_mean", "y_mean", "z_mean", "x_lindblad", "y_lindblad", "z_lindblad",
             "trace_distance"],
            ens_rows,
        ))
    if cfg.wants("json"):
        out.append(io.write_json(cfg.output_dir / "fig2_summary.json", {
            "chirality_plus": chi_plus,
            "chirality_minus": chi_minus,
            "final_x": {
                f"{tag}_{direction}": float(runs[(tag, direction)].observables["x"][-1])
                for tag in ("plus", "minus") for direction in ("ccw", "cw")
            },
            "trajectory_jumps": [[t, lab] for t, lab in traj.jumps],
            "ensemble_n": cfg.ensemble_n,
            "master_seed": cfg.master_seed,
            "jump_count_histogram": ens.jump_count_histogram,
            "max_trace_distance": float(td.max()),
        }))
    return out


def cmd_fig4(cfg: ExperimentConfig) -> list[Path]:
    """Qutrit g-f coherence dynamics across J plus the transition scan."""
    if cfg.system.dim != 3:
        raise ConfigError("this experiment needs a dim=3 system")
    scan = cfg.scan
    J_grid = _j_grid(scan)
    t_hm = np.linspace(0.0, float(scan.get("heatmap_t_max", 3.0)),
                       int(scan.get("heatmap_samples", 301)))
    psi = (basis_ket(3, 0) - basis_ket(3, 2)) / math.sqrt(2.0)
    rho0 = _density(psi)

    heat_rows = []
    for J in J_grid:
        system = cfg.system.with_drive(DriveParams(J=float(J), Delta=cfg.system.drive.Delta))
        evo = integrate_constant(system, rho0, t_hm, cfg.integrator)
        gf = evo.states[:, 0, 2]
        heat_rows.extend(
            [float(J), float(t), float(abs(c)), float(c.real), float(c.imag)]
            for t, c in zip(t_hm, gf)
        )

    scan_result = analysis.scan_transition(
        cfg.system, J_grid,
        window=float(scan.get("window", 10.0)),
        n_samples=int(scan.get("n_samples", 500)),
        cfg=cfg.integrator,
    )

    out = []
    if cfg.wants("csv"):
        out.append(io.write_csv(
            cfg.output_dir / "fig4_coherence.csv",
            ["J", "t", "abs_rho_gf", "re_rho_gf", "im_rho_gf"],
            heat_rows,
        ))
        header, rows = scan_result.table()
        out.append(io.write_csv(cfg.output_dir / "fig4_transition.csv", header, rows))
    if cfg.wants("json"):
        out.append(io.write_json(cfg.output_dir / "fig4_summary.json", {
            "j_ep": scan_result.j_ep,
            "transition_estimate": scan_result.transition_estimate(),
            "n_fit_failures": len(scan_result.failures),
        }))
    return out


def cmd_sweeps(cfg: ExperimentConfig) -> list[Path]:
    """Duration/detuning sweeps, Hermitian-limit control, gamma_e schedules."""
    if cfg.schedule is None or cfg.system.dim != 2:
        raise ConfigError("this experiment needs a dim=2 system with a schedule")
    schedule = cfg.schedule
    scan = cfg.scan
    rho_mx = _density(minus_x())

    T_values = np.asarray(scan.get("T_values", [0.5, 1.0, 2.0]), dtype=float)
    duration = analysis.sweep_metrics(
        cfg.system, schedule, "T", T_values, (rho_mx, rho_mx), cfg.integrator)

    D_values = np.asarray(
        scan.get("Delta_max_values", [TWO_PI, 2 * TWO_PI, 4 * TWO_PI]), dtype=float)
    detuning = analysis.sweep_metrics(
        cfg.system, schedule, "Delta_max", D_values, (rho_mx, rho_mx), cfg.integrator)

    # Hermitian limit: same path with all dissipation off
    system0 = make_system(cfg.system.drive, Rates(gamma_e=0.0, gamma_phi=0.0), dim=2)
    n_steps = _scheduled_steps(schedule.T, cfg.integrator.dt)
    hermitian_runs = {}
    for tag, psi in (("plus", plus_x()), ("minus", minus_x())):
        for direction in ("ccw", "cw"):
            evo = integrate_scheduled(
                system0, replace(schedule, direction=direction),
                _density(psi), n_steps, cfg.integrator)
            hermitian_runs[(tag, direction)] = evo
    chi_hermitian = analysis.chirality(
        hermitian_runs[("plus", "cw")].final_state,
        hermitian_runs[("plus", "ccw")].final_state,
    )

    # constant versus ramped gamma_e at fixed (T, Delta_max)
    comparison_rows = []
    schedule_metrics = {}
    for kind in ("constant", "cosine"):
        sched_kind = replace(schedule, gamma_e_schedule=kind)
        evo_cw = integrate_scheduled(
            cfg.system, replace(sched_kind, direction="cw"), rho_mx, n_steps, cfg.integrator)
        evo_ccw = integrate_scheduled(
            cfg.system, replace(sched_kind, direction="ccw"), rho_mx, n_steps, cfg.integrator)
        chi = analysis.chirality(evo_cw.final_state, evo_ccw.final_state)
        s_cw = analysis.entropy(evo_cw.final_state)
        s_ccw = analysis.entropy(evo_ccw.final_state)
        comparison_rows.append([kind, chi, s_cw, s_ccw])
        schedule_metrics[kind] = {"chirality": chi, "entropy_cw": s_cw, "entropy_ccw": s_ccw}

    out = []
    if cfg.wants("csv"):
        header, rows = duration.table()
        out.append(io.write_csv(cfg.output_dir / "sweeps_duration.csv", header, rows))
        header, rows = detuning.table()
        out.append(io.write_csv(cfg.output_dir / "sweeps_detuning.csv", header, rows))
        times = hermitian_runs[("plus", "ccw")].times
        h_header = ["t"]
        h_cols = [times]
        for tag in ("plus", "minus"):
            for direction in ("ccw", "cw"):
                h_header.append(f"x_{tag}_{direction}")
                h_cols.append(hermitian_runs[(tag, direction)].observables["x"])
        out.append(io.write_csv(cfg.output_dir / "sweeps_hermitian.csv",
                                h_header, np.column_stack(h_cols)))
        out.append(io.write_csv(
            cfg.output_dir / "sweeps_schedule_comparison.csv",
            ["gamma_e_schedule", "chirality", "entropy_cw", "entropy_ccw"],
            comparison_rows,
        ))
    if cfg.wants("json"):
        t_best = float(T_values[int(np.argmax(duration.chirality))])
        out.append(io.write_json(cfg.output_dir / "sweeps_summary.json", {
            "duration_chirality_argmax_T": t_best,
            "detuning_chirality_monotone_increasing":
                bool(np.all(np.diff(detuning.chirality) > 0.0)),
            "detuning_entropy_ccw_monotone_decreasing":
                bool(np.all(np.diff(detuning.entropy_ccw) < 0.0)),
            "hermitian_chirality": chi_hermitian,
            "hermitian_final_x": {
                f"{tag}_{direction}": float(hermitian_runs[(tag, direction)].observables["x"][-1])
                for tag in ("plus", "minus") for direction in ("ccw", "cw")
            },
            "gamma_e_schedules": schedule_metrics,
        }))
    return out


def cmd_steady_state(cfg: ExperimentConfig) -> list[Path]:
    """Steady state and spectrum of the configured system."""
    sop = build_superoperator(cfg.system)
    rho_inf = steady_state(sop)
    dec = numerics.eig_general(sop.matrix)

    out = []
    if cfg.wants("csv"):
        d = cfg.system.dim
        rows = [
            [i, j, rho_inf[i, j].real, rho_inf[i, j].imag]
            for i in range(d) for j in range(d)
        ]
        out.append(io.write_csv(cfg.output_dir / "steady_state.csv",
                                ["row", "col", "re", "im"], rows))
        spec_rows = [
            [k, lam.real, lam.imag] for k, lam in enumerate(dec.eigenvalues)
        ]
        out.append(io.write_csv(cfg.output_dir / "steady_state_spectrum.csv",
                                ["index", "re", "im"], spec_rows))
    if cfg.wants("json"):
        out.append(io.write_json(cfg.output_dir / "steady_state_summary.json", {
            "purity": float(np.trace(rho_inf @ rho_inf).real),
            "entropy_bits": analysis.entropy(rho_inf),
            "populations": [float(rho_inf[i, i].real) for i in range(cfg.system.dim)],
            "slowest_decay_rate": float(
                -max(l.real for l in dec.eigenvalues if abs(l) > 1e-9)
            ),
        }))
    return out


def cmd_trajectories(cfg: ExperimentConfig) -> list[Path]:
    """Seeded single trajectory plus ensemble average with Lindblad reference."""
    dim = cfg.system.dim
    if cfg.schedule is not None:
        psi0 = plus_x(dim)
        t_final = None
        total = cfg.schedule.T
    else:
        if cfg.t_final is None:
            raise ConfigError("constant-parameter trajectories need ensemble.t_final")
        psi0 = basis_ket(dim, 1)
        t_final = cfg.t_final
        total = t_final

    traj = run_trajectory(
        cfg.system, psi0, cfg.ensemble_dt, cfg.master_seed,
        schedule=cfg.schedule, t_final=t_final, store_every=cfg.ensemble_store_every,
    )
    ens = run_ensemble(
        cfg.system, cfg.schedule, psi0, cfg.ensemble_dt,
        cfg.ensemble_n, cfg.master_seed,
        store_every=cfg.ensemble_store_every, t_final=t_final,
    )

    n_steps = int(round(total / cfg.ensemble_dt))
    lind_cfg = IntegratorConfig(dt=cfg.ensemble_dt, store_every=cfg.ensemble_store_every)
    if cfg.schedule is not None:
        if n_steps < 1000:
            raise ConfigError("ensemble.dt too coarse: schedule needs >= 1000 steps")
        lind = integrate_scheduled(cfg.system, cfg.schedule, _density(psi0), n_steps, lind_cfg)
        lind_states = lind.states
    else:
        lind = integrate_constant(cfg.system, _density(psi0), ens.times, lind_cfg)
        lind_states = lind.states
    td = np.array([
        numerics.trace_distance(ens.mean_density[i], lind_states[i])
        for i in range(len(ens.times))
    ])

    out = []
    if cfg.wants("csv"):
        if dim == 2:
            tx, ty, tz = _bloch_of_states(traj.states)
            traj_rows = np.column_stack([traj.times, tx, ty, tz])
            traj_header = ["t", "x", "y", "z"]
            pop_cols = [
                (ens.mean_density[:, 0, 0].real, "pop_g"),
                (ens.mean_density[:, 1, 1].real, "pop_e"),
            ]
        else:
            traj_rows = np.column_stack(
                [traj.times] + [np.abs(traj.states[:, k]) ** 2 for k in range(dim)])
            traj_header = ["t"] + [f"pop_{lvl}" for lvl in "gef"[:dim]]
            pop_cols = [
                (ens.mean_density[:, k, k].real, f"pop_{lvl}")
                for k, lvl in enumerate("gef"[:dim])
            ]
        out.append(io.write_csv(cfg.output_dir / "trajectories_single.csv",
                                traj_header, traj_rows))
        ens_header = ["t"] + [name for _, name in pop_cols] + ["trace_distance"]
        ens_rows = np.column_stack([ens.times] + [c for c, _ in pop_cols] + [td])
        out.append(io.write_csv(cfg.output_dir / "trajectories_ensemble.csv",
                                ens_header, ens_rows))
    if cfg.wants("json"):
        per_traj = np.array([len(j) for j in ens.jumps_per_trajectory])
        out.append(io.write_json(cfg.output_dir / "trajectories_summary.json", {
            "ensemble_n": cfg.ensemble_n,
            "master_seed": cfg.master_seed,
            "dt": cfg.ensemble_dt,
            "jump_count_histogram": ens.jump_count_histogram,
            "mean_jumps_per_trajectory": float(per_traj.mean()),
            "single_trajectory_jumps": [[t, lab] for t, lab in traj.jumps],
            "max_trace_distance": float(td.max()),
        }))
    return out


EXPERIMENTS = {
    "spectrum": cmd_spectrum,
    "ep-map": cmd_ep_map,
    "fig1": cmd_fig1,
    "fig2": cmd_fig2,
    "fig4": cmd_fig4,
    "sweeps": cmd_sweeps,
    "steady-state": cmd_steady_state,
    "trajectories": cmd_trajectories,
}


# ---------------------------------------------------------------------------
# Config resolution and entry point


def _resolve_config(args) -> ExperimentConfig:
    experiment = args.experiment
    defaults = EXPERIMENT_DEFAULTS.get(experiment, {})
    file_cfg = load_config_file(args.config) if args.config else {}

    file_exp = file_cfg.pop("experiment", None)
    if file_exp is not None and file_exp != experiment:
        raise ConfigError(
            f"config file is for experiment {file_exp!r}, "
            f"but {experiment!r} was requested"
        )

    overrides: dict = {}
    for spec in args.overrides:
        path, value = parse_set_override(spec)
        overrides = deep_merge(overrides, nest_override(path, value))

    user = deep_merge(file_cfg, overrides)
    units = args.units or user.pop("units", "rad")
    user = apply_units(user, units)
    merged = deep_merge(defaults, user)

    # precedence for plumbing knobs: CLI flag > environment > config file
    if args.output_dir is not None:
        merged["output_dir"] = args.output_dir
    elif os.environ.get("LIOUVLAB_OUTPUT_DIR"):
        merged["output_dir"] = os.environ["LIOUVLAB_OUTPUT_DIR"]
    if args.threads is not None:
        merged["threads"] = args.threads
    elif os.environ.get("LIOUVLAB_THREADS"):
        try:
            merged["threads"] = int(os.environ["LIOUVLAB_THREADS"])
        except ValueError as exc:
            raise ConfigError(
                f"LIOUVLAB_THREADS must be an integer, got "
                f"{os.environ['LIOUVLAB_THREADS']!r}"
            ) from exc
    if args.formats is not None:
        merged["formats"] = [f.strip() for f in args.formats.split(",") if f.strip()]

    return resolve(merged, experiment)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="liouvlab",
        description="Open-system spectral analysis and dynamics experiments.",
    )
    parser.add_argument("experiment", choices=sorted(EXPERIMENTS))
    parser.add_argument("--config", type=Path, default=None, help="JSON config file")
    parser.add_argument("--output-dir", default=None, help="output directory")
    parser.add_argument("--threads", type=int, default=None, help="worker threads for scans")
    parser.add_argument("--units", choices=("rad", "mhz"), default=None,
                        help="unit system for angular config inputs")
    parser.add_argument("--formats", default=None, help="comma list from {csv,json}")
    parser.add_argument("--set", action="append", dest="overrides", default=[],
                        metavar="SECTION.KEY=VALUE", help="override one config key")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    args = parser.parse_args(argv)

    started = time.monotonic()
    try:
        cfg = _resolve_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    try:
        files = EXPERIMENTS[args.experiment](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except LiouvlabError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3

    manifest = io.build_manifest(
        args.experiment, __version__, cfg.echo, files, started)
    manifest_path = io.write_json(
        cfg.output_dir / f"{args.experiment.replace('-', '_')}_manifest.json",
        manifest.as_dict(),
    )
    for path in [*files, manifest_path]:
        print(f"wrote {path}")
    print(f"{args.experiment}: ok ({time.monotonic() - started:.2f}s)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
