"""Lindblad time evolution (constant and scheduled) and the Bloch-vector route.

Scheduled integration uses piecewise-constant midpoint propagation: each step
rebuilds the Liouvillian at the interval midpoint and applies its matrix
exponential. Every step is therefore exactly trace preserving and completely
positive, and the scheme is second-order accurate in the step size, which
stays robust at parameter points where the Liouvillian is defective.
"""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import numerics
from .errors import NotDensityMatrix, OutOfRange
from .liouvillian import build_superoperator, vec
from .model import DriveParams, ParameterSchedule, QuantumSystem, Rates, schedule_eval

MIN_SCHEDULED_STEPS = 1000


@dataclass
class IntegratorConfig:
    dt: float = 1e-3
    method: str = "propagator_expm"
    store_every: int = 1

    def __post_init__(self):
        if self.dt <= 0.0 or not math.isfinite(self.dt):
            raise OutOfRange(f"dt must be positive, got {self.dt}")
        if self.method not in ("propagator_expm", "rk4"):
            raise OutOfRange(f"unknown integrator method {self.method!r}")
        if self.store_every < 1:
            raise OutOfRange(f"store_every must be >= 1, got {self.store_every}")


@dataclass
class EvolutionResult:
    """Density-matrix trajectory with per-time observables.

    For dim 2 the observables are the Bloch components x, y, z; for dim 3
    they are the populations and the g-f / e-f coherences (complex).
    """

    times: np.ndarray
    states: np.ndarray  # (n_times, d, d)
    observables: dict = field(default_factory=dict)

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]


def validate_density_matrix(rho, d: Optional[int] = None, tol: float = 1e-8) -> np.ndarray:
    m = numerics.as_complex_matrix(rho)
    if d is not None and m.shape != (d, d):
        raise NotDensityMatrix(f"expected {d}x{d} density matrix, got shape {m.shape}")
    dev = np.max(np.abs(m - m.conj().T))
    if dev > tol:
        raise NotDensityMatrix(f"not Hermitian within {tol:.1e} (deviation {dev:.3e})")
    tr = np.trace(m).real
    if abs(tr - 1.0) > tol:
        raise NotDensityMatrix(f"trace {tr} differs from 1 beyond {tol:.1e}")
    w = np.linalg.eigvalsh(0.5 * (m + m.conj().T))
    if w.min() < -tol:
        raise NotDensityMatrix(f"negative eigenvalue {w.min():.3e} beyond tolerance")
    return m


def observables_from_states(states: np.ndarray, dim: int) -> dict:
    if dim == 2:
        x = 2.0 * states[:, 0, 1].real
        y = -2.0 * states[:, 0, 1].imag
        z = (states[:, 0, 0] - states[:, 1, 1]).real
        return {"x": x, "y": y, "z": z}
    return {
        "pop_g": states[:, 0, 0].real,
        "pop_e": states[:, 1, 1].real,
        "pop_f": states[:, 2, 2].real,
        "rho_gf": states[:, 0, 2].copy(),
        "rho_ef": states[:, 1, 2].copy(),
    }


def _propagate_interval(L: np.ndarray, v: np.ndarray, dt: float, cfg: IntegratorConfig) -> np.ndarray:
    if cfg.method == "propagator_expm":
        return numerics.expm(L * dt) @ v
    # classical RK4 on v' = L v with substeps bounded by cfg.dt
    n_sub = max(1, int(math.ceil(dt / cfg.dt)))
    h = dt / n_sub
    for _ in range(n_sub):
        k1 = L @ v
        k2 = L @ (v + 0.5 * h * k1)
        k3 = L @ (v + 0.5 * h * k2)
        k4 = L @ (v + h * k3)
        v = v + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return v


def integrate_constant(
    system: QuantumSystem,
    rho0,
    t_grid,
    cfg: Optional[IntegratorConfig] = None,
) -> EvolutionResult:
    """Evolve rho0 under the fixed-parameter Liouvillian onto t_grid."""
    cfg = cfg or IntegratorConfig()
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or len(t) == 0:
        raise OutOfRange("t_grid must be a non-empty 1-D array")
    if np.any(np.diff(t) <= 0.0) and len(t) > 1:
        raise OutOfRange("t_grid must be strictly increasing")
    rho = validate_density_matrix(rho0, system.dim)
    L = build_superoperator(system).matrix

    states = np.empty((len(t), system.dim, system.dim), dtype=complex)
    v = vec(rho)
    prev_t = 0.0
    prop_cache: dict[float, np.ndarray] = {}
    for k, tk in enumerate(t):
        dt = tk - prev_t
        if dt > 0.0:
            if cfg.method == "propagator_expm":
                P = prop_cache.get(dt)
                if P is None:
                    P = numerics.expm(L * dt)
                    prop_cache[dt] = P
                v = P @ v
            else:
                v = _propagate_interval(L, v, dt, cfg)
        states[k] = v.reshape(system.dim, system.dim)
        prev_t = tk
    return EvolutionResult(times=t, states=states, observables=observables_from_states(states, system.dim))


def integrate_scheduled(
    system: QuantumSystem,
    schedule: ParameterSchedule,
    rho0,
    n_steps: int,
    cfg: Optional[IntegratorConfig] = None,
) -> EvolutionResult:
    """Propagate through one loop of the schedule in n_steps midpoint steps."""
    cfg = cfg or IntegratorConfig()
    if n_steps < MIN_SCHEDULED_STEPS:
        raise OutOfRange(
            f"scheduled runs require n_steps >= {MIN_SCHEDULED_STEPS} "
            f"(dt <= T/{MIN_SCHEDULED_STEPS}), got {n_steps}"
        )
    rho = validate_density_matrix(rho0, system.dim)
    dt = schedule.T / n_steps

    stored_idx = list(range(0, n_steps + 1, cfg.store_every))
    if stored_idx[-1] != n_steps:
        stored_idx.append(n_steps)
    times = np.array([i * dt for i in stored_idx])
    states = np.empty((len(stored_idx), system.dim, system.dim), dtype=complex)

    v = vec(rho)
    states[0] = v.reshape(system.dim, system.dim)
    si = 1
    for k in range(n_steps):
        t_mid = (k + 0.5) * dt
        drive, rates = schedule_eval(schedule, t_mid, system.rates)
        stepped = _rebuild(system, drive, rates)
        L = build_superoperator(stepped).matrix
        v = _propagate_interval(L, v, dt, cfg)
        if si < len(stored_idx) and k + 1 == stored_idx[si]:
            states[si] = v.reshape(system.dim, system.dim)
            si += 1
    return EvolutionResult(
        times=times, states=states, observables=observables_from_states(states, system.dim)
    )


def _rebuild(system: QuantumSystem, drive: DriveParams, rates: Rates) -> QuantumSystem:
    from .model import make_system

    return make_system(drive, rates, dim=system.dim)


# ---------------------------------------------------------------------------
# Bloch-vector route

def bloch_rhs(params: DriveParams, rates: Rates, v) -> np.ndarray:
    """Right-hand side of the three-component Bloch equation.

        dx/dt = -(gamma_e/2 + gamma_phi) x - Delta y
        dy/dt = +Delta x - (gamma_e/2 + gamma_phi) y - 2J z
        dz/dt = +2J y - gamma_e z + gamma_e

    Fixed point at J = Delta = 0 is the ground state (0, 0, 1).
    """
    x, y, z = float(v[0]), float(v[1]), float(v[2])
    a = 0.5 * rates.gamma_e + rates.gamma_phi
    return np.array(
        [
            -a * x - params.Delta * y,
            params.Delta * x - a * y - 2.0 * params.J * z,
            2.0 * params.J * y - rates.gamma_e * z + rates.gamma_e,
        ]
    )


def integrate_bloch(
    params: DriveParams,
    rates: Rates,
    v0,
    t_grid,
    dt: float = 1e-3,
) -> np.ndarray:
    """RK4 integration of the Bloch equation onto t_grid; returns (n, 3)."""
    t = np.asarray(t_grid, dtype=float)
    v = np.asarray(v0, dtype=float).copy()
    if v.shape != (3,):
        raise OutOfRange(f"v0 must have three components, got shape {v.shape}")
    out = np.empty((len(t), 3))
    prev_t = 0.0
    for k, tk in enumerate(t):
        span = tk - prev_t
        if span > 0.0:
            n_sub = max(1, int(math.ceil(span / dt)))
            h = span / n_sub
            for _ in range(n_sub):
                k1 = bloch_rhs(params, rates, v)
                k2 = bloch_rhs(params, rates, v + 0.5 * h * k1)
                k3 = bloch_rhs(params, rates, v + 0.5 * h * k2)
                k4 = bloch_rhs(params, rates, v + h * k3)
                v = v + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[k] = v
        prev_t = tk
    return out
