"""Monte-Carlo wavefunction unraveling of the Lindblad dynamics.

Each trajectory alternates deterministic non-Hermitian evolution under
H_eff = H - (i/2) sum_k L_k^+ L_k with stochastic quantum jumps. First-order
jump sampling is used: at every step of size dt the jump probability of
channel k is p_k = dt <psi|L_k^+ L_k|psi>, and a single uniform draw decides
between "no jump" (propagate by exp(-i H_eff dt), renormalize) and "jump
through channel k" (apply L_k, renormalize). One uniform is consumed per
step regardless of outcome, so any trajectory of an ensemble is exactly
reproducible in isolation from its child seed.

Seed splitting: trajectory i of an ensemble draws its uniforms from
numpy.random.SeedSequence(master_seed, spawn_key=(i,)). This counter-based
construction is stable across runs, processes, and thread counts.
"""

import warnings
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from . import numerics
from .errors import OutOfRange, ZeroNorm
from .model import ParameterSchedule, QuantumSystem, schedule_eval

SeedLike = Union[int, np.random.SeedSequence]

JUMP_PROBABILITY_GUIDELINE = 0.1


@dataclass
class TrajectoryRecord:
    seed: SeedLike
    times: np.ndarray
    states: np.ndarray  # (n_stored, d) unit-norm pure states
    jumps: list[tuple[float, str]] = field(default_factory=list)


@dataclass
class EnsembleResult:
    n_trajectories: int
    times: np.ndarray
    mean_density: np.ndarray  # (n_stored, d, d)
    jump_count_histogram: dict[str, int] = field(default_factory=dict)
    jumps_per_trajectory: list[list[tuple[float, str]]] = field(default_factory=list)


def split_seed(master_seed: int, index: int) -> np.random.SeedSequence:
    """Child seed of trajectory `index`: SeedSequence(master, spawn_key=(index,))."""
    return np.random.SeedSequence(master_seed, spawn_key=(index,))


def _as_generator(seed: SeedLike) -> np.random.Generator:
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.PCG64(seed))
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed))))


def apply_jump(L: np.ndarray, psi: np.ndarray) -> np.ndarray:
    """L psi / ||L psi||; raises ZeroNorm when the state is annihilated."""
    phi = L @ psi
    norm = np.linalg.norm(phi)
    if norm == 0.0:
        raise ZeroNorm("jump operator annihilated the state")
    return phi / norm


def _h_eff(h: np.ndarray, ops: list[np.ndarray], d: int) -> np.ndarray:
    acc = np.zeros((d, d), dtype=complex)
    for L in ops:
        acc = acc + L.conj().T @ L
    return h - 0.5j * acc


def _step_table(
    system: QuantumSystem,
    schedule: Optional[ParameterSchedule],
    dt: float,
    n_steps: int,
):
    """Per-step no-jump propagators and jump operators.

    Returns (props, ops_steps, labels_steps, all_labels). For a constant
    system the same entries are reused every step; for a scheduled run each
    step is built from the midpoint parameters.
    """
    d = system.dim
    if schedule is None:
        ops = [L for L, _ in system.jump_ops]
        labels = [label for _, label in system.jump_ops]
        P = numerics.expm(-1j * _h_eff(system.hamiltonian(), ops, d) * dt)
        ops_arr = np.array(ops) if ops else np.zeros((0, d, d), dtype=complex)
        return [P] * n_steps, [ops_arr] * n_steps, [labels] * n_steps, list(labels)

    from .model import make_system

    props = []
    ops_steps = []
    labels_steps = []
    all_labels: list[str] = []
    for k in range(n_steps):
        drive, rates = schedule_eval(schedule, (k + 0.5) * dt, system.rates)
        stepped = make_system(drive, rates, dim=d)
        ops = [L for L, _ in stepped.jump_ops]
        labels = [label for _, label in stepped.jump_ops]
        props.append(numerics.expm(-1j * _h_eff(stepped.hamiltonian(), ops, d) * dt))
        ops_steps.append(np.array(ops) if ops else np.zeros((0, d, d), dtype=complex))
        labels_steps.append(labels)
        for lab in labels:
            if lab not in all_labels:
                all_labels.append(lab)
    return props, ops_steps, labels_steps, all_labels


def _resolve_steps(
    schedule: Optional[ParameterSchedule], t_final: Optional[float], dt: float
) -> int:
    if schedule is not None:
        total = schedule.T
    elif t_final is not None:
        total = float(t_final)
    else:
        raise OutOfRange("constant-parameter trajectories need t_final")
    if total <= 0.0 or dt <= 0.0:
        raise OutOfRange(f"duration and dt must be positive, got {total}, {dt}")
    n_steps = int(round(total / dt))
    if n_steps < 1 or n_steps * dt < total - 1e-9 * total:
        n_steps = max(1, int(np.ceil(total / dt)))
    return n_steps


def _run_batch(
    system: QuantumSystem,
    schedule: Optional[ParameterSchedule],
    psi0: np.ndarray,
    dt: float,
    uniforms: np.ndarray,  # (n, n_steps)
    store_every: int,
):
    """Advance a batch of trajectories with shared per-step propagators.

    All trajectories see the identical arithmetic whatever the batch size,
    so a batch of one reproduces any member of a larger batch bit for bit.
    """
    n, n_steps = uniforms.shape
    d = system.dim
    props, ops_steps, labels_steps, all_labels = _step_table(system, schedule, dt, n_steps)

    stored_idx = list(range(0, n_steps + 1, store_every))
    if stored_idx[-1] != n_steps:
        stored_idx.append(n_steps)
    times = np.array([i * dt for i in stored_idx])
    stored = np.empty((n, len(stored_idx), d), dtype=complex)

    psi = np.tile(np.asarray(psi0, dtype=complex), (n, 1))
    stored[:, 0] = psi
    jumps: list[list[tuple[float, str]]] = [[] for _ in range(n)]
    histogram: dict[str, int] = {lab: 0 for lab in all_labels}
    si = 1
    warned = False

    for k in range(n_steps):
        ops_arr = ops_steps[k]
        labels = labels_steps[k]
        n_ops = len(ops_arr)
        if n_ops:
            amp = np.einsum("oab,nb->noa", ops_arr, psi)
            probs = dt * np.einsum("noa,noa->no", amp, amp.conj()).real
            if not warned and probs.max() > JUMP_PROBABILITY_GUIDELINE:
                warnings.warn(
                    f"per-step jump probability reached {probs.max():.3f} > "
                    f"{JUMP_PROBABILITY_GUIDELINE}; decrease dt for unbiased sampling",
                    stacklevel=3,
                )
                warned = True
            u = uniforms[:, k]
            ptot = probs.sum(axis=1)
            jumped = u < ptot
        else:
            jumped = np.zeros(n, dtype=bool)
        if n_ops and jumped.any():
            rows = np.nonzero(jumped)[0]
            cum = np.cumsum(probs[rows], axis=1)
            chans = np.minimum((u[rows, None] >= cum).sum(axis=1), n_ops - 1)
            phi = amp[rows, chans]
            nrm = np.linalg.norm(phi, axis=1)
            if np.any(nrm == 0.0):
                bad = int(rows[np.nonzero(nrm == 0.0)[0][0]])
                raise ZeroNorm(f"jump annihilated the state in trajectory {bad}")
            psi[rows] = phi / nrm[:, None]
            t_jump = (k + 1) * dt
            for r, c in zip(rows, chans):
                lab = labels[int(c)]
                jumps[int(r)].append((t_jump, lab))
                histogram[lab] += 1
        not_jumped = ~jumped
        if not_jumped.any():
            sub = np.einsum("ab,nb->na", props[k], psi[not_jumped])
            sub = sub / np.linalg.norm(sub, axis=1)[:, None]
            psi[not_jumped] = sub
        if si < len(stored_idx) and k + 1 == stored_idx[si]:
            stored[:, si] = psi
            si += 1

    return times, stored, jumps, histogram


def _unit_state(psi0) -> np.ndarray:
    psi = np.asarray(psi0, dtype=complex)
    norm = np.linalg.norm(psi)
    if abs(norm - 1.0) > 1e-8:
        raise OutOfRange(f"psi0 must be unit norm, got norm {norm}")
    return psi / norm


def run_trajectory(
    system: QuantumSystem,
    psi0,
    dt: float,
    seed: SeedLike,
    schedule: Optional[ParameterSchedule] = None,
    t_final: Optional[float] = None,
    store_every: int = 20,
) -> TrajectoryRecord:
    """One stochastic pure-state trajectory; deterministic given (seed, dt)."""
    psi = _unit_state(psi0)
    n_steps = _resolve_steps(schedule, t_final, dt)
    uniforms = _as_generator(seed).random(n_steps)[None, :]
    times, stored, jumps, _hist = _run_batch(system, schedule, psi, dt, uniforms, store_every)
    return TrajectoryRecord(seed=seed, times=times, states=stored[0], jumps=jumps[0])


def run_ensemble(
    system: QuantumSystem,
    schedule: Optional[ParameterSchedule],
    psi0,
    dt: float,
    n: int,
    master_seed: int,
    store_every: int = 20,
    t_final: Optional[float] = None,
) -> EnsembleResult:
    """Average of n trajectories; trajectory i uses split_seed(master_seed, i)."""
    if n < 1:
        raise OutOfRange(f"ensemble size must be >= 1, got {n}")
    psi = _unit_state(psi0)
    n_steps = _resolve_steps(schedule, t_final, dt)
    uniforms = np.empty((n, n_steps))
    for i in range(n):
        uniforms[i] = _as_generator(split_seed(master_seed, i)).random(n_steps)
    times, stored, jumps, histogram = _run_batch(system, schedule, psi, dt, uniforms, store_every)
    mean_density = np.einsum("nti,ntj->tij", stored, stored.conj()) / n
    return EnsembleResult(
        n_trajectories=n,
        times=times,
        mean_density=mean_density,
        jump_count_histogram=histogram,
        jumps_per_trajectory=jumps,
    )
