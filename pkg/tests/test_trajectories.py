import math

import numpy as np
import pytest

from liouvlab import trajectories as tj
from liouvlab.dynamics import integrate_constant
from liouvlab.errors import OutOfRange, ZeroNorm
from liouvlab.model import (
    DriveParams,
    ParameterSchedule,
    Rates,
    basis_ket,
    jump_operators,
    make_system,
    plus_x,
)

GROUND = basis_ket(2, 0)
EXCITED_KET = basis_ket(2, 1)


def decay_system(gamma_e=4.4, J=0.0):
    return make_system(DriveParams(J=J), Rates(gamma_e=gamma_e))


# --- bookkeeping ----------------------------------------------------------------


def test_trajectory_states_stay_normalized():
    rec = tj.run_trajectory(
        make_system(DriveParams(J=1.3), Rates(gamma_e=4.4, gamma_phi=0.2)),
        EXCITED_KET, dt=1e-3, seed=7, t_final=2.0)
    norms = np.linalg.norm(rec.states, axis=1)
    assert np.max(np.abs(norms - 1.0)) <= 1e-10
    assert rec.times[0] == 0.0
    assert np.allclose(rec.states[0], EXCITED_KET)


def test_jump_times_strictly_increase_and_land_on_the_grid():
    dt = 1e-3
    rec = tj.run_trajectory(
        make_system(DriveParams(J=1.3), Rates(gamma_e=4.4, gamma_phi=0.5)),
        EXCITED_KET, dt=dt, seed=3, t_final=2.0)
    t_jumps = np.array([t for t, _ in rec.jumps])
    assert len(t_jumps) >= 1
    assert np.all(np.diff(t_jumps) > 0)
    steps = t_jumps / dt
    assert np.allclose(steps, np.round(steps), atol=1e-9)
    assert set(lbl for _, lbl in rec.jumps) <= {"e", "phi"}


def test_trajectory_is_deterministic_in_the_seed():
    kw = dict(dt=1e-3, t_final=1.0)
    sys2 = make_system(DriveParams(J=1.0), Rates(gamma_e=4.4))
    a = tj.run_trajectory(sys2, EXCITED_KET, seed=42, **kw)
    b = tj.run_trajectory(sys2, EXCITED_KET, seed=42, **kw)
    c = tj.run_trajectory(sys2, EXCITED_KET, seed=43, **kw)
    assert np.array_equal(a.states, b.states)
    assert a.jumps == b.jumps
    assert not (np.array_equal(a.states, c.states) and a.jumps == c.jumps)


def test_ensemble_member_matches_standalone_run_bitwise():
    sys2 = make_system(DriveParams(J=1.0), Rates(gamma_e=4.4))
    ens = tj.run_ensemble(sys2, None, EXCITED_KET, dt=1e-3, n=1,
                          master_seed=12345, t_final=1.0)
    solo = tj.run_trajectory(sys2, EXCITED_KET, dt=1e-3,
                             seed=tj.split_seed(12345, 0), t_final=1.0)
    assert ens.jumps_per_trajectory[0] == solo.jumps
    expected = np.einsum("ti,tj->tij", solo.states, solo.states.conj())
    assert np.array_equal(ens.mean_density, expected)


def test_seed_splitting_is_stable():
    ss = tj.split_seed(12345, 7)
    assert ss.entropy == 12345
    assert ss.spawn_key == (7,)


def test_ensemble_mean_has_unit_trace():
    ens = tj.run_ensemble(decay_system(), None, EXCITED_KET, dt=1e-3, n=64,
                          master_seed=5, t_final=1.0)
    traces = np.trace(ens.mean_density, axis1=1, axis2=2)
    assert np.max(np.abs(traces - 1.0)) <= 1e-10


def test_store_decimation_grid():
    rec = tj.run_trajectory(decay_system(), EXCITED_KET, dt=1e-3, seed=0,
                            t_final=1.0, store_every=100)
    assert np.allclose(rec.times, np.linspace(0.0, 1.0, 11))
    assert rec.states.shape == (11, 2)


# --- input validation --------------------------------------------------------------


def test_input_validation():
    sys2 = decay_system()
    with pytest.raises(OutOfRange):
        tj.run_trajectory(sys2, EXCITED_KET, dt=1e-3, seed=0)  # no duration
    with pytest.raises(OutOfRange):
        tj.run_trajectory(sys2, EXCITED_KET, dt=-1e-3, seed=0, t_final=1.0)
    with pytest.raises(OutOfRange):
        tj.run_trajectory(sys2, EXCITED_KET, dt=1e-3, seed=0, t_final=-1.0)
    with pytest.raises(OutOfRange):
        tj.run_trajectory(sys2, 2.0 * EXCITED_KET, dt=1e-3, seed=0, t_final=1.0)
    with pytest.raises(OutOfRange):
        tj.run_ensemble(sys2, None, EXCITED_KET, dt=1e-3, n=0, master_seed=0, t_final=1.0)


def test_apply_jump_rejects_annihilated_state():
    (L_e, _), = jump_operators(Rates(gamma_e=4.0))
    with pytest.raises(ZeroNorm):
        tj.apply_jump(L_e, GROUND)
    out = tj.apply_jump(L_e, EXCITED_KET)
    assert np.allclose(out, GROUND)


def test_coarse_steps_trigger_sampling_warning():
    with pytest.warns(UserWarning, match="jump probability"):
        tj.run_trajectory(decay_system(4.4), EXCITED_KET, dt=0.1, seed=0, t_final=1.0)


# --- physics checks ------------------------------------------------------------------


def test_closed_system_rabi_oscillation():
    J = 1.0
    rec = tj.run_trajectory(
        make_system(DriveParams(J=J), Rates(gamma_e=0.0)),
        GROUND, dt=1e-3, seed=11, t_final=1.5)
    assert rec.jumps == []
    p_e = np.abs(rec.states[:, 1]) ** 2
    assert np.max(np.abs(p_e - np.sin(J * rec.times) ** 2)) <= 1e-8


def test_closed_system_ensemble_matches_density_route():
    sys2 = make_system(DriveParams(J=1.0, Delta=0.5), Rates(gamma_e=0.0))
    ens = tj.run_ensemble(sys2, None, GROUND, dt=1e-3, n=3, master_seed=1, t_final=1.0)
    rho0 = np.outer(GROUND, GROUND.conj())
    ref = integrate_constant(sys2, rho0, ens.times)
    assert np.max(np.abs(ens.mean_density - ref.states)) <= 1e-8


def test_no_jump_segment_follows_nonhermitian_propagator():
    sys2 = make_system(DriveParams(J=1.3), Rates(gamma_e=0.3))
    rec = None
    for seed in range(30):
        cand = tj.run_trajectory(sys2, EXCITED_KET, dt=1e-3, seed=seed, t_final=1.0)
        if not cand.jumps:
            rec = cand
            break
    assert rec is not None, "expected at least one jump-free trajectory at gamma_e = 0.3"
    from liouvlab.numerics import expm

    h_eff = sys2.hamiltonian() - 0.5j * sum(
        L.conj().T @ L for L, _ in sys2.jump_ops)
    for t, psi in zip(rec.times, rec.states):
        ref = expm(-1j * h_eff * t) @ EXCITED_KET
        ref = ref / np.linalg.norm(ref)
        assert np.linalg.norm(psi - ref) <= 1e-8


def test_pure_decay_jump_statistics():
    ge, t_final, dt, n = 4.4, 1.5, 1e-3, 2000
    ens = tj.run_ensemble(decay_system(ge), None, EXCITED_KET, dt=dt, n=n,
                          master_seed=2024, t_final=t_final)
    counts = [len(j) for j in ens.jumps_per_trajectory]
    assert max(counts) <= 1  # one emission and the state is stuck in |g>
    assert set(ens.jump_count_histogram) == {"e"}
    assert sum(counts) / n >= 0.99  # nearly every run decays within 6.6 lifetimes

    t_jumps = np.array([j[0][0] for j in ens.jumps_per_trajectory if j])
    sample_mean = t_jumps.mean()
    se = t_jumps.std(ddof=1) / math.sqrt(len(t_jumps))
    # truncation at t_final and the half-step timestamp bias are both << 3 se
    assert abs(sample_mean - 1.0 / ge) <= 3.0 * se + 0.003


def test_emission_dominates_dephasing_on_the_control_loop():
    schedule = ParameterSchedule(T=2.0)
    sys2 = make_system(DriveParams(J=16.0), Rates(gamma_e=4.6, gamma_phi=0.2))
    ens = tj.run_ensemble(sys2, schedule, plus_x(), dt=5e-4, n=100, master_seed=99)
    hist = ens.jump_count_histogram
    assert hist.get("e", 0) > hist.get("phi", 0)
    assert hist.get("e", 0) > 0


def test_closed_loop_has_no_jumps_without_dissipation():
    schedule = ParameterSchedule(T=2.0)
    sys2 = make_system(DriveParams(J=16.0), Rates(gamma_e=0.0))
    ens = tj.run_ensemble(sys2, schedule, plus_x(), dt=5e-4, n=20, master_seed=99)
    assert ens.jump_count_histogram == {}
    assert all(j == [] for j in ens.jumps_per_trajectory)
