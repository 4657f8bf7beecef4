import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from liouvlab import analysis
from liouvlab.dynamics import IntegratorConfig, integrate_constant
from liouvlab.errors import (
    DegenerateInput,
    DomainError,
    InsufficientData,
    NotDensityMatrix,
    OutOfRange,
)
from liouvlab.model import DriveParams, ParameterSchedule, Rates, make_system, plus_x


def damped_cosine(t, A, gamma, omega, phi, C):
    return A * np.exp(-gamma * t) * np.cos(omega * t + phi) + C


# --- damped-sinusoid fitting -----------------------------------------------------


def test_fit_recovers_exact_parameters():
    t = np.linspace(0.0, 3.0, 200)
    y = damped_cosine(t, A=0.7, gamma=0.8, omega=3.0, phi=0.4, C=0.2)
    fit = analysis.fit_damped_sine(t, y)
    assert fit.converged
    assert fit.omega == pytest.approx(3.0, abs=1e-6)
    assert fit.gamma == pytest.approx(0.8, abs=1e-6)
    assert fit.amplitude == pytest.approx(0.7, abs=1e-6)
    assert fit.phase == pytest.approx(0.4, abs=1e-6)
    assert fit.offset == pytest.approx(0.2, abs=1e-6)
    assert fit.residual_rms <= 1e-9


@settings(max_examples=100)
@given(
    A=st.floats(0.5, 2.0),
    gamma=st.floats(0.0, 3.0),
    omega=st.floats(0.3, 8.0),
    phi=st.floats(-3.0, 3.0),
    C=st.floats(-1.0, 1.0),
)
def test_fit_recovery_property(A, gamma, omega, phi, C):
    # omega is kept away from 0: at omega ~ 0 the amplitude, phase, and
    # offset merge into fewer identifiable degrees of freedom.
    t = np.linspace(0.0, 6.0, 300)
    y = damped_cosine(t, A, gamma, omega, phi, C)
    fit = analysis.fit_damped_sine(t, y)
    assert abs(fit.omega - omega) <= 1e-6 * max(1.0, omega)
    assert abs(fit.gamma - gamma) <= 1e-6 * max(1.0, gamma)
    assert np.max(np.abs(fit.model(t) - y)) <= 1e-8


def test_fit_constant_series_short_circuits():
    t = np.linspace(0.0, 1.0, 50)
    fit = analysis.fit_damped_sine(t, np.full_like(t, 0.37))
    assert fit.converged
    assert fit.amplitude == 0.0
    assert fit.omega == 0.0
    assert fit.gamma == 0.0
    assert fit.offset == pytest.approx(0.37)
    assert fit.residual_rms == 0.0


def test_fit_model_roundtrip():
    fit = analysis.DampedSineFit(
        omega=2.0, gamma=0.5, amplitude=1.2, phase=-0.3, offset=0.1,
        residual_rms=0.0, converged=True)
    t = np.array([0.0, 0.5, 1.0])
    assert np.allclose(fit.model(t), damped_cosine(t, 1.2, 0.5, 2.0, -0.3, 0.1))


def test_fit_input_validation():
    t5 = np.linspace(0.0, 1.0, 5)
    with pytest.raises(InsufficientData):
        analysis.fit_damped_sine(t5, np.ones(5))
    with pytest.raises(DegenerateInput):
        analysis.fit_damped_sine(np.linspace(0, 1, 20), np.ones(10))
    with pytest.raises(DegenerateInput):
        analysis.fit_damped_sine(np.zeros(20), np.ones(20))  # not increasing
    bad = np.linspace(0.0, 1.0, 20)
    y = np.ones(20)
    y[3] = np.nan
    with pytest.raises(DegenerateInput):
        analysis.fit_damped_sine(bad, y)


# --- spectral predictions ----------------------------------------------------------


def excited_projector():
    return np.diag([0.0, 1.0]).astype(complex)


def test_predict_rates_above_and_below_the_critical_coupling():
    rates = Rates(gamma_e=4.0)
    above = make_system(DriveParams(J=1.8), rates)
    w, g = analysis.predict_rates(above, excited_projector(), obs_index=3)
    assert w == pytest.approx(0.25 * math.sqrt(64.0 * 1.8**2 - 16.0), abs=1e-9)
    assert g == pytest.approx(3.0, abs=1e-9)

    below = make_system(DriveParams(J=0.3), rates)
    w, g = analysis.predict_rates(below, excited_projector(), obs_index=3)
    assert w == pytest.approx(0.0, abs=1e-9)
    assert g == pytest.approx(2.2, abs=1e-9)  # the slower real branch


def test_ep_coupling_formulas():
    assert analysis.ep_coupling(Rates(gamma_e=4.4, gamma_phi=0.1), 2) == pytest.approx(0.525)
    assert analysis.ep_coupling(Rates(gamma_e=4.5), 2) == pytest.approx(0.5625)
    assert analysis.ep_coupling(Rates(gamma_e=0.4, gamma_phi=0.2), 2) == 0.0
    assert analysis.ep_coupling(Rates(gamma_e=4.2), 3) == pytest.approx(1.05)
    with pytest.raises(DomainError):
        analysis.ep_coupling(Rates(gamma_e=1.0), 4)


def test_simulated_transient_matches_prediction_above_transition():
    ge, J = 4.0, 1.8
    system = make_system(DriveParams(J=J), rates=Rates(gamma_e=ge))
    t = np.linspace(0.0, 10.0, 500)
    res = integrate_constant(system, excited_projector(), t)
    fit = analysis.fit_damped_sine(t, res.states[:, 1, 1].real)
    w_exp = 0.25 * math.sqrt(64.0 * J**2 - ge**2)
    assert fit.converged
    assert abs(fit.omega - w_exp) <= 0.02 * w_exp
    assert abs(fit.gamma - 0.75 * ge) <= 0.05 * 0.75 * ge


def test_deep_relaxational_regime_fits_to_zero_frequency():
    system = make_system(DriveParams(J=0.1), Rates(gamma_e=4.0))
    t = np.linspace(0.0, 10.0, 500)
    res = integrate_constant(system, excited_projector(), t)
    fit = analysis.fit_damped_sine(t, res.states[:, 1, 1].real)
    assert fit.omega <= 0.1


# --- transition scans ----------------------------------------------------------------


def test_scan_transition_qubit():
    template = make_system(DriveParams(J=0.3), Rates(gamma_e=4.4, gamma_phi=0.1))
    Js = np.array([0.3, 0.45, 0.525, 0.6, 0.9, 1.2])
    scan = analysis.scan_transition(template, Js)
    assert scan.j_ep == pytest.approx(0.525)
    assert scan.failures == []
    assert list(scan.flagged) == [abs(J - 0.525) < 0.05 for J in Js]
    assert scan.omega_fit[0] <= 0.1
    assert scan.omega_fit[-1] == pytest.approx(scan.omega_pred[-1], rel=0.02)
    assert scan.transition_estimate(threshold=0.1) == pytest.approx(0.6)
    header, rows = scan.table()
    assert header == ["J", "omega_fit", "gamma_fit", "omega_pred", "gamma_pred", "flagged"]
    assert len(rows) == len(Js)


def test_scan_transition_qutrit_point_above_transition():
    template = make_system(DriveParams(J=0.3), Rates(gamma_e=4.2), dim=3)
    scan = analysis.scan_transition(template, [1.4])
    assert scan.j_ep == pytest.approx(1.05)
    assert scan.omega_fit[0] > 0.1


def test_scan_transition_records_failures_instead_of_raising():
    template = make_system(DriveParams(J=0.3), Rates(gamma_e=4.4))
    scan = analysis.scan_transition(template, [0.3, 0.6], n_samples=4)
    assert len(scan.failures) == 2
    assert scan.fits == [None, None]
    assert np.all(np.isnan(scan.omega_fit))
    assert math.isnan(scan.transition_estimate())


# --- state metrics ---------------------------------------------------------------------


def test_chirality_metric():
    a = np.diag([0.7, 0.3]).astype(complex)
    b = np.diag([0.2, 0.8]).astype(complex)
    assert analysis.chirality(a, a) == pytest.approx(0.0, abs=1e-12)
    assert analysis.chirality(a, b) == pytest.approx(analysis.chirality(b, a))
    assert analysis.chirality(a, b) == pytest.approx(0.5)
    with pytest.raises(NotDensityMatrix):
        analysis.chirality(a, np.eye(2))


def test_entropy_values():
    assert analysis.entropy(np.eye(2) / 2.0) == pytest.approx(1.0, abs=1e-12)
    assert analysis.entropy(np.diag([1.0, 0.0])) == pytest.approx(0.0, abs=1e-12)
    expected = -(0.9 * math.log2(0.9) + 0.1 * math.log2(0.1))
    assert analysis.entropy(np.diag([0.9, 0.1])) == pytest.approx(expected, abs=1e-12)
    with pytest.raises(NotDensityMatrix):
        analysis.entropy(np.diag([2.0, -1.0]))


def test_entropy_is_basis_independent(rng):
    from conftest import random_density_matrix

    rho = random_density_matrix(rng, 3)
    w = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    q, _ = np.linalg.qr(w)
    rotated = q @ rho @ q.conj().T
    assert analysis.entropy(rotated) == pytest.approx(analysis.entropy(rho), abs=1e-10)


# --- loop sweeps --------------------------------------------------------------------


def test_sweep_metrics_structure_and_ranges():
    system = make_system(DriveParams(J=16.0), Rates(gamma_e=4.6, gamma_phi=0.2))
    family = ParameterSchedule(T=2.0)
    psi = plus_x()
    rho0 = np.outer(psi, psi.conj())
    out = analysis.sweep_metrics(system, family, "T", [1.0, 2.0], (rho0, rho0),
                                 cfg=IntegratorConfig(dt=2e-3))
    assert out.vary == "T"
    assert out.chirality.shape == (2,)
    for i in range(2):
        assert 0.0 <= out.chirality[i] <= 1.0
        assert analysis.entropy(out.final_cw[i]) == pytest.approx(out.entropy_cw[i])
        assert analysis.entropy(out.final_ccw[i]) == pytest.approx(out.entropy_ccw[i])
    assert out.chirality[1] > 0.5  # strong chirality on the standard loop
    header, rows = out.table()
    assert header == ["T", "chirality", "entropy_cw", "entropy_ccw"]
    assert len(rows) == 2


def test_sweep_metrics_input_validation():
    system = make_system(DriveParams(J=16.0), Rates(gamma_e=4.6))
    psi = plus_x()
    rho0 = np.outer(psi, psi.conj())
    with pytest.raises(OutOfRange):
        analysis.sweep_metrics(system, ParameterSchedule(T=2.0), "J_max", [1.0], (rho0, rho0))
    with pytest.raises(OutOfRange):
        analysis.sweep_metrics(system, ParameterSchedule(T=2.0), "T", [], (rho0, rho0))
    custom = ParameterSchedule(T=2.0, J_of_t=lambda t: 1.0)
    with pytest.raises(DomainError):
        analysis.sweep_metrics(system, custom, "T", [1.0], (rho0, rho0))
