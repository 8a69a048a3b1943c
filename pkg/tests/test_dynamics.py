import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import expm

from bhdimer.dynamics import (
    ProbabilityTrace,
    StateVector,
    check_step,
    default_dt,
    energy_shift,
    evolve,
    mean_population_difference,
    propagate,
    propagate_spectral,
    spectral_amplitudes,
)
from bhdimer.exact import closed_form_amplitudes
from bhdimer.model import CouplingSchedule, SystemParams, hamiltonian_matrix

U = 1.0


def test_zero_coupling_is_stationary():
    p = SystemParams(5, U, 0.7)
    for n in (0, 3, 5):
        tr = propagate(p, CouplingSchedule.constant(0.0), n, 20.0)
        expected = np.zeros(6)
        expected[n] = 1.0
        np.testing.assert_allclose(tr.probabilities, np.broadcast_to(expected, tr.probabilities.shape), atol=1e-14)
        sp = propagate_spectral(p, 0.0, n, 20.0, 11)
        np.testing.assert_allclose(sp.probabilities, np.broadcast_to(expected, sp.probabilities.shape), atol=1e-14)


def test_rk4_matches_matrix_exponential():
    p = SystemParams(4, U, 0.3)
    om = 0.17
    tr = propagate(p, CouplingSchedule.constant(om), 1, 30.0, sample_stride=50)
    h = hamiltonian_matrix(p, om)
    b0 = np.eye(5)[1]
    ref = np.array([np.abs(expm(-1j * h * t) @ b0) ** 2 for t in tr.times])
    assert np.max(np.abs(tr.probabilities - ref)) < 1e-9


def test_time_dependent_rk4_matches_fine_reference():
    # compare against scipy's adaptive integrator at tight tolerance
    from scipy.integrate import solve_ivp

    p = SystemParams(3, U)
    sched = CouplingSchedule.exponential(0.1, 0.2)
    tr = propagate(p, sched, 0, 40.0, sample_stride=100)
    h0 = hamiltonian_matrix(p, 0.0)
    h1 = hamiltonian_matrix(p, 1.0) - h0

    def rhs(t, b):
        return -1j * (h0 + sched.value(t) * h1) @ b

    sol = solve_ivp(rhs, (0, 40.0), np.eye(4)[0].astype(complex), t_eval=tr.times, rtol=1e-11, atol=1e-13, method="DOP853")
    ref = np.abs(sol.y.T) ** 2
    assert np.max(np.abs(tr.probabilities - ref)) < 1e-8


def test_sudden_switch_peak_of_middle_state():
    om = 0.1
    tr = propagate(SystemParams(2, U), CouplingSchedule.constant(om), 0, 200.0)
    assert tr.p(1).max() == pytest.approx(8 * om**2 / (U**2 + 16 * om**2), rel=1e-3)


@pytest.mark.parametrize("n_atoms,initial", [(2, 0), (2, 1), (3, 0), (3, 1)])
def test_rk4_against_closed_forms(n_atoms, initial):
    p = SystemParams(n_atoms, U)
    om = 0.1
    tr = propagate(p, CouplingSchedule.constant(om), initial, 300.0, sample_stride=20)
    exact = np.abs(closed_form_amplitudes(p, om, initial, tr.times)) ** 2
    assert np.max(np.abs(tr.probabilities - exact)) <= 1e-6


def test_spectral_agrees_with_rk4_over_one_rabi_period():
    p = SystemParams(2, U)
    om = 0.1
    t_end = 2 * math.pi / (2 * om**2 / U)
    tr = propagate(p, CouplingSchedule.constant(om), 0, t_end, sample_stride=10)
    sp = spectral_amplitudes(p, om, np.eye(3)[0], tr.times)
    assert np.max(np.abs(tr.probabilities - np.abs(sp) ** 2)) <= 1e-6


def test_spectral_norm_preserved():
    tr = propagate_spectral(SystemParams(12, U, 3.0), 0.08, 4, 5000.0, 3001)
    assert tr.max_norm_error <= 1e-12


def test_spectral_eigenvalues_two_atoms():
    om = 0.1
    e = np.linalg.eigvalsh(hamiltonian_matrix(SystemParams(2, U), om))
    r = math.sqrt(U**2 / 4 + 4 * om**2)
    np.testing.assert_allclose(e, sorted([U / 2 - r, U, U / 2 + r]), atol=1e-14)


def test_spectral_frame_phase():
    # amplitudes are those of H shifted by energy_shift: a common phase only
    p = SystemParams(3, U, 0.4)
    om, t = 0.2, 7.3
    b0 = np.eye(4)[2]
    shifted = spectral_amplitudes(p, om, b0, [t])[0]
    absolute = expm(-1j * hamiltonian_matrix(p, om) * t) @ b0
    np.testing.assert_allclose(shifted * np.exp(-1j * energy_shift(p) * t), absolute, atol=1e-12)


def test_norm_drift_small_and_not_corrected():
    tr = propagate(SystemParams(8, U, 1.0), CouplingSchedule.constant(0.1), 2, 300.0)
    assert tr.max_norm_error <= 1e-8
    assert tr.norm_error[-1] <= 1e-8 * 300.0 * U
    assert tr.norm_error[-1] > 0  # raw RK4 drift is visible, never renormalised


@pytest.mark.parametrize("n_atoms", [2, 3, 5, 6])
def test_mirror_symmetry(n_atoms):
    p = SystemParams(n_atoms, U)
    sched = CouplingSchedule.constant(0.1)
    for n in range(n_atoms + 1):
        a = propagate(p, sched, n, 100.0, sample_stride=25)
        b = propagate(p, sched, n_atoms - n, 100.0, sample_stride=25)
        assert np.max(np.abs(a.probabilities - b.probabilities[:, ::-1])) <= 1e-9


def test_mirror_symmetry_time_dependent():
    p = SystemParams(4, U)
    sched = CouplingSchedule.exponential(0.1, 0.1)
    a = propagate(p, sched, 1, 60.0, sample_stride=25)
    b = propagate(p, sched, 3, 60.0, sample_stride=25)
    assert np.max(np.abs(a.probabilities - b.probabilities[:, ::-1])) <= 1e-9


@pytest.mark.parametrize("sched", [CouplingSchedule.constant(0.1), CouplingSchedule.exponential(0.1, 0.2)])
def test_time_reversal_recovers_initial_state(sched):
    p = SystemParams(4, U, 1.0)
    start = StateVector.fock(p, 1)
    there = evolve(p, sched, start, 80.0)
    assert there.time == pytest.approx(80.0)
    back = evolve(p, sched, there, 80.0, reverse=True)
    assert back.time == pytest.approx(0.0, abs=1e-12)
    assert np.max(np.abs(back.amplitudes - start.amplitudes)) <= 1e-6


def test_step_guard():
    p = SystemParams(8, U)
    sched = CouplingSchedule.constant(0.1)
    with pytest.raises(ValueError, match="too large"):
        propagate(p, sched, 0, 10.0, dt=0.5)
    with pytest.raises(ValueError):
        check_step(p, sched, -1.0)
    check_step(p, sched, default_dt(p, sched))


def test_initial_state_out_of_range():
    with pytest.raises(ValueError):
        propagate(SystemParams(2, U), CouplingSchedule.constant(0.1), 3, 1.0)
    with pytest.raises(ValueError):
        propagate_spectral(SystemParams(2, U), 0.1, -1, 1.0)


def test_last_sample_lands_on_t_end():
    tr = propagate(SystemParams(2, U), CouplingSchedule.constant(0.1), 0, 3.14159, dt=0.01, sample_stride=1)
    assert tr.times[-1] == pytest.approx(3.14159, rel=1e-12)
    assert tr.final_state.time == pytest.approx(3.14159, rel=1e-12)


def test_trace_is_read_only_and_validated():
    tr = propagate(SystemParams(2, U), CouplingSchedule.constant(0.1), 0, 1.0)
    with pytest.raises(ValueError):
        tr.probabilities[0, 0] = 0.5
    p = SystemParams(1, U)
    with pytest.raises(ValueError):
        ProbabilityTrace([0.0, 0.0], [[1, 0], [1, 0]], [0, 0], p)
    with pytest.raises(ValueError):
        ProbabilityTrace([0.0, 1.0], [[1, 0, 0], [1, 0, 0]], [0, 0], p)


def test_bit_reproducible():
    args = (SystemParams(3, U, 1.0), CouplingSchedule.exponential(0.1, 0.3), 0, 20.0)
    a, b = propagate(*args), propagate(*args)
    assert np.array_equal(a.probabilities, b.probabilities)


def test_mean_population_difference():
    p2 = SystemParams(2, U)
    tr = ProbabilityTrace([0.0, 1.0], [[1, 0, 0], [0.5, 0, 0.5]], [0, 0], p2)
    np.testing.assert_allclose(mean_population_difference(tr), [-2.0, 0.0])
    tr8 = propagate(SystemParams(8, U, 1.0), CouplingSchedule.constant(0.1), 2, 1.0)
    assert mean_population_difference(tr8)[0] == -4.0


@settings(max_examples=25, deadline=None)
@given(
    st.integers(1, 6),
    st.floats(0.0, 3.0),
    st.floats(0.0, 0.3),
    st.data(),
)
def test_probabilities_valid(n_atoms, beta, om, data):
    p = SystemParams(n_atoms, U, beta)
    n = data.draw(st.integers(0, n_atoms))
    tr = propagate(p, CouplingSchedule.constant(om), n, 5.0)
    assert np.all(tr.probabilities >= 0) and np.all(tr.probabilities <= 1 + 1e-12)
    assert tr.max_norm_error <= 1e-10
    assert np.all(np.diff(tr.times) > 0)
