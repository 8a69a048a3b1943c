import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bhdimer.analysis import (
    FrequencyFit,
    dominant_frequency,
    fit_rabi_frequency,
    oscillation_amplitude,
    spectrum,
)
from bhdimer.dynamics import ProbabilityTrace, propagate_spectral
from bhdimer.errors import NumericalError
from bhdimer.exact import level_splitting
from bhdimer.model import ResonantPair, SystemParams, resonant_pairs
from bhdimer.rabi import omega_asymmetric

U = 1.0
OM = 0.1


def _synthetic(values_by_state, t, n_atoms=1):
    probs = np.stack(values_by_state, axis=1)
    return ProbabilityTrace(t, probs, np.zeros(len(t)), SystemParams(n_atoms, U))


def _sin2_trace(w, t, amplitude=1.0):
    up = amplitude * np.sin(w * t) ** 2
    return _synthetic([1.0 - up, up], t)


@pytest.fixture(scope="module")
def two_atom_sudden():
    t_end = 2.2 * math.pi / (2 * OM**2 / U)
    return propagate_spectral(SystemParams(2, U), OM, 0, t_end, 4 * int(t_end) + 1)


@pytest.fixture(scope="module")
def all_pair_fits():
    # every resonant configuration with N <= 8 at Omega/U = 0.1
    rows = []
    for n_atoms in range(1, 9):
        for k in range(n_atoms):
            p = SystemParams(n_atoms, U, float(k))
            for pair in resonant_pairs(p):
                w = omega_asymmetric(p, pair.lower, OM)
                t_end = 2.2 * math.pi / w
                samples = int(min(max(4001, 2 * t_end), 200001))
                tr = propagate_spectral(p, OM, pair.lower, t_end, samples)
                rows.append((p, pair, w, fit_rabi_frequency(tr, pair.upper)))
    return rows


# -- fit_rabi_frequency ------------------------------------------------------


@pytest.mark.parametrize("w", [0.3, 2e-3, 1e-9])
def test_fit_synthetic_round_trip(w):
    t = np.linspace(0, 2.2 * math.pi / w, 1000)
    fit = fit_rabi_frequency(_sin2_trace(w, t), 1)
    assert fit.omega_fit == pytest.approx(w, rel=1e-3)
    assert fit.amplitude_fit == pytest.approx(1.0, abs=1e-4)
    assert not fit.initial
    back = fit_rabi_frequency(_sin2_trace(w, t), 0)
    assert back.initial and back.omega_fit == pytest.approx(w, rel=1e-3)
    np.testing.assert_allclose(back.model(t), np.cos(w * t) ** 2, atol=1e-5)


def test_fit_partial_amplitude_with_fast_ripple():
    w = 0.02
    t = np.linspace(0, 2.2 * math.pi / w, 20001)
    up = 0.6 * np.sin(w * t) ** 2 + 0.02 * np.sin(1.1 * t)
    fit = fit_rabi_frequency(_synthetic([1 - up, up], t), 1)
    assert fit.omega_fit == pytest.approx(w, rel=2e-3)
    assert fit.amplitude_fit == pytest.approx(0.6, rel=1e-2)
    assert fit.residual == pytest.approx(0.02 / math.sqrt(2), rel=0.1)


def test_fit_short_rabi_period_against_baseline_width():
    # period comparable to the 10/U smoothing width
    w = 0.2
    t = np.linspace(0, 2.2 * math.pi / w, 4001)
    assert fit_rabi_frequency(_sin2_trace(w, t), 1).omega_fit == pytest.approx(w, rel=1e-3)


def test_fit_no_oscillation():
    t = np.linspace(0, 10, 100)
    with pytest.raises(NumericalError, match="no oscillation"):
        fit_rabi_frequency(_synthetic([np.ones(100), np.zeros(100)], t), 1)


def test_fit_bad_inputs():
    t = np.linspace(0, 10, 100)
    tr = _sin2_trace(0.5, t)
    with pytest.raises(ValueError):
        fit_rabi_frequency(tr, 2)
    irregular = np.sort(np.concatenate([np.linspace(0, 5, 50), np.linspace(5.5, 10, 50)]))
    with pytest.raises(ValueError, match="uniformly"):
        fit_rabi_frequency(_sin2_trace(0.5, irregular), 1)


def test_fit_two_atom_propagation(two_atom_sudden):
    fit = fit_rabi_frequency(two_atom_sudden, 2)
    assert fit.omega_fit > 0 and fit.residual >= 0 and 0 <= fit.amplitude_fit <= 1
    # the fit tracks the exact eigenvalue splitting closely
    exact = level_splitting(SystemParams(2, U), OM, ResonantPair(0, 2))
    assert fit.omega_fit == pytest.approx(exact, rel=5e-3)


def test_fit_invariant_under_subsampling(two_atom_sudden):
    full = fit_rabi_frequency(two_atom_sudden, 2)
    tr = two_atom_sudden
    half = ProbabilityTrace(tr.times[::2], tr.probabilities[::2], tr.norm_error[::2], tr.params)
    sub = fit_rabi_frequency(half, 2)
    # moving the fitted curve by the frequency change stays within the residual
    t_end = tr.times[-1]
    assert abs(sub.omega_fit - full.omega_fit) * t_end * full.amplitude_fit <= full.residual
    assert abs(sub.amplitude_fit - full.amplitude_fit) <= full.residual


@pytest.mark.slow
@pytest.mark.xfail(strict=True, reason="two-hop pairs run 8-22% slow at Omega/U=0.1 (see decisions ledger)")
def test_fitted_frequency_within_five_percent_for_all_pairs(all_pair_fits):
    bad = [(p.n_atoms, p.asymmetry, pair.lower, fit.omega_fit / w - 1) for p, pair, w, fit in all_pair_fits
           if abs(fit.omega_fit / w - 1) > 0.05]
    assert not bad, bad


@pytest.mark.slow
def test_fitted_frequency_converges_with_hop_count(all_pair_fits):
    # the leading-order formula is good to a few percent for single hops and for M >= 4
    for p, pair, w, fit in all_pair_fits:
        dev = fit.omega_fit / w - 1
        assert -0.25 < dev < 0.01
        if pair.transferred == 1 or pair.transferred >= 4:
            assert abs(dev) <= 0.05, (p, pair, dev)


@pytest.mark.slow
@pytest.mark.xfail(strict=True, reason="off-resonant leakage leaves A between 0.79 and 0.95 for two- and three-hop pairs")
def test_partner_amplitude_near_complete_for_all_pairs(all_pair_fits):
    bad = [(p.n_atoms, p.asymmetry, pair.lower, fit.amplitude_fit) for p, pair, w, fit in all_pair_fits
           if fit.amplitude_fit < 0.95]
    assert not bad, bad


# -- oscillation_amplitude ---------------------------------------------------


def test_amplitude_zero_on_constant_trace():
    t = np.linspace(0, 100, 1001)
    tr = _synthetic([np.full(1001, 0.3), np.full(1001, 0.7)], t)
    assert oscillation_amplitude(tr, 0, (10.0, 90.0)) == 0.0


@settings(max_examples=30, deadline=None)
@given(st.floats(0.0, 0.5), st.floats(0.5, 3.0))
def test_amplitude_non_negative(a, w):
    t = np.linspace(0, 200, 4001)
    wiggle = 0.5 + a * np.sin(w * t)
    tr = _synthetic([wiggle, 1 - wiggle], t)
    assert oscillation_amplitude(tr, 0, (20.0, 180.0)) >= 0.0


def test_amplitude_measures_fast_wiggle_only():
    t = np.linspace(0, 400, 40001)
    slow = 0.4 * np.sin(0.01 * t) ** 2
    fast = 0.03 * np.cos(1.07 * t)
    tr = _synthetic([slow + fast, 1 - slow - fast], t)
    assert oscillation_amplitude(tr, 0, (20.0, 380.0)) == pytest.approx(0.06, rel=0.05)


def test_amplitude_window_checks():
    t = np.linspace(0, 10, 101)
    tr = _sin2_trace(0.5, t)
    with pytest.raises(ValueError, match="window"):
        oscillation_amplitude(tr, 1, (5.0, 11.0))
    with pytest.raises(ValueError, match="window"):
        oscillation_amplitude(tr, 1, (6.0, 5.0))


def test_amplitude_two_atom_sudden(two_atom_sudden):
    amp = oscillation_amplitude(two_atom_sudden, 1, (10.0, two_atom_sudden.times[-1]))
    assert amp == pytest.approx(8 * OM**2 / (U**2 + 16 * OM**2), rel=0.05)


# -- spectrum ----------------------------------------------------------------


def test_pure_sinusoid_single_peak():
    w = 0.731
    t = np.arange(4096) * 0.05
    x = 0.5 + 0.2 * np.sin(w * t)
    peaks = spectrum(_synthetic([x, 1 - x], t), 0)
    assert len(peaks) == 1
    bin_w = 2 * math.pi / (t[-1] - t[0])
    assert peaks[0].angular_frequency == pytest.approx(w, abs=0.05 * bin_w)


def test_spectrum_within_sampling_limit():
    t = np.arange(2000) * 0.3
    x = 0.5 + 0.1 * np.sin(2.1 * t) + 0.1 * np.sin(10.0 * t)  # second tone aliases
    peaks = spectrum(_synthetic([x, 1 - x], t), 0)
    assert peaks and all(0 <= pk.angular_frequency <= math.pi / 0.3 for pk in peaks)
    assert [pk.power for pk in peaks] == sorted((pk.power for pk in peaks), reverse=True)


def test_spectrum_constant_and_irregular():
    t = np.linspace(0, 10, 200)
    assert spectrum(_synthetic([np.full(200, 0.5), np.full(200, 0.5)], t), 0) == []
    irregular = np.cumsum(np.linspace(1.0, 1.1, 200))
    with pytest.raises(ValueError):
        spectrum(_sin2_trace(0.5, irregular), 0)
    with pytest.raises(NumericalError):
        dominant_frequency(_synthetic([np.full(200, 0.5), np.full(200, 0.5)], t), 0)


@pytest.mark.parametrize("w", [0.4, 1.3])
def test_peak_stable_under_duration_doubling(w):
    h = 0.1
    short_t = np.arange(3000) * h
    long_t = np.arange(6000) * h
    a = spectrum(_sin2_trace(w, short_t), 1)[0].angular_frequency
    b = spectrum(_sin2_trace(w, long_t), 1)[0].angular_frequency
    assert abs(a - b) <= 2 * math.pi / (short_t[-1] - short_t[0])


def test_two_atom_sudden_state_one_peak(two_atom_sudden):
    kappa_u = math.sqrt(U**2 + 16 * OM**2)
    assert dominant_frequency(two_atom_sudden, 1) == pytest.approx(kappa_u, rel=1e-3)


def test_two_atom_sudden_state_zero_peaks(two_atom_sudden):
    peaks = spectrum(two_atom_sudden, 0)
    bin_w = 2 * math.pi / two_atom_sudden.times[-1]
    slow = 2 * level_splitting(SystemParams(2, U), OM, ResonantPair(0, 2))
    assert peaks[0].angular_frequency == pytest.approx(slow, abs=bin_w)
    assert abs(peaks[0].angular_frequency - 4 * OM**2 / U) <= bin_w
    assert any(0.9 * U < pk.angular_frequency < 1.2 * U for pk in peaks[1:])


def test_dominant_frequency_band(two_atom_sudden):
    fast = dominant_frequency(two_atom_sudden, 0, band=(0.5, 2.0))
    assert 0.9 < fast < 1.2
    with pytest.raises(NumericalError, match="band"):
        dominant_frequency(two_atom_sudden, 0, band=(5.0, 6.0))


def test_frequency_fit_model_shapes():
    fit = FrequencyFit(0.5, 0.8, 0.0, False)
    assert fit.model(0.0) == 0.0
    assert fit.model(2 * math.pi) == pytest.approx(0.0, abs=1e-15)
    assert fit.model(math.pi) == pytest.approx(0.8)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert np.shape(fit.model(np.zeros(3))) == (3,)
