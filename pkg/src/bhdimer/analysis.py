"""Feature extraction from probability traces.

* :func:`fit_rabi_frequency` -- slow collective frequency by a sin^2 fit.
* :func:`oscillation_amplitude` -- size of the fast wiggles riding on it.
* :func:`spectrum` -- peaks of a tapered, zero-padded DFT.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.ndimage import uniform_filter1d
from scipy.optimize import curve_fit
from scipy.signal import find_peaks

from .dynamics import ProbabilityTrace
from .errors import NumericalError

#: Width of the moving-average baseline, in units of 1/U.
BASELINE_WIDTH = 10.0
MIN_PEAK_TO_PEAK = 1e-6
PEAK_THRESHOLD = 5.0
PEAK_PROMINENCE = 0.25
ZERO_PAD = 8
_UNIFORM_RTOL = 1e-6


@dataclass(frozen=True)
class FrequencyFit:
    """Result of fitting p(n, t) to a two-level Rabi envelope.

    ``initial`` marks the form 1 - A sin^2(wt) used when the state starts
    populated (equal to A cos^2(wt) for complete transfer); otherwise the
    model is A sin^2(wt).
    """

    omega_fit: float
    amplitude_fit: float
    residual: float
    initial: bool

    def model(self, t):
        s = np.sin(self.omega_fit * np.asarray(t, dtype=float)) ** 2
        return 1.0 - self.amplitude_fit * s if self.initial else self.amplitude_fit * s


def _sample_step(times: np.ndarray) -> float:
    if len(times) < 3:
        raise ValueError("trace needs at least 3 samples")
    steps = np.diff(times)
    h = float(np.mean(steps))
    if np.max(np.abs(steps - h)) > _UNIFORM_RTOL * h:
        raise ValueError("trace is not uniformly sampled")
    return h


def _baseline(values: np.ndarray, width_samples: int) -> np.ndarray:
    """Moving average applied twice (triangular kernel); suppresses sidelobes of one boxcar."""
    if width_samples < 2:
        return values.copy()
    once = uniform_filter1d(values, width_samples, mode="nearest")
    return uniform_filter1d(once, width_samples, mode="nearest")


def _width_samples(trace: ProbabilityTrace, h: float) -> int:
    return max(1, int(round(BASELINE_WIDTH / trace.params.interaction / h)))


def _parabolic_vertex(y0: float, y1: float, y2: float) -> float:
    """Offset in (-1, 1) of the vertex of the parabola through three samples."""
    den = y0 - 2 * y1 + y2
    return 0.0 if den == 0 else 0.5 * (y0 - y2) / den


def _first_extremum_time(times: np.ndarray, signal: np.ndarray) -> float:
    """Earliest local maximum of ``signal`` above 50% of its global maximum.

    Maxima must also stand out by a quarter of the signal range, so residual
    ripple on a rising slope is not mistaken for the turning point.
    """
    top = float(np.max(signal))
    idx, _ = find_peaks(signal, height=0.5 * top, prominence=PEAK_PROMINENCE * float(np.ptp(signal)))
    if len(idx) == 0:
        # monotone rise: the trace ends before the first turning point
        k = int(np.argmax(signal))
        return float(times[k])
    k = int(idx[0])
    h = times[1] - times[0]
    return float(times[k] + h * _parabolic_vertex(signal[k - 1], signal[k], signal[k + 1]))


def fit_rabi_frequency(trace: ProbabilityTrace, n: int) -> FrequencyFit:
    """Least-squares Rabi frequency and amplitude of p(n, t).

    The starting frequency comes from the first transfer maximum of the
    baseline-smoothed trace (the smoothing removes fast wiggles that would
    otherwise create spurious extrema). When the Rabi period is comparable
    to the baseline width, the width shrinks to a quarter of the rise time.
    """
    if int(n) != n or not 0 <= n <= trace.params.n_atoms:
        raise ValueError(f"state index {n} outside [0, {trace.params.n_atoms}]")
    t = trace.times
    p = trace.p(int(n))
    h = _sample_step(t)
    if np.ptp(p) < MIN_PEAK_TO_PEAK:
        raise NumericalError(f"no oscillation detected in p({n}) (peak-to-peak {np.ptp(p):.3g})")
    initial = bool(p[0] > 0.5)
    transferred = 1.0 - p if initial else p
    width = _width_samples(trace, h)
    smooth = _baseline(transferred, width)
    t_peak = _first_extremum_time(t, smooth)
    if 0 < t_peak < 2 * width * h:
        # the baseline is too wide for this Rabi period and has flattened it
        smooth = _baseline(transferred, max(1, int(t_peak / (4 * h))))
        t_peak = _first_extremum_time(t, smooth)
    if t_peak <= 0:
        raise NumericalError(f"could not locate a transfer maximum in p({n})")
    w0 = math.pi / (2 * t_peak)
    a0 = float(np.clip(np.max(smooth), 1e-3, 1.0))

    def model(tau, r, a):
        return a * np.sin(r * tau) ** 2

    # fit in scaled time so both parameters are O(1) whatever the Rabi period
    tau = t * w0
    try:
        (r, a), _ = curve_fit(model, tau, transferred, p0=(1.0, a0), bounds=([0.0, 0.0], [np.inf, 1.0]))
    except RuntimeError as exc:
        raise NumericalError(f"sin^2 fit of p({n}) did not converge: {exc}") from exc
    if not r > 0:
        raise NumericalError(f"sin^2 fit of p({n}) returned a non-positive frequency")
    w = r * w0
    resid = float(np.sqrt(np.mean((model(tau, r, a) - transferred) ** 2)))
    return FrequencyFit(float(w), float(a), resid, initial)


def oscillation_amplitude(trace: ProbabilityTrace, n: int, window: tuple[float, float]) -> float:
    """Peak-to-peak of p(n, t) minus its 10/U moving-average baseline inside ``window``."""
    t0, t1 = window
    t = trace.times
    if not (t[0] <= t0 < t1 <= t[-1]):
        raise ValueError(f"window {window} is not inside the trace span [{t[0]:g}, {t[-1]:g}]")
    h = _sample_step(t)
    p = trace.p(int(n))
    fast = p - _baseline(p, _width_samples(trace, h))
    mask = (t >= t0) & (t <= t1)
    if not np.any(mask):
        raise ValueError(f"window {window} contains no samples")
    return float(np.ptp(fast[mask]))


@dataclass(frozen=True)
class SpectrumPeak:
    angular_frequency: float
    power: float


def spectrum(trace: ProbabilityTrace, n: int, zero_pad: int = ZERO_PAD) -> list[SpectrumPeak]:
    """Peaks of the Hann-tapered power spectrum of p(n, t), strongest first.

    Peaks are detected on the unpadded DFT, where a tapered sinusoid has no
    spurious local maxima, and then refined on the zero-padded spectrum by
    parabolic interpolation.
    """
    t = trace.times
    h = _sample_step(t)
    p = trace.p(int(n))
    x = (p - p.mean()) * np.hanning(len(p))
    coarse = np.abs(np.fft.rfft(x)) ** 2
    if not np.any(coarse > 0):
        return []
    nfft = zero_pad * len(x)
    fine = np.abs(np.fft.rfft(x, n=nfft)) ** 2
    dw_fine = 2 * math.pi / (nfft * h)
    nyquist = math.pi / h
    threshold = PEAK_THRESHOLD * float(np.median(coarse))
    idx, _ = find_peaks(coarse, height=threshold)
    peaks = []
    for k in idx:
        lo = max(0, (k - 1) * zero_pad)
        hi = min(len(fine) - 1, (k + 1) * zero_pad)
        j = lo + int(np.argmax(fine[lo : hi + 1]))
        if 0 < j < len(fine) - 1:
            y0, y1, y2 = (math.log(max(fine[j + d], 1e-300)) for d in (-1, 0, 1))
            off = _parabolic_vertex(y0, y1, y2)
        else:
            off = 0.0
        w = float(np.clip((j + off) * dw_fine, 0.0, nyquist))
        peaks.append(SpectrumPeak(w, float(fine[j])))
    peaks.sort(key=lambda pk: pk.power, reverse=True)
    return peaks


def dominant_frequency(trace: ProbabilityTrace, n: int, band: Optional[tuple[float, float]] = None) -> float:
    """Angular frequency of the strongest spectral peak, optionally within ``band``."""
    for pk in spectrum(trace, n):
        if band is None or band[0] <= pk.angular_frequency <= band[1]:
            return pk.angular_frequency
    raise NumericalError(f"no spectral peak of p({n}) found" + (f" in band {band}" if band else ""))
