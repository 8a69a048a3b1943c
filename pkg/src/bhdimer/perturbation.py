"""Leading-order transition amplitudes along the single-hop pathway.

The amplitude to go from |n> to |n+M> in M hops is an M-fold time-ordered
integral of products W_j(t_j) exp(i Delta_j t_j).  It is evaluated here in two
independent ways:

* numerically, by nested cumulative trapezoidal quadrature
  (:func:`nested_amplitude_numeric`);
* through the endpoint decomposition, where each oscillatory integral
  collapses onto its limits and the amplitude splits into labelled jump
  scenarios (:func:`coordinated_amplitude`, :func:`scenario_amplitudes_two_atom`,
  :func:`scenario_amplitudes_three_atom`).

Phases follow the Schrodinger convention exp(-iEt) throughout, so the
scenario terms add up coherently to the numerical value.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .model import (
    DEGENERACY_TOL,
    CouplingSchedule,
    SystemParams,
    coupling_profile,
    energy_ladder,
)

MIN_POINTS_PER_PERIOD = 40
DEFAULT_POINTS_PER_PERIOD = 400
#: Largest |dW/dt| / (W_max min|Delta|) for which the coordinated term dominates.
SLOWNESS_LIMIT = 0.1


@dataclass(frozen=True)
class LadderGaps:
    gaps: tuple
    base_n: int
    transferred: int

    @property
    def total(self) -> float:
        return float(sum(self.gaps))

    @property
    def partial_sums(self) -> tuple:
        """Delta_1, Delta_1 + Delta_2, ..., up to M - 1 terms."""
        return tuple(float(x) for x in np.cumsum(self.gaps)[:-1])


def ladder_gaps(params: SystemParams, n: int, transferred: int) -> LadderGaps:
    """Delta_m = E(n+m) - E(n+m-1) for m = 1..M."""
    if int(n) != n or int(transferred) != transferred:
        raise ValueError("n and M must be integers")
    n, transferred = int(n), int(transferred)
    if n < 0 or transferred < 1 or n + transferred > params.n_atoms:
        raise ValueError(f"pathway {n} -> {n + transferred} outside [0, {params.n_atoms}]")
    e = energy_ladder(params).energies
    gaps = tuple(float(e[n + m] - e[n + m - 1]) for m in range(1, transferred + 1))
    return LadderGaps(gaps, n, transferred)


def _pathway(params: SystemParams, n: int, transferred: int):
    gaps = ladder_gaps(params, n, transferred)
    e = energy_ladder(params).energies[n : n + transferred + 1]
    prof = coupling_profile(params)[n : n + transferred]
    return gaps, e, prof


def _is_resonant(params: SystemParams, gaps: LadderGaps) -> bool:
    return abs(gaps.total) <= DEGENERACY_TOL * params.interaction


def nested_amplitude_curve(
    params: SystemParams,
    schedule: CouplingSchedule,
    n: int,
    transferred: int,
    t_end: float,
    points_per_period: int = DEFAULT_POINTS_PER_PERIOD,
):
    """A_{n,n+M}(T) on a uniform grid T in [0, t_end].

    Each nesting level is a cumulative trapezoidal integral, so the whole
    curve costs O(M * grid).  Returns ``(times, amplitudes)``.
    """
    if transferred not in (1, 2, 3):
        raise ValueError(f"nested quadrature supports M in {{1, 2, 3}}, got {transferred}")
    if not t_end > 0:
        raise ValueError(f"T must be > 0, got {t_end}")
    if points_per_period < MIN_POINTS_PER_PERIOD:
        raise ValueError(
            f"grid too coarse: {points_per_period} points per period of the fastest phase; "
            f"at least {MIN_POINTS_PER_PERIOD} are required"
        )
    gaps, e, prof = _pathway(params, n, transferred)
    fastest = max(max(abs(g) for g in gaps.gaps), schedule.max_rate())
    if fastest > 0:
        npts = max(math.ceil(t_end * fastest * points_per_period / (2 * math.pi)), points_per_period)
    else:
        npts = points_per_period
    t = np.linspace(0.0, t_end, npts + 1)
    w = schedule.value(t)
    inner = np.ones_like(t, dtype=complex)
    for m, gap in enumerate(gaps.gaps):
        inner = cumulative_trapezoid(prof[m] * w * np.exp(1j * gap * t) * inner, t, initial=0)
    amp = (-1j) ** transferred * np.exp(-1j * e[-1] * t) * inner
    return t, amp


def nested_amplitude_numeric(
    params: SystemParams,
    schedule: CouplingSchedule,
    n: int,
    transferred: int,
    t_end: float,
    points_per_period: int = DEFAULT_POINTS_PER_PERIOD,
) -> complex:
    """Leading-order A_{n,n+M}(T) by direct quadrature of the nested integrals."""
    _, amp = nested_amplitude_curve(params, schedule, n, transferred, t_end, points_per_period)
    return complex(amp[-1])


def _check_slow(params, schedule, gaps):
    nonzero = [abs(g) for g in gaps.gaps if abs(g) > DEGENERACY_TOL * params.interaction]
    if nonzero and schedule.max_rate() > SLOWNESS_LIMIT * min(nonzero):
        warnings.warn(
            f"coupling varies too fast (rate {schedule.max_rate():.3g} > "
            f"{SLOWNESS_LIMIT} * min|Delta| = {SLOWNESS_LIMIT * min(nonzero):.3g}); "
            "the coordinated-jump term need not dominate",
            RuntimeWarning,
            stacklevel=3,
        )


def coordinated_amplitude(
    params: SystemParams,
    schedule: CouplingSchedule,
    n: int,
    transferred: int,
    t_end: float,
) -> complex:
    """Contribution of all M atoms hopping together at one indeterminate time.

    i (-1)^M exp(-i E(n+M) T) int_0^T prod_j W_{n+j}(t) dt / prod_k S_k,
    with S_k = Delta_1 + ... + Delta_k for k < M.
    """
    gaps, e, prof = _pathway(params, n, transferred)
    if not _is_resonant(params, gaps):
        raise ValueError(
            f"states {n} and {n + transferred} are not degenerate (gap sum {gaps.total:.3g})"
        )
    _check_slow(params, schedule, gaps)
    denominator = math.prod(gaps.partial_sums)
    integral = float(np.prod(prof)) * schedule.power_integral(transferred, t_end)
    return 1j * (-1) ** transferred * np.exp(-1j * e[-1] * t_end) * integral / denominator


@dataclass(frozen=True)
class ScenarioAmplitudes:
    """Jump-scenario pieces of a transition amplitude.

    coordinated    -- every atom hops together at an unspecified time
    split_at_start -- part of the cluster hops at t=0, the rest at t=T
    all_at_start   -- the whole cluster hops at t=0
    sandwich       -- first atom at t=0, middle one in between, last at t=T
                      (three-atom transfer only)
    """

    coordinated: complex
    split_at_start: complex
    all_at_start: complex
    sandwich: Optional[complex] = None

    @property
    def total(self) -> complex:
        return self.coordinated + self.split_at_start + self.all_at_start + (self.sandwich or 0)

    def as_dict(self) -> dict:
        out = {
            "coordinated": self.coordinated,
            "split_at_start": self.split_at_start,
            "all_at_start": self.all_at_start,
        }
        if self.sandwich is not None:
            out["sandwich"] = self.sandwich
        out["total"] = self.total
        return out


def _require_symmetric(params: SystemParams, n_atoms: int) -> None:
    if params.n_atoms != n_atoms or params.asymmetry != 0:
        raise ValueError(
            f"this decomposition needs N={n_atoms} in a symmetric well, "
            f"got N={params.n_atoms}, beta={params.asymmetry}"
        )


def scenario_amplitudes_two_atom(params: SystemParams, schedule: CouplingSchedule, t_end: float) -> ScenarioAmplitudes:
    """Endpoint decomposition of A_{0,2}(T) for N=2."""
    _require_symmetric(params, 2)
    gaps, e, prof = _pathway(params, 0, 2)
    d1, d2 = gaps.gaps
    w0, wt = schedule.value(0.0), schedule.value(t_end)
    c1, c2 = prof
    coordinated = 1j * np.exp(-1j * e[2] * t_end) / d1 * c1 * c2 * schedule.power_integral(2, t_end)
    split = -c1 * w0 * c2 * wt * np.exp(-1j * e[1] * t_end) / (d1 * d2)
    at_start = c1 * w0 * c2 * w0 * np.exp(-1j * e[2] * t_end) / (d1 * d2)
    return ScenarioAmplitudes(complex(coordinated), complex(split), complex(at_start))


def scenario_amplitudes_three_atom(params: SystemParams, schedule: CouplingSchedule, t_end: float) -> ScenarioAmplitudes:
    """Endpoint decomposition of A_{0,3}(T) for N=3 (middle gap is zero).

    The four terms are the leading endpoint contributions; terms of relative
    size 1/(|Delta| T) beyond them are not included.
    """
    _require_symmetric(params, 3)
    gaps, e, prof = _pathway(params, 0, 3)
    d1, _, d3 = gaps.gaps
    w0, wt = schedule.value(0.0), schedule.value(t_end)
    c1, c2, c3 = prof
    phase_end = np.exp(-1j * e[3] * t_end)
    coordinated = -1j * phase_end / d1**2 * c1 * c2 * c3 * schedule.power_integral(3, t_end)
    split = c1 * w0 * c2 * w0 * c3 * wt * np.exp(-1j * e[2] * t_end) / (d1**2 * d3)
    at_start = -c1 * w0 * c2 * w0 * c3 * w0 * phase_end / (d1**2 * d3)
    sandwich = (
        1j * phase_end * np.exp(1j * d3 * t_end) * c1 * w0 * c3 * wt
        * c2 * schedule.power_integral(1, t_end) / (d1 * d3)
    )
    return ScenarioAmplitudes(complex(coordinated), complex(split), complex(at_start), complex(sandwich))


@dataclass(frozen=True)
class SuddenSwitchPrediction:
    """p(1, t) for N=2 after a sudden switch, and its adiabatic plateau."""

    amplitude: float
    angular_frequency: float
    adiabatic_plateau: float

    def p1(self, t):
        return self.amplitude * np.sin(self.angular_frequency * np.asarray(t, dtype=float) / 2) ** 2


def sudden_oscillation_prediction(params: SystemParams, omega: float) -> SuddenSwitchPrediction:
    """Peak and angular frequency of the fast p(1) oscillation for N=2, beta=0.

    Sudden switch: p(1) = [8 Omega^2/(U^2 + 16 Omega^2)] sin^2(kappa U t / 2) with
    kappa = sqrt(1 + 16 Omega^2/U^2).  Slow switch: p(1) -> 2 Omega^2 / (U sqrt(U^2 + 16 Omega^2)).
    """
    _require_symmetric(params, 2)
    u = params.interaction
    root = math.sqrt(u * u + 16 * omega * omega)
    return SuddenSwitchPrediction(
        amplitude=8 * omega**2 / root**2,
        angular_frequency=root,
        adiabatic_plateau=2 * omega**2 / (u * root),
    )
