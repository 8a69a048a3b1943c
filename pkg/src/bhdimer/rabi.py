"""Collective Rabi frequencies and the reduced two-level description.

For a resonant pair (n, 2nu - n) the cluster of M = 2(nu - n) atoms behaves
like a single particle oscillating between the two Fock states.  Factorials
are evaluated through ``lgamma`` so the formulas stay finite well past N=20.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import PerturbativeValidityWarning
from .model import ResonantPair, SystemParams

#: Omega/U above which the leading-order formulas are flagged.
VALIDITY_RATIO = 0.3


def _warn_if_strong(omega: float, interaction: float) -> None:
    if omega / interaction > VALIDITY_RATIO:
        warnings.warn(
            f"Omega/U = {omega / interaction:.3g} > {VALIDITY_RATIO}: leading-order Rabi "
            "frequencies are unreliable",
            PerturbativeValidityWarning,
            stacklevel=3,
        )


def _log_factorial(k: float) -> float:
    return math.lgamma(k + 1.0)


def omega_symmetric(n_atoms: int, n: int, omega: float, interaction: float) -> float:
    """Rabi frequency of |n> <-> |N-n> in a symmetric well.

    (Omega^M / U^(M-1)) (N-n)! / (n! [(M-1)!]^2) with M = N - 2n.
    """
    if int(n) != n or n < 0 or 2 * n >= n_atoms:
        raise ValueError(f"need 0 <= n < N/2 for a transfer, got n={n}, N={n_atoms}")
    if omega < 0 or interaction <= 0:
        raise ValueError("need omega >= 0 and interaction > 0")
    _warn_if_strong(omega, interaction)
    if omega == 0:
        return 0.0
    m = n_atoms - 2 * n
    log_w = (
        m * math.log(omega)
        - (m - 1) * math.log(interaction)
        + _log_factorial(n_atoms - n)
        - _log_factorial(n)
        - 2 * _log_factorial(m - 1)
    )
    return math.exp(log_w)


def _transfer_size(params: SystemParams, n: int) -> int:
    if not params.is_resonant():
        raise ValueError(
            f"parameters are off resonance: N - beta/U = {2 * params.nu:.12g} is not a positive integer"
        )
    two_nu = round(2 * params.nu)
    if int(n) != n or n < 0 or 2 * n >= two_nu:
        raise ValueError(f"need 0 <= n < nu = {params.nu:g}, got n={n}")
    return two_nu - 2 * int(n)


def omega_asymmetric(params: SystemParams, n: int, omega: float) -> float:
    """Rabi frequency of |n> <-> |2nu-n> for a resonant (possibly tilted) well."""
    m = _transfer_size(params, n)
    n = int(n)
    partner = n + m
    u = params.interaction
    if omega < 0:
        raise ValueError("omega must be >= 0")
    _warn_if_strong(omega, u)
    if omega == 0:
        return 0.0
    n_atoms = params.n_atoms
    log_w = (
        m * math.log(omega)
        - (m - 1) * math.log(u)
        - 2 * _log_factorial(m - 1)
        + 0.5
        * (
            _log_factorial(n_atoms - n)
            + _log_factorial(partner)
            - _log_factorial(n)
            - _log_factorial(n_atoms - partner)
        )
    )
    return math.exp(log_w)


@dataclass(frozen=True)
class RabiPrediction:
    pair: ResonantPair
    omega: float
    phase_factor: complex


def predict(params: SystemParams, n: int, omega: float) -> RabiPrediction:
    """Closed-form prediction for the pair that starts in |n>."""
    m = _transfer_size(params, n)
    w = omega_asymmetric(params, n, omega)
    return RabiPrediction(ResonantPair(int(n), int(n) + m), w, complex(0, (-1) ** int(n)))


def two_level_probabilities(prediction: RabiPrediction, initial_n: int, t):
    """(p_lower, p_upper) of the reduced two-level model; cos^2 on the initial state."""
    t = np.asarray(t, dtype=float)
    stay = np.cos(prediction.omega * t) ** 2
    move = np.sin(prediction.omega * t) ** 2
    if initial_n == prediction.pair.lower:
        return stay, move
    if initial_n == prediction.pair.upper:
        return move, stay
    raise ValueError(f"initial state {initial_n} is not in pair {prediction.pair}")


@dataclass(frozen=True)
class DetuningSpec:
    """A resonant pair detuned by an extra asymmetry ``delta_beta``."""

    delta_beta: float
    pair: ResonantPair
    omega: float
    nu: float

    @property
    def level_split(self) -> float:
        return 2 * self.delta_beta * (self.pair.lower - self.nu)

    @property
    def effective_omega(self) -> float:
        return math.hypot(self.omega, self.delta_beta * (self.nu - self.pair.lower))

    @property
    def transfer_amplitude(self) -> float:
        w = self.omega
        x = self.delta_beta * (self.nu - self.pair.lower)
        return w * w / (w * w + x * x) if (w or x) else 1.0


def detuning(params: SystemParams, n: int, omega: float, delta_beta: float) -> DetuningSpec:
    """Detuned pair built on the resonant ``params`` (beta -> beta + delta_beta)."""
    pred = predict(params, n, omega)
    return DetuningSpec(float(delta_beta), pred.pair, pred.omega, params.nu)


def detuned_probabilities(spec: DetuningSpec, t):
    """(p_stay, p_transfer) for detuned Rabi oscillations starting in the lower state."""
    t = np.asarray(t, dtype=float)
    move = spec.transfer_amplitude * np.sin(spec.effective_omega * t) ** 2
    return 1.0 - move, move

