"""Two-site Bose-Hubbard model: parameters, Fock energy ladder, couplings.

States are labelled by ``n``, the number of bosons in the right well
(``0 <= n <= N``).  All energies are absolute (``U``, ``beta`` and ``omega``
share one energy unit, ``hbar = 1``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

#: Relative tolerance (in units of U) for calling two ladder energies equal.
DEGENERACY_TOL = 1e-9


@dataclass(frozen=True)
class SystemParams:
    """N bosons with on-site interaction U and right-well offset beta."""

    n_atoms: int
    interaction: float
    asymmetry: float = 0.0

    def __post_init__(self):
        if isinstance(self.n_atoms, bool) or int(self.n_atoms) != self.n_atoms:
            raise ValueError(f"n_atoms must be an integer, got {self.n_atoms!r}")
        object.__setattr__(self, "n_atoms", int(self.n_atoms))
        if self.n_atoms < 1:
            raise ValueError(f"n_atoms must be >= 1, got {self.n_atoms}")
        if not math.isfinite(self.interaction) or self.interaction <= 0:
            raise ValueError(f"interaction U must be finite and > 0, got {self.interaction}")
        if not math.isfinite(self.asymmetry) or self.asymmetry < 0:
            raise ValueError(f"asymmetry beta must be finite and >= 0, got {self.asymmetry}")

    @property
    def nu(self) -> float:
        return resonance_parameter(self)

    @property
    def offset(self) -> float:
        """Ladder offset E0 = U [N(N-1)/2 - nu^2]."""
        nu = self.nu
        return self.interaction * (self.n_atoms * (self.n_atoms - 1) / 2 - nu * nu)

    def is_resonant(self, tol: float = DEGENERACY_TOL) -> bool:
        """True when N - beta/U is an integer, i.e. 2*nu is integral."""
        k = 2 * self.nu
        return abs(k - round(k)) <= tol and round(k) >= 1


@dataclass(frozen=True)
class CouplingSchedule:
    """Tunnelling amplitude Omega(t).

    ``kind`` is ``"constant"`` (sudden switch at t = 0) or ``"exponential"``
    (Omega(t) = Omega [1 - exp(-rate t)]).
    """

    omega: float
    kind: str = "constant"
    switch_rate: Optional[float] = None

    def __post_init__(self):
        if not math.isfinite(self.omega) or self.omega < 0:
            raise ValueError(f"omega must be finite and >= 0, got {self.omega}")
        if self.kind == "constant":
            if self.switch_rate is not None:
                raise ValueError("switch_rate is only meaningful for an exponential schedule")
        elif self.kind == "exponential":
            if self.switch_rate is None or not self.switch_rate > 0:
                raise ValueError(f"exponential schedule needs switch_rate > 0, got {self.switch_rate}")
        else:
            raise ValueError(f"unknown schedule kind {self.kind!r}")

    @classmethod
    def constant(cls, omega: float) -> "CouplingSchedule":
        return cls(omega=omega)

    @classmethod
    def exponential(cls, omega: float, switch_rate: float) -> "CouplingSchedule":
        return cls(omega=omega, kind="exponential", switch_rate=switch_rate)

    @property
    def is_constant(self) -> bool:
        return self.kind == "constant"

    def value(self, t):
        """Omega(t); accepts scalars or arrays."""
        if self.kind == "constant":
            return self.omega * np.ones_like(t, dtype=float) if np.ndim(t) else float(self.omega)
        return self.omega * -np.expm1(-self.switch_rate * np.asarray(t, dtype=float))

    def ratio(self, t):
        """Omega(t) / Omega, in [0, 1]."""
        if self.kind == "constant":
            return np.ones_like(t, dtype=float) if np.ndim(t) else 1.0
        return -np.expm1(-self.switch_rate * np.asarray(t, dtype=float))

    def max_rate(self) -> float:
        """Upper bound of |dOmega/dt| / Omega over t >= 0."""
        return 0.0 if self.kind == "constant" else float(self.switch_rate)

    def power_integral(self, power: int, t_end: float) -> float:
        """Closed form of the integral of Omega(t)**power over [0, t_end]."""
        if power < 0:
            raise ValueError("power must be >= 0")
        if self.kind == "constant":
            return self.omega**power * t_end
        g = self.switch_rate
        # binomial expansion of (1 - e^{-g t})^power
        total = t_end
        for k in range(1, power + 1):
            total += math.comb(power, k) * (-1) ** k * (-math.expm1(-k * g * t_end)) / (k * g)
        return self.omega**power * total


@dataclass(frozen=True)
class EnergyLadder:
    energies: np.ndarray
    offset: float
    nu: float

    def __post_init__(self):
        self.energies.setflags(write=False)


@dataclass(frozen=True, order=True)
class ResonantPair:
    lower: int
    upper: int
    transferred: int = field(init=False)

    def __post_init__(self):
        if not 0 <= self.lower < self.upper:
            raise ValueError(f"invalid pair ({self.lower}, {self.upper})")
        object.__setattr__(self, "transferred", self.upper - self.lower)

    def partner(self, n: int) -> int:
        if n == self.lower:
            return self.upper
        if n == self.upper:
            return self.lower
        raise ValueError(f"state {n} is not part of pair ({self.lower}, {self.upper})")


def _check_state(params: SystemParams, n: int, top: Optional[int] = None) -> int:
    top = params.n_atoms if top is None else top
    if int(n) != n or not 0 <= n <= top:
        raise ValueError(f"state index n={n} outside [0, {top}]")
    return int(n)


def resonance_parameter(params: SystemParams) -> float:
    """nu = (N - beta/U) / 2, the vertex of the energy parabola."""
    return (params.n_atoms - params.asymmetry / params.interaction) / 2


def energy(params: SystemParams, n: int) -> float:
    """Fock-state energy U (n - nu)^2 + E0."""
    n = _check_state(params, n)
    return params.interaction * (n - params.nu) ** 2 + params.offset


def energy_ladder(params: SystemParams) -> EnergyLadder:
    n = np.arange(params.n_atoms + 1)
    energies = params.interaction * (n - params.nu) ** 2 + params.offset
    return EnergyLadder(energies=energies, offset=params.offset, nu=params.nu)


def resonant_pairs(params: SystemParams, tol: float = DEGENERACY_TOL) -> list[ResonantPair]:
    """All degenerate pairs (n, m), n < m, found by scanning the ladder."""
    e = energy_ladder(params).energies
    scale = tol * params.interaction
    pairs = []
    for n in range(len(e)):
        for m in range(n + 1, len(e)):
            if abs(e[n] - e[m]) <= scale:
                pairs.append(ResonantPair(n, m))
    return pairs


def unpaired_state(params: SystemParams, tol: float = DEGENERACY_TOL) -> Optional[int]:
    """The non-degenerate vertex state n = nu, when nu is an integer in range."""
    nu = params.nu
    k = round(nu)
    if abs(nu - k) <= tol and 0 <= k <= params.n_atoms:
        return int(k)
    return None


def coupling(params: SystemParams, n: int, omega_now: float) -> float:
    """Matrix element between |n> and |n+1>: Omega sqrt((n+1)(N-n))."""
    n = _check_state(params, n, params.n_atoms - 1)
    return omega_now * math.sqrt((n + 1) * (params.n_atoms - n))


def coupling_profile(params: SystemParams) -> np.ndarray:
    """sqrt((n+1)(N-n)) for n = 0..N-1, i.e. the couplings per unit Omega."""
    n = np.arange(params.n_atoms)
    return np.sqrt((n + 1.0) * (params.n_atoms - n))


def hamiltonian_matrix(params: SystemParams, omega_now: float) -> np.ndarray:
    """Real symmetric tridiagonal (N+1)x(N+1) Hamiltonian in the Fock basis."""
    e = energy_ladder(params).energies
    off = omega_now * coupling_profile(params)
    h = np.diag(e)
    idx = np.arange(params.n_atoms)
    h[idx, idx + 1] = off
    h[idx + 1, idx] = off
    return h
