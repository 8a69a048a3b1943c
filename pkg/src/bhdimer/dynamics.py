"""Time propagation of the Fock amplitudes b_n(t) under i db/dt = H(t) b.

Two propagators share the same trace type:

* :func:`propagate` -- classical fixed-step RK4, any coupling schedule.
* :func:`propagate_spectral` -- exact eigen-decomposition propagator for a
  constant coupling, used as an independent cross-check and for runs far too
  long for a fixed-step integrator.

Both work with the Hamiltonian shifted by the midpoint of its diagonal.  The
shift only multiplies every amplitude by a common phase, so probabilities are
unchanged while the integrator sees the smallest possible spectral radius.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .exact import dense_eigensolve
from .model import CouplingSchedule, SystemParams, coupling_profile, energy_ladder

#: Largest accepted dt * (spectral bound of H).
STABILITY_LIMIT = 0.05
#: Default dt * max(U, spectral bound); keeps RK4 norm drift ~1e-14 per step.
DEFAULT_STEP_FACTOR = 0.01
MAX_DEFAULT_SAMPLES = 100_000


@dataclass(frozen=True)
class StateVector:
    amplitudes: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=complex)
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def fock(cls, params: SystemParams, n: int, time: float = 0.0) -> "StateVector":
        if int(n) != n or not 0 <= n <= params.n_atoms:
            raise ValueError(f"initial state n={n} outside [0, {params.n_atoms}]")
        b = np.zeros(params.n_atoms + 1, dtype=complex)
        b[int(n)] = 1.0
        return cls(b, time)

    @property
    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    @property
    def norm_error(self) -> float:
        return abs(1.0 - float(np.sum(self.probabilities)))


@dataclass(frozen=True)
class ProbabilityTrace:
    """Sampled p(n, t); ``probabilities[k, n]`` is p(n) at ``times[k]``."""

    times: np.ndarray
    probabilities: np.ndarray
    norm_error: np.ndarray
    params: SystemParams
    final_state: Optional[StateVector] = field(default=None, compare=False)

    def __post_init__(self):
        for name in ("times", "probabilities", "norm_error"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.probabilities.shape != (len(self.times), self.params.n_atoms + 1):
            raise ValueError("probabilities must have shape (n_samples, N+1)")
        if len(self.times) > 1 and not np.all(np.diff(self.times) > 0):
            raise ValueError("trace times must be strictly increasing")

    def __len__(self):
        return len(self.times)

    def p(self, n: int) -> np.ndarray:
        return self.probabilities[:, n]

    @property
    def max_norm_error(self) -> float:
        return float(np.max(self.norm_error)) if len(self.norm_error) else 0.0


def energy_shift(params: SystemParams) -> float:
    """Constant removed from the diagonal; amplitudes gain a phase exp(i shift t)."""
    e = energy_ladder(params).energies
    return float((e.max() + e.min()) / 2)


def _shifted_diagonal(params: SystemParams) -> np.ndarray:
    return energy_ladder(params).energies - energy_shift(params)


def spectral_bound(params: SystemParams, omega_max: float) -> float:
    """Upper bound on ||H|| for the diagonal-shifted Hamiltonian."""
    d = _shifted_diagonal(params)
    prof = coupling_profile(params)
    return float(np.max(np.abs(d)) + 2 * omega_max * (prof.max() if len(prof) else 0.0))


def default_dt(params: SystemParams, schedule: CouplingSchedule) -> float:
    bound = spectral_bound(params, schedule.omega)
    return DEFAULT_STEP_FACTOR / max(params.interaction, bound)


def check_step(params: SystemParams, schedule: CouplingSchedule, dt: float) -> None:
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    bound = spectral_bound(params, schedule.omega)
    if dt * bound > STABILITY_LIMIT:
        raise ValueError(
            f"dt={dt:g} is too large: dt * ||H|| = {dt * bound:.3g} exceeds {STABILITY_LIMIT}; "
            f"use dt <= {STABILITY_LIMIT / bound:.4g} (default would be {default_dt(params, schedule):.4g})"
        )


def _rk4_polynomial(generator: np.ndarray, h: float) -> np.ndarray:
    """One RK4 step for a constant linear system: sum_k (h A)^k / k!, k <= 4."""
    z = h * generator
    step = np.eye(len(z), dtype=complex)
    term = np.eye(len(z), dtype=complex)
    for k in range(1, 5):
        term = term @ z / k
        step = step + term
    return step


def _integrate(params, schedule, b0, t0, h, nsteps, stride):
    """Fixed-step RK4 from t0 with (signed) step h.

    Returns sample times, probabilities, norm errors (every ``stride`` steps,
    including step 0) and the final amplitude vector.
    """
    d = _shifted_diagonal(params).astype(complex)
    off = schedule.omega * coupling_profile(params)
    b = np.array(b0, dtype=complex)
    nsamples = nsteps // stride + 1
    times = t0 + h * stride * np.arange(nsamples)
    probs = np.empty((nsamples, len(b)))
    probs[0] = np.abs(b) ** 2

    if schedule.is_constant:
        gen = -1j * (np.diag(d) + np.diag(off, 1) + np.diag(off, -1))
        step = _rk4_polynomial(gen, h)
        for k in range(1, nsteps + 1):
            b = step @ b
            if k % stride == 0:
                probs[k // stride] = np.abs(b) ** 2
    else:
        grid = t0 + h * np.arange(nsteps + 1)
        r_node = schedule.ratio(grid)
        r_mid = schedule.ratio(grid[:-1] + h / 2)
        half = h / 2
        sixth = h / 6

        def rhs(x, r):
            hx = d * x
            hx[:-1] += r * off * x[1:]
            hx[1:] += r * off * x[:-1]
            return -1j * hx

        for k in range(nsteps):
            rm = r_mid[k]
            k1 = rhs(b, r_node[k])
            k2 = rhs(b + half * k1, rm)
            k3 = rhs(b + half * k2, rm)
            k4 = rhs(b + h * k3, r_node[k + 1])
            b = b + sixth * (k1 + 2 * k2 + 2 * k3 + k4)
            if (k + 1) % stride == 0:
                probs[(k + 1) // stride] = np.abs(b) ** 2

    norm_err = np.abs(1.0 - probs.sum(axis=1))
    return times, probs, norm_err, b


def _steps_for(duration: float, dt: float) -> tuple[int, float]:
    nsteps = max(1, math.ceil(duration / dt - 1e-9))
    return nsteps, duration / nsteps


def propagate(
    params: SystemParams,
    schedule: CouplingSchedule,
    initial_n: int,
    t_end: float,
    dt: Optional[float] = None,
    sample_stride: Optional[int] = None,
) -> ProbabilityTrace:
    """RK4 propagation from the Fock state ``initial_n`` up to ``t_end``.

    The step is ``dt`` rounded down so that an integer number of steps lands
    exactly on ``t_end``.  No renormalisation is ever applied; the norm drift
    is returned in ``trace.norm_error``.
    """
    state = StateVector.fock(params, initial_n)
    if not t_end > 0:
        raise ValueError(f"t_end must be > 0, got {t_end}")
    dt = default_dt(params, schedule) if dt is None else float(dt)
    check_step(params, schedule, dt)
    nsteps, h = _steps_for(t_end, dt)
    if sample_stride is None:
        sample_stride = max(1, math.ceil(nsteps / MAX_DEFAULT_SAMPLES))
    if int(sample_stride) != sample_stride or sample_stride < 1:
        raise ValueError(f"sample_stride must be a positive integer, got {sample_stride}")
    times, probs, norm_err, b = _integrate(
        params, schedule, state.amplitudes, 0.0, h, nsteps, int(sample_stride)
    )
    return ProbabilityTrace(times, probs, norm_err, params, StateVector(b, nsteps * h))


def evolve(
    params: SystemParams,
    schedule: CouplingSchedule,
    state: StateVector,
    duration: float,
    dt: Optional[float] = None,
    reverse: bool = False,
) -> StateVector:
    """Advance ``state`` by ``duration`` (backwards in time when ``reverse``)."""
    dt = default_dt(params, schedule) if dt is None else float(dt)
    check_step(params, schedule, dt)
    nsteps, h = _steps_for(duration, dt)
    h = -h if reverse else h
    *_, b = _integrate(params, schedule, state.amplitudes, state.time, h, nsteps, nsteps)
    return StateVector(b, state.time + nsteps * h)


def spectral_amplitudes(params: SystemParams, omega: float, b0, times) -> np.ndarray:
    """b(t) = sum_k v_k exp(-i lambda_k t) (v_k . b0) for constant Omega.

    Amplitudes are returned in the frame of the diagonal-shifted Hamiltonian
    (a common phase relative to the Schrodinger frame).
    """
    d = _shifted_diagonal(params)
    off = omega * coupling_profile(params)
    h = np.diag(d) + np.diag(off, 1) + np.diag(off, -1)
    evals, evecs = dense_eigensolve(h)
    coeffs = evecs.T @ np.asarray(b0, dtype=complex)
    phases = np.exp(-1j * np.outer(np.asarray(times, dtype=float), evals))
    return (phases * coeffs) @ evecs.T


def propagate_spectral(
    params: SystemParams,
    omega_const: float,
    initial_n: int,
    t_end: float,
    n_samples: int = 2001,
) -> ProbabilityTrace:
    """Exact propagation for constant Omega sampled at ``n_samples`` uniform times."""
    state = StateVector.fock(params, initial_n)
    if not t_end > 0:
        raise ValueError(f"t_end must be > 0, got {t_end}")
    if n_samples < 2:
        raise ValueError("n_samples must be >= 2")
    times = np.linspace(0.0, t_end, int(n_samples))
    amps = spectral_amplitudes(params, omega_const, state.amplitudes, times)
    probs = np.abs(amps) ** 2
    norm_err = np.abs(1.0 - probs.sum(axis=1))
    return ProbabilityTrace(times, probs, norm_err, params, StateVector(amps[-1], t_end))


def mean_population_difference(trace: ProbabilityTrace) -> np.ndarray:
    """<dn(t)> = sum_n (2n - N) p(n, t): right-well minus left-well occupation."""
    n = np.arange(trace.params.n_atoms + 1)
    return trace.probabilities @ (2 * n - trace.params.n_atoms)
