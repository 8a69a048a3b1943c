"""Exact references: closed-form N=2 / N=3 amplitudes and a Jacobi eigensolver.

The closed forms are written in the rotating frame used by the analytic
derivation (the Hamiltonian minus E(0) times the identity) and converted back
to the Schrodinger frame of :func:`bhdimer.model.hamiltonian_matrix`, so that
they can be compared amplitude by amplitude with the numerical propagators.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericalError
from .model import ResonantPair, SystemParams, hamiltonian_matrix

JACOBI_TOL = 1e-14
MAX_SWEEPS = 100


def dense_eigensolve(matrix, tol: float = JACOBI_TOL, max_sweeps: int = MAX_SWEEPS):
    """Cyclic Jacobi diagonalisation of a real symmetric matrix.

    Returns ``(eigenvalues, eigenvectors)`` with eigenvalues ascending and
    eigenvectors as orthonormal columns.  Iterates until the off-diagonal
    Frobenius norm drops below ``tol * ||matrix||_F``.
    """
    a = np.array(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if not np.array_equal(a, a.T):
        raise ValueError("matrix is not symmetric")
    n = a.shape[0]
    v = np.eye(n)
    peak = float(np.max(np.abs(a))) if a.size else 0.0
    if peak == 0.0 or n == 1:
        return np.diag(a).copy(), v
    a /= peak  # keeps ||a|| representable for tiny or huge entries
    scale = np.linalg.norm(a)

    upper = np.triu_indices(n, 1)

    def off_norm():
        return math.sqrt(2.0) * float(np.linalg.norm(a[upper]))

    for _ in range(max_sweeps):
        if off_norm() <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 0.5 / theta  # theta^2 would overflow
                else:
                    t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                col_p = a[:, p].copy()
                col_q = a[:, q]
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q
                row_p = a[p, :].copy()
                row_q = a[q, :]
                a[p, :] = c * row_p - s * row_q
                a[q, :] = s * row_p + c * row_q
                a[p, q] = a[q, p] = 0.0
                vp = v[:, p].copy()
                vq = v[:, q]
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    else:
        if off_norm() > tol * scale:
            raise NumericalError(f"Jacobi iteration did not converge in {max_sweeps} sweeps")

    order = np.argsort(np.diag(a), kind="stable")
    return np.diag(a)[order] * peak, v[:, order].copy()


def _as_times(t):
    return np.asarray(t, dtype=float)


@dataclass(frozen=True)
class TwoAtomSolution:
    """Closed-form dynamics of N=2 bosons in a symmetric well."""

    omega: float
    interaction: float

    @property
    def root(self) -> float:
        u = self.interaction
        return math.sqrt(u * u / 4 + 4 * self.omega**2)

    @property
    def eigenfrequencies(self) -> tuple[float, float]:
        u = self.interaction
        return u / 2 + self.root, u / 2 - self.root

    @property
    def kappa(self) -> float:
        return math.sqrt(1 + 16 * self.omega**2 / self.interaction**2)

    def amplitudes(self, t, initial: int = 0) -> np.ndarray:
        t = _as_times(t)
        om, u = self.omega, self.interaction
        e1, e2 = self.eigenfrequencies
        x1, x2 = np.exp(1j * e1 * t), np.exp(1j * e2 * t)
        if initial == 0:
            b1 = -math.sqrt(2) * om / (e1 - e2) * (x1 - x2)
            b2 = 2 * om**2 / (e1 - e2) * (x1 / e1 - x2 / e2) + 2 * om**2 / (e1 * e2)
            b0 = 1 + b2
        elif initial == 1:
            c1 = (u - e2) / (e1 - e2)
            c2 = (e1 - u) / (e1 - e2)
            b1 = c1 * x1 + c2 * x2
            # b0 = b2 = -i sqrt(2) omega * integral of b1 from 0 to t
            integral = c1 * (x1 - 1) / (1j * e1) + c2 * (x2 - 1) / (1j * e2)
            b0 = b2 = -1j * math.sqrt(2) * om * integral
        else:
            raise ValueError(f"initial must be 0 or 1 for N=2, got {initial}")
        return np.stack(np.broadcast_arrays(b0, b1, b2), axis=-1) * np.exp(-1j * u * t)[..., None]


@dataclass(frozen=True)
class ThreeAtomSolution:
    """Closed-form dynamics of N=3 bosons in a symmetric well.

    The even/odd combinations b1 +- b2 decouple; each obeys a second-order
    equation with shifted coupling U+- = +-Omega - U.
    """

    omega: float
    interaction: float

    @property
    def shifted_couplings(self) -> tuple[float, float]:
        return self.omega - self.interaction, -self.omega - self.interaction

    def branch(self, shifted: float) -> tuple[float, float]:
        # roots of eps^2 + 2 U' eps - 3 Omega^2 = 0
        r = math.sqrt(shifted * shifted + 3 * self.omega**2)
        return -shifted + r, -shifted - r

    @property
    def eigenfrequencies(self) -> dict[str, tuple[float, float]]:
        up, um = self.shifted_couplings
        return {"+": self.branch(up), "-": self.branch(um)}

    def amplitudes(self, t, initial: int = 0) -> np.ndarray:
        t = _as_times(t)
        om, u = self.omega, self.interaction
        up, um = self.shifted_couplings
        (p1, p2), (m1, m2) = self.branch(up), self.branch(um)
        xp1, xp2 = np.exp(1j * p1 * t), np.exp(1j * p2 * t)
        xm1, xm2 = np.exp(1j * m1 * t), np.exp(1j * m2 * t)
        dp, dm = p1 - p2, m1 - m2
        if initial == 0:
            outer_p = xp1 / (p1 * dp) - xp2 / (p2 * dp)
            outer_m = xm1 / (m1 * dm) - xm2 / (m2 * dm)
            inner_p = (xp1 - xp2) / dp
            inner_m = (xm1 - xm2) / dm
            b0 = -1.5 * om**2 * (outer_p + outer_m)
            b3 = -1.5 * om**2 * (outer_p - outer_m)
            b1 = -math.sqrt(3) / 2 * om * (inner_p + inner_m)
            b2 = -math.sqrt(3) / 2 * om * (inner_p - inner_m)
        elif initial == 1:
            inner_p = (-(p2 + 2 * up) * xp1 + (p1 + 2 * up) * xp2) / dp
            inner_m = (-(m2 + 2 * um) * xm1 + (m1 + 2 * um) * xm2) / dm
            outer_p = (-(p2 + 2 * up) / p1 * xp1 + (p1 + 2 * up) / p2 * xp2) / dp
            outer_m = (-(m2 + 2 * um) / m1 * xm1 + (m1 + 2 * um) / m2 * xm2) / dm
            b0 = -math.sqrt(3) * om / 2 * (outer_p + outer_m)
            b3 = -math.sqrt(3) * om / 2 * (outer_p - outer_m)
            b1 = -0.5 * (inner_p + inner_m)
            b2 = -0.5 * (inner_p - inner_m)
        else:
            raise ValueError(f"initial must be 0 or 1 for N=3, got {initial}")
        # The printed solution uses the opposite sign for the basis states
        # |1>, |2> (equivalently -sqrt(3) Omega on the outer links) and an
        # overall sign fixed by b(0) = delta.  Both are undone here;
        # probabilities do not depend on either convention.
        gauge = np.array([1.0, -1.0, -1.0, 1.0]) * (1.0 if initial == 0 else -1.0)
        frame = -np.exp(-3j * u * t)
        return np.stack(np.broadcast_arrays(b0, b1, b2, b3), axis=-1) * frame[..., None] * gauge


def two_atom_amplitudes(omega: float, interaction: float, initial: int, t) -> np.ndarray:
    """(b0, b1, b2) at time(s) t for N=2, beta=0, constant Omega."""
    return TwoAtomSolution(omega, interaction).amplitudes(t, initial)


def three_atom_amplitudes(omega: float, interaction: float, initial: int, t) -> np.ndarray:
    """(b0, b1, b2, b3) at time(s) t for N=3, beta=0, constant Omega."""
    return ThreeAtomSolution(omega, interaction).amplitudes(t, initial)


def closed_form_amplitudes(params: SystemParams, omega: float, initial: int, t) -> np.ndarray:
    """Dispatch to the N=2 or N=3 closed form; symmetric well only."""
    if params.asymmetry != 0:
        raise ValueError("closed forms exist only for a symmetric well (beta = 0)")
    if params.n_atoms == 2:
        return two_atom_amplitudes(omega, params.interaction, initial, t)
    if params.n_atoms == 3:
        return three_atom_amplitudes(omega, params.interaction, initial, t)
    raise ValueError(f"no closed form for N={params.n_atoms}")


def level_splitting(params: SystemParams, omega: float, pair: ResonantPair) -> float:
    """Half the gap between the eigenstates closest to (|n> +- |m>)/sqrt(2).

    The Hamiltonian is shifted by E(n) before diagonalisation so the tiny
    splitting of high-order pairs is resolved against O(U) eigenvalues.
    """
    if pair.upper > params.n_atoms:
        raise ValueError(f"pair {pair} outside the ladder of N={params.n_atoms}")
    if omega == 0:
        return 0.0  # exact degeneracy; any basis of the pair is an eigenbasis
    h = hamiltonian_matrix(params, omega)
    h -= h[pair.lower, pair.lower] * np.eye(h.shape[0])
    evals, evecs = dense_eigensolve(h)
    plus = (evecs[pair.lower] + evecs[pair.upper]) ** 2 / 2
    minus = (evecs[pair.lower] - evecs[pair.upper]) ** 2 / 2
    i, j = int(np.argmax(plus)), int(np.argmax(minus))
    if i == j or plus[i] < 0.5 or minus[j] < 0.5:
        raise NumericalError(
            f"no eigenvector pair overlaps (|{pair.lower}> +- |{pair.upper}>)/sqrt2 by >= 50% "
            f"(best overlaps {plus[i]:.3f}, {minus[j]:.3f})"
        )
    return abs(evals[i] - evals[j]) / 2
