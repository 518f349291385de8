"""Extinction of a homogeneous sphere (Debye-Mie series) and of a discrete
atomic cloud (optical theorem).

References
----------
C. F. Bohren and D. R. Huffman, "Absorption and Scattering of Light by Small
Particles" (1983), ch. 4 and appendix A.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError
from .geometry import CloudRealization
from .solver import ExcitationAmplitudes

#: Relative change allowed when five more partial waves are added.
TAIL_TOL = 1e-8

#: Cross section of one resonant J=0 -> J=1 atom, in 1/k0^2.
RESONANT_CROSS_SECTION = 6 * np.pi

# sigma_ext = C * Im sum_a b_a e^{-i z_a}; C fixed by sigma(1 atom, delta=0) = 6 pi
_OPTICAL_THEOREM_CONSTANT = -3 * np.pi


@dataclass(frozen=True)
class MieInput:
    radius: float
    index: complex

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("sphere radius must be positive")
        if complex(self.index).imag < 0:
            raise ValueError(f"refractive index must have Im m >= 0, got {self.index}")

    @classmethod
    def from_permittivity(cls, radius: float, eps: complex) -> "MieInput":
        return cls(radius, complex(np.sqrt(complex(eps))))

    @property
    def size_parameter(self) -> float:
        return float(self.radius)


def n_terms(x: float) -> int:
    """Partial-wave cutoff ``ceil(x + 4 x^(1/3) + 2)``."""
    return int(np.ceil(x + 4 * x ** (1 / 3) + 2))


def _psi_downward(x: float, nmax: int) -> np.ndarray:
    """Riccati-Bessel psi_n(x) = x j_n(x), n = 0..nmax, by Miller's downward recurrence."""
    start = nmax + int(np.sqrt(40 * (nmax + 1))) + 20
    psi = np.zeros(start + 2)
    psi[start + 1] = 0.0
    psi[start] = 1e-30
    for n in range(start, 0, -1):
        psi[n - 1] = (2 * n + 1) / x * psi[n] - psi[n + 1]
        if abs(psi[n - 1]) > 1e250:
            psi[n - 1 :] *= 1e-250
    psi = psi[: nmax + 1]
    # normalize on whichever of psi_0 = sin x, psi_1 = sin x / x - cos x is larger
    p0, p1 = np.sin(x), np.sin(x) / x - np.cos(x)
    scale = p0 / psi[0] if abs(p0) > abs(p1) else p1 / psi[1]
    return psi * scale


def _chi_upward(x: float, nmax: int) -> np.ndarray:
    """chi_n(x) = -x y_n(x) by upward recurrence."""
    chi = np.empty(nmax + 1)
    chi[0] = np.cos(x)
    if nmax >= 1:
        chi[1] = np.cos(x) / x + np.sin(x)
    for n in range(1, nmax):
        chi[n + 1] = (2 * n + 1) / x * chi[n] - chi[n - 1]
    return chi


def _log_derivative(y: complex, nmax: int, nstart: int) -> np.ndarray:
    """D_n(y) = psi_n'(y)/psi_n(y) by downward recurrence from D_nstart = 0."""
    d = np.zeros(nstart + 1, dtype=complex)
    for n in range(nstart, 0, -1):
        d[n - 1] = n / y - 1 / (d[n] + n / y)
    return d[: nmax + 1]


def mie_coefficients(x: float, m: complex, nmax: int) -> tuple[np.ndarray, np.ndarray]:
    """External coefficients a_n, b_n for n = 1..nmax."""
    m = complex(m)
    y = m * x
    nstart = int(max(nmax, abs(y))) + 16
    d = _log_derivative(y, nmax, nstart)
    psi = _psi_downward(x, nmax)
    chi = _chi_upward(x, nmax)
    xi = psi - 1j * chi
    n = np.arange(1, nmax + 1)
    da = d[1:] / m + n / x
    db = m * d[1:] + n / x
    a = (da * psi[1:] - psi[:-1]) / (da * xi[1:] - xi[:-1])
    b = (db * psi[1:] - psi[:-1]) / (db * xi[1:] - xi[:-1])
    return a, b


def _series(x, m, nmax):
    a, b = mie_coefficients(x, m, nmax)
    n = np.arange(1, nmax + 1)
    return 2 * np.pi * np.sum((2 * n + 1) * (a + b).real)


def mie_extinction(inp: MieInput, tail_tol: float = TAIL_TOL) -> float:
    """Extinction cross section of a homogeneous sphere, in 1/k0^2 units.

    Raises
    ------
    ConvergenceError
        If adding five more partial waves changes the result by more than
        ``tail_tol`` (relative).
    """
    x = inp.size_parameter
    m = complex(inp.index)
    if m == 1:
        return 0.0
    nmax = n_terms(x)
    s = _series(x, m, nmax)
    s5 = _series(x, m, nmax + 5)
    # below ~1e-12 of the geometric cross section the sum is roundoff
    floor = 1e-12 * np.pi * x * x
    if abs(s5 - s) > tail_tol * max(abs(s5), floor):
        raise ConvergenceError(f"Mie series not converged at x={x}, m={m}: {s} vs {s5}")
    return float(s)


def rayleigh_extinction(radius: float, index: complex) -> float:
    """Small-sphere limit ``(8/3) pi R^6 |(m^2-1)/(m^2+2)|^2`` (scattering only)."""
    m2 = complex(index) ** 2
    return float(8 / 3 * np.pi * radius**6 * abs((m2 - 1) / (m2 + 2)) ** 2)


def microscopic_cross_section(
    realization: CloudRealization,
    amplitudes: ExcitationAmplitudes,
    detuning: float | None = None,
    polarization: int = 1,
) -> float:
    """Extinction cross section of a cloud from its forward-scattered amplitude.

    ``sigma = -3 pi Im sum_a b(a, m_s) exp(-i z_a)`` for a unit plane-wave
    drive; the constant makes one atom on resonance give exactly 6 pi.
    """
    amplitudes.require_polarization(polarization)
    if detuning is not None and amplitudes.detuning is not None and amplitudes.detuning != detuning:
        raise ValueError(f"amplitudes solved at delta={amplitudes.detuning}, not {detuning}")
    if amplitudes.n_atoms != realization.n_atoms:
        raise ValueError("amplitudes do not belong to this realization")
    b = amplitudes.component(polarization)
    forward = np.sum(b * np.exp(-1j * realization.positions[:, 2]))
    return float(_OPTICAL_THEOREM_CONSTANT * forward.imag)
