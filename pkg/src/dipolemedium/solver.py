"""Steady-state coupled-dipole equations for one atomic configuration.

For drive detuning ``delta = omega_s - omega_a`` the amplitudes ``b`` of the
singly excited states solve

    [(delta + i/2) I - G] b = e^{i z_a} e_{m_s}

where ``G`` holds the inter-atomic kernel blocks and the right-hand side is a
unit plane wave travelling along +z with circular polarization ``m_s``.
Since ``delta`` enters only on the diagonal, :class:`ShiftedSolver` reduces the
detuning-free matrix to Hessenberg form once and then solves each detuning in
O(N^2).
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
from scipy.linalg import lapack

from . import green
from .errors import PolarizationMismatchError, SingularSystemError
from .geometry import CloudRealization

log = logging.getLogger(__name__)

#: Relative residual every returned solution must satisfy.
RESIDUAL_TOL = 1e-8


@dataclass(frozen=True)
class DriveField:
    detuning: float
    polarization: int = 1

    def __post_init__(self):
        green.zeeman_index(self.polarization)


@dataclass(frozen=True)
class ExcitationAmplitudes:
    """Zeeman-basis amplitudes, ordered (atom, m) with m in (-1, 0, +1)."""

    b: np.ndarray
    detuning: float | None = None
    polarization: int | None = None
    residual: float = 0.0

    def __post_init__(self):
        b = np.asarray(self.b, dtype=complex)
        if b.ndim != 1 or b.size % 3:
            raise ValueError("amplitude vector length must be a multiple of 3")
        if not np.all(np.isfinite(b)):
            raise SingularSystemError("non-finite amplitudes")
        b.setflags(write=False)
        object.__setattr__(self, "b", b)

    @property
    def n_atoms(self) -> int:
        return self.b.size // 3

    def by_atom(self) -> np.ndarray:
        return self.b.reshape(-1, 3)

    def component(self, m: int) -> np.ndarray:
        return self.by_atom()[:, green.zeeman_index(m)]

    def require_polarization(self, m: int) -> None:
        if self.polarization is not None and self.polarization != m:
            raise PolarizationMismatchError(
                f"amplitudes solved for m_s={self.polarization}, requested {m}"
            )


def drive_vector(positions: np.ndarray, polarization: int = 1, basis: str = "zeeman") -> np.ndarray:
    """Unit plane wave ``e^{i z} e_{m_s}`` sampled at every atom."""
    positions = np.asarray(positions, dtype=float).reshape(-1, 3)
    phase = np.exp(1j * positions[:, 2])
    if basis == "zeeman":
        pol = np.zeros(3, dtype=complex)
        pol[green.zeeman_index(polarization)] = 1
    elif basis == "cartesian":
        pol = green.spherical_vector(polarization)
    else:
        raise ValueError(f"unknown basis {basis!r}")
    return (phase[:, None] * pol[None, :]).ravel()


def assemble_system(
    realization: CloudRealization,
    detuning: float,
    polarization: int = 1,
    basis: str = "zeeman",
) -> tuple[np.ndarray, np.ndarray]:
    """Build the 3N x 3N matrix and drive vector for one detuning.

    ``basis="cartesian"`` returns the (complex symmetric) Cartesian form; the
    default is the Zeeman basis.
    """
    positions = realization.positions
    if positions.shape[0] < 1:
        raise ValueError("need at least one atom")
    if basis not in ("zeeman", "cartesian"):
        raise ValueError(f"unknown basis {basis!r}")
    a = -green.coupling_matrix(positions)
    if basis == "zeeman":
        a = green.to_zeeman_basis(a)
    # the diagonal is a multiple of the identity, so it is added after any basis change
    a[np.diag_indices_from(a)] += detuning - green.self_energy()
    return a, drive_vector(positions, polarization, basis)


def relative_residual(a: np.ndarray, x: np.ndarray, rhs: np.ndarray) -> float:
    norm = np.linalg.norm(rhs)
    return float(np.linalg.norm(a @ x - rhs) / (norm if norm else 1.0))


def solve_amplitudes(
    a: np.ndarray,
    rhs: np.ndarray,
    *,
    detuning: float | None = None,
    polarization: int | None = None,
    tol: float = RESIDUAL_TOL,
) -> ExcitationAmplitudes:
    """Dense LU solve of a Zeeman-basis system with a residual check."""
    a = np.asarray(a)
    rhs = np.asarray(rhs)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] != rhs.shape[0]:
        raise ValueError(f"incompatible shapes {a.shape} and {rhs.shape}")
    try:
        with np.errstate(all="ignore"), warnings.catch_warnings():
            warnings.simplefilter("ignore", sla.LinAlgWarning)
            x = sla.solve(a, rhs, check_finite=False)
            res = relative_residual(a, x, rhs)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SingularSystemError(str(exc)) from exc
    if not np.isfinite(res) or res > tol:
        raise SingularSystemError(f"relative residual {res:.3e} exceeds {tol:.0e}")
    return ExcitationAmplitudes(x, detuning, polarization, res)


def _cartesian_to_zeeman(x: np.ndarray) -> np.ndarray:
    return (x.reshape(-1, 3) @ green.SPHERICAL_BASIS.conj()).ravel()


class ShiftedSolver:
    """Solve ``(A0 + delta I) x = c`` for many detunings of one configuration.

    ``A0`` is reduced once to upper Hessenberg form ``A0 = Q H Q^H`` (LAPACK
    ``zgehrd``); each detuning then costs a Hessenberg elimination and two
    reflector sweeps. Solutions failing the residual test are recomputed with
    a dense LU of the full matrix.

    Parameters
    ----------
    realization : CloudRealization
    polarization : int
        Circular polarization ``m_s`` of the drive.
    """

    def __init__(self, realization: CloudRealization, polarization: int = 1, tol: float = RESIDUAL_TOL):
        self.realization = realization
        self.polarization = polarization
        self.tol = tol
        a0 = -green.coupling_matrix(realization.positions)
        a0[np.diag_indices_from(a0)] -= green.self_energy()
        self._a0 = a0
        self._rhs = drive_vector(realization.positions, polarization, "cartesian")
        self.n_fallbacks = 0
        n = a0.shape[0]
        if n <= 3:
            self._h = None
            return
        lwork = int(lapack.zgehrd_lwork(n)[0].real)
        h, tau, info = lapack.zgehrd(a0, lwork=max(lwork, 1), overwrite_a=False)
        if info != 0:
            raise SingularSystemError(f"zgehrd failed with info={info}")
        self._reflectors = np.tril(h, -2)
        self._tau = tau
        self._h = np.triu(h, -1)
        self._work = np.empty_like(self._h)
        self._qhc = self._apply_qh(self._rhs.copy())

    def _apply_qh(self, c: np.ndarray) -> np.ndarray:
        # Q = H_0 H_1 ... H_{n-2}, H_i = I - tau_i v_i v_i^H, v_i[i+1] = 1
        v_all = self._reflectors
        for i in range(len(self._tau)):
            t = self._tau[i]
            if t == 0:
                continue
            v = v_all[i + 1 :, i].copy()
            v[0] = 1
            c[i + 1 :] -= np.conj(t) * (np.vdot(v, c[i + 1 :])) * v
        return c

    def _apply_q(self, c: np.ndarray) -> np.ndarray:
        v_all = self._reflectors
        for i in range(len(self._tau) - 1, -1, -1):
            t = self._tau[i]
            if t == 0:
                continue
            v = v_all[i + 1 :, i].copy()
            v[0] = 1
            c[i + 1 :] -= t * (np.vdot(v, c[i + 1 :])) * v
        return c

    def _hessenberg_solve(self, detuning: float) -> np.ndarray:
        w = self._work
        np.copyto(w, self._h)
        n = w.shape[0]
        w[np.diag_indices(n)] += detuning
        y = self._qhc.copy()
        for k in range(n - 1):
            if abs(w[k + 1, k]) > abs(w[k, k]):
                tmp = w[k, k:].copy()
                w[k, k:] = w[k + 1, k:]
                w[k + 1, k:] = tmp
                y[k], y[k + 1] = y[k + 1], y[k]
            if w[k, k] == 0:
                raise SingularSystemError("zero pivot in Hessenberg elimination")
            factor = w[k + 1, k] / w[k, k]
            if factor != 0:
                w[k + 1, k + 1 :] -= factor * w[k, k + 1 :]
                y[k + 1] -= factor * y[k]
        if w[n - 1, n - 1] == 0:
            raise SingularSystemError("zero pivot in Hessenberg elimination")
        z = sla.solve_triangular(w, y, lower=False, check_finite=False)
        return self._apply_q(z)

    def residual(self, x: np.ndarray, detuning: float) -> float:
        r = self._a0 @ x + detuning * x - self._rhs
        return float(np.linalg.norm(r) / np.linalg.norm(self._rhs))

    def solve(self, detuning: float) -> ExcitationAmplitudes:
        x = None
        if self._h is not None:
            try:
                x = self._hessenberg_solve(detuning)
            except SingularSystemError:
                x = None
        res = self.residual(x, detuning) if x is not None else np.inf
        if not (res <= self.tol):
            self.n_fallbacks += 1
            log.debug("Hessenberg path residual %.2e at delta=%g; using LU", res, detuning)
            a = self._a0.copy()
            a[np.diag_indices_from(a)] += detuning
            try:
                x = sla.solve(a, self._rhs, check_finite=False, overwrite_a=True)
            except (np.linalg.LinAlgError, ValueError) as exc:
                raise SingularSystemError(str(exc)) from exc
            res = self.residual(x, detuning)
            if not (res <= self.tol):
                raise SingularSystemError(f"relative residual {res:.3e} exceeds {self.tol:.0e}")
        return ExcitationAmplitudes(_cartesian_to_zeeman(x), detuning, self.polarization, res)


def extinction_power(rhs: np.ndarray, amplitudes: ExcitationAmplitudes) -> float:
    """Work done by the drive, ``-Im sum(rhs^* b)``; non-negative for a passive cloud."""
    return float(-np.imag(np.vdot(rhs, amplitudes.b)))
