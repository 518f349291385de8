"""Resonant dipole-dipole coupling between J=0 -> J=1 atoms.

Units: lengths in 1/k0, energies in the natural linewidth gamma. The reduced
dipole strength d^2/hbar = (3/4) gamma k0^3 is what makes the imaginary part
of the kernel tend to the single-atom value -gamma/2 as r -> 0.
"""
from __future__ import annotations

import numpy as np

from .errors import ZeroSeparationError

#: Coupling prefactor d^2 / (hbar) in gamma * k0^3 units.
DIPOLE_PREFACTOR = 0.75

#: Zeeman projections in the order used for every 3-component block.
ZEEMAN_ORDER = (-1, 0, 1)

#: Columns are the spherical unit vectors e_{-1}, e_0, e_{+1} in Cartesian
#: components (Condon-Shortley phases).
SPHERICAL_BASIS = np.array(
    [
        [1 / np.sqrt(2), 0, -1 / np.sqrt(2)],
        [-1j / np.sqrt(2), 0, -1j / np.sqrt(2)],
        [0, 1, 0],
    ],
    dtype=complex,
)


def zeeman_index(m: int) -> int:
    """Position of projection ``m`` inside a 3-component block."""
    if m not in ZEEMAN_ORDER:
        raise ValueError(f"Zeeman projection must be -1, 0 or 1, got {m}")
    return m + 1


def spherical_vector(m: int) -> np.ndarray:
    return SPHERICAL_BASIS[:, zeeman_index(m)]


def _radial_factors(x):
    """Transverse and longitudinal radial functions of the kernel."""
    phase = DIPOLE_PREFACTOR * np.exp(1j * x) / x**3
    x2 = x * x
    transverse = phase * (1 - 1j * x - x2)
    dyad = phase * (3 - 3j * x - x2)
    return transverse, dyad


def dyadic_kernel(r_vec) -> np.ndarray:
    """Cartesian 3x3 coupling tensor for separation ``r_vec`` (units of gamma).

    ``G = (3/4) e^{ix}/x^3 [ I (1 - ix - x^2) - r r (3 - 3ix - x^2) ]`` with
    ``x = |r_vec|`` and ``r`` the unit separation vector.
    """
    r_vec = np.asarray(r_vec, dtype=float)
    x = float(np.linalg.norm(r_vec))
    if x == 0:
        raise ZeroSeparationError("dyadic kernel is undefined at zero separation")
    rhat = r_vec / x
    transverse, dyad = _radial_factors(x)
    return transverse * np.eye(3) - dyad * np.outer(rhat, rhat)


def zeeman_block(r_vec) -> np.ndarray:
    """Coupling block ``B[m, m'] = e_m^* . G . e_m'`` in the Zeeman basis."""
    g = dyadic_kernel(r_vec)
    return SPHERICAL_BASIS.conj().T @ g @ SPHERICAL_BASIS


def self_energy() -> complex:
    """Diagonal self-energy of one excited sublevel; Lamb shift absorbed."""
    return -0.5j


def coupling_matrix(positions: np.ndarray, chunk: int = 256) -> np.ndarray:
    """Dense 3N x 3N Cartesian kernel for all distinct pairs.

    Atom-diagonal 3x3 blocks are left at zero. Rows are assembled in chunks of
    ``chunk`` atoms to bound temporary memory.
    """
    positions = np.asarray(positions, dtype=float)
    n = positions.shape[0]
    out = np.zeros((n, 3, n, 3), dtype=complex)
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        r = positions[start:stop, None, :] - positions[None, :, :]
        x = np.sqrt(np.einsum("abk,abk->ab", r, r))
        own = np.arange(start, stop)
        x[own - start, own] = np.inf
        if np.any(x == 0):
            a, b = np.argwhere(x == 0)[0]
            raise ZeroSeparationError(f"atoms {start + a} and {b} coincide")
        with np.errstate(invalid="ignore", divide="ignore"):
            transverse, dyad = _radial_factors(x)
            rhat = r / x[..., None]
        transverse[own - start, own] = 0
        dyad[own - start, own] = 0
        rhat[own - start, own] = 0
        block = -dyad[:, :, None, None] * rhat[:, :, :, None] * rhat[:, :, None, :]
        idx = np.arange(3)
        block[:, :, idx, idx] += transverse[:, :, None]
        # block is (a, b, mu, nu); store as (a, mu, b, nu)
        out[start:stop] = block.transpose(0, 2, 1, 3)
    return out.reshape(3 * n, 3 * n)


def to_zeeman_basis(matrix: np.ndarray) -> np.ndarray:
    """Change every 3x3 block of a 3N x 3N Cartesian matrix to the Zeeman basis."""
    n3 = matrix.shape[0]
    n = n3 // 3
    u = SPHERICAL_BASIS
    right = (matrix.reshape(n3 * n, 3) @ u).reshape(n, 3, n3)
    return np.matmul(u.conj().T, right).reshape(n3, n3)
