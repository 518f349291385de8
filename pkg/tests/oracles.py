"""Closed-form reference solutions used by several test modules."""
import numpy as np

from dipolemedium.green import SPHERICAL_BASIS


def two_atom_amplitudes(r1, r2, detuning, polarization=1):
    """Zeeman amplitudes of two driven atoms from their symmetric and
    antisymmetric eigenmodes.

    With G = t (I - rr) + l rr the pair system decouples into
    (d - G) s = e1 + e2 and (d + G) a = e1 - e2, where d = delta + i/2, and
    each 3x3 system is inverted in the transverse/longitudinal projectors.
    """
    r1 = np.asarray(r1, float)
    r2 = np.asarray(r2, float)
    r = r1 - r2
    x = np.linalg.norm(r)
    rhat = r / x
    e = np.exp(1j * x) / x**3
    t = 0.75 * e * (1 - 1j * x - x * x)
    l = t - 0.75 * e * (3 - 3j * x - x * x)
    d = detuning + 0.5j
    proj_l = np.outer(rhat, rhat)
    proj_t = np.eye(3) - proj_l
    pol = SPHERICAL_BASIS[:, polarization + 1]
    e1 = np.exp(1j * r1[2]) * pol
    e2 = np.exp(1j * r2[2]) * pol
    sym = (proj_t / (d - t) + proj_l / (d - l)) @ (e1 + e2)
    anti = (proj_t / (d + t) + proj_l / (d + l)) @ (e1 - e2)
    b1 = (sym + anti) / 2
    b2 = (sym - anti) / 2
    to_z = SPHERICAL_BASIS.conj().T
    return np.concatenate([to_z @ b1, to_z @ b2])
