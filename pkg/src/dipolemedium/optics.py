"""Macroscopic optical constants derived from a fitted complex wavenumber.

Everything is in k0 = 1 units, so the refractive index equals the wavenumber
and the polarizability is in units of k0^-3. Errors are propagated to first
order from the independent standard errors of k' and k''; since every derived
quantity is a holomorphic function f(k), its real and imaginary parts share
the derivative f'(k).
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .dispersion import ComplexWavenumber
from .errors import PoleError


def free_atom_polarizability(detuning):
    """Polarizability of an isolated J=0 -> J=1 atom, ``-(3/4) / (delta + i/2)``.

    Normalized so that the resonant extinction cross section ``4 pi Im(alpha)``
    equals ``6 pi``.
    """
    return -0.75 / (np.asarray(detuning) + 0.5j)


def dilute_wavenumber(detuning, density):
    """Complex wavenumber ``1 + 2 pi n alpha_free`` of a dilute gas."""
    return 1 + 2 * np.pi * density * free_atom_polarizability(detuning)


def _split_error(deriv: complex, err_re: float, err_im: float) -> tuple[float, float]:
    g = complex(deriv)
    var_re = (g.real * err_re) ** 2 + (g.imag * err_im) ** 2
    var_im = (g.imag * err_re) ** 2 + (g.real * err_im) ** 2
    return float(np.sqrt(var_re)), float(np.sqrt(var_im))


def permittivity(k) -> tuple[float, float, float, float]:
    """``(eps', eps'', err', err'')`` with ``eps = k^2``.

    ``k`` may be a :class:`ComplexWavenumber` or a plain complex number
    (errors are then zero).
    """
    kc, ek_re, ek_im = _unpack(k)
    eps = kc * kc
    e_re, e_im = _split_error(2 * kc, ek_re, ek_im)
    return float(eps.real), float(eps.imag), e_re, e_im


def lorentz_lorenz(eps, density: float) -> complex:
    """Mean atomic polarizability ``3/(4 pi n) (eps - 1)/(eps + 2)``."""
    if not density > 0:
        raise ValueError("density must be positive")
    eps = complex(eps)
    if eps == -2:
        raise PoleError("Lorentz-Lorenz formula has a pole at eps = -2")
    return 3 / (4 * np.pi * density) * (eps - 1) / (eps + 2)


def inverse_lorentz_lorenz(alpha, density: float) -> complex:
    """Permittivity ``(1 + 8 pi n alpha / 3) / (1 - 4 pi n alpha / 3)``."""
    a = 4 * np.pi * density * complex(alpha) / 3
    if a == 1:
        raise PoleError("inverse Lorentz-Lorenz pole")
    return (1 + 2 * a) / (1 - a)


def ioffe_regel(k) -> float:
    """``k' / (2 k'')``; NaN when ``k'' <= 0`` (no attenuation, ratio undefined)."""
    kc, _, _ = _unpack(k)
    if not kc.imag > 0:
        return float("nan")
    with np.errstate(over="ignore"):
        return float(np.float64(kc.real) / (2 * np.float64(kc.imag)))


def _unpack(k):
    if isinstance(k, ComplexWavenumber):
        return complex(k.k_re, k.k_im), k.k_re_err, k.k_im_err
    return complex(k), 0.0, 0.0


@dataclass(frozen=True)
class OpticalConstants:
    detuning: float
    k_re: float
    k_im: float
    eps_re: float
    eps_im: float
    n_re: float
    n_im: float
    alpha_re: float
    alpha_im: float
    ioffe_regel: float
    ioffe_regel_defined: bool
    k_re_err: float = 0.0
    k_im_err: float = 0.0
    eps_re_err: float = 0.0
    eps_im_err: float = 0.0
    alpha_re_err: float = 0.0
    alpha_im_err: float = 0.0
    ioffe_regel_err: float = 0.0
    r2_phase: float = float("nan")
    r2_log_amplitude: float = float("nan")
    bins_used: int = 0

    @property
    def eps(self) -> complex:
        return complex(self.eps_re, self.eps_im)

    @property
    def alpha(self) -> complex:
        return complex(self.alpha_re, self.alpha_im)

    @property
    def k(self) -> complex:
        return complex(self.k_re, self.k_im)

    def as_dict(self) -> dict:
        return asdict(self)


def derive_constants(detuning: float, k, density: float) -> OpticalConstants:
    """All optical constants for one detuning from a fitted wavenumber."""
    kc, ek_re, ek_im = _unpack(k)
    eps_re, eps_im, eeps_re, eeps_im = permittivity(k)
    eps = complex(eps_re, eps_im)
    if abs(eps + 2) < 1e-12:
        alpha = complex(np.nan, np.nan)
        ea_re = ea_im = np.nan
    else:
        alpha = lorentz_lorenz(eps, density)
        # d alpha / d k = 3/(4 pi n) * 6 k / (k^2 + 2)^2
        dalpha = 3 / (4 * np.pi * density) * 6 * kc / (kc * kc + 2) ** 2
        ea_re, ea_im = _split_error(dalpha, ek_re, ek_im)
    ratio = ioffe_regel(kc)
    defined = bool(kc.imag > 0)
    if defined:
        ki = np.float64(kc.imag)
        with np.errstate(over="ignore", divide="ignore"):
            ratio_err = float(np.hypot(ek_re / (2 * ki), kc.real * ek_im / (2 * ki * ki)))
    else:
        ratio_err = float("nan")
    extra = {}
    if isinstance(k, ComplexWavenumber):
        extra = dict(r2_phase=k.r2_phase, r2_log_amplitude=k.r2_log_amplitude, bins_used=k.bins_used)
    return OpticalConstants(
        detuning=float(detuning),
        k_re=kc.real,
        k_im=kc.imag,
        eps_re=eps_re,
        eps_im=eps_im,
        n_re=kc.real,
        n_im=kc.imag,
        alpha_re=alpha.real,
        alpha_im=alpha.imag,
        ioffe_regel=ratio,
        ioffe_regel_defined=defined,
        k_re_err=ek_re,
        k_im_err=ek_im,
        eps_re_err=eeps_re,
        eps_im_err=eeps_im,
        alpha_re_err=ea_re,
        alpha_im_err=ea_im,
        ioffe_regel_err=ratio_err,
        **extra,
    )
