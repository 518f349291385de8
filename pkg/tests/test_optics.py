import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dipolemedium.dispersion import ComplexWavenumber
from dipolemedium.errors import PoleError
from dipolemedium.optics import (
    derive_constants,
    dilute_wavenumber,
    free_atom_polarizability,
    inverse_lorentz_lorenz,
    ioffe_regel,
    lorentz_lorenz,
    permittivity,
)

finite = dict(allow_nan=False, allow_infinity=False)


def wavenumber(kr, ki, er=0.0, ei=0.0):
    return ComplexWavenumber(kr, ki, er, ei, 1.0, 1.0, 10)


def test_permittivity_examples():
    eps_re, eps_im, _, _ = permittivity(wavenumber(1.1, 0.1))
    assert eps_re == pytest.approx(1.20, abs=1e-14)
    assert eps_im == pytest.approx(0.22, abs=1e-14)
    assert permittivity(1.0)[:2] == (1.0, 0.0)
    assert permittivity(0.5 + 1.0j)[0] == pytest.approx(-0.75)


def test_free_atom_normalization():
    # 4 pi Im(alpha) is the resonant extinction cross section 6 pi
    assert free_atom_polarizability(0.0) == pytest.approx(1.5j)
    assert 4 * np.pi * free_atom_polarizability(0.0).imag == pytest.approx(6 * np.pi)
    # Lorentzian profile of the absorptive part
    d = np.linspace(-5, 5, 11)
    np.testing.assert_allclose(free_atom_polarizability(d).imag, 1.5 * 0.25 / (d**2 + 0.25))


def test_vacuum_polarizability():
    assert lorentz_lorenz(1.0, 0.3) == 0


def test_pole():
    with pytest.raises(PoleError):
        lorentz_lorenz(-2.0, 0.1)
    c = derive_constants(0.0, complex(0, np.sqrt(2)), 0.1)
    assert np.isnan(c.alpha_re)


@settings(max_examples=100, deadline=None)
@given(
    st.complex_numbers(max_magnitude=20, **finite).filter(lambda e: abs(e + 2) > 1e-2),
    st.floats(1e-3, 1.0),
)
def test_lorentz_lorenz_round_trip(eps, n):
    alpha = lorentz_lorenz(eps, n)
    back = inverse_lorentz_lorenz(alpha, n)
    assert abs(back - eps) <= 1e-12 * max(1.0, abs(eps))


@pytest.mark.parametrize("detuning", [-2.0, -1.0, 0.0, 1.0, 2.0])
def test_dilute_polarizability_recovered(detuning):
    n = 0.01
    k = dilute_wavenumber(detuning, n)
    c = derive_constants(detuning, k, n)
    alpha0 = free_atom_polarizability(detuning)
    assert abs(c.alpha - alpha0) < 0.1 * abs(alpha0)
    eps0 = 1 + 4 * np.pi * n * alpha0
    assert abs(c.eps - eps0) < 0.1 * abs(eps0)


def test_ioffe_regel():
    assert ioffe_regel(1 + 1j) == 0.5
    assert np.isnan(ioffe_regel(1.0))
    assert np.isnan(ioffe_regel(1 - 0.01j))
    assert ioffe_regel(1 + 1e-9j) > 1e8
    c = derive_constants(0.0, 1.0 + 0.0j, 0.1)
    assert not c.ioffe_regel_defined and np.isnan(c.ioffe_regel)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.01, 3), st.floats(-1, 2, allow_subnormal=False), st.floats(1e-3, 0.5))
def test_identities(kr, ki, n):
    c = derive_constants(0.3, wavenumber(kr, ki, 0.01, 0.02), n)
    assert abs(c.eps_re - (c.n_re**2 - c.n_im**2)) <= 1e-12 * max(1, abs(c.eps_re))
    assert abs(c.eps_im - 2 * c.n_re * c.n_im) <= 1e-12 * max(1, abs(c.eps_im))
    if ki > 0:
        assert c.ioffe_regel == pytest.approx(kr / (2 * ki), rel=1e-12)
        assert c.ioffe_regel_defined
    else:
        assert not c.ioffe_regel_defined


def _numeric_error(f, kr, ki, er, ei, h=1e-6):
    # independent check: finite-difference Jacobian of a real-valued map
    dr = (f(kr + h, ki) - f(kr - h, ki)) / (2 * h)
    di = (f(kr, ki + h) - f(kr, ki - h)) / (2 * h)
    return np.hypot(dr * er, di * ei)


@pytest.mark.parametrize("kr,ki", [(1.1, 0.1), (0.8, 0.4), (1.3, 0.02)])
def test_error_propagation_matches_finite_differences(kr, ki):
    er, ei, n = 0.01, 0.005, 0.2
    c = derive_constants(0.0, wavenumber(kr, ki, er, ei), n)

    def eps(a, b):
        return complex(a, b) ** 2

    def alpha(a, b):
        return lorentz_lorenz(complex(a, b) ** 2, n)

    assert c.eps_re_err == pytest.approx(_numeric_error(lambda a, b: eps(a, b).real, kr, ki, er, ei), rel=1e-6)
    assert c.eps_im_err == pytest.approx(_numeric_error(lambda a, b: eps(a, b).imag, kr, ki, er, ei), rel=1e-6)
    assert c.alpha_re_err == pytest.approx(_numeric_error(lambda a, b: alpha(a, b).real, kr, ki, er, ei), rel=1e-6)
    assert c.alpha_im_err == pytest.approx(_numeric_error(lambda a, b: alpha(a, b).imag, kr, ki, er, ei), rel=1e-6)
    assert c.ioffe_regel_err == pytest.approx(_numeric_error(lambda a, b: a / (2 * b), kr, ki, er, ei), rel=1e-6)
