import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_realization
from dipolemedium.errors import ConfigError, PolarizationMismatchError, SpecMismatchError
from dipolemedium.geometry import Cylinder, sample_realization
from dipolemedium.profile import (
    BinningSpec,
    PolarizationProfile,
    SingleProfile,
    accumulate,
    bin_polarization,
    bin_values,
    from_samples,
    merge,
    read_profile_csv,
    write_profile_csv,
)
from dipolemedium.solver import ExcitationAmplitudes


def amps_for(values, m=1):
    b = np.zeros((len(values), 3), complex)
    b[:, m + 1] = values
    return ExcitationAmplitudes(b.ravel(), 0.0, m)


def test_spec_geometry():
    spec = BinningSpec(0.25, 5.0, 10.0)
    assert spec.n_bins == 40
    assert spec.edges[-1] == 10.0
    np.testing.assert_allclose(spec.volumes, np.pi * 25 * 0.25)
    with pytest.raises(ConfigError):
        BinningSpec(0.0, 1.0, 10.0)
    with pytest.raises(ConfigError):
        BinningSpec(12.0, 1.0, 10.0)
    with pytest.raises(ConfigError):
        BinningSpec(1.0, 0.0, 10.0)


def test_single_atom_lands_in_its_bin():
    spec = BinningSpec(1.0, 1.0, 2.0)
    real = make_realization([[0, 0, 1.1]])
    prof = bin_polarization(real, amps_for([2 + 1j]), spec)
    assert list(prof.counts) == [0, 1]
    assert prof.empty[0] and not prof.empty[1]
    assert prof.polarization[1] == pytest.approx((2 + 1j) / np.pi)
    assert prof.polarization[0] == 0


def test_atom_outside_averaging_radius_ignored():
    spec = BinningSpec(1.0, 1.0, 2.0)
    real = make_realization([[1.5, 0, 0.5], [0, 0.2, 0.5]])
    prof = bin_polarization(real, amps_for([5.0, 1.0]), spec)
    assert list(prof.counts) == [1, 0]
    assert prof.polarization[0] == pytest.approx(1 / np.pi)


def test_bin_polarization_checks_tags():
    spec = BinningSpec(1.0, 1.0, 2.0)
    real = make_realization([[0, 0, 0.5]])
    with pytest.raises(PolarizationMismatchError):
        bin_polarization(real, amps_for([1.0], m=0), spec, polarization=1)


def test_density_recovery_with_unit_amplitudes():
    shape = Cylinder(10.0, 6.0)
    spec = BinningSpec(1.0, 5.0, 10.0)
    prof = PolarizationProfile(spec)
    for i in range(1000):
        real = sample_realization(shape, 0.5, 0.0, 99, i)
        prof = accumulate(prof, bin_values(real.positions, np.ones(real.n_atoms), spec))
    interior = (spec.centers > 1) & (spec.centers < 9)
    np.testing.assert_allclose(np.abs(prof.values[interior]), 0.5, rtol=0.02)
    # and the bin-averaged profile is consistent with its own error bars
    assert np.all(np.abs(prof.values.real - 0.5) < 5 * prof.stderr_re)


def _random_single(spec, rng):
    p = rng.standard_normal(spec.n_bins) + 1j * rng.standard_normal(spec.n_bins)
    counts = rng.integers(0, 3, spec.n_bins)
    return SingleProfile(spec, np.where(counts > 0, p, 0), counts)


def test_first_accumulation(rng):
    spec = BinningSpec(1.0, 1.0, 5.0)
    x = _random_single(spec, rng)
    prof = accumulate(PolarizationProfile(spec), x)
    np.testing.assert_array_equal(prof.mean, x.polarization)
    np.testing.assert_array_equal(prof.covariance(), 0)
    assert prof.n_realizations == 1


def test_accumulation_commutes(rng):
    spec = BinningSpec(1.0, 1.0, 5.0)
    x, y = _random_single(spec, rng), _random_single(spec, rng)
    xy = from_samples(spec, [x, y])
    yx = from_samples(spec, [y, x])
    np.testing.assert_allclose(xy.mean, yx.mean, rtol=1e-12)
    np.testing.assert_allclose(xy.m2, yx.m2, rtol=1e-12)
    np.testing.assert_array_equal(xy.counts, yx.counts)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 30), st.integers(1, 30), st.integers(0, 2**31))
def test_merge_matches_sequential(n1, n2, seed):
    rng = np.random.default_rng(seed)
    spec = BinningSpec(1.0, 1.0, 4.0)
    xs = [_random_single(spec, rng) for _ in range(n1 + n2)]
    seq = from_samples(spec, xs)
    merged = merge(from_samples(spec, xs[:n1]), from_samples(spec, xs[n1:]))
    np.testing.assert_allclose(merged.mean, seq.mean, rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose(merged.m2, seq.m2, rtol=1e-10, atol=1e-12)
    assert merged.n_realizations == seq.n_realizations
    # the Welford covariance equals the two-pass sample covariance
    stack = np.array([x.polarization for x in xs])
    if n1 + n2 > 1:
        np.testing.assert_allclose(seq.covariance()[:, 0], stack.real.var(axis=0, ddof=1), rtol=1e-10)
        np.testing.assert_allclose(seq.covariance()[:, 1], stack.imag.var(axis=0, ddof=1), rtol=1e-10)


def test_clt_mean_of_complex_gaussian():
    rng = np.random.default_rng(4)
    spec = BinningSpec(1.0, 1.0, 3.0)
    mu, sigma, n = 1 + 1j, 0.1, 10_000
    ones = np.ones(spec.n_bins, dtype=np.int64)
    prof = PolarizationProfile(spec)
    for _ in range(n):
        p = mu + sigma * (rng.standard_normal(3) + 1j * rng.standard_normal(3))
        prof = accumulate(prof, SingleProfile(spec, p, ones))
    assert np.all(np.abs(prof.mean - mu) < 4 * sigma * np.sqrt(2) / np.sqrt(n))
    np.testing.assert_allclose(prof.covariance()[:, :2], sigma**2, rtol=0.05)


@settings(max_examples=25, deadline=None)
@given(st.complex_numbers(min_magnitude=0.1, max_magnitude=10, allow_nan=False, allow_infinity=False))
def test_binning_is_linear(c):
    spec = BinningSpec(0.5, 2.0, 4.0)
    real = sample_realization(Cylinder(4, 2), 0.5, 0.0, 1, 0)
    vals = np.exp(1j * real.positions[:, 2])
    base = bin_values(real.positions, vals, spec)
    scaled = bin_values(real.positions, c * vals, spec)
    np.testing.assert_allclose(scaled.polarization, c * base.polarization, rtol=1e-12, atol=1e-15)


def test_empty_bins_stay_empty():
    spec = BinningSpec(1.0, 1.0, 3.0)
    single = SingleProfile(spec, np.array([1.0, 0, 2.0]), np.array([1, 0, 1]))
    prof = from_samples(spec, [single, single])
    assert list(prof.empty) == [False, True, False]
    assert np.isnan(prof.values[1])
    assert prof.values[0] == 1.0


def test_spec_mismatch():
    a = PolarizationProfile(BinningSpec(1.0, 1.0, 3.0))
    b = SingleProfile(BinningSpec(0.5, 1.0, 3.0), np.zeros(6), np.zeros(6, int))
    with pytest.raises(SpecMismatchError):
        accumulate(a, b)
    with pytest.raises(SpecMismatchError):
        merge(a, PolarizationProfile(BinningSpec(0.5, 1.0, 3.0)))


def test_csv_round_trip(tmp_path, rng):
    spec = BinningSpec(1.0, 1.0, 4.0)
    prof = from_samples(spec, [_random_single(spec, rng) for _ in range(5)])
    path = tmp_path / "p.csv"
    write_profile_csv(prof, path, ["hello"])
    assert path.read_text().startswith("# hello\nz_center,re_P,im_P,abs_P,arg_P,count,stderr_re,stderr_im")
    data = read_profile_csv(path)
    np.testing.assert_allclose(data["re_P"], prof.values.real, rtol=1e-11)
    np.testing.assert_allclose(data["arg_P"], np.angle(prof.values), rtol=1e-11)
    np.testing.assert_array_equal(data["count"], prof.counts)
