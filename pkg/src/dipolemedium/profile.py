"""Axially binned polarization profiles and their ensemble statistics."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, SpecMismatchError
from .geometry import CloudRealization
from .solver import ExcitationAmplitudes


@dataclass(frozen=True)
class BinningSpec:
    """z-bins of width ``bin_width`` over ``[0, length]`` within ``averaging_radius`` of the axis."""

    bin_width: float
    averaging_radius: float
    length: float

    def __post_init__(self):
        if not 0 < self.bin_width < self.length:
            raise ConfigError(f"need 0 < bin_width < length, got {self}")
        if not self.averaging_radius > 0:
            raise ConfigError("averaging_radius must be positive")

    @property
    def n_bins(self) -> int:
        return int(np.ceil(self.length / self.bin_width - 1e-9))

    @property
    def edges(self) -> np.ndarray:
        e = self.bin_width * np.arange(self.n_bins + 1)
        e[-1] = self.length
        return e

    @property
    def centers(self) -> np.ndarray:
        e = self.edges
        return 0.5 * (e[1:] + e[:-1])

    @property
    def volumes(self) -> np.ndarray:
        return np.pi * self.averaging_radius**2 * np.diff(self.edges)

    def assign(self, positions: np.ndarray) -> np.ndarray:
        """Bin index of every atom, or -1 outside the averaging region."""
        positions = np.asarray(positions).reshape(-1, 3)
        rho2 = positions[:, 0] ** 2 + positions[:, 1] ** 2
        z = positions[:, 2]
        idx = np.minimum(np.floor(z / self.bin_width).astype(int), self.n_bins - 1)
        inside = (rho2 <= self.averaging_radius**2) & (z >= 0) & (z <= self.length)
        return np.where(inside, idx, -1)


@dataclass(frozen=True)
class SingleProfile:
    """Binned polarization of one realization.

    ``polarization`` is the amplitude sum per bin divided by the bin volume;
    a bin holding no atoms has ``counts == 0`` and contributes zero dipole
    density.
    """

    spec: BinningSpec
    polarization: np.ndarray
    counts: np.ndarray

    @property
    def empty(self) -> np.ndarray:
        return self.counts == 0


def bin_polarization(
    realization: CloudRealization,
    amplitudes: ExcitationAmplitudes,
    spec: BinningSpec,
    polarization: int = 1,
) -> SingleProfile:
    """Sum the ``m = polarization`` amplitudes of atoms in each z-bin, per unit volume."""
    amplitudes.require_polarization(polarization)
    if amplitudes.n_atoms != realization.n_atoms:
        raise ValueError("amplitudes do not belong to this realization")
    return bin_values(realization.positions, amplitudes.component(polarization), spec)


def bin_values(positions: np.ndarray, values: np.ndarray, spec: BinningSpec) -> SingleProfile:
    idx = spec.assign(positions)
    keep = idx >= 0
    nb = spec.n_bins
    values = np.asarray(values, dtype=complex)
    sums = np.bincount(idx[keep], weights=values[keep].real, minlength=nb) + 1j * np.bincount(
        idx[keep], weights=values[keep].imag, minlength=nb
    )
    counts = np.bincount(idx[keep], minlength=nb)
    return SingleProfile(spec, sums / spec.volumes, counts)


@dataclass
class PolarizationProfile:
    """Running ensemble statistics of binned polarization.

    Moments are accumulated per bin over realizations with Welford's update
    (Chan's formula for merging), tracking the mean of P and the 2x2
    covariance of its real and imaginary parts. Bins that never held an atom
    keep ``counts == 0`` and report a NaN mean.
    """

    spec: BinningSpec
    n_realizations: int = 0
    mean: np.ndarray = field(default=None)
    m2: np.ndarray = field(default=None)  # (n_bins, 3): sum sq re, sum sq im, cross
    counts: np.ndarray = field(default=None)

    def __post_init__(self):
        nb = self.spec.n_bins
        if self.mean is None:
            self.mean = np.zeros(nb, dtype=complex)
        if self.m2 is None:
            self.m2 = np.zeros((nb, 3))
        if self.counts is None:
            self.counts = np.zeros(nb, dtype=np.int64)

    @property
    def z(self) -> np.ndarray:
        return self.spec.centers

    @property
    def empty(self) -> np.ndarray:
        return self.counts == 0

    @property
    def values(self) -> np.ndarray:
        """Ensemble-mean polarization, NaN in empty bins."""
        return np.where(self.empty, np.nan + 0j, self.mean)

    def covariance(self) -> np.ndarray:
        """Per-realization (var_re, var_im, cov_re_im) with ddof=1."""
        if self.n_realizations < 2:
            return np.zeros_like(self.m2)
        return self.m2 / (self.n_realizations - 1)

    def mean_covariance(self) -> np.ndarray:
        """Covariance of the ensemble mean, i.e. ``covariance() / n``."""
        if self.n_realizations < 2:
            return np.zeros_like(self.m2)
        return self.covariance() / self.n_realizations

    @property
    def stderr_re(self) -> np.ndarray:
        return np.sqrt(self.mean_covariance()[:, 0])

    @property
    def stderr_im(self) -> np.ndarray:
        return np.sqrt(self.mean_covariance()[:, 1])

    def copy(self) -> "PolarizationProfile":
        return PolarizationProfile(self.spec, self.n_realizations, self.mean.copy(), self.m2.copy(), self.counts.copy())

    def to_csv(self, path, header_lines=()) -> None:
        write_profile_csv(self, path, header_lines)


def _check_spec(a: BinningSpec, b: BinningSpec) -> None:
    if a != b:
        raise SpecMismatchError(f"binning specs differ: {a} vs {b}")


def accumulate(ensemble: PolarizationProfile, single: SingleProfile) -> PolarizationProfile:
    """Return ``ensemble`` updated with one more realization (input untouched)."""
    _check_spec(ensemble.spec, single.spec)
    out = ensemble.copy()
    n = out.n_realizations + 1
    x = single.polarization
    delta_old = x - out.mean
    out.mean = out.mean + delta_old / n
    delta_new = x - out.mean
    out.m2 = out.m2 + np.column_stack(
        [delta_old.real * delta_new.real, delta_old.imag * delta_new.imag, delta_old.real * delta_new.imag]
    )
    out.counts = out.counts + single.counts
    out.n_realizations = n
    return out


def merge(a: PolarizationProfile, b: PolarizationProfile) -> PolarizationProfile:
    """Combine two partial accumulators (associative up to rounding)."""
    _check_spec(a.spec, b.spec)
    if a.n_realizations == 0:
        return b.copy()
    if b.n_realizations == 0:
        return a.copy()
    na, nb = a.n_realizations, b.n_realizations
    n = na + nb
    d = b.mean - a.mean
    mean = a.mean + d * (nb / n)
    w = na * nb / n
    m2 = a.m2 + b.m2 + w * np.column_stack([d.real * d.real, d.imag * d.imag, d.real * d.imag])
    return PolarizationProfile(a.spec, n, mean, m2, a.counts + b.counts)


def from_samples(spec: BinningSpec, singles) -> PolarizationProfile:
    """Accumulate an iterable of single-realization profiles in order."""
    prof = PolarizationProfile(spec)
    for s in singles:
        prof = accumulate(prof, s)
    return prof


PROFILE_COLUMNS = ("z_center", "re_P", "im_P", "abs_P", "arg_P", "count", "stderr_re", "stderr_im")


def write_profile_csv(profile: PolarizationProfile, path, header_lines=()) -> None:
    """Write the profile with the fixed column order of ``PROFILE_COLUMNS``."""
    path = Path(path)
    p = profile.values
    with path.open("w", newline="") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        w = csv.writer(fh)
        w.writerow(PROFILE_COLUMNS)
        for row in zip(profile.z, p.real, p.imag, np.abs(p), np.angle(p), profile.counts, profile.stderr_re, profile.stderr_im):
            w.writerow([_fmt(v) if not isinstance(v, (int, np.integer)) else int(v) for v in row])


def read_profile_csv(path) -> dict[str, np.ndarray]:
    rows = [line for line in Path(path).read_text().splitlines() if line and not line.startswith("#")]
    reader = csv.DictReader(rows)
    data = {k: [] for k in PROFILE_COLUMNS}
    for r in reader:
        for k in PROFILE_COLUMNS:
            data[k].append(float(r[k]))
    return {k: np.array(v) for k, v in data.items()}


def _fmt(v) -> str:
    return f"{float(v):.12g}"
