"""Complex wavenumber from the decay and phase slope of a binned profile."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, FitError
from .profile import PolarizationProfile

MIN_BINS = 3
#: A bin whose mean phase is more uncertain than this (radians) ends the window.
DEFAULT_MAX_PHASE_ERROR = 0.35


class AmbiguousUnwrapWarning(UserWarning):
    pass


@dataclass(frozen=True)
class FitWindow:
    z_min: float
    z_max: float

    def __post_init__(self):
        if not (0 <= self.z_min < self.z_max):
            raise ConfigError(f"need 0 <= z_min < z_max, got {self}")

    @classmethod
    def default(cls, length: float, margin: float = 2.0) -> "FitWindow":
        return cls(margin, length - margin)

    def mask(self, z: np.ndarray) -> np.ndarray:
        return (z >= self.z_min) & (z <= self.z_max)


@dataclass(frozen=True)
class ComplexWavenumber:
    k_re: float
    k_im: float
    k_re_err: float
    k_im_err: float
    r2_phase: float
    r2_log_amplitude: float
    bins_used: int

    @property
    def value(self) -> complex:
        return complex(self.k_re, self.k_im)


@dataclass(frozen=True)
class LineFit:
    slope: float
    intercept: float
    slope_err: float
    r2: float


def _delta_variances(p, cov):
    """Delta-method variances of ln|P| and arg P from the (re, im) covariance."""
    vr, vi, c = cov[:, 0], cov[:, 1], cov[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        a2 = np.abs(p) ** 4
        var_log = (p.real**2 * vr + p.imag**2 * vi + 2 * p.real * p.imag * c) / a2
        var_arg = (p.imag**2 * vr + p.real**2 * vi - 2 * p.real * p.imag * c) / a2
    return var_log, var_arg


def phase_error(profile: PolarizationProfile) -> np.ndarray:
    """Standard error of the mean phase per bin (NaN in empty bins)."""
    _, var_arg = _delta_variances(profile.mean, profile.mean_covariance())
    return np.where(profile.empty, np.nan, np.sqrt(np.abs(var_arg)))


def _window_data(profile: PolarizationProfile, window: FitWindow, max_phase_error: float | None = None):
    z = profile.z
    use = window.mask(z) & ~profile.empty
    if max_phase_error is not None and profile.n_realizations > 1:
        # stop at the first bin whose phase is lost in the noise; past it the
        # unwrap picks arbitrary 2 pi jumps and |P| is biased up by the noise
        lost = use & ~(phase_error(profile) <= max_phase_error)
        if lost.any():
            use &= np.arange(len(z)) < np.argmax(lost)
    p = profile.mean[use]
    if use.sum() < MIN_BINS:
        raise FitError(f"only {int(use.sum())} usable bins in {window}; need {MIN_BINS}")
    return z[use], p, profile.mean_covariance()[use], use


def _unwrap(z: np.ndarray, p: np.ndarray) -> np.ndarray:
    phase = np.unwrap(np.angle(p))
    if len(phase) > 1 and np.any(np.abs(np.diff(phase)) > np.pi / 2):
        warnings.warn("phase step above pi/2 between bins; unwrapping may be ambiguous", AmbiguousUnwrapWarning, stacklevel=3)
    return phase


def unwrap_phase(profile: PolarizationProfile, window: FitWindow) -> tuple[np.ndarray, np.ndarray]:
    """z-centres and unwrapped phase of the mean polarization inside ``window``.

    Each step is reduced into (-pi, pi]. Empty bins are skipped.
    """
    z, p, _, _ = _window_data(profile, window)
    return z, _unwrap(z, p)


def weighted_line(x, y, weights=None) -> LineFit:
    """Least-squares line with optional inverse-variance weights.

    The slope error is scaled by the weighted residual variance, so it does
    not depend on the absolute scale of ``weights``.
    """
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    w = np.ones_like(x) if weights is None else np.asarray(weights, float)
    if len(x) < MIN_BINS:
        raise FitError("need at least 3 points")
    sw = w.sum()
    xm = (w * x).sum() / sw
    ym = (w * y).sum() / sw
    sxx = (w * (x - xm) ** 2).sum()
    if sxx <= 0:
        raise FitError("degenerate window: all z equal")
    slope = (w * (x - xm) * (y - ym)).sum() / sxx
    intercept = ym - slope * xm
    resid = y - (intercept + slope * x)
    ss_res = (w * resid**2).sum()
    ss_tot = (w * (y - ym) ** 2).sum()
    dof = len(x) - 2
    slope_err = np.sqrt(ss_res / dof / sxx) if dof > 0 else np.nan
    if ss_tot > 0:
        r2 = 1 - ss_res / ss_tot
    else:
        r2 = 1.0 if ss_res <= 1e-30 else 0.0
    return LineFit(float(slope), float(intercept), float(slope_err), float(r2))


def _weights(p: np.ndarray, cov: np.ndarray):
    """Inverse delta-method variances of ln|P| and arg P, or None if unusable."""
    var_log, var_arg = _delta_variances(p, cov)
    if np.all(var_log > 0) and np.all(var_arg > 0) and np.all(np.isfinite(var_log + var_arg)):
        return 1 / var_log, 1 / var_arg
    return None


def fit_wavenumber(
    profile: PolarizationProfile,
    window: FitWindow,
    weighted: bool = True,
    max_phase_error: float | None = DEFAULT_MAX_PHASE_ERROR,
) -> ComplexWavenumber:
    """Fit ``P(z) = P0 exp(i (k' + i k'') z)`` inside ``window``.

    ``k'`` is the slope of the unwrapped phase, ``k''`` minus the slope of
    ``ln|P|``. With ``weighted=True`` each bin is weighted by the inverse of
    its propagated variance; if any used bin has no variance estimate (one
    realization, noiseless input) the fit silently falls back to equal
    weights.

    Fitting stops at the first bin (in z) whose mean phase has a standard
    error above ``max_phase_error`` radians; ``None`` uses the whole window.
    """
    z, p, cov, _ = _window_data(profile, window, max_phase_error)
    if np.any(np.abs(p) == 0):
        raise FitError("zero polarization in a fitted bin")
    phase = _unwrap(z, p)
    logamp = np.log(np.abs(p))
    w = _weights(p, cov) if weighted else None
    w_log, w_arg = w if w is not None else (None, None)
    amp = weighted_line(z, logamp, w_log)
    ph = weighted_line(z, phase, w_arg)
    return ComplexWavenumber(
        k_re=ph.slope,
        k_im=-amp.slope,
        k_re_err=ph.slope_err,
        k_im_err=amp.slope_err,
        r2_phase=ph.r2,
        r2_log_amplitude=amp.r2,
        bins_used=len(z),
    )


def synthetic_profile(spec, k: complex, amplitude: complex = 1.0, noise: float = 0.0, n_realizations: int = 1, rng=None) -> PolarizationProfile:
    """Profile ``amplitude * exp(i k z)`` on the bin centres, optionally with
    complex Gaussian noise of standard deviation ``noise`` per realization."""
    from .profile import SingleProfile, accumulate

    z = spec.centers
    clean = amplitude * np.exp(1j * k * z)
    prof = PolarizationProfile(spec)
    rng = np.random.default_rng(rng)
    ones = np.ones(spec.n_bins, dtype=np.int64)
    for _ in range(n_realizations):
        p = clean
        if noise:
            p = clean + noise * (rng.standard_normal(len(z)) + 1j * rng.standard_normal(len(z))) / np.sqrt(2)
        prof = accumulate(prof, SingleProfile(spec, p, ones))
    return prof
