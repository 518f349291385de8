"""Ensemble runs: detuning sweeps, profile dumps and the Mie comparison.

Work is farmed out per realization: one worker draws a configuration, reduces
its detuning-free matrix once and solves every detuning of the grid. Results
are checkpointed per realization under ``<output_dir>/checkpoints/<hash>/``
and reduced in realization-index order, so the numbers written do not depend
on the worker count and an interrupted run resumes where it stopped.
"""
from __future__ import annotations

import csv
import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .config import SimulationConfig
from .dispersion import fit_wavenumber
from .errors import ConfigError, DipoleMediumError, FitError, SingularSystemError
from .geometry import Cylinder, Sphere, atom_count, sample_realization
from .mie import MieInput, mie_extinction, microscopic_cross_section
from .optics import OpticalConstants, derive_constants
from .profile import PolarizationProfile, SingleProfile, accumulate, bin_values, write_profile_csv
from .solver import ShiftedSolver

log = logging.getLogger(__name__)

#: Redraws allowed for one realization index before the run fails.
MAX_RESAMPLES = 10

DISPERSION_COLUMNS = (
    "detuning",
    "k_re", "k_re_err", "k_im", "k_im_err",
    "eps_re", "eps_re_err", "eps_im", "eps_im_err",
    "n_re", "n_im",
    "alpha_re", "alpha_re_err", "alpha_im", "alpha_im_err",
    "ioffe_regel", "ioffe_regel_err", "ioffe_regel_defined",
    "r2_phase", "r2_log_amplitude", "bins_used", "realizations",
    "sigma_microscopic", "sigma_microscopic_stderr",
)
MIE_COLUMNS = ("detuning", "sigma_microscopic", "sigma_microscopic_stderr", "sigma_mie", "relative_difference")
SINGLE_ATOM_COLUMNS = ("detuning", "abs_b_squared", "lorentzian", "sigma_microscopic", "sigma_expected")


class RunInterrupted(DipoleMediumError):
    """The run stopped early; completed realizations are on disk."""


@dataclass
class RealizationResult:
    """Per-realization output for every detuning of the grid."""

    index: int
    polarization_sums: np.ndarray  # (n_detunings, n_bins) complex, amplitude sum per bin
    counts: np.ndarray  # (n_bins,)
    sigma: np.ndarray  # (n_detunings,)
    n_atoms: int
    resamples: int = 0
    fallbacks: int = 0
    max_residual: float = 0.0

    def save(self, path: Path) -> None:
        tmp = path.with_suffix(".tmp.npz")
        np.savez(
            tmp,
            index=self.index,
            polarization_sums=self.polarization_sums,
            counts=self.counts,
            sigma=self.sigma,
            n_atoms=self.n_atoms,
            resamples=self.resamples,
            fallbacks=self.fallbacks,
            max_residual=self.max_residual,
        )
        os.replace(tmp, path)

    @classmethod
    def load(cls, path: Path) -> "RealizationResult":
        with np.load(path) as f:
            return cls(
                index=int(f["index"]),
                polarization_sums=f["polarization_sums"],
                counts=f["counts"],
                sigma=f["sigma"],
                n_atoms=int(f["n_atoms"]),
                resamples=int(f["resamples"]),
                fallbacks=int(f["fallbacks"]),
                max_residual=float(f["max_residual"]),
            )


def simulate_realization(config: SimulationConfig, index: int) -> RealizationResult:
    """Draw realization ``index`` and solve it at every detuning of the grid.

    A numerically singular configuration is redrawn (deterministically, with
    a bumped attempt counter) up to ``MAX_RESAMPLES`` times.
    """
    spec = config.binning
    nb = spec.n_bins if spec is not None else 0
    for attempt in range(MAX_RESAMPLES + 1):
        sub_index = index if attempt == 0 else (index, attempt)
        real = _draw(config, sub_index)
        try:
            solver = ShiftedSolver(real, config.polarization)
            sums = np.zeros((len(config.detunings), nb), dtype=complex)
            sigma = np.zeros(len(config.detunings))
            counts = np.zeros(nb, dtype=np.int64)
            max_res = 0.0
            for j, delta in enumerate(config.detunings):
                amps = solver.solve(delta)
                max_res = max(max_res, amps.residual)
                sigma[j] = microscopic_cross_section(real, amps, delta, config.polarization)
                if spec is not None:
                    single = bin_values(real.positions, amps.component(config.polarization), spec)
                    sums[j] = single.polarization * spec.volumes
                    counts = single.counts
        except SingularSystemError as exc:
            log.warning("realization %s attempt %d singular (%s); redrawing", index, attempt, exc)
            continue
        return RealizationResult(index, sums, counts, sigma, real.n_atoms, attempt, solver.n_fallbacks, max_res)
    raise SingularSystemError(f"realization {index} singular after {MAX_RESAMPLES} redraws")


def _draw(config: SimulationConfig, sub_index):
    if isinstance(sub_index, tuple):
        # redraws use a distinct, still deterministic stream
        index, attempt = sub_index
        seed_index = (index + 1) * 1_000_003 + attempt
        master = config.master_seed + 7919 * attempt
    else:
        seed_index, master = sub_index, config.master_seed
    return sample_realization(
        config.shape,
        config.density,
        config.exclusion_radius,
        master,
        seed_index,
        n_atoms=config.n_atoms,
        attempts_per_atom=config.attempts_per_atom,
    )


def _worker(args):
    config, index = args
    os.environ.setdefault("OMP_NUM_THREADS", "1")
    return simulate_realization(config, index)


class Manifest:
    """JSON run manifest written at start and finalized at the end."""

    def __init__(self, config: SimulationConfig, path: Path):
        self.path = path
        self.data = {
            "config": config.as_dict(),
            "config_hash": config.config_hash,
            "version": __version__,
            "status": "running",
            "started": time.strftime("%Y-%m-%dT%H:%M:%S"),
            "wall_clock_s": None,
            "completed_realizations": 0,
            "resamples": 0,
            "solver_fallbacks": 0,
            "max_residual": 0.0,
            "detunings": {},
        }
        self._t0 = time.monotonic()
        self.write()

    def write(self) -> None:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        tmp = self.path.with_suffix(".tmp")
        tmp.write_text(json.dumps(self.data, indent=2, default=_json_default))
        os.replace(tmp, self.path)

    def finalize(self, status: str) -> None:
        self.data["status"] = status
        self.data["wall_clock_s"] = round(time.monotonic() - self._t0, 3)
        self.write()


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(type(o))


class Ensemble:
    """Runs (or resumes) all realizations of a config and keeps them in index order."""

    def __init__(self, config: SimulationConfig, out_dir: Path | None = None):
        self.config = config
        self.out_dir = Path(out_dir if out_dir is not None else config.output_dir)
        self.checkpoint_dir = self.out_dir / "checkpoints" / config.checkpoint_key
        self.results: dict[int, RealizationResult] = {}

    def _path(self, index: int) -> Path:
        return self.checkpoint_dir / f"r{index:06d}.npz"

    def load_existing(self) -> None:
        if not self.checkpoint_dir.is_dir():
            return
        for i in range(self.config.realizations):
            p = self._path(i)
            if p.exists():
                try:
                    self.results[i] = RealizationResult.load(p)
                except Exception:  # noqa: BLE001 - a torn file is simply recomputed
                    log.warning("discarding unreadable checkpoint %s", p)

    def run(self, manifest: Manifest | None = None, progress=None) -> None:
        self.checkpoint_dir.mkdir(parents=True, exist_ok=True)
        self.load_existing()
        todo = [i for i in range(self.config.realizations) if i not in self.results]
        log.info("%d realizations cached, %d to run", len(self.results), len(todo))
        try:
            if self.config.workers == 1 or len(todo) <= 1:
                for i in todo:
                    self._store(simulate_realization(self.config, i), manifest, progress)
            else:
                with ProcessPoolExecutor(max_workers=self.config.workers) as pool:
                    for res in pool.map(_worker, [(self.config, i) for i in todo]):
                        self._store(res, manifest, progress)
        except KeyboardInterrupt as exc:
            raise RunInterrupted(f"interrupted after {len(self.results)} realizations") from exc

    def _store(self, res: RealizationResult, manifest, progress) -> None:
        res.save(self._path(res.index))
        self.results[res.index] = res
        if manifest is not None:
            self._update_manifest(manifest)
            manifest.write()
        if progress is not None:
            progress(len(self.results), self.config.realizations)

    def _update_manifest(self, manifest: Manifest) -> None:
        rs = list(self.results.values())
        manifest.data["completed_realizations"] = len(rs)
        manifest.data["resamples"] = int(sum(r.resamples for r in rs))
        manifest.data["solver_fallbacks"] = int(sum(r.fallbacks for r in rs))
        manifest.data["max_residual"] = float(max((r.max_residual for r in rs), default=0.0))

    def ordered(self) -> list[RealizationResult]:
        return [self.results[i] for i in sorted(self.results)]

    def profile(self, j: int) -> PolarizationProfile:
        """Ensemble profile of detuning number ``j``, accumulated in index order."""
        spec = self.config.binning
        rs = self.ordered()
        if self.config.estimator == "ratio":
            return ratio_profile(spec, [r.polarization_sums[j] for r in rs], [r.counts for r in rs], self.config.density)
        prof = PolarizationProfile(spec)
        for r in rs:
            prof = accumulate(prof, SingleProfile(spec, r.polarization_sums[j] / spec.volumes, r.counts))
        return prof

    def sigma(self, j: int) -> tuple[float, float]:
        s = np.array([r.sigma[j] for r in self.ordered()])
        if len(s) == 0:
            return float("nan"), float("nan")
        err = float(np.std(s, ddof=1) / np.sqrt(len(s))) if len(s) > 1 else float("nan")
        return float(np.mean(s)), err


def ratio_profile(spec, sums, counts, density: float) -> PolarizationProfile:
    """Density times the per-atom mean amplitude in each bin.

    Same expectation as the per-volume average for a uniform cloud but free of
    the Poisson scatter of the bin occupation. The returned covariance is the
    delta-method variance of the ratio estimator.
    """
    sums = np.asarray(sums)
    counts = np.asarray(counts, dtype=float)
    n = len(sums)
    total_c = counts.sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = sums.sum(axis=0) / total_c
    ratio = np.where(total_c > 0, ratio, 0)
    resid = sums - ratio[None, :] * counts
    scale = density
    m2 = np.zeros((spec.n_bins, 3))
    if n > 1:
        cbar = total_c / n
        with np.errstate(invalid="ignore", divide="ignore"):
            norm = np.where(cbar > 0, 1 / cbar**2, 0)
        # the accumulator stores M2 with cov = M2 / (n - 1) and cov_mean = cov / n
        m2[:, 0] = (resid.real**2).sum(axis=0) * norm
        m2[:, 1] = (resid.imag**2).sum(axis=0) * norm
        m2[:, 2] = (resid.real * resid.imag).sum(axis=0) * norm
        m2 *= scale**2
    return PolarizationProfile(spec, n, scale * ratio, m2, counts.sum(axis=0).astype(np.int64))


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.12g}"


def _write_table(path: Path, columns, rows, header_lines) -> None:
    tmp = path.with_suffix(".tmp")
    with tmp.open("w", newline="") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        w = csv.writer(fh)
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(row[c]) for c in columns])
    os.replace(tmp, path)


def read_table(path) -> list[dict[str, float]]:
    """Read a CSV written by this module (comment lines skipped)."""
    lines = [ln for ln in Path(path).read_text().splitlines() if ln and not ln.startswith("#")]
    return [{k: float(v) for k, v in row.items()} for row in csv.DictReader(lines)]


def _header(config: SimulationConfig, kind: str) -> list[str]:
    return [f"{kind} results", f"config_hash = {config.config_hash}", f"version = {__version__}"]


def analyze(ensemble: Ensemble) -> list[dict]:
    """Fit and derive optical constants for every detuning from finished realizations."""
    config = ensemble.config
    rows = []
    for j, delta in enumerate(config.detunings):
        prof = ensemble.profile(j)
        sigma, sigma_err = ensemble.sigma(j)
        try:
            k = fit_wavenumber(prof, config.window, weighted=config.weighted, max_phase_error=config.max_phase_error)
            oc = derive_constants(delta, k, config.density)
            row = oc.as_dict()
        except FitError as exc:
            log.warning("fit failed at delta=%g: %s", delta, exc)
            row = {c: float("nan") for c in DISPERSION_COLUMNS}
            row["detuning"] = delta
            row["ioffe_regel_defined"] = False
            row["bins_used"] = 0
        row["realizations"] = prof.n_realizations
        row["sigma_microscopic"] = sigma
        row["sigma_microscopic_stderr"] = sigma_err
        rows.append(row)
    return rows


def _finish_manifest_rows(manifest: Manifest, rows) -> None:
    for r in rows:
        manifest.data["detunings"][_fmt(r["detuning"])] = {
            "r2_phase": r.get("r2_phase"),
            "r2_log_amplitude": r.get("r2_log_amplitude"),
            "bins_used": r.get("bins_used"),
            "realizations": r.get("realizations"),
            "k_re_err": r.get("k_re_err"),
            "k_im_err": r.get("k_im_err"),
        }


def run_dispersion(config: SimulationConfig, out_dir=None, progress=None) -> list[dict]:
    """Run (or resume) a detuning sweep and write ``dispersion.csv`` and ``manifest.json``.

    Returns the rows written, one dict per detuning with the
    :data:`DISPERSION_COLUMNS` fields.
    """
    if not isinstance(config.shape, Cylinder):
        raise ConfigError("dispersion runs need a cylindrical cloud")
    out = Path(out_dir if out_dir is not None else config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = Manifest(config, out / "manifest.json")
    ens = Ensemble(config, out)
    try:
        ens.run(manifest, progress)
    except RunInterrupted:
        if len(ens.results) >= 2:
            rows = analyze(ens)
            _write_table(out / "dispersion.partial.csv", DISPERSION_COLUMNS, rows, _header(config, "partial dispersion"))
        manifest.finalize("incomplete")
        raise
    except Exception:
        manifest.finalize("incomplete")
        raise
    rows = analyze(ens)
    _write_table(out / "dispersion.csv", DISPERSION_COLUMNS, rows, _header(config, "dispersion"))
    _finish_manifest_rows(manifest, rows)
    manifest.finalize("complete")
    return rows


def run_profile_dump(config: SimulationConfig, detuning: float | None = None, out_dir=None, injected: PolarizationProfile | None = None, progress=None) -> PolarizationProfile:
    """Write the ensemble z-profile at one detuning to ``profile_<delta>.csv``.

    ``injected`` bypasses the simulation and dumps the given profile; this is
    the pass-through hook used to check the writer.
    """
    if detuning is None:
        detuning = config.detunings[0]
    out = Path(out_dir if out_dir is not None else config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg = config.replace(detunings=(float(detuning),), mode="profile-dump")
    path = out / f"profile_{_fmt(detuning)}.csv"
    if injected is not None:
        write_profile_csv(injected, path, _header(cfg, "injected profile"))
        return injected
    manifest = Manifest(cfg, out / "manifest.json")
    ens = Ensemble(cfg, out)
    try:
        ens.run(manifest, progress)
    except BaseException:
        manifest.finalize("incomplete")
        raise
    prof = ens.profile(0)
    write_profile_csv(prof, path, _header(cfg, "profile"))
    manifest.finalize("complete")
    return prof


def load_permittivity(path) -> dict[float, complex]:
    """Map detuning -> complex permittivity from a dispersion CSV."""
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"permittivity table {p} not found")
    return {round(r["detuning"], 9): complex(r["eps_re"], r["eps_im"]) for r in read_table(p)}


def run_mie_compare(config: SimulationConfig, permittivity: dict[float, complex] | None = None, out_dir=None, progress=None) -> list[dict]:
    """Microscopic versus Debye-Mie extinction of a spherical cloud.

    ``permittivity`` maps detuning to eps; when omitted it is read from
    ``config.permittivity_table``.
    """
    if not isinstance(config.shape, Sphere):
        raise ConfigError("mie-compare needs a spherical cloud")
    if permittivity is None:
        if config.permittivity_table is None:
            raise ConfigError("mie-compare needs a permittivity table")
        permittivity = load_permittivity(config.permittivity_table)
    permittivity = {round(float(k), 9): complex(v) for k, v in permittivity.items()}
    missing = [d for d in config.detunings if round(d, 9) not in permittivity]
    if missing:
        raise ConfigError(f"permittivity table lacks detunings {missing}")
    out = Path(out_dir if out_dir is not None else config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = Manifest(config, out / "manifest.json")
    ens = Ensemble(config, out)
    try:
        ens.run(manifest, progress)
    except BaseException:
        manifest.finalize("incomplete")
        raise
    rows = []
    for j, delta in enumerate(config.detunings):
        micro, micro_err = ens.sigma(j)
        eps = permittivity[round(delta, 9)]
        try:
            sig_mie = mie_extinction(MieInput.from_permittivity(config.shape.radius, eps))
        except (ValueError, DipoleMediumError) as exc:
            log.warning("Mie failed at delta=%g (eps=%s): %s", delta, eps, exc)
            sig_mie = float("nan")
        rel = (micro - sig_mie) / sig_mie if sig_mie else float("nan")
        rows.append(dict(detuning=delta, sigma_microscopic=micro, sigma_microscopic_stderr=micro_err, sigma_mie=sig_mie, relative_difference=rel))
    _write_table(out / "mie_compare.csv", MIE_COLUMNS, rows, _header(config, "mie-compare"))
    manifest.finalize("complete")
    return rows


def run_single_atom(config: SimulationConfig, out_dir=None) -> list[dict]:
    """Calibration run with one atom: amplitude Lorentzian and 6 pi cross section."""
    cfg = config.replace(n_atoms=1, realizations=1)
    out = Path(out_dir if out_dir is not None else config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    res = simulate_realization(cfg, 0)
    rows = []
    real = _draw(cfg, 0)
    solver = ShiftedSolver(real, cfg.polarization)
    for j, delta in enumerate(cfg.detunings):
        b = solver.solve(delta).component(cfg.polarization)[0]
        lor = 1 / (delta**2 + 0.25)
        rows.append(
            dict(
                detuning=delta,
                abs_b_squared=abs(b) ** 2,
                lorentzian=lor,
                sigma_microscopic=res.sigma[j],
                sigma_expected=6 * np.pi * 0.25 * lor,
            )
        )
    _write_table(out / "single_atom.csv", SINGLE_ATOM_COLUMNS, rows, _header(cfg, "single-atom"))
    return rows


def estimate_cost(config: SimulationConfig, benchmark_size: int = 600) -> dict:
    """Rough wall-time estimate from a timed Hessenberg reduction at a small size."""
    from scipy.linalg import lapack

    n_atoms = config.n_atoms if config.n_atoms is not None else atom_count(config.shape, config.density)
    dim = 3 * n_atoms
    rng = np.random.default_rng(0)
    m = rng.standard_normal((benchmark_size, benchmark_size)) + 1j * rng.standard_normal((benchmark_size, benchmark_size))
    lwork = int(lapack.zgehrd_lwork(benchmark_size)[0].real)
    t0 = time.perf_counter()
    lapack.zgehrd(m, lwork=lwork)
    t_bench = time.perf_counter() - t0
    per_real = t_bench * (dim / benchmark_size) ** 3 + len(config.detunings) * 2e-8 * dim**2
    total = per_real * config.realizations / config.workers
    return {
        "n_atoms": n_atoms,
        "matrix_dim": dim,
        "matrix_gib": 16 * dim**2 / 2**30,
        "detunings": len(config.detunings),
        "realizations": config.realizations,
        "workers": config.workers,
        "seconds_per_realization": per_real,
        "total_hours": total / 3600,
    }
