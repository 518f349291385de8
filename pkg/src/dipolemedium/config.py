"""Simulation configuration: a sectioned ``key = value`` text file.

Example::

    [cloud]
    shape = cylinder
    length = 10
    radius = 12
    density = 0.2
    exclusion_radius = 0

    [drive]
    detuning_start = -4
    detuning_stop = 6
    detuning_step = 0.5
    polarization = 1

    [ensemble]
    realizations = 200
    master_seed = 1

    [binning]
    bin_width = 0.25
    averaging_radius = 6

    [fit]
    z_min = 2
    z_max = 8
    weighted = true
    max_phase_error = 0.35

    [run]
    mode = dispersion
    workers = 1
    output_dir = out

Unknown sections or keys are rejected. Keys left out take the defaults in
``SCHEMA``; ``averaging_radius`` defaults to R/2 and the fit window to
``[2, L - 2]``. ``max_phase_error = inf`` fits the whole window.
"""
from __future__ import annotations

import configparser
import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dispersion import FitWindow
from .errors import ConfigError
from .geometry import DEFAULT_ATTEMPTS_PER_ATOM, Cylinder, Sphere
from .profile import BinningSpec

MODES = ("dispersion", "profile-dump", "mie-compare", "single-atom-test")
ESTIMATORS = ("volume", "ratio")
WORKERS_ENV = "DIPOLEMEDIUM_WORKERS"

# section -> key -> (type, default); None default means "derived" or required
SCHEMA = {
    "cloud": {
        "shape": (str, "cylinder"),
        "length": (float, None),
        "radius": (float, None),
        "density": (float, None),
        "exclusion_radius": (float, 0.0),
        "n_atoms": (int, None),
    },
    "drive": {
        "detuning_start": (float, None),
        "detuning_stop": (float, None),
        "detuning_step": (float, 1.0),
        "polarization": (int, 1),
    },
    "ensemble": {
        "realizations": (int, 1),
        "master_seed": (int, 0),
        "attempts_per_atom": (int, DEFAULT_ATTEMPTS_PER_ATOM),
    },
    "binning": {
        "bin_width": (float, 0.25),
        "averaging_radius": (float, None),
    },
    "fit": {
        "z_min": (float, None),
        "z_max": (float, None),
        "weighted": (bool, True),
        "max_phase_error": (float, 0.35),
        "estimator": (str, "volume"),
    },
    "run": {
        "mode": (str, "dispersion"),
        "workers": (int, None),
        "output_dir": (str, "out"),
        "permittivity_table": (str, None),
    },
}


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        raise ConfigError(f"{WORKERS_ENV} must be an integer")


@dataclass(frozen=True)
class SimulationConfig:
    shape: Cylinder | Sphere
    density: float
    detunings: tuple[float, ...]
    realizations: int = 1
    master_seed: int = 0
    exclusion_radius: float = 0.0
    polarization: int = 1
    binning: BinningSpec | None = None
    window: FitWindow | None = None
    weighted: bool = True
    max_phase_error: float = 0.35
    estimator: str = "volume"
    attempts_per_atom: int = DEFAULT_ATTEMPTS_PER_ATOM
    n_atoms: int | None = None
    mode: str = "dispersion"
    workers: int = field(default_factory=default_workers)
    output_dir: str = "out"
    permittivity_table: str | None = None

    def __post_init__(self):
        if self.realizations < 1:
            raise ConfigError("realizations must be >= 1")
        if len(self.detunings) == 0:
            raise ConfigError("detuning grid is empty")
        if self.density < 0 or (self.density == 0 and self.n_atoms is None):
            raise ConfigError("density must be positive")
        if self.exclusion_radius < 0:
            raise ConfigError("exclusion_radius must be >= 0")
        if self.polarization not in (-1, 0, 1):
            raise ConfigError("polarization must be -1, 0 or 1")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}")
        if self.estimator not in ESTIMATORS:
            raise ConfigError(f"estimator must be one of {ESTIMATORS}")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if isinstance(self.shape, Cylinder):
            if self.binning is None:
                object.__setattr__(
                    self, "binning", BinningSpec(0.25, self.shape.radius / 2, self.shape.length)
                )
            if self.window is None:
                object.__setattr__(self, "window", FitWindow.default(self.shape.length))
            if self.binning.length != self.shape.length:
                raise ConfigError("binning length must equal cylinder length")
            if self.binning.averaging_radius > self.shape.radius:
                raise ConfigError("averaging_radius must not exceed the cloud radius")
            if self.window.z_max > self.shape.length:
                raise ConfigError("fit window exceeds the cloud")
        elif self.mode in ("dispersion", "profile-dump"):
            raise ConfigError(f"mode {self.mode!r} needs a cylindrical cloud")

    def replace(self, **changes) -> "SimulationConfig":
        return dataclasses.replace(self, **changes)

    def physics_dict(self) -> dict:
        """Everything that determines the numerical results (not workers or paths)."""
        shape = {"kind": type(self.shape).__name__.lower(), **dataclasses.asdict(self.shape)}
        d = {
            "shape": shape,
            "density": self.density,
            "n_atoms": self.n_atoms,
            "detunings": list(self.detunings),
            "realizations": self.realizations,
            "master_seed": self.master_seed,
            "exclusion_radius": self.exclusion_radius,
            "polarization": self.polarization,
            "attempts_per_atom": self.attempts_per_atom,
            "weighted": self.weighted,
            "max_phase_error": self.max_phase_error,
            "estimator": self.estimator,
            "mode": self.mode,
        }
        if self.binning is not None:
            d["binning"] = dataclasses.asdict(self.binning)
        if self.window is not None:
            d["window"] = dataclasses.asdict(self.window)
        return d

    def as_dict(self) -> dict:
        d = self.physics_dict()
        d.update(workers=self.workers, output_dir=self.output_dir, permittivity_table=self.permittivity_table)
        return d

    @property
    def checkpoint_key(self) -> str:
        """Hash of the fields that fix each realization's raw output.

        Leaves out the realization count and the fit settings so a longer run
        or a refit reuses stored realizations.
        """
        d = self.physics_dict()
        for k in ("realizations", "weighted", "max_phase_error", "estimator", "window", "mode"):
            d.pop(k, None)
        blob = json.dumps(d, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    @property
    def config_hash(self) -> str:
        blob = json.dumps(self.physics_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def detuning_grid(start: float, stop: float, step: float) -> tuple[float, ...]:
    """Inclusive grid ``start, start + step, ..., stop``."""
    if step <= 0:
        raise ConfigError("detuning_step must be positive")
    if stop < start:
        raise ConfigError("detuning_stop < detuning_start")
    n = int(np.floor((stop - start) / step + 1e-9)) + 1
    return tuple(float(round(start + i * step, 12)) for i in range(n))


def _convert(typ, raw: str, where: str):
    try:
        if typ is bool:
            low = raw.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        return typ(raw.strip())
    except ValueError:
        raise ConfigError(f"{where}: cannot parse {raw!r} as {typ.__name__}") from None


def parse_config(text: str, **overrides) -> SimulationConfig:
    """Parse configuration text; ``overrides`` replace fields after parsing."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    values = {}
    for section in parser.sections():
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        for key, raw in parser.items(section):
            if key not in SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
            values[key] = _convert(SCHEMA[section][key][0], raw, f"[{section}] {key}")
    for section, keys in SCHEMA.items():
        for key, (_, default) in keys.items():
            values.setdefault(key, default)
    return _build(values, overrides)


def load_config(path, **overrides) -> SimulationConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {path} not found")
    return parse_config(path.read_text(), **overrides)


def _require(values, *keys):
    missing = [k for k in keys if values.get(k) is None]
    if missing:
        raise ConfigError(f"missing required keys: {', '.join(missing)}")


def _build(v: dict, overrides: dict) -> SimulationConfig:
    kind = v["shape"].lower()
    if kind == "cylinder":
        _require(v, "length", "radius")
        shape = Cylinder(v["length"], v["radius"])
    elif kind == "sphere":
        _require(v, "radius")
        if v["length"] is not None:
            raise ConfigError("a sphere takes no length")
        shape = Sphere(v["radius"])
    else:
        raise ConfigError(f"unknown shape {v['shape']!r}")
    _require(v, "density", "detuning_start")
    stop = v["detuning_stop"] if v["detuning_stop"] is not None else v["detuning_start"]
    detunings = detuning_grid(v["detuning_start"], stop, v["detuning_step"])
    binning = window = None
    if isinstance(shape, Cylinder):
        r_avg = v["averaging_radius"] if v["averaging_radius"] is not None else shape.radius / 2
        binning = BinningSpec(v["bin_width"], r_avg, shape.length)
        z_min = v["z_min"] if v["z_min"] is not None else 2.0
        z_max = v["z_max"] if v["z_max"] is not None else shape.length - 2.0
        window = FitWindow(z_min, z_max)
    kwargs = dict(
        shape=shape,
        density=v["density"],
        detunings=detunings,
        realizations=v["realizations"],
        master_seed=v["master_seed"],
        exclusion_radius=v["exclusion_radius"],
        polarization=v["polarization"],
        binning=binning,
        window=window,
        weighted=v["weighted"],
        max_phase_error=v["max_phase_error"],
        estimator=v["estimator"],
        attempts_per_atom=v["attempts_per_atom"],
        n_atoms=v["n_atoms"],
        mode=v["mode"],
        workers=v["workers"] if v["workers"] is not None else default_workers(),
        output_dir=v["output_dir"],
        permittivity_table=v["permittivity_table"],
    )
    kwargs.update({k: val for k, val in overrides.items() if val is not None})
    try:
        return SimulationConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc
