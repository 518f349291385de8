"""Reduced-scale ensemble runs behind the acceptance suite.

Each run checkpoints every realization under ``RUN_DIR/<name>/`` so the
acceptance tests only pay for realizations that are not on disk yet. The
heavy runs take hours on one core; start them ahead of time with

    python tests/acceptance_runs.py            # everything, cheapest first
    python tests/acceptance_runs.py dense_0.2  # one run

``DIPOLEMEDIUM_ACCEPTANCE_DIR`` moves the run directory.
"""
from __future__ import annotations

import logging
import os
import sys
import time
from pathlib import Path

from dipolemedium.config import SimulationConfig, detuning_grid
from dipolemedium.dispersion import FitWindow
from dipolemedium.geometry import Cylinder, Sphere
from dipolemedium.profile import BinningSpec
from dipolemedium.runner import load_permittivity, read_table, run_dispersion, run_mie_compare

RUN_DIR = Path(os.environ.get("DIPOLEMEDIUM_ACCEPTANCE_DIR", Path(__file__).resolve().parents[1] / "acceptance_runs"))
GRID = detuning_grid(-4.0, 6.0, 0.5)
DENSITIES = (0.1, 0.2, 0.3, 0.4)


def dilute_config() -> SimulationConfig:
    return SimulationConfig(
        shape=Cylinder(20.0, 8.0),
        density=0.01,
        detunings=(-1.0, 0.0, 1.0),
        realizations=100,
        master_seed=5,
        binning=BinningSpec(0.25, 4.0, 20.0),
        window=FitWindow(2.0, 18.0),
        workers=1,
    )


def dense_config(density: float) -> SimulationConfig:
    return SimulationConfig(
        shape=Cylinder(10.0, 12.0),
        density=density,
        detunings=GRID,
        realizations=200,
        master_seed=11,
        binning=BinningSpec(0.25, 6.0, 10.0),
        window=FitWindow(2.0, 8.0),
        workers=1,
    )


def sphere_config() -> SimulationConfig:
    return SimulationConfig(
        shape=Sphere(8.0),
        density=0.2,
        detunings=GRID,
        realizations=300,
        master_seed=13,
        mode="mie-compare",
        workers=1,
    )


RUNS = {
    "dilute": dilute_config,
    "dense_0.1": lambda: dense_config(0.1),
    "dense_0.2": lambda: dense_config(0.2),
    "sphere": sphere_config,
    "dense_0.3": lambda: dense_config(0.3),
    "dense_0.4": lambda: dense_config(0.4),
}


def run_dir(name: str) -> Path:
    return RUN_DIR / name


def _progress(name):
    t0 = time.monotonic()

    def report(done, total):
        logging.getLogger("acceptance").info("%s: %d/%d realizations (%.0f s)", name, done, total, time.monotonic() - t0)

    return report


def ensure(name: str) -> list[dict]:
    """Rows of run ``name``, computing whatever is not checkpointed yet."""
    config = RUNS[name]()
    out = run_dir(name)
    if name == "sphere":
        table = ensure_table("dense_0.2")
        return run_mie_compare(config, load_permittivity(table), out, progress=_progress(name))
    return run_dispersion(config, out, progress=_progress(name))


def ensure_table(name: str) -> Path:
    ensure(name)
    return run_dir(name) / ("mie_compare.csv" if name == "sphere" else "dispersion.csv")


def load_rows(name: str) -> list[dict]:
    return read_table(ensure_table(name))


if __name__ == "__main__":
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")
    for name in sys.argv[1:] or list(RUNS):
        t0 = time.monotonic()
        ensure(name)
        logging.getLogger("acceptance").info("%s finished in %.0f s", name, time.monotonic() - t0)
