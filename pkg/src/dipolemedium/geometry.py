"""Cloud shapes and random atomic configurations.

Lengths are in units of the inverse resonant wavenumber. A cylinder spans
``0 <= z <= length`` with its axis on z; a sphere is centred on the origin.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import ConfigError, PlacementError

#: Attempts allowed per atom before rejection sampling gives up.
DEFAULT_ATTEMPTS_PER_ATOM = 1000


@dataclass(frozen=True)
class Cylinder:
    length: float
    radius: float

    def __post_init__(self):
        if not (self.length > 0 and self.radius > 0):
            raise ConfigError(f"cylinder needs L > 0 and R > 0, got {self}")

    @property
    def volume(self) -> float:
        return np.pi * self.radius**2 * self.length

    def contains(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(points)
        rho2 = points[:, 0] ** 2 + points[:, 1] ** 2
        z = points[:, 2]
        return (rho2 <= self.radius**2) & (z >= 0) & (z <= self.length)

    def sample_uniform(self, rng: np.random.Generator, size: int) -> np.ndarray:
        # sqrt of a uniform variate gives a uniform disc
        rho = self.radius * np.sqrt(rng.random(size))
        phi = 2 * np.pi * rng.random(size)
        z = self.length * rng.random(size)
        return np.column_stack([rho * np.cos(phi), rho * np.sin(phi), z])


@dataclass(frozen=True)
class Sphere:
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ConfigError(f"sphere needs R > 0, got {self}")

    @property
    def volume(self) -> float:
        return 4.0 / 3.0 * np.pi * self.radius**3

    def contains(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(points)
        return np.einsum("ij,ij->i", points, points) <= self.radius**2

    def sample_uniform(self, rng: np.random.Generator, size: int) -> np.ndarray:
        direction = rng.standard_normal((size, 3))
        direction /= np.linalg.norm(direction, axis=1)[:, None]
        r = self.radius * np.cbrt(rng.random(size))
        return direction * r[:, None]


CloudShape = Union[Cylinder, Sphere]


@dataclass(frozen=True)
class CloudRealization:
    """One random draw of atom positions.

    Attributes
    ----------
    positions : ndarray, shape (N, 3)
        Atom coordinates in units of 1/k0.
    realization_seed : int
        Seed of the generator that produced ``positions``.
    """

    positions: np.ndarray
    realization_seed: int
    shape: CloudShape | None = None

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float).reshape(-1, 3)
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)

    @property
    def n_atoms(self) -> int:
        return self.positions.shape[0]


def atom_count(shape: CloudShape, density: float) -> int:
    """Number of atoms ``round(n * V)`` in a cloud of the given density."""
    if density < 0:
        raise ConfigError(f"density must be non-negative, got {density}")
    return int(np.floor(density * shape.volume + 0.5))


def realization_seed(master_seed: int, realization_index: int) -> int:
    """Derive the per-realization seed, independent of execution order."""
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(realization_index),))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def sample_realization(
    shape: CloudShape,
    density: float,
    exclusion_radius: float = 0.0,
    master_seed: int = 0,
    realization_index: int = 0,
    *,
    n_atoms: int | None = None,
    attempts_per_atom: int = DEFAULT_ATTEMPTS_PER_ATOM,
) -> CloudRealization:
    """Draw atoms uniformly inside ``shape`` with a hard-core exclusion.

    Parameters
    ----------
    shape : Cylinder or Sphere
    density : float
        Atoms per unit volume (1/k0^3 units); sets ``N = atom_count(shape, density)``
        unless ``n_atoms`` is given explicitly.
    exclusion_radius : float
        Minimum allowed pair distance. Zero draws independent uniform points.
    master_seed, realization_index : int
        Together they fix the random stream; the same pair always yields the
        same configuration.
    attempts_per_atom : int
        Rejection budget is ``attempts_per_atom * N`` proposals.

    Raises
    ------
    PlacementError
        If the budget is exhausted, which means the exclusion radius is too
        large for the requested density.
    """
    if exclusion_radius < 0:
        raise ConfigError("exclusion_radius must be >= 0")
    n = atom_count(shape, density) if n_atoms is None else int(n_atoms)
    seed = realization_seed(master_seed, realization_index)
    rng = np.random.default_rng(seed)
    if exclusion_radius == 0 or n <= 1:
        return CloudRealization(shape.sample_uniform(rng, n), seed, shape)

    budget = attempts_per_atom * n
    r2 = exclusion_radius**2
    accepted = np.empty((n, 3))
    count = 0
    attempts = 0
    batch = max(64, n // 4)
    while count < n:
        if attempts >= budget:
            raise PlacementError(
                f"placed {count}/{n} atoms after {attempts} attempts; "
                f"exclusion radius {exclusion_radius} too large for density {density}"
            )
        proposals = shape.sample_uniform(rng, min(batch, budget - attempts))
        for p in proposals:
            attempts += 1
            if count:
                d = accepted[:count] - p
                if np.einsum("ij,ij->i", d, d).min() < r2:
                    continue
            accepted[count] = p
            count += 1
            if count == n:
                break
    return CloudRealization(accepted, seed, shape)


def min_pair_distance(positions: np.ndarray) -> float:
    """Smallest pairwise distance, by brute-force scan."""
    positions = np.asarray(positions)
    if len(positions) < 2:
        return np.inf
    best = np.inf
    for i in range(len(positions) - 1):
        d = positions[i + 1 :] - positions[i]
        best = min(best, float(np.sqrt(np.einsum("ij,ij->i", d, d).min())))
    return best
