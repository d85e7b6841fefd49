"""Counter-based random streams.

A stream is addressed by ``(seed, subsystem, counter)``. Each address maps to
an independent Philox generator, so a block of samples draws the same numbers
no matter which worker evaluates it or in which order.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1

# subsystem ids; part of the Philox key
MEASURE = 1
INEQUALITIES = 2
CHANNEL = 3
PERTURB = 4
ORBITS = 5
MAPS = 6


def stream(seed: int, subsystem: int, counter: int) -> np.random.Generator:
    """Return the generator for one ``(seed, subsystem, counter)`` address."""
    if seed < 0 or counter < 0:
        raise ValueError("seed and counter must be non-negative")
    key = (int(seed) & MASK64) | (int(subsystem) << 64)
    bitgen = np.random.Philox(key=key, counter=[0, 0, int(counter) & MASK64, 0])
    return np.random.Generator(bitgen)


def uniform_ball(rng: np.random.Generator, n: int, dim: int, radius: float) -> np.ndarray:
    """Draw ``n`` points uniformly from the open ``dim``-ball of given radius."""
    direction = rng.standard_normal((n, dim))
    norms = np.linalg.norm(direction, axis=1)
    # Gaussian rows of exactly zero norm have probability zero but cost nothing to guard
    bad = norms == 0.0
    while np.any(bad):
        direction[bad] = rng.standard_normal((int(bad.sum()), dim))
        norms = np.linalg.norm(direction, axis=1)
        bad = norms == 0.0
    # 1 - U lies in (0, 1], so no sample sits exactly at the origin
    radii = radius * (1.0 - rng.random(n)) ** (1.0 / dim)
    return direction * (radii / norms)[:, None]


def uniform_sphere(rng: np.random.Generator, n: int, dim: int) -> np.ndarray:
    direction = rng.standard_normal((n, dim))
    return direction / np.linalg.norm(direction, axis=1)[:, None]
