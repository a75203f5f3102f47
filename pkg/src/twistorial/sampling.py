"""Deterministic sample sets on coordinate boxes."""

from __future__ import annotations

import numpy as np

LATTICE_PER_AXIS = 5
RANDOM_POINTS = 75
DEFAULT_SEED = 20240607


def parse_box(text: str):
    """``"-1:1,-1:1,0.5:1.5"`` -> ``((-1.0, 1.0), (-1.0, 1.0), (0.5, 1.5))``."""
    out = []
    for part in text.split(","):
        lo, sep, hi = part.partition(":")
        if not sep:
            raise ValueError(f"interval {part!r} is not of the form lo:hi")
        lo, hi = float(lo), float(hi)
        if not lo <= hi:
            raise ValueError(f"empty interval {part!r}")
        out.append((lo, hi))
    return tuple(out)


def lattice(box, per_axis: int = LATTICE_PER_AXIS) -> np.ndarray:
    """Tensor lattice with ``per_axis`` points per interval, endpoints included."""
    axes = [np.linspace(lo, hi, per_axis) for lo, hi in box]
    grid = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in grid], axis=-1)


def uniform(box, n: int, seed: int = DEFAULT_SEED) -> np.ndarray:
    rng = np.random.default_rng(seed)
    lo = np.array([b[0] for b in box])
    hi = np.array([b[1] for b in box])
    return lo + (hi - lo) * rng.random((n, len(box)))


def base_samples(box, seed: int = DEFAULT_SEED, per_axis: int = LATTICE_PER_AXIS, n_random: int = RANDOM_POINTS):
    """Lattice plus seeded uniform points on a 3-dimensional box."""
    return np.vstack([lattice(box, per_axis), uniform(box, n_random, seed)])


def total_samples(box, fiber, seed: int = DEFAULT_SEED, per_axis: int = LATTICE_PER_AXIS,
                  n_random: int = RANDOM_POINTS) -> np.ndarray:
    """Samples on ``box x fiber``, shape ``(n, 4)``.

    The lattice part visits ``per_axis`` fibre levels in a Latin pattern so
    that every level is hit by a full sub-lattice of the base.
    """
    base = lattice(box, per_axis)
    idx = np.indices((per_axis,) * len(box)).reshape(len(box), -1).sum(axis=0) % per_axis
    levels = np.linspace(fiber[0], fiber[1], per_axis)
    lat = np.column_stack([base, levels[idx]])
    rnd = uniform(tuple(box) + (tuple(fiber),), n_random, seed)
    return np.vstack([lat, rnd])
