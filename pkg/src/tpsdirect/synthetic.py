"""Seeded synthetic datasets standing in for the Meuse and turkey-survey data."""

from __future__ import annotations

import numpy as np

GAUSSIAN_SITES = 150
GAUSSIAN_NOISE_SD = 0.3
TURKEY_SITES = 114
TURKEY_LATTICE = (12, 10)
TURKEY_THETA2 = -0.3
TURKEY_DELTA0 = 0.5
TURKEY_OFFSET = -1.0
TURKEY_MEAN_TRIALS = 30


def smooth_surface(xy):
    xy = np.atleast_2d(xy)
    return np.sin(2 * np.pi * xy[:, 0]) * np.cos(2 * np.pi * xy[:, 1])


def gaussian_dataset(seed, n_sites: int = GAUSSIAN_SITES) -> dict:
    """Uniform sites on the unit square, smooth truth plus N(0, 0.3^2) noise."""
    rng = np.random.default_rng(seed)
    xy = rng.uniform(size=(n_sites, 2))
    truth = smooth_surface(xy)
    value = truth + GAUSSIAN_NOISE_SD * rng.standard_normal(n_sites)
    return {"x": xy[:, 0], "y": xy[:, 1], "value": value, "truth": truth}


def jittered_lattice(n_sites, shape, rng, jitter=0.3):
    nx, ny = shape
    gx, gy = np.meshgrid((np.arange(nx) + 0.5) / nx, (np.arange(ny) + 0.5) / ny)
    pts = np.column_stack([gx.ravel(), gy.ravel()])[:n_sites]
    return pts + rng.uniform(-jitter, jitter, pts.shape) / np.array([nx, ny])


def turkey_dataset(seed, n_sites: int = TURKEY_SITES, delta0: float = TURKEY_DELTA0) -> dict:
    """Two-week binomial panel on jittered-lattice centroids.

    Z is the smooth test surface shifted to a ~27% baseline success rate,
    week 2 is offset by theta2 = -0.3, trials are Poisson(30) + 1.
    """
    rng = np.random.default_rng(seed)
    xy = jittered_lattice(n_sites, TURKEY_LATTICE, rng)
    z = smooth_surface(xy) + TURKEY_OFFSET
    theta = np.array([0.0, TURKEY_THETA2])
    nu = z[:, None] + theta + np.sqrt(delta0) * rng.standard_normal((n_sites, 2))
    trials = rng.poisson(TURKEY_MEAN_TRIALS, size=(n_sites, 2)) + 1
    y = rng.binomial(trials, 1.0 / (1.0 + np.exp(-nu)))
    return {
        "x": xy[:, 0],
        "y": xy[:, 1],
        "y1": y[:, 0],
        "n1": trials[:, 0],
        "y2": y[:, 1],
        "n2": trials[:, 1],
        "Z_true": z,
    }
