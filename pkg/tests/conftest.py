import math

import numpy as np
import pytest

from miura_lab.grid import Field, make_grid


@pytest.fixture(scope="session")
def grid50():
    return make_grid(50.0, 2048)


@pytest.fixture(scope="session")
def grid_small():
    return make_grid(50.0, 512)


def band_limited_field(grid, seed, n_modes=10, amplitude=0.1, envelope=None, center=0.0):
    """Seeded trigonometric sample, optionally confined by a gaussian envelope."""
    rng = np.random.default_rng(seed)
    x = grid.nodes
    L = grid.half_length
    wave = np.zeros(grid.point_count)
    coeffs = rng.standard_normal(n_modes) + 1j * rng.standard_normal(n_modes)
    for m, a in enumerate(coeffs, start=1):
        wave += np.real(a * np.exp(1j * math.pi * m * (x + L) / L))
    if envelope is not None:
        wave *= np.exp(-(((x - center) / envelope) ** 2))
    return Field(grid, amplitude * wave / np.max(np.abs(wave)))


def l2_norm(field):
    return math.sqrt(field.grid.spacing * np.dot(field.samples, field.samples))
