import numpy as np
import pytest

from mftorus import (
    ConicalConfig,
    ConicalPoint,
    EnergyContext,
    Grid,
    Torus,
    effective_potential_field,
)


@pytest.fixture(scope="session")
def torus():
    return Torus()


@pytest.fixture(scope="session")
def grid64(torus):
    return Grid(torus, 64)


@pytest.fixture(scope="session")
def grid128(torus):
    return Grid(torus, 128)


@pytest.fixture(scope="session")
def grid256(torus):
    return Grid(torus, 256)


def random_band_limited(grid, rng, max_mode=8, scale=1.0):
    """Random real field supported on modes |m| <= max_mode, zero mean."""
    n1, n2 = grid.shape
    c = np.zeros((n1, n2), dtype=complex)
    for m1 in range(-max_mode, max_mode + 1):
        for m2 in range(-max_mode, max_mode + 1):
            if m1 == 0 and m2 == 0:
                continue
            amp = rng.normal() + 1j * rng.normal()
            c[m1 % n1, m2 % n2] += amp
            c[(-m1) % n1, (-m2) % n2] += np.conj(amp)
    vals = np.real(np.fft.ifft2(c)) * (n1 * n2) / (2 * max_mode + 1) ** 2
    vals *= scale / max(1.0, np.max(np.abs(vals)))
    return grid.field(vals - vals.mean())


def cos_potential(grid):
    return grid.field(np.cos(2 * np.pi * grid.x1 / grid.torus.L1))


@pytest.fixture(scope="session")
def cone_half():
    """One cone of order 1/2 in the positive region of the cosine potential."""
    return ConicalConfig(points=(ConicalPoint(0.0, 0.5, 0.5),), ell=1)


def standard_context(grid, lam, cones=None):
    """Cosine potential with the standard half-order cone."""
    cones = cones if cones is not None else ConicalConfig(
        points=(ConicalPoint(0.0, 0.5, 0.5),), ell=1
    )
    kt = effective_potential_field(cones, cos_potential(grid), grid)
    return EnergyContext(grid=grid, lam=lam, weight=kt, cones=cones)


@pytest.fixture(scope="session")
def ctx_4pi_64(grid64):
    return standard_context(grid64, 4 * np.pi)


@pytest.fixture(scope="session")
def ctx_4pi_256(grid256):
    return standard_context(grid256, 4 * np.pi)


@pytest.fixture(scope="session")
def ctx_10pi_256(grid256):
    return standard_context(grid256, 10 * np.pi)
