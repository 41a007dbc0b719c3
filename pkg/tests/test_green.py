import numpy as np
import pytest

from mftorus import Grid, Torus, integrate, solve_poisson
from mftorus.errors import CoincidentPoints


@pytest.fixture(scope="module")
def green(torus):
    return torus.green


def test_symmetry(green):
    rng = np.random.default_rng(21)
    xs = rng.uniform(0, 1, (100, 2))
    ys = rng.uniform(0, 1, (100, 2))
    a = green.at_displacement(xs[:, 0] - ys[:, 0], xs[:, 1] - ys[:, 1])
    b = green.at_displacement(ys[:, 0] - xs[:, 0], ys[:, 1] - xs[:, 1])
    assert np.max(np.abs(a - b)) < 1e-10


def test_coincident_points_rejected(green):
    with pytest.raises(CoincidentPoints):
        green(np.array([0.3, 0.4]), np.array([0.3, 0.4]))


def test_grid_representation_mean_zero(green, torus):
    rng = np.random.default_rng(22)
    g = Grid(torus, 256)
    for _ in range(3):
        y = rng.uniform(0, 1, 2)
        f = green.field(g, y)
        assert abs(integrate(f)) < 1e-12


def test_pointwise_sampling_mean_small(green, torus):
    # quadrature of the log-singular pointwise kernel carries an intrinsic
    # aliasing wobble of order 1/k_alias^2 (about 1e-6 at n = 256)
    g = Grid(torus, 256)
    y = np.array([0.3137, 0.7251])
    vals = green.at_displacement(
        (g.x1 - y[0]).ravel(), (g.x2 - y[1]).ravel()
    )
    mean = g.weight * float(vals.sum())
    assert abs(mean) < 5e-6


def test_pointwise_value_against_mollified_delta_oracle(green, torus):
    # independent oracle: solve the mollified point-source problem at high
    # resolution with its own Gaussian width, then undo the mollification;
    # away from the pole the correction is the exact constant eps^2/(2 area)
    n = 1024
    eps = 8.0 / n
    g = Grid(torus, n)
    d = torus.distance(g.x1, g.x2)
    src = np.exp(-(d**2) / (2 * eps**2)) / (2 * np.pi * eps**2)
    u = solve_poisson(g.field(src - src.mean()))
    oracle = u.values[n // 4, 0] - eps**2 / (2 * torus.area)
    value = green(np.array([0.25, 0.0]), np.array([0.0, 0.0]))
    assert value == pytest.approx(oracle, abs=1e-6)


def test_theta_function_oracle(green):
    # independent closed form: differences of the Green function equal
    # differences of -(1/2pi) log |theta_1(pi z, q)| + z2^2/2 on the unit
    # torus (the normalizing constant cancels in differences)
    q = np.exp(-np.pi)

    def theta1(z):
        total = 0j
        for n in range(40):
            total += (-1) ** n * q ** ((n + 0.5) ** 2) * np.sin((2 * n + 1) * z)
        return 2 * total

    def closed(z1, z2):
        w = np.pi * (z1 + 1j * z2)
        return -np.log(np.abs(theta1(w))) / (2 * np.pi) + z2**2 / 2.0

    pts = [(0.25, 0.0), (0.13, 0.21), (0.4, 0.45), (0.31, 0.0), (0.0, 0.37)]
    offsets = [
        green(np.array([a, b]), np.array([0.0, 0.0])) - closed(a, b)
        for (a, b) in pts
    ]
    assert np.ptp(offsets) < 1e-9  # all differ by the same constant


def test_regular_part_continuous_across_pole(green):
    ds = np.geomspace(1e-6, 1e-3, 24)
    direction = np.array([np.cos(0.7), np.sin(0.7)])
    h = [
        green.regular_part(np.array([d * direction[0], d * direction[1]]),
                           np.array([0.0, 0.0]))
        for d in ds
    ]
    assert np.ptp(h) <= 1e-4
    # and the value at the pole itself is finite
    at_pole = green.regular_part(np.array([0.0, 0.0]), np.array([0.0, 0.0]))
    assert np.isfinite(at_pole)
    assert abs(at_pole - h[0]) < 1e-4


def test_log_split_consistency(green, torus):
    # G + (1/2pi) log d must equal the regular part everywhere
    rng = np.random.default_rng(23)
    z = rng.uniform(0.01, 0.49, (50, 2))
    G = green.at_displacement(z[:, 0], z[:, 1])
    H = green.regular_part(
        np.stack([z[:, 0], z[:, 1]], axis=-1), np.zeros((50, 2))
    )
    d = torus.distance(z[:, 0], z[:, 1])
    assert np.max(np.abs(G + np.log(d) / (2 * np.pi) - H)) < 1e-12


def test_rectangular_torus_green_mean_zero():
    t = Torus(2.0, 1.0)
    g = Grid(t, 128, 64)
    f = t.green.field(g, (0.7, 0.3))
    assert abs(integrate(f)) < 1e-12
