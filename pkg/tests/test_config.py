import numpy as np
import pytest

from mftorus.config import make_potential_sampler, parse_config_text
from mftorus.errors import ConfigError
from mftorus.surface import Torus

GOOD = """
[torus]
l1 = 2.0
l2 = 1.0
n1 = 128
n2 = 64

[potential]
formula = cos(2*pi*x1/2.0)   # comment after value
band_tol = 1e-3

[singular]
point = 0.1 0.5 0.5
point = 1.2 0.5 -0.25

[run]
lambda = 12.0
seed = 7
"""


def test_parse_good_config():
    cfg = parse_config_text(GOOD)
    assert (cfg.torus.L1, cfg.torus.L2) == (2.0, 1.0)
    assert (cfg.n1, cfg.n2) == (128, 64)
    assert cfg.potential_formula.startswith("cos")
    assert len(cfg.cone_rows) == 2
    assert cfg.run["lambda"] == "12.0"


def test_unknown_section_rejected():
    with pytest.raises(ConfigError, match="unknown section"):
        parse_config_text("[nope]\nx = 1\n")


def test_unknown_key_rejected_with_line():
    with pytest.raises(ConfigError, match=":3: unknown key"):
        parse_config_text("\n[torus]\nl3 = 2.0\n")


def test_duplicate_key_rejected():
    with pytest.raises(ConfigError, match="duplicate key"):
        parse_config_text("[torus]\nl1 = 1\nl1 = 2\n")


def test_entry_before_section_rejected():
    with pytest.raises(ConfigError, match="before any"):
        parse_config_text("l1 = 2\n")


def test_bad_point_row_rejected():
    with pytest.raises(ConfigError, match="x1 x2 alpha"):
        parse_config_text("[singular]\npoint = 0.1 0.2\n")


def test_both_potential_sources_rejected():
    with pytest.raises(ConfigError, match="not both"):
        parse_config_text("[potential]\nformula = x1\nfile = k.field\n")


def test_topology_override():
    cfg = parse_config_text("[topology]\nn = 2\nm = 1\ng = 1 3\n")
    assert cfg.topology_override.N == 2
    assert cfg.topology_override.g == (1, 3)


def test_formula_sampler_distance_helper():
    sampler = make_potential_sampler("exp(-4*d(0.5, 0.5)**2) - 0.5", Torus())
    x = np.array([0.5, 0.0])
    y = np.array([0.5, 0.5])
    vals = sampler(x, y)
    assert vals[0] == pytest.approx(np.exp(0.0) - 0.5)
    assert vals[1] == pytest.approx(np.exp(-4 * 0.25) - 0.5)


def test_formula_rejects_unknown_names():
    with pytest.raises(ConfigError, match="unknown name"):
        make_potential_sampler("__import__('os')", Torus())
    with pytest.raises(ConfigError, match="unknown name"):
        make_potential_sampler("open('x')", Torus())


def test_cone_split_against_potential():
    cfg = parse_config_text(
        "[torus]\nn1 = 64\n[potential]\nformula = cos(2*pi*x1)\n"
        "[singular]\npoint = 0.5 0.5 0.25\npoint = 0.0 0.0 0.5\n"
    )
    pot = cfg.potential()
    cones = cfg.cones(pot)
    # the point in the positive band comes first, split index 1
    assert cones.ell == 1
    assert cones.points[0].x1 == 0.0
    assert cones.points[1].alpha == 0.25
