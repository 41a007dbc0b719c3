import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mftorus import (
    ConicalConfig,
    ConicalPoint,
    Grid,
    Potential,
    Torus,
    classify_sign_regions,
    critical_set,
    geometric_lambda,
    j_lambda,
    singular_weight,
)
from mftorus.errors import (
    CoincidentPoints,
    HypothesisViolation,
    Overflow,
    ResolutionTooCoarse,
)
from mftorus.singular import effective_potential_at

from conftest import cos_potential


def test_cone_order_validated():
    with pytest.raises(ValueError):
        ConicalPoint(0.0, 0.0, -1.0)


def test_weight_empty_config(torus):
    cfg = ConicalConfig()
    assert singular_weight(cfg, torus, 0.3, 0.4) == 0.0


def test_weight_single_point_is_scaled_green(torus):
    cfg = ConicalConfig(points=(ConicalPoint(0.2, 0.7, 1.0),), ell=1)
    x = np.array([0.6, 0.1])
    expect = 4 * np.pi * torus.green(x, np.array([0.2, 0.7]))
    assert singular_weight(cfg, torus, 0.6, 0.1) == pytest.approx(expect, rel=1e-12)


def test_weight_coincident_point_rejected(torus):
    cfg = ConicalConfig(points=(ConicalPoint(0.2, 0.7, 1.0),), ell=1)
    with pytest.raises(CoincidentPoints):
        singular_weight(cfg, torus, 0.2, 0.7)


def test_weight_log_singularity_is_removable(torus):
    # h - 2 alpha log(1/d) must stay bounded along a ray into the cone point
    alpha = 0.7
    cfg = ConicalConfig(points=(ConicalPoint(0.0, 0.0, alpha),), ell=1)
    ds = np.geomspace(1e-6, 1e-2, 30)
    h = singular_weight(cfg, torus, ds, 0.0 * ds)
    remainder = h - 2 * alpha * np.log(1.0 / ds)
    assert np.all(np.isfinite(remainder))
    assert np.ptp(remainder) < 1e-3
    # and the limit value is fixed by the regular part at the point
    expect = 4 * np.pi * alpha * torus.green.regular_part(
        np.array([0.0, 0.0]), np.array([0.0, 0.0])
    )
    assert remainder[0] == pytest.approx(expect, abs=1e-3)


def test_effective_potential_no_cones_is_identity(torus):
    cfg = ConicalConfig()
    vals = effective_potential_at(cfg, torus, lambda a, b: np.cos(a), 0.5, 0.2)
    assert vals == pytest.approx(np.cos(0.5))


def test_effective_potential_vanishing_rate(torus):
    # with a single order-1 cone and K = 1 nearby, the ratio to d^2 stays
    # pinched between positive constants
    cfg = ConicalConfig(points=(ConicalPoint(0.0, 0.0, 1.0),), ell=1)
    ds = np.geomspace(1e-4, 1e-2, 20)
    kt = effective_potential_at(cfg, torus, lambda a, b: np.ones_like(a), ds, 0.0 * ds)
    ratio = kt / ds**2
    assert np.all(ratio > 0)
    assert ratio.max() / ratio.min() < 1.05  # continuity of the regular part


def test_effective_potential_zero_at_positive_cone(torus):
    cfg = ConicalConfig(points=(ConicalPoint(0.25, 0.25, 0.8),), ell=1)
    v = effective_potential_at(
        cfg, torus, lambda a, b: np.ones_like(a), 0.25, 0.25
    )
    assert v == 0.0


def test_effective_potential_negative_order_overflows(torus):
    cfg = ConicalConfig(points=(ConicalPoint(0.25, 0.25, -0.5),), ell=0)
    with pytest.raises(Overflow):
        effective_potential_at(cfg, torus, lambda a, b: np.ones_like(a), 0.25, 0.25)


# ---------------------------------------------------------------------------
# critical set


def test_critical_set_no_orders():
    got = critical_set([], 40 * np.pi)
    assert np.allclose(got, 8 * np.pi * np.arange(1, 6))


def test_critical_set_order_one_collapses():
    got = critical_set([1.0], 40 * np.pi)
    # 8 pi (1 + 1) = 16 pi duplicates the r = 2 pure term
    assert np.allclose(got, 8 * np.pi * np.arange(1, 6))


def test_critical_set_fractional_order():
    got = critical_set([0.3], 24 * np.pi)
    assert np.allclose(got, np.pi * np.array([8, 10.4, 16, 18.4, 24]))


@settings(max_examples=50, deadline=None)
@given(
    alphas=st.lists(st.floats(0.05, 3.0), max_size=3),
    lam_mult=st.floats(1.0, 6.0),
)
def test_critical_set_sorted_and_contains_8pi(alphas, lam_mult):
    lam_max = 8 * np.pi * lam_mult
    got = critical_set(alphas, lam_max)
    assert np.all(np.diff(got) > 1e-9)
    assert np.all(got <= lam_max + 1e-9)
    assert np.min(np.abs(got - 8 * np.pi)) < 1e-9


# ---------------------------------------------------------------------------
# forbidden-point set and the total-curvature coupling


def _cfg(orders):
    pts = tuple(ConicalPoint(0.1 * (i + 1), 0.5, a) for i, a in enumerate(orders))
    return ConicalConfig(points=pts, ell=len(pts))


def test_j_lambda_both_points():
    assert len(j_lambda(_cfg([0.3, 0.5]), 10 * np.pi)) == 2


def test_j_lambda_empty():
    assert j_lambda(_cfg([0.3, 0.5]), 12.5 * np.pi) == ()


def test_j_lambda_strict_inequality():
    assert j_lambda(_cfg([0.0]), 8 * np.pi) == ()


def test_j_lambda_antitone():
    cfg = _cfg([0.2, 0.6, 1.4])
    lams = np.linspace(8.5 * np.pi, 20 * np.pi, 9)
    sets = [set(j_lambda(cfg, lam)) for lam in lams]
    for small, large in zip(sets, sets[1:]):
        assert large <= small


def test_geometric_lambda():
    assert geometric_lambda(0, [1.0]) == pytest.approx(4 * np.pi)
    assert geometric_lambda(0, [1.0, 1.0, 1.0]) == pytest.approx(12 * np.pi)
    assert geometric_lambda(0, [0.5, 0.7]) == pytest.approx(4.8 * np.pi)


# ---------------------------------------------------------------------------
# sign-region classification


def test_classify_cosine_band(grid256):
    pot = Potential(field=cos_potential(grid256))
    regions = classify_sign_regions(pot)
    topo = regions.topology
    # one band wrapping the torus: annulus, chi = 0, two boundary curves
    assert (topo.N, topo.M, topo.g) == (1, 0, (1,))
    chi, b, genus, g, contractible = regions.components[0]
    assert (chi, b, genus, g, contractible) == (0, 2, 0, 1, False)


def test_classify_single_bump(grid256):
    def f(x1, x2):
        t = grid256.torus
        return np.exp(-50 * t.distance(x1 - 0.5, x2 - 0.5) ** 2) - 0.5

    pot = Potential(field=grid256.field_from_function(f))
    topo = classify_sign_regions(pot).topology
    assert (topo.N, topo.M) == (0, 1)


def test_classify_checkerboard_plus_offset_refinement_oracle(torus):
    # the derived check: component counts and bouquet sizes agree with the
    # same computation at doubled resolution
    def f(x1, x2):
        return np.cos(2 * np.pi * x1) * np.cos(2 * np.pi * x2) + 0.1

    coarse = classify_sign_regions(
        Potential(field=Grid(torus, 128).field_from_function(f))
    ).topology
    fine = classify_sign_regions(
        Potential(field=Grid(torus, 256).field_from_function(f))
    ).topology
    assert (coarse.N, coarse.M, tuple(sorted(coarse.g))) == (
        fine.N,
        fine.M,
        tuple(sorted(fine.g)),
    )


def test_classify_refinement_stability_band(torus):
    for n in (64, 128):
        topo = classify_sign_regions(
            Potential(field=cos_potential(Grid(torus, n)))
        ).topology
        assert (topo.N, topo.M, topo.g) == (1, 0, (1,))


def test_classify_bouquet_consistency(grid256):
    def f(x1, x2):
        t = grid256.torus
        return 0.4 - np.minimum(t.distance(x1 - 0.5, x2 - 0.5), 0.45)

    # disk of radius 0.4 minus nothing: contractible; complement of a disk
    # on the torus: genus 1 with one boundary -> bouquet of two circles
    pot = Potential(field=grid256.field_from_function(f))
    regions = classify_sign_regions(pot)
    assert regions.topology.N == 0 and regions.topology.M == 1
    pot_neg = Potential(field=grid256.field_from_function(lambda a, b: -f(a, b)))
    regions_neg = classify_sign_regions(pot_neg)
    assert regions_neg.topology.N == 1 and regions_neg.topology.g == (2,)


def test_classify_labels_mark_components(grid256):
    pot = Potential(field=cos_potential(grid256))
    regions = classify_sign_regions(pot)
    assert set(np.unique(regions.labels)) == {0, 1}
    assert np.all((regions.labels > 0) == (pot.field.values > 0))


def test_nondegenerate_consistency(grid256):
    # every non-contractible component has bouquet size >= 1
    def f(x1, x2):
        return np.cos(2 * np.pi * x1) * np.cos(2 * np.pi * x2) + 0.1

    regions = classify_sign_regions(Potential(field=grid256.field_from_function(f)))
    for chi, b, genus, g, contractible in regions.components:
        assert contractible == (g == 0)
        if not contractible:
            assert g >= 1


def test_h1_validation_rejects_degenerate_nodal_line(grid256):
    # zero set with a saddle crossing: gradient vanishes on the nodal line
    def f(x1, x2):
        return np.cos(2 * np.pi * x1) * np.cos(2 * np.pi * x2)

    pot = Potential(field=grid256.field_from_function(f))
    with pytest.raises(HypothesisViolation):
        pot.validate()


def test_h1_validation_accepts_cosine(grid256):
    pot = Potential(field=cos_potential(grid256))
    beta = pot.validate()
    assert beta > 0


def test_h2_validation_rejects_cone_on_nodal_line(grid256):
    pot = Potential(field=cos_potential(grid256))
    cfg = ConicalConfig(points=(ConicalPoint(0.25, 0.5, 0.5),), ell=1)
    with pytest.raises(HypothesisViolation):
        pot.validate(cfg)


def test_sign_change_required(grid256):
    pot = Potential(field=grid256.field(np.ones(grid256.shape)))
    with pytest.raises(HypothesisViolation):
        pot.validate()


def test_tangency_rejected(torus):
    # two blocks meeting at exactly one pixel corner: the boundary passes
    # twice through that corner
    g = Grid(torus, 64)
    vals = -np.ones(g.shape)
    vals[10:20, 10:20] = 1.0
    vals[20:30, 20:30] = 1.0
    pot = Potential(field=g.field(vals), band_tol=0.5)
    with pytest.raises(ResolutionTooCoarse):
        classify_sign_regions(pot)


def test_thin_component_rejected(torus):
    g = Grid(torus, 64)
    vals = -np.ones(g.shape)
    vals[10:12, :] = 1.0  # two-cell band
    pot = Potential(field=g.field(vals), band_tol=0.5)
    with pytest.raises(ResolutionTooCoarse):
        classify_sign_regions(pot)
