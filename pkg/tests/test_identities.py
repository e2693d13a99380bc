from __future__ import annotations

import numpy as np
import pytest

from conftest import four_normalizations
from relgeo.catalog import CATALOG_NAMES, get_surface, sphere3
from relgeo.chart import (
    EQUIAFFINE,
    EUCLIDEAN,
    GridSpec,
    SurfaceChart,
    parse_normalization,
    sample_grid,
    scaled_equiaffine,
)
from relgeo.expr import parse_expression, to_string
from relgeo.identities import (
    CONDITIONAL,
    IDENTITY_IDS,
    INEQUALITIES,
    DimensionMismatch,
    SignatureViolation,
    classify_surface,
    evaluate_identity,
    identity_residual,
    pick_inequality_check,
    proportionality_test,
    run_identities,
)
from relgeo.relative import compute_bundle

G17 = GridSpec.uniform(17, 2)
ELLIPSOID = get_surface("ellipsoid:1,1,2").chart
MONKEY = get_surface("monkey-saddle").chart


def applicable(name):
    entry = get_surface(name)
    ids = [i for i in IDENTITY_IDS if i not in CONDITIONAL]
    if entry.curvature_sign < 0:
        ids.remove("EQ22")
    return ids


@pytest.mark.parametrize("name", CATALOG_NAMES)
def test_every_identity_on_every_normalization(name):
    chart = get_surface(name).chart
    for norm in four_normalizations(chart):
        for r in run_identities(applicable(name), chart, norm, G17):
            assert r.passed, (r.identity, norm.describe(), r.max_residual)
            limit = 1e-9 if r.identity in INEQUALITIES else 1e-7
            assert r.max_residual < limit


def test_egregium_example_custom_support():
    norm = parse_normalization("equiaffine*exp(0.1*sin(u)*cos(v))", ELLIPSOID.params)
    r = evaluate_identity("EQ7", ELLIPSOID, norm, G17, 1e-7)
    assert r.passed and r.max_residual < 1e-7
    assert r.grid == "17x17" and r.surface == "ellipsoid:1,1,2"


def test_normalization_independence_pointwise(catalog_chart):
    pts = sample_grid(catalog_chart, G17)
    values = []
    for norm in four_normalizations(catalog_chart):
        b = compute_bundle(catalog_chart, norm, pts)
        values.append((3 * (b.S - b.H) + (b.n - 1) * b.J) / b.q)
    values = np.array(values)
    spread = np.max(values, axis=0) - np.min(values, axis=0)
    assert np.max(spread / (1 + np.max(np.abs(values), axis=0))) < 1e-7


def test_independence_functional_vanishes_on_ellipsoid():
    for norm in four_normalizations(ELLIPSOID):
        b = compute_bundle(ELLIPSOID, norm, sample_grid(ELLIPSOID, G17))
        functional = (3 * (b.S - b.H) + (b.n - 1) * b.J) / b.q
        assert np.max(np.abs(functional)) < 1e-12


def test_affine_gauss_identity_trivial_on_sphere():
    b = compute_bundle(get_surface("sphere").chart, EUCLIDEAN, sample_grid(get_surface("sphere").chart, G17))
    assert np.max(identity_residual("EQ25", b)) < 1e-13
    np.testing.assert_allclose(b.S_aff / b.q_aff, b.S_II, rtol=1e-12)


@pytest.mark.parametrize("name", ["sphere", "ellipsoid:1,1,2", "elliptic-paraboloid",
                                  "hyperbolic-paraboloid", "helicoid"])
def test_pick_tchebychev_relations_hold_where_affine_pick_vanishes(name):
    chart = get_surface(name).chart
    for norm in four_normalizations(chart):
        for r in run_identities(["EQ20", "EQ21A", "EQ21B"], chart, norm, G17):
            assert r.passed


def test_pick_tchebychev_relations_fail_on_monkey_saddle():
    b = compute_bundle(MONKEY, EUCLIDEAN, np.array([[0.55, 0.3]]))
    for ident in ("EQ21A", "EQ21B"):
        assert identity_residual(ident, b)[0] > 10 * 1e-7
    assert identity_residual("EQ20", b)[0] < 1e-12
    assert not evaluate_identity("EQ21A", MONKEY, EUCLIDEAN, G17).passed


def test_precondition_errors():
    with pytest.raises(SignatureViolation):
        evaluate_identity("EQ22", MONKEY, EUCLIDEAN, G17)
    s3 = sphere3().chart
    with pytest.raises(DimensionMismatch):
        evaluate_identity("EQ24", s3, EUCLIDEAN, GridSpec.uniform(5, 3))
    with pytest.raises(KeyError):
        evaluate_identity("EQ99", MONKEY, EUCLIDEAN, G17)


def test_three_sphere_identities():
    s3 = sphere3().chart
    spec = GridSpec.uniform(7, 3)
    ids = [i for i in IDENTITY_IDS if i not in ("EQ24", "EQ25")]
    for norm in (EUCLIDEAN, EQUIAFFINE, scaled_equiaffine(2.0)):
        assert all(r.passed for r in run_identities(ids, s3, norm, spec))


# ---------------------------------------------------------------------------
# classification

TRUTH = {
    "sphere": "Hyperquadric",
    "ellipsoid:1,1,2": "Hyperquadric",
    "elliptic-paraboloid": "Hyperquadric",
    "hyperbolic-paraboloid": "Ruled",
    "helicoid": "Ruled",
    "monkey-saddle": "Neither",
    "convex-nonquadric": "Neither",
}


def swapped(chart: SurfaceChart) -> SurfaceChart:
    """Reparametrize (u, v) -> (v, u)."""
    return SurfaceChart(chart.name + "/swapped", tuple(reversed(chart.params)), chart.components,
                        tuple(reversed(chart.domain)), chart.guards, chart.orientation)


def moved(chart: SurfaceChart, seed: int) -> SurfaceChart:
    """Apply a seeded rotation plus translation to the chart components."""
    rng = np.random.default_rng(seed)
    Q, R = np.linalg.qr(rng.normal(size=(3, 3)))
    Q = Q * np.sign(np.diag(R))
    if np.linalg.det(Q) < 0:
        Q[:, 0] = -Q[:, 0]
    t = rng.normal(size=3)
    comps = [to_string(c) for c in chart.components]
    new = []
    for i in range(3):
        terms = " + ".join(f"({float(Q[i, j])!r})*({comps[j]})" for j in range(3))
        new.append(parse_expression(f"{terms} + ({float(t[i])!r})", chart.params))
    return SurfaceChart(chart.name + "/moved", chart.params, tuple(new), chart.domain,
                        chart.guards, chart.orientation)


@pytest.mark.parametrize("name", CATALOG_NAMES)
def test_classification_ground_truth(name):
    v = classify_surface(get_surface(name).chart, G17)
    assert v.verdict == TRUTH[name]
    if v.verdict == "Neither":
        assert v.sup_abs_J_aff > 10 * v.threshold
    if name == "hyperbolic-paraboloid":
        assert v.sup_abs_J_aff < v.threshold


@pytest.mark.parametrize("name", CATALOG_NAMES)
def test_classification_invariant_under_swap_and_motion(name):
    chart = get_surface(name).chart
    assert classify_surface(swapped(chart), G17).verdict == TRUTH[name]
    for seed in (1, 2):
        assert classify_surface(moved(chart, seed), G17).verdict == TRUTH[name]


def test_mixed_curvature_is_indeterminate():
    params = ("u", "v")
    chart = SurfaceChart("cubic", params, tuple(parse_expression(c, params) for c in ("u", "v", "u^3 + v^2")),
                         ((-1.0, 1.0), (-1.0, 1.0)))
    v = classify_surface(chart, GridSpec.uniform(16, 2))
    assert v.verdict == "Indeterminate" and v.curvature_sign == "mixed"


def test_three_sphere_is_hyperquadric():
    v = classify_surface(sphere3().chart, GridSpec.uniform(7, 3))
    assert v.verdict == "Hyperquadric" and v.sup_abs_J_aff < 1e-9


# ---------------------------------------------------------------------------
# proportionality and the Pick inequality


def test_proportionality_examples():
    assert proportionality_test(ELLIPSOID, scaled_equiaffine(3.0), G17).proportional
    assert proportionality_test(get_surface("sphere").chart, EUCLIDEAN, G17).proportional
    norm = parse_normalization("equiaffine*exp(0.1*sin(u))", ELLIPSOID.params)
    res = proportionality_test(ELLIPSOID, norm, G17)
    assert not res.proportional
    u = sample_grid(ELLIPSOID, G17)[:, 0]
    assert res.deviation == pytest.approx(np.std(np.exp(0.1 * np.sin(u)), ddof=1), rel=1e-10)


def test_pick_inequality_examples():
    r = pick_inequality_check(ELLIPSOID, EQUIAFFINE, G17)
    assert r.passed and abs(r.details["min_difference"]) < 1e-12
    norm = parse_normalization("equiaffine*exp(0.1*sin(u))", ELLIPSOID.params)
    r = pick_inequality_check(ELLIPSOID, norm, G17)
    assert r.passed and r.details["closed_form_residual"] < 1e-6
    b = compute_bundle(ELLIPSOID, norm, sample_grid(ELLIPSOID, G17))
    diff = b.J / b.q - b.J_aff / b.q_aff
    moving = np.abs(np.cos(b.points[:, 0])) > 1e-3
    assert np.all(diff[moving] > 0)
    r = pick_inequality_check(get_surface("elliptic-paraboloid").chart, EUCLIDEAN, G17)
    assert r.passed and r.details["min_difference"] >= -1e-9


def test_pick_inequality_on_positive_surfaces():
    for name in ("sphere", "ellipsoid:1,1,2", "elliptic-paraboloid", "convex-nonquadric"):
        chart = get_surface(name).chart
        for norm in four_normalizations(chart):
            r = pick_inequality_check(chart, norm, G17)
            assert r.passed, (name, norm.describe(), r.details)
