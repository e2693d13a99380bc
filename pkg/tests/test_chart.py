from __future__ import annotations

import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import jet_discrepancy
from relgeo.catalog import get_surface
from relgeo.chart import (
    EQUIAFFINE,
    EUCLIDEAN,
    BoundaryTooClose,
    GridSpec,
    GuardViolation,
    Normalization,
    SurfaceChart,
    SurfaceFileError,
    finite_difference_jet,
    immersion_jet,
    load_surface_file,
    multi_indices,
    parse_normalization,
    parse_surface_definition,
    sample_grid,
    scaled_equiaffine,
    seeded_custom_normalization,
)
from relgeo.expr import ParseDiagnostic, parse_expression


def make_chart(comps, domain, guards=(), params=("u", "v"), name="test"):
    return SurfaceChart(
        name=name,
        params=params,
        components=tuple(parse_expression(c, params) for c in comps),
        domain=domain,
        guards=tuple(parse_expression(g, params) for g in guards),
    )


UNIT_BOX = ((0.0, 1.0), (0.0, 1.0))


# ---------------------------------------------------------------------------
# jets


def test_sphere_first_partials_on_equator():
    jet = immersion_jet(get_surface("sphere").chart, (math.pi / 2, 0.0), order=1)
    np.testing.assert_allclose(jet[(0,)], [0.0, 0.0, -1.0], atol=1e-15)
    np.testing.assert_allclose(jet[(1,)], [0.0, 1.0, 0.0], atol=1e-15)


def test_bilinear_mixed_partial_is_constant():
    chart = get_surface("hyperbolic-paraboloid").chart
    pts = np.array([[0.1, -0.7], [0.5, 0.5], [-0.9, 0.2]])
    jet = immersion_jet(chart, pts, order=2)
    np.testing.assert_array_equal(jet[(0, 1)], np.tile([0.0, 0.0, 1.0], (3, 1)))


def test_jet_zero_order_is_position():
    chart = get_surface("helicoid").chart
    p = (0.3, 1.2)
    np.testing.assert_allclose(immersion_jet(chart, p)[()],
                               [0.3 * math.cos(1.2), 0.3 * math.sin(1.2), 1.2])


def test_jet_symmetric_under_index_permutation():
    chart = get_surface("convex-nonquadric").chart
    jet = immersion_jet(chart, (0.3, -0.4))
    for idx in multi_indices(2, 4):
        for perm in set(itertools.permutations(idx)):
            assert np.array_equal(jet[perm], jet[idx])
    t3 = jet.tensor(3)
    for perm in itertools.permutations(range(3)):
        assert np.array_equal(np.transpose(t3, perm + (3,)), t3)


def test_guard_violation_raises():
    chart = get_surface("monkey-saddle").chart
    with pytest.raises(GuardViolation):
        immersion_jet(chart, (0.01, 0.02))


def test_fd_cubic_third_derivative():
    chart = make_chart(["u", "v", "u^3"], ((0.0, 2.0), (0.0, 2.0)))
    jet = finite_difference_jet(chart, (1.0, 1.0), order=4)
    assert abs(float(jet[(0, 0, 0)][2]) - 6.0) < 1e-6


def test_fd_constant_component_vanishes():
    chart = make_chart(["u", "v", "3"], UNIT_BOX)
    jet = finite_difference_jet(chart, (0.5, 0.5), order=4)
    for idx in multi_indices(2, 4):
        if idx:
            assert abs(float(jet[idx][2])) < 1e-10


def test_fd_sphere_second_order_agrees():
    chart = get_surface("sphere").chart
    assert jet_discrepancy(chart, (1.0, 2.0), order=2) < 1e-6


def test_fd_rejects_boundary():
    chart = get_surface("elliptic-paraboloid").chart
    with pytest.raises(BoundaryTooClose):
        finite_difference_jet(chart, (0.9999, 0.0))


@pytest.mark.parametrize("point", [(0.37, -0.52), (-0.81, 0.66)])
def test_fd_agrees_on_catalog(catalog_chart, point):
    lo = np.array([a for a, _ in catalog_chart.domain])
    hi = np.array([b for _, b in catalog_chart.domain])
    p = lo + (hi - lo) * (0.5 + 0.45 * np.array(point))
    if not catalog_chart.admissible(p[None])[0]:
        pytest.skip("sample point excluded by a guard")
    assert jet_discrepancy(catalog_chart, p) < 1e-6


@settings(max_examples=25, deadline=None)
@given(st.tuples(*[st.integers(-2, 2) for _ in range(6)]),
       st.tuples(st.floats(-0.8, 0.8), st.floats(-0.8, 0.8)))
def test_fd_agrees_on_random_polynomial_graphs(coeffs, p):
    a, b, c, d, e, f = coeffs
    z = f"{a}*u^2 + {b}*u*v + {c}*v^2 + {d}*u^3 + {e}*u^2*v^2 + {f}*v^4"
    chart = make_chart(["u", "v", z], ((-1.0, 1.0), (-1.0, 1.0)))
    assert jet_discrepancy(chart, p) < 1e-6


# ---------------------------------------------------------------------------
# grids


def test_grid_affine_placement():
    chart = make_chart(["u", "v", "u^2 + v^2"], UNIT_BOX)
    pts = sample_grid(chart, GridSpec((3, 3), margin=0.1))
    assert len(pts) == 9
    assert set(np.round(pts.ravel(), 12)) == {0.1, 0.5, 0.9}
    # row-major: first parameter varies slowest
    np.testing.assert_allclose(pts[:3, 0], 0.1)
    np.testing.assert_allclose(pts[:3, 1], [0.1, 0.5, 0.9])


def test_grid_guard_filters_origin():
    chart = get_surface("monkey-saddle").chart
    pts = sample_grid(chart, GridSpec((17, 17)))
    assert len(pts) < 289
    assert np.all(pts[:, 0] ** 2 + pts[:, 1] ** 2 > 0.01)


def test_grid_deterministic_and_sized():
    chart = get_surface("helicoid").chart
    a = sample_grid(chart, GridSpec.uniform(17, 2))
    b = sample_grid(chart, GridSpec.uniform(17, 2))
    assert len(a) == 289
    assert a.tobytes() == b.tobytes()


@pytest.mark.parametrize("counts, margin", [((2, 3), 0.05), ((3, 3), 0.0), ((3, 3), 0.5)])
def test_gridspec_validation(counts, margin):
    with pytest.raises(ValueError):
        GridSpec(counts, margin=margin)


# ---------------------------------------------------------------------------
# normalizations


def test_parse_normalization_forms():
    params = ("u", "v")
    assert parse_normalization("euclidean", params) is EUCLIDEAN
    assert parse_normalization("equiaffine", params) is EQUIAFFINE
    assert parse_normalization("equiaffine*2", params) == scaled_equiaffine(2.0)
    assert parse_normalization("equiaffine*(1+1)", params).c == 2.0
    custom = parse_normalization("q:1 + u^2", params)
    assert custom.kind == "custom" and not custom.affine_factor
    assert parse_normalization("equiaffine*exp(u)", params).affine_factor
    with pytest.raises(ParseDiagnostic):
        parse_normalization("q:1 + * u", params)
    with pytest.raises(ValueError):
        parse_normalization("blaschke", params)


def test_seeded_normalization_reproducible():
    a = seeded_custom_normalization(("u", "v"), seed=3)
    b = seeded_custom_normalization(("u", "v"), seed=3)
    assert a == b and a.describe() == "seeded-custom(3)"
    assert a != seeded_custom_normalization(("u", "v"), seed=4)


def test_normalization_proportionality_flag():
    assert EQUIAFFINE.proportional_to_affine
    assert scaled_equiaffine(3).proportional_to_affine
    assert not EUCLIDEAN.proportional_to_affine
    assert not Normalization("custom", q=parse_expression("1", ())).proportional_to_affine


# ---------------------------------------------------------------------------
# surface-definition files

SADDLE_FILE = """
# monkey saddle with the origin cut out
[surface]
n = 2
x1 = u
x2 = v
x3 = u^3 - 3*u*v^2
domain.1 = -1, 1
domain.2 = "-1,1"
guard.1 = u^2 + v^2 - 0.01

[normalization]
q = equiaffine*2.5
"""


def test_surface_file_round_trip(tmp_path):
    path = tmp_path / "saddle.surf"
    path.write_text(SADDLE_FILE)
    chart, norm = load_surface_file(path)
    ref = get_surface("monkey-saddle").chart
    assert chart.n == 2 and chart.domain == ((-1.0, 1.0), (-1.0, 1.0))
    assert norm == scaled_equiaffine(2.5)
    pts = sample_grid(chart, GridSpec.uniform(9, 2))
    np.testing.assert_array_equal(pts, sample_grid(ref, GridSpec.uniform(9, 2)))
    np.testing.assert_allclose(chart.position(pts), ref.position(pts), rtol=0, atol=1e-15)


def test_surface_file_constant_domain_and_custom_q():
    text = """[surface]
n = 2
x1 = sin(u)*cos(v)
x2 = sin(u)*sin(v)
x3 = cos(u)
domain.1 = 0, pi
domain.2 = 0, 2*pi
guard.1 = sin(u)
[normalization]
q = 1 + 0.1*cos(u)
"""
    chart, norm = parse_surface_definition(text)
    assert chart.domain[1] == (0.0, 2 * math.pi)
    assert norm.kind == "custom"


def test_surface_file_reals_are_exact():
    text = "[surface]\nn = 2\nx1 = u\nx2 = v\nx3 = 0.1*u^2 + v^2\ndomain.1 = -0.3, 0.7\ndomain.2 = -1, 1\n"
    chart, norm = parse_surface_definition(text)
    assert chart.domain[0] == (-0.3, 0.7) and norm is None


@pytest.mark.parametrize("text, line", [
    ("[surface]\nn = 2\nx1 = u\nx2 = v\nx3 = u +* v\ndomain.1 = 0,1\ndomain.2 = 0,1\n", 5),
    ("[surface]\nn = two\n", 2),
    ("x1 = u\n", 1),
    ("[surface]\nn = 2\nx1 = u\nx2 = v\nx3 = u\ndomain.1 = 0\ndomain.2 = 0,1\n", 6),
    ("[surface]\nn = 2\nx1 = u\nx2 = v\nx3 = w\ndomain.1 = 0,1\ndomain.2 = 0,1\n", 5),
    ("[surface]\nn = 2\nx1 = u\nx2 = v\nx3 = u\ndomain.1 = 0,1\ndomain.2 = 0,1\ncolour = red\n", 8),
    ("[shape]\n", 1),
])
def test_surface_file_errors_carry_line(text, line):
    with pytest.raises(SurfaceFileError) as info:
        parse_surface_definition(text)
    assert info.value.line == line


def test_surface_file_error_column_points_at_token():
    text = "[surface]\nn = 2\nx1 = u\nx2 = v\nx3 = u +* v\ndomain.1 = 0,1\ndomain.2 = 0,1\n"
    with pytest.raises(SurfaceFileError) as info:
        parse_surface_definition(text)
    assert text.splitlines()[4][info.value.column - 1] == "*"
