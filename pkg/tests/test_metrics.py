import math
from pathlib import Path

import numpy as np
import pytest

from imcflab.errors import ConfigError, MetricError
from imcflab.metrics.constants import deficit_scalar_estimate, frozen_ball_ratio, geometry_constants
from imcflab.metrics.distance import grid_distance, overestimate_bound, stencil_anisotropy
from imcflab.metrics.grid import flat_grid, grid_scalar_curvature, metric_closeness, warped_to_grid
from imcflab.metrics.io import dump_array, load_array, load_metric
from imcflab.metrics.lattice import KuhnMesh, simplex_fraction_below
from imcflab.metrics.mollify import collar_width, mollify, pole_collar, refinement_family
from imcflab.metrics.warped import (
    ball_volume,
    build_warped,
    cone_kink_warp,
    curvature_profile,
    kinked_warp,
    radial_distance,
    radius_for_warp,
    sampled_warp,
    scalar_curvature_warped,
    sphere_area,
)


def test_euclidean_balls_have_closed_form_area_and_volume(euclid) -> None:
    s = np.array([0.5, 1.0, 3.0])
    assert np.allclose(sphere_area(euclid, s), 4.0 * math.pi * s**2, rtol=1e-14)
    assert np.allclose(ball_volume(euclid, s), 4.0 * math.pi * s**3 / 3.0, rtol=1e-14)
    assert np.allclose(radial_distance(euclid, s), s)


def test_space_forms_have_constant_scalar_curvature(hyperbolic) -> None:
    sphere = build_warped("spherical", {"a": 1.0})
    assert scalar_curvature_warped(hyperbolic, 1.0) == pytest.approx(-6.0, rel=1e-12)
    assert scalar_curvature_warped(sphere, 0.7) == pytest.approx(6.0, rel=1e-12)


def test_isotropic_schwarzschild_chart_is_scalar_flat(schwarzschild) -> None:
    R, ok = curvature_profile(schwarzschild, np.array([0.75, 2.0, 10.0]))
    assert ok.all()
    assert np.allclose(R, 0.0, atol=1e-8)
    # horizon: the area radius at s = m/2 is 2m
    assert float(schwarzschild.f(0.5)) == pytest.approx(2.0)


def test_warp_builder_rejects_bad_parameters() -> None:
    with pytest.raises(MetricError):
        build_warped("space_form", {"a": -1.0})
    with pytest.raises(MetricError):
        build_warped("torus")


def test_sampled_warp_rejects_discontinuous_samples() -> None:
    s = 0.1 * np.arange(20)
    with pytest.raises(MetricError, match="discontinuous"):
        sampled_warp(s + 5.0 * (s > 1.0), h=0.1)


def test_kinked_warp_flags_curvature_at_the_corner() -> None:
    m = kinked_warp(a=0.05, s0=1.0)
    R, ok = curvature_profile(m, np.array([0.5, 1.0, 2.0]))
    assert not ok[1] and math.isnan(R[1])
    assert ok[0] and ok[2]


def test_radius_for_warp_inverts_the_warp(hyperbolic) -> None:
    s = radius_for_warp(hyperbolic, math.sinh(1.5))
    assert s == pytest.approx(1.5, rel=1e-12)
    with pytest.raises(MetricError):
        radius_for_warp(hyperbolic, 1e6)


def test_mollified_cone_kink_has_small_positive_defect() -> None:
    approx = mollify(cone_kink_warp(0.25), 0.02)
    assert approx.is_radial
    assert approx.eps_defect >= 0.0
    assert approx.smoothed.pole


def test_refinement_family_needs_decreasing_widths() -> None:
    with pytest.raises(MetricError):
        refinement_family(cone_kink_warp(0.25), [0.02, 0.04])


def test_refinement_of_the_kinked_warp_converges_uniformly() -> None:
    m = kinked_warp(a=0.05, s0=1.0)
    family, _ = refinement_family(m, [0.2, 0.1, 0.05])
    sel = (m.nodes >= 0.5) & (m.nodes <= 2.5)
    errs = [float(np.abs(a.smoothed.values[sel] - m.values[sel]).max()) for a in family]
    assert errs[0] > errs[1] > errs[2]
    assert errs[-1] < 0.01
    assert all(math.isfinite(a.eps_defect) for a in family)
    # the conical pole is smoothed away: slope 1 at the origin
    for a in family:
        assert a.smoothed.values[1] / m.h == pytest.approx(1.0, rel=1e-9)


def test_pole_collar_leaves_the_outer_warp_alone() -> None:
    s = np.linspace(0.0, 2.0, 201)
    factor = pole_collar(s, 1.05, 0.05, 2.0)
    assert factor[0] == pytest.approx(1.0 / 1.05)
    assert np.all(factor[s >= collar_width(0.05, 2.0)] == 1.0)
    assert np.all(np.diff(factor) >= 0.0)


def test_deficit_estimate_recovers_scalar_curvature(euclid, hyperbolic) -> None:
    assert deficit_scalar_estimate(hyperbolic).value == pytest.approx(-6.0, rel=0.05)
    assert abs(deficit_scalar_estimate(euclid).value) <= 1e-6


def test_flat_grid_geometry() -> None:
    m = flat_grid(1.0, 9)
    assert m.shape == (9, 9, 9)
    assert m.h == pytest.approx(0.25)
    assert np.allclose(m.center, 0.0)
    assert np.all(grid_scalar_curvature(m) == 0.0)
    assert metric_closeness(m.scaled(1.21), m) == pytest.approx(0.21, rel=1e-12)


def test_warped_to_grid_matches_flat_for_euclidean(euclid) -> None:
    m = warped_to_grid(euclid, 1.0, 9)
    assert metric_closeness(m, flat_grid(1.0, 9)) < 1e-12


def test_lattice_distance_follows_axes_and_diagonals() -> None:
    m = flat_grid(1.0, 9)
    dist = grid_distance(m, (4, 4, 4))
    assert dist.unreachable == 0
    assert dist.at((8, 4, 4)) == pytest.approx(1.0)
    assert dist.at((6, 6, 6)) == pytest.approx(2.0 * 0.25 * math.sqrt(3.0))


def test_lattice_distance_is_a_symmetric_path_metric(hyperbolic) -> None:
    m = warped_to_grid(hyperbolic, 1.0, 9)
    a, b = (1, 2, 3), (7, 4, 6)
    da, db = grid_distance(m, a), grid_distance(m, b)
    assert da.at(b) == db.at(a)
    assert np.all(da.distances <= da.at(b) + db.distances + 1e-12)
    doubled = grid_distance(m.scaled(4.0), a)
    assert np.allclose(doubled.distances, 2.0 * da.distances, rtol=1e-14, atol=0.0)


def test_pinched_metrics_have_pinched_distances(euclid) -> None:
    flat = flat_grid(1.0, 9)
    curved = warped_to_grid(build_warped("space_form", {"a": 0.1}), 1.0, 9)
    eps = metric_closeness(curved, flat)
    assert 0.0 < eps < 0.2
    d0 = grid_distance(flat, (4, 4, 4)).distances
    d1 = grid_distance(curved, (4, 4, 4)).distances
    sel = d0 > 0
    ratio = d1[sel] / d0[sel]
    assert ratio.min() >= math.sqrt(1.0 - eps) - 1e-12
    assert ratio.max() <= math.sqrt(1.0 + eps) + 1e-12


def test_lattice_overestimate_stays_within_its_bound() -> None:
    A = stencil_anisotropy()
    assert 1.0 < A < 1.15
    x, y = np.array([-0.55, 0.3, 0.1]), np.array([0.6, -0.35, 0.45])
    true = float(np.linalg.norm(x - y))
    for n in (9, 17, 33):
        m = flat_grid(1.0, n)
        c = m.node_of(m.center)
        d = grid_distance(m, c).distances
        e = m.frozen_distance(c)
        assert np.all(d >= e - 1e-12)
        assert np.all(d <= A * (1.0 + 1e-4) * e + 1e-12)
        gap = grid_distance(m, m.node_of(x)).at(m.node_of(y)) - true
        assert abs(gap) <= overestimate_bound(m, true)
    coarse, fine = flat_grid(1.0, 9), flat_grid(1.0, 17)
    snap = lambda m: float(overestimate_bound(m, 0.0))
    assert snap(fine) == pytest.approx(0.5 * snap(coarse), rel=1e-12)


def test_mollified_flat_and_hyperbolic_warps_keep_their_curvature(euclid, hyperbolic) -> None:
    assert mollify(euclid, 0.1).eps_defect <= 1e-8
    approx = mollify(hyperbolic, 0.05)
    assert approx.excess_defect <= 0.1
    assert approx.eps_defect == pytest.approx(6.0, abs=0.1)


def test_simplex_fraction_below_is_a_distribution() -> None:
    vals = np.array([[0.0, 1.0, 2.0, 3.0]])
    assert simplex_fraction_below(vals, -1.0)[0] == 0.0
    assert simplex_fraction_below(vals, 4.0)[0] == 1.0
    assert simplex_fraction_below(vals, 1.5)[0] == pytest.approx(0.5, abs=1e-6)
    levels = np.linspace(0.0, 3.0, 31)
    fr = np.array([simplex_fraction_below(vals, x)[0] for x in levels])
    assert np.all(np.diff(fr) >= -1e-12)


def test_kuhn_mesh_measures_half_spaces_exactly() -> None:
    m = flat_grid(1.0, 9)
    mesh = KuhnMesh(m)
    X = m.coords()[0]
    assert mesh.vol.sum() == pytest.approx(8.0, rel=1e-12)
    assert mesh.volume_below(X, 0.1) == pytest.approx(4.4, rel=1e-5)


def test_load_metric_kinds(tmp_path: Path) -> None:
    assert load_metric({"kind": "euclidean", "s_max": 5.0}).s_max == 5.0
    assert load_metric({"kind": "schwarzschild", "params": {"m": 2.0}}).s_min == 1.0
    grid = load_metric({"kind": "flat_grid", "half_width": 1.0, "n": 9})
    assert grid.shape == (9, 9, 9)
    with pytest.raises(ConfigError):
        load_metric({"kind": "nope"})
    with pytest.raises(ConfigError):
        load_metric({"kind": "cone_kink", "params": {"bogus": 1}})


def test_load_metric_reports_json_position(tmp_path: Path) -> None:
    path = tmp_path / "metric.json"
    path.write_text('{\n  "kind": "euclidean",\n  "s_max": \n}\n', encoding="utf-8")
    with pytest.raises(ConfigError) as info:
        load_metric(path)
    assert info.value.line is not None
    assert str(path) in str(info.value)


def test_sampled_warp_from_files(tmp_path: Path) -> None:
    s = 1e-3 * np.arange(2001)
    np.savetxt(tmp_path / "warp.csv", np.stack([s, np.sinh(s)], axis=1), delimiter=",")
    dump_array(tmp_path / "warp.f64", np.sinh(s))
    from_csv = load_metric({"kind": "sampled", "data": "warp.csv"}, base=tmp_path)
    from_bin = load_metric({"kind": "sampled", "data": "warp.f64", "h": 1e-3}, base=tmp_path)
    assert from_csv.s_max == pytest.approx(2.0)
    assert np.array_equal(from_csv.values, from_bin.values)
    assert load_array(tmp_path / "warp.f64").shape == (2001,)
    with pytest.raises(ConfigError):
        load_array(tmp_path / "warp.f64", shape=(3, 3))


def test_geometry_constants_of_flat_balls(euclid, schwarzschild) -> None:
    consts = geometry_constants(euclid, R=1.0)
    assert consts.C_A == pytest.approx(1.0, abs=1e-9)
    assert consts.C_Sob == pytest.approx((4.0 * math.pi / 3.0) ** (2.0 / 3.0) / (4.0 * math.pi), rel=1e-9)
    assert not consts.C_P_declared
    assert geometry_constants(euclid, R=1.0, declared_poincare=2.0).C_P == 2.0
    with pytest.raises(MetricError):
        geometry_constants(schwarzschild, R=1.0)
    with pytest.raises(MetricError):
        geometry_constants(euclid, R=20.0)


def test_frozen_ball_ratio_sees_off_centre_growth(euclid, hyperbolic) -> None:
    assert frozen_ball_ratio(euclid, 2.0, 1.0) == pytest.approx(1.0, abs=1e-12)
    assert frozen_ball_ratio(hyperbolic, 1.0, 1e-3) == pytest.approx(1.0, abs=1e-4)
    assert frozen_ball_ratio(hyperbolic, 1.0, 1.0) > 1.0
    with pytest.raises(MetricError):
        frozen_ball_ratio(hyperbolic, 2.5, 1.0)


def test_geometry_constants_sample_off_centre_balls(euclid, hyperbolic) -> None:
    consts = geometry_constants(hyperbolic, R=1.0)
    assert 1.2 < consts.C_A <= 1.4
    assert consts.C_A >= frozen_ball_ratio(hyperbolic, 1.0, 1.0)
    assert consts.confidence == "ok"
    assert 1 <= geometry_constants(euclid, R=1.0).C_cov <= 60
