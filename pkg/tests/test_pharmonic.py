import math

import numpy as np
import pytest

from imcflab.errors import ConfigError, MetricError
from imcflab.metrics.grid import flat_grid
from imcflab.metrics.warped import build_warped
from imcflab.pharmonic.bounds import (
    bound_checks,
    capacity_level_margin,
    comparison_margin,
    gradient_product_range,
    lower_bound_constant,
    sphere_harnack_ratio,
)
from imcflab.pharmonic.capacity import capacity_law, monotone_pair, p_capacity, parse_descriptor, radial_capacity
from imcflab.pharmonic.field import SolverConfig, check_exponent, green_constant
from imcflab.pharmonic.grid_solver import grid_green
from imcflab.pharmonic.limit import imcf_limit
from imcflab.pharmonic.radial import radial_green, radial_limit_field, sample_on_grid
from imcflab.pharmonic.weak import weak_solution_probe


def test_exponent_must_lie_in_open_interval() -> None:
    assert check_exponent(1.5) == 1.5
    for p in (1.0, 3.0, 3.5, 0.5):
        with pytest.raises(ConfigError):
            check_exponent(p)


def test_green_constant_at_p_two_is_four_pi() -> None:
    # ((3-p)/(p-1))^(p-1) 4 pi
    assert green_constant(2.0) == pytest.approx(4.0 * math.pi)


def test_solver_config_validation() -> None:
    with pytest.raises(ConfigError):
        SolverConfig(p_schedule=(1.5, 1.6))
    with pytest.raises(ConfigError):
        SolverConfig(annulus=(1.0, 0.5))
    with pytest.raises(ConfigError, match="unknown solver keys"):
        SolverConfig.from_dict({"tolerance": 1.0})
    cfg = SolverConfig.from_dict({"p_schedule": [1.5, 1.25], "annulus": [0.2, 0.8]})
    assert cfg.p_schedule == (1.5, 1.25)


def test_descriptors() -> None:
    assert parse_descriptor(("ball", 0.5)) == ("ball", 0.5)
    assert parse_descriptor({"sublevel": -1}) == ("sublevel", -1.0)
    with pytest.raises(ConfigError):
        parse_descriptor({"cube": 1.0})


def test_radial_green_is_normalized_at_the_pole(euclid) -> None:
    field = radial_green(euclid, 1.5, 10.0)
    assert field.kind == "green"
    assert field.diagnostics["normalization_error"] < 1e-4
    assert np.all(np.diff(field.w) > 0)
    assert sphere_harnack_ratio(field) == 1.0


def test_radial_gradient_product_is_sharp_near_the_pole(euclid) -> None:
    lo, hi = gradient_product_range(radial_green(euclid, 1.5, 10.0))
    assert lo == pytest.approx(1.5, rel=0.01)
    assert hi == pytest.approx(1.5, rel=0.01)


def test_radial_capacity_law_on_sublevels(euclid) -> None:
    for t in (-2.0, -1.0, 0.0):
        law = capacity_law(p_capacity(euclid, ("sublevel", t), 10.0, 1.5), t)
        assert law == pytest.approx(1.0, rel=0.01)


def test_ball_capacities_are_monotone(euclid) -> None:
    small = radial_capacity(euclid, ("ball", 0.5), 10.0, 1.5)
    large = radial_capacity(euclid, ("ball", 1.0), 10.0, 1.5)
    assert monotone_pair(small, large)
    assert not monotone_pair(large, small)
    with pytest.raises(MetricError):
        radial_capacity(euclid, ("ball", 12.0), 10.0, 1.5)


def test_limit_field_is_twice_log_of_the_warp(euclid, schwarzschild) -> None:
    flat = radial_limit_field(euclid)
    assert flat.is_limit
    assert flat.at(2.0) == pytest.approx(2.0 * math.log(2.0))
    shell = radial_limit_field(schwarzschild)
    # the flow starts from the horizon, area 16 pi
    assert shell.t_lo == pytest.approx(math.log(4.0))


def test_imcf_limit_converges_on_the_annulus(euclid) -> None:
    field = imcf_limit(euclid, R=10.0)
    s = np.linspace(0.1, 1.0, 91)
    assert np.abs(field.at(s) - 2.0 * np.log(s)).max() < 1e-3
    assert field.converged
    assert field.cauchy_gap < 1e-3


def test_imcf_limit_on_a_grid_needs_a_radius() -> None:
    from imcflab.errors import SolverError
    with pytest.raises(SolverError):
        imcf_limit(flat_grid(1.0, 9))


def test_lower_bound_constant_of_the_flat_flow(euclid) -> None:
    e, C = lower_bound_constant(radial_limit_field(euclid))
    assert e == 2.0
    assert C == pytest.approx(0.0, abs=1e-9)


def test_comparison_against_the_same_space_form(hyperbolic) -> None:
    field = radial_green(hyperbolic, 1.5, 2.0)
    _, margin = comparison_margin(field, 1.0)
    assert margin.min() >= -1e-6
    with pytest.raises(ConfigError):
        comparison_margin(radial_limit_field(hyperbolic), 1.0)


def test_bound_checks_pass_on_flat_space(euclid) -> None:
    report = bound_checks(radial_green(euclid, 1.5, 10.0))
    assert report["harnack_ratio"] == 1.0
    assert all(v["passed"] for v in report["verdicts"] if v["hard"])


def test_weak_probe_on_flat_sublevels(euclid) -> None:
    res = weak_solution_probe(radial_limit_field(euclid), K=(0.1, 5.0))
    assert res["max_difference"] <= 1e-6
    with pytest.raises(ConfigError):
        weak_solution_probe(radial_limit_field(euclid), K=(2.0, 1.0))


def test_sample_on_grid_copies_the_radial_field(euclid) -> None:
    grid = flat_grid(1.0, 17)
    field = sample_on_grid(radial_limit_field(euclid), grid)
    X, Y, Z = grid.coords()
    s = np.sqrt(X**2 + Y**2 + Z**2)
    sel = s > 0.2
    assert np.allclose(field.w[sel], 2.0 * np.log(s[sel]), atol=1e-9)


@pytest.mark.slow
def test_grid_green_matches_the_capacity_law() -> None:
    m = flat_grid(1.0, 64)
    field = grid_green(m, m.center, 1.5, 0.9)
    for t in (-2.0, -1.0, 0.0):
        law = capacity_law(p_capacity(m, ("sublevel", t), 0.9, 1.5, field=field), t)
        assert law == pytest.approx(1.0, rel=0.03)
    assert sphere_harnack_ratio(field) <= 1.03


def test_ball_capacity_scales_with_the_metric(hyperbolic) -> None:
    # 4 g_a is the space form of curvature scale a/4 with distances doubled
    wide = build_warped("space_form", {"a": 0.25}, s_max=5.0)
    small = radial_capacity(hyperbolic, ("ball", 0.5), 2.0, 1.5).cap
    large = radial_capacity(wide, ("ball", 1.0), 4.0, 1.5).cap
    assert large == pytest.approx(2.0 ** (3.0 - 1.5) * small, rel=1e-6)


@pytest.mark.slow
def test_lattice_ball_capacity_scales_with_the_metric() -> None:
    m = flat_grid(1.0, 17)
    small = p_capacity(m, ("ball", 0.4), 0.7, 1.5).cap
    large = p_capacity(m.scaled(4.0), ("ball", 0.8), 1.4, 1.5).cap
    assert large == pytest.approx(2.0 ** 1.5 * small, rel=1e-3)


def test_capacity_level_margin_needs_a_lattice_field(euclid) -> None:
    with pytest.raises(ConfigError):
        capacity_level_margin(radial_green(euclid, 1.5, 10.0))


@pytest.mark.slow
def test_capacity_level_margin_on_a_flat_lattice() -> None:
    m = flat_grid(1.0, 33)
    cfg = SolverConfig(eps_inner=0.2)
    field = grid_green(m, m.center, 1.5, 0.9, cfg)
    margins = capacity_level_margin(field, cfg=cfg)
    assert margins.size == 3
    assert margins.min() >= -0.1


def test_weak_probe_on_lattice_sublevels(euclid) -> None:
    field = sample_on_grid(radial_limit_field(euclid), flat_grid(1.25, 33))
    res = weak_solution_probe(field, K=(0.2, 1.1), t_values=[2.0 * math.log(0.6)])
    rows = {r["factor"]: r["difference"] for r in res["rows"]}
    assert rows[1.0] == 0.0
    # flat spheres about o all have J = 4 pi K_lo^2; the lattice sees a few percent of it
    assert abs(rows[1.1]) <= 0.25
    assert abs(rows[0.9]) <= 0.25
    with pytest.raises(ConfigError, match="not compactly supported"):
        weak_solution_probe(field, K=(0.56, 1.1), t_values=[2.0 * math.log(0.6)])
