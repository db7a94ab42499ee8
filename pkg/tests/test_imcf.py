import math

import numpy as np
import pytest

from imcflab.errors import ConfigError, FlowFailure
from imcflab.imcf.coarea import coarea_check
from imcflab.imcf.levelset import hawking_mass, isosurface, sublevel_geometry
from imcflab.imcf.pipeline import candidate_set_builder
from imcflab.imcf.report import default_t_grid, flow_report, geroch_correction
from imcflab.metrics.grid import flat_grid
from imcflab.metrics.mollify import mollify
from imcflab.metrics.warped import build_warped, cone_kink_warp
from imcflab.pharmonic.radial import radial_limit_field, sample_on_grid
from imcflab.verify import check_hawking_grid


def _perimeter_error(rep) -> float:
    return float(np.abs(rep.column("perimeter") / (4.0 * math.pi * np.exp(rep.t)) - 1.0).max())


def test_hawking_mass_vanishes_on_round_flat_spheres() -> None:
    assert hawking_mass(4.0 * math.pi * 9.0, 16.0 * math.pi) == 0.0
    assert hawking_mass(4.0 * math.pi, 0.0) == pytest.approx(math.sqrt(4.0 * math.pi) / math.sqrt(16.0 * math.pi))


def test_flat_level_set_geometry(euclid) -> None:
    E = sublevel_geometry(radial_limit_field(euclid), 0.0)
    assert E.perimeter == pytest.approx(4.0 * math.pi)
    assert E.volume == pytest.approx(4.0 * math.pi / 3.0)
    assert E.hawking == pytest.approx(0.0, abs=1e-12)
    assert E.mQL == pytest.approx(0.0, abs=1e-12)
    assert E.holder_residual == pytest.approx(0.0, abs=1e-12)
    assert E.containment_radius == pytest.approx(1.0)


def test_sublevel_geometry_rejects_levels_past_the_outer_sphere(euclid) -> None:
    w = radial_limit_field(euclid)
    with pytest.raises(ConfigError):
        sublevel_geometry(w, w.t_hi + 1.0)


@pytest.mark.parametrize("name,params", [("euclidean", {}), ("schwarzschild", {"m": 1.0}),
                                         ("space_form", {"a": 1.0})])
def test_perimeter_law_on_radial_flows(name, params) -> None:
    rep = flow_report(radial_limit_field(build_warped(name, params)))
    assert _perimeter_error(rep) < 1e-6
    assert rep.verdict("perimeter_law")["passed"]


def test_schwarzschild_spheres_carry_unit_hawking_mass(schwarzschild) -> None:
    rep = flow_report(radial_limit_field(schwarzschild))
    assert np.abs(rep.column("hawking") - 1.0).max() < 1e-6
    assert rep.passed
    # no pole: the quasishi check is advisory and the small-t checks are skipped
    assert not rep.verdict("quasishi")["hard"]
    assert rep.verdict("hawking_small") is None
    assert any("inner boundary" in n for n in rep.notes)


@pytest.mark.parametrize("name,params", [("euclidean", {}), ("schwarzschild", {"m": 1.0}),
                                         ("spherical", {"a": 1.0})])
def test_geroch_monotonicity(name, params) -> None:
    rep = flow_report(radial_limit_field(build_warped(name, params)))
    assert np.diff(rep.column("hawking")).min() >= -1e-8
    assert rep.verdict("geroch")["passed"]


def test_flat_flow_passes_every_hard_check(euclid) -> None:
    rep = flow_report(radial_limit_field(euclid))
    assert rep.hard_failures == []
    assert rep.constants["C"] == pytest.approx(0.0, abs=1e-9)
    assert rep.constants["C1"] == pytest.approx(4.0 * math.pi)
    row = rep.rows()[0]
    assert row["perimeter_ratio"] == pytest.approx(1.0)
    assert "holder_residual" in row


def test_geroch_correction_integrates_exponential_perimeter() -> None:
    P0, dt, delta = 4.0 * math.pi, 0.1, 0.3
    expected = delta / (16.0 * math.pi) ** 1.5 * P0**1.5 * math.expm1(1.5 * dt) / 1.5
    assert geroch_correction(P0, P0 * math.exp(dt), dt, delta) == pytest.approx(expected, rel=1e-12)
    assert geroch_correction(P0, P0 * math.exp(dt), dt, 0.0) == 0.0


def test_t_grid_validation(euclid) -> None:
    w = radial_limit_field(euclid)
    grid = default_t_grid(w)
    assert grid[0] == pytest.approx(-8.0)
    assert grid[-1] < w.t_hi
    with pytest.raises(ConfigError):
        default_t_grid(w, spacing=100.0)
    with pytest.raises(ConfigError):
        flow_report(w, t_grid=[0.0, -1.0])
    with pytest.raises(ConfigError):
        flow_report(w, delta=-1.0)


def test_defect_correction_balances_hyperbolic_space(hyperbolic) -> None:
    w = radial_limit_field(hyperbolic)
    # R = -6: m_H decreases at exactly the rate the correction allows
    assert not flow_report(w).verdict("geroch")["passed"]
    rep = flow_report(w, delta=6.0)
    assert rep.verdict("geroch")["passed"]
    assert rep.verdict("h2_estimate")["passed"]
    assert rep.constants["geroch_correction_total"] > 0.0


def test_radial_coarea(euclid) -> None:
    res = coarea_check("distance", euclid, (0.0, 1.0))
    assert res.error <= 1e-6
    assert res.lhs == pytest.approx(4.0 * math.pi / 3.0, rel=1e-6)
    assert coarea_check(lambda s: 3.0 + 0.0 * s, euclid, (0.0, 1.0)).error == 0.0
    with pytest.raises(ConfigError):
        coarea_check("height", euclid, (0.0, 1.0))
    with pytest.raises(ConfigError):
        coarea_check(lambda s: np.sin(10.0 * s), euclid, (0.0, 1.0))


def test_isosurface_of_a_flat_sphere() -> None:
    grid = flat_grid(1.0, 48)
    X, Y, Z = grid.coords()
    surf = isosurface(grid, np.sqrt(X**2 + Y**2 + Z**2), 0.6)
    assert surf.area == pytest.approx(4.0 * math.pi * 0.36, rel=0.03)
    assert surf.components() == 1
    assert isosurface(grid, X, 5.0).area == 0.0


def test_lattice_flow_of_a_sampled_flat_field(euclid) -> None:
    field = sample_on_grid(radial_limit_field(euclid), flat_grid(1.25, 48))
    ts = np.linspace(2.0 * math.log(0.4), 2.0 * math.log(0.9), 4)
    rep = flow_report(field, t_grid=ts)
    assert rep.method == "grid"
    assert _perimeter_error(rep) < 0.05
    assert all(not v["hard"] for v in rep.verdicts)
    assert rep.column("components").max() == 1


def test_candidate_sets_on_flat_space(euclid) -> None:
    P = 4.0 * math.pi * math.exp(0.5)
    cs = candidate_set_builder([euclid], P)
    assert cs.T == pytest.approx(0.5)
    assert cs.xi == 1.0
    assert cs.rho == pytest.approx(1.0 + math.exp(0.25) * math.e)
    assert cs.ratio == pytest.approx(1.0, abs=1e-9)
    assert cs.theta == pytest.approx(1.0, abs=1e-9)
    assert cs.members[0].contained
    assert cs.report.verdict("candidate_ratio")["passed"]


def test_candidate_sets_report_the_failing_member(euclid) -> None:
    P = 4.0 * math.pi * math.exp(3.0)
    with pytest.raises(FlowFailure) as info:
        candidate_set_builder([euclid, build_warped("euclidean", s_max=1.0)], P)
    assert info.value.member_index == 1
    with pytest.raises(ConfigError):
        candidate_set_builder([], P)
    with pytest.raises(ConfigError):
        candidate_set_builder([euclid], -1.0)


def test_reverse_isoperimetric_family() -> None:
    family = [mollify(cone_kink_warp(2.0**-j), 0.02) for j in (1, 4, 8)]
    cs = candidate_set_builder(family, 4.0 * math.pi * math.exp(0.5))
    assert all(m.ratio >= m.bound - 1e-6 for m in cs.members)
    assert cs.members[-1].ratio >= 1.0 - 1e-3


def test_candidate_sets_outside_the_schwarzschild_horizon(schwarzschild) -> None:
    cs = candidate_set_builder([schwarzschild], 400.0)
    assert cs.T == pytest.approx(math.log(400.0 / (4.0 * math.pi)))
    # positive mass: the flow sets hold more volume than flat balls of the same perimeter
    assert cs.members[0].ratio >= 1.0
    assert cs.theta == pytest.approx(1.0, rel=1e-6)
    assert cs.report.verdict("candidate_ratio")["passed"]


def test_lattice_coarea_of_a_coordinate() -> None:
    m = flat_grid(1.0, 17)
    X, _, _ = m.coords()
    res = coarea_check(X, m)
    assert res.method == "grid"
    assert res.lhs == pytest.approx(8.0, rel=1e-9)
    assert res.rhs == pytest.approx(8.0, rel=1e-6)
    assert res.error < 1e-4


@pytest.mark.slow
def test_lattice_hawking_mass_extrapolates_to_one() -> None:
    [res] = check_hawking_grid(lambda x: x)
    assert res["passed"]
    assert "extrapolated" in res["detail"]


def test_measured_xi_is_floored_at_one(euclid) -> None:
    P = 4.0 * math.pi * math.exp(0.5)
    # flat space measures C = 0 for w = 2 log r
    assert candidate_set_builder([euclid], P).xi == 1.0
    cs = candidate_set_builder([euclid], P, xi=0.5)
    assert cs.xi == 0.5
    assert cs.rho == pytest.approx(1.0 + math.exp(0.25) * math.exp(0.75))
