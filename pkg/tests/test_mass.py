import math

import numpy as np
import pytest

from imcflab.errors import ConfigError, MetricError
from imcflab.imcf.report import flow_report
from imcflab.mass.profile import DINI_CONSTANT, dini_target, radial_profile
from imcflab.mass.quasilocal import (
    MassRecord,
    centered_family,
    iso_mass_estimate,
    quasi_local_mass,
    scale_covariance,
)
from imcflab.mass.rigidity import rigidity_probe
from imcflab.metrics.warped import build_warped
from imcflab.pharmonic.radial import radial_limit_field


def test_quasi_local_mass_of_a_flat_ball() -> None:
    assert quasi_local_mass(4.0 * math.pi / 3.0, 4.0 * math.pi) == pytest.approx(0.0, abs=1e-14)
    with pytest.raises(MetricError):
        quasi_local_mass(1.0, 0.0)


def test_flat_balls_have_no_mass() -> None:
    flat = build_warped("euclidean", s_max=1024.0)
    rep = iso_mass_estimate(flat, centered_family(flat, [2.0**k for k in range(11)]))
    assert np.abs(rep.mQL()).max() <= 1e-9
    assert not rep.low_confidence


def test_schwarzschild_sweep_approaches_unit_mass(schwarzschild) -> None:
    family = centered_family(schwarzschild, np.geomspace(2.5, 1000.0, 40), by="area")
    rep = iso_mass_estimate(schwarzschild, family)
    assert 0.98 <= rep.records[-1].mQL <= 1.02
    assert 0.98 <= rep.m_iso <= 1.02
    assert rep.tail_start == 30
    assert rep.certificate_holds()
    assert rep.certificate_index == 39
    rows = rep.rows()
    assert [r["tail"] for r in rows].count(True) == 10


def test_mass_family_validation() -> None:
    with pytest.raises(ConfigError):
        iso_mass_estimate(None, [])
    with pytest.raises(ConfigError, match="strictly increasing"):
        iso_mass_estimate(None, [(1.0, 5.0), (2.0, 5.0)])
    with pytest.raises(ConfigError):
        centered_family(build_warped("euclidean"), [1.0], by="volume")


def test_small_families_are_low_confidence() -> None:
    rep = iso_mass_estimate(None, [(4.0 * math.pi / 3.0, 4.0 * math.pi), (32.0 * math.pi / 3.0, 16.0 * math.pi)])
    assert rep.low_confidence
    assert rep.notes


def test_quasi_local_mass_scales_like_a_length() -> None:
    records = [MassRecord(v, p, quasi_local_mass(v, p), str(i))
               for i, (v, p) in enumerate([(5.0, 14.0), (40.0, 60.0), (300.0, 220.0)])]
    rep = iso_mass_estimate(None, records)
    assert scale_covariance(rep, 3.0) <= 1e-12
    with pytest.raises(ConfigError):
        scale_covariance(rep, 0.0)


def test_flow_levels_feed_the_mass_estimate(schwarzschild) -> None:
    rep = flow_report(radial_limit_field(schwarzschild), t_grid=np.linspace(3.0, 12.0, 10))
    mass = iso_mass_estimate(schwarzschild, rep.entries)
    assert mass.records[0].ref == "3.0"
    assert mass.m_iso > 0.5


def test_euclidean_profile_regularity(euclid) -> None:
    prof = radial_profile(euclid, np.geomspace(0.1, 100.0, 16), dini_at=[1.0])
    assert prof.dini[0]["quotient"] == pytest.approx(dini_target(1.0), abs=1e-3)
    assert dini_target(1.0) == pytest.approx(DINI_CONSTANT)
    assert prof.holder_exponent == pytest.approx(2.0 / 3.0, abs=0.01)
    assert np.abs(prof.euclidean_gap()).max() < 1e-12
    assert abs(prof.profile_mass) < 1e-9


def test_profile_rejects_bad_volume_grids(euclid) -> None:
    with pytest.raises(MetricError):
        radial_profile(euclid, [2.0, 1.0])
    with pytest.raises(MetricError):
        radial_profile(euclid, [1.0, 1e6])


def test_hyperbolic_profile_lies_above_the_euclidean_one(hyperbolic) -> None:
    prof = radial_profile(hyperbolic, np.geomspace(0.01, 10.0, 12))
    assert np.all(prof.euclidean_gap() > 0)


def test_rigidity_probe_on_flat_and_curved_flows(euclid, schwarzschild) -> None:
    flat = rigidity_probe(flow_report(radial_limit_field(euclid)), euclid)
    assert flat["applicable"]
    assert flat["rigidity_consistent"]
    assert flat["max_abs_R"] == 0.0
    curved = rigidity_probe(flow_report(radial_limit_field(schwarzschild)), schwarzschild)
    assert not curved["applicable"]
    assert "outside" in curved["reason"]


def test_rigidity_is_inapplicable_on_a_spherical_patch() -> None:
    patch = build_warped("spherical", {"a": 1.0})
    res = rigidity_probe(flow_report(radial_limit_field(patch)), patch)
    assert not res["applicable"]
    assert not res["rigidity_consistent"]
    # spherical balls hold less volume than the Euclidean isoperimetric curve allows
    assert res["inf_mQL"] < 0.0
    assert "outside" in res["reason"]
