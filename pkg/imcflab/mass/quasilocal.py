# imcflab/mass/quasilocal.py
"""Quasi-local isoperimetric mass of regions and its tail over exhausting families."""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..config import CONF
from ..errors import ConfigError, MetricError
from ..metrics.warped import WarpedMetric, ball_volume, radius_for_warp, sphere_area

logger = logging.getLogger(__name__)

SIX_SQRT_PI = 6.0 * math.sqrt(math.pi)


def quasi_local_mass(volume: float, perimeter: float) -> float:
    """(2/P)(|E| - P^{3/2}/(6 sqrt(pi))); zero exactly on the Euclidean isoperimetric curve."""
    if not perimeter > 0:
        raise MetricError(f"quasi-local mass needs a positive perimeter, got {perimeter}")
    return 2.0 / perimeter * (volume - perimeter**1.5 / SIX_SQRT_PI)


@dataclass(frozen=True)
class MassRecord:
    volume: float
    perimeter: float
    mQL: float
    ref: str = ""


@dataclass
class MassReport:
    records: list
    m_iso: float
    tail_start: int
    certificate: float
    certificate_index: int | None
    trend: str
    low_confidence: bool
    notes: list = field(default_factory=list)

    def mQL(self) -> np.ndarray:
        return np.array([r.mQL for r in self.records])

    def certificate_holds(self) -> bool:
        """Some member has mQL >= 0 and min{P, |E|} >= the declared certificate."""
        return any(r.mQL >= 0 and min(r.perimeter, r.volume) >= self.certificate for r in self.records)

    def rows(self) -> list[dict]:
        return [{"index": i, "ref": r.ref, "volume": r.volume, "perimeter": r.perimeter, "mQL": r.mQL,
                 "tail": i >= self.tail_start} for i, r in enumerate(self.records)]

    def as_dict(self) -> dict:
        return {
            "m_iso_estimate": self.m_iso,
            "tail_start": self.tail_start,
            "certificate_C": self.certificate,
            "certificate_index": self.certificate_index,
            "trend": self.trend,
            "low_confidence": self.low_confidence,
            "notes": list(self.notes),
            "records": self.rows(),
        }


def _record(item, i: int) -> MassRecord:
    if isinstance(item, MassRecord):
        return item
    if hasattr(item, "volume") and hasattr(item, "perimeter"):
        ref = str(getattr(item, "ref", "") or getattr(item, "t", "") or i)
        V, P = float(item.volume), float(item.perimeter)
    else:
        V, P = (float(x) for x in item)
        ref = str(i)
    return MassRecord(V, P, quasi_local_mass(V, P), ref)


def _trend(values: np.ndarray) -> str:
    if values.size < 2:
        return "flat"
    d = np.diff(values)
    scale = 1e-12 * max(1.0, float(np.abs(values).max()))
    if np.all(np.abs(d) <= scale):
        return "flat"
    if np.all(d >= -scale):
        return "increasing"
    if np.all(d <= scale):
        return "decreasing"
    return "mixed"


def iso_mass_estimate(m, family) -> MassReport:
    """Tail supremum of mQL over a family with strictly increasing perimeter.

    `family` holds (volume, perimeter) pairs or objects with volume/perimeter
    attributes (level-set geometries, candidate sets). The certificate is the
    largest C with min{P, |E|} >= C over members of non-negative mQL.
    """
    records = [_record(x, i) for i, x in enumerate(family)]
    if not records:
        raise ConfigError("iso_mass_estimate needs a non-empty family")
    per = np.array([r.perimeter for r in records])
    if np.any(np.diff(per) <= 0):
        raise ConfigError("family perimeters must be strictly increasing")
    n = len(records)
    tail_start = n - max(1, n // 4)
    mql = np.array([r.mQL for r in records])
    m_iso = float(mql[tail_start:].max())
    cert, cert_idx = 0.0, None
    for i, r in enumerate(records):
        if r.mQL >= 0 and min(r.perimeter, r.volume) > cert:
            cert, cert_idx = min(r.perimeter, r.volume), i
    low = n < CONF.mass_family_min
    notes = []
    if low:
        notes.append(f"family has {n} member(s), fewer than {CONF.mass_family_min}")
        logger.warning("iso_mass_estimate: low confidence, %d member(s)", n)
    label = getattr(m, "label", type(m).__name__) if m is not None else "family"
    logger.info("iso_mass_estimate %s: m_iso~%.8g over %d tail member(s), C=%.6g",
                label, m_iso, n - tail_start, cert)
    return MassReport(records, m_iso, tail_start, cert, cert_idx, _trend(mql[tail_start:]), low, notes)


def centered_family(m: WarpedMetric, radii, by: str = "chart") -> list[MassRecord]:
    """Centred balls of a radial metric, by chart radius s or by area radius f(s)."""
    if by not in ("chart", "area"):
        raise ConfigError(f"centred family radii are 'chart' or 'area', got {by!r}")
    radii = [float(r) for r in radii]
    s = radii if by == "chart" else [radius_for_warp(m, r) for r in radii]

    def one(x):
        V, P = float(ball_volume(m, x)), float(sphere_area(m, x))
        return MassRecord(V, P, quasi_local_mass(V, P), f"s={x:.9g}")

    with ThreadPoolExecutor(max_workers=max(1, CONF.threads)) as ex:
        return list(ex.map(one, s))


def scale_covariance(report: MassReport, lam: float) -> float:
    """Largest |mQL(lam^3 V, lam^2 P) - lam mQL(V, P)| relative to lam max|mQL| over the records."""
    if not lam > 0:
        raise ConfigError(f"scale factor must be positive, got {lam}")
    worst = 0.0
    ref = max(1e-300, max(abs(r.mQL) for r in report.records))
    for r in report.records:
        scaled = quasi_local_mass(lam**3 * r.volume, lam**2 * r.perimeter)
        worst = max(worst, abs(scaled - lam * r.mQL) / (lam * ref))
    return worst
