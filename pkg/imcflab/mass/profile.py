# imcflab/mass/profile.py
"""Isoperimetric profile of centred balls in a radial metric."""
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from ..errors import MetricError
from ..metrics.warped import WarpedMetric, ball_volume, sphere_area
from .quasilocal import quasi_local_mass

logger = logging.getLogger(__name__)

EUCLID_PROFILE = (36.0 * math.pi) ** (1.0 / 3.0)
DINI_CONSTANT = 2.0 * (4.0 * math.pi / 3.0) ** (1.0 / 3.0)


def euclidean_profile(V):
    return EUCLID_PROFILE * np.asarray(V, dtype=float) ** (2.0 / 3.0)


def dini_target(v: float) -> float:
    """2 (4 pi/3)^{1/3} v^{-1/3}, the derivative of the Euclidean profile."""
    return DINI_CONSTANT * v ** (-1.0 / 3.0)


@dataclass
class IsoProfile:
    label: str
    volumes: np.ndarray
    I: np.ndarray
    I_eucl: np.ndarray
    holder_exponent: float
    holder_pairs: int
    dini: list = field(default_factory=list)
    mass: np.ndarray = None

    def euclidean_gap(self) -> np.ndarray:
        """I/I_eucl - 1: negative below the Euclidean profile."""
        return self.I / self.I_eucl - 1.0

    @property
    def profile_mass(self) -> float:
        """Tail supremum of 2/I (V - I^{3/2}/(6 sqrt(pi))) over the last quarter of the grid."""
        tail = self.mass[len(self.mass) - max(1, len(self.mass) // 4):]
        return float(tail.max())

    def rows(self) -> list[dict]:
        return [{"V": float(v), "I": float(i), "I_eucl": float(e), "mass": float(mq)}
                for v, i, e, mq in zip(self.volumes, self.I, self.I_eucl, self.mass)]

    def as_dict(self) -> dict:
        return {"label": self.label, "holder_exponent": self.holder_exponent, "holder_pairs": self.holder_pairs,
                "profile_mass": self.profile_mass, "dini": self.dini, "rows": self.rows()}


def radius_for_volume(m: WarpedMetric, V: float, V_max: float | None = None) -> float:
    V_max = ball_volume(m, m.s_max) if V_max is None else V_max
    if not 0 < V <= V_max * (1 + 1e-12):
        raise MetricError(f"volume {V:.6g} outside (0, {V_max:.6g}] of {m.label}")
    if m.kind == "euclidean":
        return (3.0 * V / (4.0 * math.pi)) ** (1.0 / 3.0)
    if V >= V_max:
        return m.s_max
    return optimize.brentq(lambda s: ball_volume(m, s) - V, m.s_min, m.s_max, xtol=1e-14, rtol=4e-16,
                           maxiter=200)


def _profile_at(m: WarpedMetric, V, V_max: float) -> np.ndarray:
    return np.array([sphere_area(m, radius_for_volume(m, float(v), V_max)) for v in np.atleast_1d(V)])


def _holder_fit(m: WarpedMetric, V: np.ndarray, V_max: float) -> tuple[float, int]:
    """Slope of log|I(2v) - I(v)| against log v over dyadic pairs inside the domain."""
    base = V[2.0 * V <= V_max]
    if base.size < 2:
        return float("nan"), int(base.size)
    gaps = np.abs(_profile_at(m, 2.0 * base, V_max) - _profile_at(m, base, V_max))
    keep = gaps > 0
    if keep.sum() < 2:
        return float("nan"), int(keep.sum())
    slope, _ = np.polyfit(np.log(base[keep]), np.log(gaps[keep]), 1)
    return float(slope), int(keep.sum())


def radial_profile(m: WarpedMetric, V_grid, eps: float = 1e-4, dini_at=None) -> IsoProfile:
    """I(V) = area of the centred ball of volume V, with Holder and Dini diagnostics.

    Centred balls bound the profile from above in general and are the profile
    only under symmetry assumptions that are not verified here.
    """
    if not isinstance(m, WarpedMetric):
        raise MetricError("the radial profile needs a WarpedMetric")
    V = np.asarray(V_grid, dtype=float).ravel()
    if V.size == 0 or np.any(V <= 0) or np.any(np.diff(V) <= 0):
        raise MetricError("volume grid must be positive and strictly increasing")
    V_max = ball_volume(m, m.s_max)
    if V[-1] > V_max * (1 + 1e-12):
        raise MetricError(f"volume {V[-1]:.6g} exceeds the domain volume {V_max:.6g}")
    I = _profile_at(m, V, V_max)
    exponent, pairs = _holder_fit(m, V, V_max)
    dini = []
    for v in (V if dini_at is None else np.atleast_1d(dini_at)):
        v = float(v)
        if v - eps <= 0:
            continue
        I_v, I_lo = _profile_at(m, [v, v - eps], V_max)
        q = (I_v - I_lo) / eps
        dini.append({"v": v, "eps": eps, "quotient": float(q), "target": dini_target(v)})
    mass = np.array([quasi_local_mass(v, i) for v, i in zip(V, I)])
    logger.info("radial_profile %s: %d volume(s), Holder exponent %.6g over %d pair(s)", m.label, V.size,
                exponent, pairs)
    return IsoProfile(m.label, V, I, euclidean_profile(V), exponent, pairs, dini, mass)
