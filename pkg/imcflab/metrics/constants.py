# imcflab/metrics/constants.py
"""Measured geometry constants of a ball B_R(o) and the volume-deficit curvature estimate."""
import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from ..config import CONF
from ..errors import MetricError
from .grid import GridMetric
from .warped import WarpedMetric, ball_volume, build_warped, radial_distance, sphere_area

logger = logging.getLogger(__name__)

BALL = 4.0 * math.pi / 3.0
SQRT_PI = math.sqrt(math.pi)


@dataclass(frozen=True)
class GeometryConstants:
    C_A: float
    C_cov: int
    C_P: float
    C_P_declared: bool
    C_Sob: float
    harnack_ratio: float
    zeta: float
    eta: float
    confidence: str = "ok"
    notes: tuple = field(default_factory=tuple)

    def as_dict(self) -> dict:
        return {
            "C_A": self.C_A, "C_cov": self.C_cov, "C_P": self.C_P,
            "C_P_declared": self.C_P_declared, "C_Sob": self.C_Sob,
            "harnack_ratio": self.harnack_ratio, "zeta": self.zeta, "eta": self.eta,
            "confidence": self.confidence, "notes": list(self.notes),
        }


def fibonacci_sphere(n: int) -> np.ndarray:
    """n nearly uniform unit vectors."""
    k = np.arange(n) + 0.5
    z = 1.0 - 2.0 * k / n
    r = np.sqrt(1.0 - z**2)
    ang = math.pi * (3.0 - math.sqrt(5.0)) * k
    return np.stack([r * np.cos(ang), r * np.sin(ang), z], axis=-1)


def greedy_cover_count(points: np.ndarray, radius: float, metric: np.ndarray | None = None) -> int:
    """Number of balls (centred at sample points) picked greedily to cover all samples."""
    if metric is None:
        metric = np.eye(3)
    L = np.linalg.cholesky(metric)
    Y = points @ L
    n = Y.shape[0]
    cover = np.zeros((n, n), dtype=bool)
    for a in range(0, n, 512):
        d2 = ((Y[a:a + 512, None, :] - Y[None, :, :]) ** 2).sum(-1)
        cover[a:a + 512] = d2 < radius**2
    uncovered = np.ones(n, dtype=bool)
    count = 0
    while uncovered.any():
        gain = cover[:, uncovered].sum(axis=1)
        best = int(np.argmax(gain))
        uncovered &= ~cover[best]
        count += 1
    return count


def annulus_samples(r: float, n_dirs: int = 400, n_layers: int = 8) -> np.ndarray:
    dirs = fibonacci_sphere(n_dirs)
    radii = np.linspace(0.75 * r, 1.25 * r, n_layers)
    return (radii[:, None, None] * dirs[None, :, :]).reshape(-1, 3)


def unit_ball_rule(n_dirs: int = 200, n_radii: int = 6) -> tuple[np.ndarray, np.ndarray]:
    """Points and weights (summing to 1) averaging over the unit ball."""
    x, w = np.polynomial.legendre.leggauss(n_radii)
    rho = 0.5 * (x + 1.0)
    w_rho = 1.5 * w * rho**2
    pts = rho[:, None, None] * fibonacci_sphere(n_dirs)[None, :, :]
    return pts.reshape(-1, 3), np.repeat(w_rho / n_dirs, n_dirs)


def frozen_ball_ratio(m: WarpedMetric, s_c: float, r: float) -> float:
    """|B| / (4 pi r^3 / 3) for the frozen-metric ball of radius r centred at chart radius s_c.

    The centre sits on the z axis; the frozen ball is the chart ellipsoid with radial
    semi-axis r and tangential semi-axes r s_c / f(s_c).
    """
    pts, wts = unit_ball_rule()
    q = s_c / float(m.f(s_c)) if s_c > 0 else 1.0 / float(m.fp(0.0))
    x = r * pts * np.array([q, q, 1.0])
    x[:, 2] += s_c
    s = np.linalg.norm(x, axis=1)
    if s.max() > m.s_max:
        raise MetricError(f"ball of radius {r} at s={s_c} leaves the chart (s_max={m.s_max})")
    s = np.maximum(s, 1e-12)
    dens = (np.asarray(m.f(s), dtype=float) / s) ** 2
    return float((wts * dens).sum() * q**2)


def _radial_constants(m: WarpedMetric, R: float, declared_poincare, field, budget: int):
    notes = ["off-centre balls from the frozen metric at each centre"]
    if not m.pole:
        raise MetricError(f"{m.label}: geometry constants need a pole")
    if R > m.s_max:
        raise MetricError(f"R={R} beyond s_max={m.s_max}")
    radii = np.geomspace(R * 1e-3, R, min(budget, 64))
    dist = radial_distance(m, radii)
    vol = ball_volume(m, radii)
    ratios = list(vol / (BALL * dist**3))
    for s_c in np.linspace(0.0, R, max(2, min(budget, 64) // 8)):
        for r in (0.25 * R, 0.5 * R, R):
            try:
                ratios.append(frozen_ball_ratio(m, float(s_c), r))
            except MetricError:
                notes.append(f"ball r={r:.3g} at s={s_c:.3g} skipped (leaves the chart)")
    ratios = np.asarray(ratios)
    C_A = float(max(1.0, ratios.max(), 1.0 / ratios.min()))
    C_cov = max(greedy_cover_count(annulus_samples(r), 0.5 * r) for r in (0.25 * R, 0.5 * R, R))
    areas = sphere_area(m, radii)
    C_Sob = float((vol ** (2.0 / 3.0) / areas).max())
    if declared_poincare is not None:
        C_P, declared = float(declared_poincare), True
    else:
        # mean oscillation of the distance function over centred balls
        s = np.linspace(0.0, R, 4001)[1:]
        dens = 4.0 * math.pi * m.f(s) ** 2
        w = dens / dens.sum()
        mean = (w * s).sum()
        C_P, declared = float((w * np.abs(s - mean)).sum() / R), False
        notes.append("C_P diagnostic only")
    harnack, zeta, eta = 1.0, float("nan"), float("nan")
    if field is not None:
        from ..pharmonic.bounds import gradient_product, sphere_harnack_ratio
        harnack = sphere_harnack_ratio(field)
        zeta, eta = gradient_product(field)
    return GeometryConstants(C_A, int(C_cov), C_P, declared, C_Sob, harnack, zeta, eta,
                             "ok", tuple(notes))


def _grid_constants(m: GridMetric, o, R: float, declared_poincare, field, budget: int):
    from .lattice import KuhnMesh
    notes = ["ball volumes from the frozen metric at each centre"]
    confidence = "ok"
    node = m.node_of(o)
    d0 = m.frozen_distance(node)
    inside = np.argwhere(d0 < R)
    boundary = min(float((m.point_of(node) - m.lo).min()), float((m.hi - m.point_of(node)).min()))
    if R * math.sqrt(m.Lam) > 2.0 * boundary * math.sqrt(m.lam) + 1e-12:
        raise MetricError(f"B_2R(o) with R={R} leaves the chart box")
    stride = max(1, int(math.ceil((inside.shape[0] / max(budget, 1)) ** (1.0 / 3.0))))
    centers = [tuple(c) for c in inside if np.all(np.asarray(c) % stride == 0)]
    if len(centers) > budget:
        centers = centers[:budget]
        confidence = "truncated"
        logger.warning("geometry_constants: sampling budget %d reached", budget)
    mesh = KuhnMesh(m)
    rs = [r for r in (0.25 * R, 0.5 * R, R) if r >= 8.0 * m.h]
    if not rs:
        raise MetricError(f"R={R} is not resolved by the lattice (h={m.h})")
    ratios = []
    for c in centers:
        d = m.frozen_distance(c)
        for r in rs:
            ratios.append(mesh.volume_below(d, r) / (BALL * r**3))
    ratios = np.asarray(ratios)
    C_A = float(max(1.0, ratios.max(), 1.0 / ratios.min()))
    C_cov = max(greedy_cover_count(annulus_samples(r), 0.5 * r, m.g[node]) for r in rs)
    vols = np.array([mesh.volume_below(d0, r) for r in np.linspace(0.25 * R, R, 7)])
    rr = np.linspace(0.25 * R, R, 7)
    perims = np.gradient(vols, rr)
    C_Sob = float((vols ** (2.0 / 3.0) / perims).max())
    notes.append("C_Sob from centred balls, perimeter = dV/dr")
    if declared_poincare is not None:
        C_P, declared = float(declared_poincare), True
    else:
        sel = d0 < R
        u = d0[sel]
        wts = np.sqrt(np.linalg.det(m.g[sel]))
        mean = (wts * u).sum() / wts.sum()
        C_P, declared = float((wts * np.abs(u - mean)).sum() / wts.sum() / R), False
        notes.append("C_P diagnostic only")
    harnack, zeta, eta = 1.0, float("nan"), float("nan")
    if field is not None:
        from ..pharmonic.bounds import gradient_product, sphere_harnack_ratio
        harnack = sphere_harnack_ratio(field)
        zeta, eta = gradient_product(field)
    return GeometryConstants(C_A, int(C_cov), C_P, declared, C_Sob, harnack, zeta, eta,
                             confidence, tuple(notes))


def geometry_constants(m, o=None, R: float = 1.0, declared_poincare: float | None = None,
                       field=None, budget: int = 64) -> GeometryConstants:
    """Ahlfors, covering, Sobolev and Poincare constants of B_R(o), plus Harnack and
    gradient constants when a p-harmonic field on the ball is supplied."""
    if not R > 0:
        raise MetricError(f"R must be positive, got {R}")
    if isinstance(m, WarpedMetric):
        return _radial_constants(m, R, declared_poincare, field, budget)
    if isinstance(m, GridMetric):
        return _grid_constants(m, m.center if o is None else o, R, declared_poincare, field, budget)
    raise MetricError(f"unsupported metric {type(m).__name__}")


# ---------------------------------------------------------------------------
# scalar curvature from the small-ball volume deficit
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DeficitEstimate:
    value: float
    intercept: float
    residual: float
    converged: bool
    calibration: float


def _deficit_intercept(m: WarpedMetric, r_seq) -> tuple[float, float]:
    r = np.asarray(r_seq, dtype=float)
    if r.ndim != 1 or r.size < 4:
        raise MetricError("deficit estimate needs at least 4 radii")
    if np.any(np.diff(r) >= 0):
        raise MetricError("radii must be strictly decreasing")
    if r[0] > m.s_max or r[-1] <= 0:
        raise MetricError("radii outside the warp domain")
    vol = ball_volume(m, r)
    per = sphere_area(m, r)
    D = (vol - per**1.5 / (6.0 * SQRT_PI)) / r**5
    deg = 2 if r.size >= 5 else 1
    coef, res, *_ = np.polyfit(r**2, D, deg, full=True)
    fit = np.polyval(coef, r**2)
    resid = float(np.sqrt(np.mean((fit - D) ** 2)))
    return float(coef[-1]), resid


@lru_cache(maxsize=None)
def deficit_calibration() -> float:
    """c with R = c * lim r^-5 (|B_r| - P^{3/2}/(6 sqrt(pi))), fixed on the unit 3-sphere."""
    sphere = build_warped("spherical", {"a": 1.0})
    D0, _ = _deficit_intercept(sphere, default_radii())
    c = 6.0 / D0
    logger.info("deficit calibration c=%.10g (analytic 15/pi=%.10g)", c, 15.0 / math.pi)
    return c


def default_radii(r_max: float = 0.4, r_min: float = 0.05, n: int = 8) -> np.ndarray:
    return np.geomspace(r_max, r_min, n)


def deficit_scalar_estimate(m: WarpedMetric, o=None, r_seq=None) -> DeficitEstimate:
    """Scalar curvature at the pole from the isoperimetric deficit of centred balls."""
    if not isinstance(m, WarpedMetric) or not m.pole:
        raise MetricError("the deficit estimate is evaluated at the pole of a radial metric")
    if o is not None and np.any(np.asarray(o, dtype=float) != 0.0):
        raise MetricError("radial metrics are measured at their pole only")
    r_seq = default_radii(min(0.4, 0.5 * m.s_max)) if r_seq is None else r_seq
    D0, resid = _deficit_intercept(m, r_seq)
    c = deficit_calibration()
    converged = resid <= 1e-3 * abs(D0) + 1e-9
    if not converged:
        logger.warning("deficit fit residual %.3g against intercept %.3g", resid, D0)
    return DeficitEstimate(c * D0, D0, resid, converged, c)
