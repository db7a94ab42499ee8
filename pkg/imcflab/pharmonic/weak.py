# imcflab/pharmonic/weak.py
"""Minimality of sublevel sets for J_w^K(E) = P(E, K) - int_{E n K} |grad w|.

Competitors are radial dilations of a sublevel {w < t} about o by a factor
lam, so E_lam = {x : w(o + (x - o)/lam) < t}; lam = 1 is the sublevel itself.
"""
import logging
import math

import numpy as np
from scipy import integrate, ndimage, optimize

from ..errors import ConfigError
from ..metrics.lattice import KuhnMesh
from ..metrics.warped import WarpedMetric, sphere_area
from .field import PotentialField

logger = logging.getLogger(__name__)


def _level_radius(field: PotentialField, t: float) -> float:
    lo = field.radii[0]
    hi = field.radii[-2]
    return optimize.brentq(lambda s: field.at(s) - t, lo, hi, xtol=1e-15, rtol=1e-15, maxiter=200)


def _radial_J(field: PotentialField, sigma: float, k_lo: float) -> float:
    """J of the centred ball of radius sigma relative to the annulus k_lo < s."""
    m: WarpedMetric = field.metric
    # |grad w| dvol = (w'/phi) A phi ds
    flux, _ = integrate.quad(lambda s: float(field.slope(s)) * float(m.area(s)), k_lo, sigma,
                             epsabs=1e-13, epsrel=1e-13, limit=200)
    return float(sphere_area(m, sigma)) - flux


def _radial_probe(field: PotentialField, K: tuple, t_values, factors) -> list[dict]:
    k_lo, k_hi = K
    rows = []
    for t in t_values:
        s_t = _level_radius(field, t)
        if not k_lo < s_t < k_hi:
            raise ConfigError(f"sublevel boundary at s={s_t:.6g} (t={t}) not inside K={K}")
        base = _radial_J(field, s_t, k_lo)
        for lam in factors:
            sigma = lam * s_t
            if not k_lo < sigma < k_hi:
                raise ConfigError(f"competitor lam={lam} at t={t} not compactly supported in K={K}")
            rows.append({"t": float(t), "factor": float(lam), "difference": base - _radial_J(field, sigma, k_lo)})
    return rows


def _dilated(field: PotentialField, lam: float) -> np.ndarray:
    m = field.metric
    w = np.where(np.isfinite(field.w), field.w, field.t_hi + 50.0)
    X = np.stack(m.coords(), axis=0)
    o = np.asarray(field.pole, dtype=float).reshape(3, 1, 1, 1)
    src = o + (X - o) / lam
    idx = (src - m.lo.reshape(3, 1, 1, 1)) / m.h
    return ndimage.map_coordinates(w, idx, order=1, mode="nearest")


def _grid_J(field: PotentialField, mesh: KuhnMesh, grad_w, wl: np.ndarray, t: float, K: tuple) -> float:
    from ..imcf.levelset import isosurface
    d = field.distance
    k_lo, k_hi = K
    surf = isosurface(field.metric, wl, t)
    dc = surf.sample(d)
    inside = (dc > k_lo) & (dc < k_hi)
    perim = float(surf.areas[inside].sum())
    frac_E = mesh.fraction_below(wl, t)
    frac_K = mesh.fraction_below(d, k_hi) - mesh.fraction_below(d, k_lo)
    flux = float((mesh.vol * np.sqrt(mesh.norm2(grad_w)) * frac_E * frac_K).sum())
    return perim - flux


def _grid_probe(field: PotentialField, K: tuple, t_values, factors) -> list[dict]:
    m = field.metric
    d = field.distance
    k_lo, k_hi = K
    live = d < k_hi + 2.0 * m.h * math.sqrt(m.Lam)
    cubes = np.zeros(tuple(n - 1 for n in m.shape), dtype=bool)
    for di in (0, 1):
        for dj in (0, 1):
            for dk in (0, 1):
                cubes |= live[di:di + cubes.shape[0], dj:dj + cubes.shape[1], dk:dk + cubes.shape[2]]
    mesh = KuhnMesh(m, cube_mask=cubes)
    w = np.where(np.isfinite(field.w), field.w, field.t_hi + 50.0)
    grad_w = mesh.grad(w)
    rows = []
    for t in t_values:
        reach = d[w < t]
        if reach.size == 0 or not (reach.max() < k_hi and reach.max() > k_lo):
            raise ConfigError(f"sublevel at t={t} does not end inside K={K}")
        base = _grid_J(field, mesh, grad_w, w, t, K)
        for lam in factors:
            if not k_lo < lam * reach.max() < k_hi:
                raise ConfigError(f"competitor lam={lam} at t={t} not compactly supported in K={K}")
            other = base if lam == 1.0 else _grid_J(field, mesh, grad_w, _dilated(field, lam), t, K)
            rows.append({"t": float(t), "factor": float(lam), "difference": base - other})
    return rows


def weak_solution_probe(w: PotentialField, m=None, K: tuple = (0.1, 5.0), competitors=(1.0, 1.1, 0.9),
                        t_values=None) -> dict:
    """max over (t, competitor) of J(sublevel) - J(competitor); <= 0 certifies the tested family.

    K is the annulus K_lo < d(o, .) < K_hi; each competitor factor must keep
    the dilated boundary inside K.
    """
    K = (float(K[0]), float(K[1]))
    if not 0.0 <= K[0] < K[1]:
        raise ConfigError(f"region K must satisfy 0 <= K_lo < K_hi, got {K}")
    factors = [float(x) for x in competitors]
    if any(x <= 0 for x in factors):
        raise ConfigError("dilation factors must be positive")
    if t_values is None:
        if w.is_radial:
            mid = w.at(math.sqrt(max(K[0], 1e-9) * K[1]) if K[0] > 0 else 0.5 * K[1])
        else:
            sel = (w.distance > K[0]) & (w.distance < K[1]) & np.isfinite(w.w)
            mid = float(np.median(w.w[sel]))
        t_values = [mid]
    rows = _radial_probe(w, K, t_values, factors) if w.is_radial else _grid_probe(w, K, t_values, factors)
    worst = max(r["difference"] for r in rows)
    logger.info("weak_solution_probe: %d competitor(s), max J difference %.3e", len(rows), worst)
    return {"K": K, "rows": rows, "max_difference": worst}
