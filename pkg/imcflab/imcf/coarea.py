# imcflab/imcf/coarea.py
"""Numerical coarea identity: int_Omega |grad f| dvol against int P({f < t}, Omega) dt."""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import integrate, ndimage, optimize

from ..config import CONF
from ..errors import ConfigError
from ..metrics.grid import GridMetric
from ..metrics.lattice import KuhnMesh
from ..metrics.warped import WarpedMetric, radial_distance
from .levelset import isosurface

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CoareaResult:
    lhs: float
    rhs: float
    error: float
    levels: int
    method: str


def _relative(lhs: float, rhs: float) -> float:
    scale = max(abs(lhs), abs(rhs))
    return 0.0 if scale == 0.0 else abs(lhs - rhs) / scale


def _radial(f, m: WarpedMetric, region) -> CoareaResult:
    lo, hi = (m.s_min, m.s_max) if region is None else (float(region[0]), float(region[1]))
    if not m.s_min <= lo < hi <= m.s_max:
        raise ConfigError(f"region ({lo}, {hi}) outside the chart ({m.s_min}, {m.s_max})")
    if isinstance(f, str):
        if f != "distance":
            raise ConfigError(f"unknown radial function {f!r}")
        f = lambda s: radial_distance(m, s)
    opts = dict(epsabs=1e-13, epsrel=1e-12, limit=400)
    s = np.linspace(lo, hi, 1025)
    vals = np.asarray(f(s), dtype=float)
    steps = np.diff(vals)
    if np.all(steps == 0):
        return CoareaResult(0.0, 0.0, 0.0, 0, "radial")
    if not (np.all(steps > 0) or np.all(steps < 0)):
        raise ConfigError("radial coarea needs a strictly monotone function of s")
    sign = 1.0 if steps[0] > 0 else -1.0
    h = 1e-7 * (hi - lo)

    def grad_density(x):
        # |f_r| A phi ds with f_r = f'/phi
        a, b = max(lo, x - h), min(hi, x + h)
        df = (float(f(b)) - float(f(a))) / (b - a)
        return abs(df) * float(m.area(x))

    lhs, _ = integrate.quad(grad_density, lo, hi, **opts)
    f_lo, f_hi = float(f(lo)), float(f(hi))

    def level_area(t):
        x = optimize.brentq(lambda y: sign * (float(f(y)) - t), lo, hi, xtol=1e-15, rtol=4e-16)
        return float(m.area(x))

    rhs, _ = integrate.quad(level_area, min(f_lo, f_hi), max(f_lo, f_hi), **opts)
    return CoareaResult(lhs, rhs, _relative(lhs, rhs), 0, "radial")


_BARY = np.array([[1, 0, 0], [0, 1, 0], [0, 0, 1], [0.5, 0.5, 0], [0, 0.5, 0.5], [0.5, 0, 0.5],
                  [1 / 3, 1 / 3, 1 / 3]])


def _grid(f: np.ndarray, m: GridMetric, chi, n_levels: int) -> CoareaResult:
    f = np.asarray(f, dtype=float)
    if f.shape != m.shape:
        raise ConfigError(f"field shape {f.shape} does not match the lattice {m.shape}")
    if not np.all(np.isfinite(f)):
        raise ConfigError("coarea field must be finite on the lattice")
    mesh = KuhnMesh(m)
    frac = np.ones_like(mesh.vol) if chi is None else mesh.fraction_below(chi, 0.0)
    grad = np.sqrt(mesh.norm2(mesh.grad(f)))
    lhs = float((mesh.vol * grad * frac).sum())
    a, b = float(f.min()), float(f.max())
    if b - a <= 1e-14 * max(1.0, abs(a)):
        return CoareaResult(0.0, 0.0, 0.0, 0, "grid")
    dt = (b - a) / n_levels
    levels = a + dt * (np.arange(n_levels) + 0.5)

    def slice_area(t):
        surf = isosurface(m, f, t)
        if surf.faces.size == 0:
            return 0.0
        if chi is None:
            return surf.area
        tri = surf.verts[surf.faces]  # (n, 3, 3)
        pts = np.einsum("qk,nkd->nqd", _BARY, tri).reshape(-1, 3)
        inside = ndimage.map_coordinates(chi, pts.T, order=1, mode="nearest") < 0.0
        weight = inside.reshape(-1, _BARY.shape[0]).mean(axis=1)
        return float((surf.areas * weight).sum())

    with ThreadPoolExecutor(max_workers=max(1, CONF.threads)) as ex:
        areas = list(ex.map(slice_area, levels))
    rhs = float(np.sum(areas) * dt)
    return CoareaResult(lhs, rhs, _relative(lhs, rhs), n_levels, "grid")


def coarea_check(f, m, region=None, n_levels: int = 128) -> CoareaResult:
    """Relative gap between the two sides of the coarea formula.

    Radial: f is a monotone callable of s (or "distance") and region an interval
    (s_lo, s_hi). Lattice: f holds nodal values and region is a nodal level
    function chi with Omega = {chi < 0}, or None for the whole box. A constant f
    gives zero on both sides and error 0.
    """
    if isinstance(m, WarpedMetric):
        res = _radial(f, m, region)
    elif isinstance(m, GridMetric):
        chi = None if region is None else np.asarray(region, dtype=float)
        if chi is not None and chi.shape != m.shape:
            raise ConfigError("region level function must live on the lattice")
        res = _grid(f, m, chi, n_levels)
    else:
        raise ConfigError(f"unsupported metric {type(m).__name__}")
    logger.info("coarea_check (%s): lhs=%.10g rhs=%.10g error=%.3e", res.method, res.lhs, res.rhs, res.error)
    return res
