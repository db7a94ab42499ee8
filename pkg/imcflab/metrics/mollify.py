# imcflab/metrics/mollify.py
import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import ndimage

from ..errors import MetricError
from .grid import GridMetric, grid_scalar_curvature, make_grid
from .warped import WarpedMetric, curvature_profile, sample_warp, sampled_warp

logger = logging.getLogger(__name__)

# samples per mollification width when a closed-form warp is resampled
SAMPLES_PER_SIGMA = 40


@dataclass(frozen=True)
class SmoothedApproximation:
    base: object
    sigma: float
    smoothed: object
    eps_defect: float
    region: tuple
    curvature_floor: float
    base_floor: float
    excess_defect: float
    flagged: int = 0

    @property
    def is_radial(self) -> bool:
        return isinstance(self.smoothed, WarpedMetric)


def bump_kernel(sigma: float, h: float) -> np.ndarray:
    """exp(-1/(1 - (y/sigma)^2)) on |y| < sigma sampled at spacing h, unit mass."""
    K = int(math.floor(sigma / h))
    if K < 2:
        raise MetricError(f"mollification width {sigma} unresolved at spacing {h}")
    y = np.arange(-K, K + 1) * h / sigma
    with np.errstate(divide="ignore", over="ignore"):
        w = np.where(np.abs(y) < 1.0, np.exp(-1.0 / (1.0 - y**2)), 0.0)
    return w / w.sum()


def smooth_step(x):
    """C-infinity step: 0 for x <= 0, 1 for x >= 1."""
    x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore"):
        a = np.where(x > 0, np.exp(-1.0 / np.where(x > 0, x, 1.0)), 0.0)
        b = np.where(x < 1, np.exp(-1.0 / np.where(x < 1, 1.0 - x, 1.0)), 0.0)
    return a / (a + b)


def collar_width(sigma: float, s_max: float) -> float:
    """Width of the pole collar; shrinks like sqrt(sigma) and never drops below 2 sigma."""
    return max(2.0 * sigma, math.sqrt(sigma * 0.25 * s_max))


def pole_collar(s, slope: float, sigma: float, s_max: float) -> np.ndarray:
    """Factor bringing the pole slope to 1 inside the collar and equal to 1 outside it."""
    step = smooth_step(np.asarray(s) / collar_width(sigma, s_max))
    return np.where(step >= 1.0, 1.0, 1.0 / slope + (1.0 - 1.0 / slope) * step)


def _warped_region(m: WarpedMetric, sigma: float, region):
    lo_dom = (0.0 if m.pole else m.s_min + sigma)
    hi_dom = m.s_max - sigma
    if region is None:
        region = (max(sigma, lo_dom), m.s_max - 2.0 * sigma)
    lo, hi = float(region[0]), float(region[1])
    if lo < lo_dom or hi > hi_dom or lo >= hi:
        raise MetricError(
            f"region ({lo:.6g}, {hi:.6g}) not inside the domain minus a {sigma:.3g} collar "
            f"({lo_dom:.6g}, {hi_dom:.6g})")
    return lo, hi


def _mollify_warped(m: WarpedMetric, sigma: float, region, h: float | None) -> SmoothedApproximation:
    if m.has_lapse:
        raise MetricError(f"{m.label}: mollification needs an arclength-parameterized warp")
    lo, hi = _warped_region(m, sigma, region)
    src = m if m.is_sampled and h is None else sample_warp(m, h or sigma / SAMPLES_PER_SIGMA)
    w = bump_kernel(sigma, src.h)
    K = (w.size - 1) // 2
    f = src.values
    if src.pole:
        ext = np.concatenate([-f[K:0:-1], f])
        out = ndimage.convolve1d(ext, w, mode="nearest")[K:]
        slope = out[1] / src.h
        if abs(slope - 1.0) <= sigma**2:
            # smooth pole: averaging only scaled the warp by the kernel mean of f'
            out /= slope
        else:
            out *= pole_collar(src.nodes, slope, sigma, src.s_max)
        out[0] = 0.0
    else:
        out = ndimage.convolve1d(f, w, mode="nearest")
    smoothed = sampled_warp(out, h=src.h, s=src.nodes if not src.pole else None,
                            base_kind=m.base_kind or m.kind, sigma=sigma)
    s = src.nodes[(src.nodes >= lo) & (src.nodes <= hi)]
    R, ok = curvature_profile(smoothed, s)
    flagged = int((~ok).sum())
    if flagged:
        logger.warning("mollify: %d sample(s) of the smoothed warp still flagged as corners", flagged)
    floor = float(np.nanmin(R))
    Rb, okb = curvature_profile(m, s)
    base_floor = float(np.nanmin(Rb)) if okb.any() else float("nan")
    excess = max(0.0, base_floor - floor) if math.isfinite(base_floor) else float("nan")
    return SmoothedApproximation(m, sigma, smoothed, max(0.0, -floor), (lo, hi), floor,
                                 base_floor, excess, flagged)


def _mollify_grid(m: GridMetric, sigma: float, region) -> SmoothedApproximation:
    w = bump_kernel(sigma, m.h)
    K = (w.size - 1) // 2
    g = np.array(m.g)
    for axis in range(3):
        g = ndimage.convolve1d(g, w, axis=axis, mode="nearest")
    smoothed = make_grid(g, m.lo, m.h, label=f"{m.label}*rho[{sigma}]")
    collar = K + 2
    n = np.asarray(m.shape)
    if region is None:
        region = (m.lo + collar * m.h, m.hi - collar * m.h)
    lo_idx = np.ceil((np.asarray(region[0]) - m.lo) / m.h - 1e-9).astype(int)
    hi_idx = np.floor((np.asarray(region[1]) - m.lo) / m.h + 1e-9).astype(int)
    if np.any(lo_idx < collar) or np.any(hi_idx > n - 1 - collar) or np.any(lo_idx >= hi_idx):
        raise MetricError("region not inside the chart box minus the mollification collar")
    sl = tuple(slice(a, b + 1) for a, b in zip(lo_idx, hi_idx))
    R = grid_scalar_curvature(smoothed)[sl]
    floor = float(R.min())
    Rb = grid_scalar_curvature(m)[sl]
    base_floor = float(Rb.min())
    return SmoothedApproximation(m, sigma, smoothed, max(0.0, -floor),
                                 (m.lo + lo_idx * m.h, m.lo + hi_idx * m.h), floor, base_floor,
                                 max(0.0, base_floor - floor))


def mollify(m, sigma: float, region=None, h: float | None = None) -> SmoothedApproximation:
    """Convolve the warp (or each g_ij) with the unit-mass bump of width sigma.

    A warp with a pole is extended oddly before convolving. When the averaged pole
    slope is within sigma^2 of 1 the warp is divided by it; a conical pole is instead
    brought to slope 1 inside a collar that shrinks with sigma, so the smoothed warp
    converges uniformly away from the pole.

    eps_defect = max(0, -inf R_smoothed) over the region; excess_defect measures how
    far the smoothed curvature drops below the base curvature floor.
    """
    if not sigma > 0:
        raise MetricError(f"mollification width must be positive, got {sigma}")
    if isinstance(m, WarpedMetric):
        return _mollify_warped(m, sigma, region, h)
    if isinstance(m, GridMetric):
        return _mollify_grid(m, sigma, region)
    raise MetricError(f"cannot mollify {type(m).__name__}")


def refinement_family(m, sigmas: Sequence[float], region=None, h: float | None = None):
    """Mollify along a decreasing width sequence; returns (family, defects non-increasing)."""
    sigmas = [float(x) for x in sigmas]
    if any(b >= a for a, b in zip(sigmas, sigmas[1:])):
        raise MetricError("refinement widths must be strictly decreasing")
    family = [mollify(m, s, region=region, h=h) for s in sigmas]
    defects = [a.eps_defect for a in family]
    monotone = all(b <= a * (1 + 1e-9) + 1e-12 for a, b in zip(defects, defects[1:]))
    return family, monotone
