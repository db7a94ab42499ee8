# imcflab/pharmonic/limit.py
"""p -> 1 continuation: w_p = -(p-1) log G_p along a decreasing schedule."""
import logging
from dataclasses import replace

import numpy as np

from ..errors import SolverError
from ..metrics.grid import GridMetric
from ..metrics.warped import WarpedMetric
from .field import PotentialField, SolverConfig
from .grid_solver import grid_green
from .radial import radial_green

logger = logging.getLogger(__name__)


def _radial_annulus(m: WarpedMetric, R: float, annulus: tuple) -> np.ndarray:
    lo, hi = annulus
    lo = max(lo + m.s_min, m.s_min + 1e-9)
    hi = min(hi + m.s_min, m.s_min + 0.9 * (R - m.s_min))
    if not lo < hi:
        raise SolverError(f"annulus {annulus} does not meet the valid range of B_R with R={R}")
    return np.geomspace(lo, hi, 257)


def _grid_annulus(field: PotentialField, annulus: tuple) -> np.ndarray:
    d = field.distance
    lo = max(annulus[0], 2.0 * field.inner_radius)
    hi = min(annulus[1], 0.8 * field.r_outer)
    sel = (d >= lo) & (d <= hi)
    if not sel.any():
        raise SolverError(f"annulus {annulus} holds no lattice nodes between {lo:.4g} and {hi:.4g}")
    return sel


def imcf_limit(m, o=None, R: float | None = None, cfg: SolverConfig | None = None) -> PotentialField:
    """Run the p-schedule until consecutive w_p differ by less than cfg.cauchy_tol on the annulus.

    Returns the last iterate tagged with the achieved Cauchy gap; an exhausted
    schedule gives converged=False instead of an error.
    """
    cfg = cfg or SolverConfig()
    radial = isinstance(m, WarpedMetric)
    if not radial and not isinstance(m, GridMetric):
        raise SolverError(f"unsupported metric {type(m).__name__}")
    if R is None:
        if not radial:
            raise SolverError("grid continuation needs an explicit R")
        R = m.s_max
    probe = _radial_annulus(m, R, cfg.annulus) if radial else None
    prev, last, gaps = None, None, []
    for k, p in enumerate(cfg.p_schedule):
        try:
            field = radial_green(m, p, R, cfg.radial_samples) if radial else grid_green(m, o, p, R, cfg)
        except SolverError as e:
            if last is None:
                raise
            logger.warning("p=%s failed (%s); returning the p=%s iterate", p, e, last.p)
            break
        if radial:
            cur = field.at(probe)
        else:
            if probe is None:
                probe = _grid_annulus(field, cfg.annulus)
            cur = field.w[probe]
        if prev is not None:
            gap = float(np.abs(cur - prev).max())
            gaps.append(gap)
            logger.debug("p=%s cauchy gap %.3e", p, gap)
            if gap < cfg.cauchy_tol:
                return _tag(field, gap, True, cfg, gaps)
        prev, last = cur, field
    gap = gaps[-1] if gaps else float("nan")
    logger.warning("p-schedule exhausted at p=%s with cauchy gap %.3e (tol %.1e)", last.p, gap, cfg.cauchy_tol)
    return _tag(last, gap, False, cfg, gaps)


def _tag(field: PotentialField, gap: float, ok: bool, cfg: SolverConfig, gaps: list) -> PotentialField:
    diag = dict(field.diagnostics)
    diag.update({"schedule": [p for p in cfg.p_schedule if p >= field.p], "cauchy_gaps": gaps})
    return replace(field, kind="log", cauchy_gap=gap, converged=ok and field.converged, diagnostics=diag)
