# imcflab/mass/rigidity.py
import logging

import numpy as np

from ..metrics.grid import GridMetric, grid_scalar_curvature
from ..metrics.warped import WarpedMetric, curvature_profile, radius_for_warp
from ..utils import scaled

logger = logging.getLogger(__name__)


def _max_curvature(m, report, field=None) -> float:
    """max |R| over the region swept by the flow."""
    if isinstance(m, WarpedMetric):
        T = report.T
        top = radius_for_warp(m, float(np.exp(0.5 * T))) if report.p == 1.0 else m.s_max
        lo = m.s_min + 1e-6 * (top - m.s_min)
        R, _ = curvature_profile(m, np.linspace(lo, top, 2001))
        return float(np.nanmax(np.abs(R)))
    if isinstance(m, GridMetric):
        R = grid_scalar_curvature(m)
        if field is not None and field.w is not None:
            region = field.w < report.T
        else:
            region = np.zeros(m.shape, dtype=bool)
            region[2:-2, 2:-2, 2:-2] = True
        return float(np.abs(R[region]).max()) if region.any() else float("nan")
    return float("nan")


def rigidity_probe(report, m, field=None, tolerance: float | None = None,
                   curvature_tolerance: float | None = None) -> dict:
    """Flatness diagnostics for flows whose quasi-local masses all vanish.

    When sup mQL exceeds the tolerance (or inf mQL falls below -tolerance) the
    probe is inapplicable and says so; otherwise it reports max |m_H| and max |R|
    over the flow region and flags the run rigidity-consistent when both are small.
    """
    tol = scaled(1e-9, None) if tolerance is None else tolerance
    tol_R = scaled(1e-6, None) if curvature_tolerance is None else curvature_tolerance
    mql = report.column("mQL")
    hawking = report.column("hawking")
    out = {"sup_mQL": float(mql.max()), "inf_mQL": float(mql.min()), "tolerance": tol}
    if mql.max() > tol or mql.min() < -tol:
        out.update({"applicable": False, "rigidity_consistent": False,
                    "reason": f"mQL ranges over [{mql.min():.3e}, {mql.max():.3e}], outside +-{tol:.1e}"})
        logger.info("rigidity_probe %s: inapplicable (%s)", report.label, out["reason"])
        return out
    max_mH = float(np.abs(hawking).max())
    max_R = _max_curvature(m, report, field)
    ok = max_mH < tol and max_R < tol_R
    out.update({"applicable": True, "max_abs_hawking": max_mH, "max_abs_R": max_R,
                "curvature_tolerance": tol_R, "rigidity_consistent": bool(ok)})
    logger.info("rigidity_probe %s: max|m_H|=%.3e max|R|=%.3e consistent=%s", report.label, max_mH, max_R, ok)
    return out
