# imcflab/pharmonic/bounds.py
"""Empirical constants of the potential-theoretic estimates on a computed field.

Everything here measures: the smallest constant that makes a lower bound hold on
the sample set, the sphere Harnack ratio, the gradient product near the pole,
the comparison against the space-form Green function and sublevel containment.
"""
import logging
import math

import numpy as np

from ..errors import ConfigError
from ..metrics.warped import WarpedMetric, build_warped, radial_distance
from ..utils import scaled, verdict
from .field import PotentialField, SolverConfig
from .radial import green_log_profile

logger = logging.getLogger(__name__)


def _samples(field: PotentialField):
    """(distance to o, w) over the sample set used by every bound."""
    if field.is_radial:
        m = field.metric
        s = field.radii[:-1]
        s = s[s > m.s_min]
        r = radial_distance(m, s)
        w = field.at(s)
        keep = (w < field.t_hi) & (r > 0)
        return r[keep], w[keep], s[keep]
    d = field.distance
    sel = np.isfinite(field.w) & (d >= 2.0 * field.inner_radius) & (d > 0) & (d < 0.9 * field.r_outer)
    return d[sel], field.w[sel], None


def lower_bound_constant(field: PotentialField) -> tuple[float, float]:
    """(exponent e, smallest C) with w >= e log r - C on the samples; e = 3 - p, or 2 at p = 1."""
    r, w, _ = _samples(field)
    if r.size == 0:
        raise ConfigError("empty sample set")
    e = 2.0 if field.is_limit else 3.0 - field.p
    return e, float((e * np.log(r) - w).max())


def sphere_harnack_ratio(field: PotentialField, n_shells: int = 8) -> float:
    """max/min of G over spheres about o; radial fields are exactly 1.

    On the lattice each shell of nodes spans a small range of distances, so the
    radial trend is removed by a least-squares fit of log G against log d first.
    """
    if field.is_radial:
        return 1.0
    d = field.distance
    log_g = -field.w / (field.p - 1.0) if not field.is_limit else -field.w
    h = field.metric.h
    worst = 1.0
    for r in np.geomspace(2.0 * field.inner_radius, 0.8 * field.r_outer, n_shells):
        sel = np.isfinite(field.w) & (np.abs(d - r) <= 0.5 * h)
        if sel.sum() < 4:
            continue
        x = np.log(d[sel])
        A = np.stack([np.ones_like(x), x], axis=1)
        coef, *_ = np.linalg.lstsq(A, log_g[sel], rcond=None)
        resid = log_g[sel] - A @ coef
        worst = max(worst, float(math.exp(resid.max() - resid.min())))
    return worst


def _gradient_norm_lattice(field: PotentialField) -> np.ndarray:
    m = field.metric
    w = np.where(np.isfinite(field.w), field.w, np.nan)
    grads = np.gradient(w, m.h)
    G = np.stack(grads, axis=-1)
    ginv = m.inverse()
    return np.sqrt(np.einsum("...i,...ij,...j->...", G, ginv, G))


def gradient_product(field: PotentialField, eta: float | None = None) -> tuple[float, float]:
    """(zeta, eta): sup of |grad w| d(o, .) over 0 < d < eta, with eta = 0.1 R by default."""
    eta = eta or 0.1 * field.r_outer
    if field.is_radial:
        m = field.metric
        if not m.pole:
            return float("nan"), eta
        s = field.radii[field.radii < eta]
        prod = field.slope(s) / m.phi(s) * radial_distance(m, s)
        return float(np.max(prod)), eta
    d = field.distance
    lo = 2.0 * field.inner_radius
    hi = max(eta, 2.0 * lo)
    sel = (d >= lo) & (d <= hi) & np.isfinite(field.w)
    grad = _gradient_norm_lattice(field)
    prod = (grad * d)[sel]
    prod = prod[np.isfinite(prod)]
    return (float(prod.max()) if prod.size else float("nan")), hi


def gradient_product_range(field: PotentialField, eta: float | None = None) -> tuple[float, float]:
    """(min, max) of |grad w| d over the same region as gradient_product (radial fields)."""
    eta = eta or 0.1 * field.r_outer
    m = field.metric
    s = field.radii[field.radii < eta]
    prod = field.slope(s) / m.phi(s) * radial_distance(m, s)
    return float(prod.min()), float(prod.max())


def capacity_level_margin(field: PotentialField, n: int = 3, cfg: SolverConfig | None = None) -> np.ndarray:
    """Slack of max_{dB_r} w >= log Cap_p(B_r, B_R) - log c_norm on lattice balls about o.

    Each ball capacity is a separate energy minimization; the maximum of w is taken
    over the lattice shell within half a node spacing of the sphere. On radial fields
    both sides come from one quadrature and agree identically, so they are rejected.
    """
    if field.is_radial or field.is_limit:
        raise ConfigError("capacity_level_margin needs a lattice Green field with p > 1")
    m = field.metric
    cfg = cfg or SolverConfig()
    from .capacity import p_capacity
    d = field.distance
    band = 0.5 * m.h * math.sqrt(m.Lam)
    out = []
    for r in np.geomspace(2.0 * field.inner_radius, 0.5 * field.r_outer, n):
        shell = np.isfinite(field.w) & (np.abs(d - r) <= band)
        if not shell.any():
            continue
        cap = p_capacity(m, ("ball", float(r)), field.r_outer, field.p, o=field.pole_node, cfg=cfg).cap
        out.append(float(field.w[shell].max()) - (math.log(cap) - math.log(field.c_norm)))
    if not out:
        raise ConfigError("no lattice shell resolves a ball between 2 eps and R/2")
    return np.asarray(out)


def comparison_margin(field: PotentialField, a: float, n: int = 64) -> tuple[np.ndarray, np.ndarray]:
    """log G_p - log(space-form comparison integral) at radii r (should be >= 0).

    The comparison is the Green function of the space form of curvature -a,
    which is the integral of v_a^(-1/(p-1)) from r to R.
    """
    if field.is_limit:
        raise ConfigError("the comparison bound needs p > 1")
    p = field.p
    R = field.r_outer
    ref = build_warped("space_form", {"a": a}, s_max=R) if a > 0 else build_warped("euclidean", s_max=R)
    w_ref, _ = green_log_profile(ref, p, R)
    if field.is_radial:
        m = field.metric
        s = np.geomspace(max(field.radii[0], m.s_min + 1e-6), 0.9 * R, n)
        r = radial_distance(m, s)
        w = field.at(s)
    else:
        r_all, w_all, _ = _samples(field)
        idx = np.linspace(0, r_all.size - 1, min(n, r_all.size)).astype(int)
        order = np.argsort(r_all)[idx]
        r, w = r_all[order], w_all[order]
    return r, (w_ref(r) - w) / (p - 1.0)


def containment_margins(field: PotentialField, C: float, e: float, n: int = 12):
    """r - max{d(o,x): w(x) <= T_r} with T_r = e log r - C - 1, over r in (0, R)."""
    r_s, w_s, _ = _samples(field)
    out_r, margins = [], []
    for r in np.geomspace(r_s.min() * 2.0, 0.9 * field.r_outer, n):
        T = e * math.log(r) - C - 1.0
        inside = w_s <= T
        reach = float(r_s[inside].max()) if inside.any() else 0.0
        out_r.append(float(r))
        margins.append(r - reach)
    return np.asarray(out_r), np.asarray(margins)


def _ricci_scale(m) -> float:
    if isinstance(m, WarpedMetric) and m.kind == "space_form":
        return float(m.params["a"])
    return 0.0


def bound_checks(field: PotentialField, m=None, consts=None, a: float | None = None,
                 tolerance_scale: float | None = None) -> dict:
    """Measure every bound on the field and fold the checkable ones into verdicts."""
    m = m if m is not None else field.metric
    r, w, _ = _samples(field)
    if r.size == 0:
        raise ConfigError("bound_checks needs a non-empty sample set")
    e, C = lower_bound_constant(field)
    zeta, eta = gradient_product(field)
    harnack = sphere_harnack_ratio(field)
    report = {
        "p": field.p,
        "exponent": e,
        "C_lower": C,
        "harnack_ratio": harnack,
        "zeta": zeta,
        "eta": eta,
        "verdicts": [],
    }
    if consts is not None:
        report["constants"] = consts.as_dict()
    verdicts = report["verdicts"]
    tol_h = scaled(1e-9 if field.is_radial else 0.03, tolerance_scale)
    verdicts.append(verdict("harnack_sphere_ratio", [-(harnack - 1.0)], tol_h, hard=True,
                            detail=f"max/min of G per sphere = {harnack:.6g}"))
    if field.is_radial and field.metric.pole and not field.is_limit:
        lo, hi = gradient_product_range(field)
        report["gradient_product_range"] = (lo, hi)
        target = 3.0 - field.p
        verdicts.append(verdict("gradient_product", [-abs(lo / target - 1.0), -abs(hi / target - 1.0)],
                                scaled(0.01, tolerance_scale), hard=False,
                                detail=f"|grad w| d in [{lo:.6g}, {hi:.6g}] near the pole, target {target}"))
    if not field.is_radial and not field.is_limit:
        margins = capacity_level_margin(field)
        report["capacity_level_margin"] = float(margins.min())
        verdicts.append(verdict("capacity_level", margins, scaled(0.05, tolerance_scale), hard=False,
                                detail="max of w on lattice spheres against the solved ball capacity"))
    if not field.is_limit and (field.is_radial is False or field.metric.pole):
        ra = _ricci_scale(m) if a is None else float(a)
        rr, cm = comparison_margin(field, ra)
        report["comparison"] = {"a": ra, "worst_margin": float(cm.min())}
        verdicts.append(verdict("space_form_comparison", cm, scaled(1e-6 if field.is_radial else 0.05,
                                                                    tolerance_scale),
                                hard=False, detail=f"G_p against the a={ra} comparison integral"))
    radii, cont = containment_margins(field, C, e)
    report["containment"] = {"radii": radii.tolist(), "margins": cont.tolist()}
    verdicts.append(verdict("containment", cont, 0.0, hard=True,
                            detail=f"{{w <= {e:g} log r - C - 1}} inside B_r, C = {C:.6g}"))
    logger.info("bound_checks p=%s: C=%.6g zeta=%.6g harnack=%.6g", field.p, C, zeta, harnack)
    return report
