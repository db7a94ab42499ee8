# imcflab/pharmonic/radial.py
"""Closed-form p-harmonic Green functions of spherically symmetric metrics.

In log form the Green function reads

    w_p(s) = -log c_norm + log A(s) - (p-1) log J(s),
    J(s)   = int_s^R phi(t) exp(-q (log A(t) - log A(s))) dt,   q = 1/(p-1),

which never forms the singular A(t)^(-q) directly; the integrand is bounded by 1
on increasing warps. J is integrated on dyadic intervals accumulating at s with a
fixed Gauss-Legendre rule, vectorized over all sample radii.
"""
import logging
import math
from functools import lru_cache

import numpy as np
from scipy import interpolate

from ..config import CONF
from ..errors import MetricError, SolverError
from ..metrics.grid import GridMetric
from ..metrics.warped import WarpedMetric, check_increasing, radial_distance
from .field import PotentialField, check_exponent, green_constant

logger = logging.getLogger(__name__)


@lru_cache(maxsize=8)
def _gauss(n: int):
    return np.polynomial.legendre.leggauss(n)


def dyadic_integral(integrand, s: np.ndarray, R: float, levels: int | None = None,
                    nodes: int | None = None) -> np.ndarray:
    """int_s^R integrand(s, t) dt for every s, integrand vectorized in (s[:, None, None], t)."""
    levels = levels or CONF.dyadic_levels
    x, wq = _gauss(nodes or CONF.gauss_nodes)
    s = np.asarray(s, dtype=float)
    L = R - s
    k = np.arange(levels)
    a = s[:, None] + L[:, None] * 2.0 ** (-k - 1.0)  # interval [a, b]
    b = s[:, None] + L[:, None] * 2.0 ** (-k)
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    t = mid[..., None] + half[..., None] * x
    vals = integrand(s[:, None, None], t)
    total = (vals * wq).sum(axis=-1) * half
    # remaining sliver [s, s + L 2^-levels], integrand ~ its value at t = s
    sliver = L * 2.0 ** (-levels) * integrand(s[:, None, None], s[:, None, None])[:, 0, 0]
    return total.sum(axis=1) + sliver


def _log_area(m: WarpedMetric):
    return lambda t: m.log_area(t)


def green_log_profile(m: WarpedMetric, p: float, R: float):
    """(w, dw/ds) as vectorized callables for the Green function of B_R."""
    q = 1.0 / (p - 1.0)
    c = green_constant(p)
    logA = _log_area(m)

    def J(s):
        s = np.atleast_1d(np.asarray(s, dtype=float))
        out = np.zeros_like(s)
        live = s < R
        if live.any():
            out[live] = dyadic_integral(
                lambda ss, t: m.phi(t) * np.exp(-q * (logA(t) - logA(ss))), s[live], R)
        return out

    def w(s):
        s_arr = np.atleast_1d(np.asarray(s, dtype=float))
        j = J(s_arr)
        with np.errstate(divide="ignore"):
            val = -math.log(c) + logA(s_arr) - (p - 1.0) * np.log(j)
        return float(val[0]) if np.ndim(s) == 0 else val

    def dw(s):
        s_arr = np.atleast_1d(np.asarray(s, dtype=float))
        with np.errstate(divide="ignore"):
            val = (p - 1.0) * m.phi(s_arr) / J(s_arr)
        return float(val[0]) if np.ndim(s) == 0 else val

    return w, dw


def sample_radii(m: WarpedMetric, R: float, n: int) -> np.ndarray:
    if m.pole:
        r = np.geomspace(R * 1e-6, R, n)
    else:
        r = m.s_min + np.geomspace((R - m.s_min) * 1e-8, R - m.s_min, n)
    r[-1] = R
    return r


def _check_radius(m: WarpedMetric, R: float):
    if not (R > m.s_min and R <= m.s_max * (1 + 1e-12)):
        raise MetricError(f"R={R} outside ({m.s_min}, {m.s_max}] of {m.label}")


def radial_green(m: WarpedMetric, p: float, R: float, n_samples: int | None = None) -> PotentialField:
    """Normalized p-harmonic Green function of B_R centred at the pole.

    G(s) s^((3-p)/(p-1)) -> 1 at the pole; the residual on the three smallest
    samples is kept in diagnostics["normalization_error"].
    """
    p = check_exponent(p)
    _check_radius(m, R)
    check_increasing(m)
    n = n_samples or CONF.radial_samples
    w, dw = green_log_profile(m, p, R)
    radii = sample_radii(m, R, n)
    samples = w(radii)
    if not np.all(np.isfinite(samples[:-1])):
        raise SolverError(f"radial Green quadrature failed for {m.label} at p={p}",
                          {"nonfinite": int((~np.isfinite(samples[:-1])).sum())})
    if np.any(np.diff(samples) <= 0):
        raise SolverError(f"radial Green function of {m.label} not monotone at p={p}")
    diag = {"samples": int(n)}
    if m.pole:
        alpha = (3.0 - p) / (p - 1.0)
        dist = radial_distance(m, radii[:3])
        log_ratio = -samples[:3] / (p - 1.0) + alpha * np.log(dist)
        diag["normalization_error"] = float(np.abs(np.expm1(log_ratio)).max())
    t_hi = float(w(0.9 * R if m.pole else m.s_min + 0.9 * (R - m.s_min)))
    t_lo = -math.inf if m.pole else float(samples[0])
    field = PotentialField("green", p, m, float(R), green_constant(p), samples, radii=radii,
                           profile=w, slope=dw, inner_radius=m.s_min, t_lo=t_lo, t_hi=t_hi,
                           diagnostics=diag)
    logger.debug("radial_green %s p=%s R=%s diag=%s", m.label, p, R, diag)
    return field


def radial_limit_field(m: WarpedMetric, R: float | None = None, n_samples: int | None = None) -> PotentialField:
    """The p -> 1 limit w = log(A/4 pi) = 2 log f, the exact radial weak IMCF."""
    R = float(R or m.s_max)
    _check_radius(m, R)
    check_increasing(m)
    n = n_samples or CONF.radial_samples

    def w(s):
        val = 2.0 * np.log(np.asarray(m.f(s), dtype=float))
        return float(val) if np.ndim(s) == 0 else val

    def dw(s):
        val = 2.0 * np.asarray(m.fp(s), dtype=float) / np.asarray(m.f(s), dtype=float)
        return float(val) if np.ndim(s) == 0 else val

    radii = sample_radii(m, R, n)
    t_lo = -math.inf if m.pole else float(w(m.s_min))
    return PotentialField("log", 1.0, m, R, green_constant(1.0), w(radii), radii=radii,
                          profile=w, slope=dw, inner_radius=m.s_min, t_lo=t_lo, t_hi=float(w(R)),
                          cauchy_gap=0.0)


def _lattice_profile(field: PotentialField):
    """Cheap evaluator of a radial profile at many points (spline in log radius for p > 1)."""
    if field.is_limit:
        return field.profile
    m = field.metric
    r = field.radii[:-1]
    x = np.log(r - m.s_min) if not m.pole else np.log(r)
    spline = interpolate.CubicSpline(x, field.w[:-1])

    def w(s):
        s = np.asarray(s, dtype=float)
        out = np.full(s.shape, np.inf)
        ok = s < r[-1]
        xs = np.log(np.maximum(s[ok] - m.s_min, 1e-300)) if not m.pole else np.log(s[ok])
        out[ok] = spline(np.clip(xs, x[0], None))
        return out

    return w


def sample_on_grid(field: PotentialField, grid: GridMetric) -> PotentialField:
    """Lattice copy of a radial field on a chart realization of the same warp (s = |x|).

    Nodes beyond R get +inf; inside the inner sphere of a shell chart the field
    is filled below the horizon value, so every sublevel above it contains the
    whole filled core.
    """
    if not field.is_radial:
        raise ValueError("sample_on_grid needs a radial field")
    m = field.metric
    wf = _lattice_profile(field)
    X = np.stack(grid.coords(), axis=-1)
    s = np.linalg.norm(X, axis=-1)
    w = np.full(s.shape, np.inf)
    inside = s < field.r_outer
    if m.pole:
        s_eval = np.maximum(s, 1e-3 * grid.h)
        w[inside] = wf(s_eval[inside])
        dist = np.where(inside, s, np.inf)
        dist_table = radial_distance(m, np.linspace(1e-9, field.r_outer, 2049))
        dist[inside] = np.interp(s[inside], np.linspace(1e-9, field.r_outer, 2049), dist_table)
    else:
        out_shell = inside & (s >= m.s_min)
        w[out_shell] = wf(s[out_shell])
        core = s < m.s_min
        w[core] = field.t_lo - (m.s_min - s[core]) / m.s_min
        grid_s = np.linspace(m.s_min, field.r_outer, 2049)
        dist = np.full(s.shape, np.inf)
        dist[out_shell] = np.interp(s[out_shell], grid_s, radial_distance(m, grid_s))
        dist[core] = 0.0
    node = grid.node_of(np.zeros(3))
    return PotentialField("log" if field.kind == "log" else field.kind, field.p, grid, field.r_outer,
                          field.c_norm, w, pole_node=node, distance=dist,
                          inner_radius=field.inner_radius, t_lo=field.t_lo, t_hi=field.t_hi,
                          cauchy_gap=field.cauchy_gap,
                          diagnostics={"sampled_from": m.label})
