# imcflab/pharmonic/capacity.py
import logging
import math

import numpy as np
from scipy import optimize

from ..errors import ConfigError, MetricError
from ..metrics.grid import GridMetric
from ..metrics.lattice import KuhnMesh
from ..metrics.warped import WarpedMetric
from .field import CapacityReport, PotentialField, SolverConfig, check_exponent, green_constant
from .grid_solver import CapacitaryProblem, check_geometry, resolve_node
from .radial import green_log_profile

logger = logging.getLogger(__name__)


def parse_descriptor(K) -> tuple[str, float]:
    """("ball", r) | ("sublevel", t) | {"ball": r} | {"sublevel": t}."""
    if isinstance(K, dict):
        if len(K) != 1:
            raise ConfigError(f"set descriptor needs exactly one key, got {sorted(K)}")
        (kind, value), = K.items()
    else:
        kind, value = K
    if kind not in ("ball", "sublevel"):
        raise ConfigError(f"unknown set descriptor {kind!r}; expected ball or sublevel")
    return kind, float(value)


def _radial_radius_for_level(w, t: float, lo: float, hi: float) -> float:
    if not w(lo) < t < w(hi):
        raise MetricError(f"level t={t} not attained inside ({lo:.6g}, {hi:.6g})")
    return optimize.brentq(lambda s: w(s) - t, lo, hi, xtol=1e-14, rtol=1e-14, maxiter=200)


def radial_capacity(m: WarpedMetric, K, R: float, p: float) -> CapacityReport:
    """Cap_p of a centred ball (or a sublevel of w_p) in B_R through the 1-D formula.

    Cap_p(B_s, B_R) = A(s) J(s)^(1-p) with J the normalized radial integral of
    the Green profile, i.e. c_norm e^(w_p(s)).
    """
    p = check_exponent(p)
    kind, value = parse_descriptor(K)
    w, _ = green_log_profile(m, p, R)
    c = green_constant(p)
    if kind == "ball":
        s = value
        if not m.s_min < s < R:
            raise MetricError(f"ball radius {s} not compactly inside B_R with R={R}")
    else:
        lo = m.s_min + 1e-9 * (R - m.s_min) if not m.pole else R * 1e-9
        s = _radial_radius_for_level(w, value, lo, 0.999 * R)
    cap = c * math.exp(w(s))
    return CapacityReport(f"{kind}:{value:.17g}", cap, cap, 0.0, p, "radial")


def _ball_capacity_grid(m: GridMetric, o, r: float, R: float, p: float, cfg: SolverConfig) -> CapacityReport:
    node = resolve_node(m, o)
    if not r < R:
        raise MetricError(f"ball radius {r} not compactly inside B_R with R={R}")
    check_geometry(m, node, r, R, cfg, ratio_check=False)
    prob = CapacitaryProblem(m, node, p, r, R)
    prob.warm_start((3.0 - p) / (p - 1.0))
    diag = prob.solve(cfg)
    cap = prob.capacity()
    logger.info("grid capacity of B_%s in B_%s (p=%s): %.8g", r, R, p, cap)
    return CapacityReport(f"ball:{r:.17g}", cap, diag["energy"], diag["residual"], p, "grid")


def sublevel_capacity(field: PotentialField, t: float) -> CapacityReport:
    """Cap_p({w_p <= t}, B_R) from a lattice Green field.

    With tau = e^(-t/(p-1)) the truncation min(G/tau, 1) is the capacitary
    potential, so Cap = tau^-p sum_T vol_T |{G < tau} n T|/|T| |grad G|^p.
    """
    if field.is_radial or field.is_limit:
        raise ConfigError("sublevel_capacity needs a lattice Green field with p > 1")
    p = field.p
    m = field.metric
    G = field.green()
    tau = math.exp(-t / (p - 1.0))
    live = np.isfinite(field.distance) & (field.distance < field.r_outer + 2.0 * m.h * math.sqrt(m.Lam))
    cubes = np.zeros(tuple(n - 1 for n in m.shape), dtype=bool)
    for di in (0, 1):
        for dj in (0, 1):
            for dk in (0, 1):
                cubes |= live[di:di + cubes.shape[0], dj:dj + cubes.shape[1], dk:dk + cubes.shape[2]]
    mesh = KuhnMesh(m, cube_mask=cubes)
    grad = mesh.grad(G)
    frac = mesh.fraction_below(G, tau)
    cap = float(tau ** (-p) * (mesh.vol * frac * mesh.norm2(grad) ** (p / 2.0)).sum())
    return CapacityReport(f"sublevel:{t:.17g}", cap, cap, field.diagnostics.get("residual", 0.0), p, "grid")


def p_capacity(m, K, R: float, p: float, o=None, cfg: SolverConfig | None = None,
               field: PotentialField | None = None) -> CapacityReport:
    """Relative p-capacity of K in B_R(o).

    Radial metrics use the closed-form quadrature. On a grid metric, balls are
    solved by energy minimization and sublevels of w_p are measured on `field`
    (computed by grid_green when not supplied).
    """
    p = check_exponent(p)
    kind, value = parse_descriptor(K)
    if isinstance(m, WarpedMetric):
        return radial_capacity(m, (kind, value), R, p)
    if not isinstance(m, GridMetric):
        raise MetricError(f"unsupported metric {type(m).__name__}")
    cfg = cfg or SolverConfig()
    o = m.center if o is None else o
    if kind == "ball":
        return _ball_capacity_grid(m, o, value, R, p, cfg)
    if field is None:
        from .grid_solver import grid_green
        field = grid_green(m, o, p, R, cfg)
    lo, hi = field.validity()
    if not lo < value < hi:
        raise MetricError(f"sublevel t={value} outside the field's valid range ({lo:.4g}, {hi:.4g})")
    return sublevel_capacity(field, value)


def capacity_law(report: CapacityReport, t: float) -> float:
    """Cap_p e^-t / c_norm, which is 1 for exact sublevels of w_p."""
    return report.cap * math.exp(-t) / green_constant(report.p)


def monotone_pair(inner: CapacityReport, outer: CapacityReport, rtol: float = 1e-9) -> bool:
    """Cap_p(K1) <= Cap_p(K2) for K1 inside K2."""
    return inner.cap <= outer.cap * (1.0 + rtol)
