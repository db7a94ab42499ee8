# imcflab/imcf/report.py
"""Flow reports: level-set geometry over a t-grid folded into inequality verdicts."""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..config import CONF
from ..errors import ConfigError
from ..pharmonic.bounds import lower_bound_constant
from ..pharmonic.field import PotentialField
from ..utils import scaled, verdict
from .levelset import SIXTEEN_PI, GridContext, LevelSetGeometry, sublevel_geometry

logger = logging.getLogger(__name__)

FOUR_PI = 4.0 * math.pi
SIX_SQRT_PI = 6.0 * math.sqrt(math.pi)

# (tolerance, hard) per check; lattice runs are advisory
TOLERANCES = {
    "radial": {
        "perimeter_law": (1e-6, True),
        "sublevel_monotone": (0.0, True),
        "components": (0.0, True),
        "geroch": (1e-8, True),
        "quasishi": (1e-6, True),
        "h2_estimate": (1e-6, True),
        "hawking_small": (1e-9, True),
        "containment": (0.0, True),
        "holder": (1e-6, True),
    },
    "grid": {
        "perimeter_law": (0.05, False),
        "sublevel_monotone": (1e-9, False),
        "components": (0.0, False),
        "geroch": (0.05, False),
        "quasishi": (0.05, False),
        "h2_estimate": (0.05 * SIXTEEN_PI, False),
        "hawking_small": (0.05, False),
        "containment": (0.0, False),
        "holder": (1e-9, False),
    },
}


@dataclass
class FlowReport:
    label: str
    p: float
    method: str
    delta: float
    T: float
    entries: list
    verdicts: list = field(default_factory=list)
    constants: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    @property
    def t(self) -> np.ndarray:
        return np.array([e.t for e in self.entries])

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(e, name) for e in self.entries])

    @property
    def hard_failures(self) -> list:
        return [v for v in self.verdicts if v["hard"] and not v["passed"]]

    @property
    def passed(self) -> bool:
        return not self.hard_failures

    def verdict(self, check_id: str) -> dict | None:
        return next((v for v in self.verdicts if v["id"] == check_id), None)

    @property
    def last(self) -> LevelSetGeometry:
        return self.entries[-1]

    def rows(self) -> list[dict]:
        out = []
        for e in self.entries:
            row = e.as_dict()
            row["perimeter_ratio"] = e.perimeter / (FOUR_PI * math.exp(e.t))
            out.append(row)
        return out

    def as_dict(self) -> dict:
        return {
            "label": self.label,
            "p": self.p,
            "method": self.method,
            "delta": self.delta,
            "T": self.T,
            "passed": self.passed,
            "constants": self.constants,
            "verdicts": self.verdicts,
            "notes": list(self.notes),
            "entries": self.rows(),
        }


def default_t_grid(w: PotentialField, spacing: float | None = None, t_min: float | None = None) -> np.ndarray:
    """Uniform t-grid from max(t_min, pole threshold + spacing) up to, not including, T."""
    spacing = spacing or CONF.t_spacing
    t_min = CONF.t_min if t_min is None else t_min
    lo, T = w.validity()
    start = max(t_min, lo + spacing) if math.isfinite(lo) else t_min
    grid = np.arange(start, T, spacing)
    grid = grid[grid < T - 1e-12]
    if grid.size < 2:
        raise ConfigError(f"t-grid from {start:.6g} to T={T:.6g} at spacing {spacing} has fewer than 2 levels")
    return grid


def geroch_correction(P0: float, P1: float, dt: float, delta: float) -> float:
    """delta/(16 pi)^{3/2} int P^{3/2} dt with P exponential in t between the two levels."""
    if delta == 0.0:
        return 0.0
    beta = math.log(P1 / P0) / dt
    x = 1.5 * beta * dt
    integral = P0**1.5 * dt * (math.expm1(x) / x if abs(x) > 1e-12 else 1.0)
    return delta / SIXTEEN_PI**1.5 * integral


def _t_range(ts, lo: int = 0, hi: int | None = None):
    sl = ts[lo:hi] if hi is not None else ts[lo:]
    return (float(sl[0]), float(sl[-1])) if len(sl) else (float("nan"), float("nan"))


def _has_pole(w: PotentialField) -> bool:
    """False for flows that start at an inner boundary sphere (shell charts)."""
    if w.is_radial:
        return bool(w.metric.pole)
    # lattice copies of shell fields keep their finite horizon threshold
    return "sampled_from" not in w.diagnostics or not math.isfinite(w.t_lo)


def _checks(rep: FlowReport, w: PotentialField, tol_scale) -> None:
    table = TOLERANCES[rep.method]
    E = rep.entries
    ts = rep.t
    full = _t_range(ts)
    V, P = rep.column("volume"), rep.column("perimeter")
    H2, mH = rep.column("H2_integral"), rep.column("hawking")
    has_pole = _has_pole(w)

    def add(check_id, margins, t_range=full, detail="", hard=None):
        tol, default_hard = table[check_id]
        rep.verdicts.append(verdict(check_id, margins, scaled(tol, tol_scale), t_range,
                                    default_hard if hard is None else hard, detail))

    add("sublevel_monotone", np.concatenate([np.diff(V), np.diff(P)]),
        detail="volume and perimeter non-decreasing in t")
    add("components", [1 - max(e.components, e.boundary_components) for e in E] +
        [min(e.components, e.boundary_components) - 1 for e in E],
        detail="sublevel and its boundary each connected")
    if not w.is_limit:
        rep.notes.append(f"p={w.p} iterate: flow identities (perimeter law, Geroch, reverse isoperimetry) "
                         "hold only in the p -> 1 limit and are not checked")
        return
    ratio = P / (FOUR_PI * np.exp(ts))
    add("perimeter_law", -np.abs(ratio - 1.0), detail=f"P/(4 pi e^t) in [{ratio.min():.9g}, {ratio.max():.9g}]")

    corr = np.array([geroch_correction(P[k], P[k + 1], ts[k + 1] - ts[k], rep.delta) for k in range(len(E) - 1)])
    add("geroch", np.diff(mH) + corr, detail=f"m_H differences with delta={rep.delta:g} correction")
    rep.constants["geroch_correction_total"] = float(corr.sum())

    T = float(ts[-1])
    bound = 1.0 / math.sqrt(1.0 + (2.0 / 3.0) * rep.delta * math.exp(T))
    iso = V * SIX_SQRT_PI / P**1.5
    add("quasishi", iso - bound, hard=None if has_pole else False,
        detail=f"|E| 6 sqrt(pi)/P^(3/2) >= {bound:.9g}; min ratio {iso.min():.9g}")
    rep.constants["reverse_isoperimetric_min"] = float(iso.min())
    add("h2_estimate", SIXTEEN_PI + (32.0 / 3.0) * rep.delta * math.pi * np.exp(ts) - H2,
        detail="int H^2 <= 16 pi + (32/3) delta pi e^t")

    resid = rep.column("holder_residual")
    if w.is_radial:
        add("holder", -np.abs(resid), detail="P^3 = int|grad w|^2 (int 1/|grad w|)^2 on constant-|grad w| levels")
    else:
        add("holder", -resid, detail="P^3 <= int|grad w|^2 (int 1/|grad w|)^2")

    if not has_pole:
        rep.notes.append("flow starts at an inner boundary: small-t Hawking decay and containment not checked")
        return
    q = max(2, len(E) // 4)
    head = np.abs(mH[:q])
    add("hawking_small", np.concatenate([[1e-3 - head[0]], np.diff(head)]), t_range=_t_range(ts, 0, q),
        detail=f"|m_H| decreasing as t decreases, |m_H(t_0)| = {head[0]:.3e}")
    e, C = lower_bound_constant(w)
    rep.constants["C"] = C
    r_t = np.exp((ts + C + 1.0) / e)
    inside = r_t < w.r_outer
    reach = rep.column("containment_radius")
    add("containment", (r_t - reach)[inside], t_range=_t_range(ts[inside]) if inside.any() else full,
        detail=f"{{w <= t}} inside B_r with t = {e:g} log r - C - 1, C = {C:.6g}")


def flow_report(w: PotentialField, m=None, t_grid=None, delta: float = 0.0, tolerance_scale: float | None = None,
                threads: int | None = None) -> FlowReport:
    """Evaluate every level of the t-grid and fold the flow inequalities into verdicts.

    Check failures are verdict entries; only an invalid t-grid raises.
    """
    if delta < 0:
        raise ConfigError(f"defect delta must be non-negative, got {delta}")
    ts = default_t_grid(w) if t_grid is None else np.asarray(t_grid, dtype=float)
    lo, T = w.validity()
    if ts.ndim != 1 or ts.size < 2 or np.any(np.diff(ts) <= 0):
        raise ConfigError("t-grid must be strictly increasing with at least 2 levels")
    if ts[-1] >= T or (math.isfinite(lo) and ts[0] <= lo):
        raise ConfigError(f"t-grid [{ts[0]:.6g}, {ts[-1]:.6g}] leaves the validity range ({lo:.6g}, {T:.6g})")
    ctx = None if w.is_radial else GridContext(w)
    with ThreadPoolExecutor(max_workers=max(1, threads or CONF.threads)) as ex:
        entries = list(ex.map(lambda t: sublevel_geometry(w, float(t), m, ctx), ts))
    label = getattr(w.metric, "label", "metric")
    rep = FlowReport(label, w.p, "radial" if w.is_radial else "grid", float(delta), float(ts[-1]), entries)
    rep.constants["C1"] = float(max(e.perimeter * math.exp(-e.t) for e in entries))
    _checks(rep, w, tolerance_scale)
    logger.info("flow_report %s: %d levels in [%.4g, %.4g], %d verdict(s), %d hard failure(s)",
                label, len(entries), ts[0], ts[-1], len(rep.verdicts), len(rep.hard_failures))
    return rep
