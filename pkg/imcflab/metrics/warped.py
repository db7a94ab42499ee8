# imcflab/metrics/warped.py
"""Spherically symmetric 3-metrics  phi(s)^2 ds^2 + f(s)^2 g_{S^2}.

phi is the lapse; it is identically 1 for every arclength-parameterized kind and
only differs for the isotropic Schwarzschild chart.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate, optimize

from ..config import CONF
from ..errors import MetricError

logger = logging.getLogger(__name__)

FOUR_PI = 4.0 * math.pi
KINDS = ("euclidean", "space_form", "spherical", "schwarzschild", "sampled")


def _one(s):
    return np.ones_like(np.asarray(s, dtype=float))


def _zero(s):
    return np.zeros_like(np.asarray(s, dtype=float))


@dataclass(frozen=True)
class WarpedMetric:
    kind: str
    s_max: float
    f: Callable
    df: Optional[Callable] = None
    d2f: Optional[Callable] = None
    phi: Callable = _one
    dphi: Callable = _zero
    s_min: float = 0.0
    pole: bool = True
    params: dict = field(default_factory=dict)
    # sampled warps: uniform nodes s_k = k*h and values f_k
    h: float = 0.0
    nodes: Optional[np.ndarray] = None
    values: Optional[np.ndarray] = None
    kinks: Optional[np.ndarray] = None
    base_kind: str = ""

    # ---- identity / hashing -------------------------------------------------

    @property
    def label(self) -> str:
        if not self.params:
            return self.kind
        inner = ",".join(f"{k}={v}" for k, v in sorted(self.params.items()) if np.isscalar(v))
        return f"{self.kind}({inner})"

    def fingerprint(self) -> str:
        if self.values is not None:
            from ..utils import sha12
            return f"{self.label}:{sha12(np.ascontiguousarray(self.values).tobytes())}"
        return f"{self.label}:s_max={self.s_max!r}"

    @property
    def is_sampled(self) -> bool:
        return self.values is not None

    @property
    def has_lapse(self) -> bool:
        return self.kind == "schwarzschild"

    # ---- domain -------------------------------------------------------------

    def check_domain(self, s, allow_min: bool = False):
        arr = np.asarray(s, dtype=float)
        lo_ok = arr >= self.s_min if allow_min else arr > self.s_min
        if not np.all(lo_ok & (arr <= self.s_max * (1 + 1e-12))):
            raise MetricError(
                f"s={arr if arr.ndim == 0 else (arr.min(), arr.max())} outside "
                f"({self.s_min}, {self.s_max}] for {self.label}")
        return arr

    # ---- derivatives (finite differences for sampled warps) -----------------

    def stencil(self) -> float:
        sigma = float(self.params.get("sigma", 0.0))
        hf = max(self.h, sigma / 4.0)
        if self.h > 0:
            hf = max(1, round(hf / self.h)) * self.h
        return hf

    def _ext(self, s):
        """Warp with odd extension through the pole, clamped at s_max."""
        s = np.asarray(s, dtype=float)
        if self.pole:
            return np.sign(s) * self.f(np.minimum(np.abs(s), self.s_max))
        return self.f(np.clip(s, self.s_min, self.s_max))

    def fp(self, s):
        if self.df is not None:
            return self.df(s)
        hf = self.stencil()
        s = np.asarray(s, dtype=float)
        right = np.minimum(s + hf, self.s_max)
        left = s - hf
        if not self.pole:
            left = np.maximum(left, self.s_min)
        return (self._ext(right) - self._ext(left)) / (right - left)

    def fpp(self, s):
        if self.d2f is not None:
            return self.d2f(s)
        hf = self.stencil()
        s = np.asarray(s, dtype=float)
        c = np.clip(s, self.s_min + hf if not self.pole else -np.inf, self.s_max - hf)
        return (self._ext(c + hf) - 2.0 * self._ext(c) + self._ext(c - hf)) / hf**2

    def smooth_at(self, s) -> np.ndarray:
        """False where a sampled corner lies inside the finite-difference stencil."""
        s = np.atleast_1d(np.asarray(s, dtype=float))
        if self.kinks is None or self.kinks.size == 0:
            return np.ones(s.shape, dtype=bool)
        reach = 2.0 * self.stencil() + self.h
        d = np.abs(s[:, None] - self.kinks[None, :])
        return ~(d <= reach).any(axis=1)

    # ---- derived radial quantities -----------------------------------------

    def area(self, s):
        return FOUR_PI * np.asarray(self.f(s), dtype=float) ** 2

    def log_area(self, s):
        return math.log(FOUR_PI) + 2.0 * np.log(np.asarray(self.f(s), dtype=float))

    def dlog_area(self, s):
        return 2.0 * np.asarray(self.fp(s)) / np.asarray(self.f(s))


# ---------------------------------------------------------------------------
# construction
# ---------------------------------------------------------------------------

def _require(cond: bool, msg: str):
    if not cond:
        raise MetricError(msg)


def build_warped(kind: str, params: dict | None = None, s_max: float | None = None) -> WarpedMetric:
    """Build a WarpedMetric of the given kind.

    Args:
        kind: euclidean | space_form | spherical | schwarzschild | sampled
        params: a (curvature scale) for space_form/spherical, m for schwarzschild,
            {"f": values, "h": spacing} or {"s": nodes, "f": values} for sampled.
        s_max: outer radius of the chart; kind-specific default when omitted.
    """
    params = dict(params or {})
    if kind == "euclidean":
        m = WarpedMetric(kind, float(s_max or 10.0), f=lambda s: np.asarray(s, dtype=float) * 1.0,
                         df=_one, d2f=_zero)
    elif kind == "space_form":
        a = float(params.get("a", 1.0))
        _require(a > 0, f"space_form needs a > 0, got a={a}")
        k = math.sqrt(a)
        m = WarpedMetric(kind, float(s_max or 3.0),
                         f=lambda s: np.sinh(k * np.asarray(s, dtype=float)) / k,
                         df=lambda s: np.cosh(k * np.asarray(s, dtype=float)),
                         d2f=lambda s: k * np.sinh(k * np.asarray(s, dtype=float)),
                         params={"a": a})
    elif kind == "spherical":
        a = float(params.get("a", 1.0))
        _require(a > 0, f"spherical needs a > 0, got a={a}")
        k = math.sqrt(a)
        top = math.pi / (2.0 * k)
        smax = float(s_max or 0.95 * top)
        _require(smax < 2.0 * top, f"spherical patch must stay below the antipode s={2 * top}")
        m = WarpedMetric(kind, smax,
                         f=lambda s: np.sin(k * np.asarray(s, dtype=float)) / k,
                         df=lambda s: np.cos(k * np.asarray(s, dtype=float)),
                         d2f=lambda s: -k * np.sin(k * np.asarray(s, dtype=float)),
                         params={"a": a})
    elif kind == "schwarzschild":
        mass = float(params.get("m", 1.0))
        _require(mass > 0, f"schwarzschild needs m > 0, got m={mass}")
        psi = lambda s: 1.0 + mass / (2.0 * np.asarray(s, dtype=float))
        m = WarpedMetric(kind, float(s_max or 2000.0),
                         f=lambda s: np.asarray(s, dtype=float) * psi(s) ** 2,
                         df=lambda s: 1.0 - mass**2 / (4.0 * np.asarray(s, dtype=float) ** 2),
                         d2f=lambda s: mass**2 / (2.0 * np.asarray(s, dtype=float) ** 3),
                         phi=lambda s: psi(s) ** 2,
                         dphi=lambda s: -(mass / np.asarray(s, dtype=float) ** 2) * psi(s),
                         s_min=mass / 2.0, pole=False, params={"m": mass})
    elif kind == "sampled":
        return sampled_warp(params.pop("f"), h=params.pop("h", None), s=params.pop("s", None),
                            modulus=params.pop("modulus", None), **params)
    else:
        raise MetricError(f"unknown metric kind {kind!r}; expected one of {KINDS}")
    _check_pole(m)
    return m


def _check_pole(m: WarpedMetric):
    if not m.pole:
        return
    f0 = float(m._ext(0.0))
    _require(abs(f0) < 1e-12, f"{m.label}: f(0)={f0} is not 0")
    hs = min(1e-4, m.s_max / 100.0) if not m.is_sampled else m.h
    slope = float(m.f(hs)) / hs
    if abs(slope - 1.0) > CONF.pole_slope_tolerance:
        if m.is_sampled:
            logger.warning("%s: f'(0+) ~ %.6g, pole is conical", m.label, slope)
        else:
            raise MetricError(f"{m.label}: f'(0+)={slope} differs from 1")
    probe = np.linspace(m.s_max / 1000.0, m.s_max, 257)
    _require(bool(np.all(m.f(probe) > 0)), f"{m.label}: warp not positive on (0, s_max]")


def sampled_warp(values, h: float | None = None, s=None, modulus: float | None = None,
                 kind_tag: str = "sampled", base_kind: str = "", **extra) -> WarpedMetric:
    """Piecewise-linear warp from samples on the uniform nodes s_k = k*h.

    A sample starting at s=0 with f=0 has a pole; otherwise it is a shell chart.
    Adjacent jumps above `modulus` reject the warp as discontinuous.
    """
    f = np.asarray(values, dtype=float).ravel()
    if s is not None:
        s = np.asarray(s, dtype=float).ravel()
        _require(s.shape == f.shape, "sampled warp: s and f have different lengths")
        steps = np.diff(s)
        _require(steps.size > 0 and np.allclose(steps, steps[0], rtol=1e-9, atol=0),
                 "sampled warp: nodes must be uniformly spaced")
        h, s0 = float(steps[0]), float(s[0])
    else:
        _require(h is not None and h > 0, "sampled warp needs a positive spacing h")
        s0 = 0.0
    _require(f.size >= 8, "sampled warp needs at least 8 samples")
    _require(bool(np.all(np.isfinite(f))), "sampled warp has non-finite samples")
    nodes = s0 + h * np.arange(f.size)
    pole = s0 == 0.0 and abs(f[0]) < 1e-14
    body = f[1:] if pole else f
    bad = np.flatnonzero(body <= 0)
    _require(bad.size == 0, f"sampled warp non-positive at s={nodes[int(bad[0]) + (1 if pole else 0)] if bad.size else 0}")
    if modulus is None:
        modulus = 10.0 * h * max(1.0, float(f.max()) / float(nodes[-1]))
    jumps = np.abs(np.diff(f))
    k = int(np.argmax(jumps))
    _require(jumps[k] <= modulus,
             f"sampled warp discontinuous near s={nodes[k]:.6g}: jump {jumps[k]:.3g} > modulus {modulus:.3g}")
    slopes = np.diff(f) / h
    corner = np.flatnonzero(np.abs(np.diff(slopes)) > CONF.kink_tolerance) + 1
    if corner.size:
        logger.info("sampled warp has %d corner node(s), first at s=%.6g", corner.size, nodes[corner[0]])

    def warp(x, _n=nodes, _f=f):
        return np.interp(x, _n, _f)

    params = {"n": int(f.size), "h": float(h)}
    params.update({k: v for k, v in extra.items() if np.isscalar(v)})
    m = WarpedMetric(kind_tag, float(nodes[-1]), f=warp, s_min=float(nodes[0]), pole=bool(pole),
                     params=params, h=float(h), nodes=nodes, values=f,
                     kinks=nodes[corner], base_kind=base_kind)
    _check_pole(m)
    return m


def sample_warp(m: WarpedMetric, h: float) -> WarpedMetric:
    """Resample any warp on uniform nodes (closed forms become sampled warps)."""
    if m.has_lapse:
        raise MetricError(f"{m.label}: only arclength-parameterized warps can be resampled")
    n = int(round(m.s_max / h))
    nodes = h * np.arange(n + 1)
    return sampled_warp(m._ext(nodes), h=h, base_kind=m.kind if not m.is_sampled else m.base_kind)


def kinked_warp(a: float = 0.05, s0: float = 1.0, s_max: float = 3.0, h: float = 1e-3) -> WarpedMetric:
    """C0 warp f(s) = s(1 + a|s - s0|): a corner at s0 and a conical pole when a*s0 != 0."""
    nodes = h * np.arange(int(round(s_max / h)) + 1)
    return sampled_warp(nodes * (1.0 + a * np.abs(nodes - s0)), h=h, base_kind="kinked", a=a, s0=s0)


def cone_kink_warp(eps: float, kink: float = 0.5, slope: float = 0.9, s_max: float = 2.0,
                   h: float = 1e-4) -> WarpedMetric:
    """Hyperbolic warp of curvature -eps/6 per direction (R = -eps) with a cone kink.

    Past `kink` the radial growth of the warp is scaled by `slope` < 1, which
    concentrates positive curvature on the kink sphere.
    """
    nodes = h * np.arange(int(round(s_max / h)) + 1)
    k = math.sqrt(eps / 6.0)
    base = (lambda x: np.sinh(k * x) / k) if k > 0 else (lambda x: x * 1.0)
    f = base(nodes)
    fk = float(base(kink))
    outer = nodes > kink
    f[outer] = fk + slope * (f[outer] - fk)
    return sampled_warp(f, h=h, base_kind="cone_kink", eps=eps, kink=kink, slope=slope)


# ---------------------------------------------------------------------------
# measurements
# ---------------------------------------------------------------------------

def sphere_area(m: WarpedMetric, s):
    s = m.check_domain(s, allow_min=not m.pole)
    out = m.area(s)
    return float(out) if np.ndim(out) == 0 else out


def _sampled_cumvol(m: WarpedMetric) -> np.ndarray:
    f = m.values
    # exact integral of the piecewise-linear interpolant squared
    seg = m.h * (f[:-1] ** 2 + f[:-1] * f[1:] + f[1:] ** 2) / 3.0
    return FOUR_PI * np.concatenate([[0.0], np.cumsum(seg)])


def _sampled_volume(m: WarpedMetric, s: np.ndarray) -> np.ndarray:
    cum = _sampled_cumvol(m)
    x = (s - m.nodes[0]) / m.h
    k = np.clip(np.floor(x).astype(int), 0, m.values.size - 2)
    u = np.clip(x - k, 0.0, 1.0)
    a, b = m.values[k], m.values[k + 1]
    # partial segment: integral over [0,u] of (a + (b-a)v)^2 dv times h
    part = m.h * (a**2 * u + a * (b - a) * u**2 + (b - a) ** 2 * u**3 / 3.0)
    return cum[k] + FOUR_PI * part


def ball_volume(m: WarpedMetric, s):
    """Volume of {s' < s}: from the pole, or from the inner boundary of a shell chart."""
    arr = m.check_domain(s, allow_min=True)
    if m.is_sampled:
        out = _sampled_volume(m, np.atleast_1d(arr))
    elif m.kind == "euclidean":
        out = FOUR_PI * np.atleast_1d(arr) ** 3 / 3.0
    else:
        dens = lambda t: FOUR_PI * float(m.f(t)) ** 2 * float(m.phi(t))
        out = np.array([integrate.quad(dens, m.s_min, float(x), epsabs=CONF.quad_epsabs,
                                       epsrel=CONF.quad_epsrel, limit=200)[0]
                        for x in np.atleast_1d(arr)])
    return float(out[0]) if np.ndim(arr) == 0 else out


def radial_distance(m: WarpedMetric, s):
    """Distance from the pole (or the inner sphere) to the sphere of radius s."""
    arr = np.atleast_1d(m.check_domain(s, allow_min=True))
    if not m.has_lapse:
        out = arr - m.s_min
    else:
        out = np.array([integrate.quad(lambda t: float(m.phi(t)), m.s_min, float(x),
                                       epsrel=CONF.quad_epsrel)[0] for x in arr])
    return float(out[0]) if np.ndim(s) == 0 else out


def radius_for_warp(m: WarpedMetric, value: float) -> float:
    """Solve f(s) = value on the increasing branch of the warp."""
    lo = m.s_min if not m.pole else 0.0
    flo, fhi = float(m._ext(lo)), float(m._ext(m.s_max))
    if not flo < value <= fhi * (1 + 1e-14):
        raise MetricError(f"{m.label}: warp value {value:.6g} outside ({flo:.6g}, {fhi:.6g}]")
    if value >= fhi:
        return m.s_max
    return optimize.brentq(lambda x: float(m._ext(x)) - value, lo, m.s_max, xtol=1e-15, rtol=4e-16, maxiter=200)


def check_increasing(m: WarpedMetric, n: int = 2049):
    probe = np.linspace(m.s_min, m.s_max, n)[1:]
    if np.any(np.diff(m._ext(probe)) <= 0):
        raise MetricError(f"{m.label}: warp is not strictly increasing on its domain")


# ---------------------------------------------------------------------------
# curvature
# ---------------------------------------------------------------------------

def curvature_profile(m: WarpedMetric, s):
    """Scalar curvature samples and a smoothness mask.

    R = -4 f_rr/f + 2 (1 - f_r^2)/f^2 in the arclength variable r (dr = phi ds).
    Samples whose stencil touches a corner are NaN with mask False.
    """
    s = np.atleast_1d(np.asarray(s, dtype=float))
    f = np.asarray(m.f(s), dtype=float)
    fp = np.asarray(m.fp(s), dtype=float)
    fpp = np.asarray(m.fpp(s), dtype=float)
    phi = np.asarray(m.phi(s), dtype=float)
    dphi = np.asarray(m.dphi(s), dtype=float)
    fr = fp / phi
    frr = (fpp * phi - fp * dphi) / phi**3
    R = -4.0 * frr / f + 2.0 * (1.0 - fr**2) / f**2
    ok = m.smooth_at(s)
    R = np.where(ok, R, np.nan)
    return R, ok


def scalar_curvature_warped(m: WarpedMetric, s: float) -> float:
    """R(s), or NaN (with a logged defect flag) at a corner of a sampled warp."""
    if float(s) <= 0.0 and m.pole:
        raise MetricError("scalar curvature is not evaluated at the pole s=0")
    m.check_domain(s, allow_min=not m.pole)
    R, ok = curvature_profile(m, s)
    if not ok[0]:
        logger.warning("%s: corner inside stencil at s=%.6g; curvature flagged", m.label, s)
    return float(R[0])
