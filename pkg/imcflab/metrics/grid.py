# imcflab/metrics/grid.py
import logging
from dataclasses import dataclass

import numpy as np

from ..errors import MetricError
from ..utils import sha12
from .warped import WarpedMetric

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GridMetric:
    """Symmetric positive-definite metric sampled on the nodes of one coordinate box.

    g has shape (nx, ny, nz, 3, 3); lam/Lam bound g(v,v)/|v|^2 at every node.
    """
    lo: np.ndarray
    h: float
    g: np.ndarray
    lam: float
    Lam: float
    label: str = "grid"

    @property
    def shape(self) -> tuple:
        return tuple(self.g.shape[:3])

    @property
    def hi(self) -> np.ndarray:
        return self.lo + self.h * (np.asarray(self.shape) - 1)

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    def coords(self, sparse: bool = False):
        axes = [self.lo[i] + self.h * np.arange(n) for i, n in enumerate(self.shape)]
        return np.meshgrid(*axes, indexing="ij", sparse=sparse)

    def node_of(self, point) -> tuple:
        idx = np.rint((np.asarray(point, dtype=float) - self.lo) / self.h).astype(int)
        if np.any(idx < 0) or np.any(idx >= np.asarray(self.shape)):
            raise MetricError(f"point {point} outside the chart box")
        return tuple(int(i) for i in idx)

    def point_of(self, node) -> np.ndarray:
        return self.lo + self.h * np.asarray(node, dtype=float)

    def frozen_distance(self, node) -> np.ndarray:
        """Distance from a node in the constant metric g(node) (chart straight lines)."""
        X = np.stack(self.coords(), axis=-1) - self.point_of(node)
        g0 = self.g[node]
        return np.sqrt(np.einsum("...i,ij,...j->...", X, g0, X))

    def det(self) -> np.ndarray:
        return np.linalg.det(self.g)

    def inverse(self) -> np.ndarray:
        return np.linalg.inv(self.g)

    def scaled(self, factor: float) -> "GridMetric":
        """The metric factor * g on the same chart (factor = lambda^2)."""
        return make_grid(self.g * factor, self.lo, self.h, label=f"{factor}*{self.label}")

    def fingerprint(self) -> str:
        head = f"{self.label}:{self.shape}:{self.lo.tolist()}:{self.h!r}"
        return head + ":" + sha12(np.ascontiguousarray(self.g).tobytes())


def make_grid(g, lo, h: float, label: str = "grid") -> GridMetric:
    """Validate a sampled metric field and measure its ellipticity bounds."""
    g = np.asarray(g, dtype=float)
    if g.ndim != 5 or g.shape[3:] != (3, 3):
        raise MetricError(f"grid metric must have shape (nx, ny, nz, 3, 3), got {g.shape}")
    if min(g.shape[:3]) < 3:
        raise MetricError("grid metric needs at least 3 nodes per axis")
    if h <= 0:
        raise MetricError(f"lattice spacing must be positive, got {h}")
    if not np.all(np.isfinite(g)):
        raise MetricError("grid metric has non-finite entries")
    asym = np.abs(g - np.swapaxes(g, -1, -2)).max()
    if asym > 1e-12 * max(1.0, np.abs(g).max()):
        raise MetricError(f"grid metric not symmetric (max asymmetry {asym:.3g})")
    g = 0.5 * (g + np.swapaxes(g, -1, -2))
    ev = np.linalg.eigvalsh(g)
    lam, Lam = float(ev[..., 0].min()), float(ev[..., -1].max())
    if lam <= 0:
        bad = np.unravel_index(int(np.argmin(ev[..., 0])), g.shape[:3])
        raise MetricError(f"grid metric not positive definite at node {bad}")
    g.setflags(write=False)
    logger.debug("grid %s: %s nodes, h=%.4g, ellipticity [%.4g, %.4g]", label, g.shape[:3], h, lam, Lam)
    return GridMetric(np.asarray(lo, dtype=float).reshape(3), float(h), g, lam, Lam, label)


def cube(half_width: float, n: int, center=(0.0, 0.0, 0.0)):
    """(lo, h) of an n^3 lattice on the cube of given half width."""
    lo = np.asarray(center, dtype=float) - half_width
    return lo, 2.0 * half_width / (n - 1)


def flat_grid(half_width: float, n: int, scale: float = 1.0) -> GridMetric:
    lo, h = cube(half_width, n)
    g = np.broadcast_to(scale * np.eye(3), (n, n, n, 3, 3)).copy()
    return make_grid(g, lo, h, label="flat" if scale == 1.0 else f"flat*{scale}")


def warped_to_grid(m: WarpedMetric, half_width: float, n: int) -> GridMetric:
    """Chart realization of phi^2 ds^2 + f^2 g_S2 with s = |x|.

    g = phi^2 xx^T + (f/s)^2 (I - xx^T) with x the unit radial direction. A shell
    chart (Schwarzschild) is frozen at s_min/2 inside its inner sphere so the
    lattice metric stays elliptic; that core is filled, not geometric.
    """
    lo, h = cube(half_width, n)
    shell = GridMetric(lo, h, np.zeros((n, n, n, 3, 3)), 1.0, 1.0)
    X = np.stack(shell.coords(), axis=-1)
    s = np.linalg.norm(X, axis=-1)
    if s.max() > m.s_max:
        raise MetricError(f"box corner s={s.max():.4g} exceeds s_max={m.s_max} of {m.label}")
    if m.pole:
        se = np.maximum(s, 1e-300)
        ratio = np.where(s > 0, m.f(se) / se, 1.0)
    else:
        se = np.maximum(s, 0.5 * m.s_min)
        ratio = m.f(se) / se
    phi = np.asarray(m.phi(se), dtype=float) * np.ones_like(s)
    with np.errstate(invalid="ignore", divide="ignore"):
        xhat = np.where(s[..., None] > 0, X / np.maximum(s, 1e-300)[..., None], 0.0)
    P = xhat[..., :, None] * xhat[..., None, :]
    eye = np.eye(3)
    radial = np.where(s[..., None, None] > 0, P, eye / 3.0)
    tang = np.where(s[..., None, None] > 0, eye - P, 2.0 * eye / 3.0)
    g = (phi**2)[..., None, None] * radial + (ratio**2)[..., None, None] * tang
    return make_grid(g, lo, h, label=f"grid[{m.label}]")


def metric_closeness(a: GridMetric, b: GridMetric) -> float:
    """Smallest eps with |a(v,v) - b(v,v)| <= eps * b(v,v) at every node and every v."""
    if a.shape != b.shape:
        raise MetricError("metrics live on different lattices")
    L = np.linalg.cholesky(b.g)
    Linv = np.linalg.inv(L)
    M = Linv @ a.g @ np.swapaxes(Linv, -1, -2)
    ev = np.linalg.eigvalsh(0.5 * (M + np.swapaxes(M, -1, -2)))
    return float(np.abs(ev - 1.0).max())


def grid_scalar_curvature(m: GridMetric) -> np.ndarray:
    """Scalar curvature at the nodes by second-order finite differences.

    R = g^ij (d_k G^k_ij - d_j G^k_ik + G^k_kl G^l_ij - G^k_jl G^l_ik).
    The two outermost node layers carry one-sided stencils and are less accurate.
    """
    g, h = m.g, m.h
    ginv = m.inverse()
    dg = np.stack([np.gradient(g, h, axis=a, edge_order=2) for a in range(3)], axis=3)  # (...,k,i,j)
    first = 0.5 * (np.einsum("...ilj->...lij", dg) + np.einsum("...jli->...lij", dg)
                   - dg)  # Gamma_{l i j}
    Gam = np.einsum("...kl,...lij->...kij", ginv, first)
    ric = np.einsum("...kkl,...lij->...ij", Gam, Gam) - np.einsum("...kjl,...lik->...ij", Gam, Gam)
    for a in range(3):
        dGa = np.gradient(Gam, h, axis=a, edge_order=2)
        ric += dGa[..., a, :, :]
        ric[..., :, a] -= np.einsum("...kik->...i", dGa)
    return np.einsum("...ij,...ij->...", ginv, ric)
