# imcflab/imcf/levelset.py
"""Geometry of the sublevel sets E_t = {w < t} of a flow potential."""
import logging
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import ndimage, optimize
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from skimage import measure

from ..errors import ConfigError
from ..mass.quasilocal import quasi_local_mass
from ..metrics.grid import GridMetric
from ..metrics.lattice import KuhnMesh
from ..metrics.warped import ball_volume, radial_distance, radius_for_warp, sphere_area
from ..pharmonic.field import PotentialField

logger = logging.getLogger(__name__)

SIXTEEN_PI = 16.0 * math.pi
_SYM = ((0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2))


def hawking_mass(perimeter: float, H2_integral: float) -> float:
    """sqrt(P)/(16 pi)^(3/2) (16 pi - int H^2): 0 on flat round spheres, m on Schwarzschild spheres."""
    return math.sqrt(perimeter) / SIXTEEN_PI**1.5 * (SIXTEEN_PI - H2_integral)


@dataclass(frozen=True)
class LevelSetGeometry:
    t: float
    volume: float
    perimeter: float
    components: int
    H2_integral: float
    inv_grad_integral: float
    hawking: float
    mQL: float
    containment_radius: float
    boundary_components: int = 1

    @property
    def holder_residual(self) -> float:
        """P^3 / (int |grad w|^2 (int 1/|grad w|)^2) - 1, which is <= 0 and 0 for constant |grad w|."""
        return self.perimeter**3 / (self.H2_integral * self.inv_grad_integral**2) - 1.0

    def as_dict(self) -> dict:
        return asdict(self) | {"holder_residual": self.holder_residual}


def make_geometry(t, volume, perimeter, components, H2, inv_grad, reach, boundary_components=1) -> LevelSetGeometry:
    return LevelSetGeometry(float(t), float(volume), float(perimeter), int(components), float(H2),
                            float(inv_grad), hawking_mass(perimeter, H2),
                            quasi_local_mass(volume, perimeter), float(reach), int(boundary_components))


# ---------------------------------------------------------------------------
# radial fields
# ---------------------------------------------------------------------------

def level_radius(field: PotentialField, t: float) -> float:
    m = field.metric
    if field.is_limit:
        return radius_for_warp(m, math.exp(0.5 * t))
    lo = field.radii[0]
    while field.at(lo) >= t:
        if lo < 1e-300 + m.s_min:
            raise ConfigError(f"level t={t} below every sample of the field")
        lo = m.s_min + 0.5 * (lo - m.s_min)
    return optimize.brentq(lambda s: field.at(s) - t, lo, field.radii[-1], xtol=1e-15, rtol=4e-16, maxiter=300)


def _radial_geometry(field: PotentialField, t: float) -> LevelSetGeometry:
    m = field.metric
    s = level_radius(field, t)
    P = sphere_area(m, s)
    H = float(field.slope(s)) / float(m.phi(s))
    V = ball_volume(m, s)
    return make_geometry(t, V, P, 1, P * H**2, P / H, radial_distance(m, s))


# ---------------------------------------------------------------------------
# lattice fields
# ---------------------------------------------------------------------------

@dataclass
class Isosurface:
    grid: GridMetric
    verts: np.ndarray  # lattice index coordinates
    faces: np.ndarray
    areas: np.ndarray  # metric area per triangle

    @property
    def area(self) -> float:
        return float(self.areas.sum())

    def sample(self, values: np.ndarray) -> np.ndarray:
        """Per-triangle mean of a nodal field interpolated at the three vertices."""
        if self.faces.size == 0:
            return np.zeros(0)
        at = ndimage.map_coordinates(values, self.verts.T, order=1, mode="nearest")
        return at[self.faces].mean(axis=1)

    def components(self) -> int:
        if self.faces.size == 0:
            return 0
        n = self.verts.shape[0]
        i = np.concatenate([self.faces[:, 0], self.faces[:, 1], self.faces[:, 2]])
        j = np.concatenate([self.faces[:, 1], self.faces[:, 2], self.faces[:, 0]])
        adj = coo_matrix((np.ones(i.size), (i, j)), shape=(n, n)).tocsr()
        used = np.unique(self.faces)
        n_comp, labels = connected_components(adj, directed=False)
        return int(np.unique(labels[used]).size)


def isosurface(grid: GridMetric, values: np.ndarray, level: float, mask: np.ndarray | None = None) -> Isosurface:
    """Triangulated {values = level} with each triangle measured in the vertex-averaged metric."""
    empty = Isosurface(grid, np.zeros((0, 3)), np.zeros((0, 3), dtype=int), np.zeros(0))
    if not values.min() < level < values.max():
        return empty
    try:
        verts, faces, _, _ = measure.marching_cubes(values, level=level, mask=mask, allow_degenerate=False)
    except (ValueError, RuntimeError):
        return empty
    if faces.size == 0:
        return empty
    comp = np.stack([ndimage.map_coordinates(np.ascontiguousarray(grid.g[..., a, b]), verts.T, order=1,
                                             mode="nearest") for a, b in _SYM], axis=-1)
    gv = np.empty((verts.shape[0], 3, 3))
    for k, (a, b) in enumerate(_SYM):
        gv[:, a, b] = gv[:, b, a] = comp[:, k]
    gt = gv[faces].mean(axis=1)
    e1 = grid.h * (verts[faces[:, 1]] - verts[faces[:, 0]])
    e2 = grid.h * (verts[faces[:, 2]] - verts[faces[:, 0]])
    g11 = np.einsum("ni,nij,nj->n", e1, gt, e1)
    g22 = np.einsum("ni,nij,nj->n", e2, gt, e2)
    g12 = np.einsum("ni,nij,nj->n", e1, gt, e2)
    areas = 0.5 * np.sqrt(np.maximum(g11 * g22 - g12**2, 0.0))
    return Isosurface(grid, verts, faces, areas)


class GridContext:
    """Lattice data shared by every level of one field: clamped w, |grad w|_g^2 and the mesh."""

    def __init__(self, field: PotentialField):
        m: GridMetric = field.metric
        self.field = field
        self.cap = field.t_hi + 50.0
        self.w = np.where(np.isfinite(field.w), np.minimum(field.w, self.cap), self.cap)
        grads = np.stack(np.gradient(self.w, m.h), axis=-1)
        self.grad2 = np.einsum("...i,...ij,...j->...", grads, m.inverse(), grads)
        live = field.w < field.t_hi
        cubes = np.zeros(tuple(n - 1 for n in m.shape), dtype=bool)
        for di in (0, 1):
            for dj in (0, 1):
                for dk in (0, 1):
                    cubes |= live[di:di + cubes.shape[0], dj:dj + cubes.shape[1], dk:dk + cubes.shape[2]]
        self.mesh = KuhnMesh(m, cube_mask=cubes)


def _grid_geometry(field: PotentialField, t: float, ctx: GridContext | None) -> LevelSetGeometry:
    ctx = ctx or GridContext(field)
    below = field.w < t
    if not below.any():
        raise ConfigError(f"sublevel {{w < {t}}} is empty on the lattice")
    V = ctx.mesh.volume_below(ctx.w, t)
    surf = isosurface(field.metric, ctx.w, t)
    if surf.faces.size == 0:
        raise ConfigError(f"level t={t} produced no isosurface")
    grad2 = surf.sample(ctx.grad2)
    H2 = float((surf.areas * grad2).sum())
    inv = float((surf.areas / np.sqrt(np.maximum(grad2, 1e-300))).sum())
    _, n_comp = ndimage.label(below, structure=np.ones((3, 3, 3)))
    reach = float(field.distance[below].max()) if field.distance is not None else float("nan")
    return make_geometry(t, V, surf.area, n_comp, H2, inv, reach, surf.components())


def sublevel_geometry(w: PotentialField, t: float, m=None, ctx: GridContext | None = None) -> LevelSetGeometry:
    """Volume, perimeter, int H^2 (H = |grad w|), Hawking and quasi-local mass of {w < t}."""
    lo, T = w.validity()
    if not t < T:
        raise ConfigError(f"t={t} is not below the validity threshold T={T:.6g}")
    if math.isfinite(lo) and t <= lo:
        raise ConfigError(f"t={t} is not above the pole threshold {lo:.6g}")
    if w.is_radial:
        return _radial_geometry(w, t)
    return _grid_geometry(w, t, ctx)
