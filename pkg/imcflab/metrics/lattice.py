# imcflab/metrics/lattice.py
"""Kuhn tetrahedral split of the lattice cubes and P1 calculus on it.

Every cube is cut into 6 tetrahedra along its main diagonal; tetrahedron tau
walks 0 -> e_a -> e_a + e_b -> (1,1,1) for the axis order (a, b, c) = PERMS[tau],
so the P1 gradient component along axis PERMS[tau][i] is the i-th edge
difference divided by h. Each tetrahedron carries the average of its vertex
metrics.
"""
import itertools
import logging

import numpy as np

from .grid import GridMetric

logger = logging.getLogger(__name__)

PERMS = list(itertools.permutations(range(3)))


class KuhnMesh:
    def __init__(self, grid: GridMetric, cube_mask: np.ndarray | None = None):
        self.grid = grid
        nx, ny, nz = grid.shape
        self.n_nodes = nx * ny * nz
        h = grid.h
        self.h = h
        ci, cj, ck = np.meshgrid(np.arange(nx - 1), np.arange(ny - 1), np.arange(nz - 1), indexing="ij")
        if cube_mask is not None:
            keep = cube_mask.astype(bool)
            ci, cj, ck = ci[keep], cj[keep], ck[keep]
        else:
            ci, cj, ck = ci.ravel(), cj.ravel(), ck.ravel()
        base = np.stack([ci, cj, ck], axis=-1)
        self.n_cubes = base.shape[0]
        flat = lambda idx: np.ravel_multi_index((idx[..., 0], idx[..., 1], idx[..., 2]), (nx, ny, nz))
        gflat = grid.g.reshape(-1, 3, 3)
        self.tets = np.empty((6, self.n_cubes, 4), dtype=np.int64)
        self.ginv = np.empty((6, self.n_cubes, 3, 3))
        self.vol = np.empty((6, self.n_cubes))
        for t, perm in enumerate(PERMS):
            steps = [np.zeros(3, dtype=int)]
            for a in perm:
                nxt = steps[-1].copy()
                nxt[a] += 1
                steps.append(nxt)
            self.tets[t] = np.stack([flat(base + st) for st in steps], axis=-1)
            gt = gflat[self.tets[t]].mean(axis=1)
            self.ginv[t] = np.linalg.inv(gt)
            self.vol[t] = np.sqrt(np.linalg.det(gt)) * h**3 / 6.0

    # ---- calculus ------------------------------------------------------------

    def grad(self, u: np.ndarray) -> np.ndarray:
        """Chart gradient of the P1 interpolant of nodal values u, shape (6, n_cubes, 3)."""
        u = u.ravel()
        out = np.empty((6, self.n_cubes, 3))
        for t, perm in enumerate(PERMS):
            vals = u[self.tets[t]]
            out[t][:, list(perm)] = np.diff(vals, axis=1) / self.h
        return out

    def norm2(self, G: np.ndarray, H: np.ndarray | None = None) -> np.ndarray:
        """g^ij G_i H_j per tetrahedron."""
        H = G if H is None else H
        return np.einsum("tci,tcij,tcj->tc", G, self.ginv, H)

    def raise_index(self, G: np.ndarray) -> np.ndarray:
        return np.einsum("tcij,tcj->tci", self.ginv, G)

    def scatter(self, F: np.ndarray) -> np.ndarray:
        """Adjoint of grad: nodal vector of sum_T F_T . d(grad_T)/du."""
        out = np.zeros(self.n_nodes)
        for t, perm in enumerate(PERMS):
            dD = F[t][:, list(perm)] / self.h
            T = self.tets[t]
            for i in range(3):
                out += np.bincount(T[:, i + 1], weights=dD[:, i], minlength=self.n_nodes)
                out -= np.bincount(T[:, i], weights=dD[:, i], minlength=self.n_nodes)
        return out

    def vertex_values(self, u: np.ndarray) -> np.ndarray:
        u = u.ravel()
        return np.stack([u[self.tets[t]] for t in range(6)])

    # ---- sublevel fractions --------------------------------------------------

    def fraction_below(self, u: np.ndarray, level: float) -> np.ndarray:
        return simplex_fraction_below(self.vertex_values(u), level)

    def volume_below(self, u: np.ndarray, level: float) -> float:
        return float((self.vol * self.fraction_below(u, level)).sum())


def simplex_fraction_below(vals: np.ndarray, level: float) -> np.ndarray:
    """Volume fraction of {P1 interpolant < level} in each tetrahedron.

    vals has shape (..., 4). The fraction is the cubic B-spline in the level with
    knots at the vertex values; coincident values are spread by 1e-7 of the
    local span so that every denominator is non-zero.
    """
    a = np.sort(np.asarray(vals, dtype=float), axis=-1)
    span = a[..., 3] - a[..., 0]
    delta = 1e-7 * np.maximum(span, 1e-12)
    a = a + delta[..., None] * np.arange(4)
    x = level

    def term(i, sign):
        prod = np.ones(a.shape[:-1])
        for j in range(4):
            if j != i:
                prod = prod * (a[..., j] - a[..., i])
        return sign * (np.maximum(x - a[..., i], 0.0) ** 3) / prod

    with np.errstate(over="ignore", invalid="ignore"):
        lower = term(0, 1.0)  # exact for level in (a0, a1]
        middle = lower + term(1, 1.0)
        # mirror: 1 - (above fraction) with the top vertex alone, exact for level in [a2, a3)
        upper = 1.0 - np.maximum(a[..., 3] - x, 0.0) ** 3 / (
            (a[..., 3] - a[..., 0]) * (a[..., 3] - a[..., 1]) * (a[..., 3] - a[..., 2]))
    below = np.where(x <= a[..., 0], 0.0,
             np.where(x <= a[..., 1], lower,
             np.where(x <= a[..., 2], middle,
             np.where(x < a[..., 3], upper, 1.0))))
    return np.clip(below, 0.0, 1.0)
