# imcflab/metrics/distance.py
import itertools
import logging
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from .grid import GridMetric

logger = logging.getLogger(__name__)

# one representative of each +/- pair of the 26 lattice neighbours
OFFSETS = [d for d in itertools.product((-1, 0, 1), repeat=3) if d > (0, 0, 0)]


@dataclass(frozen=True)
class DistanceField:
    source: tuple
    distances: np.ndarray
    unreachable: int

    def at(self, node) -> float:
        return float(self.distances[tuple(node)])


def _edge_lengths(m: GridMetric, d: tuple, mask: np.ndarray | None):
    """Simpson-rule length of each lattice edge in direction d."""
    nx, ny, nz = m.shape
    src = tuple(slice(max(0, -k), n - max(0, k)) for k, n in zip(d, (nx, ny, nz)))
    dst = tuple(slice(max(0, k), n - max(0, -k)) for k, n in zip(d, (nx, ny, nz)))
    e = m.h * np.asarray(d, dtype=float)
    g0, g1 = m.g[src], m.g[dst]
    l0 = np.sqrt(np.einsum("i,...ij,j->...", e, g0, e))
    l1 = np.sqrt(np.einsum("i,...ij,j->...", e, g1, e))
    lm = np.sqrt(np.einsum("i,...ij,j->...", e, 0.5 * (g0 + g1), e))
    w = (l0 + 4.0 * lm + l1) / 6.0
    idx = np.arange(nx * ny * nz).reshape(nx, ny, nz)
    a, b = idx[src].ravel(), idx[dst].ravel()
    w = w.ravel()
    if mask is not None:
        keep = mask[src].ravel() & mask[dst].ravel()
        a, b, w = a[keep], b[keep], w[keep]
    return a, b, w


def lattice_graph(m: GridMetric, mask: np.ndarray | None = None) -> sparse.csr_matrix:
    rows, cols, vals = [], [], []
    for d in OFFSETS:
        a, b, w = _edge_lengths(m, d, mask)
        rows.append(a)
        cols.append(b)
        vals.append(w)
    n = int(np.prod(m.shape))
    return sparse.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                             shape=(n, n)).tocsr()


def grid_distance(m: GridMetric, source, mask: np.ndarray | None = None,
                  graph: sparse.csr_matrix | None = None) -> DistanceField:
    """Shortest-path distances from `source` over the 26-neighbour lattice graph.

    Nodes excluded by `mask`, or cut off from the source, get distance inf and are
    counted in `unreachable`.
    """
    source = tuple(int(i) for i in source)
    if graph is None:
        graph = lattice_graph(m, mask)
    start = int(np.ravel_multi_index(source, m.shape))
    dist = csgraph.dijkstra(graph, directed=False, indices=start)
    dist = dist.reshape(m.shape)
    unreachable = int(np.isinf(dist).sum())
    if unreachable:
        logger.warning("grid_distance: %d lattice node(s) unreachable from %s", unreachable, source)
    return DistanceField(source, dist, unreachable)


@lru_cache(maxsize=None)
def stencil_anisotropy(samples: int = 400) -> float:
    """Worst ratio of 26-neighbour path length to straight length over directions.

    For v = (a, b, c) with a >= b >= c >= 0 the shortest lattice path has length
    c*sqrt(3) + (b - c)*sqrt(2) + (a - b).
    """
    b, c = np.meshgrid(np.linspace(0, 1, samples), np.linspace(0, 1, samples), indexing="ij")
    keep = c <= b
    b, c = b[keep], c[keep]
    path = c * np.sqrt(3.0) + (b - c) * np.sqrt(2.0) + (1.0 - b)
    return float((path / np.sqrt(1.0 + b**2 + c**2)).max())


def overestimate_bound(m: GridMetric, d) -> np.ndarray:
    """Bound on d_lattice(node(x), node(y)) - d(x, y) for points at true distance d.

    The stencil part (A - 1) d is the same at every resolution; the snapping of
    both endpoints to their nearest nodes adds A sqrt(3 Lam) h, which halves when
    h does.
    """
    A = stencil_anisotropy()
    return (A - 1.0) * np.asarray(d, dtype=float) + A * math.sqrt(3.0 * m.Lam) * m.h
