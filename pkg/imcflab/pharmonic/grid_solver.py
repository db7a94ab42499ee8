# imcflab/pharmonic/grid_solver.py
"""p-Dirichlet energy minimization on the Kuhn tetrahedral lattice.

The capacitary potential u of the excised ball B_eps(o) in B_R(o) minimizes

    E(u) = sum_T vol_T (|grad u|_g^2 + mu^2)^(p/2)

over P1 lattice functions with u = 1 on B_eps and the Dirichlet condition u = 0
on the sphere d = R. Nodes just outside the sphere are ghost nodes whose values
extrapolate the computed boundary slope, so the zero level sits on d = R to
second order instead of on the staircase of lattice nodes. Balls are measured in
the frozen metric g(o).

Descent is L-BFGS-B followed by a Newton-CG polish with a matrix-free Hessian.
"""
import logging
import math
import time

import numpy as np
from scipy import ndimage, optimize

from ..cache import CACHE
from ..errors import SolverError
from ..metrics.grid import GridMetric
from ..metrics.lattice import KuhnMesh
from .field import PotentialField, SolverConfig, check_exponent, green_constant

logger = logging.getLogger(__name__)


class CapacitaryProblem:
    def __init__(self, m: GridMetric, node: tuple, p: float, eps: float, R: float):
        self.m, self.node, self.p, self.eps, self.R = m, node, p, eps, R
        self.d = m.frozen_distance(node)
        self.inner = self.d <= eps
        self.exterior = self.d >= R
        self.free = ~(self.inner | self.exterior)
        if not self.free.any():
            raise SolverError("no free lattice nodes between the excision and the outer sphere")
        # cubes touching a free node carry the energy
        f = self.free
        cubes = np.zeros(tuple(n - 1 for n in m.shape), dtype=bool)
        for di in (0, 1):
            for dj in (0, 1):
                for dk in (0, 1):
                    cubes |= f[di:di + cubes.shape[0], dj:dj + cubes.shape[1], dk:dk + cubes.shape[2]]
        self.mesh = KuhnMesh(m, cube_mask=cubes)
        self.free_idx = np.flatnonzero(self.free.ravel())
        self.u = np.zeros(int(np.prod(m.shape)))
        self.u[self.inner.ravel()] = 1.0
        self.scale = 1.0 / (R - eps)
        self.history: list[float] = []

    # ---- boundary data -------------------------------------------------------

    def set_ghosts(self, a: float, b: float = 0.0):
        x = (self.R - self.d)[self.exterior]
        self.u[self.exterior.ravel()] = a * x + b * x**2

    def fit_boundary_slope(self) -> tuple[float, float]:
        """Least-squares u ~ a (R-d) + b (R-d)^2 over free nodes within 3h of the sphere."""
        band = self.free & (self.d >= self.R - 3.0 * self.m.h * math.sqrt(self.m.Lam))
        x = (self.R - self.d)[band]
        y = self.u.reshape(self.m.shape)[band]
        if x.size < 3:
            return self.scale, 0.0
        A = np.stack([x, x**2], axis=1)
        (a, b), *_ = np.linalg.lstsq(A, y, rcond=None)
        return float(a), float(b)

    def warm_start(self, alpha: float):
        """Flat closed form (d^-alpha - R^-alpha)/(eps^-alpha - R^-alpha), in log space."""
        d = self.d[self.free]
        top = -alpha * math.log(self.R / self.eps)
        num = np.exp(-alpha * np.log(d / self.eps)) - math.exp(top)
        den = -math.expm1(top)
        self.u[self.free_idx] = np.clip(num / den, 0.0, 1.0)
        slope = alpha / self.R * math.exp(top) / den
        self.set_ghosts(slope)

    # ---- energy --------------------------------------------------------------

    def _full(self, x):
        u = self.u.copy()
        u[self.free_idx] = x
        return u

    def energy(self, x, mu: float):
        p, mesh = self.p, self.mesh
        G = mesh.grad(self._full(x))
        a = mesh.norm2(G) + mu**2
        e = float((mesh.vol * a ** (p / 2.0)).sum())
        F = (p * mesh.vol * a ** (p / 2.0 - 1.0))[..., None] * mesh.raise_index(G)
        return e, mesh.scatter(F)[self.free_idx]

    def hessp(self, x, v, mu: float):
        p, mesh = self.p, self.mesh
        G = mesh.grad(self._full(x))
        dv = np.zeros_like(self.u)
        dv[self.free_idx] = v
        Gv = mesh.grad(dv)
        a = mesh.norm2(G) + mu**2
        c1 = p * mesh.vol * a ** (p / 2.0 - 1.0)
        c2 = p * (p - 2.0) * mesh.vol * a ** (p / 2.0 - 2.0) * mesh.norm2(G, Gv)
        F = c1[..., None] * mesh.raise_index(Gv) + c2[..., None] * mesh.raise_index(G)
        return mesh.scatter(F)[self.free_idx]

    def capacity(self) -> float:
        """p-energy of max(u, 0): each tetrahedron counts only its part where u > 0."""
        mesh = self.mesh
        G = mesh.grad(self.u)
        above = 1.0 - mesh.fraction_below(self.u, 0.0)
        return float((mesh.vol * above * mesh.norm2(G) ** (self.p / 2.0)).sum())

    # ---- solve ---------------------------------------------------------------

    def solve(self, cfg: SolverConfig) -> dict:
        p = self.p
        mu0 = 1e-3 * self.scale
        mu1 = cfg.mu_final * self.scale
        x = self.u[self.free_idx].copy()
        g0 = np.abs(self.energy(x, mu0)[1]).max()
        stages = []

        def record(xk, mu=mu0):
            self.history.append(self.energy(xk, mu)[0])

        for pass_no in range(cfg.boundary_passes + 1):
            self.history = [self.energy(x, mu0)[0]]
            res = optimize.minimize(self.energy, x, args=(mu0,), jac=True, method="L-BFGS-B",
                                    callback=record,
                                    options={"maxiter": cfg.max_iter, "ftol": cfg.energy_tol,
                                             "gtol": 1e-12, "maxcor": 20})
            x = res.x
            stages.append({"stage": f"lbfgs[{pass_no}]", "nit": int(res.nit), "status": int(res.status),
                           "energy": float(res.fun), "monotone": _monotone(self.history)})
            if res.status == 1:
                raise SolverError(f"L-BFGS-B hit max_iter={cfg.max_iter} at p={p}",
                                  {"stages": stages})
            self.u[self.free_idx] = x
            if pass_no < cfg.boundary_passes:
                self.set_ghosts(*self.fit_boundary_slope())
        # polish with the final regularization
        self.history = [self.energy(x, mu1)[0]]
        res = optimize.minimize(self.energy, x, args=(mu1,), jac=True, hessp=self.hessp,
                                method="Newton-CG", callback=lambda xk: record(xk, mu1),
                                options={"maxiter": cfg.newton_iter, "xtol": 1e-14})
        if res.fun <= self.history[0]:
            x = res.x
        stages.append({"stage": "newton", "nit": int(res.nit), "status": int(res.status),
                       "energy": float(res.fun), "monotone": _monotone(self.history)})
        self.u[self.free_idx] = x
        e1, grad = self.energy(x, mu1)
        residual = float(np.abs(grad).max() / max(g0, 1e-300))
        return {"stages": stages, "residual": residual, "energy": e1, "mu": mu1,
                "energy_monotone": all(s["monotone"] for s in stages)}

    def interior_minima(self) -> int:
        u = self.u.reshape(self.m.shape)
        foot = np.ones((3, 3, 3), dtype=bool)
        foot[1, 1, 1] = False
        nb = ndimage.minimum_filter(u, footprint=foot, mode="nearest")
        return int((self.free & (u < nb)).sum())


def _monotone(history: list[float]) -> bool:
    h = np.asarray(history)
    if h.size < 2:
        return True
    return bool(np.all(np.diff(h) <= 1e-12 * np.abs(h[:-1]).max()))


def resolve_node(m: GridMetric, o) -> tuple:
    arr = np.asarray(o)
    if arr.dtype.kind in "iu":
        node = tuple(int(i) for i in arr)
        if any(i < 0 or i >= n for i, n in zip(node, m.shape)):
            raise SolverError(f"node {node} outside the lattice")
        return node
    return m.node_of(arr)


def check_geometry(m: GridMetric, node: tuple, eps: float, R: float, cfg: SolverConfig,
                   ratio_check: bool = True):
    if eps < 3.0 * m.h * (1 - 1e-9):
        raise SolverError(f"inner radius {eps:.4g} unresolved: needs at least 3h = {3 * m.h:.4g}")
    if ratio_check and eps >= cfg.max_excision_ratio * R:
        raise SolverError(f"inner radius {eps:.4g} not below {cfg.max_excision_ratio} R = {cfg.max_excision_ratio * R:.4g}")
    d = m.frozen_distance(node)
    margin = np.concatenate([d[0].ravel(), d[-1].ravel(), d[:, 0].ravel(), d[:, -1].ravel(),
                             d[:, :, 0].ravel(), d[:, :, -1].ravel()]).min()
    if margin <= R + 2.0 * m.h * math.sqrt(m.Lam):
        raise SolverError(f"B_R(o) with R={R} is not inside the chart box (margin {margin:.4g})")
    if m.lam <= 0 or not math.isfinite(m.Lam):
        raise SolverError("ellipticity bounds violated")


def solve_capacitary(m: GridMetric, o, p: float, eps: float, R: float, cfg: SolverConfig):
    p = check_exponent(p)
    node = resolve_node(m, o)
    check_geometry(m, node, eps, R, cfg)
    prob = CapacitaryProblem(m, node, p, eps, R)
    prob.warm_start((3.0 - p) / (p - 1.0))
    t0 = time.perf_counter()
    diag = prob.solve(cfg)
    diag["cap"] = prob.capacity()
    diag["interior_minima"] = prob.interior_minima()
    diag["boundary_slope"] = prob.fit_boundary_slope()[0]
    diag["seconds"] = time.perf_counter() - t0
    logger.info("capacitary solve p=%s eps=%.4g R=%.4g: cap=%.8g residual=%.2e (%.1fs)",
                p, eps, R, diag["cap"], diag["residual"], diag["seconds"])
    return prob, diag


def _cache_key(m: GridMetric, node, p, R, eps, cfg: SolverConfig) -> str:
    return f"v1:{m.fingerprint()}:{node}:{p!r}:{R!r}:{eps!r}:{cfg.energy_tol}:{cfg.boundary_passes}:{cfg.mu_final}"


def grid_green(m: GridMetric, o, p: float, R: float, cfg: SolverConfig | None = None) -> PotentialField:
    """Green-normalized p-harmonic potential on B_R(o) from the excised capacitary solve.

    G = t_eps u with t_eps = (Cap_p(B_eps, B_R)/c_norm)^(-1/(p-1)); stored as
    w = log(Cap/c_norm) - (p-1) log u.
    """
    cfg = cfg or SolverConfig()
    p = check_exponent(p)
    node = resolve_node(m, o)
    eps = cfg.inner_radius(m.h)
    key = _cache_key(m, node, p, R, eps, cfg)
    hit = CACHE.get("green", key)
    w, diag = hit if hit is not None else (None, None)
    d = m.frozen_distance(node)
    c = green_constant(p)
    if w is None:
        prob, diag = solve_capacitary(m, node, p, eps, R, cfg)
        u = prob.u.reshape(m.shape)
        with np.errstate(divide="ignore", invalid="ignore"):
            w = np.where(u > 0, math.log(diag["cap"] / c) - (p - 1.0) * np.log(np.where(u > 0, u, 1.0)), np.inf)
        diag = {k: v for k, v in diag.items() if k != "stages"} | {"stages": len(diag["stages"])}
        CACHE.set("green", key, w, diag)
    diag = dict(diag)
    diag["log_t_eps"] = -math.log(diag["cap"] / c) / (p - 1.0)
    t_lo = float(w[d <= 2.0 * eps].max())
    shell = (d >= 0.9 * R) & (d < R)
    t_hi = float(w[shell].min()) if shell.any() else float(w[np.isfinite(w)].max())
    converged = diag["residual"] < 1e-3 and diag["interior_minima"] == 0
    return PotentialField("green", p, m, float(R), c, w, pole=tuple(m.point_of(node)), pole_node=node,
                          distance=d, inner_radius=eps, t_lo=t_lo, t_hi=t_hi, converged=converged,
                          diagnostics=diag)
