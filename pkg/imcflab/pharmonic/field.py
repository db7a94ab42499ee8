# imcflab/pharmonic/field.py
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ..config import CONF
from ..errors import ConfigError


def green_constant(p: float) -> float:
    """c_norm = 4 pi ((3-p)/(p-1))^(p-1); the p -> 1 limit is 4 pi."""
    if p == 1.0:
        return 4.0 * math.pi
    return 4.0 * math.pi * ((3.0 - p) / (p - 1.0)) ** (p - 1.0)


def check_exponent(p: float) -> float:
    try:
        p = float(p)
    except (TypeError, ValueError):
        raise ConfigError(f"p must be a number, got {p!r}") from None
    if not 1.0 < p < 3.0:
        raise ConfigError(f"p must lie in (1, 3), got {p}")
    return p


@dataclass(frozen=True)
class PotentialField:
    """A Green function G_p (kind "green") or w = -(p-1) log G_p (kind "log").

    `w` always holds the log-transformed samples: radially at `radii`, or on the
    lattice nodes of `metric` (inf where G vanishes). Radial fields also carry the
    exact profile s -> w(s) and its derivative. p = 1 marks the p -> 1 limit.
    """
    kind: str
    p: float
    metric: object
    r_outer: float
    c_norm: float
    w: np.ndarray
    radii: Optional[np.ndarray] = None
    profile: Optional[Callable] = None
    slope: Optional[Callable] = None
    pole: tuple = (0.0, 0.0, 0.0)
    pole_node: Optional[tuple] = None
    distance: Optional[np.ndarray] = None
    inner_radius: float = 0.0
    t_lo: float = -math.inf
    t_hi: float = math.inf
    cauchy_gap: float = float("nan")
    converged: bool = True
    diagnostics: dict = field(default_factory=dict)

    @property
    def is_radial(self) -> bool:
        return self.radii is not None

    @property
    def is_limit(self) -> bool:
        return self.p == 1.0

    def values(self) -> np.ndarray:
        """Samples in the field's own kind."""
        return self.green() if self.kind == "green" else self.w

    def green(self) -> np.ndarray:
        if self.is_limit:
            raise ValueError("the p -> 1 limit has no Green function")
        with np.errstate(over="ignore"):
            return np.exp(-self.w / (self.p - 1.0))

    def at(self, s):
        if self.profile is None:
            raise ValueError("pointwise profile only available for radial fields")
        return self.profile(s)

    def validity(self) -> tuple:
        """(pole threshold, T): sublevels {w < t} are meaningful for t_lo < t < T."""
        return self.t_lo, self.t_hi


@dataclass(frozen=True)
class SolverConfig:
    p_schedule: tuple = tuple(1.0 + 2.0 ** -k for k in range(1, 13))
    energy_tol: float = CONF.energy_tol
    max_iter: int = CONF.max_iter
    newton_iter: int = CONF.newton_iter
    eps_inner: Optional[float] = None
    eps_inner_cells: float = 4.0
    annulus: tuple = (0.1, 1.0)
    cauchy_tol: float = 1e-3
    mu_final: float = CONF.mu_final
    boundary_passes: int = CONF.boundary_passes
    max_excision_ratio: float = CONF.max_excision_ratio
    radial_samples: int = CONF.radial_samples

    def __post_init__(self):
        ps = tuple(float(p) for p in self.p_schedule)
        if not ps:
            raise ConfigError("p_schedule is empty")
        for p in ps:
            check_exponent(p)
        if any(b >= a for a, b in zip(ps, ps[1:])):
            raise ConfigError("p_schedule must be strictly decreasing")
        a, b = self.annulus
        if not 0 < a < b:
            raise ConfigError(f"annulus must satisfy 0 < a < b, got {self.annulus}")
        if self.energy_tol <= 0 or self.max_iter <= 0:
            raise ConfigError("energy_tol and max_iter must be positive")
        object.__setattr__(self, "p_schedule", ps)

    def inner_radius(self, h: float) -> float:
        return self.eps_inner if self.eps_inner is not None else self.eps_inner_cells * h

    @classmethod
    def from_dict(cls, d: dict) -> "SolverConfig":
        known = {k: v for k, v in d.items() if k in cls.__dataclass_fields__}
        unknown = set(d) - set(known)
        if unknown:
            raise ConfigError(f"unknown solver keys: {sorted(unknown)}")
        if "p_schedule" in known:
            known["p_schedule"] = tuple(known["p_schedule"])
        if "annulus" in known:
            known["annulus"] = tuple(known["annulus"])
        return cls(**known)


@dataclass(frozen=True)
class CapacityReport:
    descriptor: str
    cap: float
    energy: float
    residual: float
    p: float
    method: str = "radial"
