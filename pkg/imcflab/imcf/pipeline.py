# imcflab/imcf/pipeline.py
"""Candidate sets of prescribed perimeter with a reverse isoperimetric guarantee.

For a target perimeter P_target the flow on each member g_j of an approximating
family runs up to T = log(P_target/4 pi), whose sublevel has perimeter P_target.
rho is chosen from 4 pi exp(2 log(rho - 1) - xi - 1) = P_target with xi the
measured lower-bound constant, so the set lies in B_{rho-1}.
"""
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, FlowFailure
from ..metrics.grid import GridMetric
from ..metrics.mollify import SmoothedApproximation
from ..metrics.warped import WarpedMetric
from ..pharmonic.bounds import lower_bound_constant
from ..pharmonic.field import PotentialField, SolverConfig
from ..pharmonic.limit import imcf_limit
from ..pharmonic.radial import radial_limit_field
from ..utils import scaled, verdict
from .levelset import LevelSetGeometry
from .report import FlowReport, default_t_grid, flow_report

logger = logging.getLogger(__name__)

FOUR_PI = 4.0 * math.pi
SIX_SQRT_PI = 6.0 * math.sqrt(math.pi)


@dataclass(frozen=True)
class CandidateMember:
    index: int
    eps: float
    T: float
    rho: float
    volume: float
    perimeter: float
    ratio: float
    bound: float
    theta: float
    reach: float
    contained: bool

    def as_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class CandidateSet:
    P_target: float
    xi: float
    T: float
    rho: float
    members: list
    final: LevelSetGeometry
    report: FlowReport
    reports: list = field(default_factory=list)

    @property
    def ratio(self) -> float:
        return self.members[-1].ratio

    @property
    def theta(self) -> float:
        return self.members[-1].theta

    # iso_mass_estimate reads the final set through these
    @property
    def volume(self) -> float:
        return self.final.volume

    @property
    def perimeter(self) -> float:
        return self.final.perimeter

    @property
    def ref(self) -> str:
        return f"P={self.P_target:g}"

    def rows(self) -> list[dict]:
        return [m.as_dict() for m in self.members]


def _member_metric(member):
    if isinstance(member, SmoothedApproximation):
        return member.smoothed, float(member.eps_defect)
    if isinstance(member, (WarpedMetric, GridMetric)):
        return member, 0.0
    if isinstance(member, tuple) and len(member) == 2:
        return member[0], float(member[1])
    raise ConfigError(f"family member of type {type(member).__name__} is not a metric or approximation")


def _flow_field(m, R: float | None, cfg: SolverConfig | None) -> PotentialField:
    if isinstance(m, WarpedMetric):
        return radial_limit_field(m, R)
    if R is None:
        raise ConfigError("lattice family members need an explicit R")
    return imcf_limit(m, m.center, R, cfg)


def candidate_set_builder(family, P_target: float, xi: float | None = None, R: float | None = None,
                          cfg: SolverConfig | None = None, tolerance_scale: float | None = None) -> CandidateSet:
    """Run the flow on every family member up to T = log(P_target/4 pi).

    The ratio |E| 6 sqrt(pi)/P_target^{3/2} of each member is checked against
    (1 + (2/3) eps_j e^T)^{-1/2}; any failure on member j is re-raised as a
    FlowFailure carrying j.

    When xi is not given it is the largest measured lower-bound constant over the
    members, floored at 1 so that rho never drops below 1 + sqrt(P_target/4 pi) e.
    An explicit xi is used as given.
    """
    if not P_target > 0:
        raise ConfigError(f"target perimeter must be positive, got {P_target}")
    members = [_member_metric(x) for x in family]
    if not members:
        raise ConfigError("candidate_set_builder needs a non-empty family")
    defects = [e for _, e in members]
    if any(b > a * (1 + 1e-9) + 1e-12 for a, b in zip(defects, defects[1:])):
        logger.warning("family defects are not non-increasing: %s", defects)
    T = math.log(P_target / FOUR_PI)

    fields = []
    for j, (m, _) in enumerate(members):
        try:
            fields.append(_flow_field(m, R, cfg))
        except Exception as e:
            raise FlowFailure(str(e), member_index=j) from e
    if xi is None:
        measured = []
        for j, w in enumerate(fields):
            try:
                measured.append(lower_bound_constant(w)[1])
            except Exception as e:
                raise FlowFailure(str(e), member_index=j) from e
        xi = max(1.0, max(measured))
    rho = 1.0 + math.sqrt(P_target / FOUR_PI) * math.exp(0.5 * (xi + 1.0))
    logger.info("candidate sets P=%.6g: T=%.6g xi=%.6g rho=%.6g over %d member(s)", P_target, T, xi, rho,
                len(members))

    out, reports = [], []
    for j, ((m, eps), w) in enumerate(zip(members, fields)):
        try:
            lo, T_valid = w.validity()
            if not T < T_valid:
                raise ConfigError(f"T={T:.6g} beyond the flow's validity threshold {T_valid:.6g}")
            grid = default_t_grid(w)
            ts = np.append(grid[grid < T - 1e-9], T)
            if ts.size < 2:
                raise ConfigError(f"T={T:.6g} too close to the start of the flow")
            rep = flow_report(w, m, ts, delta=eps, tolerance_scale=tolerance_scale)
        except Exception as e:
            raise FlowFailure(str(e), member_index=j) from e
        E = rep.last
        ratio = E.volume * SIX_SQRT_PI / P_target**1.5
        bound = 1.0 / math.sqrt(1.0 + (2.0 / 3.0) * eps * math.exp(T))
        contained = E.containment_radius <= rho - 1.0
        rep.constants.update({"P_target": P_target, "T_rho_xi": T, "xi": xi, "rho": rho,
                              "theta": E.perimeter / P_target, "candidate_ratio": ratio})
        tol = scaled(1e-6 if rep.method == "radial" else 0.05, tolerance_scale)
        rep.verdicts.append(verdict("candidate_ratio", [ratio - bound], tol, (T, T), rep.method == "radial",
                                    f"|E| 6 sqrt(pi)/P^(3/2) = {ratio:.9g} against {bound:.9g} (eps={eps:g})"))
        rep.verdicts.append(verdict("candidate_containment", [rho - 1.0 - E.containment_radius], 0.0, (T, T),
                                    False, f"reach {E.containment_radius:.6g} inside B_(rho-1), rho={rho:.6g}"))
        out.append(CandidateMember(j, eps, T, rho, E.volume, E.perimeter, ratio, bound,
                                   E.perimeter / P_target, E.containment_radius, contained))
        reports.append(rep)
        logger.debug("member %d: ratio=%.9g bound=%.9g theta=%.9g", j, ratio, bound, E.perimeter / P_target)
    return CandidateSet(P_target, xi, T, rho, out, reports[-1].last, reports[-1], reports)
