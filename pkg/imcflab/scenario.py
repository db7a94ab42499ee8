# imcflab/scenario.py
"""Scenario files: one experiment per file, dispatched to the compute modules."""
import logging
import math
import os
import pathlib
from dataclasses import dataclass, field

import numpy as np
import orjson

from .config import CONF
from .errors import ConfigError, FlowFailure, MetricError, SolverError
from .export import write_csv, write_json
from .imcf.pipeline import candidate_set_builder
from .imcf.report import default_t_grid, flow_report
from .mass.profile import radial_profile
from .mass.quasilocal import centered_family, iso_mass_estimate
from .mass.rigidity import rigidity_probe
from .metrics.constants import geometry_constants
from .metrics.grid import GridMetric
from .metrics.io import dump_array, load_metric
from .metrics.mollify import refinement_family
from .metrics.warped import WarpedMetric, curvature_profile, sphere_area
from .pharmonic.bounds import bound_checks
from .pharmonic.field import SolverConfig, check_exponent
from .pharmonic.grid_solver import grid_green
from .pharmonic.limit import imcf_limit
from .pharmonic.radial import radial_green, radial_limit_field
from .utils import sha12
from .verify import SUITES, verify

logger = logging.getLogger(__name__)

EXPERIMENTS = ("metric", "green", "flow", "mass", "profile", "verify")

EXIT_OK, EXIT_FAILED, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3


@dataclass
class Scenario:
    experiment: str
    metric: object = None
    solver: SolverConfig = field(default_factory=SolverConfig)
    p: float | None = None
    R: float | None = None
    o: tuple | None = None
    flow: dict = field(default_factory=dict)
    mass: dict = field(default_factory=dict)
    profile: dict = field(default_factory=dict)
    suite: str = "radial"
    out: str | None = None
    seed: int = 0
    base: pathlib.Path | None = None
    raw: dict = field(default_factory=dict)

    @property
    def scenario_hash(self) -> str:
        return sha12(orjson.dumps(self.raw, option=orjson.OPT_SORT_KEYS))

    @property
    def label(self) -> str:
        return f"{self.experiment}:{self.scenario_hash}"


def _referenced_files(node, base) -> list[pathlib.Path]:
    """Data files named anywhere inside a metric definition."""
    out = []
    if isinstance(node, dict):
        for k, v in node.items():
            if k == "data" and isinstance(v, str):
                p = pathlib.Path(v)
                out.append(p if p.is_absolute() or base is None else base / p)
            else:
                out.extend(_referenced_files(v, base))
    return out


def _number(value, name: str, path: str | None) -> float | None:
    if value is None:
        return None
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be a number, got {value!r}", path=path) from None


def parse_scenario(raw: dict, base=None, path: str | None = None) -> Scenario:
    if not isinstance(raw, dict):
        raise ConfigError("scenario must be a JSON object", path=path)
    experiment = raw.get("experiment")
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {experiment!r}; expected one of {EXPERIMENTS}", path=path)
    base = pathlib.Path(base) if base is not None else None
    metric = raw.get("metric")
    if experiment != "verify" and metric is None:
        raise ConfigError(f"experiment {experiment!r} needs a metric", path=path)
    if isinstance(metric, str):
        mp = pathlib.Path(metric)
        metric = str(mp if mp.is_absolute() or base is None else base / mp)
        if not pathlib.Path(metric).exists():
            raise ConfigError("metric file not found", path=metric)
    for f in _referenced_files(metric, base):
        if not f.exists():
            raise ConfigError("referenced data file not found", path=str(f))
    p = raw.get("p")
    if p is not None:
        try:
            p = check_exponent(p)
        except ConfigError as e:
            raise ConfigError(str(e), path=path) from None
    elif experiment == "green":
        raise ConfigError("green experiment needs p in (1, 3)", path=path)
    R = _number(raw.get("R"), "R", path)
    if R is not None and not R > 0:
        raise ConfigError(f"R must be positive, got {R}", path=path)
    seed = _number(raw.get("seed", 0), "seed", path)
    o = raw.get("o")
    if o is not None and (not isinstance(o, (list, tuple)) or len(o) != 3):
        raise ConfigError(f"o must be a node or point [x, y, z], got {o!r}", path=path)
    suite = raw.get("suite", "radial")
    if experiment == "verify" and suite not in SUITES:
        raise ConfigError(f"unknown suite {suite!r}; expected one of {SUITES}", path=path)
    solver = SolverConfig.from_dict(raw.get("solver") or {})
    return Scenario(experiment=experiment, metric=metric, solver=solver, p=p,
                    R=R, o=tuple(o) if o is not None else None,
                    flow=dict(raw.get("flow") or {}), mass=dict(raw.get("mass") or {}),
                    profile=dict(raw.get("profile") or {}), suite=suite, out=raw.get("out"),
                    seed=int(seed), base=base, raw=raw)


def load_scenario(path) -> Scenario:
    path = pathlib.Path(path)
    if not path.exists():
        raise ConfigError("scenario file not found", path=str(path))
    try:
        raw = orjson.loads(path.read_bytes())
    except orjson.JSONDecodeError as e:
        raise ConfigError(e.msg, path=str(path), line=e.lineno, column=e.colno) from e
    return parse_scenario(raw, base=path.parent, path=str(path))


def _writable(out_dir: pathlib.Path) -> pathlib.Path:
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise ConfigError(f"cannot create output directory: {e}", path=str(out_dir)) from e
    if not os.access(out_dir, os.W_OK):
        raise ConfigError("output directory is not writable", path=str(out_dir))
    return out_dir


# ---------------------------------------------------------------------------
# experiments: each returns (verdicts, artifacts, payload)
# ---------------------------------------------------------------------------

def _metric(sc: Scenario):
    m = load_metric(sc.metric, sc.base)
    print(f"[METRIC] {getattr(m, 'label', type(m).__name__)}")
    return m


def _outer_radius(sc: Scenario, m) -> float:
    if sc.R is not None:
        return sc.R
    if isinstance(m, WarpedMetric):
        return m.s_max
    raise ConfigError("grid experiments need R")


def run_metric(sc: Scenario, out: pathlib.Path, meta: dict):
    m = _metric(sc)
    artifacts = []
    R = sc.R if sc.R is not None else (0.5 * m.s_max if isinstance(m, WarpedMetric) else None)
    if isinstance(m, WarpedMetric):
        lo = m.s_min + 1e-6 * (m.s_max - m.s_min)
        s = np.linspace(lo, m.s_max, int(sc.flow.get("samples", 401)))
        R_s, _ = curvature_profile(m, s)
        rows = [{"s": a, "f": b, "area": c, "R": d}
                for a, b, c, d in zip(s, np.asarray(m.f(s), dtype=float), sphere_area(m, s), R_s)]
        artifacts.append(write_csv(out / "metric.csv", rows, ["s", "f", "area", "R"], meta))
    if R is None:
        R = 0.45 * float(np.min(m.hi - m.lo))
    consts = geometry_constants(m, sc.o, R)
    payload = {"label": m.label, "fingerprint": m.fingerprint(), "R": R, "constants": consts.as_dict()}
    if isinstance(m, GridMetric):
        payload["shape"] = list(m.shape)
    return [], artifacts, payload


def _green_field(sc: Scenario, m):
    R = _outer_radius(sc, m)
    if isinstance(m, WarpedMetric):
        return radial_green(m, sc.p, R, sc.solver.radial_samples)
    if isinstance(m, GridMetric):
        return grid_green(m, sc.o, sc.p, R, sc.solver)
    raise MetricError(f"unsupported metric {type(m).__name__}")


def _axis_rows(w) -> list[dict]:
    """Samples along the +x axis from the pole node."""
    i, j, k = w.pole_node
    line = w.w[i:, j, k]
    d = w.distance[i:, j, k]
    keep = np.isfinite(line)
    G = np.exp(-line[keep] / (w.p - 1.0)) if not w.is_limit else np.full(keep.sum(), np.nan)
    return [{"s": a, "w": b, "G": c} for a, b, c in zip(d[keep], line[keep], G)]


def run_green(sc: Scenario, out: pathlib.Path, meta: dict):
    m = _metric(sc)
    w = _green_field(sc, m)
    print(f"[GREEN] p={w.p} R={w.r_outer} converged={w.converged}")
    checks = bound_checks(w, m, tolerance_scale=meta.get("tolerance_scale"))
    if w.is_radial:
        rows = [{"s": s, "w": v, "G": g} for s, v, g in zip(w.radii, w.w, w.green())]
    else:
        rows = _axis_rows(w)
        dump_array(out / "green_w.f64", np.where(np.isfinite(w.w), w.w, np.nan))
    artifacts = [write_csv(out / "green.csv", rows, ["s", "w", "G"], meta)]
    payload = {k: v for k, v in checks.items() if k != "verdicts"}
    payload.update({"t_lo": w.t_lo, "t_hi": w.t_hi, "converged": w.converged,
                    "diagnostics": {k: v for k, v in w.diagnostics.items() if not callable(v)}})
    return checks["verdicts"], artifacts, payload


def _t_grid(flow: dict, w):
    if "t" in flow:
        return np.asarray(flow["t"], dtype=float)
    grid = default_t_grid(w, flow.get("spacing"), flow.get("t_min"))
    if "t_max" in flow:
        grid = grid[grid <= float(flow["t_max"]) + 1e-12]
    return grid


def run_flow(sc: Scenario, out: pathlib.Path, meta: dict):
    m = _metric(sc)
    if isinstance(m, WarpedMetric):
        w = radial_limit_field(m, sc.R)
    else:
        w = imcf_limit(m, sc.o, _outer_radius(sc, m), sc.solver)
    print(f"[FLOW] {m.label}: t in ({w.t_lo:.4g}, {w.t_hi:.4g})")
    rep = flow_report(w, m, _t_grid(sc.flow, w), float(sc.flow.get("delta", 0.0)),
                      tolerance_scale=meta.get("tolerance_scale"), threads=meta.get("threads"))
    columns = ["t", "volume", "perimeter", "perimeter_ratio", "components", "boundary_components",
               "H2_integral", "inv_grad_integral", "hawking", "mQL", "containment_radius", "holder_residual"]
    artifacts = [write_csv(out / "flow.csv", rep.rows(), columns, meta)]
    payload = rep.as_dict()
    payload.pop("entries", None)
    payload["rigidity"] = rigidity_probe(rep, m, w)
    verdicts = list(rep.verdicts)
    targets = sc.flow.get("targets")
    if targets:
        sigmas = sc.flow.get("sigmas")
        family = [m]
        if sigmas:
            family, monotone = refinement_family(m, sigmas)
            payload["refinement_monotone"] = monotone
        rows, candidates = [], []
        for P in targets:
            cs = candidate_set_builder(family, float(P), xi=sc.flow.get("xi"), R=sc.R, cfg=sc.solver,
                                       tolerance_scale=meta.get("tolerance_scale"))
            print(f"[FLOW] target P={float(P):.6g}: ratio={cs.ratio:.8g} theta={cs.theta:.6g}")
            rows.extend({"P_target": cs.P_target} | r for r in cs.rows())
            candidates.append({"P_target": cs.P_target, "xi": cs.xi, "T": cs.T, "rho": cs.rho,
                               "ratio": cs.ratio, "theta": cs.theta})
            for j, member_rep in enumerate(cs.reports):
                verdicts.extend(v | {"id": f"{v['id']}[P={cs.P_target:.6g},j={j}]"} for v in member_rep.verdicts[-2:])
        cols = ["P_target", "index", "eps", "T", "rho", "volume", "perimeter", "ratio", "bound", "theta",
                "reach", "contained"]
        artifacts.append(write_csv(out / "candidates.csv", rows, cols, meta))
        payload["candidates"] = candidates
    return verdicts, artifacts, payload


def run_mass(sc: Scenario, out: pathlib.Path, meta: dict):
    m = _metric(sc)
    if not isinstance(m, WarpedMetric):
        raise MetricError("the centred-ball mass sweep needs a radial metric")
    radii = sc.mass.get("radii")
    if radii is None:
        radii = np.geomspace(float(sc.mass.get("r_min", 1.0)), float(sc.mass.get("r_max", m.s_max)),
                             int(sc.mass.get("n", 40)))
    rep = iso_mass_estimate(m, centered_family(m, radii, by=sc.mass.get("by", "chart")))
    print(f"[MASS] {m.label}: m_iso={rep.m_iso:.8g} trend={rep.trend}")
    artifacts = [write_csv(out / "mass.csv", rep.rows(), ["index", "ref", "volume", "perimeter", "mQL", "tail"],
                           meta)]
    return [], artifacts, rep.as_dict()


def run_profile(sc: Scenario, out: pathlib.Path, meta: dict):
    m = _metric(sc)
    if not isinstance(m, WarpedMetric):
        raise MetricError("the isoperimetric profile needs a radial metric")
    V = sc.profile.get("volumes")
    if V is None:
        V = np.geomspace(float(sc.profile.get("v_min", 0.1)), float(sc.profile["v_max"]),
                         int(sc.profile.get("n", 32)))
    prof = radial_profile(m, V, float(sc.profile.get("eps", 1e-4)), sc.profile.get("dini_at"))
    print(f"[PROFILE] {m.label}: Holder exponent {prof.holder_exponent:.6g}")
    artifacts = [write_csv(out / "profile.csv", prof.rows(), ["V", "I", "I_eucl", "mass"], meta)]
    payload = prof.as_dict()
    payload.pop("rows", None)
    return [], artifacts, payload


def run_verify(sc: Scenario, out: pathlib.Path, meta: dict):
    summary = verify(sc.suite, meta.get("tolerance_scale"))
    artifacts = [write_csv(out / "verify.csv", summary["rows"],
                           ["check", "suite", "measured", "bound", "margin", "passed", "detail"], meta)]
    verdicts = [{"id": r["check"], "passed": r["passed"], "hard": True, "worst_margin": r["margin"],
                 "tolerance": 0.0, "t_range": (math.nan, math.nan), "detail": r["detail"]}
                for r in summary["rows"]]
    return verdicts, artifacts, {"suite": sc.suite, "seconds": summary["seconds"]}


RUNNERS = {"metric": run_metric, "green": run_green, "flow": run_flow, "mass": run_mass,
           "profile": run_profile, "verify": run_verify}


def run(sc: Scenario, out_dir=None, threads: int | None = None,
        tolerance_scale: float | None = None) -> tuple[int, dict]:
    """Run one scenario; summary.json is written whatever the outcome."""
    out = _writable(pathlib.Path(out_dir or sc.out or "out"))
    meta = {"experiment": sc.experiment, "scenario_hash": sc.scenario_hash, "seed": sc.seed}
    if tolerance_scale is not None:
        meta["tolerance_scale"] = tolerance_scale
    if threads is not None:
        meta["threads"] = threads
    summary = {"experiment": sc.experiment, "partial": False, "verdicts": [], "artifacts": [], "error": None}
    try:
        verdicts, artifacts, payload = RUNNERS[sc.experiment](sc, out, meta)
        hard = [v for v in verdicts if v["hard"] and not v["passed"]]
        margins = [v["worst_margin"] for v in verdicts if np.isfinite(v["worst_margin"])]
        summary.update(verdicts=verdicts, artifacts=[str(a) for a in artifacts], result=payload,
                       hard_failures=[v["id"] for v in hard], worst_margin=min(margins) if margins else None)
        code = EXIT_FAILED if hard else EXIT_OK
    except (ConfigError, MetricError) as e:
        logger.error("%s rejected: %s", sc.label, e)
        summary["error"] = str(e)
        code = EXIT_CONFIG
    except (TypeError, ValueError, KeyError) as e:
        # malformed values inside an experiment block
        logger.exception("%s rejected", sc.label)
        summary["error"] = f"bad scenario value: {e!r}"
        code = EXIT_CONFIG
    except (SolverError, FlowFailure) as e:
        logger.error("%s failed: %s", sc.label, e)
        summary.update(error=str(e), partial=True)
        if isinstance(e, FlowFailure):
            summary["member_index"] = e.member_index
        if isinstance(e, SolverError):
            summary["diagnostics"] = e.diagnostics
        code = EXIT_SOLVER
    summary["exit_code"] = code
    write_json(out / "summary.json", summary, sc.scenario_hash)
    print(f"[RUN] {sc.label} -> exit {code} ({out})")
    return code, summary
