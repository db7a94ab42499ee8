import hashlib
import math

from .types import Verdict

FLOAT_FORMAT = ".17g"


def sha12(s: str | bytes) -> str:
    if isinstance(s, str):
        s = s.encode("utf-8")
    return hashlib.sha256(s).hexdigest()[:12]


def fmt(x) -> str:
    """Round-trip safe float text (17 significant digits)."""
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, int):
        return str(x)
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, FLOAT_FORMAT)


def scaled(tol: float, scale: float | None = None) -> float:
    from .config import CONF
    return tol * (CONF.tolerance_scale if scale is None else scale)


def verdict(check_id: str, margins, tolerance: float, t_range=(float("nan"), float("nan")),
            hard: bool = True, detail: str = "") -> Verdict:
    """Fold per-sample margins (slack of an inequality, >= 0 means satisfied) into a verdict.

    A check passes when its worst margin is no worse than -tolerance. Equality checks
    pass margins of the form -|error|.
    """
    import numpy as np
    m = np.asarray(margins, dtype=float).ravel()
    m = m[~np.isnan(m)]
    worst = float(m.min()) if m.size else float("nan")
    passed = bool(m.size) and worst >= -tolerance
    return {
        "id": check_id,
        "passed": passed,
        "hard": hard,
        "worst_margin": worst,
        "tolerance": float(tolerance),
        "t_range": (float(t_range[0]), float(t_range[1])),
        "detail": detail,
    }
