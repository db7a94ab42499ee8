# imcflab/config.py
import os
from dataclasses import dataclass
from dotenv import load_dotenv

load_dotenv()


def _flag(name: str, default: str) -> bool:
    return os.getenv(name, default).lower() in ("1", "true", "yes", "on")


@dataclass
class Settings:
    # --- Execution ---
    threads: int          = int(os.getenv("IMCFLAB_THREADS", "4"))
    tolerance_scale: float = float(os.getenv("IMCFLAB_TOLERANCE_SCALE", "1.0"))
    log_level: str        = os.getenv("IMCFLAB_LOG_LEVEL", "INFO")

    # --- Cache ---
    cache_dir: str  = os.getenv("IMCFLAB_CACHE_DIR", ".imcflab_cache")
    use_cache: bool = _flag("IMCFLAB_USE_CACHE", "true")

    # --- Flow t-grid ---
    t_spacing: float = float(os.getenv("IMCFLAB_T_SPACING", "0.05"))
    t_min: float     = float(os.getenv("IMCFLAB_T_MIN", "-8.0"))

    # --- Warps ---
    # slope jump between adjacent sample intervals above which a sampled warp has a corner
    kink_tolerance: float = float(os.getenv("IMCFLAB_KINK_TOL", "1e-2"))
    pole_slope_tolerance: float = 1e-3
    # radial samples per PotentialField
    radial_samples: int = int(os.getenv("IMCFLAB_RADIAL_SAMPLES", "400"))

    # --- Quadrature ---
    quad_epsrel: float = 1e-12
    quad_epsabs: float = 0.0
    gauss_nodes: int = 20
    dyadic_levels: int = 60

    # --- Grid solver defaults ---
    energy_tol: float = 1e-10
    max_iter: int = 4000
    newton_iter: int = 40
    mu_final: float = 1e-8
    boundary_passes: int = 2
    max_excision_ratio: float = 0.25

    # --- Mass / profile ---
    mass_family_min: int = 5


CONF = Settings()

