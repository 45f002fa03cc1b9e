import os
from dataclasses import dataclass
from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()


@dataclass
class Config:
    # Matrix analysis settings
    j_max: int = int(os.getenv("J_MAX", "200"))
    tau_spec: float = float(os.getenv("TAU_SPEC", "1e-9"))
    tau_det_scale: float = float(os.getenv("TAU_DET_SCALE", "1e-12"))
    n_fit: int = int(os.getenv("N_FIT", "64"))

    # Truncation settings for sums over j in Z
    tail_tol: float = float(os.getenv("TAIL_TOL", "1e-12"))
    j_abs_max: int = int(os.getenv("J_ABS_MAX", "200"))

    # Quadrature settings
    quad_abs_tol: float = float(os.getenv("QUAD_ABS_TOL", "1e-12"))
    quad_rel_tol: float = float(os.getenv("QUAD_REL_TOL", "1e-12"))
    quad_max_depth: int = int(os.getenv("QUAD_MAX_DEPTH", "40"))

    # Spline settings
    spline_n_max: int = int(os.getenv("SPLINE_N_MAX", "30"))

    # Grid settings
    grid_n_radii: int = int(os.getenv("GRID_N_RADII", "4096"))
    grid_n_directions: int = int(os.getenv("GRID_N_DIRECTIONS", "64"))
    grid_high_dim_directions: int = int(os.getenv("GRID_HIGH_DIM_DIRECTIONS", "256"))
    grid_seed: int = int(os.getenv("GRID_SEED", str(0x5CA1E)), 0)

    # Processing settings
    batch_size: int = int(os.getenv("BATCH_SIZE", "4096"))
    verify_tol: float = float(os.getenv("VERIFY_TOL", "1e-10"))
    log_level: str = os.getenv("LOG_LEVEL", "INFO")


# Global config instance
config = Config()
