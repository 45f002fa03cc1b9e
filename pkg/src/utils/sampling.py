from dataclasses import dataclass
from typing import Optional, Tuple
import logging
import numpy as np
from src.config.settings import config
from src.utils.errors import InvalidInputError
from src.utils.matrix import Norm, SquareMatrix, expanding_orientation

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GridSpec:
    """Deterministic radii x directions grid; echoed into every report that uses it."""

    r_lo: float
    r_hi: float
    n_radii: int
    n_directions: int
    dim: int
    seed: int
    norm: Norm = Norm.EUCLID
    log_spaced: bool = True
    endpoint: bool = False

    def describe(self) -> str:
        spacing = "log" if self.log_spaced else "linear"
        interval = f"[{self.r_lo:.17g}, {self.r_hi:.17g}{']' if self.endpoint else ')'}"
        return (f"{spacing} radii {interval} x {self.n_radii}, {self.n_directions} directions, "
                f"d={self.dim}, norm={self.norm.value}, seed={self.seed:#x}")


def unit_directions(dim: int, n: Optional[int] = None, norm: Norm = Norm.EUCLID,
                    seed: Optional[int] = None) -> np.ndarray:
    """
    Unit vectors (in the given norm) covering the sphere.

    d = 1 uses {+1, -1}; d = 2 equally spaced angles; d = 3 a Fibonacci lattice;
    d > 3 seeded Gaussian directions.
    """
    n = config.grid_n_directions if n is None else n
    seed = config.grid_seed if seed is None else seed
    if dim == 1:
        dirs = np.array([[1.0], [-1.0]])
    elif dim == 2:
        theta = 2.0 * np.pi * np.arange(n) / n
        dirs = np.column_stack([np.cos(theta), np.sin(theta)])
    elif dim == 3:
        k = np.arange(n) + 0.5
        z = 1.0 - 2.0 * k / n
        phi = np.pi * (1.0 + 5.0 ** 0.5) * k
        rho = np.sqrt(1.0 - z ** 2)
        dirs = np.column_stack([rho * np.cos(phi), rho * np.sin(phi), z])
    else:
        rng = np.random.default_rng(seed)
        dirs = rng.standard_normal((max(n, config.grid_high_dim_directions), dim))
    return dirs / norm.of(dirs)[:, None]


def radial_grid(spec: GridSpec) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return (points, radii, direction_index) for a GridSpec, radii varying fastest."""
    if spec.n_radii < 1 or (spec.log_spaced and spec.r_lo <= 0):
        raise InvalidInputError(f"Invalid grid: {spec.describe()}")
    if spec.log_spaced:
        radii = np.geomspace(spec.r_lo, spec.r_hi, spec.n_radii, endpoint=spec.endpoint)
    else:
        radii = np.linspace(spec.r_lo, spec.r_hi, spec.n_radii, endpoint=spec.endpoint)
    dirs = unit_directions(spec.dim, spec.n_directions, spec.norm, spec.seed)
    rr = np.tile(radii, len(dirs))
    idx = np.repeat(np.arange(len(dirs)), len(radii))
    points = dirs[idx] * rr[:, None]
    return points, rr, idx


def band_ratio(dilation: SquareMatrix, norm: Norm = Norm.EUCLID) -> float:
    """
    Radius ratio of a band {r <= ||x|| < r * ratio} met by every dilation orbit.

    Consecutive orbit points of the expanding orientation E satisfy
    ||E^{j+1} x|| <= ||E|| ||E^j x||, so ratio = ||E|| suffices.
    """
    e = expanding_orientation(dilation, norm)
    if e is None:
        raise InvalidInputError(f"Dilation {dilation!r} is neither expanding nor contracting")
    return norm.operator_norm(e.entries)


def band_grid(dilation: SquareMatrix, norm: Norm = Norm.EUCLID, r0: float = 1.0,
              n_radii: Optional[int] = None, n_directions: Optional[int] = None,
              seed: Optional[int] = None) -> Tuple[np.ndarray, GridSpec]:
    """Points covering one scale band [r0, r0 * ratio) of the dilation."""
    spec = GridSpec(
        r_lo=r0,
        r_hi=r0 * band_ratio(dilation, norm),
        n_radii=config.grid_n_radii if n_radii is None else n_radii,
        n_directions=config.grid_n_directions if n_directions is None else n_directions,
        dim=dilation.dim,
        seed=config.grid_seed if seed is None else seed,
        norm=norm,
    )
    points, _, _ = radial_grid(spec)
    return points, spec


def log_samples(lo: float, hi: float, n: int, dim: int = 1, n_directions: Optional[int] = None,
                norm: Norm = Norm.EUCLID) -> Tuple[np.ndarray, GridSpec]:
    """Log-spaced radii over [lo, hi] (inclusive) times the standard directions."""
    spec = GridSpec(lo, hi, n, config.grid_n_directions if n_directions is None else n_directions,
                    dim, config.grid_seed, norm, log_spaced=True, endpoint=True)
    points, _, _ = radial_grid(spec)
    return points, spec


def random_samples(lo: float, hi: float, n: int, seed: Optional[int] = None) -> np.ndarray:
    """Seeded uniform samples on (lo, hi] as an (n, 1) array."""
    rng = np.random.default_rng(config.grid_seed if seed is None else seed)
    return (hi - (hi - lo) * rng.random(n)).reshape(-1, 1)
