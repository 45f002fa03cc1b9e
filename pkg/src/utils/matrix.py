from dataclasses import dataclass, field
from enum import Enum
from math import gamma as gamma_fn, pi
from typing import List, Optional, Sequence, Tuple
import logging
import numpy as np
from src.config.settings import config
from src.utils.errors import InvalidInputError, RangeError

logger = logging.getLogger(__name__)


class Norm(str, Enum):
    """The two norms on R^d supported for supports, dilation bounds and radial profiles."""

    EUCLID = "euclid"
    MAX = "max"

    def of(self, points: np.ndarray) -> np.ndarray:
        """Row-wise norm of an (N, d) array."""
        points = np.atleast_2d(points)
        if self is Norm.EUCLID:
            return np.linalg.norm(points, axis=1)
        return np.max(np.abs(points), axis=1)

    def operator_norm(self, a: np.ndarray) -> float:
        if not np.all(np.isfinite(a)):
            return float("inf")
        if self is Norm.EUCLID:
            return float(np.linalg.norm(a, 2))
        # max absolute row sum, attained at a sign vertex of the unit cube
        return float(np.linalg.norm(a, np.inf))

    def unit_ball_volume(self, d: int) -> float:
        if self is Norm.EUCLID:
            return pi ** (d / 2) / gamma_fn(d / 2 + 1)
        return 2.0 ** d


@dataclass(frozen=True, eq=False)
class SquareMatrix:
    entries: np.ndarray

    def __post_init__(self):
        a = np.array(self.entries, dtype=float)
        if a.ndim == 0:
            a = a.reshape(1, 1)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise InvalidInputError(f"Matrix must be square with dim >= 1, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise InvalidInputError("Matrix entries must be finite")
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[float]]) -> "SquareMatrix":
        return cls(np.asarray(rows, dtype=float))

    @classmethod
    def scalar(cls, value: float, dim: int = 1) -> "SquareMatrix":
        return cls(value * np.eye(dim))

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def det(self) -> float:
        return float(np.linalg.det(self.entries))

    @property
    def tau_det(self) -> float:
        scale = float(np.max(np.abs(self.entries)))
        return config.tau_det_scale * scale ** self.dim

    def is_invertible(self) -> bool:
        return abs(self.det) > self.tau_det

    def require_invertible(self) -> None:
        if not self.is_invertible():
            raise InvalidInputError(
                f"Matrix is singular: |det| = {abs(self.det):.3e} <= tau_det = {self.tau_det:.3e}"
            )

    def inverse(self) -> "SquareMatrix":
        self.require_invertible()
        return SquareMatrix(np.linalg.inv(self.entries))

    def transpose(self) -> "SquareMatrix":
        return SquareMatrix(self.entries.T.copy())

    def power(self, j: int) -> np.ndarray:
        if j < 0:
            self.require_invertible()
        return np.linalg.matrix_power(self.entries, j)

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Apply the matrix to every row of an (N, d) array."""
        return np.atleast_2d(points) @ self.entries.T

    def is_scalar(self) -> bool:
        return bool(np.array_equal(self.entries, self.entries[0, 0] * np.eye(self.dim)))

    def to_rows(self) -> List[List[float]]:
        return self.entries.tolist()

    def __repr__(self) -> str:
        return f"SquareMatrix({self.to_rows()})"


@dataclass(frozen=True)
class PowerBounds:
    j: int
    lambda_j: float
    mu_j: float


@dataclass(frozen=True)
class ExpansionCertificate:
    is_expanding: bool
    spectral_radius_of_inverse: float
    norm_monotone: bool
    growth_constants: Optional[Tuple[float, float]]
    norm: Norm = Norm.EUCLID
    notes: Tuple[str, ...] = field(default_factory=tuple)

    def to_keyvalue(self) -> str:
        lines = [
            f"is_expanding = {str(self.is_expanding).lower()}",
            f"spectral_radius_of_inverse = {self.spectral_radius_of_inverse:.17g}",
            f"norm = {self.norm.value}",
            f"norm_monotone = {str(self.norm_monotone).lower()}",
        ]
        if self.growth_constants is not None:
            c_const, alpha = self.growth_constants
            lines.append(f"growth_C = {c_const:.17g}")
            lines.append(f"growth_alpha = {alpha:.17g}")
        for note in self.notes:
            lines.append(f"note = {note}")
        return "\n".join(lines)


def spectral_radius(m: SquareMatrix) -> float:
    """Largest eigenvalue modulus, from the LAPACK eigenvalue solver."""
    return float(np.max(np.abs(np.linalg.eigvals(m.entries))))


def _check_j(j: int, j_max: Optional[int]) -> None:
    j_max = config.j_max if j_max is None else j_max
    if abs(j) > j_max:
        raise RangeError(f"|j| = {abs(j)} exceeds J_max = {j_max}")


def _bounds_of_power(p: np.ndarray, p_inv: np.ndarray, norm: Norm) -> Tuple[float, float]:
    """(lambda, mu) with lambda ||x|| <= ||P x|| <= mu ||x||, given P and its inverse."""
    if norm is Norm.EUCLID and np.all(np.isfinite(p)) and np.any(p):
        s = np.linalg.svd(p, compute_uv=False)
        return float(s[-1]), float(s[0])
    mu = norm.operator_norm(p)
    inv_norm = norm.operator_norm(p_inv)
    with np.errstate(divide="ignore"):
        lam = float(np.divide(1.0, inv_norm)) if inv_norm > 0 else float("inf")
    return lam, mu


def singular_interval(m: SquareMatrix, j: int, norm: Norm = Norm.EUCLID,
                      j_max: Optional[int] = None) -> PowerBounds:
    """
    Sharp constants lambda_j, mu_j with lambda_j ||x|| <= ||M^j x|| <= mu_j ||x||.

    For the Euclidean norm these are the extreme singular values of M^j; for the
    max-norm they are 1/||M^-j||_inf and ||M^j||_inf.
    """
    _check_j(j, j_max)
    m.require_invertible()
    if j == 0:
        return PowerBounds(0, 1.0, 1.0)
    lam, mu = _bounds_of_power(m.power(j), m.power(-j), norm)
    return PowerBounds(j, lam, mu)


def is_expanding(m: SquareMatrix, norm: Norm = Norm.EUCLID, tau_spec: Optional[float] = None,
                 n_fit: Optional[int] = None) -> ExpansionCertificate:
    """
    Classify M as expanding and produce growth constants (C, alpha).

    Args:
        m: Invertible square matrix
        norm: Norm used for the monotonicity test and the growth constants
        tau_spec: Margin applied to the strict inequality rho(M^-1) < 1
        n_fit: Number of powers inspected when fitting C
    """
    tau_spec = config.tau_spec if tau_spec is None else tau_spec
    n_fit = config.n_fit if n_fit is None else n_fit
    m.require_invertible()

    rho_inv = spectral_radius(m.inverse())
    expanding = rho_inv < 1.0 - tau_spec
    lam_1, _ = _bounds_of_power(m.entries, np.linalg.inv(m.entries), norm)
    monotone = lam_1 >= 1.0 - tau_spec

    growth = None
    notes = []
    if expanding:
        alpha = 1.0 / (rho_inv + tau_spec)
        inv = np.linalg.inv(m.entries)
        p = np.eye(m.dim)
        p_inv = np.eye(m.dim)
        ratios = []
        with np.errstate(over="ignore", invalid="ignore"):
            for n in range(n_fit + 1):
                lam_n, _ = _bounds_of_power(p, p_inv, norm)
                ratios.append(lam_n / np.power(alpha, n))
                p = p @ m.entries
                p_inv = inv @ p_inv
        c_const = float(min(1.0, min(r for r in ratios if np.isfinite(r))))
        if c_const <= 0.0:
            c_const = float(np.finfo(float).tiny)
        growth = (c_const, alpha)
        notes.append(f"growth constant C is a witness over N <= {n_fit}, not a proof")
    logger.debug(f"Expansion analysis: rho(M^-1)={rho_inv:.12g}, expanding={expanding}, monotone={monotone}")
    return ExpansionCertificate(
        is_expanding=expanding,
        spectral_radius_of_inverse=rho_inv,
        norm_monotone=monotone,
        growth_constants=growth,
        norm=norm,
        notes=tuple(notes),
    )


def expanding_orientation(m: SquareMatrix, norm: Norm = Norm.EUCLID) -> Optional[SquareMatrix]:
    """Return M if it is expanding, M^-1 if that is, else None (sums over j in Z are symmetric)."""
    if is_expanding(m, norm).is_expanding:
        return m
    inv = m.inverse()
    if is_expanding(inv, norm).is_expanding:
        return inv
    return None


class PowerTable:
    """
    Cached powers M^j for |j| <= j_abs_max with their norm bounds.

    Powers are built by repeated multiplication; entries that overflow become
    non-finite and their bounds are reported as infinite.
    """

    def __init__(self, m: SquareMatrix, norm: Norm = Norm.EUCLID, j_abs_max: Optional[int] = None):
        m.require_invertible()
        self.matrix = m
        self.norm = norm
        self.j_abs_max = config.j_abs_max if j_abs_max is None else j_abs_max
        self.js = np.arange(-self.j_abs_max, self.j_abs_max + 1)

        d = m.dim
        inv = np.linalg.inv(m.entries)
        powers = np.empty((len(self.js), d, d))
        center = self.j_abs_max
        powers[center] = np.eye(d)
        with np.errstate(over="ignore", invalid="ignore", under="ignore"):
            for k in range(1, self.j_abs_max + 1):
                powers[center + k] = powers[center + k - 1] @ m.entries
                powers[center - k] = powers[center - k + 1] @ inv
        self.powers = powers

        lam = np.empty(len(self.js))
        mu = np.empty(len(self.js))
        for idx, j in enumerate(self.js):
            if j == 0:
                lam[idx], mu[idx] = 1.0, 1.0
                continue
            lam[idx], mu[idx] = _bounds_of_power(powers[idx], powers[2 * center - idx], norm)
        self.lam = lam
        self.mu = mu

    def power(self, j: int) -> np.ndarray:
        return self.powers[j + self.j_abs_max]

    def bounds(self, j: int) -> PowerBounds:
        idx = j + self.j_abs_max
        return PowerBounds(int(j), float(self.lam[idx]), float(self.mu[idx]))
