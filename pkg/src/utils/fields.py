"""
Scalar fields on R^d with support metadata, and the radial profiles used to build them.

A ScalarField evaluates on (N, d) arrays of points and returns N values. Fields
that only depend on the norm of their argument also carry their radial profile,
which the integral transforms and the lifting constructions use directly.
"""

from dataclasses import dataclass, field, replace
from typing import Callable, Dict, Optional, Tuple
import logging
import numpy as np
from scipy.integrate import quad
from src.config.settings import config
from src.utils.errors import InvalidInputError
from src.utils.matrix import Norm

logger = logging.getLogger(__name__)

Evaluator = Callable[[np.ndarray], np.ndarray]


def as_points(points, dim: int) -> np.ndarray:
    """Coerce scalars, 1-D and 2-D inputs to an (N, dim) float array."""
    arr = np.asarray(points, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(-1, 1) if dim == 1 else arr.reshape(1, -1)
    if arr.ndim != 2 or arr.shape[1] != dim:
        raise InvalidInputError(f"Expected points of dimension {dim}, got shape {np.shape(points)}")
    return arr


@dataclass(frozen=True)
class Annulus:
    """The closed set {inner <= ||x|| <= outer}; inner = 0 is a ball, outer = inf is unbounded."""

    inner: float = 0.0
    outer: float = float("inf")
    norm: Norm = Norm.EUCLID

    def __post_init__(self):
        if not (0.0 <= self.inner <= self.outer):
            raise InvalidInputError(f"Invalid annulus radii ({self.inner}, {self.outer})")

    @property
    def is_bounded(self) -> bool:
        return np.isfinite(self.outer)

    @property
    def is_annular(self) -> bool:
        return self.inner > 0.0 and self.is_bounded

    def contains(self, points: np.ndarray) -> np.ndarray:
        r = self.norm.of(points)
        return (r >= self.inner) & (r <= self.outer)

    def intersect(self, other: "Annulus") -> "Annulus":
        if other.norm is not self.norm:
            raise InvalidInputError("Cannot intersect supports declared in different norms")
        inner = max(self.inner, other.inner)
        outer = min(self.outer, other.outer)
        if inner > outer:
            return Annulus(0.0, 0.0, self.norm)
        return Annulus(inner, outer, self.norm)

    def describe(self) -> str:
        return f"a({self.inner:.17g}, {self.outer:.17g}; {self.norm.value})"


@dataclass(frozen=True, eq=False)
class ScalarField:
    evaluator: Evaluator
    dim: int
    support: Optional[Annulus] = None
    smoothness: str = "unknown"
    bound: Optional[float] = None
    is_complex: bool = False
    norm: Norm = Norm.EUCLID
    radial: Optional[Callable[[np.ndarray], np.ndarray]] = None
    breakpoints: Tuple[float, ...] = ()
    plateau: Optional[float] = None
    name: str = "field"
    metadata: Dict[str, object] = field(default_factory=dict)
    check_support: bool = True

    def __post_init__(self):
        if self.dim < 1:
            raise InvalidInputError(f"Field dimension must be >= 1, got {self.dim}")
        if self.support is not None and self.check_support:
            self._spot_check_support()

    def __call__(self, points) -> np.ndarray:
        pts = as_points(points, self.dim)
        values = np.asarray(self.evaluator(pts))
        if values.shape != (pts.shape[0],):
            values = np.broadcast_to(values, (pts.shape[0],)).copy()
        return values

    def _spot_check_support(self, n_points: int = 64) -> None:
        """Evaluate on sampled points outside the declared support; every value must vanish."""
        rng = np.random.default_rng(config.grid_seed)
        directions = rng.standard_normal((n_points, self.dim))
        directions /= self.support.norm.of(directions)[:, None]
        radii = []
        if self.support.is_bounded:
            radii.append(self.support.outer * rng.uniform(1.0 + 1e-6, 4.0, n_points))
        if self.support.inner > 0.0:
            radii.append(self.support.inner * rng.uniform(0.25, 1.0 - 1e-6, n_points))
        for r in radii:
            values = np.asarray(self.evaluator(directions * r[:, None]))
            if np.any(values != 0):
                worst = float(np.max(np.abs(values)))
                raise InvalidInputError(
                    f"Field '{self.name}' is nonzero ({worst:.3e}) outside its declared support "
                    f"{self.support.describe()}"
                )

    @property
    def is_radial(self) -> bool:
        return self.radial is not None

    def scaled(self, factor: float, name: Optional[str] = None) -> "ScalarField":
        ev = self.evaluator
        radial = self.radial
        return replace(
            self,
            evaluator=lambda pts: factor * ev(pts),
            radial=None if radial is None else (lambda s: factor * radial(s)),
            bound=None if self.bound is None else abs(factor) * self.bound,
            plateau=None,
            name=name or f"{factor:.6g}*{self.name}",
            metadata={},
            check_support=False,
        )

    def product(self, other: "ScalarField", conjugate_self: bool = False,
                name: Optional[str] = None) -> "ScalarField":
        """Pointwise product, optionally conj(self) * other; support is the intersection."""
        if other.dim != self.dim:
            raise InvalidInputError(f"Dimension mismatch: {self.dim} vs {other.dim}")
        left, right = self.evaluator, other.evaluator
        if conjugate_self:
            ev = lambda pts: np.conj(left(pts)) * right(pts)
        else:
            ev = lambda pts: left(pts) * right(pts)
        support = _intersect_supports(self.support, other.support)
        bound = None
        if self.bound is not None and other.bound is not None:
            bound = self.bound * other.bound
        return ScalarField(
            evaluator=ev,
            dim=self.dim,
            support=support,
            bound=bound,
            is_complex=self.is_complex or other.is_complex,
            norm=self.norm,
            breakpoints=tuple(sorted(set(self.breakpoints) | set(other.breakpoints))),
            name=name or f"{self.name}*{other.name}",
            check_support=False,
        )

    def abs_square(self) -> "ScalarField":
        ev = self.evaluator
        return ScalarField(
            evaluator=lambda pts: np.abs(ev(pts)) ** 2,
            dim=self.dim,
            support=self.support,
            bound=None if self.bound is None else self.bound ** 2,
            norm=self.norm,
            breakpoints=self.breakpoints,
            name=f"|{self.name}|^2",
            check_support=False,
        )

    def absolute(self) -> "ScalarField":
        ev = self.evaluator
        return ScalarField(
            evaluator=lambda pts: np.abs(ev(pts)),
            dim=self.dim,
            support=self.support,
            bound=self.bound,
            norm=self.norm,
            breakpoints=self.breakpoints,
            name=f"|{self.name}|",
            check_support=False,
        )


def _intersect_supports(a: Optional[Annulus], b: Optional[Annulus]) -> Optional[Annulus]:
    if a is None:
        return b
    if b is None:
        return a
    return a.intersect(b)


def zero_field(dim: int = 1, norm: Norm = Norm.EUCLID) -> ScalarField:
    return ScalarField(
        evaluator=lambda pts: np.zeros(pts.shape[0]),
        dim=dim,
        smoothness="C^inf",
        bound=0.0,
        norm=norm,
        radial=lambda s: np.zeros_like(np.asarray(s, dtype=float)),
        name="zero",
    )


def radial_field(profile: Callable[[np.ndarray], np.ndarray], dim: int, norm: Norm = Norm.EUCLID,
                 **kwargs) -> ScalarField:
    """Lift a profile on [0, inf) to the radial field x -> profile(||x||)."""
    return ScalarField(
        evaluator=lambda pts: profile(norm.of(pts)),
        dim=dim,
        norm=norm,
        radial=profile,
        **kwargs,
    )


@dataclass(frozen=True, eq=False)
class RadialProfile:
    """
    A profile r on [0, inf) with r(0) = 1, r = 1 on [0, R1] and r = 0 on [R, inf).

    Profiles are validated by sampling when constructed: the plateau, the support,
    monotonicity (when declared) and continuity at the declared breakpoints.
    """

    r: Callable[[np.ndarray], np.ndarray]
    R: float = float("inf")
    R1: float = 0.0
    monotone_decreasing: bool = True
    continuous: bool = True
    breakpoints: Tuple[float, ...] = ()
    name: str = "profile"
    smoothness: str = "C^0"

    def __post_init__(self):
        if not (0.0 <= self.R1 <= self.R):
            raise InvalidInputError(f"Profile '{self.name}' needs 0 <= R1 <= R, got R1={self.R1}, R={self.R}")
        if abs(float(self(0.0)[0]) - 1.0) > 1e-12:
            raise InvalidInputError(f"Profile '{self.name}' must satisfy r(0) = 1")
        span = self.R * 1.5 if np.isfinite(self.R) else max(8.0, 4.0 * self.R1)
        s = np.linspace(0.0, span, 4097)
        values = self(s)
        if not np.all(np.isfinite(values)):
            raise InvalidInputError(f"Profile '{self.name}' returned non-finite values")
        if self.R1 > 0 and np.any(np.abs(values[s <= self.R1] - 1.0) > 1e-12):
            raise InvalidInputError(f"Profile '{self.name}' is not 1 on its plateau [0, {self.R1}]")
        if np.isfinite(self.R) and np.any(values[s > self.R] != 0):
            raise InvalidInputError(f"Profile '{self.name}' is nonzero beyond its support radius {self.R}")
        if self.monotone_decreasing and np.any(np.diff(values) > 1e-14):
            raise InvalidInputError(f"Profile '{self.name}' is declared decreasing but increases on samples")
        if self.continuous:
            probes = np.concatenate([np.asarray(self.breakpoints, dtype=float), s[1:-1:16]])
            eps = 1e-9 * max(1.0, span)
            jumps = np.abs(self(probes + eps) - self(np.maximum(probes - eps, 0.0)))
            if np.any(jumps > 1e-6):
                raise InvalidInputError(f"Profile '{self.name}' is declared continuous but jumps on samples")

    def __call__(self, s) -> np.ndarray:
        return np.asarray(self.r(np.atleast_1d(np.asarray(s, dtype=float))), dtype=float)

    @property
    def has_plateau(self) -> bool:
        return self.R1 > 0.0

    def field(self, dim: int, norm: Norm = Norm.EUCLID) -> ScalarField:
        """The radial field phi(x) = r(||x||)."""
        support = Annulus(0.0, self.R, norm) if np.isfinite(self.R) else None
        return radial_field(
            self.__call__,
            dim,
            norm,
            support=support,
            smoothness=self.smoothness,
            bound=1.0 if self.monotone_decreasing else None,
            breakpoints=self.breakpoints,
            plateau=self.R1 if self.R1 > 0 else None,
            name=f"phi[{self.name}]",
            check_support=False,
        )

    def even_function(self) -> ScalarField:
        """The 1-D even function t -> r(|t|), used as a transform input."""
        return radial_field(
            self.__call__,
            1,
            Norm.EUCLID,
            support=Annulus(0.0, self.R, Norm.EUCLID) if np.isfinite(self.R) else None,
            smoothness=self.smoothness,
            bound=1.0 if self.monotone_decreasing else None,
            breakpoints=self.breakpoints,
            name=self.name,
            check_support=False,
        )


def gaussian() -> RadialProfile:
    return RadialProfile(r=lambda s: np.exp(-s ** 2), name="gaussian", smoothness="C^inf")


def exp_abs() -> RadialProfile:
    return RadialProfile(r=lambda s: np.exp(-np.abs(s)), name="exp-abs", smoothness="C^inf")


def plateau_linear(R1: float, R: float) -> RadialProfile:
    if not (0.0 < R1 < R):
        raise InvalidInputError(f"plateau-linear needs 0 < R1 < R, got R1={R1}, R={R}")

    def r(s):
        return np.clip((R - s) / (R - R1), 0.0, 1.0)

    return RadialProfile(r=r, R=R, R1=R1, breakpoints=(R1, R), name=f"plateau-linear({R1:.17g},{R:.17g})")


def step(R: float) -> RadialProfile:
    if R <= 0:
        raise InvalidInputError(f"step profile needs R > 0, got {R}")

    def r(s):
        return np.where(s <= R, 1.0, 0.0)

    return RadialProfile(r=r, R=R, R1=R, continuous=False, breakpoints=(R,), name=f"step({R:.17g})",
                         smoothness="discontinuous")


def kernel_integral_profile(k: Callable[[float], float], support: float = float("inf"),
                            name: str = "kernel-integral") -> RadialProfile:
    """
    phi(s) = int_s^inf k(t) dt for an even, continuous, nonnegative k with int_0^inf k = 1.

    The resulting g(s) = int_s^{a s} k(t) dt is a C^1 partition of unity under
    dilation by any a > 1.
    """
    total, err = quad(k, 0.0, support)
    if abs(total - 1.0) > 1e-8:
        raise InvalidInputError(f"Kernel must integrate to 1 over [0, inf), got {total:.12g} (err {err:.1e})")

    def tail(s: float) -> float:
        if s >= support:
            return 0.0
        value, _ = quad(k, s, support)
        return value

    vec = np.vectorize(tail, otypes=[float])

    def r(s):
        return np.clip(vec(s), 0.0, 1.0)

    return RadialProfile(r=r, R=support, name=name, smoothness="C^1")


def raised_cosine_kernel(width: float) -> Callable[[float], float]:
    """k(t) = (1 + cos(pi t / w)) / w on |t| <= w, normalized so that int_0^inf k = 1."""

    def k(t):
        t = abs(t)
        return (1.0 + np.cos(np.pi * t / width)) / width if t <= width else 0.0

    return k
