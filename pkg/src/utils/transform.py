"""
The partition-preserving integral transform.

    K_g f(x) = int f(t) g(x / ||t||) dt

maps integrable f to a function whose dilation sums equal int f whenever
sum_j g(M^j x) = 1. In one dimension with g the indicator of
S = [-1, -c) u (c, 1] this is the transform K used to build the spline family:

    K f(x) = int_{-|x|/c}^{-|x|} f(t) dt + int_{|x|}^{|x|/c} f(t) dt
"""

from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence, Tuple, Union
import logging
import numpy as np
from scipy.integrate import quad
from src.config.settings import config
from src.utils.errors import InvalidInputError, QuadratureError, RefusalError
from src.utils.fields import Annulus, ScalarField, as_points
from src.utils.matrix import Norm, SquareMatrix
from src.utils.partition import DilationSummer, PartitionSystem, TruncationPolicy

logger = logging.getLogger(__name__)

Integrand = Union[ScalarField, Callable[[float], float]]
KernelCallback = Callable[[float, np.ndarray], float]


@dataclass(frozen=True)
class QuadratureSpec:
    """Adaptive Gauss-Kronrod (QUADPACK) settings; max_depth bounds the number of subdivisions."""

    abs_tol: float = field(default_factory=lambda: config.quad_abs_tol)
    rel_tol: float = field(default_factory=lambda: config.quad_rel_tol)
    max_depth: int = field(default_factory=lambda: config.quad_max_depth)
    method: str = "gauss-kronrod"

    def __post_init__(self):
        if not self.abs_tol > 0:
            raise InvalidInputError(f"Quadrature abs_tol must be > 0, got {self.abs_tol}")
        if self.rel_tol < 0:
            raise InvalidInputError(f"Quadrature rel_tol must be >= 0, got {self.rel_tol}")
        if self.max_depth < 1:
            raise InvalidInputError(f"Quadrature max_depth must be >= 1, got {self.max_depth}")


@dataclass(frozen=True)
class QuadResult:
    value: float
    error: float

    def __add__(self, other: "QuadResult") -> "QuadResult":
        return QuadResult(self.value + other.value, self.error + other.error)

    def scaled(self, factor: float) -> "QuadResult":
        return QuadResult(factor * self.value, abs(factor) * self.error)


ZERO = QuadResult(0.0, 0.0)


def _check_c(c: float) -> None:
    if not (0.0 < c < 1.0):
        raise InvalidInputError(f"Dilation factor c must lie in (0, 1), got {c}")


def chi_s_kernel(c: float) -> ScalarField:
    """The 1-D kernel g = indicator of S = [-1, -c) u (c, 1]."""
    _check_c(c)

    def ev(pts):
        a = np.abs(pts[:, 0])
        return np.where((a > c) & (a <= 1.0), 1.0, 0.0)

    return ScalarField(
        evaluator=ev,
        dim=1,
        support=Annulus(c, 1.0),
        smoothness="discontinuous",
        bound=1.0,
        radial=lambda s: np.where((np.asarray(s) > c) & (np.asarray(s) <= 1.0), 1.0, 0.0),
        breakpoints=(c, 1.0),
        name=f"chi_S(c={c:g})",
    )


@dataclass(frozen=True, eq=False)
class TransformSpec:
    g_kernel: ScalarField
    norm: Norm = Norm.EUCLID
    c: Optional[float] = None
    quadrature: QuadratureSpec = field(default_factory=QuadratureSpec)

    def __post_init__(self):
        if self.c is not None:
            _check_c(self.c)

    @classmethod
    def one_dimensional(cls, c: float, quadrature: Optional[QuadratureSpec] = None) -> "TransformSpec":
        return cls(chi_s_kernel(c), Norm.EUCLID, c, quadrature or QuadratureSpec())

    @property
    def kernel_bounded(self) -> bool:
        return self.g_kernel.bound is not None and np.isfinite(self.g_kernel.bound)


def scalar_function(f: Integrand) -> Callable[[float], float]:
    """Scalar callable t -> f(t) for quadrature, from a 1-D field or a plain function."""
    if isinstance(f, ScalarField):
        if f.dim != 1:
            raise InvalidInputError(f"Expected a 1-D field, got dimension {f.dim}")
        ev = f.evaluator
        return lambda t: float(np.real(ev(np.array([[t]]))[0]))
    return lambda t: float(np.real(np.asarray(f(t))).reshape(-1)[0])


def signed_breakpoints(f: Integrand) -> Tuple[float, ...]:
    """Breakpoints of a 1-D integrand; radial breakpoints are mirrored to both half-lines."""
    if not isinstance(f, ScalarField):
        return ()
    points = set(f.breakpoints)
    if f.is_radial:
        points |= {-b for b in f.breakpoints}
    return tuple(sorted(points))


def integrate(func: Callable[[float], float], a: float, b: float, spec: Optional[QuadratureSpec] = None,
              breakpoints: Iterable[float] = ()) -> QuadResult:
    """
    Adaptive quadrature of func over [a, b], split at the breakpoints inside (a, b).

    Raises:
        QuadratureError: QUADPACK stopped before converging and its error bound
            exceeds the requested tolerance by more than a factor 100
    """
    spec = spec or QuadratureSpec()
    if a == b:
        return ZERO
    sign = 1.0
    if a > b:
        a, b, sign = b, a, -1.0
    cuts = [a] + sorted(p for p in set(breakpoints) if a < p < b) + [b]
    total = ZERO
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        out = quad(func, lo, hi, epsabs=spec.abs_tol, epsrel=spec.rel_tol, limit=spec.max_depth,
                   full_output=1)
        value, error = float(out[0]), float(out[1])
        if len(out) > 3:
            allowed = max(spec.abs_tol, spec.rel_tol * abs(value))
            if error > 100.0 * allowed:
                raise QuadratureError(f"Quadrature on [{lo:.17g}, {hi:.17g}] did not converge: {out[3]}",
                                      value, error)
            logger.debug(f"Quadrature on [{lo:.6g}, {hi:.6g}] flagged by QUADPACK, error {error:.2e} accepted")
        total = total + QuadResult(value, error)
    return total.scaled(sign)


def transform_1d_result(f: Integrand, c: float, gamma: float, quad_spec: Optional[QuadratureSpec] = None,
                        breakpoints: Optional[Sequence[float]] = None) -> QuadResult:
    _check_c(c)
    a = abs(float(gamma))
    if a == 0.0:
        return ZERO
    func = scalar_function(f)
    bps = signed_breakpoints(f) if breakpoints is None else tuple(breakpoints)
    left = integrate(func, -a / c, -a, quad_spec, bps)
    right = integrate(func, a, a / c, quad_spec, bps)
    return left + right


def transform_1d(f: Integrand, c: float, gamma: float, quad_spec: Optional[QuadratureSpec] = None,
                 breakpoints: Optional[Sequence[float]] = None) -> float:
    """
    K f(gamma) for a locally integrable f on R.

    Args:
        f: 1-D field or scalar function
        c: Dilation factor in (0, 1)
        gamma: Evaluation point; K f(0) = 0
        quad_spec: Quadrature settings
        breakpoints: Points where f is not smooth; taken from the field when omitted
    """
    return transform_1d_result(f, c, gamma, quad_spec, breakpoints).value


def transform_even(f: Integrand, c: float, gamma: float, quad_spec: Optional[QuadratureSpec] = None,
                   breakpoints: Optional[Sequence[float]] = None) -> float:
    """K f(gamma) = 2 int_gamma^{gamma/c} f(t) dt for even f and gamma >= 0."""
    _check_c(c)
    gamma = float(gamma)
    if gamma < 0:
        raise InvalidInputError(f"transform_even needs gamma >= 0, got {gamma}")
    if gamma == 0.0:
        return 0.0
    bps = signed_breakpoints(f) if breakpoints is None else tuple(breakpoints)
    return 2.0 * integrate(scalar_function(f), gamma, gamma / c, quad_spec, bps).value


def transform_grid(f: Integrand, c: float, gammas, quad_spec: Optional[QuadratureSpec] = None,
                   breakpoints: Optional[Sequence[float]] = None) -> Tuple[np.ndarray, np.ndarray]:
    """(values, quadrature error bounds) of K f over a 1-D grid."""
    results = [transform_1d_result(f, c, g, quad_spec, breakpoints) for g in np.ravel(gammas)]
    return np.array([r.value for r in results]), np.array([r.error for r in results])


def transform_derivative_1d(f: Integrand, c: float, gamma: float) -> float:
    """
    Closed-form derivative of K f, valid where f is continuous at the four points involved:

        (K f)'(x) = f(x/c)/c - f(x) - f(-x) + f(-x/c)/c     for x > 0

    K f is even, so the derivative is odd.
    """
    _check_c(c)
    gamma = float(gamma)
    if gamma == 0.0:
        return 0.0
    func = scalar_function(f)
    x = abs(gamma)
    value = func(x / c) / c - func(x) - func(-x) + func(-x / c) / c
    return value if gamma > 0 else -value


def field_integral(f: ScalarField, quad_spec: Optional[QuadratureSpec] = None) -> float:
    """int f over R^d; 1-D fields directly, radial fields in d >= 2 through their profile."""
    if f.dim == 1:
        func = scalar_function(f)
        bps = signed_breakpoints(f)
        if f.support is not None and f.support.is_bounded:
            r = f.support.outer
            return integrate(func, -r, r, quad_spec, bps).value
        return (integrate(func, -np.inf, 0.0, quad_spec) + integrate(func, 0.0, np.inf, quad_spec)).value
    if not f.is_radial:
        raise InvalidInputError("Integrals in d >= 2 are supported for radial fields only")
    profile = f.radial
    d = f.dim
    upper = f.support.outer if f.support is not None and f.support.is_bounded else np.inf
    value = integrate(lambda s: float(profile(np.array([s]))[0]) * s ** (d - 1), 0.0, upper,
                      quad_spec, f.breakpoints).value
    return d * f.norm.unit_ball_volume(d) * value


def transform_dd(f: ScalarField, spec: TransformSpec, gamma, kernel: Optional[KernelCallback] = None) -> float:
    """
    K_g f(gamma) = int f(t) g(gamma / ||t||) dt.

    In d >= 2 the integrand must be radial; the integral is then reduced to one
    dimension with int F(||t||) dt = d |B_1| int_0^inf F(s) s^{d-1} ds. A kernel
    callback (s, gamma) -> value replaces g(gamma / s) and carries no partition
    guarantee.

    Raises:
        RefusalError: the kernel is unbounded and f has no bounded support
    """
    x = as_points(gamma, f.dim)[0]
    compact = f.support is not None and f.support.is_bounded
    if kernel is None and not spec.kernel_bounded and not compact:
        raise RefusalError("Unbounded kernel with an f of non-compact support: the transform integral "
                           "is not guaranteed to exist")
    g = spec.g_kernel
    if kernel is None and g.dim != f.dim:
        raise InvalidInputError(f"Kernel dimension {g.dim} does not match field dimension {f.dim}")
    g_ev = g.evaluator

    def weight(s: float) -> float:
        if kernel is not None:
            return float(np.real(kernel(s, x)))
        with np.errstate(divide="ignore", invalid="ignore"):
            return float(np.real(g_ev((x / s)[None, :])[0]))

    # kernel breakpoints b at gamma / ||t|| correspond to ||t|| = ||gamma|| / b
    radius = float(spec.norm.of(x[None, :])[0])
    kernel_radii = [b for b in tuple(g.breakpoints) + (() if g.support is None else (g.support.inner, g.support.outer))
                    if b > 0 and np.isfinite(b)]
    s_breaks = [radius / b for b in kernel_radii if radius > 0]
    upper = f.support.outer if compact else np.inf
    quad_spec = spec.quadrature

    if f.dim == 1:
        func = scalar_function(f)
        bps = set(signed_breakpoints(f)) | set(s_breaks) | {-s for s in s_breaks}
        pos = integrate(lambda t: func(t) * weight(t), 0.0, upper, quad_spec, bps)
        neg = integrate(lambda t: func(-t) * weight(t), 0.0, upper, quad_spec, bps)
        return (pos + neg).value

    if not f.is_radial:
        raise InvalidInputError("transform_dd supports radial integrands only in d >= 2")
    profile = f.radial
    d = f.dim
    bps = set(f.breakpoints) | set(s_breaks)
    value = integrate(lambda s: float(profile(np.array([s]))[0]) * weight(s) * s ** (d - 1), 0.0, upper,
                      quad_spec, bps).value
    return d * f.norm.unit_ball_volume(d) * value


def transformed_support(f: ScalarField, spec: TransformSpec) -> Optional[Annulus]:
    """a(R3 R1, R4 R2) when f lives in a(R1, R2) and the kernel in a(R3, R4), both bounded."""
    fs, gs = f.support, spec.g_kernel.support
    if fs is None or gs is None or not (fs.is_bounded and gs.is_bounded) or fs.norm is not gs.norm:
        return None
    return Annulus(gs.inner * fs.inner, gs.outer * fs.outer, fs.norm)


def lift_radial(f: Integrand, c: float, norm: Norm = Norm.EUCLID, d: int = 1,
                quad_spec: Optional[QuadratureSpec] = None, target: Optional[float] = None) -> ScalarField:
    """
    The radial lifting gamma -> K f(||gamma||) on R^d.

    Its dilation sums under c I equal int f, which is recorded as target_constant.
    """
    _check_c(c)
    bps = signed_breakpoints(f)
    support = None
    if isinstance(f, ScalarField) and f.support is not None and f.support.is_bounded:
        support = Annulus(c * f.support.inner, f.support.outer, norm)
    if target is None:
        if not isinstance(f, ScalarField):
            raise InvalidInputError("lift_radial needs a ScalarField or an explicit target constant")
        target = field_integral(f, quad_spec)

    def profile(s):
        s = np.atleast_1d(np.asarray(s, dtype=float))
        return np.array([transform_1d(f, c, v, quad_spec, bps) for v in s])

    name = f.name if isinstance(f, ScalarField) else getattr(f, "__name__", "f")
    return ScalarField(
        evaluator=lambda pts: profile(norm.of(pts)),
        dim=d,
        support=support,
        smoothness="continuous",
        norm=norm,
        radial=profile,
        breakpoints=tuple(sorted({abs(b) for b in bps} | {abs(b) * c for b in bps})),
        name=f"K[{name}]~{d}d",
        metadata={"target_constant": float(target), "c": c},
    )


def lifted_partition(f: Integrand, c: float, norm: Norm = Norm.EUCLID, d: int = 1,
                     quad_spec: Optional[QuadratureSpec] = None, target: Optional[float] = None,
                     policy: Optional[TruncationPolicy] = None) -> PartitionSystem:
    """Partition system (K f(||.||), c I) whose dilation sums should equal int f."""
    lifted = lift_radial(f, c, norm, d, quad_spec, target)
    return PartitionSystem(
        g=lifted,
        M=SquareMatrix.scalar(c, d),
        truncation=policy or TruncationPolicy(),
        target_constant=lifted.metadata["target_constant"],
        norm=norm,
        metadata={"source": "radial lifting"},
    )


def kernel_abs_sum_bound(g: ScalarField, M: SquareMatrix, samples,
                         policy: Optional[TruncationPolicy] = None) -> float:
    """Grid estimate of sup_x sum_j |g(M^j x)|; the transform needs this to be finite."""
    pts = as_points(samples, M.dim)
    pts = pts[g.norm.of(pts) > 0]
    if len(pts) == 0:
        raise InvalidInputError("kernel_abs_sum_bound needs at least one nonzero sample")
    result = DilationSummer(M, policy).sum(g.absolute(), pts)
    bound = float(np.max(np.real(result.values)))
    logger.info(f"Kernel absolute dilation sum: grid estimate {bound:.6g} over {len(pts)} samples")
    return bound
