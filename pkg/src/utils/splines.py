"""
The geometric-knot spline family h_n.

h_1 is the indicator of S = [-1, -c) u (c, 1] and h_n = K h_{n-1}. Each h_n is an
even piecewise polynomial with knots +-c^n, ..., +-c, +-1, supported on
[-1, -c^n] u [c^n, 1] and of class C^{n-2}. The pieces are built from the
recursion

    h_n(x) = 2/(n-1) [(1 - |x|) h_{n-1}(x) + (|x|/c - c^{n-1}) h_{n-1}(x/c)]

with exact polynomial arithmetic. Piece k lives on I_k = [c^{k+1}, c^k] and is a
numpy Polynomial whose domain is I_k, so x -> x/c maps piece k onto piece k-1
without touching the coefficients.
"""

from bisect import bisect_left
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, List, Optional, Tuple
import logging
import numpy as np
from numpy.polynomial import Polynomial
from src.config.settings import config
from src.utils.errors import InvalidInputError, RangeError
from src.utils.fields import Annulus, ScalarField, radial_field
from src.utils.matrix import Norm, SquareMatrix
from src.utils.partition import PartitionSystem, TruncationPolicy
from src.utils.reports import VerificationReport, build_report
from src.utils.transform import QuadratureSpec, transform_1d_result

logger = logging.getLogger(__name__)

_WINDOW = np.array([-1.0, 1.0])


def _validate(n: int, c: float) -> None:
    if int(n) != n or n < 1:
        raise InvalidInputError(f"Spline order n must be an integer >= 1, got {n}")
    if n > config.spline_n_max:
        raise RangeError(f"Spline order n = {n} exceeds N_max = {config.spline_n_max}")
    if not (1e-9 < c < 1.0 - 1e-9):
        raise InvalidInputError(f"Knot ratio c must lie in (0, 1) away from the endpoints, got {c}")


def geometric_knots(n: int, c: float) -> Tuple[float, ...]:
    """(1, c, c^2, ..., c^n) by repeated multiplication."""
    knots = [1.0]
    for _ in range(n):
        knots.append(knots[-1] * c)
    return tuple(knots)


@dataclass(frozen=True, eq=False)
class PiecewiseEvenSpline:
    n: int
    c: float
    knots: Tuple[float, ...]
    pieces: Tuple[Polynomial, ...]

    def __post_init__(self):
        if len(self.pieces) != self.n or len(self.knots) != self.n + 1:
            raise InvalidInputError(f"h_{self.n} needs {self.n} pieces and {self.n + 1} knots")
        object.__setattr__(self, "_ascending", tuple(reversed(self.knots)))

    @property
    def name(self) -> str:
        return f"h_{self.n}(c={self.c:g})"

    @property
    def support(self) -> Annulus:
        return Annulus(self.knots[-1], self.knots[0])

    @property
    def signed_knots(self) -> Tuple[float, ...]:
        return tuple(sorted({-k for k in self.knots} | set(self.knots)))

    def _piece_index(self, a: np.ndarray) -> np.ndarray:
        # piece k covers (c^{k+1}, c^k]; -1 marks points outside the support
        pos = np.searchsorted(np.asarray(self._ascending), a, side="left")
        k = self.n - pos
        return np.where((a > self._ascending[0]) & (a <= 1.0), k, -1)

    def eval(self, gamma) -> np.ndarray:
        return self.eval_deriv(gamma, 0)

    def eval_deriv(self, gamma, order: int = 0) -> np.ndarray:
        """
        Derivative of the given order at gamma (order 0 is the value).

        Values at knots come from the piece on the left of the half-open interval
        (c^{k+1}, c^k]; for n >= 2 adjacent pieces agree there up to order n-2.
        """
        if order < 0 or order > max(self.n - 1, 0):
            raise InvalidInputError(f"Derivative order must lie in [0, {self.n - 1}] for h_{self.n}, got {order}")
        x = np.asarray(gamma, dtype=float)
        a = np.abs(x)
        idx = self._piece_index(a)
        out = np.zeros_like(a)
        for k, piece in enumerate(self.pieces):
            mask = idx == k
            if np.any(mask):
                out[mask] = (piece.deriv(order) if order else piece)(a[mask])
        if order % 2:
            out = np.where(x < 0, -out, out)
        return out

    def __call__(self, gamma) -> np.ndarray:
        return self.eval(gamma)

    def scalar(self, t: float) -> float:
        """Fast scalar evaluation, used as a quadrature integrand."""
        a = abs(t)
        if a <= self._ascending[0] or a > 1.0:
            return 0.0
        k = self.n - bisect_left(self._ascending, a)
        return float(self.pieces[k](a))

    def integral(self) -> float:
        """Q_n = int h_n, from exact antiderivatives of the pieces, doubled for evenness."""
        total = 0.0
        for k, piece in enumerate(self.pieces):
            anti = piece.integ()
            total += anti(self.knots[k]) - anti(self.knots[k + 1])
        return 2.0 * float(total)

    def monomial_pieces(self) -> List[Tuple[float, float, np.ndarray]]:
        """(a, b, ascending monomial coefficients) per interval, left to right."""
        rows = []
        for k in range(self.n - 1, -1, -1):
            coef = self.pieces[k].convert(domain=_WINDOW, window=_WINDOW).coef
            rows.append((self.knots[k + 1], self.knots[k], coef))
        return rows

    def dump_pieces(self) -> str:
        lines = []
        for a, b, coef in self.monomial_pieces():
            lines.append(f"[{a:.17g},{b:.17g}] : " + " ".join(f"{v:.17g}" for v in coef))
        return "\n".join(lines)


def _interval(k: int, knots: Tuple[float, ...]) -> np.ndarray:
    return np.array([knots[k + 1], knots[k]])


def _indicator(c: float, knots: Tuple[float, ...]) -> PiecewiseEvenSpline:
    return PiecewiseEvenSpline(1, c, knots[:2], (Polynomial([1.0], domain=_interval(0, knots), window=_WINDOW),))


def _next_order(prev: PiecewiseEvenSpline, knots: Tuple[float, ...]) -> PiecewiseEvenSpline:
    n = prev.n + 1
    c = prev.c
    shift = knots[n - 1]
    pieces = []
    for k in range(n):
        dom = _interval(k, knots)
        x = Polynomial.identity(domain=dom, window=_WINDOW)
        term = Polynomial([0.0], domain=dom, window=_WINDOW)
        if k < prev.n:
            term = term + (1.0 - x) * Polynomial(prev.pieces[k].coef, domain=dom, window=_WINDOW)
        if k >= 1:
            # h_{n-1}(x/c) on I_k is piece k-1 read through the same local variable
            term = term + (x / c - shift) * Polynomial(prev.pieces[k - 1].coef, domain=dom, window=_WINDOW)
        pieces.append(term * (2.0 / (n - 1)))
    return PiecewiseEvenSpline(n, c, knots[: n + 1], tuple(pieces))


@lru_cache(maxsize=128)
def spline_family(n: int, c: float) -> Tuple[PiecewiseEvenSpline, ...]:
    """(h_1, ..., h_n) for the knot ratio c."""
    _validate(n, c)
    knots = geometric_knots(n, c)
    family = [_indicator(c, knots)]
    for _ in range(n - 1):
        family.append(_next_order(family[-1], knots))
    logger.debug(f"Built spline family up to h_{n} for c={c:.17g}")
    return tuple(family)


def build_spline(n: int, c: float) -> PiecewiseEvenSpline:
    """
    Build h_n for knot ratio c.

    Raises:
        InvalidInputError: n < 1 or c outside (0, 1)
        RangeError: n above the configured N_max
    """
    return spline_family(int(n), float(c))[-1]


@dataclass(frozen=True)
class SplineIntegrals:
    c: float
    Q: Tuple[float, ...]

    def __post_init__(self):
        if any(q <= 0 for q in self.Q):
            raise InvalidInputError(f"Spline integrals must be positive, got {self.Q}")

    def q(self, n: int) -> float:
        """Q_n, with the convention Q_0 = 1."""
        return 1.0 if n == 0 else self.Q[n - 1]


def spline_integrals(n: int, c: float) -> SplineIntegrals:
    return SplineIntegrals(c, tuple(s.integral() for s in spline_family(int(n), float(c))))


@dataclass(frozen=True)
class KnotJump:
    knot: float
    order: int
    left: float
    right: float

    @property
    def jump(self) -> float:
        return self.right - self.left


def derivative_jumps(spline: PiecewiseEvenSpline) -> List[KnotJump]:
    """
    Jump of every derivative order 0..n-1 at every positive knot, right limit minus left.

    Outside the support the spline is identically zero, so at c^n and 1 the
    missing side contributes 0.
    """
    jumps = []
    n = spline.n
    for order in range(n):
        derivs = [p.deriv(order) if order else p for p in spline.pieces]
        for i, knot in enumerate(spline.knots):
            # knot c^i: piece i-1 lies to the right, piece i to the left
            right = float(derivs[i - 1](knot)) if i >= 1 else 0.0
            left = float(derivs[i](knot)) if i < n else 0.0
            jumps.append(KnotJump(knot, order, left, right))
    return jumps


def smoothness_report(spline: PiecewiseEvenSpline, rel_tol: float = 1e-9) -> VerificationReport:
    """
    Relative derivative mismatch at the knots up to order n-2, plus the order n-1 sharpness witness.

    Each order is scaled by the largest one-sided derivative value of that order
    over all knots.
    """
    jumps = derivative_jumps(spline)
    scale: Dict[int, float] = {}
    for j in jumps:
        scale[j.order] = max(scale.get(j.order, 0.0), abs(j.left), abs(j.right))
    checked = [j for j in jumps if j.order <= spline.n - 2]
    rel = np.array([abs(j.jump) / scale[j.order] if scale[j.order] > 0 else 0.0 for j in checked])
    points = np.array([[j.knot] for j in checked]) if checked else np.zeros((0, 1))
    top = [j for j in jumps if j.order == spline.n - 1]
    top_scale = scale.get(spline.n - 1, 0.0)
    sharp = any(abs(j.jump) > 1e-6 * top_scale for j in top) if top_scale > 0 else False
    return build_report(
        f"smoothness_h{spline.n}",
        points,
        rel,
        rel_tol,
        route_notes=["coefficient arithmetic, relative to the largest derivative value per order"],
        extras={"class": f"C^{spline.n - 2}" if spline.n >= 2 else "discontinuous",
                "sharp_at_order_n_minus_1": str(sharp).lower()},
    )


def transform_consistency_check(n: int, c: float, quad_spec: Optional[QuadratureSpec] = None,
                                n_points: int = 1000, tol: float = 1e-10) -> VerificationReport:
    """Compare h_n from the recursion with K h_{n-1} computed by quadrature on a grid over [-1.25, 1.25]."""
    if n < 2:
        raise InvalidInputError(f"transform_consistency_check needs n >= 2, got {n}")
    family = spline_family(int(n), float(c))
    prev, target = family[-2], family[-1]
    grid = np.linspace(-1.25, 1.25, n_points)
    values = np.empty(n_points)
    errors = np.empty(n_points)
    for i, g in enumerate(grid):
        res = transform_1d_result(prev.scalar, c, g, quad_spec, prev.signed_knots)
        values[i], errors[i] = res.value, res.error
    exact = target.eval(grid)
    deviation = np.abs(values - exact)
    return build_report(
        f"recursion_vs_transform_h{n}",
        grid.reshape(-1, 1),
        deviation,
        tol,
        route_notes=["adaptive quadrature split at the knots of h_{n-1}"],
        extras={"c": float(c), "max_quad_error": float(np.max(errors))},
        columns={"gamma": grid, "recursion": exact, "transform": values, "quad_error": errors},
    )


def spline_field(spline: PiecewiseEvenSpline, name: Optional[str] = None) -> ScalarField:
    """h_n as a 1-D field with its support, knots and smoothness class."""
    return ScalarField(
        evaluator=lambda pts: spline.eval(pts[:, 0]),
        dim=1,
        support=spline.support,
        smoothness=f"C^{spline.n - 2}" if spline.n >= 2 else "discontinuous",
        norm=Norm.EUCLID,
        radial=spline.eval,
        breakpoints=spline.knots,
        name=name or spline.name,
        metadata={"spline": spline},
    )


def lift_spline(spline: PiecewiseEvenSpline, norm: Norm = Norm.EUCLID, d: int = 1) -> ScalarField:
    """The radial spline x -> h_n(||x||) on R^d; its dilation sums under c I equal Q_{n-1}."""
    integrals = spline_integrals(spline.n, spline.c)
    return radial_field(
        spline.eval,
        d,
        norm,
        support=Annulus(spline.knots[-1], 1.0, norm),
        smoothness=f"C^{spline.n - 2}" if spline.n >= 2 else "discontinuous",
        breakpoints=spline.knots,
        name=f"{spline.name}~{d}d",
        metadata={"spline": spline, "target_constant": integrals.q(spline.n - 1)},
    )


def normalized_partition(n: int, c: float, d: int = 1, norm: Norm = Norm.EUCLID,
                         policy: Optional[TruncationPolicy] = None) -> PartitionSystem:
    """
    g = h_n(||x||) / Q_{n-1} with M = c I, so that sum_j g(c^j x) = 1.

    For n = 1 the normalizer is Q_0 = 1: S is one fundamental band of dilation by c.
    """
    spline = build_spline(n, c)
    q_prev = spline_integrals(n, c).q(n - 1)
    base = spline_field(spline) if d == 1 else lift_spline(spline, norm, d)
    g = base.scaled(1.0 / q_prev, name=f"{spline.name}/Q_{n - 1}")
    logger.info(f"Normalized partition h_{n}/Q_{n - 1} with c={c:g}, Q_{n - 1}={q_prev:.17g}, d={d}")
    return PartitionSystem(
        g=g,
        M=SquareMatrix.scalar(c, d),
        truncation=policy or TruncationPolicy(),
        target_constant=1.0,
        norm=norm,
        metadata={"spline": spline, "normalizer": q_prev, "nonnegative": True},
    )
