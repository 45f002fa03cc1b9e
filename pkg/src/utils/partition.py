"""
Scaling partitions of unity: sum_j g(M^j x) = const for x != 0.

The central piece is DilationSummer, which turns the sum over j in Z into a
finite sum. When g is supported on an annulus the nonzero terms at x are exactly
those j with mu_j ||x|| >= r_lo and lambda_j ||x|| <= r_hi, so the sum is exact.
Otherwise every term up to the index cap is accumulated and the outermost terms
must be negligible; the result is labelled heuristic.
"""

from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, Optional, Tuple
import logging
import numpy as np
from tqdm import tqdm
from src.config.settings import config
from src.utils.errors import InvalidInputError, RefusalError, VerificationError
from src.utils.fields import Annulus, RadialProfile, ScalarField, as_points
from src.utils.matrix import (ExpansionCertificate, Norm, PowerTable, SquareMatrix, is_expanding,
                              singular_interval)
from src.utils.reports import VerificationReport, build_report

logger = logging.getLogger(__name__)

ROUTE_EXACT = 0
ROUTE_HEURISTIC = 1
ROUTE_CAPPED = 2
ROUTE_NAMES = {ROUTE_EXACT: "exact", ROUTE_HEURISTIC: "heuristic", ROUTE_CAPPED: "capped"}

# consecutive negligible terms required before a heuristic tail is closed
_HEURISTIC_RUN = 3


@dataclass(frozen=True)
class TruncationPolicy:
    tail_tol: float = field(default_factory=lambda: config.tail_tol)
    j_abs_max: int = field(default_factory=lambda: config.j_abs_max)

    def __post_init__(self):
        if not self.tail_tol > 0:
            raise InvalidInputError(f"tail_tol must be > 0, got {self.tail_tol}")
        if self.j_abs_max < 1:
            raise InvalidInputError(f"j_abs_max must be >= 1, got {self.j_abs_max}")


@dataclass
class SumResult:
    """Per-point dilation sums with their tail certificates."""

    values: np.ndarray
    n_terms: np.ndarray
    route: np.ndarray

    @property
    def any_capped(self) -> bool:
        return bool(np.any(self.route == ROUTE_CAPPED))

    def route_counts(self) -> Dict[str, int]:
        return {name: int(np.sum(self.route == code)) for code, name in ROUTE_NAMES.items()}


class DilationSummer:
    """Evaluates sum_j f(M^j x) over a j-range, using the finite exact sum whenever f has annular support."""

    def __init__(self, dilation: SquareMatrix, policy: Optional[TruncationPolicy] = None):
        dilation.require_invertible()
        self.dilation = dilation
        self.policy = policy or TruncationPolicy()
        self._tables: Dict[Norm, PowerTable] = {}

    def table(self, norm: Norm) -> PowerTable:
        if norm not in self._tables:
            self._tables[norm] = PowerTable(self.dilation, norm, self.policy.j_abs_max)
        return self._tables[norm]

    def sum(self, f: ScalarField, points, j_min: Optional[int] = None, j_max: Optional[int] = None,
            progress: bool = False) -> SumResult:
        """
        Sum f(M^j x) over j_min <= j <= j_max (defaults: the whole of Z up to the cap).

        Args:
            f: Field to dilate
            points: (N, d) evaluation points
            j_min: Lower index bound, None for -infinity
            j_max: Upper index bound, None for +infinity
            progress: Show a tqdm bar over batches
        """
        pts = as_points(points, self.dilation.dim)
        if f.dim != self.dilation.dim:
            raise InvalidInputError(f"Field dimension {f.dim} does not match matrix dimension {self.dilation.dim}")
        dtype = complex if f.is_complex else float
        values = np.zeros(len(pts), dtype=dtype)
        n_terms = np.zeros(len(pts), dtype=int)
        route = np.zeros(len(pts), dtype=int)

        batch_size = max(1, config.batch_size)
        total_batches = (len(pts) + batch_size - 1) // batch_size
        for start in tqdm(range(0, len(pts), batch_size), total=total_batches, disable=not progress,
                          desc=f"sum {f.name}"):
            stop = start + batch_size
            batch = pts[start:stop]
            if f.support is not None and f.support.is_annular:
                v, n, r = self._exact(f, batch, j_min, j_max)
            else:
                v, n, r = self._heuristic(f, batch, j_min, j_max)
            values[start:stop], n_terms[start:stop], route[start:stop] = v, n, r
        return SumResult(values, n_terms, route)

    def _exact(self, f: ScalarField, pts: np.ndarray, j_min, j_max):
        table = self.table(f.support.norm)
        jcap = table.j_abs_max
        lo = -jcap if j_min is None else max(j_min, -jcap)
        hi = jcap if j_max is None else min(j_max, jcap)
        radius = f.support.norm.of(pts)
        dtype = complex if f.is_complex else float
        values = np.zeros(len(pts), dtype=dtype)
        n_terms = np.zeros(len(pts), dtype=int)
        capped = np.zeros(len(pts), dtype=bool)
        with np.errstate(over="ignore", invalid="ignore"):
            for j in range(lo, hi + 1):
                b = table.bounds(j)
                mask = (b.mu_j * radius >= f.support.inner) & (b.lambda_j * radius <= f.support.outer)
                mask &= radius > 0
                if not np.any(mask):
                    continue
                images = pts[mask] @ table.power(j).T
                values[mask] += f(images)
                n_terms[mask] += 1
                if (j == -jcap and j_min is None) or (j == jcap and j_max is None):
                    capped |= mask
        route = np.where(capped, ROUTE_CAPPED, ROUTE_EXACT)
        return values, n_terms, route

    def _heuristic(self, f: ScalarField, pts: np.ndarray, j_min, j_max):
        table = self.table(f.norm)
        jcap = table.j_abs_max
        tol = self.policy.tail_tol
        lo = -jcap if j_min is None else max(j_min, -jcap)
        hi = jcap if j_max is None else min(j_max, jcap)
        dtype = complex if f.is_complex else float
        js = np.arange(lo, hi + 1)
        terms = np.zeros((len(js), len(pts)), dtype=dtype)
        finite = np.zeros((len(js), len(pts)), dtype=bool)
        with np.errstate(over="ignore", invalid="ignore", under="ignore"):
            for row, j in enumerate(js):
                images = pts @ table.power(int(j)).T
                ok = np.all(np.isfinite(images), axis=1)
                finite[row] = ok
                if np.any(ok):
                    terms[row, ok] = f(images[ok])
        values = terms.sum(axis=0)
        n_terms = np.count_nonzero(terms, axis=0)

        capped = np.zeros(len(pts), dtype=bool)
        mags = np.abs(terms)
        if j_max is None:
            capped |= ~self._tail_negligible(mags, finite, tol)
        if j_min is None:
            capped |= ~self._tail_negligible(mags[::-1], finite[::-1], tol)
        capped &= np.any(finite, axis=0)
        route = np.where(capped, ROUTE_CAPPED, ROUTE_HEURISTIC)
        return values, n_terms, route

    @staticmethod
    def _tail_negligible(mags: np.ndarray, finite: np.ndarray, tol: float) -> np.ndarray:
        """True where the outermost finite terms (last rows) are all below tol."""
        n_rows, n_pts = mags.shape
        # images past an overflow are left out of the tail
        last = n_rows - 1 - np.argmax(finite[::-1], axis=0)
        ok = np.ones(n_pts, dtype=bool)
        for back in range(_HEURISTIC_RUN):
            row = last - back
            mag = np.where(row >= 0, mags[np.clip(row, 0, None), np.arange(n_pts)], 0.0)
            ok &= mag <= tol
        return ok


@dataclass(frozen=True, eq=False)
class PartitionSystem:
    g: ScalarField
    M: SquareMatrix
    truncation: TruncationPolicy = field(default_factory=TruncationPolicy)
    target_constant: float = 1.0
    norm: Norm = Norm.EUCLID
    certificate: Optional[ExpansionCertificate] = None
    metadata: Dict[str, object] = field(default_factory=dict)

    def __post_init__(self):
        if self.g.dim != self.M.dim:
            raise InvalidInputError(f"Field dimension {self.g.dim} does not match matrix dimension {self.M.dim}")
        self.M.require_invertible()

    @cached_property
    def summer(self) -> DilationSummer:
        return DilationSummer(self.M, self.truncation)

    def dilation_sum(self, points, progress: bool = False) -> SumResult:
        return self.summer.sum(self.g, points, progress=progress)


def g_from_phi(phi: ScalarField, M: SquareMatrix) -> ScalarField:
    """
    g(x) = phi(x) - phi(M x).

    When phi equals 1 on the ball of radius R1 and vanishes outside the ball of
    radius R, g vanishes for ||x|| <= R1 / max(1, ||M||) and for ||x|| >= R / min(1, lambda_1),
    so the output carries that annulus as its support.
    """
    if phi.dim != M.dim:
        raise InvalidInputError(f"Field dimension {phi.dim} does not match matrix dimension {M.dim}")
    M.require_invertible()
    ev = phi.evaluator
    entries = M.entries

    support = None
    if phi.plateau and phi.support is not None and phi.support.is_bounded:
        norm = phi.support.norm
        bounds = singular_interval(M, 1, norm)
        outer = phi.support.outer / min(1.0, bounds.lambda_j)
        support = Annulus(phi.plateau / max(1.0, bounds.mu_j), outer, norm)

    g = ScalarField(
        evaluator=lambda pts: ev(pts) - ev(pts @ entries.T),
        dim=phi.dim,
        support=support,
        smoothness=phi.smoothness,
        bound=None if phi.bound is None else 2.0 * phi.bound,
        is_complex=phi.is_complex,
        norm=phi.norm,
        breakpoints=phi.breakpoints,
        name=f"g[{phi.name}]",
        metadata={"phi": phi, "dilation": M},
    )
    logger.debug(f"Built g from phi '{phi.name}' with support {support.describe() if support else 'unbounded'}")
    return g


def phi_from_g(g: ScalarField, M: SquareMatrix, policy: Optional[TruncationPolicy] = None) -> ScalarField:
    """
    phi(x) = sum_{j >= 0} g(M^j x), the canonical potential with g(x) = phi(x) - phi(M x).

    Raises:
        RefusalError: M is not expanding and g has no annular support, so the
            series cannot be certified to converge.
    """
    policy = policy or TruncationPolicy()
    annular = g.support is not None and g.support.is_annular
    if not annular and not is_expanding(M, g.norm).is_expanding:
        raise RefusalError(
            "phi_from_g needs an expanding matrix or a field supported on an annulus; "
            "convergence of sum_{j>=0} g(M^j x) cannot be certified"
        )
    summer = DilationSummer(M, policy)
    metadata: Dict[str, object] = {"tail_capped": False, "route": "exact" if annular else "heuristic"}

    def evaluate(pts: np.ndarray) -> np.ndarray:
        result = summer.sum(g, pts, j_min=0)
        if result.any_capped and not metadata["tail_capped"]:
            metadata["tail_capped"] = True
            logger.warning(f"phi_from_g: cap j <= {policy.j_abs_max} reached without a tail certificate")
        return result.values

    return ScalarField(
        evaluator=evaluate,
        dim=g.dim,
        smoothness=g.smoothness,
        is_complex=g.is_complex,
        norm=g.norm,
        name=f"phi[{g.name}]",
        metadata=metadata,
    )


def _split_origin(points: np.ndarray, norm: Norm) -> Tuple[np.ndarray, int]:
    keep = norm.of(points) > 0
    return points[keep], int(np.sum(~keep))


def verify_partition(sys: PartitionSystem, samples, tol: Optional[float] = None,
                     grid_spec: str = "", progress: bool = False) -> VerificationReport:
    """Check sum_j g(M^j x) = target_constant at every nonzero sample."""
    tol = config.verify_tol if tol is None else tol
    pts = as_points(samples, sys.M.dim)
    pts, n_origin = _split_origin(pts, sys.norm)
    notes = []
    if n_origin:
        notes.append(f"skipped {n_origin} sample(s) at the origin")
        logger.info(f"verify_partition: skipped {n_origin} origin sample(s)")

    result = sys.dilation_sum(pts, progress=progress)
    deviations = np.abs(result.values - sys.target_constant)
    counts = result.route_counts()
    notes.append("tails: " + ", ".join(f"{k}={v}" for k, v in counts.items()))
    if counts["capped"]:
        notes.append(f"cap |j| <= {sys.truncation.j_abs_max} reached without a tail certificate")

    columns = {f"gamma_{i + 1}": pts[:, i] for i in range(pts.shape[1])}
    columns.update({"sum": np.real(result.values), "deviation": deviations, "n_terms": result.n_terms,
                    "tail_route": result.route})
    return build_report(
        "partition_of_unity",
        pts,
        deviations,
        tol,
        route_notes=notes,
        grid_spec=grid_spec,
        extras={"target_constant": float(sys.target_constant), "n_samples": int(len(pts)),
                "tail_route_codes": ", ".join(f"{code}={name}" for code, name in ROUTE_NAMES.items())},
        columns=columns,
    )


def build_radial_pou(r: RadialProfile, M: SquareMatrix, norm: Norm = Norm.EUCLID,
                     nonnegative: bool = False, policy: Optional[TruncationPolicy] = None) -> PartitionSystem:
    """
    Partition of unity g(x) = r(||x||) - r(||M x||) from a radial profile.

    Args:
        r: Profile with r(0) = 1 and r(s) -> 0
        M: Expanding matrix
        norm: Norm defining the radial lift
        nonnegative: Require the guarantee g >= 0, which needs ||x|| <= ||M x||
        policy: Truncation policy for the dilation sums
    """
    cert = is_expanding(M, norm)
    if not cert.is_expanding:
        raise RefusalError(
            f"Matrix {M!r} is not expanding (rho(M^-1) = {cert.spectral_radius_of_inverse:.12g}); "
            "the radial construction needs all eigenvalues of modulus > 1"
        )
    guaranteed = cert.norm_monotone and r.monotone_decreasing
    if nonnegative and not cert.norm_monotone:
        raise RefusalError(
            f"Nonnegativity requested but ||x|| <= ||M x|| fails for the {norm.value} norm "
            f"(M is expanding yet shrinks some vectors, e.g. smallest gain "
            f"{singular_interval(M, 1, norm).lambda_j:.6g} < 1)"
        )
    if nonnegative and not r.monotone_decreasing:
        raise RefusalError(f"Nonnegativity requested but profile '{r.name}' is not decreasing")

    g = g_from_phi(r.field(M.dim, norm), M)
    logger.info(f"Built radial partition from '{r.name}' (nonnegative guarantee: {guaranteed})")
    return PartitionSystem(
        g=g,
        M=M,
        truncation=policy or TruncationPolicy(),
        target_constant=1.0,
        norm=norm,
        certificate=cert,
        metadata={"nonnegative": guaranteed, "square_sum_bound": guaranteed, "profile": r.name},
    )


def square_sum_bounds(sys: PartitionSystem, samples) -> Tuple[float, float]:
    """
    Grid estimates of the ess-inf and ess-sup of sum_j |g(M^j x)|^2.

    For systems built with the nonnegativity guarantee the bounds
    0 < lower and upper <= 1 are asserted.
    """
    if sys.g.is_complex:
        raise InvalidInputError("square_sum_bounds needs a real-valued g")
    pts = as_points(samples, sys.M.dim)
    pts, _ = _split_origin(pts, sys.norm)
    if len(pts) == 0:
        raise InvalidInputError("square_sum_bounds needs at least one nonzero sample")
    sums = sys.summer.sum(sys.g.abs_square(), pts).values
    lower, upper = float(np.min(sums)), float(np.max(sums))
    logger.info(f"Square-sum grid estimates: lower={lower:.6g}, upper={upper:.6g}")
    if sys.metadata.get("nonnegative"):
        if upper > 1.0 + 1e-12 or lower <= 0.0:
            raise VerificationError(
                f"Square-sum bounds violated on grid: lower={lower:.17g}, upper={upper:.17g}"
            )
    return lower, upper


def partial_sum(sys: PartitionSystem, points, j_lo: int, j_hi: int) -> np.ndarray:
    """sum_{j = j_lo}^{j_hi} g(M^j x), evaluated term by term."""
    pts = as_points(points, sys.M.dim)
    total = np.zeros(len(pts), dtype=complex if sys.g.is_complex else float)
    for j in range(j_lo, j_hi + 1):
        total += sys.g(pts @ sys.M.power(j).T)
    return total


def telescoping_identity_gap(sys: PartitionSystem, phi: ScalarField, points, m: int, n: int) -> float:
    """max |sum_{j=-m}^{n} g(M^j x) - (phi(M^-m x) - phi(M^{n+1} x))| over the points."""
    pts = as_points(points, sys.M.dim)
    lhs = partial_sum(sys, pts, -m, n)
    rhs = phi(pts @ sys.M.power(-m).T) - phi(pts @ sys.M.power(n + 1).T)
    return float(np.max(np.abs(lhs - rhs)))


def limit_behaviour(phi: ScalarField, M: SquareMatrix, point, n_max: Optional[int] = None) -> Dict[str, np.ndarray]:
    """
    Sampled values phi(M^N x) for -n_max <= N <= n_max.

    The partition property holds iff the limits at N -> -inf and N -> +inf exist
    and differ by the target; this only reports the sampled tails.
    """
    n_max = config.j_abs_max if n_max is None else n_max
    pts = as_points(point, M.dim)[:1]
    table = PowerTable(M, phi.norm, n_max)
    with np.errstate(over="ignore", invalid="ignore", under="ignore"):
        values = np.array([phi(pts @ table.power(int(j)).T)[0] for j in table.js])
    return {
        "N": table.js,
        "phi": values,
        "limit_minus": values[0],
        "limit_plus": values[-1],
        "label": "sampled",
    }
