"""
Dual wavelet frames built and checked on the Fourier side.

A pair (psi, psi_dual) with frequency dilation D (D = (c) for the 1-D spline
pair, D = M^T for a matrix dilation M) and translation step b generates dual
frames when

    sum_j conj(psi(D^j x)) psi_dual(D^j x) = b^d    for x != 0

and the lattice conditions for m != 0 hold. Those are discharged only through
support disjointness: when both generators live in the ball of radius R_eff and
2 b R_eff <= 1, every shifted product vanishes.
"""

from dataclasses import dataclass, field
from itertools import product as cartesian
from typing import Dict, Iterator, Optional, Tuple
import json
import logging
import numpy as np
from src.config.settings import config
from src.utils.errors import InvalidInputError, RangeError, RefusalError, VerificationError
from src.utils.fields import Annulus, RadialProfile, ScalarField, as_points
from src.utils.matrix import Norm, PowerTable, SquareMatrix, is_expanding
from src.utils.partition import DilationSummer, TruncationPolicy, g_from_phi
from src.utils.reports import VerificationReport, build_report
from src.utils.sampling import log_samples
from src.utils.splines import build_spline, lift_spline, spline_field, spline_integrals

logger = logging.getLogger(__name__)

ROUTE_DISJOINT = "m!=0 via support-disjointness"
ROUTE_OPEN = "m!=0 condition not established"


@dataclass(frozen=True, eq=False)
class FrameGeneratorPair:
    """
    Frequency-side generators with their dilation data.

    frequency_dilation is the matrix whose powers act on the Fourier side;
    dilation is the matrix as given by the caller.
    """

    psi_hat: ScalarField
    psi_dual_hat: ScalarField
    dilation: SquareMatrix
    frequency_dilation: SquareMatrix
    b: float
    support_radius: float
    kind: str
    params: Dict[str, object] = field(default_factory=dict)
    certificates: Dict[str, object] = field(default_factory=dict)

    def __post_init__(self):
        if not self.b > 0:
            raise InvalidInputError(f"Translation step b must be > 0, got {self.b}")
        for f in (self.psi_hat, self.psi_dual_hat):
            if f.support is None or not f.support.is_annular:
                raise InvalidInputError(f"Generator '{f.name}' must have a bounded annular support")

    @property
    def dim(self) -> int:
        return self.psi_hat.dim

    @property
    def b_power(self) -> float:
        return self.b ** self.dim

    def support_disjoint(self) -> bool:
        """2 b R_eff <= 1, so the m != 0 lattice terms vanish identically."""
        return 2.0 * self.b * self.support_radius <= 1.0 + 1e-12

    def to_keyvalue(self) -> str:
        lines = [f"kind = {self.kind}"]
        for key, value in self.params.items():
            lines.append(f"{key} = {json.dumps(value) if isinstance(value, (list, dict)) else value}")
        lines.extend([
            f"b = {self.b:.17g}",
            f"dim = {self.dim}",
            f"psi_support = {self.psi_hat.support.describe()}",
            f"psi_dual_support = {self.psi_dual_hat.support.describe()}",
            f"R_eff = {self.support_radius:.17g}",
            f"support_disjoint = {str(self.support_disjoint()).lower()}",
        ])
        for key, value in self.certificates.items():
            if isinstance(value, float):
                value = f"{value:.17g}"
            elif isinstance(value, bool):
                value = str(value).lower()
            lines.append(f"cert_{key} = {value}")
        return "\n".join(lines)


@dataclass(frozen=True)
class FrameBoundEstimate:
    A_est: float
    B_est: float
    grid_spec: str
    k_range_used: Tuple[int, int]
    certified: bool
    notes: Tuple[str, ...] = ()

    def to_keyvalue(self) -> str:
        lines = [
            f"A_est = {self.A_est:.17g}",
            f"B_est = {self.B_est:.17g}",
            f"k_range = [{self.k_range_used[0]}, {self.k_range_used[1]}]",
            f"frame_certified_on_grid = {str(self.certified).lower()}",
            f"grid = {self.grid_spec}",
        ]
        lines.extend(f"note = {n}" for n in self.notes)
        return "\n".join(lines)


@dataclass(frozen=True)
class IndexSetJ:
    j_min: int
    j_max: int
    witness: Tuple[Tuple[int, float, float], ...] = ()

    def __post_init__(self):
        if not (self.j_min <= 0 <= self.j_max):
            raise InvalidInputError(f"Index set [{self.j_min}, {self.j_max}] must contain 0")

    @property
    def indices(self) -> range:
        return range(self.j_min, self.j_max + 1)

    def __contains__(self, j: int) -> bool:
        return self.j_min <= j <= self.j_max

    def __len__(self) -> int:
        return self.j_max - self.j_min + 1


def _require_annular(f: ScalarField) -> Annulus:
    if f.support is None or not f.support.is_annular:
        raise RefusalError(f"Generator '{f.name}' needs a bounded support away from the origin; "
                           "the sums over j cannot be made finite")
    return f.support


def _orbit(f: ScalarField, dilation: SquareMatrix, pts: np.ndarray,
           j_abs_max: Optional[int] = None) -> Iterator[Tuple[int, np.ndarray, np.ndarray]]:
    """Yield (j, row indices, D^j x) for every j at which D^j x can meet the support of f."""
    support = _require_annular(f)
    table = PowerTable(dilation, support.norm, j_abs_max)
    radius = support.norm.of(pts)
    with np.errstate(over="ignore", invalid="ignore"):
        for j in table.js:
            bounds = table.bounds(int(j))
            mask = (bounds.mu_j * radius >= support.inner) & (bounds.lambda_j * radius <= support.outer) & (radius > 0)
            if np.any(mask):
                idx = np.flatnonzero(mask)
                yield int(j), idx, pts[idx] @ table.power(int(j)).T


def _lattice(k_max: int, dim: int) -> np.ndarray:
    side = range(-k_max, k_max + 1)
    return np.array(list(cartesian(side, repeat=dim)), dtype=float).reshape(-1, dim)


def _frame_sums(psi_hat: ScalarField, dilation: SquareMatrix, b: float, pts: np.ndarray):
    """Per-point (sum_j |psi|^2, sum_j sum_{k != 0} |psi psi(. - k/b)|, k_max)."""
    support = _require_annular(psi_hat)
    d = psi_hat.dim
    # overlap needs |k|/b < 2 r_hi in either norm; |k|/b = 2 r_hi touches at a single point
    k_max = max(0, int(np.ceil(2.0 * support.outer * b - 1e-12)) - 1)
    shifts = _lattice(k_max, d)
    shifts = shifts[np.any(shifts != 0, axis=1)] / b
    diag = np.zeros(len(pts))
    cross = np.zeros(len(pts))
    for _, idx, images in _orbit(psi_hat, dilation, pts):
        v0 = np.abs(psi_hat(images))
        diag[idx] += v0 ** 2
        for shift in shifts:
            cross[idx] += v0 * np.abs(psi_hat(images - shift))
    return diag, cross, k_max


def bessel_bound_estimate(psi_hat: ScalarField, dilation: SquareMatrix, b: float, grid) -> float:
    """
    Grid estimate of the Bessel bound

        B = b^-d sup_x sum_j sum_k |psi(D^j x) psi(D^j x - k/b)|

    Raises:
        RefusalError: psi_hat has no bounded annular support
    """
    if not b > 0:
        raise InvalidInputError(f"Translation step b must be > 0, got {b}")
    if psi_hat.bound == 0.0:
        return 0.0
    pts = as_points(grid, psi_hat.dim)
    diag, cross, _ = _frame_sums(psi_hat, dilation, b, pts)
    return float(np.max(diag + cross)) / b ** psi_hat.dim if len(pts) else 0.0


def frame_bounds(psi_hat: ScalarField, dilation: SquareMatrix, b: float, grid,
                 grid_spec: str = "") -> FrameBoundEstimate:
    """Grid estimates (A, B) of the frame bounds; A <= 0 means the frame property is not certified."""
    if not b > 0:
        raise InvalidInputError(f"Translation step b must be > 0, got {b}")
    pts = as_points(grid, psi_hat.dim)
    pts = pts[psi_hat.norm.of(pts) > 0]
    if len(pts) == 0:
        raise InvalidInputError("frame_bounds needs at least one nonzero grid point")
    diag, cross, k_max = _frame_sums(psi_hat, dilation, b, pts)
    scale = 1.0 / b ** psi_hat.dim
    a_est = scale * float(np.min(diag - cross))
    b_est = scale * float(np.max(diag + cross))
    notes = ["grid estimates of ess-inf/ess-sup"]
    certified = a_est > 0
    if not certified:
        notes.append("frame property not certified on grid")
        logger.warning(f"Lower frame bound estimate {a_est:.6g} <= 0 for '{psi_hat.name}' at b={b:g}")
    if k_max > 0:
        notes.append(f"k != 0 terms engaged (|k|_inf <= {k_max}); b above the support threshold")
        certified = False
    logger.info(f"Frame bounds for '{psi_hat.name}', b={b:g}: A~{a_est:.6g}, B~{b_est:.6g}")
    return FrameBoundEstimate(a_est, b_est, grid_spec, (-k_max, k_max), certified, tuple(notes))


def square_sum_profile(psi_hat: ScalarField, dilation: SquareMatrix, b: float, grid) -> np.ndarray:
    """b^-d sum_j |psi(D^j x)|^2 per grid point; lies between the two frame bound estimates."""
    pts = as_points(grid, psi_hat.dim)
    diag, _, _ = _frame_sums(psi_hat, dilation, b, pts)
    return diag / b ** psi_hat.dim


def _spline_dual(spline, b_coef: float, d: int, norm: Norm) -> ScalarField:
    n, c = spline.n, spline.c
    js = np.arange(-(n - 1), n)
    factors = np.power(c, js.astype(float))
    # nonzero only for c^{2n-1} < |x| < c^{-n+1}
    support = Annulus(spline.knots[-1] * spline.knots[n - 1], 1.0 / spline.knots[n - 1], norm)

    def profile(s):
        s = np.atleast_1d(np.asarray(s, dtype=float))
        return b_coef * sum(spline.eval(f * s) for f in factors)

    return ScalarField(
        evaluator=lambda pts: profile(norm.of(pts)),
        dim=d,
        support=support,
        smoothness=f"C^{n - 2}",
        norm=norm,
        radial=profile,
        name=f"dual[{spline.name}]" + (f"~{d}d" if d > 1 else ""),
    )


def _check_spline_b(n: int, c: float, b: float) -> float:
    if n < 2:
        raise InvalidInputError(f"Spline dual pairs need n >= 2, got {n}")
    if not b > 0:
        raise InvalidInputError(f"Translation step b must be > 0, got {b}")
    bound = build_spline(n, c).knots[n - 1] / 2.0
    if b > bound * (1.0 + 1e-12):
        raise RefusalError(f"b = {b:.17g} lies outside the admissible interval (0, c^(n-1)/2] = (0, {bound:.17g}]")
    return bound


def build_spline_dual_pair(n: int, c: float, b: float) -> FrameGeneratorPair:
    """
    psi = h_n and psi_dual = (b / Q_{n-1}^2) sum_{|j| <= n-1} h_n(c^j .), dilation by c.

    psi_dual equals the plateau b / Q_{n-1} on the support of psi.

    Raises:
        RefusalError: b outside (0, c^{n-1}/2]
    """
    bound = _check_spline_b(n, c, b)
    spline = build_spline(n, c)
    q_prev = spline_integrals(n, c).q(n - 1)
    psi = spline_field(spline)
    dual = _spline_dual(spline, b / q_prev ** 2, 1, Norm.EUCLID)
    m = SquareMatrix.scalar(c)
    logger.info(f"Built spline dual pair n={n}, c={c:g}, b={b:g} (bound {bound:.6g})")
    return FrameGeneratorPair(
        psi_hat=psi,
        psi_dual_hat=dual,
        dilation=m,
        frequency_dilation=m,
        b=float(b),
        support_radius=dual.support.outer,
        kind="spline-1d",
        params={"n": int(n), "c": float(c)},
        certificates={"plateau_value": b / q_prev, "b_bound": bound, "Q_prev": q_prev},
    )


def build_lifted_spline_dual_pair(n: int, c: float, b: float, d: int = 2,
                                  norm: Norm = Norm.EUCLID) -> FrameGeneratorPair:
    """The spline pair lifted radially to R^d with dilation c I; the dual carries b^d."""
    bound = _check_spline_b(n, c, b)
    spline = build_spline(n, c)
    q_prev = spline_integrals(n, c).q(n - 1)
    psi = lift_spline(spline, norm, d)
    dual = _spline_dual(spline, b ** d / q_prev ** 2, d, norm)
    m = SquareMatrix.scalar(c, d)
    return FrameGeneratorPair(
        psi_hat=psi,
        psi_dual_hat=dual,
        dilation=m,
        frequency_dilation=m,
        b=float(b),
        support_radius=dual.support.outer,
        kind="spline-lifted",
        params={"n": int(n), "c": float(c), "d": int(d), "norm": norm.value},
        certificates={"plateau_value": b ** d / q_prev, "b_bound": bound, "Q_prev": q_prev},
    )


def compute_index_set(M: SquareMatrix, R: float, R1: float, norm: Norm = Norm.EUCLID,
                      j_max: Optional[int] = None) -> IndexSetJ:
    """
    The conservative index set J = {j : lambda_j r_lo <= R and mu_j R >= r_lo}, r_lo = R1 / ||M^T||.

    lambda_j and mu_j are the norm bounds of (M^T)^j. Extra indices only add terms
    that vanish on the support of psi.

    Raises:
        RefusalError: M is not expanding
        RangeError: the scan reaches |j| = J_max without closing
    """
    if not (0.0 < R1 <= R) or not np.isfinite(R):
        raise InvalidInputError(f"compute_index_set needs 0 < R1 <= R < inf, got R1={R1}, R={R}")
    if not is_expanding(M, norm).is_expanding:
        raise RefusalError(f"Matrix {M!r} is not expanding; no finite index set exists")
    j_max = config.j_max if j_max is None else j_max
    mt = M.transpose()
    r_lo = R1 / norm.operator_norm(mt.entries)
    table = PowerTable(mt, norm, j_max)
    members = []
    for j in table.js:
        bounds = table.bounds(int(j))
        if bounds.lambda_j * r_lo <= R and bounds.mu_j * R >= r_lo:
            members.append((int(j), bounds.lambda_j, bounds.mu_j))
    lo, hi = members[0][0], members[-1][0]
    if lo <= -j_max or hi >= j_max:
        raise RangeError(f"Index set scan reached |j| = {j_max} without closing; the dilation is not expanding enough")
    logger.info(f"Index set J = [{lo}, {hi}] for R1={R1:g}, R={R:g}")
    return IndexSetJ(lo, hi, tuple(members))


def build_radial_dual_pair(r: RadialProfile, M: SquareMatrix, b: Optional[float] = None,
                           norm: Norm = Norm.EUCLID, n_check: int = 64) -> FrameGeneratorPair:
    """
    psi(x) = r(||x||) - r(||M^T x||) and psi_dual = b^d sum_{j in J} psi((M^T)^j x).

    The default step is b = (2 R max_J lambda_j^-1)^-1, which is also the largest
    accepted value.

    Args:
        r: Continuous decreasing profile with plateau [0, R1] and support [0, R]
        M: Expanding matrix with ||x|| <= ||M^T x||
        b: Translation step, defaulted when None
        norm: Norm of the radial lift
        n_check: Radii per direction in the post-hoc check of sum_J psi = 1

    Raises:
        RefusalError: a precondition of the construction fails
        VerificationError: sum_J psi differs from 1 on the sampled support
    """
    cert = is_expanding(M, norm)
    if not cert.is_expanding:
        raise RefusalError(f"Matrix {M!r} is not expanding (rho(M^-1) = {cert.spectral_radius_of_inverse:.12g})")
    mt = M.transpose()
    if not is_expanding(mt, norm).norm_monotone:
        raise RefusalError(f"||x|| <= ||M^T x|| fails for the {norm.value} norm; nonnegativity and the "
                           "square-sum bounds are unavailable")
    if not (r.continuous and r.monotone_decreasing):
        raise RefusalError(f"Profile '{r.name}' must be continuous and decreasing")
    if not (r.has_plateau and np.isfinite(r.R)):
        raise RefusalError(f"Profile '{r.name}' needs a plateau R1 > 0 and a finite support radius R")

    d = M.dim
    J = compute_index_set(M, r.R, r.R1, norm)
    table = PowerTable(mt, norm, max(abs(J.j_min), abs(J.j_max)))
    lam_inv = max(1.0 / table.bounds(j).lambda_j for j in J.indices)
    mu_max = max(table.bounds(j).mu_j for j in J.indices)
    r_eff = r.R * lam_inv
    b_bound = 1.0 / (2.0 * r_eff)
    if b is None:
        b = b_bound
    elif not b > 0:
        raise InvalidInputError(f"Translation step b must be > 0, got {b}")
    elif b > b_bound * (1.0 + 1e-12):
        raise RefusalError(f"b = {b:.17g} exceeds the admissible bound (2 R max_J lambda_j^-1)^-1 = {b_bound:.17g}")

    g = g_from_phi(r.field(d, norm), mt)
    psi = ScalarField(evaluator=g.evaluator, dim=d, support=g.support, smoothness=g.smoothness,
                      bound=1.0, norm=norm, breakpoints=g.breakpoints, name=f"psi[{r.name}]")
    powers = [table.power(j) for j in J.indices]
    psi_ev = psi.evaluator
    bd = b ** d

    def dual_ev(pts):
        with np.errstate(over="ignore", invalid="ignore"):
            return bd * sum(psi_ev(pts @ p.T) for p in powers)

    dual = ScalarField(
        evaluator=dual_ev,
        dim=d,
        support=Annulus(psi.support.inner / mu_max, r_eff, norm),
        smoothness=psi.smoothness,
        norm=norm,
        name=f"dual[{r.name}]",
    )

    # sum over J of psi must be 1 on the support of psi
    pts, _ = log_samples(psi.support.inner, psi.support.outer, n_check, d, norm=norm)
    vals = psi(pts)
    on_support = vals != 0
    partial = sum(psi_ev(pts[on_support] @ p.T) for p in powers)
    gap = float(np.max(np.abs(partial - 1.0))) if np.any(on_support) else 0.0
    if gap > 1e-10:
        raise VerificationError(f"sum over J of psi deviates from 1 by {gap:.3e} on the support of psi")
    logger.info(f"Built radial dual pair for '{r.name}', d={d}, J=[{J.j_min}, {J.j_max}], b={b:.6g}")
    return FrameGeneratorPair(
        psi_hat=psi,
        psi_dual_hat=dual,
        dilation=M,
        frequency_dilation=mt,
        b=float(b),
        support_radius=r_eff,
        kind="radial",
        params={"profile": r.name, "matrix": M.to_rows(), "norm": norm.value},
        certificates={"plateau_value": bd, "b_bound": b_bound, "J_min": J.j_min, "J_max": J.j_max,
                      "index_sum_gap": gap},
    )


def verify_dual_relation(pair: FrameGeneratorPair, grid, tol: Optional[float] = None,
                         grid_spec: str = "", policy: Optional[TruncationPolicy] = None) -> VerificationReport:
    """
    Check sum_j conj(psi(D^j x)) psi_dual(D^j x) = b^d on the grid.

    The m != 0 conditions are reported as established only when the supports are
    disjoint after translation (2 b R_eff <= 1).
    """
    tol = config.verify_tol if tol is None else tol
    pts = as_points(grid, pair.dim)
    pts = pts[pair.psi_hat.norm.of(pts) > 0]
    disjoint = pair.support_disjoint()
    if not disjoint:
        logger.warning(f"2 b R_eff = {2 * pair.b * pair.support_radius:.6g} > 1; m != 0 terms not established")
    summer = DilationSummer(pair.frequency_dilation, policy)
    mixed = pair.psi_hat.product(pair.psi_dual_hat, conjugate_self=True)
    dual_sum = summer.sum(mixed, pts).values
    sq_sum = summer.sum(pair.psi_hat.abs_square(), pts).values
    deviation = np.abs(dual_sum - pair.b_power)
    columns = {f"gamma_{i + 1}": pts[:, i] for i in range(pair.dim)}
    columns.update({"dual_sum": np.real(dual_sum), "deviation": deviation, "sq_sum": np.real(sq_sum)})
    return build_report(
        f"dual_relation_{pair.kind}",
        pts,
        deviation,
        tol,
        route_notes=[ROUTE_DISJOINT if disjoint else ROUTE_OPEN, "exact finite sums over j"],
        grid_spec=grid_spec,
        extras={"b_power": pair.b_power, "m_nonzero_established": str(disjoint).lower()},
        columns=columns,
    )


def plateau_deviation(pair: FrameGeneratorPair, grid) -> float:
    """max |psi_dual - plateau| over the grid points where psi does not vanish."""
    pts = as_points(grid, pair.dim)
    on_support = pair.psi_hat(pts) != 0
    if not np.any(on_support):
        return 0.0
    plateau = float(pair.certificates["plateau_value"])
    return float(np.max(np.abs(pair.psi_dual_hat(pts[on_support]) - plateau)))
