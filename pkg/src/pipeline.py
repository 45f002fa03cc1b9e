import argparse
import json
import logging
import sys
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, TextIO, Tuple, Union
import numpy as np
from src.config.settings import config
from src.utils import config_files
from src.utils.errors import InvalidInputError, PartitionOfUnityError, RefusalError
from src.utils.fields import ScalarField, as_points
from src.utils.frames import (FrameGeneratorPair, build_lifted_spline_dual_pair, build_radial_dual_pair,
                              build_spline_dual_pair, frame_bounds, plateau_deviation, square_sum_profile,
                              verify_dual_relation)
from src.utils.matrix import Norm, SquareMatrix, is_expanding
from src.utils.partition import (PartitionSystem, TruncationPolicy, build_radial_pou, square_sum_bounds,
                                 verify_partition)
from src.utils.reports import VerificationReport, build_report, write_csv
from src.utils.sampling import GridSpec, band_grid, radial_grid, random_samples
from src.utils.splines import (build_spline, normalized_partition, smoothness_report, spline_field,
                               transform_consistency_check)
from src.utils.transform import QuadratureSpec, lifted_partition, transform_grid

# Set up logging
logging.basicConfig(level=getattr(logging, config.log_level.upper(), logging.INFO),
                    format='%(asctime)s - %(levelname)s - %(message)s')
logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_INVALID = 2
EXIT_IO = 3

COMMANDS = {
    "pou": ("build", "verify"),
    "transform": ("eval", "verify"),
    "spline": ("build", "check"),
    "frame": ("build-1d", "build-radial", "build-lifted", "verify"),
}


@dataclass
class GridOptions:
    """Grid request: spec is 'band', 'log:lo:hi:n' or '[lin:]lo:hi:n'; None picks the command default."""

    spec: Optional[str] = None
    n_radii: int = field(default_factory=lambda: config.grid_n_radii)
    n_directions: int = field(default_factory=lambda: config.grid_n_directions)
    seed: int = field(default_factory=lambda: config.grid_seed)


@dataclass
class RunConfig:
    command: str
    subcommand: str
    params: Dict[str, Any] = field(default_factory=dict)
    grid: GridOptions = field(default_factory=GridOptions)
    output: Optional[str] = None
    csv: Optional[str] = None
    progress: bool = False

    def validate(self) -> None:
        if self.command not in COMMANDS:
            raise InvalidInputError(f"Unknown command {self.command!r}")
        if self.subcommand not in COMMANDS[self.command]:
            raise InvalidInputError(f"Unknown subcommand {self.command} {self.subcommand!r}")
        if self.grid.n_radii < 1 or self.grid.n_directions < 1:
            raise InvalidInputError("Grid sizes must be positive")


def parse_grid(spec: str, dim: int, norm: Norm = Norm.EUCLID,
               options: Optional[GridOptions] = None) -> Tuple[np.ndarray, GridSpec]:
    """
    Points for an explicit grid spec.

    In one dimension the grid is the plain coordinate list; in d >= 2 the
    values are radii combined with the standard directions.
    """
    options = options or GridOptions()
    parts = spec.split(":")
    kind = "lin"
    if parts[0] in ("log", "lin"):
        kind, parts = parts[0], parts[1:]
    if len(parts) != 3:
        raise InvalidInputError(f"Grid spec {spec!r} must look like [log|lin]:lo:hi:n")
    try:
        lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError as e:
        raise InvalidInputError(f"Grid spec {spec!r} has a non-numeric field") from e
    if n < 1 or hi < lo or (kind == "log" and lo <= 0):
        raise InvalidInputError(f"Invalid grid spec {spec!r}")
    grid = GridSpec(lo, hi, n, options.n_directions, dim, options.seed, norm, log_spaced=kind == "log",
                    endpoint=True)
    if dim == 1:
        values = np.geomspace(lo, hi, n) if kind == "log" else np.linspace(lo, hi, n)
        return values.reshape(-1, 1), grid
    points, _, _ = radial_grid(grid)
    return points, grid


def emit_grid(f: ScalarField, grid: Union[GridSpec, np.ndarray], path: Union[str, TextIO]) -> Dict[str, np.ndarray]:
    """
    Evaluate a field on a grid and write a CSV with a header row.

    A GridSpec in d >= 2 adds radius and direction-index columns.
    """
    if isinstance(grid, GridSpec) and grid.dim > 1:
        points, radii, idx = radial_grid(grid)
        columns = {"radius": radii, "direction": idx}
    else:
        points = as_points(grid, f.dim)
        columns = {}
    if len(points) == 0:
        raise InvalidInputError("emit_grid needs a nonempty grid")
    columns.update({f"gamma_{i + 1}" if f.dim > 1 else "gamma": points[:, i] for i in range(f.dim)})
    columns["value"] = np.real(f(points))
    write_csv(path, columns)
    return columns


class VerificationPipeline:
    def __init__(self, run_config: RunConfig, out: Optional[TextIO] = None):
        """
        Initialize the pipeline for one CLI invocation.

        Args:
            run_config: Validated command, parameters and grid options
            out: Stream for key-value output when no output file is given
        """
        run_config.validate()
        self.config = run_config
        self.params = run_config.params
        self.out = out or sys.stdout
        self.reports: List[VerificationReport] = []
        self._chunks: List[str] = []

    def run(self) -> List[VerificationReport]:
        """Dispatch to the handler of the configured subcommand and write the collected output."""
        cfg = self.config
        logger.info(f"Running {cfg.command} {cfg.subcommand}")
        handler = getattr(self, f"_{cfg.command}_{cfg.subcommand.replace('-', '_')}")
        handler()
        self._flush()
        return self.reports

    def _emit(self, text: str) -> None:
        self._chunks.append(text)

    def _add_report(self, report: VerificationReport, csv_path: Optional[str] = None) -> None:
        self.reports.append(report)
        self._emit(report.to_keyvalue())
        if csv_path and report.columns:
            write_csv(csv_path, report.columns)

    def _flush(self) -> None:
        text = "\n\n".join(self._chunks)
        if self.config.output:
            config_files.write_text(self.config.output, text)
        elif text:
            self.out.write(text + "\n")

    def _policy(self) -> TruncationPolicy:
        j_abs_max = self.params.get("j_abs_max")
        return TruncationPolicy(j_abs_max=j_abs_max) if j_abs_max else TruncationPolicy()

    def _norm(self) -> Norm:
        return config_files.parse_norm(self.params.get("norm"))

    def _band(self, dilation: SquareMatrix, norm: Norm, r0: float) -> Tuple[np.ndarray, GridSpec]:
        g = self.config.grid
        return band_grid(dilation, norm, r0, g.n_radii, g.n_directions, g.seed)

    # --- pou -------------------------------------------------------------

    def _partition_system(self) -> PartitionSystem:
        p = self.params
        if p.get("spline_n"):
            return normalized_partition(int(p["spline_n"]), float(p["c"]), int(p.get("d") or 1), self._norm(),
                                        self._policy())
        if not p.get("profile") or not p.get("matrix"):
            raise InvalidInputError("pou needs --profile and --matrix, or --spline-n and -c")
        profile = config_files.parse_profile_spec(p["profile"])
        matrix, file_norm = config_files.parse_matrix_spec(p["matrix"])
        norm = config_files.parse_norm(p["norm"]) if p.get("norm") else (file_norm or Norm.EUCLID)
        return build_radial_pou(profile, matrix, norm, bool(p.get("nonnegative")), self._policy())

    def _pou_build(self) -> None:
        system = self._partition_system()
        cert = system.certificate or is_expanding(system.M, system.norm)
        support = system.g.support.describe() if system.g.support else "unbounded"
        self._emit("\n".join([
            f"g = {system.g.name}",
            f"matrix = {json.dumps(system.M.to_rows())}",
            f"g_support = {support}",
            f"target_constant = {system.target_constant:.17g}",
            f"nonnegative_guarantee = {str(bool(system.metadata.get('nonnegative'))).lower()}",
            cert.to_keyvalue(),
        ]))

    def _pou_verify(self) -> None:
        system = self._partition_system()
        p = self.params
        d = system.M.dim
        spec = self.config.grid.spec
        if p.get("band_only") or spec == "band":
            r0 = system.g.support.inner if system.g.support is not None and system.g.support.inner > 0 else 1.0
            points, grid = self._band(system.M, system.norm, r0)
        else:
            spec = spec or f"log:1e-3:1e3:{int(p.get('samples') or 1000)}"
            points, grid = parse_grid(spec, d, system.norm, self.config.grid)
        tol = float(p["tol"]) if p.get("tol") is not None else config.verify_tol
        report = verify_partition(system, points, tol, grid.describe(), self.config.progress)
        if not system.g.is_complex:
            lower, upper = square_sum_bounds(system, points)
            report.extras.update({"square_sum_lower_grid": lower, "square_sum_upper_grid": upper})
        self._add_report(report, self.config.csv)

    # --- transform -------------------------------------------------------

    def _transform_input(self, c: float) -> Tuple[ScalarField, Optional[float]]:
        """The input f as a 1-D field, from a built-in profile spec or a spline reference 'h<n>'."""
        ref = str(self.params.get("f") or "")
        if ref.startswith("h") and ref[1:].isdigit():
            spline = build_spline(int(ref[1:]), c)
            return spline_field(spline), spline.integral()
        return config_files.parse_profile_spec(ref).even_function(), None

    def _transform_eval(self) -> None:
        c = float(self.params["c"])
        f, _ = self._transform_input(c)
        points, _ = parse_grid(self.config.grid.spec or "lin:0:1:11", 1)
        values, errors = transform_grid(f, c, points[:, 0], QuadratureSpec())
        columns = {"gamma": points[:, 0], "value": values, "quad_error": errors}
        write_csv(self.config.csv or self.out, columns)

    def _transform_verify(self) -> None:
        c = float(self.params["c"])
        d = int(self.params.get("d") or 1)
        f, target = self._transform_input(c)
        system = lifted_partition(f, c, self._norm(), d, target=target, policy=self._policy())
        points, grid = self._band(system.M, system.norm, 1.0)
        n = int(self.params.get("samples") or 16)
        if len(points) > n:
            points = points[np.linspace(0, len(points) - 1, n).astype(int)]
        self._add_report(verify_partition(system, points, self.params.get("tol") or 1e-9, grid.describe(),
                                          self.config.progress), self.config.csv)

    # --- spline ----------------------------------------------------------

    def _spline_build(self) -> None:
        spline = build_spline(int(self.params["n"]), float(self.params["c"]))
        if self.params.get("emit", "pieces") == "pieces":
            self._emit(spline.dump_pieces())
            return
        points, _ = parse_grid(self.config.grid.spec or "lin:0:1:11", 1)
        emit_grid(spline_field(spline), points, self.config.csv or self.out)

    def _spline_check(self) -> None:
        n, c = int(self.params["n"]), float(self.params["c"])
        self._add_report(smoothness_report(build_spline(n, c)))
        if n >= 2:
            self._add_report(transform_consistency_check(n, c, n_points=int(self.params.get("samples") or 1000)))
        system = normalized_partition(n, c, policy=self._policy())
        samples = random_samples(c, 1.0, int(self.params.get("samples") or 1000), self.config.grid.seed)
        report = verify_partition(system, samples, 1e-12, f"uniform (c, 1] x {len(samples)}")
        lower, upper = square_sum_bounds(system, samples)
        report.extras.update({"square_sum_lower_grid": lower, "square_sum_upper_grid": upper})
        self._add_report(report, self.config.csv)

    # --- frame -----------------------------------------------------------

    def _emit_pair(self, pair: FrameGeneratorPair) -> None:
        self._emit(pair.to_keyvalue())

    def _frame_build_1d(self) -> None:
        p = self.params
        self._emit_pair(build_spline_dual_pair(int(p["n"]), float(p["c"]), float(p["b"])))

    def _frame_build_lifted(self) -> None:
        p = self.params
        self._emit_pair(build_lifted_spline_dual_pair(int(p["n"]), float(p["c"]), float(p["b"]),
                                                      int(p.get("d") or 2), self._norm()))

    def _frame_build_radial(self) -> None:
        p = self.params
        profile = config_files.parse_profile_spec(p["profile"])
        matrix, file_norm = config_files.parse_matrix_spec(p["matrix"])
        norm = config_files.parse_norm(p["norm"]) if p.get("norm") else (file_norm or Norm.EUCLID)
        b = float(p["b"]) if p.get("b") is not None else None
        self._emit_pair(build_radial_dual_pair(profile, matrix, b, norm))

    def _frame_verify(self) -> None:
        pair = load_pair(self.params["pair"])
        support = pair.psi_hat.support
        spec = self.config.grid.spec
        if spec in (None, "band"):
            r0 = support.inner
            points, grid = self._band(pair.frequency_dilation, support.norm, r0)
        else:
            points, grid = parse_grid(spec, pair.dim, support.norm, self.config.grid)
        tol = float(self.params["tol"]) if self.params.get("tol") is not None else config.verify_tol
        self._add_report(verify_dual_relation(pair, points, tol, grid.describe()), self.config.csv)

        plateau = plateau_deviation(pair, points)
        self._add_report(build_report("plateau", np.zeros((1, pair.dim)), np.array([plateau]), tol,
                                      extras={"plateau_value": float(pair.certificates["plateau_value"])}))
        estimate = frame_bounds(pair.psi_hat, pair.frequency_dilation, pair.b, points, grid.describe())
        profile = square_sum_profile(pair.psi_hat, pair.frequency_dilation, pair.b, points)
        self._emit(estimate.to_keyvalue())
        sandwich = np.maximum(estimate.A_est - profile, profile - estimate.B_est)
        self._add_report(build_report("frame_sandwich", points, np.maximum(sandwich, 0.0), 1e-12,
                                      grid_spec=grid.describe()))


def load_pair(path: str) -> FrameGeneratorPair:
    """Rebuild a generator pair from its key = value file."""
    values = config_files.pair_values(path)
    kind = values["kind"]
    if kind == "spline-1d":
        return build_spline_dual_pair(config_files.parse_int(values, "n"), config_files.parse_float(values, "c"),
                                      config_files.parse_float(values, "b"))
    if kind == "spline-lifted":
        return build_lifted_spline_dual_pair(config_files.parse_int(values, "n"),
                                             config_files.parse_float(values, "c"),
                                             config_files.parse_float(values, "b"),
                                             config_files.parse_int(values, "d", 2),
                                             config_files.parse_norm(values.get("norm")))
    if kind == "radial":
        profile = config_files.parse_profile_spec(values["profile"])
        matrix = config_files.parse_matrix(values["matrix"])
        b = config_files.parse_float(values, "b") if "b" in values else None
        return build_radial_dual_pair(profile, matrix, b, config_files.parse_norm(values.get("norm")))
    raise InvalidInputError(f"Unknown pair kind {kind!r}")


def run(run_config: RunConfig, out: Optional[TextIO] = None) -> int:
    """
    Execute one command and map the outcome to an exit code.

    0 = all checks passed, 1 = some check failed, 2 = invalid input or refusal,
    3 = I/O failure.
    """
    try:
        reports = VerificationPipeline(run_config, out).run()
    except (InvalidInputError, RefusalError) as e:
        logger.error(f"{type(e).__name__}: {e}")
        return EXIT_INVALID
    except OSError as e:
        logger.error(f"I/O failure: {e}")
        return EXIT_IO
    except PartitionOfUnityError as e:
        logger.error(f"Check failed: {e}")
        return EXIT_CHECK_FAILED
    failed = [r.check_name for r in reports if not r.passed]
    if failed:
        logger.warning(f"Failed checks: {', '.join(failed)}")
        return EXIT_CHECK_FAILED
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Scaling partitions of unity, geometric-knot splines and dual frames")
    parser.add_argument("--output", help="Write the key-value output to this file instead of stdout")
    parser.add_argument("--csv", help="Write per-sample data as CSV to this file")
    parser.add_argument("--grid", help="Grid spec: band, log:lo:hi:n or [lin:]lo:hi:n")
    parser.add_argument("--n-radii", type=int, default=config.grid_n_radii, help="Radii per band grid")
    parser.add_argument("--n-directions", type=int, default=config.grid_n_directions, help="Directions per grid")
    parser.add_argument("--seed", type=lambda s: int(s, 0), default=config.grid_seed, help="Grid seed")
    parser.add_argument("--j-abs-max", type=int, default=None, help="Cap on |j| in dilation sums")
    parser.add_argument("--progress", action="store_true", help="Show progress bars on stderr")
    commands = parser.add_subparsers(dest="command", required=True)

    # --grid is also accepted after the subcommand; that value wins over the global one
    grid_parent = argparse.ArgumentParser(add_help=False)
    grid_parent.add_argument("--grid", dest="sub_grid", help="Grid spec: band, log:lo:hi:n or [lin:]lo:hi:n")

    def system_options(p):
        p.add_argument("--profile", help="Profile file or built-in spec (gaussian, exp-abs, plateau-linear:R1,R, step:R, raised-cosine:W)")
        p.add_argument("--matrix", help="Matrix file or inline JSON")
        p.add_argument("--norm", choices=[n.value for n in Norm], default=None)
        p.add_argument("--spline-n", type=int, help="Use the normalized spline partition h_n / Q_{n-1}")
        p.add_argument("-c", type=float, help="Knot ratio for --spline-n")
        p.add_argument("-d", type=int, default=1, help="Dimension of the radially lifted spline partition")

    pou = commands.add_parser("pou").add_subparsers(dest="subcommand", required=True)
    p = pou.add_parser("build")
    system_options(p)
    p.add_argument("--nonnegative", action="store_true", help="Require the nonnegativity guarantee")
    p = pou.add_parser("verify", parents=[grid_parent])
    system_options(p)
    p.add_argument("--samples", type=int, default=None, help="Radii in the default log grid")
    p.add_argument("--band-only", action="store_true", help="Sample one scale band only")
    p.add_argument("--tol", type=float, default=None)

    transform = commands.add_parser("transform").add_subparsers(dest="subcommand", required=True)
    for name in ("eval", "verify"):
        p = transform.add_parser(name, parents=[grid_parent])
        p.add_argument("--f", required=True, help="Built-in profile spec or spline reference h<n>")
        p.add_argument("--c", "-c", type=float, required=True)
        if name == "verify":
            p.add_argument("--norm", choices=[n.value for n in Norm], default=None)
            p.add_argument("-d", type=int, default=1)
            p.add_argument("--samples", type=int, default=None)
            p.add_argument("--tol", type=float, default=None)

    spline = commands.add_parser("spline").add_subparsers(dest="subcommand", required=True)
    p = spline.add_parser("build", parents=[grid_parent])
    p.add_argument("-n", type=int, required=True)
    p.add_argument("-c", type=float, required=True)
    p.add_argument("--emit", choices=["pieces", "csv"], default="pieces")
    p = spline.add_parser("check", parents=[grid_parent])
    p.add_argument("-n", type=int, required=True)
    p.add_argument("-c", type=float, required=True)
    p.add_argument("--samples", type=int, default=None)

    frame = commands.add_parser("frame").add_subparsers(dest="subcommand", required=True)
    for name in ("build-1d", "build-lifted"):
        p = frame.add_parser(name)
        p.add_argument("-n", type=int, required=True)
        p.add_argument("-c", type=float, required=True)
        p.add_argument("-b", type=float, required=True)
        if name == "build-lifted":
            p.add_argument("-d", type=int, default=2)
            p.add_argument("--norm", choices=[n.value for n in Norm], default=None)
    p = frame.add_parser("build-radial")
    p.add_argument("--profile", required=True)
    p.add_argument("--matrix", required=True)
    p.add_argument("--norm", choices=[n.value for n in Norm], default=None)
    p.add_argument("-b", type=float, default=None)
    p = frame.add_parser("verify", parents=[grid_parent])
    p.add_argument("--pair", required=True, help="Pair file written by a frame build command")
    p.add_argument("--tol", type=float, default=None)
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    reserved = {"command", "subcommand", "output", "csv", "grid", "sub_grid", "n_radii", "n_directions", "seed", "progress"}
    params = {k: v for k, v in vars(args).items() if k not in reserved and v is not None}
    if "spline_n" in params and "c" not in params:
        raise InvalidInputError("--spline-n needs -c")
    return RunConfig(
        command=args.command,
        subcommand=args.subcommand,
        params=params,
        grid=GridOptions(getattr(args, "sub_grid", None) or args.grid, args.n_radii, args.n_directions, args.seed),
        output=args.output,
        csv=args.csv,
        progress=args.progress,
    )


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    # Validate arguments
    if args.n_radii <= 0:
        parser.error("Number of radii must be positive")
    if args.n_directions <= 0:
        parser.error("Number of directions must be positive")
    if args.j_abs_max is not None and args.j_abs_max < 1:
        parser.error("--j-abs-max must be at least 1")

    try:
        run_config = config_from_args(args)
    except InvalidInputError as e:
        logger.error(str(e))
        return EXIT_INVALID
    return run(run_config)


if __name__ == "__main__":
    sys.exit(main())
