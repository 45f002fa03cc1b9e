from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence
import logging
import numpy as np

logger = logging.getLogger(__name__)


@dataclass
class VerificationReport:
    """
    Outcome of one sampled check.

    passed is derived from max_deviation <= tolerance; per-sample columns are kept
    so the pipeline can emit them as CSV.
    """

    check_name: str
    max_deviation: float
    argmax_point: Optional[Sequence[float]]
    tolerance: float
    route_notes: List[str] = field(default_factory=list)
    grid_spec: str = ""
    extras: Dict[str, object] = field(default_factory=dict)
    columns: Dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return bool(self.max_deviation <= self.tolerance)

    def to_keyvalue(self) -> str:
        point = "none" if self.argmax_point is None else " ".join(f"{x:.17g}" for x in self.argmax_point)
        lines = [
            f"check = {self.check_name}",
            f"passed = {str(self.passed).lower()}",
            f"max_deviation = {self.max_deviation:.17g}",
            f"tolerance = {self.tolerance:.17g}",
            f"argmax_point = {point}",
        ]
        if self.grid_spec:
            lines.append(f"grid = {self.grid_spec}")
        for key, value in self.extras.items():
            if isinstance(value, float):
                value = f"{value:.17g}"
            lines.append(f"{key} = {value}")
        for note in self.route_notes:
            lines.append(f"route = {note}")
        return "\n".join(lines)


def build_report(check_name: str, points: np.ndarray, deviations: np.ndarray, tolerance: float,
                 **kwargs) -> VerificationReport:
    """Assemble a report from per-sample deviations, locating the worst sample."""
    deviations = np.asarray(deviations, dtype=float)
    if deviations.size == 0:
        return VerificationReport(check_name, 0.0, None, tolerance, **kwargs)
    worst = int(np.argmax(deviations))
    report = VerificationReport(
        check_name=check_name,
        max_deviation=float(deviations[worst]),
        argmax_point=np.atleast_2d(points)[worst].tolist(),
        tolerance=tolerance,
        **kwargs,
    )
    level = logging.INFO if report.passed else logging.WARNING
    logger.log(level, f"{check_name}: max deviation {report.max_deviation:.3e} (tol {tolerance:.1e})")
    return report


def write_csv(path: str, columns: Dict[str, np.ndarray]) -> None:
    """Write equal-length columns with a header row; floats use 17 significant digits."""
    names = list(columns)
    data = np.column_stack([np.real(np.asarray(columns[name])).astype(float) for name in names])
    np.savetxt(path, data, fmt="%.17g", delimiter=",", header=",".join(names), comments="")
    logger.info(f"Wrote {data.shape[0]} rows to {path}")
