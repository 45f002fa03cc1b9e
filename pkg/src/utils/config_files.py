"""
Line-oriented key = value input files for profiles, matrices and frame pairs.

Files are read with python-dotenv; array values use JSON syntax:

    profile = plateau-linear
    R1 = 1
    R = 2
    matrix = [[2, 0], [0, 2]]
    norm = euclid
"""

from typing import Callable, Dict, Optional, Tuple
import json
import logging
import os
from dotenv import dotenv_values
from src.utils.errors import InvalidInputError
from src.utils.fields import (RadialProfile, exp_abs, gaussian, kernel_integral_profile, plateau_linear,
                             raised_cosine_kernel, step)
from src.utils.matrix import Norm, SquareMatrix

logger = logging.getLogger(__name__)


def _gaussian(values: Dict[str, str]) -> RadialProfile:
    return gaussian()


def _exp_abs(values: Dict[str, str]) -> RadialProfile:
    return exp_abs()


def _plateau_linear(values: Dict[str, str]) -> RadialProfile:
    return plateau_linear(parse_float(values, "R1"), parse_float(values, "R"))


def _step(values: Dict[str, str]) -> RadialProfile:
    return step(parse_float(values, "R"))


def _raised_cosine(values: Dict[str, str]) -> RadialProfile:
    width = parse_float(values, "width")
    if not width > 0:
        raise InvalidInputError(f"raised-cosine needs width > 0, got {width}")
    return kernel_integral_profile(raised_cosine_kernel(width), support=width, name=f"raised-cosine({width:.17g})")


BUILTIN_PROFILES: Dict[str, Callable[[Dict[str, str]], RadialProfile]] = {
    "gaussian": _gaussian,
    "exp-abs": _exp_abs,
    "plateau-linear": _plateau_linear,
    "step": _step,
    "raised-cosine": _raised_cosine,
}


def read_keyvalue(path: str) -> Dict[str, str]:
    """Read a key = value file; keys are case-sensitive and values unexpanded."""
    if not os.path.isfile(path):
        raise FileNotFoundError(f"Input file not found: {path}")
    values = {k: v for k, v in dotenv_values(path, interpolate=False).items() if v is not None}
    logger.debug(f"Read {len(values)} keys from {path}")
    return values


def parse_float(values: Dict[str, str], key: str, default: Optional[float] = None) -> float:
    if key not in values:
        if default is None:
            raise InvalidInputError(f"Missing required key '{key}'")
        return default
    try:
        return float(values[key])
    except ValueError as e:
        raise InvalidInputError(f"Key '{key}' must be a number, got {values[key]!r}") from e


def parse_int(values: Dict[str, str], key: str, default: Optional[int] = None) -> int:
    number = parse_float(values, key, None if default is None else float(default))
    if number != int(number):
        raise InvalidInputError(f"Key '{key}' must be an integer, got {values[key]!r}")
    return int(number)


def parse_norm(text: Optional[str]) -> Norm:
    if text is None:
        return Norm.EUCLID
    try:
        return Norm(text.strip().lower())
    except ValueError as e:
        raise InvalidInputError(f"Unknown norm {text!r}; expected 'euclid' or 'max'") from e


def parse_matrix(text: str) -> SquareMatrix:
    """A matrix from JSON: a nested array, or a bare number for the 1 x 1 case."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise InvalidInputError(f"Matrix is not valid JSON: {e}") from e
    if isinstance(data, (int, float)):
        data = [[data]]
    try:
        return SquareMatrix.from_rows(data)
    except (ValueError, TypeError) as e:
        if isinstance(e, InvalidInputError):
            raise
        raise InvalidInputError(f"Matrix must be a square array of numbers: {e}") from e


def profile_from_values(values: Dict[str, str]) -> RadialProfile:
    name = values.get("profile")
    if name not in BUILTIN_PROFILES:
        raise InvalidInputError(f"Unknown profile {name!r}; built-ins are {', '.join(BUILTIN_PROFILES)}")
    return BUILTIN_PROFILES[name](values)


def parse_profile_spec(spec: str) -> RadialProfile:
    """
    A profile from a file path or an inline spec such as 'plateau-linear:1,2' or 'step(1)'.

    Inline parameters are positional: R1,R for plateau-linear, R for step and width for raised-cosine.
    """
    if os.path.isfile(spec):
        return profile_from_values(read_keyvalue(spec))
    spec = spec.strip().replace("(", ":").rstrip(")")
    name, _, args = spec.partition(":")
    params = [a for a in args.split(",") if a]
    keys = {"plateau-linear": ["R1", "R"], "step": ["R"], "raised-cosine": ["width"]}.get(name, [])
    if len(params) != len(keys):
        raise InvalidInputError(f"Profile {name!r} takes {len(keys)} parameter(s), got {len(params)}")
    values = dict(zip(keys, params))
    values["profile"] = name
    return profile_from_values(values)


def parse_matrix_spec(spec: str) -> Tuple[SquareMatrix, Optional[Norm]]:
    """A matrix (and optional norm) from a file with a 'matrix' key, or inline JSON."""
    if os.path.isfile(spec):
        values = read_keyvalue(spec)
        if "matrix" not in values:
            raise InvalidInputError(f"Missing required key 'matrix' in {spec}")
        norm = parse_norm(values["norm"]) if "norm" in values else None
        return parse_matrix(values["matrix"]), norm
    return parse_matrix(spec), None


def pair_values(path: str) -> Dict[str, str]:
    values = read_keyvalue(path)
    if "kind" not in values:
        raise InvalidInputError(f"Pair file {path} has no 'kind' key")
    return values


def write_text(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(text if text.endswith("\n") else text + "\n")
    logger.info(f"Wrote {path}")
