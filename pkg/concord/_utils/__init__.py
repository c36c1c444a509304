from numbers import Integral, Real
from pathlib import Path
from typing import Union

import numpy as np

from .._errors import InvalidInputError, MissingPathError


def check_type(var_name: str, var: object, expected_type: Union[type, object]) -> None:
    """Raise ``TypeError`` unless ``var`` is an instance of ``expected_type``.

    ``expected_type`` is a class, a tuple of classes, or an ``Optional[...]``/``Union[...]`` of classes. Booleans are
    refused where a number is expected.
    """
    members = getattr(expected_type, "__args__", None) if hasattr(expected_type, "__origin__") else None
    if members is not None:
        type_expected = members
        names = [t.__name__ for t in members]
        type_name = names[0] if len(names) == 1 else ", ".join(names[:-1]) + f" or {names[-1]}"
    else:
        type_expected = expected_type
        type_name = getattr(type_expected, "__name__", str(type_expected))

    # bool is an Integral, but never a sensible count or real-valued parameter.
    if isinstance(var, (bool, np.bool_)) and type_expected in (Integral, Real):
        raise TypeError(f"Variable {var_name} is of type {type(var).__name__}; expected {type_name}.")

    if not isinstance(var, type_expected):
        raise TypeError(f"Variable {var_name} is of type {type(var).__name__}; expected {type_name}.")


def check_exists(path: Union[str, Path], name: str, file: bool = True):
    """Raise ``MissingPathError`` unless ``path`` is an existing file (or directory, with ``file=False``)."""
    p = Path(path)
    is_not_file = file and not p.is_file()
    if not p.exists() or is_not_file:
        kind = "file" if file else "directory"
        raise MissingPathError(f"{name} not found at {str(p.absolute())} (expected a {kind}).")


def check_sanity_int(var_name: str, var: int):
    """A simple sanity checker for count-like integer variables. Must be integer and > 0."""
    check_type(var_name, var, Integral)
    if var < 1:
        raise InvalidInputError(f"{var_name} must be greater than 0. Received {var_name} = {var}.")


def check_non_negative_int(var_name: str, var: int):
    check_type(var_name, var, Integral)
    if var < 0:
        raise InvalidInputError(f"{var_name} must be non-negative. Received {var_name} = {var}.")


def check_real(var_name: str, var: float):
    """Must be a finite real number."""
    check_type(var_name, var, Real)
    if not np.isfinite(var):
        raise InvalidInputError(f"{var_name} must be finite. Received {var_name} = {var}.")


def check_positive(var_name: str, var: float):
    check_real(var_name, var)
    if var <= 0:
        raise InvalidInputError(f"{var_name} must be strictly positive. Received {var_name} = {var}.")


def check_non_negative(var_name: str, var: float):
    check_real(var_name, var)
    if var < 0:
        raise InvalidInputError(f"{var_name} must be non-negative. Received {var_name} = {var}.")


def check_probability(var_name: str, var: float, open_interval: bool = False):
    """Must lie in [0, 1], or (0, 1) when ``open_interval`` is set."""
    check_real(var_name, var)
    if open_interval and not 0 < var < 1:
        raise InvalidInputError(f"{var_name} must lie strictly between 0 and 1. Received {var_name} = {var}.")
    if not 0 <= var <= 1:
        raise InvalidInputError(f"{var_name} must lie between 0 and 1. Received {var_name} = {var}.")


def check_seed(var_name: str, var: int):
    """Seeds are unsigned 64-bit integers."""
    check_type(var_name, var, Integral)
    if not 0 <= var < 2 ** 64:
        raise InvalidInputError(f"{var_name} must be an unsigned 64-bit integer. Received {var_name} = {var}.")
