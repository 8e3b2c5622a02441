"""Nonlocal elliptic solver with oblique boundary conditions."""

from ._core import (
    Config,
    Domain,
    Error,
    evaluate,
    flow,
    fractional_constant,
    run,
    simulate_value,
    solve,
    validate,
)

__all__ = [
    "Config",
    "Domain",
    "Error",
    "evaluate",
    "flow",
    "fractional_constant",
    "run",
    "simulate_value",
    "solve",
    "validate",
]
