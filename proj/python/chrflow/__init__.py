"""Cahn-Hilliard reaction solvers and fractional Sobolev tools."""

from ._core import (
    ConfigError,
    DomainError,
    InvalidArgument,
    RangeError,
    SolverError,
    besov_bound,
    gagliardo_seminorm,
    manufactured_error,
    reference_equilibrium,
    resolve_config,
    run,
    run_criterion,
    verify,
)

__all__ = [
    "ConfigError",
    "DomainError",
    "InvalidArgument",
    "RangeError",
    "SolverError",
    "besov_bound",
    "gagliardo_seminorm",
    "manufactured_error",
    "reference_equilibrium",
    "resolve_config",
    "run",
    "run_criterion",
    "verify",
]
