"""Moments, tails and concentration bounds for heavy-tailed variables and their chaos."""

from __future__ import annotations

from . import certificates, chaos, constructions, errors, io, mc_harness, tails_core, transforms
from .errors import (
    ConstructionError,
    DataError,
    DescriptorError,
    DomainError,
    HeavyTailsError,
    HypothesisError,
    InfiniteMomentError,
    InvariantViolation,
    PreconditionError,
    ProfileError,
    QuadratureError,
    TheoremViolation,
)
from .tails_core import ParetoSpec, TailFunction, inverse_tail, pareto_moment, pareto_tail, sample

__version__ = "0.1.0"

__all__ = [
    "certificates",
    "chaos",
    "constructions",
    "errors",
    "io",
    "mc_harness",
    "tails_core",
    "transforms",
    "ParetoSpec",
    "TailFunction",
    "inverse_tail",
    "pareto_moment",
    "pareto_tail",
    "sample",
    "ConstructionError",
    "DataError",
    "DescriptorError",
    "DomainError",
    "HeavyTailsError",
    "HypothesisError",
    "InfiniteMomentError",
    "InvariantViolation",
    "PreconditionError",
    "ProfileError",
    "QuadratureError",
    "TheoremViolation",
]
