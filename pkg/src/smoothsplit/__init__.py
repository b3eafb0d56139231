"""Smoothing alternating-direction solvers with per-iteration bound checks."""

from smoothsplit.operators import LinearMap, operator_norm
from smoothsplit.problems import (
    ProblemSpec,
    ReferenceSolution,
    build_box_lp,
    build_composite,
    build_feasibility_instance,
    build_strongly_convex_qp,
)
from smoothsplit.sama import SamaConfig, sama_run
from smoothsplit.sadmm import SadmmConfig, sadmm_run

__all__ = [
    "LinearMap",
    "operator_norm",
    "ProblemSpec",
    "ReferenceSolution",
    "build_box_lp",
    "build_composite",
    "build_feasibility_instance",
    "build_strongly_convex_qp",
    "SamaConfig",
    "sama_run",
    "SadmmConfig",
    "sadmm_run",
]
