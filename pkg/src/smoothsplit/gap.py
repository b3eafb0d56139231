"""Smoothed conjugate, smoothed primal-dual gap and the bounds derived from it."""

import math
from dataclasses import dataclass, fields
from typing import Optional

import numpy as np

from smoothsplit.functions import INF, CapabilityError


def smoothed_conjugate(g, center, gamma, z):
    """Value and maximizer of max_u <z, u> - g(u) - gamma ||u - center||^2 / 2.

    The maximizer is prox_{g/gamma}(center + z/gamma) and equals the gradient
    of the smoothed conjugate at z.
    """
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    u = g.prox(1.0 / gamma, center + z / gamma)
    d = u - center
    gu = g.eval(u)
    return float(z @ u) - gu - 0.5 * gamma * float(d @ d), u


def smoothed_gap(problem, u, v, lam, gamma, beta):
    """G(w) = g(u) + h(v) + ||Au + Bv - c||^2/(2 beta) + g*_gamma(A^T lam) + h*(B^T lam) - <c, lam>.

    ``gamma = 0`` uses the exact conjugate of g (no smoothing). Returns +inf
    when u or v lies outside the domain; callers test ``math.isinf``.
    """
    if not problem.h.conjugate_available:
        raise CapabilityError("smoothed gap needs a conjugate evaluator for h")
    if not beta > 0:
        raise ValueError("beta must be positive")
    primal = problem.objective(u, v)
    if primal == INF:
        return INF
    r = problem.A.apply(u) + problem.B.apply(v) - problem.c
    atl = problem.A.apply_adjoint(lam)
    if gamma > 0:
        gconj = smoothed_conjugate(problem.g, problem.center, gamma, atl)[0]
    else:
        gconj = problem.g.conjugate(atl)
    hconj = problem.h.conjugate(problem.B.apply_adjoint(lam))
    return primal + float(r @ r) / (2.0 * beta) + gconj + hconj - float(problem.c @ lam)


@dataclass
class SolutionBounds:
    primal_residual_ub: float
    feasibility_ub: float
    dual_residual_ub: float
    primal_residual_lb: float
    dual_residual_ub_sharp: Optional[float] = None


def solution_bounds(S, beta, gamma, lam_star_norm, bregman_at_u_star=0.0, feasibility=None):
    """Bounds on primal residual, feasibility and dual residual from S = G + gamma b(u*).

    ``gamma`` and ``bregman_at_u_star`` are accepted for the caller's
    convenience; S must already include the gamma b(u*) term. When the
    actual feasibility gap is given, the sharper dual bound
    S - t^2/(2 beta) + ||l*|| t is reported as well.
    """
    if not beta > 0:
        raise ValueError("beta must be positive")
    sp = max(S, 0.0)
    root = math.sqrt(2.0 * beta * sp)
    feas = 2.0 * beta * lam_star_norm + root
    dual = 2.0 * beta * lam_star_norm**2 + lam_star_norm * root + S
    sharp = None
    if feasibility is not None:
        t = feasibility
        sharp = S - t * t / (2.0 * beta) + lam_star_norm * t
    return SolutionBounds(S, feas, dual, -lam_star_norm * feas, sharp)


@dataclass
class IterateRecord:
    k: int
    primal_obj_residual: Optional[float]
    feasibility_gap: float
    dual_obj_residual: Optional[float] = None
    smoothed_gap: Optional[float] = None
    bound_primal: Optional[float] = None
    bound_feas: Optional[float] = None
    bound_dual: Optional[float] = None
    gap_red_lhs: Optional[float] = None
    gap_red_rhs: Optional[float] = None
    wall_time_ns: int = 0

    CSV_HEADER = (
        "k,primal_obj_residual,feasibility_gap,dual_obj_residual,smoothed_gap,"
        "bound_primal,bound_feas,bound_dual,gap_red_lhs,gap_red_rhs,wall_time_ns"
    )

    def csv_row(self):
        out = []
        for f in fields(self):
            val = getattr(self, f.name)
            if val is None:
                out.append("")
            elif isinstance(val, float):
                out.append(repr(val))
            else:
                out.append(str(val))
        return ",".join(out)


def epsilon_solution_check(record, eps):
    """(primal ok, feasibility ok, dual ok) with None where the quantity is unknown.

    The primal test uses |f - f*| since an infeasible point can undershoot f*.
    """

    def verdict(x):
        if x is None:
            return None
        return bool(abs(x) <= eps)

    return (
        verdict(record.primal_obj_residual),
        verdict(record.feasibility_gap),
        verdict(record.dual_obj_residual),
    )


def gap_reduction_holds(lhs, rhs, g_prev, rel=1e-8):
    """lhs <= rhs up to rel * (1 + |G_k|)."""
    if lhs is None or rhs is None:
        return True
    if math.isinf(lhs) or math.isinf(rhs):
        return not (math.isinf(lhs) and not math.isinf(rhs))
    return lhs <= rhs + rel * (1.0 + abs(g_prev))


def loglog_slope(ks, values, k_min, k_max):
    """Least-squares slope of log(value) against log(k) over [k_min, k_max].

    Non-positive values cannot be placed on a log scale and are dropped;
    returns NaN when fewer than two points remain.
    """
    ks = np.asarray(ks, dtype=float)
    vals = np.asarray(values, dtype=float)
    sel = (ks >= k_min) & (ks <= k_max) & np.isfinite(vals) & (vals > 0)
    if sel.sum() < 2:
        return math.nan
    return float(np.polyfit(np.log(ks[sel]), np.log(vals[sel]), 1)[0])
