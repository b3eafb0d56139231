"""Classical comparison methods.

General-template methods (ADMM, AMA) work on a ProblemSpec. The
feasibility methods (specialized ADMM, Douglas-Rachford, Dykstra,
Haugazeau) only need the two projectors and are measured on the dual
objective dist(x, C1) + dist(x, C2).

Dykstra, for the projection of x0 onto C1 n C2:
    y = P1(x + p);  p <- x + p - y
    x = P2(y + q);  q <- y + q - x
Haugazeau, alternating the two projectors T_n:
    x_{n+1} = Q(x0, x_n, T_n x_n)
where Q(x, y, z) projects x onto {w : <w - y, x - y> <= 0} n {w : <w - z, y - z> <= 0}.
"""

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from smoothsplit.functions import CapabilityError
from smoothsplit.gap import IterateRecord
from smoothsplit.sama import ConfigError, RunResult, is_eps_solution

FEASIBILITY_METHODS = ("admm-feas", "dr", "dykstra", "haugazeau")


@dataclass
class BaselineState:
    method: str
    k: int
    u: Optional[np.ndarray] = None
    v: Optional[np.ndarray] = None
    lam: Optional[np.ndarray] = None
    z: Optional[np.ndarray] = None
    # Dykstra corrections or the Haugazeau anchor
    aux: dict = field(default_factory=dict)
    degenerate: bool = False


def _need_orthonormal(m, which):
    if not m.is_orthonormal():
        raise CapabilityError(f"closed-form {which}-step needs an orthonormal map")


def admm_step(state, problem, rho=1.0):
    """One pass of u-minimization, v-minimization and a dual step with fixed penalty rho."""
    A, B, c = problem.A, problem.B, problem.c
    _need_orthonormal(A, "u")
    _need_orthonormal(B, "v")
    lam = state.lam
    Bv = state.aux.get("Bv")
    if Bv is None:
        Bv = B.apply(state.v)
    u = problem.g.prox(1.0 / rho, A.apply_adjoint(lam / rho - Bv + c))
    Au = A.apply(u)
    v = problem.h.prox(1.0 / rho, B.apply_adjoint(lam / rho - Au + c))
    Bv = B.apply(v)
    lam = lam - rho * (Au + Bv - c)
    return BaselineState("admm", state.k + 1, u=u, v=v, lam=lam, aux={"Bv": Bv})


def ama_step(state, problem, rho=None):
    """Gradient step on the dual through u = argmin g - <A^T lam, u>, then a penalized v-step."""
    g = problem.g
    if not g.strong_convexity > 0:
        raise ConfigError("AMA needs a strongly convex g")
    if rho is None:
        rho = g.strong_convexity / problem.normA**2
    A, B, c = problem.A, problem.B, problem.c
    _need_orthonormal(B, "v")
    lam = state.lam
    u = g.argmin_linear(A.apply_adjoint(lam))
    Au = A.apply(u)
    v = problem.h.prox(1.0 / rho, B.apply_adjoint(c - Au + lam / rho))
    lam = lam - rho * (Au + B.apply(v) - c)
    return BaselineState("ama", state.k + 1, u=u, v=v, lam=lam)


def admm_feasibility_step(state, p1, p2):
    lam, v = state.lam, state.v
    w = lam - v
    u = w - p1(w)
    w = lam - u
    v = w - p2(w)
    return BaselineState("admm-feas", state.k + 1, u=u, v=v, lam=lam - (u + v))


def dr_feasibility_step(state, p1, p2):
    """z_k = z_{k-1} + P1(2 lam_k - z_{k-1}) - lam_k, lam_{k+1} = P2(z_k).

    ``aux`` keeps the previous (z, lam) so ``dr_recover`` can rebuild u and v.
    """
    z_prev, lam = state.z, state.lam
    z = z_prev + p1(2.0 * lam - z_prev) - lam
    lam_next = p2(z)
    return BaselineState("dr", state.k + 1, lam=lam_next, z=z, aux={"z_prev": z_prev, "lam_prev": lam})


def dr_recover(state):
    """(u, v) of the matching ADMM iterate: u = lam_prev - z, v = z - lam."""
    u = state.aux["lam_prev"] - state.z
    v = state.z - state.lam
    return u, v


def dr_from_admm(v0, lam0):
    """DR state equivalent to ADMM started at (v0, lam0)."""
    return BaselineState("dr", 0, lam=np.array(lam0, dtype=float), z=np.asarray(v0) + np.asarray(lam0))


def dykstra_step(state, p1, p2):
    x, p, q = state.lam, state.aux["p"], state.aux["q"]
    y = p1(x + p)
    p = x + p - y
    x_new = p2(y + q)
    q = y + q - x_new
    return BaselineState("dykstra", state.k + 1, lam=x_new, aux={"p": p, "q": q})


def haugazeau_point(x, y, z, tol=1e-15):
    """Projection of x onto H(x, y) n H(y, z). Returns (point, degenerate flag)."""
    xy = x - y
    yz = y - z
    pi = float(xy @ yz)
    mu = float(xy @ xy)
    nu = float(yz @ yz)
    rho = mu * nu - pi * pi
    if rho <= tol * max(mu * nu, 1e-300):
        if pi >= 0:
            return np.array(z), False
        # the two half-spaces do not meet; fall back to the projection candidate
        return np.array(z), True
    if pi * nu >= rho:
        return x + (1.0 + pi / nu) * (z - y), False
    return y + (nu / rho) * (pi * xy + mu * (z - y)), False


def haugazeau_step(state, p1, p2):
    x = state.lam
    proj = p1 if state.k % 2 == 0 else p2
    nxt, degenerate = haugazeau_point(state.aux["anchor"], x, proj(x))
    return BaselineState(
        "haugazeau", state.k + 1, lam=nxt, aux={"anchor": state.aux["anchor"]}, degenerate=degenerate
    )


def feasibility_start(method, start, lam0=None):
    """Initial state for a feasibility method.

    ``start`` is the primal starting point u0. Dykstra and Haugazeau iterate
    directly on points of the sets and start at u0. ADMM takes v0 = u0 and
    lam0 (zero by default); DR uses the equivalent z = v0 + lam0.
    """
    start = np.asarray(start, dtype=float)
    lam0 = np.zeros_like(start) if lam0 is None else np.asarray(lam0, dtype=float)
    if method == "admm-feas":
        return BaselineState(method, 0, u=np.zeros_like(start), v=start.copy(), lam=lam0)
    if method == "dr":
        return dr_from_admm(start, lam0)
    if method == "dykstra":
        return BaselineState(method, 0, lam=start.copy(), aux={"p": np.zeros_like(start), "q": np.zeros_like(start)})
    if method == "haugazeau":
        return BaselineState(method, 0, lam=start.copy(), aux={"anchor": start.copy()})
    raise ConfigError(f"unknown feasibility method {method!r}; choose from {FEASIBILITY_METHODS}")


_FEAS_STEPS = {
    "admm-feas": admm_feasibility_step,
    "dr": dr_feasibility_step,
    "dykstra": dykstra_step,
    "haugazeau": haugazeau_step,
}


def _record(problem, k, u, v, lam, d_star, t0, primal=True):
    # point methods (Dykstra, Haugazeau) carry no (u, v) pair
    feas = None
    if u is not None:
        feas = float(np.linalg.norm(problem.A.apply(u) + problem.B.apply(v) - problem.c))
    f = None
    if primal and problem.reference is not None and u is not None:
        f = problem.objective(u, v) - problem.reference.f_star
    dual = None if d_star is None else problem.dual(lam) - d_star
    rec = IterateRecord(k, f, feas, dual)
    rec.wall_time_ns = time.perf_counter_ns() - t0
    return rec


def _drive(problem, state, step, max_iters, eps, thin, d_star, primal=True):
    trace = []
    degenerate = 0
    converged = False
    t0 = time.perf_counter_ns()
    for k in range(1, max_iters + 1):
        state = step(state)
        degenerate += state.degenerate
        keep = (k - 1) % thin == 0 or k == max_iters
        if not keep and eps is None:
            continue
        u, v = (dr_recover(state) if state.method == "dr" else (state.u, state.v))
        rec = _record(problem, k, u, v, state.lam, d_star, t0, primal)
        if keep:
            trace.append(rec)
        if eps is not None and is_eps_solution(rec, eps):
            converged = True
            if not keep:
                trace.append(rec)
            break
    res = RunResult(state, trace, converged=converged)
    res.degenerate_steps = degenerate
    return res


def run_feasibility(problem, method, max_iters, start=None, lam0=None, thin=1, eps=None):
    """Run a projection method on an instance with projectors; records k = 1..max_iters.

    With ``eps`` set the run stops at the first eps-solution.
    """
    if problem.projectors is None:
        raise CapabilityError("feasibility methods need an instance with projectors")
    if method not in _FEAS_STEPS:
        raise ConfigError(f"unknown feasibility method {method!r}; choose from {FEASIBILITY_METHODS}")
    p1, p2 = problem.projectors
    start = np.ones(problem.A.in_dim) if start is None else start
    state = feasibility_start(method, start, lam0)
    step = _FEAS_STEPS[method]
    return _drive(problem, state, lambda s: step(s, p1, p2), max_iters, eps, thin, problem.reference_dual())


def run_general(problem, method, max_iters, rho=None, lam0=None, v0=None, thin=1, eps=None):
    """ADMM or AMA on a general instance, recording residuals against the reference."""
    step = {"admm": admm_step, "ama": ama_step}.get(method)
    if step is None:
        raise ConfigError(f"unknown method {method!r}")
    if method == "ama" and not problem.g.strong_convexity > 0:
        raise ConfigError("AMA needs a strongly convex g")
    if rho is None and method == "admm":
        rho = 1.0
    state = BaselineState(
        method,
        0,
        u=np.zeros(problem.A.in_dim),
        v=np.zeros(problem.B.in_dim) if v0 is None else np.asarray(v0, dtype=float),
        lam=np.zeros(problem.A.out_dim) if lam0 is None else np.asarray(lam0, dtype=float),
    )
    ref = problem.reference
    has_dual = ref is not None and (problem.dual_objective is not None or problem.has_conjugates)
    d_star = problem.reference_dual() if has_dual else None
    return _drive(problem, state, lambda s: step(s, problem, rho), max_iters, eps, thin, d_star)
