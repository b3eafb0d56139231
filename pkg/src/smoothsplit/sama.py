"""Smoothing alternating minimization (SAMA) and its strongly convex variants.

One iteration: dual extrapolation toward the auxiliary point lam*, a
smoothed u-step, a penalized v-step, a dual step, then weighted primal
averaging with weight tau_k = 3/(k+4). The u-step sign follows from the
stationarity condition of its subproblem, so u = prox_{g/gamma}(center + A^T lam / gamma).
"""

import math
import time
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from smoothsplit.functions import INF, CapabilityError
from smoothsplit.gap import (
    IterateRecord,
    epsilon_solution_check,
    gap_reduction_holds,
    smoothed_gap,
    solution_bounds,
)

VARIANTS = ("standard", "strongly_convex_rule1", "strongly_convex_rule2")
BOUND_SLACK = 1e-8


class ConfigError(ValueError):
    pass


@dataclass
class SamaConfig:
    gamma1: Optional[float] = None  # defaults to ||A||
    center: Optional[np.ndarray] = None  # defaults to the problem's center
    variant: str = "standard"
    dual_accel_mod: bool = False
    max_iters: int = 1000
    eps: float = 1e-6
    record_gap: bool = False
    stop_on_eps: bool = True
    thin: int = 1
    lam0: Optional[np.ndarray] = None
    eta0: Optional[float] = None
    beta1: Optional[float] = None
    # v_solver(lam_hat, Au, eta) -> argmin h(v) - <lam_hat, B v> + eta/2 ||Au + B v - c||^2
    v_solver: Optional[Callable] = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"variant must be one of {VARIANTS}")
        if self.gamma1 is not None and not self.gamma1 > 0:
            raise ConfigError("gamma1 must be positive")
        if self.max_iters < 1:
            raise ConfigError("max_iters must be at least 1")
        if not self.eps > 0:
            raise ConfigError("eps must be positive")
        if self.thin < 1:
            raise ConfigError("thin must be at least 1")


@dataclass
class SamaState:
    k: int
    u_bar: np.ndarray
    v_bar: np.ndarray
    lam_bar: np.ndarray
    lam_star: np.ndarray
    tau: float = 0.0
    gamma: float = 0.0  # gamma_k, the smoothness attached to this iterate
    beta: float = 0.0  # beta_k
    eta: float = 0.0


@dataclass
class RunResult:
    state: SamaState
    trace: list
    violations: list = field(default_factory=list)
    converged: bool = False

    @property
    def iterations(self):
        return self.state.k


def sama_schedule(k, gamma1, normA):
    """(tau_k, gamma_{k+1}, beta_k, eta_k)."""
    a2 = normA * normA
    tau = 3.0 / (k + 4)
    gamma_next = 5.0 * gamma1 / (k + 5)
    beta = 18.0 * a2 * (k + 5) / (5.0 * gamma1 * (k + 1) * (k + 7))
    eta = 5.0 * gamma1 / (2.0 * a2 * (k + 5))
    return tau, gamma_next, beta, eta


def sama_gamma(k, gamma1):
    return 5.0 * gamma1 / (k + 4)


def sama_sc_schedule(k, normA, mu, rule):
    """(tau_k, eta_k, beta_k) for the strongly convex variant; no smoothing."""
    if not mu > 0:
        raise ConfigError("strong convexity modulus must be positive")
    a2 = normA * normA
    tau = 3.0 / (k + 4)
    if rule in ("rule1", 1):
        return tau, mu / (2.0 * a2), 18.0 * a2 / (mu * (k + 1) * (k + 7))
    if rule in ("rule2", 2):
        return tau, mu * tau / a2, 2.0 * a2 / (mu * (k + 1))
    raise ConfigError(f"unknown rule {rule!r}")


def _at_least(lhs, rhs, rtol=1e-12):
    return lhs >= rhs - rtol * np.abs(rhs)


def sama_conditions(k_max, gamma1=1.0, normA=1.0, L_b=1.0):
    """Evaluate the four schedule conditions for k = 1..k_max.

    Returns a list of (name, ok_array) pairs; the last condition is an
    equality and is tested with relative tolerance 1e-12.
    """
    k = np.arange(1, k_max + 1, dtype=float)
    a2 = normA * normA
    tau = 3.0 / (k + 4)
    g_k = 5.0 * gamma1 / (k + 4)
    g_next = 5.0 * gamma1 / (k + 5)
    beta = 18.0 * a2 * (k + 5) / (5.0 * gamma1 * (k + 1) * (k + 7))
    beta_next = 18.0 * a2 * (k + 6) / (5.0 * gamma1 * (k + 2) * (k + 8))
    eta = 5.0 * gamma1 / (2.0 * a2 * (k + 5))
    return [
        ("(1 + tau/L_b) gamma_{k+1} >= gamma_k", _at_least((1 + tau / L_b) * g_next, g_k)),
        ("beta_{k+1} >= (1 - tau) beta_k", _at_least(beta_next, (1 - tau) * beta)),
        ("(1 - tau^2) gamma_{k+1} beta_k >= 2 ||A||^2 tau^2", _at_least((1 - tau**2) * g_next * beta, 2 * a2 * tau**2)),
        ("2 ||A||^2 eta_k = gamma_{k+1}", np.isclose(2 * a2 * eta, g_next, rtol=1e-12, atol=0)),
    ]


def sama_sc_conditions(k_max, mu=1.0, normA=1.0, rule="rule2"):
    k = np.arange(1, k_max + 1, dtype=float)
    a2 = normA * normA
    tau, eta, beta = sama_sc_schedule(k, normA, mu, rule)
    _, _, beta_next = sama_sc_schedule(k + 1, normA, mu, rule)
    eta = np.broadcast_to(eta, k.shape)
    lhs = eta * (1.5 + tau - a2 * eta / mu)
    rhs = tau**2 / ((1 - tau) * beta)
    return [
        ("beta_{k+1} >= (1 - tau) beta_k", _at_least(beta_next, (1 - tau) * beta)),
        ("eta (3/2 + tau - ||A||^2 eta / mu) >= tau^2 / ((1 - tau) beta)", _at_least(lhs, rhs)),
    ]


def first_violation(conditions):
    """(condition name, k) of the earliest failure, or None."""
    first = None
    for name, ok in conditions:
        bad = np.flatnonzero(~np.asarray(ok))
        if bad.size and (first is None or bad[0] + 1 < first[1]):
            first = (name, int(bad[0]) + 1)
    return first


def sama_bounds(k, gamma1, normA, D, X, lam_norm):
    """Right-hand sides for primal residual, feasibility and dual residual.

    X = ||center - u*||^2 / 2 and D = D_f.
    """
    a2 = normA * normA
    primal = 5.0 * gamma1 / (k + 4) * (X + 9.0 * D * D / (8.0 * a2 * (k + 3)))
    root = math.sqrt(X + 9.0 * D * D / (8.0 * a2 * (k + 7)))
    feas = 36.0 * a2 * lam_norm / (5.0 * gamma1 * (k + 1)) + 6.0 * normA / (k + 1) * root
    dual = (
        36.0 * a2 * lam_norm**2 / (5.0 * gamma1 * (k + 1))
        + 6.0 * normA * lam_norm / (k + 1) * root
        + primal
    )
    return primal, feas, dual


def sc_gap_bound(k, mu, normA, D, rule):
    """Upper bound on G_beta(w_k) accumulated from the per-step reduction."""
    a2 = normA * normA
    if rule in ("rule1", 1):
        return 9.0 * mu * D * D / (16.0 * a2 * (k + 3))
    return 27.0 * mu * D * D / (4.0 * a2 * (k + 3) ** 2)


def sc_bounds(k, mu, normA, D, lam_norm, rule):
    """Primal residual and feasibility bounds for the strongly convex rules.

    The dual bound is not stated for these rules; it is filled in from the
    generic S-to-dual estimate with S bounded by ``sc_gap_bound``.
    """
    a2 = normA * normA
    S = sc_gap_bound(k, mu, normA, D, rule)
    if rule in ("rule1", 1):
        feas = 36.0 * a2 * lam_norm / (mu * (k + 1) * (k + 7)) + 9.0 * D / (
            2.0 * math.sqrt((k + 1) * (k + 3) * (k + 7))
        )
    else:
        feas = 4.0 * a2 * lam_norm / (mu * (k + 1)) + 3.0 * math.sqrt(3.0) * D / (
            (k + 3) * math.sqrt(k + 1)
        )
    _, _, beta = sama_sc_schedule(k, normA, mu, rule)
    dual = solution_bounds(S, beta, 0.0, lam_norm).dual_residual_ub
    return S, feas, dual


def primal_dual_guarantee(k, mu, normA, D):
    """Bound on G(w_k) + ||A u + B v - c||^2 / (2 beta_k), valid for both rules."""
    return 9.0 * mu * D * D / (16.0 * normA * normA * (k + 3))


def _rule(variant):
    return "rule1" if variant.endswith("rule1") else "rule2"


def _resolve(problem, config):
    normA = problem.normA
    gamma1 = normA if config.gamma1 is None else config.gamma1
    center = problem.center if config.center is None else np.asarray(config.center, dtype=float)
    return normA, gamma1, center


def _v_step(problem, config, lam_hat, Au, eta):
    B = problem.B
    if config.v_solver is not None:
        return config.v_solver(lam_hat, Au, eta)
    if not B.is_orthonormal():
        raise CapabilityError("closed-form v-step needs B^T B = I; pass v_solver")
    return problem.h.prox(1.0 / eta, B.apply_adjoint(problem.c - Au + lam_hat / eta))


def _first_iterate(problem, config, lam0, eta0, u1):
    Au = problem.A.apply(u1)
    v1 = _v_step(problem, config, lam0, Au, eta0)
    r = Au + problem.B.apply(v1) - problem.c
    return v1, lam0 - eta0 * r, r


def sama_init(problem, config, lam0=None, eta0=None, beta1=None):
    normA, gamma1, center = _resolve(problem, config)
    a2 = normA * normA
    lam0 = _lam0(problem, config, lam0)
    if config.variant != "standard":
        return sama_sc_init(problem, config, lam0)
    eta0 = config.eta0 if eta0 is None else eta0
    beta1 = config.beta1 if beta1 is None else beta1
    explicit = eta0 is not None or beta1 is not None
    eta0 = gamma1 / (2.0 * a2) if eta0 is None else eta0
    beta1 = 27.0 * a2 / (20.0 * gamma1) if beta1 is None else beta1
    if explicit:
        check_init_condition(gamma1, eta0, beta1, normA)
    u1 = problem.g.prox(1.0 / gamma1, center + problem.A.apply_adjoint(lam0) / gamma1)
    v1, lam1, r = _first_iterate(problem, config, lam0, eta0, u1)
    return SamaState(1, u1, v1, lam1, -r / beta1, gamma=gamma1, beta=beta1, eta=eta0)


def check_init_condition(gamma1, eta0, beta1, normA):
    """Sufficient condition on (gamma1, eta0, beta1) for the initial gap estimate."""
    a2 = normA * normA
    if not 5.0 * gamma1 > 2.0 * eta0 * a2:
        raise ConfigError("initialization needs 5 gamma1 > 2 eta0 ||A||^2")
    need = 2.0 * gamma1 / ((5.0 * gamma1 - 2.0 * eta0 * a2) * eta0)
    if beta1 < need * (1 - 1e-12):
        raise ConfigError(
            f"initialization needs beta1 >= 2 gamma1 / ((5 gamma1 - 2 eta0 ||A||^2) eta0) = {need}"
        )


def _lam0(problem, config, lam0):
    if lam0 is None:
        lam0 = config.lam0
    if lam0 is None:
        return np.zeros(problem.A.out_dim)
    return np.asarray(lam0, dtype=float)


def sama_sc_init(problem, config, lam0=None):
    """First iterate with u1 = argmin g(u) - <A^T lam0, u>."""
    mu = problem.g.strong_convexity
    if not mu > 0:
        raise ConfigError("strongly convex variants need a strongly convex g")
    normA = problem.normA
    rule = _rule(config.variant)
    lam0 = _lam0(problem, config, lam0)
    a2 = normA * normA
    eta0 = mu / (2.0 * a2) if rule == "rule1" else 3.0 * mu / (4.0 * a2)
    _, _, beta1 = sama_sc_schedule(1, normA, mu, rule)
    u1 = problem.g.argmin_linear(problem.A.apply_adjoint(lam0))
    v1, lam1, r = _first_iterate(problem, config, lam0, eta0, u1)
    return SamaState(1, u1, v1, lam1, -r / beta1, gamma=0.0, beta=beta1, eta=eta0)


def sama_step(state, problem, config):
    k = state.k
    normA, gamma1, center = _resolve(problem, config)
    A = problem.A
    if config.variant == "standard":
        tau, gamma_next, _, eta = sama_schedule(k, gamma1, normA)
        beta_next = sama_schedule(k + 1, gamma1, normA)[2]
    else:
        mu = problem.g.strong_convexity
        tau, eta, _ = sama_sc_schedule(k, normA, mu, _rule(config.variant))
        beta_next = sama_sc_schedule(k + 1, normA, mu, _rule(config.variant))[2]
        gamma_next = 0.0
    lam_hat = (1.0 - tau) * state.lam_bar + tau * state.lam_star
    atl = A.apply_adjoint(lam_hat)
    if config.variant != "standard":
        u_hat = problem.g.argmin_linear(atl)
    else:
        u_hat = problem.g.prox(1.0 / gamma_next, center + atl / gamma_next)
    Au = A.apply(u_hat)
    v_hat = _v_step(problem, config, lam_hat, Au, eta)
    lam_bar = lam_hat - eta * (Au + problem.B.apply(v_hat) - problem.c)
    if config.dual_accel_mod:
        lam_star = state.lam_star + (lam_bar - lam_hat) / tau
    else:
        # state.beta * lam* equals c - A u_bar - B v_bar, so this keeps the identity exact
        lam_star = ((1.0 - tau) * state.beta * state.lam_star + (tau / eta) * (lam_bar - lam_hat)) / beta_next
    return SamaState(
        k + 1,
        (1.0 - tau) * state.u_bar + tau * u_hat,
        (1.0 - tau) * state.v_bar + tau * v_hat,
        lam_bar,
        lam_star,
        tau=tau,
        gamma=gamma_next,
        beta=beta_next,
        eta=eta,
    )


class _Tracker:
    """Per-iterate metrics, bound values and gap-reduction bookkeeping."""

    def __init__(self, problem, config, algo, bounds_fn, extra_fn, gamma1):
        self.problem = problem
        self.config = config
        self.algo = algo
        self.bounds_fn = bounds_fn
        self.extra_fn = extra_fn
        self.gamma1 = gamma1
        self.ref = problem.reference
        self.has_dual = problem.dual_objective is not None or problem.has_conjugates
        self.gap_ok = config.record_gap and problem.has_conjugates
        self.prev_gap = None
        self.prev_state = None
        self.t0 = time.perf_counter_ns()
        self.violations = []

    def record(self, state):
        p = self.problem
        _, feas = _residual(p, state.u_bar, state.v_bar)
        primal = dual = None
        if self.ref is not None:
            f = p.objective(state.u_bar, state.v_bar)
            primal = INF if f == INF else f - self.ref.f_star
        if self.has_dual and self.ref is not None:
            dual = p.dual(state.lam_bar) - p.reference_dual()
        rec = IterateRecord(state.k, primal, feas, dual)
        if self.gap_ok:
            G = smoothed_gap(p, state.u_bar, state.v_bar, state.lam_bar, state.gamma, state.beta)
            rec.smoothed_gap = G
            if self.prev_gap is not None:
                prev = self.prev_state
                rec.gap_red_lhs = G
                rec.gap_red_rhs = (1.0 - state.tau) * self.prev_gap + self.extra_fn(prev.k, state)
                if not gap_reduction_holds(G, rec.gap_red_rhs, self.prev_gap):
                    self.violations.append(("gap_reduction", state.k, G, rec.gap_red_rhs))
            self.prev_gap = G
        self.prev_state = state
        if self.ref is not None and self.ref.lam_star is not None and p.D_f is not None:
            bp, bf, bd = self.bounds_fn(state.k)
            rec.bound_primal, rec.bound_feas, rec.bound_dual = bp, bf, bd
            self._check("bound_primal", state.k, primal, bp)
            self._check("bound_feas", state.k, feas, bf)
            self._check("bound_dual", state.k, dual, bd)
            lam_norm = float(np.linalg.norm(self.ref.lam_star))
            if primal is not None and primal < -lam_norm * feas - 1e-9:
                self.violations.append(("lower_bound", state.k, primal, -lam_norm * feas))
        rec.wall_time_ns = time.perf_counter_ns() - self.t0
        return rec

    def _check(self, name, k, value, bound):
        if value is None or bound is None:
            return
        if not value <= bound + BOUND_SLACK * (1.0 + abs(bound)):
            self.violations.append((name, k, value, bound))


def _residual(problem, u, v):
    r = problem.A.apply(u) + problem.B.apply(v) - problem.c
    return r, float(np.linalg.norm(r))


def run_scheme(problem, config, init, step, bounds_fn, extra_fn, algo, callback=None):
    """Shared driver: iterate, record, check bounds and stop on an eps-solution."""
    normA, gamma1, _ = _resolve(problem, config)
    lam0 = _lam0(problem, config, None)
    if np.any(lam0 != 0) and problem.reference is not None:
        warnings.warn("bound checks assume a zero initial dual point", stacklevel=3)
    tracker = _Tracker(problem, config, algo, bounds_fn, extra_fn, gamma1)
    state = init()
    trace = []
    converged = False
    while True:
        rec = tracker.record(state)
        if callback is not None:
            callback(state, rec)
        if (state.k - 1) % config.thin == 0 or state.k == config.max_iters:
            trace.append(rec)
        if config.stop_on_eps and is_eps_solution(rec, config.eps):
            converged = True
            if trace[-1] is not rec:
                trace.append(rec)
            break
        if state.k >= config.max_iters:
            break
        state = step(state)
    return RunResult(state, trace, tracker.violations, converged)


def is_eps_solution(rec, eps):
    verdicts = [v for v in epsilon_solution_check(rec, eps) if v is not None]
    return bool(verdicts) and all(verdicts)


def sama_run(problem, config, callback=None):
    normA, gamma1, center = _resolve(problem, config)
    D = problem.D_f
    ref = problem.reference
    standard = config.variant == "standard"
    if not standard and not problem.g.strong_convexity > 0:
        raise ConfigError("strongly convex variants need a strongly convex g")
    rule = _rule(config.variant)
    mu = problem.g.strong_convexity

    def bounds_fn(k):
        lam_norm = float(np.linalg.norm(ref.lam_star))
        if standard:
            X = 0.5 * float(np.sum((center - ref.u_star) ** 2))
            return sama_bounds(k, gamma1, normA, D, X, lam_norm)
        return sc_bounds(k, mu, normA, D, lam_norm, rule)

    def extra_fn(k, new_state):
        # additive term of the per-step gap reduction, evaluated with step-k parameters
        if D is None:
            return math.inf
        return new_state.eta * new_state.tau**2 * D * D / 4.0

    return run_scheme(
        problem,
        config,
        lambda: sama_init(problem, config),
        lambda s: sama_step(s, problem, config),
        bounds_fn,
        extra_fn,
        "sama" if standard else config.variant,
        callback,
    )


def direct_lam_star(problem, state):
    """lam*_k computed from its definition (c - A u_bar - B v_bar) / beta_k."""
    r = problem.c - problem.A.apply(state.u_bar) - problem.B.apply(state.v_bar)
    return r / state.beta
