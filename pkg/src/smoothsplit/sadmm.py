"""Smoothing ADMM (SADMM).

Same outer structure as SAMA, but the u-step also carries an augmented
term (rho_k/2)||A u + B v_hat_k - c||^2 built from the previous v_hat.

The beta_k used here is 12||A||^2 (k+3) / (gamma1 (k+1)(k+10)), the value
that makes (1 - tau)(1 + 2 tau) eta beta >= 2 tau^2 hold with equality.
``paper_beta=True`` switches to half of that for comparison runs; that
value fails the inequality at every k.
"""

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from smoothsplit.functions import CapabilityError
from smoothsplit.gap import solution_bounds
from smoothsplit.sama import (
    ConfigError,
    SamaConfig,
    SamaState,
    _at_least,
    _first_iterate,
    _lam0,
    _resolve,
    _v_step,
    check_init_condition,
    run_scheme,
)


@dataclass
class SadmmConfig(SamaConfig):
    paper_beta: bool = False
    # u_solver(lam_hat, Bv_prev, rho, gamma) -> argmin of the augmented u-subproblem
    u_solver: Optional[Callable] = None

    def __post_init__(self):
        super().__post_init__()
        if self.variant != "standard":
            raise ConfigError("SADMM has no strongly convex variant")


@dataclass
class SadmmState(SamaState):
    v_hat: Optional[np.ndarray] = None
    Bv_hat: Optional[np.ndarray] = None
    rho: float = 0.0


def sadmm_schedule(k, gamma1, normA, paper_beta=False):
    """(tau_k, gamma_{k+1}, beta_k, eta_k, rho_k)."""
    a2 = normA * normA
    tau = 3.0 / (k + 4)
    gamma_next = 3.0 * gamma1 / (k + 3)
    eta = 3.0 * gamma1 / (2.0 * a2 * (k + 3))
    rho = 9.0 * gamma1 / (2.0 * a2 * (k + 3) * (k + 4))
    scale = 6.0 if paper_beta else 12.0
    beta = scale * a2 * (k + 3) / (gamma1 * (k + 1) * (k + 10))
    return tau, gamma_next, beta, eta, rho


def sadmm_gamma(k, gamma1):
    return 3.0 * gamma1 / (k + 2)


def sadmm_conditions(k_max, gamma1=1.0, normA=1.0, paper_beta=False, L_b=1.0):
    k = np.arange(1, k_max + 1, dtype=float)
    a2 = normA * normA
    tau, g_next, beta, eta, rho = sadmm_schedule(k, gamma1, normA, paper_beta)
    beta_next = sadmm_schedule(k + 1, gamma1, normA, paper_beta)[2]
    g_k = sadmm_gamma(k, gamma1)
    return [
        ("(1 - tau)(1 + 2 tau) eta beta >= 2 tau^2", _at_least((1 - tau) * (1 + 2 * tau) * eta * beta, 2 * tau**2)),
        ("gamma_{k+1} >= (3 - 2 tau)/(3 - (2 - 1/L_b) tau) gamma_k", _at_least(g_next, (3 - 2 * tau) / (3 - (2 - 1 / L_b) * tau) * g_k)),
        ("beta_{k+1} >= (1 - tau) beta_k", _at_least(beta_next, (1 - tau) * beta)),
        ("gamma_{k+1} >= ||A||^2 (eta + rho/tau)", _at_least(g_next, a2 * (eta + rho / tau))),
    ]


def sadmm_gap_bound(k, gamma1, normA, D):
    """Envelope of G_k obtained by unrolling the per-step reduction from the initial estimate."""
    return 81.0 * gamma1 * D * D / (8.0 * normA * normA * (k + 2) * (k + 3))


def sadmm_bounds(k, gamma1, normA, D, u_gap_sq, lam_norm, paper_beta=False):
    """Right-hand sides (primal, feasibility, dual) for SADMM; u_gap_sq = ||center - u*||^2.

    With the default beta, feasibility and dual bounds follow from the S-based
    estimates with S <= gamma_k ||center - u*||^2/2 + ``sadmm_gap_bound``. With
    ``paper_beta`` the printed feasibility form is returned instead.
    """
    a2 = normA * normA
    S = sadmm_gamma(k, gamma1) * 0.5 * u_gap_sq + sadmm_gap_bound(k, gamma1, normA, D)
    beta = sadmm_schedule(k, gamma1, normA, paper_beta)[2]
    sb = solution_bounds(S, beta, sadmm_gamma(k, gamma1), lam_norm)
    feas = sb.feasibility_ub
    if paper_beta:
        feas = 18.0 * a2 * lam_norm / (5.0 * gamma1 * (k + 1)) + 6.0 * normA / (k + 1) * math.sqrt(
            u_gap_sq + 27.0 * D * D / (8.0 * a2 * (k + 10))
        )
    return S, feas, sb.dual_residual_ub


def _u_step(problem, config, lam_hat, Bv_prev, rho, gamma, center):
    A = problem.A
    if config.u_solver is not None:
        return config.u_solver(lam_hat, Bv_prev, rho, gamma)
    if not A.is_orthonormal():
        raise CapabilityError("closed-form u-step needs A^T A = I; pass u_solver")
    w = rho + gamma
    arg = (gamma * center + A.apply_adjoint(lam_hat - rho * (Bv_prev - problem.c))) / w
    return problem.g.prox(1.0 / w, arg)


def sadmm_init(problem, config, lam0=None):
    normA, gamma1, center = _resolve(problem, config)
    a2 = normA * normA
    lam0 = _lam0(problem, config, lam0)
    explicit = config.eta0 is not None or config.beta1 is not None
    eta0 = gamma1 / (2.0 * a2) if config.eta0 is None else config.eta0
    beta1 = sadmm_schedule(1, gamma1, normA, config.paper_beta)[2] if config.beta1 is None else config.beta1
    if explicit:
        check_init_condition(gamma1, eta0, beta1, normA)
    u1 = problem.g.prox(1.0 / gamma1, center + problem.A.apply_adjoint(lam0) / gamma1)
    v1, lam1, r = _first_iterate(problem, config, lam0, eta0, u1)
    return SadmmState(
        1, u1, v1, lam1, -r / beta1, gamma=gamma1, beta=beta1, eta=eta0,
        v_hat=v1.copy(), Bv_hat=problem.B.apply(v1),
    )


def sadmm_step(state, problem, config):
    k = state.k
    normA, gamma1, center = _resolve(problem, config)
    tau, gamma_next, _, eta, rho = sadmm_schedule(k, gamma1, normA, config.paper_beta)
    beta_next = sadmm_schedule(k + 1, gamma1, normA, config.paper_beta)[2]
    lam_hat = (1.0 - tau) * state.lam_bar + tau * state.lam_star
    u_hat = _u_step(problem, config, lam_hat, state.Bv_hat, rho, gamma_next, center)
    Au = problem.A.apply(u_hat)
    v_hat = _v_step(problem, config, lam_hat, Au, eta)
    Bv = problem.B.apply(v_hat)
    lam_bar = lam_hat - eta * (Au + Bv - problem.c)
    lam_star = ((1.0 - tau) * state.beta * state.lam_star + (tau / eta) * (lam_bar - lam_hat)) / beta_next
    return SadmmState(
        k + 1,
        (1.0 - tau) * state.u_bar + tau * u_hat,
        (1.0 - tau) * state.v_bar + tau * v_hat,
        lam_bar,
        lam_star,
        tau=tau,
        gamma=gamma_next,
        beta=beta_next,
        eta=eta,
        v_hat=v_hat,
        Bv_hat=Bv,
        rho=rho,
    )


def sadmm_run(problem, config, callback=None):
    normA, gamma1, center = _resolve(problem, config)
    D = problem.D_f
    ref = problem.reference

    def bounds_fn(k):
        u_gap_sq = float(np.sum((center - ref.u_star) ** 2))
        lam_norm = float(np.linalg.norm(ref.lam_star))
        return sadmm_bounds(k, gamma1, normA, D, u_gap_sq, lam_norm, config.paper_beta)

    def extra_fn(k, new_state):
        if D is None:
            return math.inf
        t = new_state.tau
        return (t * t * new_state.eta / 4.0 + t * new_state.rho / 2.0) * D * D

    return run_scheme(
        problem,
        config,
        lambda: sadmm_init(problem, config),
        lambda s: sadmm_step(s, problem, config),
        bounds_fn,
        extra_fn,
        "sadmm",
        callback,
    )
