import itertools

import numpy as np
import pytest

from oracles import grid_min_1d, grid_min_nd
from smoothsplit.functions import BoxIndicator, LinearOnSet, SupportFunction
from smoothsplit.operators import LinearMap
from smoothsplit.problems import (
    InstanceError,
    ProblemSpec,
    build_box_lp,
    build_composite,
    build_feasibility_instance,
    build_strongly_convex_qp,
    build_trivial,
    check_D_f,
    constraint_residual,
    estimate_D_f,
    oracle_solve_small,
)
from smoothsplit.sama import SamaConfig, sama_init, sama_schedule, sama_step


def test_feasibility_instance_shape():
    p = build_feasibility_instance(n=10, eps=0.1, radius=3.0)
    assert p.D_f == 6.0
    assert p.reference.f_star == 0.0 and p.reference_dual() == 0.0
    a1, a2 = p.params["a1"], p.params["a2"]
    assert np.all(a1[:5] == 0.1) and np.all(a1[5:] == -1.0)
    assert np.all(a2[:5] == 0.0) and np.all(a2[5:] == 1.0)
    assert p.params["radius"] == 3.0
    assert build_feasibility_instance(n=16).params["radius"] == pytest.approx(40.0)


def test_feasibility_dual_evaluation():
    p = build_feasibility_instance(n=4, eps=0.5)
    a1, a2 = p.params["a1"], p.params["a2"]
    lam = np.array([0.0, 0.0, 1.0, 2.0])
    t = float(a2 @ lam)
    assert t > 0 and a1 @ lam <= 0
    assert p.dual(lam) == pytest.approx(t / np.linalg.norm(a2))
    # the same value from explicit projections
    p1, p2 = p.projectors
    assert p.dual(lam) == pytest.approx(np.linalg.norm(lam - p1(lam)) + np.linalg.norm(lam - p2(lam)))


def test_feasibility_degenerate_angle():
    p = build_feasibility_instance(n=6, eps=0.0)
    a1, a2 = p.params["a1"], p.params["a2"]
    assert np.all(np.sign(a1[3:]) == -np.sign(a2[3:]))
    x = np.array([1.0, -2.0, 0.0, 0.0, 0.0, 0.0])
    p1, p2 = p.projectors
    assert np.allclose(p1(x), x) and np.allclose(p2(x), x)


def test_feasibility_D_f_dominates_samples():
    ok, worst = check_D_f(build_feasibility_instance(n=20, eps=0.1))
    assert ok and worst > 0


def test_builtin_instances_pass_D_f_check():
    for p in (build_box_lp(n=3, seed=0), build_strongly_convex_qp(n=3, seed=0), build_feasibility_instance(n=50)):
        assert check_D_f(p)[0]


def test_box_lp_D_f_is_vertex_maximum():
    p = build_box_lp(n=2, seed=4)
    best = 0.0
    for su in itertools.product([-1.0, 1.0], repeat=2):
        for sv in itertools.product([-1.0, 1.0], repeat=2):
            best = max(best, constraint_residual(p, np.array(su), np.array(sv))[1])
    assert p.D_f == pytest.approx(best, rel=1e-14)
    assert p.D_f <= estimate_D_f(p.A, p.B, p.c, p.g, p.h)


def test_box_lp_conjugate_is_l1_distance():
    p = build_box_lp(n=3, seed=2)
    rng = np.random.default_rng(0)
    for _ in range(10):
        z = rng.normal(size=3)
        assert p.g.conjugate(z) == pytest.approx(np.sum(np.abs(z - p.g.q)))
    q = 0.3
    f = LinearOnSet(BoxIndicator([-1.0], [1.0]), [q])
    for z in (-2.0, 0.1, 1.7):
        phi = lambda u: q * u - z * u
        ref = -phi(grid_min_1d(phi, -1.0, 1.0))
        assert f.conjugate(np.array([z])) == pytest.approx(ref, abs=1e-8)


def test_box_lp_zero_objective():
    p = build_box_lp(n=2, q_g=np.zeros(2), q_h=np.zeros(2), seed=1)
    assert p.reference.f_star == 0.0
    assert constraint_residual(p, p.reference.u_star, p.reference.v_star)[1] < 1e-8


def test_box_lp_reference_against_cvxpy():
    cp = pytest.importorskip("cvxpy")
    for seed in range(5):
        p = build_box_lp(n=3, seed=seed)
        u, v = cp.Variable(3), cp.Variable(3)
        prob = cp.Problem(
            cp.Minimize(p.g.q @ u + p.h.q @ v),
            [p.A.to_dense() @ u + p.B.to_dense() @ v == p.c, cp.abs(u) <= 1, cp.abs(v) <= 1],
        )
        prob.solve(solver="CLARABEL")
        assert p.reference.f_star == pytest.approx(prob.value, abs=1e-6)
        # strong duality with the recovered multiplier
        assert p.dual(p.reference.lam_star) == pytest.approx(-p.reference.f_star, abs=1e-6)


def test_sc_qp_reference_against_cvxpy():
    cp = pytest.importorskip("cvxpy")
    for seed in range(3):
        p = build_strongly_convex_qp(n=3, seed=seed)
        u, v = cp.Variable(3), cp.Variable(3)
        obj = 0.5 * p.g.mu * cp.sum_squares(u - p.g.center) + p.h.q @ v
        cons = [p.A.to_dense() @ u + p.B.to_dense() @ v == p.c, cp.abs(u) <= 1, cp.abs(v) <= 1]
        prob = cp.Problem(cp.Minimize(obj), cons)
        prob.solve(solver="CLARABEL")
        assert p.reference.f_star == pytest.approx(prob.value, abs=1e-6)
        assert p.dual(p.reference.lam_star) == pytest.approx(-p.reference.f_star, abs=1e-6)


def _one_dim_oracle_instance():
    box = BoxIndicator([-1.0], [1.0])
    return ProblemSpec(
        g=LinearOnSet(box, [1.0]), h=LinearOnSet(BoxIndicator([-1.0], [1.0]), [0.0]),
        A=LinearMap.identity(1), B=LinearMap.identity(1), c=np.zeros(1), center=np.zeros(1),
    )


def test_oracle_one_dim_instance():
    p = _one_dim_oracle_instance()
    ref = oracle_solve_small(p)
    assert ref.u_star[0] == pytest.approx(-1.0) and ref.v_star[0] == pytest.approx(1.0)
    assert ref.f_star == pytest.approx(-1.0)
    # lam - 1 in N(-1) = (-inf, 0] and lam in N(1) = [0, inf)
    lam = ref.lam_star[0]
    assert lam - 1.0 <= 1e-6 and lam >= -1e-6
    # grid enumeration over the feasible line u = -v
    u_grid = grid_min_1d(lambda s: s, -1.0, 1.0)
    assert u_grid == pytest.approx(-1.0, abs=1e-6)


def test_oracle_zero_objective_trivial():
    box = BoxIndicator([-1.0, -1.0], [1.0, 1.0])
    p = ProblemSpec(
        g=LinearOnSet(box, np.zeros(2)), h=LinearOnSet(BoxIndicator([-1.0, -1.0], [1.0, 1.0]), np.zeros(2)),
        A=LinearMap.identity(2), B=LinearMap.identity(2), c=np.zeros(2), center=np.zeros(2),
    )
    ref = oracle_solve_small(p)
    assert ref.f_star == 0.0
    assert np.allclose(ref.lam_star, 0.0, atol=1e-8)


def test_oracle_is_deterministic():
    a = build_box_lp(n=3, seed=9).reference
    b = build_box_lp(n=3, seed=9).reference
    assert a.f_star == b.f_star and np.array_equal(a.lam_star, b.lam_star)


def test_oracle_dimension_limit():
    box = BoxIndicator(-np.ones(4), np.ones(4))
    p = ProblemSpec(
        g=LinearOnSet(box, np.ones(4)), h=LinearOnSet(BoxIndicator(-np.ones(4), np.ones(4)), np.ones(4)),
        A=LinearMap.identity(4), B=LinearMap.identity(4), c=np.zeros(4), center=np.zeros(4),
    )
    with pytest.raises(InstanceError):
        oracle_solve_small(p)


def test_constraint_residual_examples():
    p = build_trivial(2)
    assert constraint_residual(p, np.zeros(2), np.zeros(2))[1] == 0.0
    assert constraint_residual(p, np.array([1.0, 0.0]), np.array([0.0, 1.0]))[1] == pytest.approx(np.sqrt(2))
    q = build_box_lp(n=2, seed=0)
    u, v = np.array([0.1, -0.2]), np.array([0.3, 0.4])
    r, nrm = constraint_residual(q, u, v)
    assert np.array_equal(r, q.A.apply(u) + q.B.apply(v) - q.c)
    assert nrm == np.linalg.norm(r)


def test_spec_dimension_checks():
    with pytest.raises(ValueError):
        ProblemSpec(
            g=BoxIndicator([0.0], [1.0]), h=BoxIndicator([0.0], [1.0]), A=LinearMap.identity(2),
            B=LinearMap.identity(1), c=np.zeros(1), center=np.zeros(1),
        )


def _l1(dim):
    box = BoxIndicator(-np.ones(dim), np.ones(dim))
    return SupportFunction(dim, box.project, lambda x: float(np.sum(np.abs(x))))


def test_composite_structure():
    p = build_composite(_l1(2), _l1(2), LinearMap.identity(2), np.zeros(2))
    assert p.B.is_orthonormal()
    u = np.array([1.0, 2.0])
    assert constraint_residual(p, u, u)[1] == 0.0


def test_composite_step_matches_grid_oracle():
    F = LinearMap.dense([[1.0, 0.5], [-0.3, 1.2]])
    y = np.array([0.4, -0.7])
    p = build_composite(_l1(2), _l1(2), F, y)
    cfg = SamaConfig()
    s1 = sama_init(p, cfg)
    s2 = sama_step(s1, p, cfg)
    tau, gamma2, _, eta = sama_schedule(1, p.normA, p.normA)
    lam_hat = (1 - tau) * s1.lam_bar + tau * s1.lam_star
    u_hat = (s2.u_bar - (1 - tau) * s1.u_bar) / tau
    v_hat = (s2.v_bar - (1 - tau) * s1.v_bar) / tau
    Fm = F.to_dense()
    atl = Fm.T @ lam_hat
    phi_u = lambda u: np.sum(np.abs(u)) - atl @ u + gamma2 / 2 * (u @ u)
    assert np.linalg.norm(u_hat - grid_min_nd(phi_u, [-5, -5], [5, 5])) < 1e-6
    # v-subproblem: h(v) - <lam_hat, B v> + eta/2 ||F u - v - y||^2 with B = -I
    w = Fm @ u_hat - y
    phi_v = lambda v: np.sum(np.abs(v)) + lam_hat @ v + eta / 2 * np.sum((w - v) ** 2)
    assert np.linalg.norm(v_hat - grid_min_nd(phi_v, [-5, -5], [5, 5])) < 1e-6
