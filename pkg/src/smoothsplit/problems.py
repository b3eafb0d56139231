"""Problem container, built-in instances and a small reference solver."""

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.optimize import linprog, lsq_linear, minimize

from smoothsplit.functions import (
    INF,
    BoxIndicator,
    ConeSupportOnBall,
    ConvexFn,
    LinearOnSet,
    QuadraticOnBox,
    Zero,
)
from smoothsplit.operators import LinearMap, operator_norm


class InstanceError(RuntimeError):
    pass


@dataclass
class ReferenceSolution:
    f_star: float
    u_star: np.ndarray
    v_star: np.ndarray
    lam_star: Optional[np.ndarray]
    provenance: str = "analytic"

    @property
    def d_star(self):
        return -self.f_star


@dataclass
class ProblemSpec:
    """min g(u) + h(v) subject to A u + B v = c."""

    g: ConvexFn
    h: ConvexFn
    A: LinearMap
    B: LinearMap
    c: np.ndarray
    center: np.ndarray
    D_f: Optional[float] = None
    reference: Optional[ReferenceSolution] = None
    name: str = "custom"
    # replaces g*(A^T l) + h*(B^T l) - <c, l> when reporting dual residuals
    dual_objective: Optional[Callable] = None
    # projectors onto the two sets of a feasibility instance
    projectors: Optional[tuple] = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        self.center = np.asarray(self.center, dtype=float)
        if self.A.out_dim != self.B.out_dim or self.c.shape != (self.A.out_dim,):
            raise ValueError("A, B and c disagree on the constraint dimension")
        if self.g.dim != self.A.in_dim or self.h.dim != self.B.in_dim:
            raise ValueError("function dimensions do not match the maps")
        if self.center.shape != (self.A.in_dim,):
            raise ValueError("center must live in the domain of g")

    @property
    def normA(self):
        if self.A.cached_norm is None:
            operator_norm(self.A)
        return self.A.cached_norm

    @property
    def has_conjugates(self):
        return self.g.conjugate_available and self.h.conjugate_available

    def objective(self, u, v):
        gu = self.g.eval(u)
        if gu == INF:
            return INF
        hv = self.h.eval(v)
        return gu + hv

    def dual(self, lam):
        if self.dual_objective is not None:
            return self.dual_objective(lam)
        return (
            self.g.conjugate(self.A.apply_adjoint(lam))
            + self.h.conjugate(self.B.apply_adjoint(lam))
            - float(self.c @ lam)
        )

    def reference_dual(self):
        """Optimal value of whatever ``dual`` reports."""
        if self.dual_objective is not None:
            return self.params.get("dual_objective_star", 0.0)
        return self.reference.d_star


def constraint_residual(spec, u, v):
    r = spec.A.apply(u) + spec.B.apply(v) - spec.c
    return r, float(np.linalg.norm(r))


def sample_domain(f, rng, size):
    """Random points of dom f for the kinds that carry a bounded domain."""
    if isinstance(f, BoxIndicator):
        return rng.uniform(f.lo, f.hi, size=(size, f.dim))
    if isinstance(f, (LinearOnSet,)):
        return sample_domain(f.indicator, rng, size)
    if isinstance(f, QuadraticOnBox):
        return sample_domain(f.box, rng, size)
    if isinstance(f, ConeSupportOnBall):
        s = rng.uniform(0, 1, size)[:, None]
        return s * (f.radius / np.linalg.norm(f.a)) * f.a[None, :]
    if hasattr(f, "radius") and hasattr(f, "center"):
        d = rng.standard_normal((size, f.dim))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        return f.center + d * f.radius * rng.uniform(0, 1, (size, 1))
    raise InstanceError(f"cannot sample the domain of {f.kind}")


def check_D_f(spec, samples=1000, seed=0):
    """True when D_f dominates the constraint residual on random domain samples."""
    rng = np.random.default_rng(seed)
    us = sample_domain(spec.g, rng, samples)
    vs = sample_domain(spec.h, rng, samples)
    worst = max(constraint_residual(spec, u, v)[1] for u, v in zip(us, vs))
    return worst <= spec.D_f * (1 + 1e-12), worst


def _domain_diameter(f):
    for attr in ("box", "indicator"):
        if hasattr(f, attr):
            return _domain_diameter(getattr(f, attr))
    if hasattr(f, "diameter"):
        return f.diameter()
    if isinstance(f, ConeSupportOnBall):
        return f.radius
    return INF


def estimate_D_f(A, B, c, g, h):
    """Over-estimate: ||A|| diam(dom g) + ||B|| diam(dom h) + ||c||."""
    return (
        operator_norm(A) * _domain_diameter(g)
        + operator_norm(B) * _domain_diameter(h)
        + float(np.linalg.norm(c))
    )


def _box_of(f):
    if isinstance(f, BoxIndicator):
        return f
    if isinstance(f, LinearOnSet) and isinstance(f.indicator, BoxIndicator):
        return f.indicator
    if isinstance(f, QuadraticOnBox):
        return f.box
    return None


def D_f_by_vertices(spec):
    """Exact D_f for box domains: the residual norm is convex, so its max sits at a vertex pair."""
    bg, bh = _box_of(spec.g), _box_of(spec.h)
    if bg is None or bh is None:
        raise InstanceError("vertex enumeration needs box domains")
    best = 0.0
    for su in itertools.product(*zip(bg.lo, bg.hi)):
        au = spec.A.apply(np.array(su)) - spec.c
        for sv in itertools.product(*zip(bh.lo, bh.hi)):
            best = max(best, float(np.linalg.norm(au + spec.B.apply(np.array(sv)))))
    return best


def build_feasibility_instance(n=1000, eps=1e-2, radius=None):
    """Two half-spaces through the origin, posed as min s_C1(u) + s_C2(v) s.t. u + v = 0.

    The dual is the sum of distances to the two sets; its optimal value is 0.
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    m = n // 2
    a1 = np.concatenate([np.full(m, float(eps)), -np.ones(n - m)])
    a2 = np.concatenate([np.zeros(m), np.ones(n - m)])
    r = 10.0 * math.sqrt(n) if radius is None else float(radius)
    g = ConeSupportOnBall(a1, r)
    h = ConeSupportOnBall(a2, r)
    zero = np.zeros(n)

    def dist_sum(lam):
        return g.halfspace.distance(lam) + h.halfspace.distance(lam)

    return ProblemSpec(
        g=g,
        h=h,
        A=LinearMap.identity(n),
        B=LinearMap.identity(n),
        c=zero,
        center=zero,
        D_f=2.0 * r,
        reference=ReferenceSolution(0.0, zero, zero, zero, "analytic"),
        name="feasibility",
        dual_objective=dist_sum,
        projectors=(g.project_set, h.project_set),
        params={"n": n, "eps": eps, "radius": r, "a1": a1, "a2": a2},
    )


def build_composite(g, h, F, y, center=None):
    """min g(u) + h(F u - y), rewritten with v = F u - y as F u - v = y."""
    y = np.asarray(y, dtype=float)
    cen = np.zeros(F.in_dim) if center is None else center
    return ProblemSpec(
        g=g,
        h=h,
        A=F,
        B=LinearMap.scaled_identity(-1.0, F.out_dim),
        c=y,
        center=cen,
        name="composite",
    )


def random_orthogonal(n, rng):
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))


def build_box_lp(n=3, q_g=None, q_h=None, seed=0, lo=-1.0, hi=1.0, reference=True):
    """Linear objectives on boxes coupled by random orthogonal A and B.

    c is built from a random interior point so the instance is feasible;
    D_f comes from vertex enumeration and the reference from a linear program.
    """
    if not 1 <= n <= 3:
        raise ValueError("box-LP instances are kept at n <= 3")
    rng = np.random.default_rng(seed)
    for _ in range(10):
        A = random_orthogonal(n, rng)
        B = random_orthogonal(n, rng)
        qg = rng.standard_normal(n) if q_g is None else np.asarray(q_g, dtype=float)
        qh = rng.standard_normal(n) if q_h is None else np.asarray(q_h, dtype=float)
        u0 = rng.uniform(lo, hi, n) * 0.9
        v0 = rng.uniform(lo, hi, n) * 0.9
        c = A @ u0 + B @ v0
        lo_v, hi_v = np.full(n, float(lo)), np.full(n, float(hi))
        spec = ProblemSpec(
            g=LinearOnSet(BoxIndicator(lo_v, hi_v), qg),
            h=LinearOnSet(BoxIndicator(lo_v, hi_v), qh),
            A=LinearMap.dense(A),
            B=LinearMap.dense(B),
            c=c,
            center=np.zeros(n),
            name="box-lp",
            params={"seed": seed, "n": n},
        )
        spec.D_f = D_f_by_vertices(spec)
        if not reference:
            return spec
        try:
            spec.reference = oracle_solve_small(spec)
        except InstanceError:
            continue
        if spec.reference.lam_star is not None:
            return spec
    raise InstanceError(f"no usable box-LP instance for seed {seed} after 10 tries")


def build_strongly_convex_qp(n=3, mu=1.0, seed=0, lo=-1.0, hi=1.0):
    """g = (mu/2)||u - a||^2 on a box, h linear on a box, orthogonal couplings."""
    rng = np.random.default_rng(seed)
    A = random_orthogonal(n, rng)
    B = random_orthogonal(n, rng)
    a = rng.uniform(-2.0, 2.0, n)
    qh = rng.standard_normal(n)
    u0 = rng.uniform(lo, hi, n) * 0.9
    v0 = rng.uniform(lo, hi, n) * 0.9
    lo_v, hi_v = np.full(n, float(lo)), np.full(n, float(hi))
    spec = ProblemSpec(
        g=QuadraticOnBox(mu, a, lo_v, hi_v),
        h=LinearOnSet(BoxIndicator(lo_v, hi_v), qh),
        A=LinearMap.dense(A),
        B=LinearMap.dense(B),
        c=A @ u0 + B @ v0,
        center=np.zeros(n),
        name="sc-qp",
        params={"seed": seed, "n": n, "mu": mu},
    )
    spec.D_f = D_f_by_vertices(spec)
    spec.reference = oracle_solve_small(spec)
    return spec


def build_trivial(dim=1):
    """g = h = 0, A = B = I, c = 0: the origin is optimal for both problems."""
    z = np.zeros(dim)
    return ProblemSpec(
        g=Zero(dim),
        h=Zero(dim),
        A=LinearMap.identity(dim),
        B=LinearMap.identity(dim),
        c=z,
        center=z,
        D_f=None,
        reference=ReferenceSolution(0.0, z, z, z, "analytic"),
        name="trivial",
        # g = h = 0 are the support functions of {0}
        projectors=(np.zeros_like, np.zeros_like),
    )


def _linear_part(f):
    if isinstance(f, LinearOnSet):
        return f.q
    return None


def oracle_solve_small(spec, tol=1e-9):
    """Reference solution for small box-constrained instances.

    Linear objectives go through an LP solve; the strongly convex quadratic
    kind goes through SLSQP. The multiplier is then recovered from the
    optimality conditions A^T l in dg(u*), B^T l in dh(v*) by bounded least
    squares over the active box faces and validated at 1e-6. A failed
    validation leaves ``lam_star`` as None (primal-only reference).
    """
    bg, bh = _box_of(spec.g), _box_of(spec.h)
    if bg is None or bh is None:
        raise InstanceError("oracle needs box domains")
    p1, p2 = bg.dim, bh.dim
    if p1 + p2 > 6:
        raise InstanceError("oracle is limited to total primal dimension 6")
    Am, Bm = spec.A.to_dense(), spec.B.to_dense()
    bounds = list(zip(bg.lo, bg.hi)) + list(zip(bh.lo, bh.hi))
    Aeq = np.hstack([Am, Bm])
    qg, qh = _linear_part(spec.g), _linear_part(spec.h)
    if qg is not None and qh is not None:
        res = linprog(
            np.concatenate([qg, qh]), A_eq=Aeq, b_eq=spec.c, bounds=bounds, method="highs"
        )
        if res.status != 0:
            raise InstanceError(f"linear program failed: {res.message}")
        x = res.x
    elif isinstance(spec.g, QuadraticOnBox) and qh is not None:
        mu, a = spec.g.mu, spec.g.center

        def obj(x):
            d = x[:p1] - a
            return 0.5 * mu * d @ d + qh @ x[p1:]

        def grad(x):
            return np.concatenate([mu * (x[:p1] - a), qh])

        x0 = np.linalg.lstsq(Aeq, spec.c, rcond=None)[0]
        res = minimize(
            obj,
            np.clip(x0, [b[0] for b in bounds], [b[1] for b in bounds]),
            jac=grad,
            bounds=bounds,
            constraints=[{"type": "eq", "fun": lambda x: Aeq @ x - spec.c, "jac": lambda x: Aeq}],
            method="SLSQP",
            options={"ftol": 1e-15, "maxiter": 1000},
        )
        if not res.success:
            raise InstanceError(f"SLSQP failed: {res.message}")
        lo_b = np.array([b[0] for b in bounds])
        hi_b = np.array([b[1] for b in bounds])
        x = np.clip(res.x, lo_b, hi_b)
        hess = np.concatenate([np.full(p1, mu), np.zeros(p2)])
        lin = np.concatenate([-mu * a, qh])
        polished = _polish_on_active_set(x, hess, lin, Aeq, spec.c, lo_b, hi_b)
        if polished is not None and obj(polished) <= obj(x) + 1e-15:
            x = polished
    else:
        raise InstanceError("oracle supports linear or quadratic objectives on boxes")
    u, v = x[:p1], x[p1:]
    f_star = spec.objective(u, v)
    lam = recover_multiplier(spec, u, v, tol=1e-6)
    return ReferenceSolution(float(f_star), u, v, lam, "brute_force")


def _polish_on_active_set(x, hess, lin, Aeq, c, lo, hi, tol=1e-6):
    """Exact minimizer of the diagonal QP with the bounds active at x held fixed.

    Solves the KKT system of min 1/2 x^T H x + lin^T x s.t. Aeq x = c on the
    free coordinates. Returns None when the result leaves the box or
    the equality residual is not at rounding level.
    """
    at_lo = x <= lo + tol
    at_hi = x >= hi - tol
    fixed = at_lo | at_hi
    free = ~fixed
    xf = np.where(at_lo, lo, np.where(at_hi, hi, 0.0))
    nf = int(free.sum())
    m = Aeq.shape[0]
    K = np.zeros((nf + m, nf + m))
    K[:nf, :nf] = np.diag(hess[free])
    K[:nf, nf:] = Aeq[:, free].T
    K[nf:, :nf] = Aeq[:, free]
    rhs = np.concatenate([-lin[free], c - Aeq[:, fixed] @ xf[fixed]])
    sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
    out = xf.copy()
    out[free] = sol[:nf]
    if np.any(out < lo - 1e-12) or np.any(out > hi + 1e-12):
        return None
    if np.linalg.norm(Aeq @ out - c) > 1e-12 * (1 + np.linalg.norm(c)):
        return None
    return np.clip(out, lo, hi)


def _smooth_gradient(f, x):
    if isinstance(f, LinearOnSet):
        return f.q
    if isinstance(f, QuadraticOnBox):
        return f.mu * (x - f.center)
    raise InstanceError(f"no gradient for {f.kind}")


def recover_multiplier(spec, u, v, tol=1e-6, active_tol=1e-7):
    """Find l with A^T l - grad g(u) in N_box(u) and B^T l - grad h(v) in N_box(v).

    Unknowns are l (free) and one normal-cone weight per active face, signed
    by the face. Returns None if the residual exceeds ``tol``.
    """
    blocks = []
    rhs = []
    n = spec.A.out_dim
    for f, M, x in ((spec.g, spec.A.to_dense(), u), (spec.h, spec.B.to_dense(), v)):
        box = _box_of(f)
        blocks.append((M, box, x))
        rhs.append(_smooth_gradient(f, x))
    p = sum(b[1].dim for b in blocks)
    lb, ub = [-np.inf] * n, [np.inf] * n
    rows = np.zeros((p, n))
    offset = 0
    face_cols = []
    for M, box, x in blocks:
        rows[offset : offset + box.dim] = M.T
        for i in range(box.dim):
            width = active_tol * (1 + abs(box.hi[i]) + abs(box.lo[i]))
            if x[i] >= box.hi[i] - width:
                face_cols.append((offset + i, 1.0))
            elif x[i] <= box.lo[i] + width:
                face_cols.append((offset + i, -1.0))
        offset += box.dim
    # A^T l - grad = nu with nu_i >= 0 on upper faces and <= 0 on lower faces
    K = np.zeros((p, n + len(face_cols)))
    K[:, :n] = rows
    for j, (i, sgn) in enumerate(face_cols):
        K[i, n + j] = -sgn
        lb.append(0.0)
        ub.append(np.inf)
    target = np.concatenate(rhs)
    sol = lsq_linear(K, target, bounds=(lb, ub), method="bvls", tol=1e-14)
    resid = float(np.linalg.norm(K @ sol.x - target))
    if resid > tol:
        return None
    return sol.x[:n]
