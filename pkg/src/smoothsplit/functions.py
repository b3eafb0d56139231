"""Extended-real convex functions with closed-form proximal maps.

Every ``prox(t, x)`` returns argmin_z f(z) + ||z - x||^2 / (2 t), i.e. the
prox of ``t * f``. A scheme written with a ``1/gamma`` weight calls
``prox(1.0 / gamma, x)``.

``conjugate(z)`` evaluates the Fenchel conjugate where a closed form exists;
kinds without one raise ``CapabilityError``. ``argmin_linear(z)`` returns the
minimizer of f(u) - <z, u> and is only offered by strongly convex kinds.
"""

import math
from dataclasses import dataclass

import numpy as np

INF = math.inf
# slack used when deciding domain membership of averaged iterates
DOMAIN_TOL = 1e-9


class CapabilityError(RuntimeError):
    pass


def _vec(x, dim):
    x = np.asarray(x, dtype=float)
    if x.shape != (dim,):
        raise ValueError(f"expected a vector of length {dim}, got shape {x.shape}")
    return x


def _check_t(t):
    if not t > 0:
        raise ValueError("prox weight t must be positive")


class ConvexFn:
    dim = 1
    strong_convexity = 0.0
    kind = "abstract"

    @property
    def conjugate_available(self):
        return type(self).conjugate is not ConvexFn.conjugate

    def __call__(self, x):
        return self.eval(_vec(x, self.dim))

    def eval(self, x):
        raise NotImplementedError

    def prox(self, t, x):
        raise CapabilityError(f"{self.kind} has no closed-form prox")

    def conjugate(self, z):
        raise CapabilityError(f"{self.kind} has no conjugate evaluator")

    def argmin_linear(self, z):
        raise CapabilityError(f"{self.kind} is not strongly convex")


class Zero(ConvexFn):
    kind = "zero"

    def __init__(self, dim):
        self.dim = dim

    def eval(self, x):
        return 0.0

    def prox(self, t, x):
        _check_t(t)
        return np.array(_vec(x, self.dim))

    def conjugate(self, z):
        return 0.0 if np.max(np.abs(z), initial=0.0) <= DOMAIN_TOL else INF


class Linear(ConvexFn):
    kind = "linear"

    def __init__(self, q):
        self.q = np.array(q, dtype=float)
        self.dim = self.q.size

    def eval(self, x):
        return float(self.q @ x)

    def prox(self, t, x):
        _check_t(t)
        return _vec(x, self.dim) - t * self.q

    def conjugate(self, z):
        return 0.0 if np.max(np.abs(z - self.q)) <= DOMAIN_TOL * (1 + np.max(np.abs(self.q))) else INF


class BoxIndicator(ConvexFn):
    kind = "indicator_box"

    def __init__(self, lo, hi):
        self.lo = np.array(lo, dtype=float)
        self.hi = np.array(hi, dtype=float)
        if self.lo.shape != self.hi.shape or np.any(self.lo > self.hi):
            raise ValueError("box needs lo <= hi with matching shapes")
        self.dim = self.lo.size
        self._scale = 1.0 + np.maximum(np.abs(self.lo), np.abs(self.hi))

    def project(self, x):
        return np.clip(x, self.lo, self.hi)

    def contains(self, x, tol=DOMAIN_TOL):
        return bool(((x >= self.lo - tol * self._scale) & (x <= self.hi + tol * self._scale)).all())

    def eval(self, x):
        return 0.0 if self.contains(x) else INF

    def prox(self, t, x):
        _check_t(t)
        return self.project(_vec(x, self.dim))

    def conjugate(self, z):
        return float(np.sum(np.maximum(self.lo * z, self.hi * z)))

    def diameter(self):
        return float(np.linalg.norm(self.hi - self.lo))


class BallIndicator(ConvexFn):
    kind = "indicator_ball"

    def __init__(self, center, radius):
        self.center = np.array(center, dtype=float)
        self.radius = float(radius)
        if self.radius <= 0:
            raise ValueError("radius must be positive")
        self.dim = self.center.size

    def project(self, x):
        d = x - self.center
        nd = np.linalg.norm(d)
        if nd <= self.radius:
            return np.array(x, dtype=float)
        return self.center + d * (self.radius / nd)

    def contains(self, x, tol=DOMAIN_TOL):
        return np.linalg.norm(x - self.center) <= self.radius * (1 + tol) + tol

    def eval(self, x):
        return 0.0 if self.contains(x) else INF

    def prox(self, t, x):
        _check_t(t)
        return self.project(_vec(x, self.dim))

    def conjugate(self, z):
        return float(z @ self.center + self.radius * np.linalg.norm(z))

    def diameter(self):
        return 2.0 * self.radius


class HalfspaceIndicator(ConvexFn):
    """Indicator of {x : <a, x> <= b}."""

    kind = "indicator_halfspace"

    def __init__(self, a, b=0.0):
        self.a = np.array(a, dtype=float)
        self.b = float(b)
        self.a2 = float(self.a @ self.a)
        if self.a2 == 0.0:
            raise ValueError("halfspace normal must be nonzero")
        self.dim = self.a.size

    def project(self, x):
        s = self.a @ x - self.b
        if s <= 0.0:
            return np.array(x, dtype=float)
        return x - (s / self.a2) * self.a

    def distance(self, x):
        return max(float(self.a @ x) - self.b, 0.0) / math.sqrt(self.a2)

    def contains(self, x, tol=DOMAIN_TOL):
        return self.a @ x - self.b <= tol * (1 + np.linalg.norm(x)) * math.sqrt(self.a2)

    def eval(self, x):
        return 0.0 if self.contains(x) else INF

    def prox(self, t, x):
        _check_t(t)
        return self.project(_vec(x, self.dim))

    def conjugate(self, z):
        # finite only on the ray {s a : s >= 0}, where it equals s b
        s = max(float(self.a @ z) / self.a2, 0.0)
        if np.linalg.norm(z - s * self.a) > DOMAIN_TOL * (1 + np.linalg.norm(z)):
            return INF
        return s * self.b


class SupportFunction(ConvexFn):
    """Support function s_C(x) = sup_{y in C} <x, y> given a projector onto C.

    ``evaluator`` computes s_C itself. Without it only prox and the
    conjugate (the indicator of C) are available.
    """

    kind = "support_of_set"

    def __init__(self, dim, projector, evaluator=None):
        self.dim = dim
        self.projector = projector
        self.evaluator = evaluator

    def eval(self, x):
        if self.evaluator is None:
            raise CapabilityError("support function has no evaluator")
        return self.evaluator(x)

    def prox(self, t, x):
        _check_t(t)
        return prox_support_moreau(self.projector, t, _vec(x, self.dim))

    def conjugate(self, z):
        p = self.projector(z)
        return 0.0 if np.linalg.norm(p - z) <= DOMAIN_TOL * (1 + np.linalg.norm(z)) else INF


def support_of_ball(center, radius):
    ball = BallIndicator(center, radius)
    return SupportFunction(
        ball.dim, ball.project, lambda x: float(x @ ball.center + ball.radius * np.linalg.norm(x))
    )


def support_of_cone_halfspace(a):
    """s_C for the cone C = {y : <a, y> <= 0}: the indicator of the ray {s a : s >= 0}."""
    half = HalfspaceIndicator(a, 0.0)

    def evaluator(x):
        return 0.0 if _on_ray(half.a, x) else INF

    return SupportFunction(half.dim, half.project, evaluator)


def _project_ray(a, x):
    s = max(float(a @ x), 0.0) / float(a @ a)
    return s * a


def _on_ray(a, x, tol=DOMAIN_TOL):
    return np.linalg.norm(x - _project_ray(a, x)) <= tol * (1 + np.linalg.norm(x))


class Quadratic(ConvexFn):
    """(mu/2) ||x - center||^2."""

    kind = "quadratic"

    def __init__(self, mu, center):
        if not mu > 0:
            raise ValueError("mu must be positive")
        self.mu = float(mu)
        self.center = np.array(center, dtype=float)
        self.dim = self.center.size
        self.strong_convexity = self.mu

    def eval(self, x):
        d = x - self.center
        return 0.5 * self.mu * float(d @ d)

    def prox(self, t, x):
        _check_t(t)
        x = _vec(x, self.dim)
        return (x + t * self.mu * self.center) / (1.0 + t * self.mu)

    def conjugate(self, z):
        return float(z @ self.center + (z @ z) / (2.0 * self.mu))

    def argmin_linear(self, z):
        return self.center + z / self.mu


class LinearOnSet(ConvexFn):
    """<q, x> plus the indicator of a box, ball or halfspace."""

    kind = "sum"

    def __init__(self, indicator, q):
        self.indicator = indicator
        self.q = np.array(q, dtype=float)
        self.dim = indicator.dim
        if self.q.size != self.dim:
            raise ValueError("linear term and indicator dimensions differ")

    def eval(self, x):
        if self.indicator.eval(x) == INF:
            return INF
        return float(self.q @ x)

    def prox(self, t, x):
        _check_t(t)
        return self.indicator.project(_vec(x, self.dim) - t * self.q)

    def conjugate(self, z):
        return self.indicator.conjugate(z - self.q)


class QuadraticOnBox(ConvexFn):
    """(mu/2) ||x - center||^2 restricted to a box."""

    kind = "sum"

    def __init__(self, mu, center, lo, hi):
        self.quad = Quadratic(mu, center)
        self.box = BoxIndicator(lo, hi)
        self.mu = self.quad.mu
        self.center = self.quad.center
        self.dim = self.quad.dim
        if self.box.dim != self.dim:
            raise ValueError("box and quadratic dimensions differ")
        self.strong_convexity = self.mu

    def eval(self, x):
        if self.box.eval(x) == INF:
            return INF
        return self.quad.eval(x)

    def prox(self, t, x):
        # separable, so clipping the unconstrained minimizer is exact
        return self.box.project(self.quad.prox(t, x))

    def argmin_linear(self, z):
        return self.box.project(self.center + z / self.mu)

    def conjugate(self, z):
        u = self.argmin_linear(z)
        d = u - self.center
        return float(z @ u - 0.5 * self.mu * (d @ d))


class ConeSupportOnBall(ConvexFn):
    """s_C + indicator of the radius-r ball at the origin, C = {y : <a, y> <= 0}.

    s_C is the indicator of the ray spanned by ``a``, so this is the indicator
    of a ray segment. Its conjugate is r * dist(., C).
    """

    kind = "sum"

    def __init__(self, a, radius):
        self.a = np.array(a, dtype=float)
        self.radius = float(radius)
        self.dim = self.a.size
        self.halfspace = HalfspaceIndicator(self.a, 0.0)

    def project_set(self, x):
        """Projection onto the cone C itself."""
        return self.halfspace.project(x)

    def eval(self, x):
        if np.linalg.norm(x) > self.radius * (1 + DOMAIN_TOL):
            return INF
        return 0.0 if _on_ray(self.a, x) else INF

    def prox(self, t, x):
        _check_t(t)
        p = _project_ray(self.a, _vec(x, self.dim))
        n = np.linalg.norm(p)
        if n > self.radius:
            p = p * (self.radius / n)
        return p

    def conjugate(self, z):
        return self.radius * self.halfspace.distance(z)


def fn_eval(f, x):
    return f(x)


def prox(f, t, x):
    return f.prox(t, x)


def prox_support_moreau(projector, t, x):
    """prox of t * s_C through the Moreau identity: x - t * proj_C(x / t)."""
    _check_t(t)
    x = np.asarray(x, dtype=float)
    return x - t * projector(x / t)


@dataclass(frozen=True)
class Bregman:
    """Squared Euclidean distance to a center, b(u) = ||u - center||^2 / 2."""

    center: np.ndarray
    lipschitz: float = 1.0
    kind: str = "squared_euclidean"

    def __call__(self, u):
        d = np.asarray(u, dtype=float) - self.center
        return 0.5 * float(d @ d)

    def grad(self, u):
        return np.asarray(u, dtype=float) - self.center


def bregman_eval(b, u):
    return b(u)


def bregman_grad(b, u):
    return b.grad(u)
