"""Linear maps with forward/adjoint application and a seeded spectral-norm estimate."""

import numpy as np


class DimensionError(ValueError):
    pass


class NormEstimateError(RuntimeError):
    """Power iteration did not settle; ``last_estimate`` holds the final value."""

    def __init__(self, message, last_estimate):
        super().__init__(message)
        self.last_estimate = last_estimate


class LinearMap:
    """A small linear operator: identity, scaled identity, dense matrix or a single row.

    Build instances through the class constructors rather than ``__init__``.
    """

    KINDS = ("identity", "scaled_identity", "dense", "rank_one")

    def __init__(self, kind, in_dim, out_dim, matrix=None, alpha=1.0, row=None):
        if kind not in self.KINDS:
            raise ValueError(f"unknown map kind {kind!r}")
        if in_dim < 1 or out_dim < 1:
            raise DimensionError("map dimensions must be positive")
        if kind in ("identity", "scaled_identity") and in_dim != out_dim:
            raise DimensionError("identity maps must be square")
        self.kind = kind
        self.in_dim = int(in_dim)
        self.out_dim = int(out_dim)
        self.alpha = float(alpha)
        self.matrix = matrix
        self.row = row
        self.cached_norm = None
        self._orthonormal = {}

    @classmethod
    def identity(cls, dim):
        return cls("identity", dim, dim)

    @classmethod
    def scaled_identity(cls, alpha, dim):
        return cls("scaled_identity", dim, dim, alpha=alpha)

    @classmethod
    def dense(cls, matrix):
        m = np.array(matrix, dtype=float)
        if m.ndim != 2:
            raise DimensionError("dense map needs a 2-D matrix")
        m.setflags(write=False)
        return cls("dense", m.shape[1], m.shape[0], matrix=m)

    @classmethod
    def rank_one(cls, row):
        r = np.array(row, dtype=float).ravel()
        r.setflags(write=False)
        return cls("rank_one", r.size, 1, row=r)

    def apply(self, x):
        x = _as_vec(x, self.in_dim)
        if self.kind == "identity":
            return x.copy()
        if self.kind == "scaled_identity":
            return self.alpha * x
        if self.kind == "dense":
            return self.matrix @ x
        return np.array([self.row @ x])

    def apply_adjoint(self, y):
        y = _as_vec(y, self.out_dim)
        if self.kind == "identity":
            return y.copy()
        if self.kind == "scaled_identity":
            return self.alpha * y
        if self.kind == "dense":
            return self.matrix.T @ y
        return y[0] * self.row

    def to_dense(self):
        if self.kind == "identity":
            return np.eye(self.in_dim)
        if self.kind == "scaled_identity":
            return self.alpha * np.eye(self.in_dim)
        if self.kind == "dense":
            return np.array(self.matrix)
        return self.row[None, :].copy()

    def is_orthonormal(self, tol=1e-10):
        """True when the adjoint is a left inverse, i.e. M^T M = I. Cached per tolerance."""
        if tol not in self._orthonormal:
            if self.kind == "identity":
                ok = True
            elif self.kind == "scaled_identity":
                ok = abs(abs(self.alpha) - 1.0) <= tol
            else:
                m = self.to_dense()
                ok = bool(np.max(np.abs(m.T @ m - np.eye(self.in_dim))) <= tol)
            self._orthonormal[tol] = ok
        return self._orthonormal[tol]

    def __repr__(self):
        return f"LinearMap({self.kind}, {self.out_dim}x{self.in_dim})"


def _as_vec(x, dim):
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != dim:
        raise DimensionError(f"expected a vector of length {dim}, got shape {x.shape}")
    return x


def apply(m, x):
    return m.apply(x)


def apply_adjoint(m, y):
    return m.apply_adjoint(y)


def operator_norm(m, tol=1e-10, max_iters=10000, seed=0):
    """Largest singular value of ``m``.

    Closed form for the structured kinds. Dense maps use power iteration on
    M^T M from a seeded start, and the estimate is inflated by (1 + 10 tol)
    so that downstream step sizes stay on the safe side. The result is cached
    on the map.
    """
    if m.kind == "identity":
        est = 1.0
    elif m.kind == "scaled_identity":
        est = abs(m.alpha)
    elif m.kind == "rank_one":
        est = float(np.linalg.norm(m.row))
    else:
        est = _power_iteration(m, tol, max_iters, seed) * (1.0 + 10.0 * tol)
    m.cached_norm = est
    return est


def _power_iteration(m, tol, max_iters, seed):
    mat = m.to_dense()
    # rescale so M^T M neither underflows nor overflows
    scale = float(np.max(np.abs(mat))) if mat.size else 0.0
    if scale == 0.0:
        return 0.0
    mat = mat / scale
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(m.in_dim)
    x /= np.linalg.norm(x)
    sigma = 0.0
    for _ in range(max_iters):
        y = mat.T @ (mat @ x)
        ny = np.linalg.norm(y)
        if ny == 0.0:
            return 0.0
        new_sigma = np.sqrt(ny)
        x = y / ny
        if abs(new_sigma - sigma) <= tol * new_sigma:
            return float(new_sigma) * scale
        sigma = new_sigma
    raise NormEstimateError(
        f"power iteration did not converge in {max_iters} iterations", float(sigma) * scale
    )
