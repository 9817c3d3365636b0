"""Objective oracles, constraint sets and the built-in problem library."""
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from . import kernels
from .convex_core import ConeSpec, SubdifferentialSet, as_vector, project_simplex
from .errors import CapabilityError, ConvergenceError, DimensionError, InfeasiblePointError

EPS_ACT = 1e-8
FEAS_TOL = 1e-9
SPARSE_SEED = 42

__all__ = [
    "Objective", "Quadratic", "Affine", "L1", "HuberL1", "EuclideanNorm", "MaxAffine",
    "LeastSquares", "MoreauEnvelope",
    "ConstraintSet", "WholeSpace", "Box", "Halfspaces", "Ball", "Problem",
    "SubdifferentialSet", "value", "subdifferential", "directional_derivative", "prox",
    "yosida_gradient", "envelope_value", "builtin_problem", "closed_form_field",
    "constraint_project", "normal_generators", "BUILTIN_PROBLEMS", "EPS_ACT",
]


def _snap_tol(u, scale=1.0):
    return scale * 1e-13 * (1.0 + float(np.max(np.abs(u))))


class Objective:
    """Convex finite-valued objective on R^d.

    Subclasses implement ``value`` (vectorised over leading axes),
    ``subdifferential``, ``prox`` when available, ``lower_bound`` (the
    infimum over the whole space, possibly ``-inf``) and ``kink_step``
    (distance along a ray before the first point of nondifferentiability).
    """

    kind = "abstract"
    prox_supported = True

    @property
    def dim(self):
        raise NotImplementedError

    def value(self, u):
        raise NotImplementedError

    def subdifferential(self, u):
        raise NotImplementedError

    def directional_derivative(self, u, d):
        return self.subdifferential(u).support(np.asarray(d, dtype=float))

    def prox(self, lam, v):
        raise CapabilityError(f"prox is not available for {self.kind} objectives")

    def yosida_gradient(self, lam, v):
        v = np.asarray(v, dtype=float)
        return (v - self.prox(lam, v)) / lam

    def envelope_value(self, lam, v):
        v = np.asarray(v, dtype=float)
        J = self.prox(lam, v)
        return float(self.value(J) + np.sum((v - J) ** 2) / (2 * lam))

    def lower_bound(self):
        raise NotImplementedError

    def lower_bound_on(self, constraint):
        """Infimum over the constraint set; falls back to ``lower_bound``."""
        return self.lower_bound()

    def minimizer(self):
        """Some global minimiser, or ``None`` when unknown / not attained."""
        return None

    def kink_step(self, u, d):
        return np.inf

    def snap(self, u, scale=1.0):
        """Move roundoff-sized offsets (relative size ``scale * 1e-13``) onto the nearest kink."""
        return u

    def curvature(self, u):
        """Local Lipschitz constant of the gradient on smooth pieces near u."""
        return 0.0

    def envelope(self, lam):
        """Moreau envelope with parameter ``lam`` as an Objective."""
        return MoreauEnvelope(self, lam)

    def as_quadratic(self):
        """``(Q, c, r)`` when the objective is a quadratic polynomial, else None."""
        return None

    def to_dict(self):
        raise NotImplementedError


def _quadratic_envelope(Q, c, r, lam):
    n = c.size
    M = np.linalg.inv(np.eye(n) + lam * Q)
    Ql = Q @ M
    Ql = 0.5 * (Ql + Ql.T)
    J0 = -lam * (M @ c)
    r_l = 0.5 * J0 @ Q @ J0 + c @ J0 + r + (J0 @ J0) / (2 * lam)
    return Quadratic(Ql, M @ c, r_l)


def _check_dim(u, dim):
    if np.shape(u)[-1] != dim:
        raise DimensionError(f"point has dimension {np.shape(u)[-1]}, objective expects {dim}")


@dataclass(frozen=True, eq=False)
class Quadratic(Objective):
    """1/2 <Q v, v> + <c, v> + r with Q symmetric positive semidefinite."""

    Q: np.ndarray
    c: np.ndarray = None
    r: float = 0.0
    kind = "quadratic"

    def __post_init__(self):
        Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        c = np.zeros(Q.shape[0]) if self.c is None else np.asarray(self.c, dtype=float).reshape(-1)
        if Q.shape != (c.size, c.size):
            raise DimensionError(f"Q has shape {Q.shape} but c has dimension {c.size}")
        if not np.allclose(Q, Q.T, atol=1e-12):
            raise ValueError("Q must be symmetric")
        if np.linalg.eigvalsh(Q).min() < -1e-10 * max(1.0, np.abs(Q).max()):
            raise ValueError("Q must be positive semidefinite")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "r", float(self.r))

    @property
    def dim(self):
        return self.c.size

    def value(self, u):
        u = np.asarray(u, dtype=float)
        _check_dim(u, self.dim)
        return 0.5 * np.einsum("...i,ij,...j->...", u, self.Q, u) + u @ self.c + self.r

    def gradient(self, u):
        return self.Q @ u + self.c

    def subdifferential(self, u):
        u = np.asarray(u, dtype=float)
        _check_dim(u, self.dim)
        return SubdifferentialSet.point(self.gradient(u))

    def directional_derivative(self, u, d):
        return float(self.gradient(np.asarray(u, dtype=float)) @ d)

    def prox(self, lam, v):
        return np.linalg.solve(np.eye(self.dim) + lam * self.Q, np.asarray(v, float) - lam * self.c)

    def minimizer(self):
        x = np.linalg.lstsq(self.Q, -self.c, rcond=None)[0]
        if np.linalg.norm(self.Q @ x + self.c) > 1e-9 * (1.0 + np.linalg.norm(self.c)):
            return None
        return x

    def lower_bound(self):
        x = self.minimizer()
        return -np.inf if x is None else float(self.value(x))

    def lower_bound_on(self, constraint):
        lb = self.lower_bound()
        if np.isfinite(lb) or np.any(self.Q):
            return lb
        return float(constraint.min_linear(self.c) + self.r)

    def curvature(self, u):
        return float(np.linalg.eigvalsh(self.Q).max())

    def envelope(self, lam):
        return _quadratic_envelope(self.Q, self.c, self.r, lam)

    def as_quadratic(self):
        return self.Q, self.c, self.r

    def to_dict(self):
        return {"kind": "quadratic", "Q": self.Q.tolist(), "c": self.c.tolist(), "r": self.r}


@dataclass(frozen=True, eq=False)
class Affine(Objective):
    """<a, v> + r."""

    a: np.ndarray
    r: float = 0.0
    kind = "affine"

    def __post_init__(self):
        object.__setattr__(self, "a", np.asarray(self.a, dtype=float).reshape(-1))
        object.__setattr__(self, "r", float(self.r))

    @property
    def dim(self):
        return self.a.size

    def value(self, u):
        u = np.asarray(u, dtype=float)
        _check_dim(u, self.dim)
        return u @ self.a + self.r

    def gradient(self, u):
        return self.a

    def subdifferential(self, u):
        _check_dim(np.asarray(u), self.dim)
        return SubdifferentialSet.point(self.a)

    def directional_derivative(self, u, d):
        return float(self.a @ d)

    def prox(self, lam, v):
        return np.asarray(v, dtype=float) - lam * self.a

    def lower_bound(self):
        return self.r if not np.any(self.a) else -np.inf

    def lower_bound_on(self, constraint):
        return float(constraint.min_linear(self.a) + self.r)

    def envelope(self, lam):
        return Affine(self.a, self.r - 0.5 * lam * (self.a @ self.a))

    def as_quadratic(self):
        return np.zeros((self.dim, self.dim)), self.a, self.r

    def to_dict(self):
        return {"kind": "affine", "a": self.a.tolist(), "r": self.r}


@dataclass(frozen=True, eq=False)
class L1(Objective):
    """weight * ||v||_1."""

    n: int
    weight: float = 1.0
    kind = "l1"

    def __post_init__(self):
        if self.weight <= 0:
            raise ValueError("l1 weight must be positive")
        if self.n < 1:
            raise ValueError("dimension must be positive")

    @property
    def dim(self):
        return self.n

    def value(self, u):
        u = np.asarray(u, dtype=float)
        _check_dim(u, self.dim)
        return self.weight * np.abs(u).sum(axis=-1)

    def subdifferential(self, u):
        u = np.asarray(u, dtype=float)
        _check_dim(u, self.dim)
        w = self.weight
        s = np.sign(u) * w
        lo = np.where(u == 0, -w, s)
        hi = np.where(u == 0, w, s)
        return SubdifferentialSet.box(lo, hi)

    def directional_derivative(self, u, d):
        u = np.asarray(u, dtype=float)
        d = np.asarray(d, dtype=float)
        return float(self.weight * np.where(u == 0, np.abs(d), np.sign(u) * d).sum())

    def prox(self, lam, v):
        v = np.asarray(v, dtype=float)
        return np.sign(v) * np.maximum(np.abs(v) - lam * self.weight, 0.0)

    def minimizer(self):
        return np.zeros(self.n)

    def lower_bound(self):
        return 0.0

    def kink_step(self, u, d):
        hit = (u != 0) & (u * d < 0)
        if not np.any(hit):
            return np.inf
        return float(np.min(-u[hit] / d[hit]))

    def snap(self, u, scale=1.0):
        return np.where(np.abs(u) <= _snap_tol(u, scale), 0.0, u)

    def envelope(self, lam):
        return HuberL1(self.n, self.weight, lam)

    def to_dict(self):
        return {"kind": "l1", "weight": self.weight}


@dataclass(frozen=True, eq=False)
class HuberL1(Objective):
    """Moreau envelope of weight * ||.||_1: a coordinatewise Huber function."""

    n: int
    weight: float
    lam: float
    kind = "huber_l1"

    def __post_init__(self):
        if self.weight <= 0 or self.lam <= 0:
            raise ValueError("huber weight and lambda must be positive")

    @property
    def dim(self):
        return self.n

    def value(self, u):
        u = np.asarray(u, dtype=float)
        _check_dim(u, self.dim)
        a = np.abs(u)
        w, lam = self.weight, self.lam
        return np.where(a <= lam * w, a * a / (2 * lam), w * a - 0.5 * lam * w * w).sum(axis=-1)

    def gradient(self, u):
        return np.clip(u / self.lam, -self.weight, self.weight)

    def subdifferential(self, u):
        u = np.asarray(u, dtype=float)
        _check_dim(u, self.dim)
        return SubdifferentialSet.point(self.gradient(u))

    def directional_derivative(self, u, d):
        return float(self.gradient(np.asarray(u, dtype=float)) @ d)

    def prox(self, lam, v):
        # prox of an envelope: J = v - lam/(lam+mu) (v - prox_{(lam+mu) f}(v))
        v = np.asarray(v, dtype=float)
        t = lam + self.lam
        inner = np.sign(v) * np.maximum(np.abs(v) - t * self.weight, 0.0)
        return v - (lam / t) * (v - inner)

    def minimizer(self):
        return np.zeros(self.n)

    def lower_bound(self):
        return 0.0

    def curvature(self, u):
        return 1.0 / self.lam

    def to_dict(self):
        return {"kind": "huber_l1", "weight": self.weight, "lambda": self.lam}


@dataclass(frozen=True, eq=False)
class EuclideanNorm(Objective):
    """weight * ||v||_2."""

    n: int
    weight: float = 1.0
    kind = "euclidean_norm"

    def __post_init__(self):
        if self.weight <= 0:
            raise ValueError("euclidean_norm weight must be positive")

    @property
    def dim(self):
        return self.n

    def value(self, u):
        u = np.asarray(u, dtype=float)
        _check_dim(u, self.dim)
        return self.weight * np.linalg.norm(u, axis=-1)

    def subdifferential(self, u):
        u = np.asarray(u, dtype=float)
        _check_dim(u, self.dim)
        nu = np.linalg.norm(u)
        if nu == 0:
            return SubdifferentialSet.ball(np.zeros(self.n), self.weight)
        return SubdifferentialSet.point(self.weight * u / nu)

    def prox(self, lam, v):
        v = np.asarray(v, dtype=float)
        nv = np.linalg.norm(v)
        if nv <= lam * self.weight:
            return np.zeros_like(v)
        return (1 - lam * self.weight / nv) * v

    def minimizer(self):
        return np.zeros(self.n)

    def lower_bound(self):
        return 0.0

    def kink_step(self, u, d):
        nu, nd = np.linalg.norm(u), np.linalg.norm(d)
        if nu == 0 or nd == 0:
            return np.inf
        if np.linalg.norm(u / nu + d / nd) <= 1e-12:
            return float(nu / nd)
        return np.inf

    def snap(self, u, scale=1.0):
        return np.zeros_like(u) if np.linalg.norm(u) <= _snap_tol(u, scale) else u

    def curvature(self, u):
        nu = np.linalg.norm(u)
        return self.weight / nu if nu > 0 else 0.0

    def to_dict(self):
        return {"kind": "euclidean_norm", "weight": self.weight}


@dataclass(frozen=True, eq=False)
class MaxAffine(Objective):
    """max_k <a_k, v> + b_k over the rows of A."""

    A: np.ndarray
    b: np.ndarray
    kind = "max_affine"

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.asarray(self.b, dtype=float).reshape(-1)
        if A.shape[0] != b.size:
            raise DimensionError(f"A has {A.shape[0]} rows but b has {b.size} entries")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @property
    def dim(self):
        return self.A.shape[1]

    def value(self, u):
        u = np.asarray(u, dtype=float)
        _check_dim(u, self.dim)
        return (u @ self.A.T + self.b).max(axis=-1)

    def active(self, u, eps=EPS_ACT):
        vals = self.A @ u + self.b
        return np.flatnonzero(vals >= vals.max() - eps)

    def subdifferential(self, u):
        u = np.asarray(u, dtype=float)
        _check_dim(u, self.dim)
        act = self.active(u)
        if act.size == 1:
            return SubdifferentialSet.point(self.A[act[0]])
        return SubdifferentialSet.polytope(self.A[act])

    def prox(self, lam, v, tol=1e-13, max_iter=20_000):
        # dual: min over the simplex of lam/2 ||A^T th||^2 - <th, A v + b>
        v = np.asarray(v, dtype=float)
        A = self.A
        c = A @ v + self.b
        m = A.shape[0]
        if m == 1:
            return v - lam * A[0]
        L = lam * np.linalg.norm(A, 2) ** 2
        if L == 0:
            return v.copy()
        th = np.zeros(m)
        th[int(np.argmax(c))] = 1.0
        y, t = th.copy(), 1.0
        scale = 1.0 + np.abs(c).max() + L
        for _ in range(max_iter):
            grad = lam * (A @ (A.T @ y)) - c
            th_new = project_simplex(y - grad / L)
            t_new = 0.5 * (1 + np.sqrt(1 + 4 * t * t))
            y = th_new + ((t - 1) / t_new) * (th_new - th)
            th, t = th_new, t_new
            xi = v - lam * A.T @ th
            gap = (self.value(xi) + np.sum((xi - v) ** 2) / (2 * lam)) - (th @ c - 0.5 * lam * np.sum((A.T @ th) ** 2))
            if gap <= tol * scale:
                break
        th = self._polish(lam, c, th)
        return v - lam * A.T @ th

    def _polish(self, lam, c, th):
        A = self.A
        S = np.flatnonzero(th > 1e-10)
        k = S.size
        M = np.zeros((k + 1, k + 1))
        M[:k, :k] = lam * A[S] @ A[S].T
        M[:k, k] = M[k, :k] = 1.0
        rhs = np.concatenate([c[S], [1.0]])
        sol = np.linalg.lstsq(M, rhs, rcond=None)[0]
        ts = sol[:k]
        if np.any(ts < 0):
            return th
        cand = np.zeros_like(th)
        cand[S] = ts
        g = lam * A @ (A.T @ cand) - c
        # KKT: every inactive gradient entry must be at least the support's level
        if np.all(g >= g[S].max() - 1e-10 * (1 + np.abs(g).max())):
            return cand
        return th

    def lower_bound(self):
        m, d = self.A.shape
        res = linprog(np.r_[np.zeros(d), 1.0], A_ub=np.c_[self.A, -np.ones(m)], b_ub=-self.b,
                      bounds=[(None, None)] * (d + 1), method="highs")
        if res.status == 3:
            return -np.inf
        if res.status != 0:
            raise ConvergenceError(f"lower bound LP failed: {res.message}")
        return float(res.fun)

    def kink_step(self, u, d):
        vals = self.A @ u + self.b
        fmax = vals.max()
        slopes = self.A @ d
        act = vals >= fmax - EPS_ACT
        m_act = slopes[act].max()
        num = fmax - vals[~act]
        den = slopes[~act] - m_act
        ok = den > 0
        if not np.any(ok):
            return np.inf
        return float(np.min(num[ok] / den[ok]))

    def to_dict(self):
        return {"kind": "max_affine", "A": self.A.tolist(), "b": self.b.tolist()}


@dataclass(frozen=True, eq=False)
class LeastSquares(Objective):
    """||A v - b||^2."""

    A: np.ndarray
    b: np.ndarray
    kind = "least_squares"

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.asarray(self.b, dtype=float).reshape(-1)
        if A.shape[0] != b.size:
            raise DimensionError(f"A has {A.shape[0]} rows but b has {b.size} entries")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @property
    def dim(self):
        return self.A.shape[1]

    def value(self, u):
        u = np.asarray(u, dtype=float)
        _check_dim(u, self.dim)
        r = u @ self.A.T - self.b
        return np.sum(r * r, axis=-1)

    def gradient(self, u):
        return 2.0 * self.A.T @ (self.A @ u - self.b)

    def subdifferential(self, u):
        u = np.asarray(u, dtype=float)
        _check_dim(u, self.dim)
        return SubdifferentialSet.point(self.gradient(u))

    def directional_derivative(self, u, d):
        return float(self.gradient(np.asarray(u, dtype=float)) @ d)

    def prox(self, lam, v):
        A = self.A
        rhs = np.asarray(v, dtype=float) + 2 * lam * A.T @ self.b
        return np.linalg.solve(np.eye(self.dim) + 2 * lam * A.T @ A, rhs)

    def minimizer(self):
        return np.linalg.lstsq(self.A, self.b, rcond=None)[0]

    def lower_bound(self):
        return float(self.value(self.minimizer()))

    def curvature(self, u):
        return 2.0 * np.linalg.norm(self.A, 2) ** 2

    def envelope(self, lam):
        return _quadratic_envelope(*self.as_quadratic(), lam)

    def as_quadratic(self):
        A, b = self.A, self.b
        return 2.0 * A.T @ A, -2.0 * A.T @ b, float(b @ b)

    def to_dict(self):
        return {"kind": "least_squares", "A": self.A.tolist(), "b": self.b.tolist()}


class MoreauEnvelope(Objective):
    """Generic Moreau envelope f_lam of a prox-capable objective."""

    kind = "moreau_envelope"

    def __init__(self, base, lam):
        if lam <= 0:
            raise ValueError("lambda must be positive")
        if not base.prox_supported:
            raise CapabilityError(f"prox is not available for {base.kind} objectives")
        self.base = base
        self.lam = float(lam)

    @property
    def dim(self):
        return self.base.dim

    def value(self, u):
        u = np.asarray(u, dtype=float)
        if u.ndim > 1:
            return np.array([self.value(x) for x in u.reshape(-1, self.dim)]).reshape(u.shape[:-1])
        return self.base.envelope_value(self.lam, u)

    def gradient(self, u):
        return self.base.yosida_gradient(self.lam, u)

    def subdifferential(self, u):
        return SubdifferentialSet.point(self.gradient(np.asarray(u, dtype=float)))

    def directional_derivative(self, u, d):
        return float(self.gradient(np.asarray(u, dtype=float)) @ d)

    def prox(self, lam, v):
        v = np.asarray(v, dtype=float)
        t = lam + self.lam
        return v - (lam / t) * (v - self.base.prox(t, v))

    def minimizer(self):
        return self.base.minimizer()

    def lower_bound(self):
        return self.base.lower_bound()

    def curvature(self, u):
        return 1.0 / self.lam

    def to_dict(self):
        return {"kind": "moreau_envelope", "lambda": self.lam, "base": self.base.to_dict()}


# ---------------------------------------------------------------- constraints


class ConstraintSet:
    """Nonempty closed convex set K with projection and normal-cone oracle."""

    kind = "abstract"
    polyhedral = True

    def __init__(self, dim):
        self.dim = int(dim)

    def project(self, v):
        raise NotImplementedError

    def contains(self, v, tol=FEAS_TOL):
        v = np.asarray(v, dtype=float)
        return bool(np.linalg.norm(self.project(v) - v) <= tol)

    def normal_generators(self, u, eps=EPS_ACT):
        raise NotImplementedError

    def min_linear(self, a):
        """inf over K of <a, v>."""
        raise NotImplementedError

    def kink_step(self, u, d):
        return np.inf

    def to_dict(self):
        raise NotImplementedError

    def _require_feasible(self, u):
        if not self.contains(u, FEAS_TOL):
            raise InfeasiblePointError(f"point is outside the {self.kind} constraint set")


class WholeSpace(ConstraintSet):
    kind = "whole_space"

    def project(self, v):
        return np.array(v, dtype=float)

    def contains(self, v, tol=FEAS_TOL):
        return True

    def normal_generators(self, u, eps=EPS_ACT):
        return ConeSpec.trivial(self.dim)

    def min_linear(self, a):
        return 0.0 if not np.any(a) else -np.inf

    def to_dict(self):
        return {"kind": "whole_space"}


class Box(ConstraintSet):
    kind = "box"

    def __init__(self, lower, upper):
        self.lower = np.asarray(lower, dtype=float).reshape(-1)
        self.upper = np.asarray(upper, dtype=float).reshape(-1)
        if self.lower.shape != self.upper.shape:
            raise DimensionError("box bounds differ in dimension")
        if np.any(self.lower > self.upper):
            raise ValueError("empty box: lower bound exceeds upper bound")
        super().__init__(self.lower.size)

    def project(self, v):
        return np.clip(np.asarray(v, dtype=float), self.lower, self.upper)

    def contains(self, v, tol=FEAS_TOL):
        v = np.asarray(v, dtype=float)
        return bool(np.all(v >= self.lower - tol) and np.all(v <= self.upper + tol))

    def normal_generators(self, u, eps=EPS_ACT):
        u = np.asarray(u, dtype=float)
        self._require_feasible(u)
        eye = np.eye(self.dim)
        gens = []
        for j in range(self.dim):
            if u[j] - self.lower[j] <= eps:
                gens.append(-eye[j])
            if self.upper[j] - u[j] <= eps:
                gens.append(eye[j])
        return ConeSpec.from_generators(gens, self.dim)

    def min_linear(self, a):
        return float(np.minimum(a * self.lower, a * self.upper).sum())

    def kink_step(self, u, d):
        t = np.inf
        up = (d > 0) & (self.upper - u > EPS_ACT)
        if np.any(up):
            t = min(t, float(np.min((self.upper[up] - u[up]) / d[up])))
        dn = (d < 0) & (u - self.lower > EPS_ACT)
        if np.any(dn):
            t = min(t, float(np.min((self.lower[dn] - u[dn]) / d[dn])))
        return t

    def to_dict(self):
        return {"kind": "box", "lower": self.lower.tolist(), "upper": self.upper.tolist()}


class Halfspaces(ConstraintSet):
    """Intersection of {v : <a_j, v> <= b_j}."""

    kind = "halfspaces"

    def __init__(self, A, b):
        self.A = np.atleast_2d(np.asarray(A, dtype=float))
        self.b = np.asarray(b, dtype=float).reshape(-1)
        if self.A.shape[0] != self.b.size:
            raise DimensionError(f"A has {self.A.shape[0]} rows but b has {self.b.size} entries")
        if np.any(np.linalg.norm(self.A, axis=1) == 0):
            raise ValueError("halfspace normals must be nonzero")
        super().__init__(self.A.shape[1])
        res = linprog(np.zeros(self.dim), A_ub=self.A, b_ub=self.b,
                      bounds=[(None, None)] * self.dim, method="highs")
        if res.status == 2:
            raise ValueError("halfspace intersection is empty")

    def project(self, v):
        v = np.asarray(v, dtype=float)
        if np.all(self.A @ v <= self.b):
            return v.copy()
        if self.A.shape[0] == 1:
            a = self.A[0]
            return v - max(0.0, a @ v - self.b[0]) / (a @ a) * a
        x, iters, res, status = kernels.dykstra_halfspaces(v, self.A, self.b, 1e-10, 10_000)
        if status:
            raise ConvergenceError("Dykstra projection onto halfspaces did not converge",
                                   best=x, residual=res, iterations=iters)
        return x

    def contains(self, v, tol=FEAS_TOL):
        v = np.asarray(v, dtype=float)
        return bool(np.all((self.A @ v - self.b) / np.linalg.norm(self.A, axis=1) <= tol))

    def normal_generators(self, u, eps=EPS_ACT):
        u = np.asarray(u, dtype=float)
        self._require_feasible(u)
        act = self.b - self.A @ u <= eps
        return ConeSpec.from_generators(self.A[act], self.dim)

    def min_linear(self, a):
        res = linprog(a, A_ub=self.A, b_ub=self.b, bounds=[(None, None)] * self.dim, method="highs")
        if res.status == 3:
            return -np.inf
        return float(res.fun)

    def kink_step(self, u, d):
        slack = self.b - self.A @ u
        rate = self.A @ d
        hit = (rate > 0) & (slack > EPS_ACT)
        if not np.any(hit):
            return np.inf
        return float(np.min(slack[hit] / rate[hit]))

    def to_dict(self):
        return {"kind": "halfspaces", "A": self.A.tolist(), "b": self.b.tolist()}


class Ball(ConstraintSet):
    kind = "ball"
    polyhedral = False

    def __init__(self, center, radius):
        self.center = np.asarray(center, dtype=float).reshape(-1)
        self.radius = float(radius)
        if self.radius < 0:
            raise ValueError("ball radius must be nonnegative")
        super().__init__(self.center.size)

    def project(self, v):
        v = np.asarray(v, dtype=float)
        r = v - self.center
        nr = np.linalg.norm(r)
        if nr <= self.radius:
            return v.copy()
        return self.center + r * (self.radius / nr)

    def contains(self, v, tol=FEAS_TOL):
        return bool(np.linalg.norm(np.asarray(v, dtype=float) - self.center) <= self.radius + tol)

    def normal_generators(self, u, eps=EPS_ACT):
        u = np.asarray(u, dtype=float)
        self._require_feasible(u)
        r = u - self.center
        nr = np.linalg.norm(r)
        if nr >= self.radius - eps and nr > 0:
            return ConeSpec.from_generators(r / nr, self.dim)
        return ConeSpec.trivial(self.dim)

    def min_linear(self, a):
        return float(a @ self.center - self.radius * np.linalg.norm(a))

    def to_dict(self):
        return {"kind": "ball", "center": self.center.tolist(), "radius": self.radius}


# ------------------------------------------------------------------- problems


@dataclass(frozen=True, eq=False)
class Problem:
    """min {(f_1(v), ..., f_q(v)) : v in K}."""

    objectives: tuple
    constraint: ConstraintSet
    name: str = "custom"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        objs = tuple(self.objectives)
        if not objs:
            raise ValueError("a problem needs at least one objective")
        dims = {f.dim for f in objs}
        if len(dims) != 1:
            raise DimensionError(f"objectives have different dimensions {sorted(dims)}")
        if self.constraint.dim != objs[0].dim:
            raise DimensionError(f"objective dimension {objs[0].dim} does not match "
                                 f"constraint dimension {self.constraint.dim}")
        object.__setattr__(self, "objectives", objs)

    @property
    def dim(self):
        return self.objectives[0].dim

    @property
    def q(self):
        return len(self.objectives)

    def values(self, u):
        return np.array([f.value(u) for f in self.objectives], dtype=float)

    def subdifferentials(self, u):
        return [f.subdifferential(u) for f in self.objectives]

    def kink_step(self, u, d):
        t = self.constraint.kink_step(u, d) if self.constraint.polyhedral else np.inf
        for f in self.objectives:
            t = min(t, f.kink_step(u, d))
        return t

    def snap(self, u, scale=1.0):
        for f in self.objectives:
            u = f.snap(u, scale)
        return self.constraint.project(u)

    def lower_bounds(self):
        """Tighter of inf over the whole space and inf over K, per objective."""
        out = []
        for f in self.objectives:
            lb_h = f.lower_bound()
            lb_k = f.lower_bound_on(self.constraint)
            out.append(max(lb_h, lb_k))
        return np.array(out)

    def to_dict(self):
        return {"dim": self.dim, "name": self.name,
                "objectives": [f.to_dict() for f in self.objectives],
                "constraint": self.constraint.to_dict()}


# ---------------------------------------------------------- functional forms


def value(f, u):
    return float(f.value(as_vector(u, f.dim, "u")))


def subdifferential(f, u):
    return f.subdifferential(as_vector(u, f.dim, "u"))


def directional_derivative(f, u, d):
    return float(f.directional_derivative(as_vector(u, f.dim, "u"), as_vector(d, f.dim, "d")))


def prox(f, lam, v):
    if lam <= 0:
        raise ValueError("lambda must be positive")
    return f.prox(lam, as_vector(v, f.dim, "v"))


def yosida_gradient(f, lam, v):
    if lam <= 0:
        raise ValueError("lambda must be positive")
    return f.yosida_gradient(lam, as_vector(v, f.dim, "v"))


def envelope_value(f, lam, v):
    if lam <= 0:
        raise ValueError("lambda must be positive")
    return f.envelope_value(lam, as_vector(v, f.dim, "v"))


def constraint_project(K, v):
    return K.project(as_vector(v, K.dim, "v"))


def normal_generators(K, u):
    return K.normal_generators(as_vector(u, K.dim, "u"))


# ------------------------------------------------------------------- library


def _example1():
    I = np.eye(2)
    return Problem((Quadratic(I, [1.0, 0.0], 0.5), Quadratic(I, [-1.0, 0.0], 0.5)),
                   WholeSpace(2), "example1")


def _example2():
    return Problem((Quadratic(np.diag([1.0, 0.0]), [0.0, 0.0]),
                    Quadratic(np.diag([0.0, 1.0]), [0.0, 0.0])), WholeSpace(2), "example2")


def _example3():
    return Problem((Quadratic(np.eye(2), [0.0, 0.0]), Affine([1.0, 0.0])), WholeSpace(2), "example3")


def sparse_data(seed=SPARSE_SEED, m=10, n=30, k=3):
    """Seeded Gaussian design ``A``, ``k``-sparse ground truth and ``b = A x*``."""
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((m, n))
    x_star = np.zeros(n)
    support = np.sort(rng.choice(n, size=k, replace=False))
    x_star[support] = rng.standard_normal(k)
    return A, A @ x_star, x_star


def _sparse(alpha=1.0):
    A, b, x_star = sparse_data()
    return Problem((LeastSquares(A, b), L1(A.shape[1], alpha)), WholeSpace(A.shape[1]), "sparse",
                   meta={"x_star": x_star})


BUILTIN_PROBLEMS = {
    "example1": _example1,
    "example2": _example2,
    "example3": _example3,
    "sparse": _sparse,
}


def builtin_problem(name):
    try:
        return BUILTIN_PROBLEMS[name]()
    except KeyError:
        raise ValueError(f"unknown built-in problem {name!r}; choose from {sorted(BUILTIN_PROBLEMS)}") from None


def closed_form_field(name, u):
    """Steepest-descent field of the planar examples, written out by region."""
    x, y = as_vector(u, 2, "u")
    if name == "example1":
        if x > 1:
            return -np.array([x - 1, y])
        if x < -1:
            return -np.array([x + 1, y])
        return -np.array([0.0, y])
    if name == "example2":
        den = x * x + y * y
        if den == 0:
            return np.zeros(2)
        return -np.array([x * y * y, y * x * x]) / den
    if name == "example3":
        if x >= 1:
            return np.array([-1.0, 0.0])
        if (x - 0.5) ** 2 + y * y <= 0.25:
            return -np.array([x, y])
        return -np.array([y * y, y * (1 - x)]) / ((x - 1) ** 2 + y * y)
    raise ValueError(f"no closed-form field for {name!r}")
