"""Convex geometry: simplex and cone projections, minimum-norm points.

Vectors are plain 1-D ``float64`` numpy arrays; ``as_vector`` is the single
validation gate.  Subdifferentials are represented by ``SubdifferentialSet``
(point, box, polytope or euclidean ball), which keeps every linear
minimisation over them closed-form.
"""
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from . import kernels
from .errors import ConvergenceError, DimensionError

DEFAULT_TOL = 1e-10
MAX_ITER = 100_000
MULTIPLIER_CAP = 1e8
DYKSTRA_MAX_ITER = 10_000

_KIND_CODES = {"point": 0, "box": 1, "polytope": 2, "ball": 3}


def as_vector(x, dim=None, name="vector"):
    v = np.array(x, dtype=float, copy=True).reshape(-1) if np.ndim(x) else np.array([float(x)])
    if v.size == 0:
        raise DimensionError(f"{name} must have at least one coordinate")
    if dim is not None and v.size != dim:
        raise DimensionError(f"{name} has dimension {v.size}, expected {dim}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} has non-finite coordinates")
    return v


def is_simplex(theta, tol=1e-12):
    theta = np.asarray(theta, dtype=float)
    return bool(np.all(theta >= -tol) and np.all(theta <= 1 + tol) and abs(theta.sum() - 1.0) <= tol)


def project_simplex(x, q=None):
    """Euclidean projection onto the unit simplex S^q."""
    x = np.asarray(x, dtype=float).reshape(-1)
    if q is None:
        q = x.size
    if q < 1 or x.size != q:
        raise DimensionError(f"expected {q} weights, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise ValueError("weights must be finite")
    return kernels.project_simplex(np.ascontiguousarray(x))


@dataclass(frozen=True, eq=False)
class SubdifferentialSet:
    """Closed convex bounded set of slopes.

    ``kind`` is one of ``point``, ``box``, ``polytope``, ``ball``.  Points
    and boxes use ``lower``/``upper`` (equal for a point), polytopes use
    ``vertices`` (one per row), balls use ``center``/``radius``.
    """

    kind: str
    lower: Optional[np.ndarray] = None
    upper: Optional[np.ndarray] = None
    vertices: Optional[np.ndarray] = None
    center: Optional[np.ndarray] = None
    radius: float = 0.0

    @classmethod
    def point(cls, g):
        g = np.asarray(g, dtype=float).reshape(-1)
        return cls("point", lower=g, upper=g)

    @classmethod
    def box(cls, lower, upper):
        lower = np.asarray(lower, dtype=float).reshape(-1)
        upper = np.asarray(upper, dtype=float).reshape(-1)
        if lower.shape != upper.shape:
            raise DimensionError("box bounds differ in dimension")
        if np.any(lower > upper):
            raise ValueError("box lower bound exceeds upper bound")
        return cls("box", lower=lower, upper=upper)

    @classmethod
    def polytope(cls, vertices):
        V = np.atleast_2d(np.asarray(vertices, dtype=float))
        if V.shape[0] < 1:
            raise ValueError("polytope needs at least one vertex")
        return cls("polytope", vertices=V)

    @classmethod
    def ball(cls, center, radius):
        if radius < 0:
            raise ValueError("radius must be nonnegative")
        return cls("ball", center=np.asarray(center, dtype=float).reshape(-1), radius=float(radius))

    @property
    def dim(self):
        if self.kind == "polytope":
            return self.vertices.shape[1]
        if self.kind == "ball":
            return self.center.size
        return self.lower.size

    def support(self, d):
        """sup of <p, d> over the set."""
        d = np.asarray(d, dtype=float)
        if self.kind in ("point", "box"):
            return float(np.maximum(self.lower * d, self.upper * d).sum())
        if self.kind == "polytope":
            return float((self.vertices @ d).max())
        return float(self.center @ d + self.radius * np.linalg.norm(d))

    def lmo(self, z):
        """A minimiser of <z, p> over the set (lowest index on ties)."""
        z = np.asarray(z, dtype=float)
        if self.kind in ("point", "box"):
            return np.where(z < 0, self.upper, self.lower)
        if self.kind == "polytope":
            return self.vertices[int(np.argmin(self.vertices @ z))].copy()
        nz = np.linalg.norm(z)
        return self.center - (self.radius * z / nz if nz > 0 else 0.0)

    def contains(self, p, tol=1e-9):
        p = np.asarray(p, dtype=float)
        if self.kind in ("point", "box"):
            return bool(np.all(p >= self.lower - tol) and np.all(p <= self.upper + tol))
        if self.kind == "ball":
            return bool(np.linalg.norm(p - self.center) <= self.radius + tol)
        V = self.vertices
        if V.shape[0] == 1:
            return bool(np.linalg.norm(p - V[0]) <= tol)
        res = min_norm_point(ConvexHullSpec([SubdifferentialSet.polytope(V - p)]), tol=1e-14)
        return bool(np.linalg.norm(res.z) <= tol)

    def min_norm_element(self):
        if self.kind in ("point", "box"):
            return np.clip(0.0, self.lower, self.upper)
        if self.kind == "ball":
            nc = np.linalg.norm(self.center)
            if nc <= self.radius:
                return np.zeros_like(self.center)
            return self.center * (1 - self.radius / nc)
        return min_norm_point(ConvexHullSpec([self]), tol=1e-14).z

    def extreme_points(self, limit=4096):
        """Vertices (boxes: all corners if at most ``limit``, else the two
        extreme corners plus one corner per coordinate flip)."""
        if self.kind == "polytope":
            return self.vertices.copy()
        if self.kind == "point":
            return self.lower[None, :].copy()
        if self.kind == "ball":
            d = self.dim
            eye = np.eye(d)
            return np.vstack([self.center + self.radius * eye, self.center - self.radius * eye])
        free = np.flatnonzero(self.upper > self.lower)
        if 2 ** len(free) <= limit:
            out = np.repeat(self.lower[None, :], 2 ** len(free), axis=0)
            for k in range(2 ** len(free)):
                for bit, j in enumerate(free):
                    if (k >> bit) & 1:
                        out[k, j] = self.upper[j]
            return out
        rows = [self.lower.copy(), self.upper.copy()]
        for j in free:
            r = self.lower.copy()
            r[j] = self.upper[j]
            rows.append(r)
        return np.array(rows)


@dataclass(frozen=True, eq=False)
class ConeSpec:
    """Polyhedral cone spanned by nonnegative combinations of ``generators``."""

    generators: np.ndarray
    kind: str = "polyhedral"

    def __post_init__(self):
        G = np.atleast_2d(np.asarray(self.generators, dtype=float))
        object.__setattr__(self, "generators", G)
        if self.kind == "trivial" and G.shape[0]:
            raise ValueError("trivial cone carries no generators")
        if G.shape[0] and np.any(np.linalg.norm(G, axis=1) == 0):
            raise ValueError("cone generators must be nonzero")

    @classmethod
    def trivial(cls, dim):
        return cls(np.zeros((0, dim)), kind="trivial")

    @classmethod
    def from_generators(cls, generators, dim):
        G = np.asarray(generators, dtype=float).reshape(-1, dim)
        return cls(G, kind="polyhedral" if G.shape[0] else "trivial")

    @property
    def dim(self):
        return self.generators.shape[1]

    @property
    def m(self):
        return self.generators.shape[0]

    def unit_generators(self):
        G = self.generators
        if not G.shape[0]:
            return G, np.ones(0)
        nrm = np.linalg.norm(G, axis=1)
        return np.ascontiguousarray(G / nrm[:, None]), nrm


@dataclass(frozen=True, eq=False)
class ConvexHullSpec:
    """conv of the union of ``blocks`` (one block per objective)."""

    blocks: list
    weights_free: bool = True

    def __post_init__(self):
        if not len(self.blocks):
            raise ValueError("convex hull needs at least one block")
        dims = {b.dim for b in self.blocks}
        if len(dims) != 1:
            raise DimensionError(f"blocks have different dimensions {sorted(dims)}")

    @property
    def dim(self):
        return self.blocks[0].dim


class MinNormResult(NamedTuple):
    z: np.ndarray
    theta: np.ndarray
    picks: np.ndarray
    multipliers: np.ndarray
    iterations: int
    gap: float


@dataclass
class PackedSet:
    """Flat-array form of ``conv(groups) + cone`` consumed by the kernels."""

    kinds: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    rad: np.ndarray
    vptr: np.ndarray
    verts: np.ndarray
    scale: np.ndarray
    gptr: np.ndarray
    gens: np.ndarray
    gen_norms: np.ndarray = field(default_factory=lambda: np.ones(0))

    @property
    def arrays(self):
        return (self.kinds, self.lo, self.hi, self.rad, self.vptr, self.verts,
                self.scale, self.gptr)


def pack_groups(groups, dim, cone=None):
    """Pack ``groups`` (lists of ``(SubdifferentialSet, weight)``) for the kernels.

    Each group is the weighted Minkowski sum of its blocks; the packed set is
    the convex hull of the groups plus the cone.
    """
    blocks = [b for grp in groups for b in grp]
    nb = len(blocks)
    kinds = np.empty(nb, dtype=np.int64)
    lo = np.zeros((nb, dim))
    hi = np.zeros((nb, dim))
    rad = np.zeros(nb)
    scale = np.empty(nb)
    vptr = np.zeros(nb + 1, dtype=np.int64)
    verts = []
    nv = 0
    for i, (s, wgt) in enumerate(blocks):
        if s.dim != dim:
            raise DimensionError(f"subdifferential has dimension {s.dim}, expected {dim}")
        kinds[i] = _KIND_CODES[s.kind]
        scale[i] = wgt
        if s.kind in ("point", "box"):
            lo[i] = s.lower
            hi[i] = s.upper
        elif s.kind == "ball":
            lo[i] = s.center
            hi[i] = s.center
            rad[i] = s.radius
        else:
            verts.append(s.vertices)
            nv += s.vertices.shape[0]
        vptr[i + 1] = nv
    gptr = np.zeros(len(groups) + 1, dtype=np.int64)
    gptr[1:] = np.cumsum([len(g) for g in groups])
    V = np.ascontiguousarray(np.vstack(verts)) if verts else np.zeros((0, dim))
    if cone is None:
        gens, gnorm = np.zeros((0, dim)), np.ones(0)
    else:
        if cone.m and cone.dim != dim:
            raise DimensionError(f"cone generators have dimension {cone.dim}, expected {dim}")
        gens, gnorm = cone.unit_generators()
        gens = gens.reshape(-1, dim)
    return PackedSet(kinds, lo, hi, rad, vptr, V, scale, gptr, gens, gnorm)


def pack_points(G):
    """Fast path: convex hull of the rows of ``G`` with a trivial cone."""
    q, dim = G.shape
    return PackedSet(np.zeros(q, dtype=np.int64), G, G, np.zeros(q),
                     np.zeros(q + 1, dtype=np.int64), np.zeros((0, dim)), np.ones(q),
                     np.arange(q + 1, dtype=np.int64), np.zeros((0, dim)), np.ones(0))


def min_norm_packed(P, tol=DEFAULT_TOL, max_iter=MAX_ITER):
    """Run the minimum-norm solver on a ``PackedSet`` and unpack the certificate."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    x, atoms, w, tags, iters, gap, status = kernels.wolfe_min_norm(
        *P.arrays, P.gens, float(tol), int(max_iter), MULTIPLIER_CAP)
    if status == kernels.WOLFE_MAX_ITER:
        raise ConvergenceError(f"min-norm solver hit the iteration cap ({max_iter})",
                               best=x, residual=gap)
    if status == kernels.WOLFE_MULTIPLIER_CAP:
        raise ConvergenceError("cone multiplier exceeded cap; normal directions degenerate",
                               best=x, residual=gap)
    ng = len(P.gptr) - 1
    dim = P.lo.shape[1]
    theta = np.zeros(ng)
    picks = np.zeros((ng, dim))
    mult = np.zeros(P.gens.shape[0])
    for a in range(len(w)):
        t = tags[a]
        if t >= 0:
            theta[t] += w[a]
            picks[t] += w[a] * atoms[a]
        else:
            mult[-t - 1] += w[a]
    tmp = np.zeros(dim)
    for g in range(ng):
        if theta[g] > 0:
            picks[g] /= theta[g]
        else:
            kernels.group_lmo(g, *P.arrays, x, picks[g], tmp)
    theta = np.clip(theta, 0.0, None)
    theta /= theta.sum()
    if P.gens.shape[0]:
        mult = mult / P.gen_norms
    return MinNormResult(x, theta, picks, mult, int(iters), float(gap))


def min_norm_point(hull, cone=None, tol=DEFAULT_TOL, max_iter=MAX_ITER):
    """Minimum-norm element of conv(hull.blocks) + cone.

    Returns ``z``, the weights ``theta`` on the simplex, one selected element
    ``picks[i]`` per block and nonnegative ``multipliers`` on the generators,
    with ``z = sum theta_i picks_i + sum multipliers_j g_j``.  ``tol`` bounds the
    optimality residual ``-min <z, y - z>`` over the set, not the distance to
    the exact minimiser.
    """
    P = pack_groups([[(b, 1.0)] for b in hull.blocks], hull.dim, cone)
    return min_norm_packed(P, tol=tol, max_iter=max_iter)


def project_cone_polar(v, cone):
    """Moreau decomposition ``v = t + n`` with n in the cone, t in its polar."""
    v = as_vector(v, cone.dim, "v")
    if not cone.m:
        return v.copy(), np.zeros_like(v)
    res = min_norm_point(ConvexHullSpec([SubdifferentialSet.point(-v)]), cone, tol=1e-15)
    t = -res.z
    n = res.multipliers @ cone.generators
    return t, n


def _orthogonal(G):
    if G.shape[0] < 2:
        return True
    gram = G @ G.T
    off = gram - np.diag(np.diag(gram))
    return bool(np.all(np.abs(off) <= 1e-14 * np.max(np.abs(np.diag(gram)))))


def project_polyhedral_tangent(v, cone, tol=DEFAULT_TOL):
    """Projection onto {d : <g_j, d> <= 0 for every generator g_j}.

    Mutually orthogonal generators (one generator, box corners) are handled
    in closed form; anything else goes through Dykstra's algorithm.
    """
    v = as_vector(v, cone.dim, "v")
    if tol <= 0:
        raise ValueError("tol must be positive")
    if not cone.m:
        return v
    U, _ = cone.unit_generators()
    if _orthogonal(U):
        d = v.copy()
        for g in U:
            d -= max(0.0, float(g @ d)) * g
        return d
    x, iters, res, status = kernels.dykstra_halfspaces(v, U, np.zeros(U.shape[0]), float(tol),
                                                       DYKSTRA_MAX_ITER)
    if status:
        raise ConvergenceError("Dykstra projection did not converge", best=x, residual=res,
                               iterations=iters)
    return x
