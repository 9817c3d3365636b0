"""Multiobjective steepest-descent direction and its equivalent formulations."""
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .convex_core import (
    DEFAULT_TOL, MAX_ITER, ConeSpec, is_simplex, min_norm_packed, pack_groups, project_simplex,
    as_vector,
)
from .errors import ConvergenceError, InfeasiblePointError
from .objectives import FEAS_TOL, WholeSpace

SUBGRAD_ITERS = 100_000
ANGULAR_GRID = 1_000_000


@dataclass(frozen=True)
class DirectionResult:
    """s(u) with its certificate ``s + eta + sum_i theta_i v_i = 0``."""

    s: np.ndarray
    theta: np.ndarray
    subgradients: np.ndarray
    normal_component: np.ndarray
    residual: float
    solver_iters: int
    cone: ConeSpec = None
    subdifferentials: tuple = ()

    def reconstruction_error(self):
        return float(np.linalg.norm(self.s + self.normal_component + self.theta @ self.subgradients))


def _feasible(P, u):
    u = as_vector(u, P.dim, "u")
    if not P.constraint.contains(u, FEAS_TOL):
        raise InfeasiblePointError("u is not in the constraint set (tolerance 1e-9)")
    return u


def direction_from_groups(groups, cone, dim, tol=DEFAULT_TOL, max_iter=MAX_ITER):
    """-(min-norm element of conv(groups) + cone), groups being weighted Minkowski sums.

    Returns ``(s, group_weights, group_picks, eta, iterations)``.
    """
    packed = pack_groups(groups, dim, cone)
    res = min_norm_packed(packed, tol=tol, max_iter=max_iter)
    eta = res.multipliers @ cone.generators if cone is not None and cone.m else np.zeros(dim)
    return -res.z, res.theta, res.picks, eta, res.iterations


def _two_point(g1, g2):
    """Minimum-norm point of the segment [g1, g2]; weight on g1 first."""
    e = g1 - g2
    ee = e @ e
    t = 0.0 if ee == 0.0 else min(1.0, max(0.0, -(g2 @ e) / ee))
    return t * g1 + (1.0 - t) * g2, np.array([t, 1.0 - t])


def steepest_direction(P, u, tol=DEFAULT_TOL, max_iter=MAX_ITER):
    """Steepest common descent direction s(u) with endogenous weights."""
    u = _feasible(P, u)
    subs = P.subdifferentials(u)
    cone = P.constraint.normal_generators(u)
    if not cone.m and len(subs) <= 2 and all(b.kind == "point" for b in subs):
        # smooth and unconstrained at u: the hull is a point or a segment
        picks = np.array([b.lower for b in subs])
        if len(subs) == 1:
            z, theta = picks[0].copy(), np.ones(1)
        else:
            z, theta = _two_point(picks[0], picks[1])
        return DirectionResult(-z, theta, picks, np.zeros(P.dim), float(np.linalg.norm(z)), 0,
                               cone, tuple(subs))
    s, theta, picks, eta, iters = direction_from_groups([[(b, 1.0)] for b in subs], cone, P.dim,
                                                        tol, max_iter)
    return DirectionResult(s, theta, picks, eta, float(np.linalg.norm(s)), iters, cone, tuple(subs))


def regularized_direction(P, u, mu, tol=DEFAULT_TOL, max_iter=20_000):
    """argmin over d in K - u of ||d||^2 / (2 mu) + max_i df_i(u, d).

    Without constraints the minimiser is ``mu * s(u)`` and is returned from the
    min-norm solve directly. Otherwise a saddle-point iteration alternates a
    d-step (projection onto K), a theta-step (simplex projection) and a p-step
    (linear minimisation over each subdifferential) until the primal-dual gap
    drops below ``tol``.
    """
    if mu <= 0:
        raise ValueError("mu must be positive")
    u = _feasible(P, u)
    if isinstance(P.constraint, WholeSpace):
        return mu * steepest_direction(P, u, tol=tol).s
    subs = P.subdifferentials(u)
    q = len(subs)
    p = np.array([b.lmo(np.zeros(P.dim)) for b in subs])
    theta = np.full(q, 1.0 / q)
    K = P.constraint
    best_d, best_gap = None, np.inf
    for _ in range(max_iter):
        pbar = theta @ p
        d = K.project(u - mu * pbar) - u
        sup = np.array([b.support(d) for b in subs])
        gap = sup.max() - pbar @ d
        if gap < best_gap:
            best_d, best_gap = d, gap
        if gap <= tol:
            return d
        # theta-step: ascent on <sum theta_i p_i, d>
        scale = mu * max(1e-300, float(np.max(np.sum(p * p, axis=1))))
        theta = project_simplex(theta + (p @ d) / scale)
        # p-step: Frank-Wolfe move of each pick toward its maximiser of <., d>
        for i, b in enumerate(subs):
            v = b.lmo(-d)
            step = v - p[i]
            num = theta[i] * (step @ d)
            den = mu * theta[i] ** 2 * (step @ step)
            if num > 0 and den > 0:
                p[i] = p[i] + min(1.0, num / den) * step
    raise ConvergenceError("regularized direction did not converge", best=best_d, residual=best_gap)


@dataclass(frozen=True)
class EquivalenceReport:
    s: np.ndarray
    r: float
    d2: np.ndarray
    d2_expected: np.ndarray
    d3: np.ndarray
    d3_expected: np.ndarray
    discrepancy_form2: float
    discrepancy_form3: float


def _unit_argmin_nd(packed, dim, rng, n_samples=20_000, rounds=60):
    """Normalized brute force for the third formulation in dimension > 2."""
    args = packed.arrays
    vg, neg, tmp, tmp2 = (np.zeros(dim) for _ in range(4))
    zm = np.zeros(packed.gens.shape[0])

    def val(d):
        return kernels.max_support(*args, d, vg, neg, tmp, tmp2)

    def feasible_unit(d):
        d = d.copy()
        if packed.gens.shape[0]:
            kernels._tangent_project_inplace(d, packed.gens, zm)
        n = np.linalg.norm(d)
        return d / n if n > 1e-12 else None

    best, best_v = None, np.inf
    for d in rng.standard_normal((n_samples, dim)):
        d = feasible_unit(d)
        if d is not None:
            v = val(d)
            if v < best_v:
                best, best_v = d, v
    radius = 0.1
    for _ in range(rounds):
        improved = False
        for d in best + radius * rng.standard_normal((200, dim)):
            d = feasible_unit(d)
            if d is not None:
                v = val(d)
                if v < best_v:
                    best, best_v, improved = d, v, True
        if not improved:
            radius *= 0.5
    return best


def check_formulation_equivalence(P, u, r=2.0, tol=DEFAULT_TOL, n_iter=SUBGRAD_ITERS,
                                  grid=ANGULAR_GRID, c=None, seed=0, third_form=True):
    """Compare brute-force minimisers of the second and third formulations with s(u).

    Second form: argmin over d in T_K(u) of ||d||^r / r + max_i df_i(u, d),
    solved by projected subgradient with steps ``c / sqrt(k)``. Its closed form
    is ``s / ||s||^((r-2)/(r-1))``. Third form: argmin of max_i df_i(u, d) over
    unit tangent d, by angular grid in the plane; closed form ``s / ||s||``.
    The third form does not depend on ``r``; ``third_form=False`` skips it.
    """
    if r <= 1:
        raise ValueError("r must exceed 1")
    res = steepest_direction(P, u, tol=tol)
    if res.residual <= 10 * tol:
        raise ValueError("formulation check requires a non-critical point")
    u = as_vector(u, P.dim, "u")
    s, ns = res.s, res.residual
    d2_exp = s / ns ** ((r - 2) / (r - 1))
    d3_exp = s / ns
    packed = pack_groups([[(b, 1.0)] for b in res.subdifferentials], P.dim, res.cone)
    if c is None:
        # step scale ~ size of the minimiser over the size of the subgradients
        G = max(1.0, max(np.abs(b.extreme_points(limit=64)).max() for b in res.subdifferentials))
        c = 0.15 * max(ns, 1.0) ** (1.0 / (r - 1)) / G
    d2 = kernels.subgradient_powered(*packed.arrays, packed.gens, float(r), float(c), int(n_iter))
    if not third_form:
        d3 = np.full(P.dim, np.nan)
    elif P.dim == 2:
        idx, _ = kernels.angular_argmin(*packed.arrays, packed.gens, int(grid))
        ang = 2.0 * math.pi * idx / grid
        d3 = np.array([math.cos(ang), math.sin(ang)])
    else:
        d3 = _unit_argmin_nd(packed, P.dim, np.random.default_rng(seed))
    return EquivalenceReport(s, float(r), d2, d2_exp, d3, d3_exp,
                             float(np.linalg.norm(d2 - d2_exp)), float(np.linalg.norm(d3 - d3_exp)))


def check_certificate(res, tol=DEFAULT_TOL):
    """Reconstruction, descent and tangency residuals of a DirectionResult."""
    s = res.s
    desc = max((float(np.max(b.extreme_points() @ s)) for b in res.subdifferentials), default=-np.inf)
    tang = float(np.max(res.cone.generators @ s)) if res.cone is not None and res.cone.m else -np.inf
    return {
        "reconstruction": res.reconstruction_error(),
        "descent_margin": desc + float(s @ s),
        "tangency": tang,
        "theta_valid": is_simplex(res.theta),
    }
