"""Pareto criticality, brute-force weak Pareto oracle and front sampling."""
import itertools
from dataclasses import dataclass

import numpy as np

from .convex_core import as_vector
from .direction import steepest_direction
from .dynamics import SolverConfig, run_mog
from .errors import CapabilityError, ParetoFlowError
from .objectives import Ball, Box, Halfspaces, WholeSpace

BRUTE_MAX_DIM = 3
_CHUNK = 250_000


@dataclass(frozen=True)
class ParetoReport:
    point: np.ndarray
    residual: float
    weights: np.ndarray
    critical: bool
    weak_pareto_bruteforce: bool = None
    dominated_by: np.ndarray = None


def check_critical(P, u, tol=1e-8, bruteforce=False, **brute_kw):
    """Pareto criticality via the residual ||s(u)||; optionally cross-checked by brute force."""
    u = as_vector(u, P.dim, "u")
    res = steepest_direction(P, u, tol=min(tol, 1e-10))
    weak, dom = None, None
    if bruteforce:
        weak, dom = weak_pareto_witness(P, u, **brute_kw)
    return ParetoReport(u, res.residual, res.theta, bool(res.residual <= tol), weak, dom)


def dominates(y, z, margin=0.0):
    """Strict order: y_i < z_i - margin for every i."""
    return bool(np.all(np.asarray(y) < np.asarray(z) - margin))


def nondominated_mask(Y, margin=0.0):
    """True for rows of ``Y`` that no other row strictly dominates."""
    Y = np.asarray(Y, dtype=float)
    n = Y.shape[0]
    mask = np.ones(n, dtype=bool)
    ok = np.all(np.isfinite(Y), axis=1)
    mask[~ok] = False
    for j in range(n):
        if not ok[j]:
            continue
        others = Y[ok]
        if np.any(np.all(others < Y[j] - margin, axis=1)):
            mask[j] = False
    return mask


def _in_constraint(K, V, tol=1e-9):
    if isinstance(K, WholeSpace):
        return np.ones(V.shape[0], dtype=bool)
    if isinstance(K, Box):
        return np.all((V >= K.lower - tol) & (V <= K.upper + tol), axis=1)
    if isinstance(K, Halfspaces):
        return np.all(V @ K.A.T <= K.b + tol, axis=1)
    if isinstance(K, Ball):
        return np.linalg.norm(V - K.center, axis=1) <= K.radius + tol
    return np.array([K.contains(v, tol) for v in V])


def _default_box(u):
    lo = np.minimum(-2.0, u - 1.0)
    hi = np.maximum(2.0, u + 1.0)
    return lo, hi


def weak_pareto_witness(P, u, box=None, grid_n=201, margin=1e-3):
    """Grid search for a feasible v with f_i(v) < f_i(u) - margin for all i.

    Returns ``(is_weak_pareto, witness_or_None)``.
    """
    if P.dim > BRUTE_MAX_DIM:
        raise CapabilityError(f"brute-force oracle supports dim <= {BRUTE_MAX_DIM}, got {P.dim}")
    u = as_vector(u, P.dim, "u")
    lo, hi = _default_box(u) if box is None else (np.broadcast_to(np.asarray(box[0], float), (P.dim,)),
                                                 np.broadcast_to(np.asarray(box[1], float), (P.dim,)))
    if np.any(u < lo) or np.any(u > hi):
        raise ValueError("the search box must contain u")
    axes = [np.linspace(lo[j], hi[j], grid_n) for j in range(P.dim)]
    target = P.values(u) - margin
    total = grid_n ** P.dim
    for start in range(0, total, _CHUNK):
        idx = np.arange(start, min(total, start + _CHUNK))
        V = np.column_stack([axes[j][(idx // grid_n ** (P.dim - 1 - j)) % grid_n]
                             for j in range(P.dim)])
        V = V[_in_constraint(P.constraint, V)]
        if not V.size:
            continue
        better = np.ones(V.shape[0], dtype=bool)
        for f, tv in zip(P.objectives, target):
            better &= f.value(V) < tv
            if not better.any():
                break
        if better.any():
            return False, V[np.argmax(better)]
    return True, None


def weak_pareto_bruteforce(P, u, box=None, grid_n=201, margin=1e-3):
    """False iff some grid point of ``box`` in K improves every objective by more than ``margin``."""
    return weak_pareto_witness(P, u, box, grid_n, margin)[0]


@dataclass
class FrontSample:
    starts: np.ndarray
    limits: np.ndarray
    objective_images: np.ndarray
    residuals: np.ndarray
    nondominated_mask: np.ndarray
    failures: list


def grid_starts(lo, hi, count, dim):
    """Inclusive tensor grid with ``count`` points per axis."""
    ax = np.linspace(lo, hi, count)
    return np.array(list(itertools.product(ax, repeat=dim)))


def uniform_starts(lo, hi, n, dim, seed):
    return np.random.default_rng(seed).uniform(lo, hi, size=(n, dim))


def sample_front(P, starts, cfg=None, margin=1e-6):
    """Run the flow from every start; collect limits, images and the nondominated mask.

    A limit counts as dominated only when another image beats it by more than
    ``margin`` in every objective, so integration noise does not split the front.
    """
    cfg = cfg or SolverConfig()
    starts = np.atleast_2d(np.asarray(starts, dtype=float))
    n = starts.shape[0]
    limits = np.full((n, P.dim), np.nan)
    images = np.full((n, P.q), np.nan)
    residuals = np.full(n, np.nan)
    failures = []
    for k, u0 in enumerate(starts):
        try:
            tr = run_mog(P, u0, cfg)
        except (ParetoFlowError, ValueError) as exc:
            failures.append((k, str(exc)))
            continue
        limits[k] = tr.limit_estimate
        images[k] = tr.values[:, -1]
        residuals[k] = tr.residuals[-1]
    return FrontSample(starts, limits, images, residuals, nondominated_mask(images, margin), failures)


def front_csv(fs):
    """CSV text: ``start_1..start_d,limit_1..limit_d,f_1..f_q,residual,nondominated``."""
    d = fs.starts.shape[1]
    q = fs.objective_images.shape[1]
    head = ([f"start_{j + 1}" for j in range(d)] + [f"limit_{j + 1}" for j in range(d)]
            + [f"f_{i + 1}" for i in range(q)] + ["residual", "nondominated"])
    lines = [",".join(head)]
    for k in range(fs.starts.shape[0]):
        row = list(fs.starts[k]) + list(fs.limits[k]) + list(fs.objective_images[k]) + [fs.residuals[k]]
        lines.append(",".join(format(x, ".17g") for x in row) + f",{int(fs.nondominated_mask[k])}")
    return "\n".join(lines) + "\n"
