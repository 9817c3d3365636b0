"""Yosida-regularized flows and the lambda -> 0 continuation."""
import json
import math
from dataclasses import dataclass, replace

import numpy as np

from .dynamics import SolverConfig, run_mog
from .errors import ConfigError
from .objectives import Problem

DEFAULT_LAMBDAS = (1e-1, 1e-2, 1e-3, 1e-4)


def envelope_problem(P, lam):
    """The problem with every f_i replaced by its Moreau envelope f_{i,lam}."""
    if lam <= 0:
        raise ValueError("lambda must be positive")
    return Problem(tuple(f.envelope(lam) for f in P.objectives), P.constraint,
                   f"{P.name}_lambda", dict(P.meta))


def run_mog_lambda(P, u0, lam, cfg=None):
    """Flow of the regularized system, recorded on the grid of step ``cfg.h``.

    Envelope gradients are (1/lam)-Lipschitz, so the explicit scheme takes
    ``ceil(h / lam)`` internal substeps per grid step. ``values`` holds the
    envelope values f_{i,lam} driving the flow; the original values f_i are
    in ``extra["base_values"]``.
    """
    if not lam > 0:
        raise ValueError("lambda must be positive")
    cfg = cfg or SolverConfig(t_max=10.0)
    if cfg.mode != "fixed_step":
        raise ConfigError("the regularized flow is integrated in fixed-step mode")
    n_sub = max(1, int(math.ceil(cfg.h / lam - 1e-9)))
    Pl = envelope_problem(P, lam)
    inner = replace(cfg, h=cfg.h / n_sub, max_iters=None if cfg.max_iters is None else cfg.max_iters * n_sub)
    traj = run_mog(Pl, u0, inner, record_every=n_sub)
    traj.kind = "mog_lambda"
    traj.extra["lambda"] = float(lam)
    traj.extra["substeps"] = n_sub
    traj.extra["envelope_values"] = traj.values
    traj.extra["base_values"] = np.array([P.values(x) for x in traj.states]).T
    return traj


def on_grid(traj, grid):
    """States and envelope values resampled on ``grid`` (held constant after the run ends)."""
    t = traj.times
    S = np.column_stack([np.interp(grid, t, traj.states[:, j]) for j in range(traj.dim)])
    V = np.vstack([np.interp(grid, t, traj.values[i]) for i in range(traj.q)])
    B = np.vstack([np.interp(grid, t, traj.extra["base_values"][i]) for i in range(traj.q)])
    return S, V, B


@dataclass
class YosidaSweep:
    lambdas: np.ndarray
    trajectories: list
    grid: np.ndarray
    deviations: np.ndarray
    value_deviations: np.ndarray
    energies: np.ndarray
    monotone: bool
    rate_constant: float

    def summary(self):
        return {
            "lambdas": [float(x) for x in self.lambdas],
            "deviations": [float(x) for x in self.deviations],
            "value_deviations": [float(x) for x in self.value_deviations],
            "energies": [float(x) for x in self.energies],
        }

    def to_json(self):
        return json.dumps(self.summary(), indent=2) + "\n"


def yosida_sweep(P, u0, lambdas=DEFAULT_LAMBDAS, cfg=None):
    """Run the regularized flow for each lambda on a shared grid.

    ``deviations[k]`` is the sup-norm distance between the runs for
    ``lambdas[k]`` and ``lambdas[k+1]``; ``value_deviations[k]`` is
    ``max_i sup_t |f_{i,lambda_k}(u_k(t)) - f_i(u_ref(t))|`` with the
    smallest-lambda run as reference. ``rate_constant`` is the least-squares
    fit of ``deviations ~ C * lambda`` (reported, never asserted).
    """
    lambdas = np.asarray(lambdas, dtype=float)
    if lambdas.ndim != 1 or lambdas.size < 2:
        raise ValueError("need at least two lambdas")
    if np.any(lambdas <= 0) or np.any(np.diff(lambdas) > 0):
        raise ValueError("lambdas must be positive and decreasing")
    cfg = cfg or SolverConfig(t_max=10.0)
    n = int(round(cfg.t_max / cfg.h))
    grid = np.linspace(0.0, n * cfg.h, n + 1)
    cache = {}
    trajs, S, V = [], [], []
    for lam in lambdas:
        if lam not in cache:
            tr = run_mog_lambda(P, u0, lam, cfg)
            cache[lam] = (tr, on_grid(tr, grid))
        tr, (s, v, _) = cache[lam]
        trajs.append(tr)
        S.append(s)
        V.append(v)
    dev = np.array([np.linalg.norm(S[k] - S[k + 1], axis=1).max() for k in range(len(S) - 1)])
    ref_vals = np.array([P.values(x) for x in S[-1]]).T
    vdev = np.array([np.abs(v - ref_vals).max() for v in V])
    energies = np.array([tr.energy for tr in trajs])
    monotone = bool(np.all(np.diff(dev) < 0))
    lam_pairs = lambdas[:-1]
    C = float(dev @ lam_pairs / (lam_pairs @ lam_pairs))
    return YosidaSweep(lambdas, trajs, grid, dev, vdev, energies, monotone, C)
