"""Integration of the multiobjective gradient flow and its comparator dynamics.

Fixed-step mode uses Heun's method (explicit trapezoid) with two safeguards
that keep every objective nonincreasing:

* kink events: if the ray ``u + t s`` meets a point of nondifferentiability
  (an l1 coordinate reaching zero, a new max-affine piece becoming active, a
  facet of a polyhedral constraint) before ``t = h``, the step stops exactly
  there and the state is snapped onto the kink;
* Euler fallback: if the corrected step would cross a kink or increase any
  objective, the plain explicit Euler step is taken instead.

``scheme="euler"`` gives the plain projected Euler method. Armijo mode is the
discrete descent algorithm with backtracking on every objective.
"""
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from ._jit import JIT_ENABLED
from .convex_core import DEFAULT_TOL, MAX_ITER, MULTIPLIER_CAP, as_vector, is_simplex
from .direction import DirectionResult, direction_from_groups, regularized_direction, steepest_direction
from .errors import CapabilityError, ConfigError, ConvergenceError, StepFailure
from .objectives import (
    EPS_ACT, FEAS_TOL, Affine, HuberL1, L1, LeastSquares, Quadratic, WholeSpace,
)

log = logging.getLogger(__name__)

MODES = ("fixed_step", "armijo")
SCHEMES = ("heun", "euler")
MU_RULES = ("constant", "summable")


@dataclass(frozen=True)
class SolverConfig:
    """Integration settings.

    ``mode`` is ``fixed_step`` (step ``h`` up to time ``t_max``) or ``armijo``
    (at most ``max_iters`` backtracking steps along regularized directions
    with parameter ``mu``; ``mu_rule="summable"`` uses ``mu_k = mu_a / k``
    divided by the largest subgradient norm).
    """

    mode: str = "fixed_step"
    h: float = 1e-3
    t_max: float = 20.0
    max_iters: int = None
    stop_residual: float = 1e-8
    tol: float = DEFAULT_TOL
    scheme: str = "heun"
    lam_bar: float = 1.0
    beta: float = 0.5
    sigma: float = 0.1
    max_halvings: int = 60
    mu_rule: str = "constant"
    mu: float = 1.0
    mu_a: float = 1.0
    use_jit: bool = True

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.scheme not in SCHEMES:
            raise ConfigError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if self.mu_rule not in MU_RULES:
            raise ConfigError(f"mu_rule must be one of {MU_RULES}, got {self.mu_rule!r}")
        if not self.h > 0:
            raise ConfigError("step h must be positive")
        if not self.t_max > 0:
            raise ConfigError("t_max must be positive")
        if not 0 < self.beta < 1:
            raise ConfigError("beta must lie in (0, 1)")
        if not 0 < self.sigma < 1:
            raise ConfigError("sigma must lie in (0, 1)")
        if not self.lam_bar > 0:
            raise ConfigError("lam_bar must be positive")
        if not self.stop_residual > 0:
            raise ConfigError("stop_residual must be positive")
        if not self.tol > 0:
            raise ConfigError("tol must be positive")
        if not (self.mu > 0 and self.mu_a > 0):
            raise ConfigError("mu and mu_a must be positive")
        if self.max_iters is not None and self.max_iters < 1:
            raise ConfigError("max_iters must be positive")

    def step_budget(self):
        if self.max_iters is not None:
            return int(self.max_iters)
        if self.mode == "armijo":
            return 5000
        # room for kink events on top of the regular grid
        return 4 * int(math.ceil(self.t_max / self.h)) + 1000


@dataclass
class Trajectory:
    """A discrete trajectory. Row ``k`` holds the state ``u_k`` with its
    direction certificate; ``speeds[k]`` is the secant speed of the step
    leaving ``u_k`` (the last row carries the field norm at the final state).
    ``values`` has shape ``(q, N)``.
    """

    times: np.ndarray
    states: np.ndarray
    values: np.ndarray
    weights: np.ndarray
    speeds: np.ndarray
    energy: float
    residuals: np.ndarray
    subgradients: np.ndarray
    normals: np.ndarray
    converged: bool
    n_steps: int
    kind: str = "mog"
    curvature: float = 0.0
    events: int = 0
    fallbacks: int = 0
    extra: dict = field(default_factory=dict)

    @property
    def limit_estimate(self):
        return self.states[-1]

    @property
    def q(self):
        return self.values.shape[0]

    @property
    def dim(self):
        return self.states.shape[1]

    def __len__(self):
        return self.times.size


def _speeds(times, states, residuals):
    sp = np.empty(times.size)
    if times.size > 1:
        dt = np.diff(times)
        dist = np.linalg.norm(np.diff(states, axis=0), axis=1)
        # a step shorter than the resolution of t has no measurable speed; use |s| there
        sp[:-1] = np.divide(dist, dt, out=residuals[:-1].astype(float), where=dt > 0)
    sp[-1] = residuals[-1]
    return sp


def _curvature(P, states):
    L = 0.0
    for f in P.objectives:
        if f.kind == "euclidean_norm":
            L = max(L, max(f.curvature(x) for x in states))
        else:
            L = max(L, f.curvature(states[0]))
    return float(L)


def _start(P, u0):
    u0 = as_vector(u0, P.dim, "u0")
    if not P.constraint.contains(u0, FEAS_TOL):
        log.warning("u0 is outside the constraint set; projecting it")
        u0 = P.constraint.project(u0)
    return u0


# ------------------------------------------------------------------ fields


def _mog_field(P, tol):
    return lambda u: steepest_direction(P, u, tol=tol)


def _split_weighted(subs, weights, z_total):
    """Per-objective elements v_i with sum_i w_i v_i = z_total for point/box blocks."""
    q, d = len(subs), z_total.size
    picks = np.zeros((q, d))
    if all(b.kind in ("point", "box") for b in subs):
        lo = sum(w * b.lower for b, w in zip(subs, weights))
        hi = sum(w * b.upper for b, w in zip(subs, weights))
        span = hi - lo
        frac = np.where(span > 0, np.clip((z_total - lo) / np.where(span > 0, span, 1), 0, 1), 0.0)
        for i, b in enumerate(subs):
            picks[i] = b.lower + frac * (b.upper - b.lower)
    else:
        picks[:] = z_total
    return picks


def _scalarized_field(P, theta, tol):
    theta = np.asarray(theta, dtype=float)
    active = np.flatnonzero(theta > 0)

    def fld(u):
        subs = P.subdifferentials(u)
        cone = P.constraint.normal_generators(u)
        s, _, gp, eta, iters = direction_from_groups(
            [[(subs[i], theta[i]) for i in active]], cone, P.dim, tol)
        picks = _split_weighted(subs, theta, gp[0])
        return DirectionResult(s, theta.copy(), picks, eta, float(np.linalg.norm(s)), iters,
                               cone, tuple(subs))
    return fld


def _max_field(P, tol):
    def fld(u):
        vals = P.values(u)
        active = np.flatnonzero(vals >= vals.max() - EPS_ACT)
        subs = P.subdifferentials(u)
        cone = P.constraint.normal_generators(u)
        s, th, gp, eta, iters = direction_from_groups([[(subs[i], 1.0)] for i in active], cone,
                                                      P.dim, tol)
        theta = np.zeros(P.q)
        theta[active] = th
        picks = np.array([b.lmo(-s) for b in subs])
        picks[active] = gp
        return DirectionResult(s, theta, picks, eta, float(np.linalg.norm(s)), iters, cone,
                               tuple(subs))
    return fld


# -------------------------------------------------------------- integrators


def _integrate_fixed(P, u0, cfg, fld, merit, record_every=1):
    K = P.constraint
    h, t_max = cfg.h, cfg.t_max
    heun = cfg.scheme == "heun"
    budget = cfg.step_budget()
    u = u0.copy()
    D = fld(u)
    fu = merit(u)
    rows = [(0.0, u.copy(), D)]
    t = energy = 0.0
    n_steps = n_events = n_fallbacks = n_loops = 0
    converged = False
    last_rec = 0
    while True:
        if D.residual <= cfg.stop_residual:
            converged = True
            break
        if t_max - t <= 1e-12 * h or n_loops >= budget:
            break
        n_loops += 1
        hs = min(h, t_max - t)
        s1 = D.s
        tk = P.kink_step(u, s1)
        if tk < hs:
            raw = u + tk * s1
            new, fnew = _guarded_snap(P, raw, merit(raw), fu, merit)
            n_events += 1
            dt = tk
            if tk <= 1e-12 * hs:
                u, fu = new, fnew
                D = fld(u)
                continue
        else:
            new = None
            if heun:
                D2 = fld(P.snap(K.project(u + hs * s1)))
                avg = 0.5 * (s1 + D2.s)
                if P.kink_step(u, avg) >= hs:
                    cand = K.project(u + hs * avg)
                    fc = merit(cand)
                    if np.all(fc <= fu):
                        new, fnew = cand, fc
                if new is None:
                    n_fallbacks += 1
            if new is None:
                new = K.project(u + hs * s1)
                fnew = merit(new)
            # coordinates resting on a kink pick up roundoff-sized drift; clear it
            new, fnew = _guarded_snap(P, new, fnew, fu, merit)
            dt = hs
        du = new - u
        energy += float(du @ du) / dt
        t += dt
        u, fu = new, fnew
        n_steps += 1
        try:
            D = fld(u)
        except ConvergenceError as exc:
            raise ConvergenceError(f"direction solver failed at step {n_steps}: {exc}",
                                   best=exc.best, residual=exc.residual, step=n_steps) from exc
        if n_steps % record_every == 0:
            rows.append((t, u.copy(), D))
            last_rec = n_steps
    if last_rec != n_steps:
        rows.append((t, u.copy(), D))
    return rows, energy, n_steps, n_events, n_fallbacks, converged


def _guarded_snap(P, new, fnew, fu, merit):
    """Snap ``new`` onto nearby kinks unless that raises some objective above ``fu``.

    A rejected snap is retried with a much tighter tolerance, which still
    clears pure roundoff left on coordinates that already sit on a kink.
    """
    cap = np.maximum(fu, fnew)
    for scale in (1.0, 1e-6):
        snapped = P.snap(new, scale)
        if np.array_equal(snapped, new):
            return new, fnew
        fs = merit(snapped)
        if np.all(fs <= cap):
            return snapped, fs
    return new, fnew


def _trajectory_from_rows(P, rows, energy, n_steps, converged, kind, events=0, fallbacks=0):
    times = np.array([r[0] for r in rows])
    states = np.array([r[1] for r in rows])
    values = np.array([P.values(x) for x in states]).T
    weights = np.array([r[2].theta for r in rows])
    residuals = np.array([r[2].residual for r in rows])
    subgrads = np.array([r[2].subgradients for r in rows])
    normals = np.array([r[2].normal_component for r in rows])
    return Trajectory(times, states, values, weights, _speeds(times, states, residuals), energy,
                      residuals, subgrads, normals, converged, n_steps, kind,
                      _curvature(P, states), events, fallbacks)


def compile_problem(P):
    """Arrays for the compiled integrator, or None when P is outside its family.

    The family: quadratic-type objectives (quadratic, affine, least squares),
    weighted l1 and its Huber envelope, over the whole space.
    """
    if not isinstance(P.constraint, WholeSpace):
        return None
    q, d = P.q, P.dim
    Qs = np.zeros((q, d, d))
    cs = np.zeros((q, d))
    rs = np.zeros(q)
    ws = np.zeros(q)
    lams = np.zeros(q)
    for i, f in enumerate(P.objectives):
        if isinstance(f, (Quadratic, Affine, LeastSquares)):
            Qs[i], cs[i], rs[i] = f.as_quadratic()
        elif isinstance(f, L1):
            ws[i] = f.weight
        elif isinstance(f, HuberL1):
            ws[i], lams[i] = f.weight, f.lam
        else:
            return None
    return Qs, cs, rs, ws, lams


def _run_compiled(P, u0, cfg, arrays, record_every):
    Qs, cs, rs, ws, lams = arrays
    out = kernels.integrate_qh(Qs, cs, rs, ws, lams, u0, float(cfg.h), float(cfg.t_max),
                               float(cfg.stop_residual), cfg.scheme == "heun", cfg.step_budget(),
                               int(record_every), float(cfg.tol), MAX_ITER, MULTIPLIER_CAP)
    times, states, values, thetas, residuals, picks, energy, n_steps, n_events, n_fb, conv, st = out
    if st != kernels.FIELD_OK:
        raise ConvergenceError(f"direction solver failed at step {n_steps} (status {st})",
                               best=states[-1] if len(states) else u0, residual=np.inf,
                               step=int(n_steps))
    return Trajectory(times, states, values.T.copy(), thetas, _speeds(times, states, residuals),
                      float(energy), residuals, picks, np.zeros_like(states), bool(conv),
                      int(n_steps), "mog", _curvature(P, states), int(n_events), int(n_fb))


def _run_armijo(P, u0, cfg):
    budget = cfg.step_budget()
    u = u0.copy()
    D = steepest_direction(P, u, tol=cfg.tol)
    rows = [(0.0, u.copy(), D)]
    lambdas, halvings = [], []
    t = energy = 0.0
    converged = False
    n = 0
    events = corrections = 0
    whole = isinstance(P.constraint, WholeSpace)
    while n < budget:
        if D.residual <= cfg.stop_residual:
            converged = True
            break
        n += 1
        if cfg.mu_rule == "constant":
            mu = cfg.mu
        else:
            gmax = max(float(np.max(np.linalg.norm(D.subgradients, axis=1))), 1e-300)
            mu = (cfg.mu_a / n) / max(gmax, 1.0)
        d = mu * D.s if whole else regularized_direction(P, u, mu, tol=cfg.tol)
        slopes = np.array([f.directional_derivative(u, d) for f in P.objectives])
        f0 = P.values(u)
        lam, m = cfg.lam_bar, 0
        while not np.all(P.values(u + lam * d) <= f0 + cfg.sigma * lam * slopes):
            lam *= cfg.beta
            m += 1
            if m > cfg.max_halvings:
                break
        if m > cfg.max_halvings:
            snapped = P.snap(u)
            if not np.array_equal(snapped, u):
                # a roundoff offset next to a kink spoiled the direction; clear it and retry
                u = snapped
                D = steepest_direction(P, u, tol=cfg.tol)
                corrections += 1
                continue
            raise StepFailure(f"Armijo backtracking failed at iteration {n} after {m - 1} halvings",
                              best=u, residual=D.residual, iteration=n, slopes=slopes)
        tk = P.kink_step(u, d)
        if 1e-6 * lam < tk < lam:
            # stop on the first kink; the Armijo inequality survives by convexity
            new = u + tk * d
            lam_eff = tk
            events += 1
        else:
            # a kink closer than 1e-6 * lam is crossed rather than stopped at
            new = P.constraint.project(u + lam * d)
            lam_eff = lam
        new = _guarded_snap(P, new, P.values(new), f0, P.values)[0]
        dt = lam_eff * mu
        if dt <= 0:
            raise StepFailure(f"Armijo produced a zero step at iteration {n}", best=u,
                              residual=D.residual, iteration=n)
        du = new - u
        energy += float(du @ du) / dt
        t += dt
        u = new
        lambdas.append(lam_eff)
        halvings.append(m)
        try:
            D = steepest_direction(P, u, tol=cfg.tol)
        except ConvergenceError as exc:
            raise ConvergenceError(f"direction solver failed at iteration {n}: {exc}",
                                   best=exc.best, residual=exc.residual, step=n) from exc
        rows.append((t, u.copy(), D))
    traj = _trajectory_from_rows(P, rows, energy, n, converged, "armijo", events=events)
    traj.extra["step_lengths"] = np.array(lambdas)
    traj.extra["halvings"] = np.array(halvings, dtype=int)
    traj.extra["snap_corrections"] = corrections
    return traj


def run_mog(P, u0, cfg=None, record_every=1):
    """Integrate u' = s(u) from ``u0``."""
    cfg = cfg or SolverConfig()
    u0 = _start(P, u0)
    if cfg.mode == "armijo":
        return _run_armijo(P, u0, cfg)
    if cfg.use_jit and JIT_ENABLED:
        arrays = compile_problem(P)
        if arrays is not None:
            return _run_compiled(P, u0, cfg, arrays, record_every)
    rows, energy, n, ev, fb, conv = _integrate_fixed(P, u0, cfg, _mog_field(P, cfg.tol),
                                                     P.values, record_every)
    return _trajectory_from_rows(P, rows, energy, n, conv, "mog", ev, fb)


def run_scalarized(P, u0, theta, cfg=None):
    """Steepest descent of the fixed combination sum_i theta_i f_i."""
    cfg = cfg or SolverConfig()
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (P.q,) or not is_simplex(theta):
        raise ValueError("theta must be a point of the unit simplex with one weight per objective")
    if cfg.mode == "armijo":
        raise CapabilityError("comparator flows support fixed-step mode only")
    u0 = _start(P, u0)
    rows, energy, n, ev, fb, conv = _integrate_fixed(
        P, u0, cfg, _scalarized_field(P, theta, cfg.tol), lambda u: np.atleast_1d(theta @ P.values(u)))
    return _trajectory_from_rows(P, rows, energy, n, conv, "scalarized", ev, fb)


def run_max(P, u0, cfg=None):
    """Steepest descent of max_i f_i (active-index subdifferential)."""
    cfg = cfg or SolverConfig()
    if cfg.mode == "armijo":
        raise CapabilityError("comparator flows support fixed-step mode only")
    u0 = _start(P, u0)
    rows, energy, n, ev, fb, conv = _integrate_fixed(
        P, u0, cfg, _max_field(P, cfg.tol), lambda u: np.atleast_1d(P.values(u).max()))
    return _trajectory_from_rows(P, rows, energy, n, conv, "max", ev, fb)


# ------------------------------------------------------------------ checks


@dataclass(frozen=True)
class DescentReport:
    ok: bool
    worst_margin: np.ndarray
    curvature: float
    failures: list
    increases: np.ndarray
    max_increase: np.ndarray


def verify_descent(traj, slack_tol=1e-12):
    """Discrete descent check on every step of a trajectory.

    For each step and objective the margin is
    ``f_i(u_{k+1}) - f_i(u_k) + |du|^2/dt - L*dt*|du|*v`` where ``L`` is the
    logged curvature of the run and ``v`` the larger of the speeds at both
    ends; the step passes when the margin is at most ``slack_tol``.
    ``increases[i]`` flags any step where f_i went up by more than ``slack_tol``.
    """
    q = traj.q
    if len(traj) < 2:
        z = np.zeros(q)
        return DescentReport(True, z, traj.curvature, [], np.zeros(q, bool), z)
    dv = np.diff(traj.values, axis=1)
    dt = np.diff(traj.times)
    du = np.linalg.norm(np.diff(traj.states, axis=0), axis=1)
    v = np.maximum(traj.speeds[:-1], np.maximum(traj.residuals[:-1], traj.residuals[1:]))
    slack = traj.curvature * dt * du * v
    margin = dv + du * du / dt - slack
    worst = margin.max(axis=1)
    bad = np.argwhere(margin > slack_tol)
    failures = [(int(i), int(k), float(margin[i, k])) for i, k in bad]
    max_inc = dv.max(axis=1)
    return DescentReport(not failures, worst, traj.curvature, failures, max_inc > slack_tol, max_inc)


@dataclass(frozen=True)
class EnergyReport:
    ok: bool
    energy: float
    bound: float
    per_objective: np.ndarray
    lower_bounds: np.ndarray


def verify_energy(traj, P, slack=1e-6):
    """energy <= min_i (f_i(u0) - inf f_i) + slack.

    The infimum per objective is the tighter of the infimum over the whole
    space and over the constraint set. Objectives unbounded below contribute
    an infinite term; if every objective is unbounded there is no bound.
    """
    lbs = P.lower_bounds()
    if not np.any(np.isfinite(lbs)):
        raise CapabilityError("no objective is bounded below; the energy bound is vacuous")
    f0 = P.values(traj.states[0])
    per = np.where(np.isfinite(lbs), f0 - lbs, np.inf)
    bound = float(per.min())
    return EnergyReport(bool(traj.energy <= bound + slack), float(traj.energy), bound, per, lbs)


def weights_valid(traj, tol=1e-12):
    return all(is_simplex(th, tol) for th in traj.weights)


def trajectory_csv(traj):
    """CSV text: ``t,u_1..u_d,f_1..f_q,theta_1..theta_q,speed,residual``."""
    d, q = traj.dim, traj.q
    head = (["t"] + [f"u_{j + 1}" for j in range(d)] + [f"f_{i + 1}" for i in range(q)]
            + [f"theta_{i + 1}" for i in range(q)] + ["speed", "residual"])
    data = np.column_stack([traj.times, traj.states, traj.values.T, traj.weights, traj.speeds,
                            traj.residuals])
    lines = [",".join(head)]
    lines.extend(",".join(format(x, ".17g") for x in row) for row in data)
    return "\n".join(lines) + "\n"


def read_trajectory_csv(text):
    """Parse a trajectory CSV back into (header, array)."""
    lines = text.strip().splitlines()
    header = lines[0].split(",")
    data = np.array([[float(x) for x in ln.split(",")] for ln in lines[1:]])
    return header, data.reshape(-1, len(header))
