"""Command-line front end.

Commands::

    run      integrate the flow from --x0 and write the trajectory CSV
    field    evaluate s(u) on a planar --grid lo:hi:count and write a CSV
    front    run from many starts and write the front CSV
    yosida   lambda sweep of the regularized flow, JSON summary
    compare  mog vs scalarized(theta) vs max, side-by-side CSV
    check    report whether --x0 is Pareto critical

Exit codes: 0 success, 2 argument or config errors, 1 solver failures.
"""
import argparse
import json
import os
import sys
import tempfile

import numpy as np

from .config import load_config
from .direction import steepest_direction
from .dynamics import SolverConfig, run_max, run_mog, run_scalarized, trajectory_csv
from .errors import ConfigError, DimensionError, InfeasiblePointError, ParetoFlowError
from .objectives import BUILTIN_PROBLEMS, builtin_problem
from .pareto_analysis import check_critical, front_csv, grid_starts, sample_front, uniform_starts
from .yosida_path import DEFAULT_LAMBDAS, yosida_sweep

SEED_ENV = "PARETO_FLOW_SEED"
DEFAULT_SEED = 42


class ArgError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ArgError(message)


def _floats(text, what):
    try:
        vals = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ArgError(f"{what} must be a comma-separated list of numbers, got {text!r}") from None
    if not vals:
        raise ArgError(f"{what} is empty")
    return np.array(vals)


def parse_grid(text):
    """``lo:hi:count``, inclusive at both ends."""
    parts = text.split(":")
    if len(parts) != 3:
        raise ArgError(f"grid must look like lo:hi:count, got {text!r}")
    try:
        lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise ArgError(f"grid must look like lo:hi:count, got {text!r}") from None
    if count < 1 or not hi >= lo:
        raise ArgError("grid needs count >= 1 and hi >= lo")
    return lo, hi, count


def resolve_problem(spec):
    if spec in BUILTIN_PROBLEMS:
        return builtin_problem(spec)
    if os.path.exists(spec):
        return load_config(spec)
    raise ArgError(f"--problem {spec!r} is neither a built-in ({', '.join(sorted(BUILTIN_PROBLEMS))}) "
                   "nor an existing config file")


def default_seed():
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return DEFAULT_SEED
    try:
        return int(raw)
    except ValueError:
        raise ArgError(f"{SEED_ENV} must be an integer, got {raw!r}") from None


def write_atomic(path, text):
    """Write through a temp file in the target directory, then rename."""
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def build_parser():
    p = _Parser(prog="pareto-flow", description="Multiobjective steepest-descent flows.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--problem", required=True, help="built-in name or path to a JSON config")
        sp.add_argument("--out", default=None, help="output path (stdout if omitted)")
        sp.add_argument("--seed", type=int, default=None, help=f"RNG seed (env {SEED_ENV}, default 42)")

    def flow(sp, t_max=20.0):
        sp.add_argument("--step", type=float, default=1e-3, help="step h")
        sp.add_argument("--t-max", type=float, default=t_max)
        sp.add_argument("--tol", type=float, default=1e-8, help="stopping residual")
        sp.add_argument("--mode", choices=("fixed_step", "armijo"), default="fixed_step")
        sp.add_argument("--mu", type=float, default=1.0, help="regularization parameter (armijo)")
        sp.add_argument("--max-iters", type=int, default=None)

    sp = sub.add_parser("run", help="trajectory CSV")
    common(sp)
    flow(sp)
    sp.add_argument("--x0", required=True)

    sp = sub.add_parser("field", help="direction field CSV on a planar grid")
    common(sp)
    sp.add_argument("--grid", required=True, help="lo:hi:count (inclusive)")

    sp = sub.add_parser("front", help="multistart front CSV")
    common(sp)
    flow(sp)
    sp.add_argument("--grid", default=None, help="tensor grid of starts lo:hi:count")
    sp.add_argument("--n-starts", type=int, default=20, help="seeded uniform starts if no --grid")
    sp.add_argument("--box", default="-2:2", help="lo:hi for uniform starts")

    sp = sub.add_parser("yosida", help="lambda sweep JSON summary")
    common(sp)
    flow(sp, t_max=10.0)
    sp.add_argument("--x0", default=None, help="start (seeded standard normal if omitted)")
    sp.add_argument("--lambdas", default=",".join(str(x) for x in DEFAULT_LAMBDAS))

    sp = sub.add_parser("compare", help="mog vs scalarized vs max CSV")
    common(sp)
    flow(sp)
    sp.add_argument("--x0", required=True)
    sp.add_argument("--theta", default=None, help="weights of the scalarization (equal if omitted)")

    sp = sub.add_parser("check", help="Pareto criticality of --x0")
    common(sp)
    sp.add_argument("--x0", required=True)
    sp.add_argument("--tol", type=float, default=1e-8)
    return p


def _solver_config(a):
    for name in ("step", "t_max", "tol", "mu"):
        if not getattr(a, name) > 0:
            raise ArgError(f"--{name.replace('_', '-')} must be positive")
    return SolverConfig(mode=a.mode, h=a.step, t_max=a.t_max, stop_residual=a.tol, mu=a.mu,
                        max_iters=a.max_iters)


def _point(P, text, what="--x0"):
    x = _floats(text, what)
    if x.size != P.dim:
        raise ArgError(f"{what} has {x.size} entries, problem dim is {P.dim}")
    return x


def cmd_run(a, P):
    traj = run_mog(P, _point(P, a.x0), _solver_config(a))
    write_atomic(a.out, trajectory_csv(traj))
    print(f"steps={traj.n_steps} converged={traj.converged} residual={traj.residuals[-1]:.3e} "
          f"limit={np.array2string(traj.limit_estimate, precision=6)}", file=sys.stderr)


def cmd_field(a, P):
    if P.dim != 2:
        raise ArgError("field needs a planar problem (dim 2)")
    lo, hi, n = parse_grid(a.grid)
    ax = np.linspace(lo, hi, n)
    q = P.q
    head = ["u_1", "u_2", "s_1", "s_2", "residual"] + [f"theta_{i + 1}" for i in range(q)]
    lines = [",".join(head)]
    for x in ax:
        for y in ax:
            u = np.array([x, y])
            if not P.constraint.contains(u):
                continue
            r = steepest_direction(P, u)
            row = [x, y, r.s[0], r.s[1], r.residual] + list(r.theta)
            lines.append(",".join(format(v, ".17g") for v in row))
    write_atomic(a.out, "\n".join(lines) + "\n")


def cmd_front(a, P, seed):
    if a.grid is not None:
        lo, hi, n = parse_grid(a.grid)
        starts = grid_starts(lo, hi, n, P.dim)
    else:
        try:
            lo, hi = (float(x) for x in a.box.split(":"))
        except ValueError:
            raise ArgError(f"--box must look like lo:hi, got {a.box!r}") from None
        if a.n_starts < 1:
            raise ArgError("--n-starts must be positive")
        starts = uniform_starts(lo, hi, a.n_starts, P.dim, seed)
    fs = sample_front(P, starts, _solver_config(a))
    for k, msg in fs.failures:
        print(f"start {k} failed: {msg}", file=sys.stderr)
    write_atomic(a.out, front_csv(fs))


def cmd_yosida(a, P, seed):
    lams = _floats(a.lambdas, "--lambdas")
    u0 = (_point(P, a.x0) if a.x0 is not None
          else np.random.default_rng(seed).standard_normal(P.dim))
    try:
        sw = yosida_sweep(P, u0, lams, _solver_config(a))
    except ValueError as exc:
        raise ArgError(str(exc)) from None
    doc = sw.summary()
    doc["monotone"] = sw.monotone
    doc["rate_constant"] = sw.rate_constant
    doc["x0"] = [float(x) for x in u0]
    write_atomic(a.out, json.dumps(doc, indent=2) + "\n")


def _on_grid(traj, grid):
    vals = traj.values if traj.kind != "max" else traj.extra["objective_values"]
    S = np.column_stack([np.interp(grid, traj.times, traj.states[:, j]) for j in range(traj.dim)])
    V = np.column_stack([np.interp(grid, traj.times, v) for v in vals])
    return S, V


def _nonincreasing(V, slack=1e-12):
    flags = np.ones_like(V, dtype=int)
    flags[1:] = (np.diff(V, axis=0) <= slack).astype(int)
    return flags


def cmd_compare(a, P):
    if a.mode != "fixed_step":
        raise ArgError("compare runs in fixed_step mode")
    cfg = _solver_config(a)
    u0 = _point(P, a.x0)
    theta = np.full(P.q, 1.0 / P.q) if a.theta is None else _floats(a.theta, "--theta")
    if theta.size != P.q:
        raise ArgError(f"--theta needs {P.q} weights")
    runs = {"mog": run_mog(P, u0, cfg), "scalarized": run_scalarized(P, u0, theta, cfg),
            "max": run_max(P, u0, cfg)}
    for tr in runs.values():
        if "objective_values" not in tr.extra:
            tr.extra["objective_values"] = np.array([P.values(x) for x in tr.states]).T
    t_end = max(tr.times[-1] for tr in runs.values())
    n = int(round(t_end / cfg.h))
    grid = np.linspace(0.0, n * cfg.h, n + 1)
    head, cols = ["t"], [[format(t, ".17g") for t in grid]]
    for name, tr in runs.items():
        S, V = _on_grid(tr, grid)
        head += [f"{name}_u_{j + 1}" for j in range(P.dim)] + [f"{name}_f_{i + 1}" for i in range(P.q)]
        head += [f"{name}_nonincreasing_{i + 1}" for i in range(P.q)]
        cols += [[format(x, ".17g") for x in col] for col in np.hstack([S, V]).T]
        cols += [[str(x) for x in col] for col in _nonincreasing(V).T]
        raw = np.diff(tr.extra["objective_values"], axis=1).max(axis=1, initial=-np.inf)
        flags = " ".join(f"f_{i + 1}:{'nonincreasing' if raw[i] <= 1e-12 else 'increases'}"
                         for i in range(P.q))
        print(f"{name}: {flags}", file=sys.stderr)
    lines = [",".join(head)] + [",".join(row) for row in zip(*cols)]
    write_atomic(a.out, "\n".join(lines) + "\n")


def cmd_check(a, P):
    if not a.tol > 0:
        raise ArgError("--tol must be positive")
    rep = check_critical(P, _point(P, a.x0), tol=a.tol)
    status = "critical" if rep.critical else "not critical"
    text = (f"{status}\nresidual {rep.residual:.6e}\n"
            f"weights {' '.join(format(w, '.12g') for w in rep.weights)}\n")
    write_atomic(a.out, text)


_VALUE_FLAGS = ("--x0", "--theta", "--lambdas", "--grid", "--box")


def _glue_values(argv):
    """Attach values like ``-1,0`` or ``-2:2:21`` to their flag so they are not read as options."""
    out, it = [], iter(argv)
    for tok in it:
        if tok in _VALUE_FLAGS:
            nxt = next(it, None)
            out.append(tok if nxt is None else f"{tok}={nxt}")
        else:
            out.append(tok)
    return out


def main(argv=None):
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        a = parser.parse_args(_glue_values(argv))
        seed = a.seed if a.seed is not None else default_seed()
        P = resolve_problem(a.problem)
        if a.command == "run":
            cmd_run(a, P)
        elif a.command == "field":
            cmd_field(a, P)
        elif a.command == "front":
            cmd_front(a, P, seed)
        elif a.command == "yosida":
            cmd_yosida(a, P, seed)
        elif a.command == "compare":
            cmd_compare(a, P)
        else:
            cmd_check(a, P)
    except (ArgError, ConfigError, DimensionError, InfeasiblePointError) as exc:
        print(f"pareto-flow: error: {exc}", file=sys.stderr)
        return 2
    except (ParetoFlowError, ValueError, np.linalg.LinAlgError) as exc:
        print(f"pareto-flow: solver failure: {exc}", file=sys.stderr)
        return 1
    except BrokenPipeError:
        # reader went away (e.g. piped into head); silence the flush at exit
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return 0
    except OSError as exc:
        print(f"pareto-flow: cannot write output: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
