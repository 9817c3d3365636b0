import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pareto_flow._jit import JIT_ENABLED
from pareto_flow.dynamics import (
    SolverConfig, compile_problem, read_trajectory_csv, run_max, run_mog, run_scalarized,
    trajectory_csv, verify_descent, verify_energy, weights_valid,
)
from pareto_flow.errors import CapabilityError, ConfigError
from pareto_flow.direction import steepest_direction
from pareto_flow.objectives import (
    Box, EuclideanNorm, Halfspaces, L1, MaxAffine, Problem, Quadratic, WholeSpace, builtin_problem,
    closed_form_field,
)
from pareto_flow.pareto_analysis import weak_pareto_bruteforce

CFG = SolverConfig(h=1e-3, t_max=20.0)


def rk4_closed_form(name, u0, h=1e-3, T=20.0):
    u = np.array(u0, dtype=float)
    f = lambda x: closed_form_field(name, x)
    for _ in range(int(round(T / h))):
        k1 = f(u)
        k2 = f(u + h / 2 * k1)
        k3 = f(u + h / 2 * k2)
        k4 = f(u + h * k3)
        u = u + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return u


def test_run_mog_example1_limits():
    P = builtin_problem("example1")
    tr = run_mog(P, [0.5, 1.0], CFG)
    np.testing.assert_allclose(tr.limit_estimate, [0.5, 0.0], atol=1e-2)
    tr = run_mog(P, [3.0, 2.0], CFG)
    np.testing.assert_allclose(tr.limit_estimate, [1.0, 0.0], atol=1e-2)
    np.testing.assert_allclose(tr.limit_estimate, rk4_closed_form("example1", [3.0, 2.0], 1e-2), atol=1e-2)


def test_critical_start_single_point():
    tr = run_mog(builtin_problem("example1"), [0.2, 0.0], CFG)
    assert len(tr) == 1 and tr.converged and tr.energy == 0.0
    rep = verify_energy(tr, builtin_problem("example1"))
    assert rep.ok and rep.energy == 0.0


def test_scalarized_examples():
    P = builtin_problem("example1")
    tr = run_scalarized(P, [1.0, 0.0], [0.5, 0.5], CFG)
    np.testing.assert_allclose(tr.limit_estimate, [0, 0], atol=1e-6)
    f2 = np.array([P.values(x)[1] for x in tr.states])
    assert np.any(np.diff(f2) > 0)
    rep = verify_descent(tr)
    assert not rep.ok
    P2 = builtin_problem("example2")
    cfg = SolverConfig(h=1e-3, t_max=2.0)
    tr = run_scalarized(P2, [1.0, 1.0], [0.5, 0.5], cfg)
    np.testing.assert_allclose(tr.states[-1], np.exp(-0.5 * tr.times[-1]) * np.ones(2), atol=1e-6)


def test_scalarized_unit_weight_is_single_objective_descent():
    P = builtin_problem("example1")
    single = Problem((P.objectives[0],), WholeSpace(2))
    cfg = SolverConfig(h=1e-3, t_max=3.0)
    a = run_scalarized(P, [1.0, 0.5], [1.0, 0.0], cfg)
    b = run_mog(single, [1.0, 0.5], SolverConfig(h=1e-3, t_max=3.0, use_jit=False))
    n = min(len(a), len(b))
    np.testing.assert_allclose(a.states[:n], b.states[:n], atol=1e-12)


def test_run_max_remark_c():
    P = builtin_problem("example1")
    tr = run_max(P, [3.0, 2.0], SolverConfig(h=1e-3, t_max=10.0))
    f2 = np.array([P.values(x)[1] for x in tr.states])
    k = int(np.argmin(f2))
    assert 0 < k < f2.size - 1
    assert f2[k] < f2[0] - 1e-3 and f2[-1] > f2[k] + 1e-3
    mog = run_mog(P, [3.0, 2.0], SolverConfig(h=1e-3, t_max=10.0))
    assert not verify_descent(mog).increases.any()


def test_run_max_single_objective_matches_scalarized():
    f = Quadratic(np.diag([1.0, 3.0]), [0.5, -1.0])
    P = Problem((f,), WholeSpace(2))
    cfg = SolverConfig(h=1e-3, t_max=2.0)
    a, b = run_max(P, [1.0, 1.0], cfg), run_scalarized(P, [1.0, 1.0], [1.0], cfg)
    np.testing.assert_allclose(a.states, b.states, atol=1e-14)


@pytest.mark.parametrize("name, u0", [("example1", (2, 0)), ("example2", (1, 1)), ("example1", (3, 2)),
                                      ("example3", (-1, 1)), ("example3", (2, 1.5))])
def test_descent_energy_weights(name, u0):
    P = builtin_problem(name)
    tr = run_mog(P, u0, CFG)
    assert verify_descent(tr).ok
    assert not verify_descent(tr).increases.any()
    assert verify_energy(tr, P).ok
    assert weights_valid(tr, 1e-12)
    if tr.converged:
        assert steepest_direction(P, tr.limit_estimate).residual <= 10 * CFG.stop_residual


def test_energy_examples():
    P = builtin_problem("example2")
    rep = verify_energy(run_mog(P, [1, 1], CFG), P)
    assert rep.bound == pytest.approx(0.5) and rep.energy <= 0.5 + 1e-6
    P = builtin_problem("example1")
    rep = verify_energy(run_mog(P, [2, 0], CFG), P)
    assert rep.bound == pytest.approx(0.5) and rep.energy <= 0.5 + 1e-6


def test_constant_trajectory_descent_report():
    tr = run_mog(builtin_problem("example2"), [0.0, 0.0], CFG)
    rep = verify_descent(tr)
    assert rep.ok and np.all(rep.max_increase == 0)


def test_limits_are_weak_pareto():
    for name, u0 in [("example1", (1.5, 1.0)), ("example2", (1.0, 0.7)), ("example3", (0.5, 1.0))]:
        P = builtin_problem(name)
        tr = run_mog(P, u0, SolverConfig(h=1e-3, t_max=40.0))
        if tr.converged:
            assert weak_pareto_bruteforce(P, tr.limit_estimate)


def _quad_l1(seed, dim):
    r = np.random.default_rng(seed)
    objs = []
    for _ in range(int(r.integers(2, 4))):
        M = r.standard_normal((dim, dim)) / np.sqrt(dim)
        if r.random() < 0.5:
            objs.append(Quadratic(M @ M.T + 0.1 * np.eye(dim), r.standard_normal(dim)))
        else:
            objs.append(L1(dim, r.uniform(0.2, 2)))
    return Problem(tuple(objs), WholeSpace(dim)), r.standard_normal(dim) * 2


@pytest.mark.skipif(not JIT_ENABLED, reason="compiled path disabled")
@pytest.mark.parametrize("seed", range(6))
def test_compiled_matches_python(seed):
    P, u0 = _quad_l1(seed, 2 + seed % 4)
    assert compile_problem(P) is not None
    cfg = SolverConfig(h=1e-2, t_max=3.0)
    a = run_mog(P, u0, cfg)
    b = run_mog(P, u0, SolverConfig(h=1e-2, t_max=3.0, use_jit=False))
    assert len(a) == len(b)
    np.testing.assert_allclose(a.times, b.times, atol=1e-9)
    np.testing.assert_allclose(a.states, b.states, atol=1e-6)
    np.testing.assert_allclose(a.weights, b.weights, atol=1e-6)
    assert a.energy == pytest.approx(b.energy, rel=1e-6, abs=1e-9)


def test_l1_kinks_hit_exact_zeros():
    # 1/2|u - a|^2 and |u|_1 with a = (2, 0, 0): coordinates 2 and 3 reach zero and stay
    P = Problem((Quadratic(np.eye(3), [-2.0, 0.0, 0.0]), L1(3)), WholeSpace(3))
    for use_jit in (False, True):
        tr = run_mog(P, [1.0, -0.5, 0.25], SolverConfig(h=1e-2, t_max=10.0, use_jit=use_jit))
        assert tr.events >= 2
        assert np.all(tr.limit_estimate[1:] == 0.0)
        hit = np.argmax(np.all(tr.states[:, 1:] == 0.0, axis=1))
        assert np.all(tr.states[hit:, 1:] == 0.0)


@settings(max_examples=15)
@given(st.integers(0, 2 ** 31 - 1))
def test_constrained_feasibility_and_descent(seed):
    r = np.random.default_rng(seed)
    dim = int(r.integers(2, 4))
    objs = (Quadratic(np.eye(dim), r.standard_normal(dim) * 2), EuclideanNorm(dim, 0.5),
            MaxAffine(r.standard_normal((3, dim)), r.standard_normal(3)))
    K = Box(-np.ones(dim), np.ones(dim)) if r.random() < 0.5 else Halfspaces(r.standard_normal((2, dim)), np.ones(2))
    P = Problem(objs[: int(r.integers(1, 4))], K)
    u0 = K.project(r.standard_normal(dim))
    tr = run_mog(P, u0, SolverConfig(h=1e-2, t_max=2.0))
    assert all(K.contains(x, 1e-9) for x in tr.states)
    assert not verify_descent(tr).increases.any()
    assert weights_valid(tr)


def test_armijo_sparse_and_constrained():
    P = builtin_problem("sparse")
    u0 = np.random.default_rng(0).standard_normal(P.dim)
    tr = run_mog(P, u0, SolverConfig(mode="armijo", max_iters=5000))
    assert tr.residuals[-1] <= 1e-4
    assert np.all(tr.extra["step_lengths"] > 0) and np.all(tr.extra["halvings"] <= 60)
    assert not verify_descent(tr).increases.any()
    assert weights_valid(tr)
    P = Problem((Quadratic(np.eye(2), [-3.0, 0.0]), L1(2)), Box([-1, -1], [1, 1]))
    tr = run_mog(P, [-0.5, 0.5], SolverConfig(mode="armijo", mu=0.5, max_iters=500))
    assert all(P.constraint.contains(x) for x in tr.states)
    assert not verify_descent(tr).increases.any()


def test_config_validation():
    with pytest.raises(ConfigError):
        SolverConfig(mode="rk45")
    with pytest.raises(ConfigError):
        SolverConfig(h=0)
    with pytest.raises(CapabilityError):
        run_scalarized(builtin_problem("example1"), [1, 0], [0.5, 0.5], SolverConfig(mode="armijo"))


def test_csv_round_trip():
    tr = run_mog(builtin_problem("example1"), [3, 2], SolverConfig(h=1e-2, t_max=2.0))
    head, data = read_trajectory_csv(trajectory_csv(tr))
    assert head == ["t", "u_1", "u_2", "f_1", "f_2", "theta_1", "theta_2", "speed", "residual"]
    np.testing.assert_array_equal(data[:, 0], tr.times)
    np.testing.assert_array_equal(data[:, 1:3], tr.states)
    np.testing.assert_array_equal(data[:, 3:5], tr.values.T)
