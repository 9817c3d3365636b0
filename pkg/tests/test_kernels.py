"""Compiled kernels agree with their interpreted source and the numpy fallbacks."""
import numpy as np
import pytest

from pareto_flow import kernels
from pareto_flow._jit import JIT_ENABLED
from pareto_flow.convex_core import ConeSpec, SubdifferentialSet, pack_groups
from pareto_flow.dynamics import compile_problem
from pareto_flow.objectives import L1, Problem, Quadratic, WholeSpace

pytestmark = pytest.mark.skipif(not JIT_ENABLED, reason="numba disabled")


def _packed(seed, dim=3, m=1):
    r = np.random.default_rng(seed)
    c = r.standard_normal((3, dim)) * 2
    groups = [[(SubdifferentialSet.point(c[0]), 1.0)],
              [(SubdifferentialSet.box(c[1] - 0.5, c[1] + 0.5), 1.0)],
              [(SubdifferentialSet.polytope(c[2] + r.standard_normal((4, dim))), 1.0)]]
    cone = ConeSpec.from_generators(r.standard_normal((m, dim)), dim) if m else None
    return pack_groups(groups, dim, cone)


@pytest.mark.parametrize("seed", range(5))
def test_wolfe_matches_py_func(seed):
    P = _packed(seed)
    args = (*P.arrays, P.gens, 1e-12, 10_000, 1e8)
    a = kernels.wolfe_min_norm(*args)
    b = kernels.wolfe_min_norm.py_func(*args)
    np.testing.assert_allclose(a[0], b[0], atol=1e-12)
    assert a[-1] == b[-1]


def test_subgradient_matches_py_func():
    P = _packed(0, dim=2, m=0)
    a = kernels.subgradient_powered(*P.arrays, P.gens, 2.0, 0.1, 2000)
    b = kernels.subgradient_powered.py_func(*P.arrays, P.gens, 2.0, 0.1, 2000)
    np.testing.assert_allclose(a, b, atol=1e-12)


@pytest.mark.parametrize("m", [0, 1])
def test_angular_loop_matches_numpy(m):
    P = _packed(4, dim=2, m=m)
    a = kernels._angular_argmin_loop(*P.arrays, P.gens, 20_000)
    b = kernels._angular_argmin_numpy(*P.arrays, P.gens, 20_000)
    assert a[0] == b[0]
    assert a[1] == pytest.approx(b[1], abs=1e-12)


def test_dykstra_matches_py_func():
    r = np.random.default_rng(2)
    A, b, v = r.standard_normal((4, 3)), np.ones(4), r.standard_normal(3) * 4
    x1 = kernels.dykstra_halfspaces(v, A, b, 1e-12, 10_000)[0]
    x2 = kernels.dykstra_halfspaces.py_func(v, A, b, 1e-12, 10_000)[0]
    np.testing.assert_allclose(x1, x2, atol=1e-12)


def test_integrator_matches_py_func():
    P = Problem((Quadratic(np.diag([1.0, 2.0]), [1.0, -1.0]), L1(2, 0.7)), WholeSpace(2))
    Qs, cs, rs, ws, lams = compile_problem(P)
    args = (Qs, cs, rs, ws, lams, np.array([1.5, -0.3]), 1e-2, 2.0, 1e-8, True, 5000, 1, 1e-10,
            10_000, 1e8)
    a = kernels.integrate_qh(*args)
    b = kernels.integrate_qh.py_func(*args)
    np.testing.assert_allclose(a[0], b[0], atol=1e-12)
    np.testing.assert_allclose(a[1], b[1], atol=1e-12)
    assert a[6] == pytest.approx(b[6], rel=1e-12)


def test_simplex_projection_kernel():
    r = np.random.default_rng(5)
    for _ in range(20):
        x = r.standard_normal(int(r.integers(1, 7))) * 3
        np.testing.assert_allclose(kernels.project_simplex(x), kernels.project_simplex.py_func(x),
                                   atol=1e-15)
