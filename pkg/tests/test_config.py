import json

import numpy as np
import pytest

from pareto_flow.config import load_config, problem_from_json, problem_to_json
from pareto_flow.errors import ConfigError
from pareto_flow.objectives import builtin_problem

EXAMPLE1 = """{
  "dim": 2,
  "name": "example1",
  "objectives": [
    {"kind": "quadratic", "Q": [[1, 0], [0, 1]], "c": [1, 0], "r": 0.5},
    {"kind": "quadratic", "Q": [[1, 0], [0, 1]], "c": [-1, 0], "r": 0.5}
  ]
}
"""


def test_example1_config_matches_builtin(tmp_path):
    path = tmp_path / "ex1.json"
    path.write_text(EXAMPLE1)
    P = load_config(path)
    B = builtin_problem("example1")
    r = np.random.default_rng(0)
    for u in r.uniform(-3, 3, (100, 2)):
        np.testing.assert_allclose(P.values(u), B.values(u), atol=1e-14)
        for a, b in zip(P.subdifferentials(u), B.subdifferentials(u)):
            np.testing.assert_allclose(a.lower, b.lower, atol=1e-14)


@pytest.mark.parametrize("name", ["example1", "example2", "example3", "sparse"])
def test_round_trip(name):
    P = builtin_problem(name)
    Q = problem_from_json(problem_to_json(P))
    u = np.random.default_rng(1).standard_normal(P.dim)
    np.testing.assert_allclose(P.values(u), Q.values(u), rtol=1e-15)
    assert problem_to_json(Q) == problem_to_json(P)


def test_all_kinds_round_trip():
    doc = {
        "dim": 2,
        "objectives": [
            {"kind": "affine", "a": [1, 2], "r": 1},
            {"kind": "l1", "weight": 2},
            {"kind": "euclidean_norm"},
            {"kind": "max_affine", "A": [[1, 0], [0, 1]], "b": [0, 1]},
            {"kind": "least_squares", "A": [[1, 0]], "b": [3]},
        ],
        "constraint": {"kind": "ball", "center": [0, 0], "radius": 2},
    }
    P = problem_from_json(json.dumps(doc))
    assert P.q == 5
    Q = problem_from_json(problem_to_json(P))
    np.testing.assert_allclose(P.values([0.3, -0.2]), Q.values([0.3, -0.2]))
    for kind, extra in [("box", {"lower": [0, 0], "upper": [1, 1]}),
                        ("halfspaces", {"A": [[1, 1]], "b": [1]}), ("whole_space", {})]:
        doc["constraint"] = {"kind": kind, **extra}
        assert problem_from_json(json.dumps(doc)).constraint.kind == kind


def test_empty_objectives():
    with pytest.raises(ConfigError, match="non-empty"):
        problem_from_json('{"dim": 2, "objectives": []}')


def test_dimension_mismatch_names_both():
    text = json.dumps({"dim": 2, "objectives": [{"kind": "l1"}],
                       "constraint": {"kind": "box", "lower": [0, 0, 0], "upper": [1, 1, 1]}})
    with pytest.raises(ConfigError) as exc:
        problem_from_json(text)
    assert "3" in str(exc.value) and "2" in str(exc.value)


def test_unknown_key_with_line():
    text = '{\n  "dim": 2,\n  "objectives": [{"kind": "l1", "wieght": 1}]\n}'
    with pytest.raises(ConfigError) as exc:
        problem_from_json(text)
    assert "wieght" in str(exc.value) and "line 3" in str(exc.value)


@pytest.mark.parametrize("text, frag", [
    ('{"dim": 2', "invalid JSON"),
    ('{"dim": 0, "objectives": [{"kind": "l1"}]}', "dim"),
    ('{"dim": 2, "objectives": [{"kind": "cubic"}]}', "unknown kind"),
    ('{"dim": 2, "objectives": [{"kind": "quadratic", "Q": [[1, 0]]}]}', "shape"),
    ('{"dim": 2, "objectives": [{"kind": "quadratic", "Q": [[1, 0], [0, -1]]}]}', "semidefinite"),
    ('{"dim": 2, "objectives": [{"kind": "l1"}], "extra": 1}', "extra"),
    ('{"dim": 2, "objectives": [{"kind": "affine"}]}', "missing"),
])
def test_validation_errors(text, frag):
    with pytest.raises(ConfigError, match=frag):
        problem_from_json(text)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.json")
