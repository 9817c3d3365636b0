import json
import subprocess
import sys

import numpy as np
import pytest

from pareto_flow.cli import main, parse_grid, ArgError
from pareto_flow.dynamics import read_trajectory_csv
from pareto_flow.objectives import builtin_problem, closed_form_field


def _csv(path):
    lines = path.read_text(encoding="utf-8").splitlines()
    head = lines[0].split(",")
    return head, np.array([[float(x) for x in ln.split(",")] for ln in lines[1:]])


def test_run_example(tmp_path):
    out = tmp_path / "traj.csv"
    assert main(["run", "--problem", "example1", "--x0", "3,2", "--step", "1e-3", "--t-max", "20",
                 "--out", str(out)]) == 0
    head, data = read_trajectory_csv(out.read_text())
    assert head[:3] == ["t", "u_1", "u_2"]
    np.testing.assert_allclose(data[-1, 1:3], [1, 0], atol=1e-2)


def test_field_example(tmp_path):
    out = tmp_path / "field.csv"
    assert main(["field", "--problem", "example2", "--grid", "-2:2:21", "--out", str(out)]) == 0
    head, data = _csv(out)
    assert data.shape[0] == 441
    assert head[:4] == ["u_1", "u_2", "s_1", "s_2"]
    for row in data:
        assert np.abs(row[2:4] - closed_form_field("example2", row[:2])).max() <= 1e-6


def test_check_example(capsys):
    assert main(["check", "--problem", "example3", "--x0", "-1,0", "--tol", "1e-8"]) == 0
    assert capsys.readouterr().out.splitlines()[0] == "critical"
    assert main(["check", "--problem", "example3", "--x0", "2,1"]) == 0
    assert capsys.readouterr().out.splitlines()[0] == "not critical"


def test_compare(tmp_path):
    out = tmp_path / "cmp.csv"
    assert main(["compare", "--problem", "example1", "--x0", "1,0", "--step", "1e-2", "--t-max", "5",
                 "--theta", "0.5,0.5", "--out", str(out)]) == 0
    head, data = _csv(out)
    col = {h: k for k, h in enumerate(head)}
    assert data[:, col["mog_nonincreasing_1"]].all() and data[:, col["mog_nonincreasing_2"]].all()
    assert not data[:, col["scalarized_nonincreasing_2"]].all()
    assert np.all(np.isin(data[:, col["max_nonincreasing_1"]], [0, 1]))


def test_front_and_yosida_deterministic(tmp_path, monkeypatch):
    monkeypatch.setenv("PARETO_FLOW_SEED", "7")
    outs = []
    for k in range(2):
        f = tmp_path / f"front{k}.csv"
        y = tmp_path / f"y{k}.json"
        assert main(["front", "--problem", "example2", "--n-starts", "4", "--step", "1e-2",
                     "--out", str(f)]) == 0
        assert main(["yosida", "--problem", "example1", "--lambdas", "1e-1,1e-2", "--step", "1e-2",
                     "--t-max", "2", "--out", str(y)]) == 0
        outs.append((f.read_bytes(), y.read_bytes()))
    assert outs[0] == outs[1]
    head, data = _csv(tmp_path / "front0.csv")
    assert head[-1] == "nondominated" and data.shape == (4, 8)
    doc = json.loads(outs[0][1])
    assert {"lambdas", "deviations", "value_deviations", "energies"} <= set(doc)
    # the seed changes the uniform starts
    f = tmp_path / "front_other.csv"
    assert main(["front", "--problem", "example2", "--n-starts", "4", "--step", "1e-2", "--seed", "8",
                 "--out", str(f)]) == 0
    assert f.read_bytes() != outs[0][0]


def test_config_file_problem(tmp_path):
    cfg = tmp_path / "p.json"
    cfg.write_text(json.dumps(builtin_problem("example1").to_dict()))
    assert main(["check", "--problem", str(cfg), "--x0", "0,0"]) == 0


@pytest.mark.parametrize("argv", [
    [],
    ["run", "--problem", "example1"],
    ["run", "--problem", "nope", "--x0", "1,1"],
    ["run", "--problem", "example1", "--x0", "1"],
    ["run", "--problem", "example1", "--x0", "a,b"],
    ["run", "--problem", "example1", "--x0", "1,1", "--step", "-1"],
    ["field", "--problem", "example1", "--grid", "2:1:3"],
    ["field", "--problem", "sparse", "--grid", "-1:1:3"],
    ["yosida", "--problem", "example1", "--lambdas", "1e-3,1e-2"],
    ["compare", "--problem", "example1", "--x0", "1,0", "--theta", "1,1,1"],
])
def test_argument_errors_exit_2(argv, capsys):
    assert main(argv) == 2
    assert "error" in capsys.readouterr().err


def test_bad_config_exit_2(tmp_path):
    cfg = tmp_path / "bad.json"
    cfg.write_text('{"dim": 2, "objectives": []}')
    assert main(["check", "--problem", str(cfg), "--x0", "0,0"]) == 2


def test_solver_failure_exit_1(monkeypatch, capsys, tmp_path):
    import pareto_flow.cli as cli
    from pareto_flow.errors import ConvergenceError

    def boom(*a, **k):
        raise ConvergenceError("min-norm solver hit the iteration cap", best=None, residual=1.0)

    monkeypatch.setattr(cli, "run_mog", boom)
    out = tmp_path / "t.csv"
    assert main(["run", "--problem", "example1", "--x0", "1,1", "--out", str(out)]) == 1
    assert "solver failure" in capsys.readouterr().err
    assert not out.exists()


def test_parse_grid():
    assert parse_grid("-2:2:21") == (-2.0, 2.0, 21)
    with pytest.raises(ArgError):
        parse_grid("1:2")


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "pareto_flow", "check", "--problem", "example1",
                          "--x0", "0,0"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.startswith("critical")
