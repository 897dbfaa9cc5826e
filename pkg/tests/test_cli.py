import csv
import json

import numpy as np
import pytest
import scipy.sparse as sp

from bdfadapt import cli
from bdfadapt.config import ConfigError, from_dict, load_config
from bdfadapt.problem import ComponentPartition, DAEProblem

HEADER = "n,t,dt,est_total,est_velocity,est_pressure,retries,newton_iters,estimator_seconds"


def write(path, text):
    path.write_text(text)
    return path


def rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


@pytest.fixture
def saddle_cfg(tmp_path):
    return write(tmp_path / "saddle.toml", f"""
[problem]
id = "saddle_dae"
t_end = 0.3
[controller]
tol = 1e-5
dt_min = 1e-4
dt_max = 0.05
[output]
dir = "{tmp_path / 'out'}"
""")


def test_run_writes_steps_summary_and_config(saddle_cfg, tmp_path):
    assert cli.main(["run", "--config", str(saddle_cfg)]) == 0
    out = tmp_path / "out"
    assert (out / "steps.csv").read_text().splitlines()[0] == HEADER
    steps = rows(out / "steps.csv")
    assert float(steps[-1]["t"]) == pytest.approx(0.3)
    assert [int(r["n"]) for r in steps] == list(range(1, len(steps) + 1))
    assert steps[0]["est_total"] == ""  # start-up steps carry no estimate
    assert all(float(r["est_total"]) < 1e-5 for r in steps[2:])
    summary = json.loads((out / "summary.json").read_text())
    assert summary["accepted_steps"] == len(steps) and summary["aborted"] is None
    resolved = json.loads((out / "config.resolved.json").read_text())
    assert resolved["controller"]["tol"] == 1e-5 and resolved["controller"]["kappa_max"] == 1.5
    attempts = rows(out / "attempts.csv")
    assert len(attempts) == len(steps) + summary["rejected_attempts"]


def test_both_estimators_add_columns(saddle_cfg, tmp_path):
    assert cli.main(["run", "--config", str(saddle_cfg), "--estimator", "both", "--out", str(tmp_path / "b")]) == 0
    header = (tmp_path / "b" / "steps.csv").read_text().splitlines()[0]
    assert header == HEADER + ",est_total_impl,est_total_li"


def test_compare_estimators(saddle_cfg, tmp_path, capsys):
    assert cli.main(["compare-estimators", "--config", str(saddle_cfg), "--out", str(tmp_path / "c")]) == 0
    table = rows(tmp_path / "c" / "compare.csv")
    assert list(table[0]) == cli.COMPARE_COLUMNS
    assert all(abs(float(r["ratio"]) - 1) < 1e-8 for r in table)
    assert "LI estimator" in capsys.readouterr().out


def test_reference_mode(tmp_path):
    cfg = write(tmp_path / "ref.toml", f"""
[problem]
id = "stiff_ode"
t_end = 0.05
[controller]
dt_min = 0.01
dt_max = 0.1
[output]
dir = "{tmp_path / 'ref'}"
reference = true
""")
    assert cli.main(["run", "--config", str(cfg)]) == 0
    steps = rows(tmp_path / "ref" / "steps.csv")
    assert len(steps) == 5
    np.testing.assert_allclose([float(r["dt"]) for r in steps], 0.01, rtol=1e-12)


def test_zero_length_run(tmp_path):
    cfg = write(tmp_path / "z.json", json.dumps({"problem": {"id": "stiff_ode", "t_end": 0.0},
                                                  "output": {"dir": str(tmp_path / "z")}}))
    assert cli.main(["run", "--config", str(cfg)]) == 0
    assert (tmp_path / "z" / "steps.csv").read_text().strip() == HEADER


@pytest.mark.parametrize("text", [
    "[problem]\nid = 'nope'\n",
    "[problem]\nbogus = 1\n",
    "[controller]\nkappa_min = 2.0\n",
    "[controller]\nestimator = 'rk'\n",
    "[extra]\n",
    "this is not toml",
])
def test_bad_configs_exit_nonzero(tmp_path, text, capsys):
    cfg = write(tmp_path / "bad.toml", text)
    assert cli.main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) != 0
    assert "error" in capsys.readouterr().err
    with pytest.raises(ConfigError):
        load_config(cfg)


def test_missing_config_file(tmp_path):
    assert cli.main(["run", "--config", str(tmp_path / "missing.toml")]) != 0


class Explodes(DAEProblem):
    """``u' = -u`` until t = 0.01, then a NaN residual."""

    def residual(self, t, udot, u):
        return udot + u if t <= 0.01 else np.full(1, np.nan)

    def jacobian(self, t, udot, u, shift):
        return sp.csr_matrix([[shift + 1.0]])

    def partition(self):
        return ComponentPartition.from_sizes([("u", 1)])

    def initial_state(self, t0):
        return np.array([1.0])


def test_abort_exits_nonzero_and_keeps_partial_output(tmp_path, monkeypatch):
    monkeypatch.setattr(cli, "build_problem", lambda spec: Explodes())
    cfg = write(tmp_path / "a.toml", f"""
[problem]
id = "stiff_ode"
t_end = 1.0
[controller]
dt_min = 1e-3
[output]
dir = "{tmp_path / 'a'}"
""")
    assert cli.main(["run", "--config", str(cfg)]) != 0
    steps = rows(tmp_path / "a" / "steps.csv")
    assert steps and float(steps[-1]["t"]) <= 0.01
    assert json.loads((tmp_path / "a" / "summary.json").read_text())["aborted"]


def test_convergence_writes_orders(tmp_path):
    out = tmp_path / "conv"
    assert cli.main(["convergence", "saddle_dae", "--out", str(out), "--t-end", "0.5"]) == 0
    table = rows(out / "orders.csv")
    assert list(table[0]) == cli.ORDER_COLUMNS
    assert {r["scheme"] for r in table} == {"bdf2", "bdf3", "li-bdf3"}
    last = {r["scheme"]: float(r["observed_order"]) for r in table if r["h"] == "0.00125"}
    assert last["bdf2"] == pytest.approx(2.0, abs=0.1) and last["bdf3"] == pytest.approx(3.0, abs=0.15)


def test_snapshots_for_flow_problems(tmp_path):
    cfg = write(tmp_path / "p.toml", f"""
[problem]
id = "pressure_impulse"
t_end = 0.01
[controller]
dt_max = 1e-2
[output]
dir = "{tmp_path / 'p'}"
snapshot_times = [0.005, 0.01]
""")
    assert cli.main(["run", "--config", str(cfg)]) == 0
    out = tmp_path / "p"
    assert (out / "nodes.txt").exists() and (out / "snapshot_001.txt").exists()
    assert np.loadtxt(out / "snapshot_001.txt").shape[1] == 6


def test_shipped_configs_parse():
    from pathlib import Path

    root = Path(__file__).resolve().parents[1] / "configs"
    paths = sorted(root.glob("*.toml"))
    assert paths
    for p in paths:
        cfg = load_config(p)
        assert cfg.to_dict()["problem"]["id"] == cfg.problem.id


def test_round_trip_through_dict():
    cfg = from_dict({"problem": {"id": "cfd300", "refine": 1}, "controller": {"tol": 1e-4},
                     "newton": {"max_iter": 12}})
    again = from_dict(cfg.to_dict())
    assert again == cfg
