import dataclasses
import json
import shutil
import subprocess

import jsonschema
import pytest

from cbf_lab.cli import load_schema, main
from cbf_lab.experiments import REGISTRY
from cbf_lab.model import Ellipse, Kind, from_closed_loop


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def run_json(capsys, schema, *argv):
    code, out, err = run(capsys, *argv)
    assert code == 0, err
    payload = json.loads(out)
    jsonschema.validate(payload, load_schema(schema))
    return payload


@pytest.fixture
def fig1a_file(tmp_path):
    path = tmp_path / "fig1a.json"
    path.write_text(json.dumps(REGISTRY["fig1a"].scenario().to_dict()))
    return str(path)


@pytest.fixture
def ellipse_file(tmp_path):
    sc = from_closed_loop([[-1.0, 0.0], [0.0, -2.0]],
                          Ellipse([3.0, 1.0], [[1.0, 0.0], [0.0, 4.0]]), 10.0)
    path = tmp_path / "ellipse.json"
    path.write_text(json.dumps(sc.to_dict()))
    return str(path)


def test_scenario_file_validates_against_schema(fig1a_file):
    with open(fig1a_file) as fh:
        jsonschema.validate(json.load(fh), load_schema("scenario"))


def test_flat_single_input_file(capsys, tmp_path):
    data = {"A": [[4, 2], [1, 1]], "B": [3, 1], "K": [3, -2],
            "obstacle": {"circle": {"center": [3, 2], "radius": 1}}, "alpha0": 10}
    jsonschema.validate(data, load_schema("scenario"))
    path = tmp_path / "flat.json"
    path.write_text(json.dumps(data))
    payload = run_json(capsys, "equilibria", "equilibria", "--scenario", str(path))
    assert [e["kind"] for e in payload["equilibria"]] == ["Saddle"]


def test_check(capsys, fig1a_file):
    payload = run_json(capsys, "check", "check", "--scenario", fig1a_file)
    assert payload["all_hold"] is True


def test_equilibria(capsys, fig1a_file):
    payload = run_json(capsys, "equilibria", "equilibria", "--scenario", fig1a_file)
    (eq,) = payload["equilibria"]
    assert eq["kind"] == "Saddle"
    assert abs(eq["location"][0] - 2.0) < 1e-9 and abs(eq["location"][1] - 2.0) < 1e-9


def test_classify(capsys):
    payload = run_json(capsys, "classify", "classify", "--experiment", "fig1d", "--point", "3,0")
    assert payload["kind"] == "AsymptoticallyStable"
    assert payload["is_equilibrium"] is True


def test_classify_off_boundary(capsys):
    code, _, err = run(capsys, "classify", "--experiment", "fig1d", "--point", "5,5")
    assert code == 1 and "boundary" in err


def test_simulate_writes_csv(capsys, tmp_path):
    payload = run_json(capsys, "simulate", "simulate", "--experiment", "fig1a",
                       "--x0", "5,5", "--tmax", "30", "--out", str(tmp_path))
    assert payload["verdict"] == "ConvergedToOrigin"
    header = (tmp_path / "trajectory.csv").read_text().split("\n", 1)[0]
    assert header == "t,x1,x2,h,eta"


def test_manifold(capsys, tmp_path):
    payload = run_json(capsys, "manifold", "manifold", "--experiment", "fig1b", "--out", str(tmp_path))
    (tr,) = payload["manifolds"]
    assert tr["stable_eigenvalue"] < 0
    assert len(tr["csv"]) == 2
    assert (tmp_path / "manifold_0_branch0.csv").exists()


def test_basin(capsys):
    payload = run_json(capsys, "basin", "basin", "--experiment", "fig1b",
                       "--seed", "1", "--n", "20", "--tmax", "20")
    assert payload["n"] == 20


def test_seed_is_mandatory(capsys):
    for cmd in ("basin", "verify"):
        code, _, _ = run(capsys, cmd, "--experiment", "fig1a")
        assert code == 1


def test_portrait_writes_files(capsys, tmp_path):
    payload = run_json(capsys, "portrait", "portrait", "--experiment", "fig1d",
                       "--grid", "10", "--out", str(tmp_path))
    assert len(payload["equilibria"]) == 3
    for name in ("field.csv", "portrait.svg", "equilibria.json"):
        assert (tmp_path / name).stat().st_size > 0


def test_portrait_requires_out(capsys):
    code, _, _ = run(capsys, "portrait", "--experiment", "fig1a")
    assert code == 1


def test_reduce(capsys, ellipse_file):
    payload = run_json(capsys, "reduce", "reduce", "--scenario", ellipse_file)
    assert payload["convention"] == "transported"
    assert payload["scenario"]["obstacle"]["circle"]["radius"] == 1.0


@pytest.mark.parametrize("name", sorted(REGISTRY))
def test_repro(capsys, name):
    payload = run_json(capsys, "repro", "repro", name, "--grid", "10")
    assert payload["match"] is True


def test_repro_other_gain_same_equilibria(capsys):
    code, _, _ = run(capsys, "repro", "fig1d", "--alpha0", "3", "--grid", "10")
    assert code == 0


def test_repro_mismatch_exit_code(capsys, monkeypatch):
    exp = REGISTRY["fig1a"]
    wrong = dataclasses.replace(exp, expected=(((2.5, 2.0), Kind.SADDLE),))
    monkeypatch.setitem(REGISTRY, "fig1a", wrong)
    code, out, _ = run(capsys, "repro", "fig1a", "--grid", "10")
    assert code == 2
    assert json.loads(out)["match"] is False


def test_verify_small(capsys):
    payload = run_json(capsys, "verify", "verify", "--seed", "3", "--n", "20")
    assert payload["passed"] is True and payload["n_scenarios"] == 20


def test_missing_scenario_file(capsys, tmp_path):
    code, _, err = run(capsys, "equilibria", "--scenario", str(tmp_path / "nope.json"))
    assert code == 1 and err


def test_invalid_scenario_file(capsys, tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"A": [[1, 0], [0, 1]]}))
    code, _, _ = run(capsys, "check", "--scenario", str(path))
    assert code == 1


def test_missing_scenario_flag(capsys):
    code, _, _ = run(capsys, "equilibria")
    assert code == 1


def test_output_deterministic(capsys, fig1a_file):
    a = run(capsys, "equilibria", "--scenario", fig1a_file)
    b = run(capsys, "equilibria", "--scenario", fig1a_file)
    assert a == b


@pytest.mark.skipif(shutil.which("cbf-lab") is None, reason="console script not installed")
def test_console_script():
    proc = subprocess.run(["cbf-lab", "repro", "fig1a", "--grid", "10"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["match"] is True
