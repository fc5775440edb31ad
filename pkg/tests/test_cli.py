import json

import pytest
from click.testing import CliRunner

from delisi.cli import main


@pytest.fixture
def runner():
    return CliRunner()


def test_equilibria_stdout_embeds_config(runner):
    r = runner.invoke(main, ["equilibria"])
    assert r.exit_code == 0
    payload = json.loads(r.output)
    assert payload["config"]["params"]["xc"] == 2500.0
    assert payload["equilibria"][0]["kind"] == "trivial_saddle"


def test_config_file_and_flag_override(runner, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"params": {"lambda1": 0.5, "xc": 100.0}}))
    r = runner.invoke(main, ["equilibria", "--config", str(cfg),
                             "--lambda1", "0.25"])
    assert r.exit_code == 0
    params = json.loads(r.output)["config"]["params"]
    assert params["lambda1"] == 0.25   # flag wins
    assert params["xc"] == 100.0       # config survives


def test_invalid_config_exits_2(runner, tmp_path):
    cfg = tmp_path / "bad.json"
    cfg.write_text("{not json")
    r = runner.invoke(main, ["equilibria", "--config", str(cfg)])
    assert r.exit_code == 2
    r = runner.invoke(main, ["equilibria", "--xc", "-3"])
    assert r.exit_code == 2


def test_loci_csv_output(runner, tmp_path):
    out = tmp_path / "loci.csv"
    r = runner.invoke(main, ["loci", "--kinds", "bt,saddle_node",
                             "--lam-min", "0.2", "--lam-max", "1.0",
                             "--n-grid", "10", "--out", str(out)])
    assert r.exit_code == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("# config ")
    assert lines[1].split(",")[0] == "kind"
    assert len(lines) == 2 + 11  # bt row + 10 grid rows
    assert repr(float(lines[2].split(",")[3]))  # 17-sig-digit round trip


def test_csv_determinism(runner, tmp_path):
    outs = []
    for name in ("a.csv", "b.csv"):
        out = tmp_path / name
        r = runner.invoke(main, ["loci", "--kinds", "bt",
                                 "--out", str(out)])
        assert r.exit_code == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


def test_lyapunov_json(runner, tmp_path):
    out = tmp_path / "lyap.json"
    r = runner.invoke(main, ["lyapunov", "--psi", "0.0677",
                             "--lam", "0.3144", "--out", str(out)])
    assert r.exit_code == 0
    payload = json.loads(out.read_text())
    assert payload["omega"] > 0
    assert "config" in payload


def test_lyapunov_neutral_saddle_exits_2(runner):
    r = runner.invoke(main, ["lyapunov", "--psi", "0.0677", "--lam", "3.0"])
    assert r.exit_code == 2


def test_continue_fold_outputs(runner, tmp_path):
    stem = tmp_path / "fold"
    r = runner.invoke(main, ["continue", "--branch", "fold",
                             "--out", str(stem)])
    assert r.exit_code == 0
    lines = (tmp_path / "fold.csv").read_text().splitlines()
    assert lines[0].startswith("# config ")
    special = json.loads((tmp_path / "fold_special.json").read_text())
    assert special["kind"] == "fold_curve"
    assert any(sp["tag"] == "BT" for sp in special["special_points"])


def test_threshold_csv(runner, tmp_path):
    out = tmp_path / "thr.csv"
    r = runner.invoke(main, ["threshold", "--lambda1", "0.1",
                             "--out", str(out)])
    assert r.exit_code == 0
    assert json.loads(r.output)["y_c"] > 0
    lines = out.read_text().splitlines()
    assert lines[1] == "x,h"


def test_threshold_with_interior_equilibria_exits_2(runner):
    r = runner.invoke(main, ["threshold", "--lambda1", "0.0127",
                             "--lambda2", "0.0040"])
    assert r.exit_code == 2


def test_portrait_svg_and_roi_check(runner, tmp_path):
    out = tmp_path / "p.svg"
    r = runner.invoke(main, ["portrait", "--lambda1", "0.0127",
                             "--lambda2", "0.0040", "--seed", "0.5,0.3",
                             "--t-max", "200", "--out", str(out)])
    assert r.exit_code == 0
    text = out.read_text()
    assert text.startswith("<?xml")
    assert "# config" not in text and "config" in text  # embedded comment
    r = runner.invoke(main, ["portrait", "--seed", "99999,1",
                             "--out", str(out)])
    assert r.exit_code == 2


def test_infinity_check_report(runner):
    r = runner.invoke(main, ["infinity-check"])
    assert r.exit_code == 0
    payload = json.loads(r.output)
    assert payload["angular_flow_all_negative"] is True
    assert payload["linearization_max_abs_err"] <= 1e-10
    assert payload["pushforward_max_rel_err"] <= 1e-8
