import json

import pytest

from noacim import cli


def run(args, tmp_path):
    return cli.main([*args, "--out", str(tmp_path)])


def test_tower_report(tmp_path):
    code = run(["tower", "--map", "doubling", "--n0", "2", "--l", "1", "--eps0", "1/4", "--depth", "8"], tmp_path)
    report = json.loads((tmp_path / "tower.json").read_text())
    assert code in (cli.EXIT_OK, cli.EXIT_FAILED)
    assert (code == cli.EXIT_OK) == report["tower"]["valid"]
    assert report["config"]["eps0"] == "1/4" and report["config"]["seed"] == 0


@pytest.mark.parametrize("args", [
    ["tower", "--map", ""],
    ["tower", "--n0", "2", "--l", "3"],
    ["tower", "--eps0", "abc"],
    ["linearize", "--U", "0-1"],
    ["escape", "--map", "no-such-map"],
])
def test_input_errors(args, tmp_path):
    assert run(args, tmp_path) == cli.EXIT_INPUT


def test_resource_cap_exit(tmp_path):
    assert run(["tower", "--map", "tripling", "--n0", "4", "--depth", "20", "--cap", "50"], tmp_path) == cli.EXIT_CAP


def test_escape_search_and_csv(tmp_path):
    assert run(["escape", "--map", "half", "--grid", "256", "--steps", "8"], tmp_path) == cli.EXIT_OK
    report = json.loads((tmp_path / "escape.json").read_text())
    assert report["verdict"]["passed"]
    assert (tmp_path / "density.csv").exists() and (tmp_path / "profile.csv").exists()


def test_escape_certificate_file(tmp_path):
    cert = {"K": {"dim": 1, "boxes": [[["1/10", "1"]]]}, "N": 2, "eps": "1/10"}
    path = tmp_path / "cert.json"
    path.write_text(json.dumps(cert))
    assert run(["escape", "--map", "identity", "--certificate", str(path)], tmp_path) == cli.EXIT_FAILED
    assert "FAIL" in json.loads((tmp_path / "escape.json").read_text())["ledger"][0]


def test_linearize(tmp_path):
    assert run(["linearize", "--map", "surrogate", "--r0", "1/100"], tmp_path) == cli.EXIT_OK
    assert json.loads((tmp_path / "linearize.json").read_text())["locally_linear"]


def test_slice_verify_random(tmp_path):
    code = run(["slice-verify", "--samples", "256", "--length", "18"], tmp_path)
    assert code == cli.EXIT_OK
    assert json.loads((tmp_path / "slicing.json").read_text())["plan"]["k"] == 17


def test_pipeline_small(tmp_path, monkeypatch):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"max_components": 8}))
    monkeypatch.setenv(cli.OUT_ENV, str(tmp_path / "env-out"))
    code = cli.main(["pipeline", "--eps", "1/2", "--config", str(cfg), "--grid", "128", "--steps", "4"])
    report = json.loads((tmp_path / "env-out" / "pipeline.json").read_text())
    assert (code == cli.EXIT_OK) == report["report"]["passed"]
    assert code == cli.EXIT_FAILED  # coverage and C1 lines fail at this scale
    assert (tmp_path / "env-out" / "density_g.csv").exists()
