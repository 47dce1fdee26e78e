import csv
import json

import pytest

from fairlens.cli import run
from fairlens.pipeline import SCENARIOS, artifact_hashes

FAST = "epochs = 2\nremoval_epochs = 2\nprobe_epochs = 2\n"


@pytest.fixture()
def fast_cfg(tmp_path):
    path = tmp_path / "fast.cfg"
    path.write_text(FAST)
    return str(path)


def _args(cfg, out, *extra):
    return ["--config", cfg, "--n-profiles", "480", "--k", "20", "--out", str(out), *extra]


def test_bad_n_profiles_exit_2(tmp_path, capsys):
    assert run(["generate", "--n-profiles", "23", "--out", str(tmp_path / "o")]) == 2
    assert "24" in capsys.readouterr().err


def test_bad_config_key_exit_2(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("nonsense = 1\n")
    assert run(["generate", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2


def test_missing_prerequisites_exit_3(tmp_path, fast_cfg, capsys):
    out = tmp_path / "o"
    assert run(["debias", *_args(fast_cfg, out)]) == 3
    assert run(["generate", *_args(fast_cfg, out)]) == 0
    assert run(["generate", *_args(fast_cfg, out)]) == 3  # refuses to overwrite
    assert run(["train", *_args(fast_cfg, out), "--scenario", "agnostic"]) == 3
    assert "debias" in capsys.readouterr().err
    assert run(["audit", *_args(fast_cfg, out), "--scenario", "neutral"]) == 3


def test_staged_commands(tmp_path, fast_cfg, capsys):
    out = tmp_path / "o"
    assert run(["generate", *_args(fast_cfg, out)]) == 0
    assert run(["debias", *_args(fast_cfg, out)]) == 0
    assert "fresh-probe accuracy" in capsys.readouterr().out
    for scenario, attr in (("biased", "ethnicity"), ("agnostic", "gender")):
        assert run(["train", *_args(fast_cfg, out), "--scenario", scenario, "--bias-attr", attr]) == 0
        assert run(["audit", *_args(fast_cfg, out), "--scenario", scenario, "--bias-attr", attr]) == 0
    report = json.loads((out / "report_agnostic-gender.json").read_text())
    assert report["k"] == 20 and len(report["leakage"]) == 6
    with (out / "loss_biased-ethnicity.csv").open() as fh:
        assert len(list(csv.reader(fh))) == 3
    assert run(["generate", *_args(fast_cfg, out), "--force"]) == 0
    assert not (out / "transform.json").exists()


def test_full_run_deterministic(tmp_path, fast_cfg):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(["full-run", *_args(fast_cfg, a)]) == 0
    assert run(["full-run", *_args(fast_cfg, b)]) == 0
    ha, hb = artifact_hashes(a), artifact_hashes(b)
    assert ha == hb
    for s in SCENARIOS:
        assert f"report_{s}.json" in ha
    assert (a / "comparison.md").read_text().count("|") > 20
    assert run(["full-run", *_args(fast_cfg, a)]) == 3
    assert run(["full-run", *_args(fast_cfg, a), "--force"]) == 0


def test_seed_changes_output(tmp_path, fast_cfg):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(["generate", *_args(fast_cfg, a), "--seed", "1"]) == 0
    assert run(["generate", *_args(fast_cfg, b), "--seed", "2"]) == 0
    assert artifact_hashes(a)["dataset.jsonl"] != artifact_hashes(b)["dataset.jsonl"]
