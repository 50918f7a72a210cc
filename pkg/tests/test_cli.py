from __future__ import annotations

import json

import pytest

from solarterm import cli
from solarterm.errors import EstimationError


def test_version(capsys):
    with pytest.raises(SystemExit) as e:
        cli.main(["--version"])
    assert e.value.code == 0


def test_terms_without_input(tmp_path):
    assert cli.main(["terms", "--years", "2020:2020", "--out", str(tmp_path), "--format", "csv"]) == 0
    assert (tmp_path / "terms_calendar.csv").read_text().count("\n") == 25


@pytest.mark.parametrize("argv", [["bogus"], ["describe", "--prune-p", "2"], ["terms", "--years", "x"],
                                  ["describe"], ["turn", "--input", "x.csv"]])
def test_usage_errors(argv, capsys):
    assert cli.main(argv) == 1
    assert capsys.readouterr().err


def test_data_error(tmp_path, capsys):
    assert cli.main(["describe", "--input", str(tmp_path / "missing.csv"), "--out", str(tmp_path)]) == 2
    assert "data error" in capsys.readouterr().err


def test_estimation_error(small_synth_csv, tmp_path, monkeypatch, capsys):
    def boom(*a, **k):
        raise EstimationError("no convergence")

    monkeypatch.setattr("solarterm.pipeline.ar1_dummy_fit", boom)
    rc = cli.main(["full-mean", "--input", str(small_synth_csv), "--out", str(tmp_path), "--no-figures"])
    assert rc == 3
    assert "full-mean" in capsys.readouterr().err


def test_output_error(small_synth_csv, tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert cli.main(["describe", "--input", str(small_synth_csv), "--out", str(blocker / "sub")]) == 1


def test_config_file_and_override(small_synth_csv, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# defaults\ndist = t ged\nprune-p = 0.05\nno-figures = true\n")
    out = tmp_path / "r"
    rc = cli.main(["describe", "--input", str(small_synth_csv), "--config", str(cfg),
                   "--prune-p", "0.2", "--out", str(out)])
    assert rc == 0
    echoed = json.loads((out / "manifest.json").read_text())["config"]
    assert echoed["dists"] == ["t", "ged"] and echoed["prune_p"] == 0.2 and echoed["figures"] is False


def test_bad_config_key(small_synth_csv, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("colour = blue\n")
    assert cli.main(["describe", "--input", str(small_synth_csv), "--config", str(cfg)]) == 1


def test_synth_then_describe(tmp_path):
    csv = tmp_path / "s.csv"
    assert cli.main(["synth", "--out", str(csv), "--n-years", "3", "--mean-inj", "3=0.01",
                     "--var-inj", "8=2"]) == 0
    truth = json.loads((tmp_path / "s.truth.json").read_text())
    assert truth["spec"]["mean_inj"] == {"3": 0.01}
    assert cli.main(["describe", "--input", str(csv), "--out", str(tmp_path / "o"), "--no-figures"]) == 0
