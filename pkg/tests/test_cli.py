import json
import subprocess
import sys

import numpy as np
import pytest

from mohardy.cli import main
from mohardy.grid import Grid, GridFunction


@pytest.fixture
def small(tmp_path):
    cfg = tmp_path / "small.json"
    cfg.write_text(json.dumps({"grid": {"points": 128},
                               "corpus": {"bumps": 2, "spikes": 1, "sawtooth": 1,
                                          "random_smooth": 1, "atoms": 1}}))
    return cfg, tmp_path / "out"


def _summary(out, cmd):
    return json.loads((out / cmd / "summary.json").read_text())


def test_norm_of_indicator(small, capsys):
    cfg, out = small
    rc = main(["--config", str(cfg), "--out", str(out), "norm",
               "--growth", '{"family": "power", "p": 1}', "--indicator", "0", "1"])
    assert rc == 0
    s = _summary(out, "norm")
    assert s["status"] == "ok"
    assert s["results"][0]["norm"] == pytest.approx(1.0, rel=1e-9)
    assert "config_sha256" in s["provenance"]
    assert json.loads(capsys.readouterr().out)["status"] == "ok"


def test_norm_of_csv_input(small, tmp_path):
    cfg, out = small
    g = Grid.box(-4.0, 4.0, 128)
    f = GridFunction(g, np.where(np.abs(g.coordinates()[..., 0]) < 1, 2.0, 0.0))
    path = tmp_path / "f.csv"
    f.to_csv(path)
    rc = main(["--config", str(cfg), "--out", str(out), "norm", "--growth", "power",
               "--input", str(path)])
    assert rc == 0
    assert _summary(out, "norm")["results"][0]["norm"] == pytest.approx(4.0, rel=1e-9)


@pytest.mark.parametrize("cmd", ["weights", "maximal", "bmo", "riesz", "psdo"])
def test_subcommands_run(small, cmd, capsys):
    cfg, out = small
    assert main(["--config", str(cfg), "--out", str(out), cmd]) == 0
    assert _summary(out, cmd)["status"] == "ok"
    assert list((out / cmd).glob("*.csv"))


def test_czd_and_atoms_on_indicator(small):
    cfg, out = small
    for cmd in ("czd", "atoms"):
        assert main(["--config", str(cfg), "--out", str(out), cmd, "--indicator", "-0.5", "0.5"]) == 0
        assert _summary(out, cmd)["status"] == "ok"


def test_options_after_subcommand(small):
    cfg, out = small
    assert main(["norm", "--config", str(cfg), "--out", str(out), "--indicator", "0", "1",
                 "--growth", "power"]) == 0
    assert (out / "norm" / "summary.json").exists()


def test_config_errors_exit_2(tmp_path, capsys):
    missing = tmp_path / "none.json"
    assert main(["--config", str(missing), "norm"]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{ nope")
    assert main(["--config", str(bad), "norm"]) == 2
    assert "bad.json:1:3" in capsys.readouterr().err
    unknown = tmp_path / "unknown.json"
    unknown.write_text('{"gird": {}}')
    assert main(["--config", str(unknown), "norm"]) == 2
    assert main(["norm", "--growth", "bogus", "--out", str(tmp_path)]) == 2
    assert main(["norm", "--indicator", "1", "0", "--out", str(tmp_path)]) == 2


def test_unknown_subcommand_exits_2():
    proc = subprocess.run([sys.executable, "-m", "mohardy.cli", "frobnicate"],
                          capture_output=True, text=True)
    assert proc.returncode == 2


def test_verify_subset(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"grid": {"points": 128}}))
    out = tmp_path / "out"
    rc = main(["--config", str(cfg), "--out", str(out), "verify", "--only", "1", "3",
               "--no-determinism"])
    text = capsys.readouterr().out
    assert rc == 0
    assert "criterion  1 Luxembourg exactness: PASS" in text
    report = json.loads((out / "verify" / "report.json").read_text())
    assert [c["number"] for c in report["checks"]] == [1, 3]


def test_verify_failure_exits_1(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"grid": {"points": 128}, "corpus": {"bumps": 3}}))
    rc = main(["--config", str(cfg), "--out", str(tmp_path / "o"), "verify", "--only", "1",
               "--no-determinism"])
    assert rc == 1
    assert "witness: corpus has only 3 functions" in capsys.readouterr().out
