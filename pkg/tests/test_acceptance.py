"""Acceptance suite on the shipped default configuration.

The suite runs once per session (about half a minute).  Each criterion
prints one PASS/FAIL line and re-checks its tolerance on the recorded
constants.
"""

import json
import time

import pytest

from mohardy.config import load_config
from mohardy.verify import run_verification


@pytest.fixture(scope="module")
def report(tmp_path_factory):
    out = tmp_path_factory.mktemp("verify")
    t0 = time.perf_counter()
    rep = run_verification(load_config(None), out)
    rep.elapsed = time.perf_counter() - t0
    rep.outdir = out
    return rep


def _check(report, number):
    (c,) = [c for c in report.checks if c.number == number]
    return c


def _tolerances(n, k):
    if n == 1:
        assert k["worst_relative_error"] <= 1e-6
    elif n == 2:
        assert 0.999 <= k["modular_min"] and k["modular_max"] <= 1.001
    elif n == 3:
        assert k["unit_error"] <= 1e-12
        assert k["min_constant"] >= 0.99
        assert k["scaling_drift"] <= 1e-12
    elif n == 4:
        assert k["overlap_max"] <= 12
    elif n == 5:
        assert k["reconstruction"] <= 1e-8
        assert k["moments"] <= 1e-8
        assert k["C1_drift"] < 2
    elif n == 6:
        assert k["residual"] <= 1e-6
        assert k["invalid_atoms"] == 0
        assert k["C10_drift"] < 2
    elif n == 7:
        bands = [v for key, v in k.items() if key.startswith(("K_maximal", "K_atomic"))]
        assert len(bands) == 10
        assert max(bands) < 100
    elif n == 8:
        for key in ("psi_band_n1", "psi_band_n2", "theta_band_n1", "theta_band_n2"):
            assert k[key] < 10
        assert k["identity_error"] <= 0.02
    elif n == 9:
        assert k["riesz_worst"] < 100 and k["psdo_worst"] < 100
        assert k["riesz_drift"] < 2 and k["psdo_drift"] < 2
        assert k["identity_error"] <= 1e-8
        assert k["riesz_constant_error"] <= 1e-8
    elif n == 10:
        assert k["csv_files"] > 0 and k["differing"] == 0


@pytest.mark.parametrize("number", range(1, 11))
def test_criterion(report, number, capsys):
    c = _check(report, number)
    with capsys.disabled():
        print(f"\n{c.line()}")
    assert c.passed, c.witness
    _tolerances(number, c.constants)


def test_report_written(report):
    data = json.loads((report.outdir / "report.json").read_text())
    assert data["passed"] is True
    assert [c["number"] for c in data["checks"]] == list(range(1, 11))
    assert set(data["provenance"]) >= {"config_sha256", "seed", "package_version"}


def test_runtime_budget(report):
    # the determinism check runs the suite twice; the target is ten minutes
    assert report.elapsed < 600
