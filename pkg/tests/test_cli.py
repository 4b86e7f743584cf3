"""Command-line behavior: exit codes, output formats, determinism."""

import csv
import json

import numpy as np
import pytest

from gridshare.cases import (
    two_group_case,
    two_user_case,
    uncongested_sweep_case,
)
from gridshare.cli import misreport_sweep, run_cli
from gridshare.errors import GridShareError
from gridshare.model import write_case


@pytest.fixture(scope="module")
def table_case(tmp_path_factory):
    path = tmp_path_factory.mktemp("cases") / "two_group.json"
    write_case(two_group_case(), path)
    return path


@pytest.fixture(scope="module")
def toy_case(tmp_path_factory):
    path = tmp_path_factory.mktemp("cases") / "toy.json"
    write_case(two_user_case(flow_limit=0.1), path)
    return path


def test_dispatch_roundtrip(table_case, tmp_path):
    out = tmp_path / "dispatch.json"
    assert run_cli(["dispatch", "--case", str(table_case), "--out", str(out)]) == 0
    payload = json.loads(out.read_text())
    assert payload["status"] == "optimal"
    assert np.allclose(payload["d"], 0.35, atol=1e-6)
    assert abs(abs(payload["flows"][0]) - 10.0) <= 1e-6
    assert payload["disutility"] == pytest.approx(50.925, abs=1e-6)


def test_share_outputs(table_case, tmp_path):
    out = tmp_path / "eq.json"
    trace = tmp_path / "trace.csv"
    code = run_cli(["share", "--case", str(table_case),
                    "--out", str(out), "--trace", str(trace)])
    assert code == 0
    payload = json.loads(out.read_text())
    assert payload["converged"] is True
    assert np.allclose(payload["d"], 0.35, atol=1e-3)
    with open(trace, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["iter", "user_id", "b", "lambda", "d", "residual"]
    assert len(rows) - 1 == payload["iterations"] * 200


def test_share_byte_identical(table_case, tmp_path):
    out1 = tmp_path / "eq1.json"
    out2 = tmp_path / "eq2.json"
    assert run_cli(["share", "--case", str(table_case), "--out", str(out1)]) == 0
    assert run_cli(["share", "--case", str(table_case), "--out", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()


def test_share_strict_nonconvergence(table_case, tmp_path):
    out = tmp_path / "eq.json"
    code = run_cli(["share", "--case", str(table_case), "--a", "0.01",
                    "--max-iters", "200", "--out", str(out), "--strict"])
    assert code == 1
    payload = json.loads(out.read_text())
    assert payload["converged"] is False
    assert payload["iterations"] == 200
    # without --strict the same run is a flagged success
    assert run_cli(["share", "--case", str(table_case), "--a", "0.01",
                    "--max-iters", "200", "--out", str(out)]) == 0


def test_region_then_verify(toy_case, tmp_path):
    region = tmp_path / "region.json"
    assert run_cli(["region", "--case", str(toy_case),
                    "--wmax", "3,3", "--out", str(region)]) == 0
    payload = json.loads(region.read_text())
    assert payload["dim"] == 2
    assert payload["complete"] is True
    assert len(payload["halfspaces"]) >= 4
    code = run_cli(["verify-region", "--case", str(toy_case),
                    "--region", str(region), "--samples", "400", "--seed", "7"])
    assert code == 0


def test_verify_region_recompute(toy_case):
    assert run_cli(["verify-region", "--case", str(toy_case), "--wmax", "3,3",
                    "--samples", "200", "--seed", "3", "--jobs", "2"]) == 0


def test_check_c1_output(table_case, capsys):
    assert run_cli(["check-c1", "--case", str(table_case), "--a", "10"]) == 0
    out = capsys.readouterr().out
    assert "holds=true" in out
    assert "margin=0.5" in out
    assert run_cli(["check-c1", "--case", str(table_case)]) == 0
    assert "holds=false" in capsys.readouterr().out


def test_dump_constraints(toy_case, tmp_path):
    out = tmp_path / "constraints.csv"
    assert run_cli(["dump-constraints", "--case", str(toy_case),
                    "--out", str(out)]) == 0
    with open(out, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0][0] == "row"
    assert rows[0][-1] == "c"
    assert len(rows) - 1 == 2 + 2 * 2 + 2 * 1
    labels = [r[0] for r in rows[1:]]
    assert labels[0] == "balance+"
    assert any(lbl.startswith("flow+") for lbl in labels)


def test_usage_errors_exit_2(table_case):
    assert run_cli(["no-such-command"]) == 2
    assert run_cli(["share"]) == 2                      # missing --case
    assert run_cli(["share", "--case", str(table_case), "--frobnicate"]) == 2


def test_missing_file_exit_1(capsys):
    assert run_cli(["dispatch", "--case", "/definitely/not/here.json"]) == 1
    assert "error:" in capsys.readouterr().err


def test_schema_violation_exit_1(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"grid": {}}')
    assert run_cli(["dispatch", "--case", str(bad)]) == 1
    assert "error:" in capsys.readouterr().err


def test_dispatch_infeasible_exit_1(tmp_path):
    case = two_user_case(w1=10.0, w2=10.0)   # far outside any feasible region
    path = tmp_path / "inf.json"
    write_case(case, path)
    out = tmp_path / "out.json"
    assert run_cli(["dispatch", "--case", str(path), "--out", str(out)]) == 1
    assert json.loads(out.read_text())["status"] == "infeasible"


def test_misreport_cli(tmp_path):
    path = tmp_path / "sweep_case.json"
    write_case(uncongested_sweep_case(), path)
    out = tmp_path / "sweep.csv"
    assert run_cli(["misreport", "--case", str(path), "--user", "1",
                    "--scale-range", "0.5:2.0:0.5", "--out", str(out)]) == 0
    with open(out, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0][0] == "scale"
    assert [float(r[0]) for r in rows[1:]] == [0.5, 1.0, 1.5, 2.0]
    assert all(r[6] == "true" for r in rows[1:])


def test_misreport_truthful_baseline_matches():
    case = two_user_case(flow_limit=0.1)
    result = misreport_sweep(case, target_user=1, scales=[1.0])
    row = result.rows[0]
    assert row.centralized_ok and row.sharing_ok
    assert row.total_sharing == pytest.approx(row.total_centralized, abs=1e-6)


def test_misreport_uncongested_sharing_total_constant():
    case = uncongested_sweep_case()
    scales = [0.2, 0.5, 1.0, 1.6, 2.5, 4.0]
    result = misreport_sweep(case, target_user=1, scales=scales)
    totals = [r.total_sharing for r in result.rows]
    assert all(r.sharing_ok for r in result.rows)
    assert max(totals) - min(totals) < 1e-6


def test_misreport_congested_centralized_increases():
    case = two_user_case(flow_limit=0.1)
    result = misreport_sweep(case, target_user=1, scales=[1.0, 4.0])
    truthful, inflated = result.rows
    assert inflated.total_centralized > truthful.total_centralized + 1e-4
    # over-reporting pays for the misreporter under central dispatch
    assert inflated.user_centralized < truthful.user_centralized - 1e-4


def test_misreport_rejects_bad_scales():
    case = two_user_case()
    with pytest.raises(GridShareError, match="strictly increasing"):
        misreport_sweep(case, 1, [1.0, 1.0])
    with pytest.raises(GridShareError, match="no user"):
        misreport_sweep(case, 42, [1.0, 2.0])
