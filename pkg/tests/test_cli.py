from __future__ import annotations

import json
import subprocess

import pytest

from jointweibull.cli import (
    SEED_ENV_VAR,
    main,
    parse_complete_file,
    parse_jpc_file,
    parse_jpc_lines,
    serialize_jpc_sample,
)
from jointweibull.datasets import carbon_fiber_10mm, carbon_fiber_20mm, fiber_jpc_sample
from jointweibull.errors import SampleFileError

ONE_GROUP_FILE = """\
2 3 2
R: 1 2
0.5 0 1
0.9 0 1
"""

IMPROPER_FILE = """\
2 1 3
R: 0 0 0
5 1 0
6 1 0
100 0 0
"""


def _kv(out: str) -> dict[str, list[str]]:
    parsed: dict[str, list[str]] = {}
    for line in out.strip().splitlines():
        parts = line.split()
        parsed[parts[0]] = parts[1:]
    return parsed


@pytest.fixture()
def fiber_file(tmp_path):
    path = tmp_path / "joint.txt"
    path.write_text(serialize_jpc_sample(fiber_jpc_sample()), encoding="utf-8")
    return str(path)


def test_parse_round_trip() -> None:
    sample = fiber_jpc_sample()
    again = parse_jpc_lines(serialize_jpc_sample(sample).splitlines())
    assert again.scheme == sample.scheme
    for a, b in zip(again.obs, sample.obs):
        assert a.t == pytest.approx(b.t, rel=1e-11)
        assert (a.delta, a.s) == (b.delta, b.s)


def test_parse_skips_comments_and_blanks() -> None:
    text = ["# heading", "", "2 2 2", "  # another", "R: 1 1", "1.0 1 1", "", "2.0 0 0"]
    sample = parse_jpc_lines(text)
    assert sample.scheme.k == 2 and sample.k1 == 1


def test_parse_reports_malformed_input() -> None:
    with pytest.raises(SampleFileError):
        parse_jpc_lines(["# nothing"])
    with pytest.raises(SampleFileError):
        parse_jpc_lines(["2 2", "R: 1 1", "1 1 1", "2 0 0"])
    with pytest.raises(SampleFileError):
        parse_jpc_lines(["2 2 2", "1.0 1 1", "2.0 0 0"])
    with pytest.raises(SampleFileError):
        parse_jpc_lines(["2 2 2", "R: 1 1", "1.0 1 1"])
    with pytest.raises(SampleFileError):
        parse_jpc_lines(["2 2 2", "R: 1 1", "1.0 one 1", "2.0 0 0"])
    with pytest.raises(SampleFileError):  # sum(R) inconsistent with m+n-k
        parse_jpc_lines(["2 2 2", "R: 2 1", "1.0 1 1", "2.0 0 0"])
    with pytest.raises(SampleFileError):
        parse_jpc_file("/nonexistent/sample.txt")


def test_parse_complete_values(tmp_path) -> None:
    p = tmp_path / "vals.txt"
    p.write_text("# strengths\n1.2, 3.4\n5.6\n", encoding="utf-8")
    assert parse_complete_file(str(p)) == (1.2, 3.4, 5.6)
    bad = tmp_path / "bad.txt"
    bad.write_text("1.2 oops\n", encoding="utf-8")
    with pytest.raises(SampleFileError):
        parse_complete_file(str(bad))
    empty = tmp_path / "empty.txt"
    empty.write_text("# only comments\n", encoding="utf-8")
    with pytest.raises(SampleFileError):
        parse_complete_file(str(empty))


def test_fit_command(fiber_file, capsys) -> None:
    assert main(["fit", fiber_file, "--shift", "0.75"]) == 0
    out = _kv(capsys.readouterr().out)
    assert float(out["alpha"][0]) == pytest.approx(4.495, abs=5e-4)
    assert float(out["lambda1"][0]) == pytest.approx(0.071, abs=5e-4)
    assert float(out["lambda2"][0]) == pytest.approx(0.016, abs=1e-3)
    assert out["converged"] == ["1"]
    lo, hi = (float(v) for v in out["ci_alpha"])
    assert lo < 4.495 < hi
    assert float(out["ci_level"][0]) == 0.9


def test_fit_ordered_command(fiber_file, capsys) -> None:
    assert main(["fit", fiber_file, "--shift", "0.75", "--ordered"]) == 0
    out = _kv(capsys.readouterr().out)
    assert out["boundary"] == ["1"]
    assert out["lambda1"] == out["lambda2"]


def test_simulate_is_deterministic_and_fits(tmp_path, capsys) -> None:
    args = [
        "simulate", "--m", "8", "--n", "7", "--k", "6",
        "--R", "2", "0", "3", "0", "4", "0",
        "--alpha", "1.5", "--lambda1", "0.6", "--lambda2", "1.1",
    ]
    f1 = tmp_path / "a.txt"
    f2 = tmp_path / "b.txt"
    assert main(args + ["--seed", "9", "--out", str(f1)]) == 0
    assert main(args + ["--seed", "9", "--out", str(f2)]) == 0
    assert f1.read_bytes() == f2.read_bytes()
    assert main(args + ["--seed", "10", "--out", "-"]) == 0
    other = capsys.readouterr().out
    assert other != f1.read_text()
    rc = main(["fit", str(f1)])
    assert rc == 0
    capsys.readouterr()


def test_seed_env_var(tmp_path, capsys, monkeypatch) -> None:
    args = [
        "simulate", "--m", "4", "--n", "4", "--k", "4", "--R", "1", "1", "1", "1",
        "--alpha", "1.0", "--lambda1", "1.0", "--lambda2", "1.0",
    ]
    assert main(args + ["--seed", "9"]) == 0
    direct = capsys.readouterr().out
    monkeypatch.setenv(SEED_ENV_VAR, "9")
    assert main(args) == 0
    assert capsys.readouterr().out == direct
    monkeypatch.setenv(SEED_ENV_VAR, "not-a-number")
    assert main(args) == 4
    capsys.readouterr()


def test_bayes_command(fiber_file, capsys) -> None:
    rc = main(
        ["bayes", fiber_file, "--shift", "0.75", "--b", "4", "--n-draws", "2000", "--seed", "1"]
    )
    assert rc == 0
    out = _kv(capsys.readouterr().out)
    assert 2.4 < float(out["alpha"][0]) < 2.75
    lo, hi = (float(v) for v in out["hpd_alpha"])
    assert lo < float(out["alpha"][0]) < hi
    assert float(out["ess"][0]) > 200.0


def test_bootstrap_command(fiber_file, capsys) -> None:
    rc = main(
        ["bootstrap", fiber_file, "--shift", "0.75", "--n-boot", "60", "--seed", "52"]
    )
    assert rc == 0
    out = _kv(capsys.readouterr().out)
    lo, hi = (float(v) for v in out["ci_alpha"])
    assert 0.0 < lo < hi
    assert int(out["skipped"][0]) <= 10


def test_exit_code_no_mle(tmp_path, capsys) -> None:
    p = tmp_path / "one_group.txt"
    p.write_text(ONE_GROUP_FILE, encoding="utf-8")
    assert main(["fit", str(p)]) == 2
    assert "error:" in capsys.readouterr().err


def test_exit_code_improper_posterior(tmp_path, capsys) -> None:
    p = tmp_path / "improper.txt"
    p.write_text(IMPROPER_FILE, encoding="utf-8")
    assert main(["bayes", str(p), "--n-draws", "100"]) == 3
    assert "error:" in capsys.readouterr().err


def test_exit_code_parse_failure(tmp_path, capsys) -> None:
    p = tmp_path / "garbled.txt"
    p.write_text("2 2\nR: 1 1\n", encoding="utf-8")
    assert main(["fit", str(p)]) == 4
    assert main(["fit", str(tmp_path / "missing.txt")]) == 4
    capsys.readouterr()


def test_usage_errors_exit_one(capsys) -> None:
    with pytest.raises(SystemExit) as info:
        main(["fit"])
    assert info.value.code == 1
    with pytest.raises(SystemExit) as info:
        main(["no-such-command"])
    assert info.value.code == 1
    capsys.readouterr()


def test_analyze_command(tmp_path, capsys) -> None:
    d1 = tmp_path / "d1.txt"
    d2 = tmp_path / "d2.txt"
    d1.write_text("\n".join(str(v) for v in carbon_fiber_20mm()), encoding="utf-8")
    d2.write_text("\n".join(str(v) for v in carbon_fiber_10mm()), encoding="utf-8")
    rc = main(
        [
            "analyze", str(d1), str(d2),
            "--shift", "0.75", "--b", "4",
            "--n-draws", "500", "--n-rep", "300", "--seed", "5",
        ]
    )
    assert rc == 0
    captured = capsys.readouterr()
    out = _kv(captured.out)
    assert float(out["data1_alpha"][0]) == pytest.approx(3.843, abs=5e-3)
    assert float(out["data1_ks"][0]) == pytest.approx(0.046, abs=2e-3)
    assert float(out["data2_alpha"][0]) == pytest.approx(3.909, abs=5e-3)
    assert float(out["data2_ks"][0]) == pytest.approx(0.079, abs=2e-3)
    assert float(out["common_alpha"][0]) == pytest.approx(3.876, abs=5e-3)
    assert float(out["lr_pvalue"][0]) == pytest.approx(0.895, abs=0.05)
    assert 0.0 <= float(out["data1_bayes_predictive_p"][0]) <= 1.0
    # the shared-shape importance weights are known to collapse on these data
    assert "degenerate" in captured.err


def test_study_command_point_and_interval(tmp_path, capsys) -> None:
    cfg = {
        "m": 5, "n": 4, "k": 4, "R": [1, 1, 2, 1],
        "alpha": 1.5, "lambda1": 0.6, "lambda2": 1.1,
        "replications": 12, "methods": ["mle"], "kind": "point",
    }
    path = tmp_path / "study.json"
    path.write_text(json.dumps(cfg), encoding="utf-8")
    out_csv = tmp_path / "report.csv"
    assert main(["study", str(path), "--out", str(out_csv)]) == 0
    lines = out_csv.read_text().strip().splitlines()
    assert lines[0].startswith("scheme,parameter,method")
    assert len(lines) == 4
    # a base-seed override must change the numbers
    assert main(["study", str(path), "--base-seed", "7"]) == 0
    stdout_csv = capsys.readouterr().out
    assert stdout_csv.splitlines()[0] == lines[0]
    assert stdout_csv.strip().splitlines()[1:] != lines[1:]
    cfg["kind"] = "interval"
    cfg["replications"] = 8
    path.write_text(json.dumps(cfg), encoding="utf-8")
    assert main(["study", str(path)]) == 0
    interval_out = capsys.readouterr().out
    assert ",AL," in interval_out.splitlines()[0] or "AL" in interval_out.splitlines()[0]


def test_study_command_config_errors(tmp_path, capsys) -> None:
    bad_json = tmp_path / "bad.json"
    bad_json.write_text("{not json", encoding="utf-8")
    assert main(["study", str(bad_json)]) == 4
    missing = {"m": 2, "n": 2, "k": 2, "R": [1, 1]}
    p = tmp_path / "missing.json"
    p.write_text(json.dumps(missing), encoding="utf-8")
    assert main(["study", str(p)]) == 4
    wrong_kind = {
        "m": 2, "n": 2, "k": 2, "R": [1, 1],
        "alpha": 1.0, "lambda1": 1.0, "lambda2": 1.0,
        "replications": 2, "methods": ["mle"], "kind": "sideways",
    }
    p.write_text(json.dumps(wrong_kind), encoding="utf-8")
    assert main(["study", str(p)]) == 4
    capsys.readouterr()


def test_console_script(fiber_file) -> None:
    res = subprocess.run(
        ["jointweibull", "fit", fiber_file, "--shift", "0.75"],
        capture_output=True, text=True, timeout=120,
    )
    assert res.returncode == 0
    assert res.stdout.startswith("alpha 4.495")
    usage = subprocess.run(["jointweibull"], capture_output=True, text=True, timeout=60)
    assert usage.returncode == 1
