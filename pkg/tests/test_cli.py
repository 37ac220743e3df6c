"""Integration tests for the analyze / convergence / exact subcommands."""

import json
import math
import sys

import jsonschema
import pytest

from shapeff.cli import (CONVERGENCE_SCHEMA, EXACT_SCHEMA, REPORT_SCHEMA, main)

ECHO_FIRST = ("import sys\n"
              "for line in sys.stdin:\n"
              "    print(line.split()[0], flush=True)\n")


def run(args):
    return main(args)


def read_json(path):
    with open(path, "r", encoding="utf-8") as handle:
        return json.load(handle)


def write_json(path, payload):
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle)


def test_analyze_ishigami_report_schema_and_cost(tmp_path):
    out = tmp_path / "report.json"
    code = run(["analyze", "--model", "ishigami", "--n", str(2 ** 14),
                "--seed", "1", "--output", str(out)])
    assert code == 0
    report = read_json(out)
    jsonschema.validate(report, REPORT_SCHEMA)
    assert report["eval_count"] == 4 * 2 ** 14
    assert len(report["results"]) == 3
    assert report["results"][0]["variable"] == 1
    assert report["config"]["model"] == {"name": "ishigami", "a": 7.0, "b": 0.1}


def test_analyze_sobol_g_default_dimension(tmp_path):
    out = tmp_path / "report.json"
    assert run(["analyze", "--model", "sobol-g", "--n", "16384",
                "--seed", "0", "--output", str(out)]) == 0
    report = read_json(out)
    jsonschema.validate(report, REPORT_SCHEMA)
    assert report["eval_count"] == 11 * 16384
    assert len(report["results"]) == 10


def test_analyze_all_estimators_validate_schema(tmp_path):
    for estimator in ("shapley", "shapley-winding", "main", "total"):
        out = tmp_path / f"{estimator}.json"
        cfg = {"model": {"name": "ishigami"}, "estimator": estimator,
               "n": 64, "seed": 3, "output": str(out)}
        path = tmp_path / f"{estimator}-cfg.json"
        write_json(path, cfg)
        assert run(["analyze", "--config", str(path)]) == 0
        report = read_json(out)
        jsonschema.validate(report, REPORT_SCHEMA)
        if estimator == "shapley-winding":
            assert all(r["variance"] is None for r in report["results"])
        if estimator in ("main", "total"):
            assert report["sigma2_estimate"] is None
            assert all(r["ci_low"] is None for r in report["results"])


def test_analyze_csv_format(tmp_path):
    out = tmp_path / "report.csv"
    assert run(["analyze", "--model", "ishigami", "--n", "64", "--seed", "2",
                "--format", "csv", "--output", str(out)]) == 0
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "variable,estimate,variance,ci_low,ci_high"
    assert len([l for l in lines if not l.startswith("#")]) == 4
    assert any(l.startswith("#eval_count,") for l in lines)


def test_analyze_round_trip_is_bitwise(tmp_path):
    first = tmp_path / "first.json"
    assert run(["analyze", "--model", "plate-buckling", "--n", "2048",
                "--seed", "7", "--output", str(first)]) == 0
    report = read_json(first)
    rerun_cfg = tmp_path / "rerun.json"
    write_json(rerun_cfg, report["config"])
    second = tmp_path / "second.json"
    assert run(["analyze", "--config", str(rerun_cfg), "--output", str(second)]) == 0
    report2 = read_json(second)
    assert [r["estimate"] for r in report["results"]] == \
        [r["estimate"] for r in report2["results"]]
    assert [r["variance"] for r in report["results"]] == \
        [r["variance"] for r in report2["results"]]


def test_analyze_flag_overrides_config(tmp_path):
    cfg = tmp_path / "cfg.json"
    write_json(cfg, {"model": {"name": "ishigami"}, "n": 32, "seed": 5})
    out = tmp_path / "out.json"
    assert run(["analyze", "--config", str(cfg), "--n", "64",
                "--output", str(out)]) == 0
    assert read_json(out)["config"]["n"] == 64


def test_analyze_external_model(tmp_path):
    cfg = tmp_path / "cfg.json"
    write_json(cfg, {
        "model": {"command": [sys.executable, "-c", ECHO_FIRST], "dim": 2},
        "distributions": [{"kind": "uniform", "lo": 0.0, "hi": 1.0},
                          {"kind": "uniform", "lo": 0.0, "hi": 1.0}],
        "n": 16, "seed": 4,
    })
    out = tmp_path / "out.json"
    assert run(["analyze", "--config", str(cfg), "--output", str(out)]) == 0
    report = read_json(out)
    jsonschema.validate(report, REPORT_SCHEMA)
    # The second coordinate never enters the output: exactly zero, per sample.
    assert report["results"][1]["estimate"] == 0.0
    assert report["results"][1]["variance"] == 0.0
    assert report["results"][0]["estimate"] == pytest.approx(1 / 12, rel=0.5)


def test_external_model_protocol_violation_exits_3(tmp_path, capsys):
    bad = ("import sys\n"
           "n = 0\n"
           "for line in sys.stdin:\n"
           "    n += 1\n"
           "    print('junk' if n >= 3 else '1.0', flush=True)\n")
    cfg = tmp_path / "cfg.json"
    write_json(cfg, {
        "model": {"command": [sys.executable, "-c", bad], "dim": 1},
        "distributions": [{"kind": "uniform", "lo": 0.0, "hi": 1.0}],
        "n": 8, "seed": 0,
    })
    assert run(["analyze", "--config", str(cfg)]) == 3
    assert "line 3" in capsys.readouterr().err


def test_unknown_config_key_exits_2(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    write_json(cfg, {"model": {"name": "ishigami"}, "n": 16, "sedd": 1})
    assert run(["analyze", "--config", str(cfg)]) == 2
    assert "sedd" in capsys.readouterr().err


def test_unknown_distribution_key_exits_2(tmp_path):
    cfg = tmp_path / "cfg.json"
    write_json(cfg, {
        "model": {"name": "constant", "dim": 1},
        "distributions": [{"kind": "uniform", "lo": 0.0, "hi": 1.0, "high": 2.0}],
        "n": 16,
    })
    assert run(["analyze", "--config", str(cfg)]) == 2


def test_config_validation_errors_exit_2(tmp_path):
    bad_configs = [
        {"model": {"name": "nope"}, "n": 16},
        {"model": {"name": "ishigami"}},
        {"model": {"name": "ishigami"}, "n": 1},
        {"model": {"name": "ishigami"}, "n": 16, "estimator": "magic"},
        {"model": {"name": "sobol-g", "a": [1.0], "d": 3}, "n": 16},
        {"model": {"name": "ishigami"}, "n": 16,
         "distributions": [{"kind": "uniform", "lo": 0.0, "hi": 1.0}]},
        {"model": {"command": ["true"], "dim": 2}, "n": 16},
    ]
    for i, payload in enumerate(bad_configs):
        cfg = tmp_path / f"bad{i}.json"
        write_json(cfg, payload)
        assert run(["analyze", "--config", str(cfg)]) == 2, payload


def test_malformed_json_exits_2(tmp_path):
    cfg = tmp_path / "broken.json"
    cfg.write_text("{not json")
    assert run(["analyze", "--config", str(cfg)]) == 2
    assert run(["analyze", "--config", str(tmp_path / "missing.json")]) == 2


def test_exact_ishigami(tmp_path):
    out = tmp_path / "exact.json"
    assert run(["exact", "--model", "ishigami", "--output", str(out)]) == 0
    report = read_json(out)
    jsonschema.validate(report, EXACT_SCHEMA)
    assert report["sigma2"] == pytest.approx(13.844587940719254, rel=1e-12)
    assert report["results"][1]["shapley"] == pytest.approx(6.125, rel=1e-12)


def test_exact_sobol_g_cases(tmp_path):
    out = tmp_path / "exact.json"
    cfg = tmp_path / "cfg.json"
    write_json(cfg, {"model": {"name": "sobol-g", "a": [0.0]}, "output": str(out)})
    assert run(["exact", "--config", str(cfg)]) == 0
    report = read_json(out)
    assert report["results"][0]["main"] == pytest.approx(1 / 3, rel=1e-12)
    assert report["results"][0]["shapley"] == pytest.approx(1 / 3, rel=1e-12)

    assert run(["exact", "--model", "sobol-g", "--output", str(out)]) == 0
    report = read_json(out)
    jsonschema.validate(report, EXACT_SCHEMA)
    assert report["sigma2"] == pytest.approx(0.5945358157323086, rel=1e-12)


def test_exact_rejects_non_analytic_models(tmp_path):
    assert run(["exact", "--model", "plate-buckling"]) == 2
    cfg = tmp_path / "cfg.json"
    write_json(cfg, {"model": {"command": ["true"], "dim": 2}})
    assert run(["exact", "--config", str(cfg)]) == 2
    assert run(["exact", "--model", "constant"]) == 2


def test_exact_csv_format(tmp_path):
    out = tmp_path / "exact.csv"
    assert run(["exact", "--model", "ishigami", "--format", "csv",
                "--output", str(out)]) == 0
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "variable,main,total,shapley"
    assert lines[-2].startswith("#sigma2,")
    assert lines[-1].startswith("#mu,")


def test_convergence_csv_output(tmp_path):
    out = tmp_path / "study.csv"
    cfg = tmp_path / "cfg.json"
    write_json(cfg, {"model": {"name": "ishigami"}, "ns": [64, 128],
                     "trials": 3, "seed": 1, "output": str(out)})
    assert run(["convergence", "--config", str(cfg)]) == 0
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "model,estimator,N,trial,sse"
    assert len([l for l in lines if l.startswith("ishigami,shapley,")]) == 6
    assert lines[-1].startswith("#slope,")


def test_convergence_constant_model_na_slope(tmp_path):
    out = tmp_path / "study.csv"
    cfg = tmp_path / "cfg.json"
    write_json(cfg, {"model": {"name": "constant", "value": 3.0, "dim": 2},
                     "ns": [16, 32], "trials": 3, "seed": 0, "output": str(out)})
    assert run(["convergence", "--config", str(cfg)]) == 0
    lines = out.read_text().strip().splitlines()
    body = [l for l in lines if l.startswith("constant,")]
    assert len(body) == 6
    assert all(l.endswith(",0") for l in body)
    assert lines[-1] == "#slope,na"


def test_convergence_json_format_validates_schema(tmp_path):
    out = tmp_path / "study.json"
    assert run(["convergence", "--model", "ishigami", "--ns", "64,128",
                "--trials", "2", "--seed", "3", "--format", "json",
                "--output", str(out)]) == 0
    report = read_json(out)
    jsonschema.validate(report, CONVERGENCE_SCHEMA)
    assert len(report["rows"]) == 4
    assert len(report["summary"]) == 2


def test_convergence_requires_ns(tmp_path, capsys):
    assert run(["convergence", "--model", "ishigami"]) == 2
    capsys.readouterr()


def test_stdout_when_no_output_path(capsys):
    assert run(["exact", "--model", "ishigami"]) == 0
    report = json.loads(capsys.readouterr().out)
    jsonschema.validate(report, EXACT_SCHEMA)


def test_console_entry_point_installed():
    import shutil
    assert shutil.which("shapeff") is not None
