import csv
import io
import json

import pytest

from gaussmax.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_eval_limit_dense_example(capsys):
    code, out, _ = run(capsys, "eval-limit", "--regime", "dense", "--r", "0", "--x", "0", "--y", "1")
    assert code == 0
    (row,) = rows(out)
    assert row["value"].startswith("0.367879")
    assert set(row) == {"regime", "r", "x", "y", "value", "nodes_used"}


def test_eval_limit_grid_of_points(capsys):
    code, out, _ = run(capsys, "eval-limit", "--regime", "sparse", "--x", "0,1", "--y=-1,0,1")
    assert code == 0
    assert len(rows(out)) == 6


def test_marginal_regime(capsys):
    code, out, _ = run(capsys, "eval-limit", "--regime", "marginal", "--x", "0")
    assert code == 0 and rows(out)[0]["value"].startswith("0.367879")


def test_unknown_flag_exits_1_with_usage(capsys):
    code, _, err = run(capsys, "eval-limit", "--bogus", "1")
    assert code == 1
    assert "usage" in err.lower()


def test_missing_subcommand_exits_1(capsys):
    assert run(capsys)[0] == 1


def test_invalid_value_exits_1(capsys):
    assert run(capsys, "eval-limit", "--r", "-1")[0] == 1
    assert run(capsys, "simulate-field", "--alpha1", "2.5")[0] == 1


def test_inconsistent_joint_constant_exits_1(capsys):
    code, _, err = run(capsys, "eval-limit", "--regime", "pickands", "--x", "0", "--y", "0",
                       "--r", "0.5", "--joint", "5")
    assert code == 1
    assert "joint constant" in err


def test_runtime_error_exits_2(capsys):
    code, _, err = run(capsys, "eval-limit", "--r", "25", "--x=-4", "--y=-4")
    assert code == 2
    assert "QuadratureNotConverged" in err


def test_config_file_and_flag_override(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"regime": "dense", "x": "0", "y": "1", "r": 0.0}))
    code, out, _ = run(capsys, "eval-limit", "--config", str(cfg))
    assert code == 0 and rows(out)[0]["regime"] == "dense"
    code, out, _ = run(capsys, "eval-limit", "--config", str(cfg), "--regime", "sparse")
    assert code == 0 and rows(out)[0]["regime"] == "sparse"


def test_config_rejects_unknown_keys(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"regime": "dense", "colour": "red"}))
    code, _, err = run(capsys, "eval-limit", "--config", str(cfg))
    assert code == 1 and "colour" in err


def test_out_dir_manifest(tmp_path, capsys):
    code, out, _ = run(capsys, "eval-limit", "--x", "0", "--seed", "4", "--out-dir", str(tmp_path))
    assert code == 0
    assert (tmp_path / "eval-limit.csv").read_text() == out
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert set(manifest) == {"config", "seed", "version", "elapsed_s"}
    assert manifest["seed"] == 4
    assert manifest["config"]["regime"] == "sparse"


def test_strict_escalates_too_few_hits(capsys):
    argv = ["tail-check", "--box", "1,1", "--u", "4", "--fine-dx", "0.25", "--reps", "50"]
    assert run(capsys, *argv)[0] == 0
    assert run(capsys, *argv, "--strict")[0] == 3


def test_simulate_field_dump(tmp_path, capsys):
    from gaussmax.fieldsim import FieldSample

    dump = tmp_path / "f.bin"
    code, out, _ = run(capsys, "simulate-field", "--T", "4", "--dx", "0.5", "--seed", "2",
                       "--dump", str(dump))
    assert code == 0
    sample = FieldSample.from_bytes(dump.read_bytes())
    (row,) = rows(out)
    assert int(row["nx"]) == sample.nx == 9
    assert float(row["max"]) == pytest.approx(sample.values.max(), rel=1e-8)


def test_run_experiment_from_config(tmp_path, capsys):
    cfg = tmp_path / "e.json"
    cfg.write_text(json.dumps({
        "model": {"alpha1": 2, "alpha2": 2}, "horizon": [8], "grid": {"p1": 2, "p2": 2},
        "fine_dx": 0.25, "reps": 100, "eval_points": [[0, 0]],
    }))
    code, out, _ = run(capsys, "run-experiment", "--config", str(cfg), "--threads", "1")
    assert code == 0
    (row,) = rows(out)
    assert row["label"] == "stationary field" and row["reps"] == "100"


def test_run_experiment_needs_config(capsys):
    assert run(capsys, "run-experiment")[0] == 1


def test_estimate_pickands_discrete(capsys):
    code, out, _ = run(capsys, "estimate-pickands", "--kind", "discrete", "--alpha", "1",
                       "--a", "1", "--lambda", "16", "--reps", "400", "--threads", "1")
    assert code == 0
    row = rows(out)[0]
    assert 0 < float(row["value"]) < 1.0


def test_estimate_pickands_extrapolation_column(capsys):
    code, out, _ = run(capsys, "estimate-pickands", "--alpha", "2", "--lambda", "4,8,16",
                       "--dt", "0.125", "--reps", "300", "--threads", "1")
    assert code == 0
    table = rows(out)
    assert len(table) == 3
    assert table[-1]["converged"] in ("true", "false")
    assert table[0]["converged"] == ""


def test_determinism_across_threads(capsys):
    argv = ["dense-study", "--box", "2,2", "--u", "2.5", "--a", "0.5,0.25", "--fine-dx", "0.125",
            "--reps", "300", "--seed", "9"]
    a = run(capsys, *argv, "--threads", "1")
    b = run(capsys, *argv, "--threads", "3")
    assert a[0] == b[0] == 0
    assert a[1] == b[1]


@pytest.mark.slow
def test_estimate_pickands_h2_example(capsys):
    code, out, _ = run(capsys, "estimate-pickands", "--alpha", "2", "--lambda", "64", "--dt",
                       "0.015625", "--reps", "10000", "--seed", "1")
    assert code == 0
    assert float(rows(out)[0]["value"]) == pytest.approx(0.564190, rel=0.05)
