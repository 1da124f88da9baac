import csv
import json

import pytest

from distributed_rd.cli import main, parse_lambda_grid, UsageError


def run(tmp_path, *args):
    return main([*args, "--output", str(tmp_path)])


def rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_lambda_grid_forms():
    assert parse_lambda_grid("1,2.5") == [1.0, 2.5]
    g = parse_lambda_grid("0:10:5")
    assert g[0] == 0.0 and len(g) == 5 and g[-1] == pytest.approx(10)
    assert parse_lambda_grid("1:100:3") == pytest.approx([1, 10, 100])
    assert len(parse_lambda_grid(None)) == 25
    for bad in ("1:2", "5:1:3", "a,b", "-1,2"):
        with pytest.raises(UsageError):
            parse_lambda_grid(bad)


def test_sweep_writes_outputs(tmp_path):
    code = run(tmp_path, "sweep", "--problem", "two_bsc_p30", "--lambda-grid", "0,3,1000",
               "--restarts", "2")
    assert code == 0
    r = rows(tmp_path / "sweep.csv")
    assert len(r) == 3 and float(r[0]["D"]) == pytest.approx(0.6, abs=1e-3)
    bundle = json.loads((tmp_path / "bundle.json").read_text())
    assert bundle["metadata"]["seed"] == 0 and len(bundle["points"]) == 3


def test_emit_csv_only(tmp_path):
    assert run(tmp_path, "sweep", "--problem", "wz_binary_p30", "--lambda-grid", "2",
               "--emit", "csv", "--restarts", "1") == 0
    assert (tmp_path / "sweep.csv").exists() and not (tmp_path / "bundle.json").exists()


def test_target_d(tmp_path, capsys):
    assert run(tmp_path, "target-d", "--problem", "wz_binary_p30", "--target-d", "0.3",
               "--restarts", "2") == 0
    assert "lambda=0" in capsys.readouterr().out
    assert float(rows(tmp_path / "sweep.csv")[0]["R_1"]) <= 1e-6


def test_target_out_of_range_exit_2(tmp_path, capsys):
    assert run(tmp_path, "target-d", "--problem", "wz_binary_p30", "--target-d", "0.9") == 2
    assert "outside" in capsys.readouterr().err


def test_missing_problem_file_exit_2(tmp_path, capsys):
    assert run(tmp_path, "sweep", "--problem", "/no/such/file.json") == 2
    assert "/no/such/file.json" in capsys.readouterr().err


def test_invalid_problem_exit_2(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"alphabets": {"t": 2, "x": [2], "y": 2},
                               "joint": {"form": "dense", "probs": [0.3] * 8},
                               "distortion": "hamming"}))
    assert run(tmp_path, "sweep", "--problem", str(bad)) == 2


def test_usage_errors_exit_1(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["sweep"])
    assert exc.value.code == 1
    assert run(tmp_path, "sweep", "--problem", "wz_binary_p30", "--lambda-grid", "x") == 1
    assert run(tmp_path, "sweep", "--problem", "two_bsc_p30", "--per-source-lambda", "1") == 1
    assert run(tmp_path, "target-d", "--problem", "wz_binary_p30") == 1


def test_nonconvergence_exit_3(tmp_path):
    from distributed_rd.io import bundled_problem_path

    doc = json.loads(bundled_problem_path("two_bsc_p30").read_text())
    doc["solver"] = {"max_outer_cycles": 1}
    path = tmp_path / "capped.json"
    path.write_text(json.dumps(doc))
    assert run(tmp_path, "sweep", "--problem", str(path), "--lambda-grid", "3",
               "--max-iters", "1", "--restarts", "1", "--warm-start", "off") == 3


def test_bounds(tmp_path, capsys):
    assert run(tmp_path, "bounds", "--problem", "dependent_pair", "--lambda-grid", "5",
               "--restarts", "2") == 0
    r = rows(tmp_path / "bounds.csv")
    assert [x["subset"] for x in r] == ["1", "2", "1+2"]
    assert "not conditionally independent" in capsys.readouterr().err


def test_contour_requires_two_sources(tmp_path):
    assert run(tmp_path, "contour", "--problem", "wz_binary_p30") == 2


def test_contour(tmp_path):
    assert run(tmp_path, "contour", "--problem", "two_bsc_p30", "--lambda-grid", "0:100:8",
               "--restarts", "2", "--bins", "5") == 0
    lines = (tmp_path / "contour.csv").read_text().splitlines()
    assert len(lines) == 6


def test_aux_sizes_flag(tmp_path):
    assert run(tmp_path, "sweep", "--problem", "wz_binary_p30", "--lambda-grid", "2",
               "--aux-sizes", "2", "--restarts", "1", "--states") == 0
    st = json.loads((tmp_path / "bundle.json").read_text())["points"][0]["state"]
    assert len(st["q"][0][0]) == 2


def test_verify(capsys):
    assert main(["verify"]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out and out.count("PASS") == 7
