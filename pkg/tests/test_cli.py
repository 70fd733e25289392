import csv
import io
import json
import shutil
from pathlib import Path

import pytest

from mvsubexp.cli import main

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def _write(tmp_path, name, obj):
    p = tmp_path / name
    p.write_text(obj if isinstance(obj, str) else json.dumps(obj, indent=2))
    return p


def _ruin_config(seed=5, n=3000):
    return {
        "schema_version": 1,
        "seed": seed,
        "ruin": {
            "claims": {"type": "independent", "marginals": [{"law": "pareto", "alpha": 2.0, "scale": 1.0}]},
            "premium": [3.0],
            "ruin_set": {"type": "hyperplanes", "directions": [[1.0]]},
            "levels": [1.0, 4.0],
            "n_paths": n,
        },
    }


def test_minimal_ruin_run(tmp_path, capsys):
    cfg = _write(tmp_path, "r.json", _ruin_config())
    out = tmp_path / "out"
    assert main(["run", str(cfg), "--out", str(out)]) == 0
    rows = list(csv.DictReader(io.StringIO((out / "ruin.csv").read_bytes().decode(), newline="")))
    assert len(rows) == 2
    assert float(rows[0]["psi_hat"]) >= float(rows[1]["psi_hat"])
    assert float(rows[0]["H"]) == pytest.approx(1.0, rel=1e-6)  # 1 / (c u) with c = 1
    assert (out / "timing.log").exists() and (out / "report.json").exists()


def test_csv_uses_crlf_and_round_trips(tmp_path):
    cfg = _write(tmp_path, "r.json", _ruin_config())
    out = tmp_path / "out"
    main(["run", str(cfg), "--out", str(out)])
    raw = (out / "ruin.csv").read_bytes()
    assert raw.count(b"\r\n") == raw.count(b"\n") == 3
    rows = list(csv.reader(io.StringIO(raw.decode(), newline="")))
    assert rows[0][:3] == ["u", "psi_hat", "ci_lo"] and len({len(r) for r in rows}) == 1


def test_bad_bidask_names_constraint_and_line(capsys):
    assert main(["run", str(CONFIGS / "bad_bidask.json"), "--dry-run"]) == 2
    err = capsys.readouterr().err
    assert "bad_bidask.json:6:" in err and "constraint (i)" in err and "$.geometry.ruin_set.pi" in err


def test_triangle_violation_named(tmp_path, capsys):
    cfg = {"schema_version": 1, "seed": 1, "geometry": {"ruin_set": {
        "type": "bidask", "pi": [[1, 1.1, 5], [1.1, 1, 1.1], [5, 1.1, 1]], "b": [1, 1, 1]}}}
    assert main(["run", str(_write(tmp_path, "t.json", cfg)), "--dry-run"]) == 2
    assert "(iii)" in capsys.readouterr().err


@pytest.mark.parametrize("text, line", [
    ('{\n  "schema_version": 1,\n  "seed": 1\n  "ruin": {}\n}', 4),
    ('{\n  "schema_version": 2,\n  "seed": 1,\n  "ruin": {}\n}', 2),
])
def test_config_errors_carry_line_numbers(tmp_path, capsys, text, line):
    cfg = _write(tmp_path, "bad.json", text)
    assert main(["run", str(cfg)]) == 2
    assert f"bad.json:{line}:" in capsys.readouterr().err


def test_missing_field_and_bad_levels(tmp_path, capsys):
    cfg = _ruin_config()
    del cfg["ruin"]["premium"]
    assert main(["run", str(_write(tmp_path, "a.json", cfg)), "--dry-run"]) == 2
    assert "premium" in capsys.readouterr().err
    cfg = _ruin_config()
    cfg["ruin"]["levels"] = [4.0, 1.0]
    assert main(["run", str(_write(tmp_path, "b.json", cfg)), "--dry-run"]) == 2
    assert "$.ruin.levels" in capsys.readouterr().err


def test_dry_run_writes_nothing(tmp_path, capsys):
    cfg = _write(tmp_path, "r.json", _ruin_config())
    out = tmp_path / "never"
    assert main(["run", str(cfg), "--out", str(out), "--dry-run"]) == 0
    plan = json.loads(capsys.readouterr().out)
    assert plan["experiment"] == "ruin" and plan["c"] == [1.0]
    assert not out.exists()


def test_runtime_error_exit_3(tmp_path, capsys):
    cfg = {"schema_version": 1, "seed": 1, "hcurve": {
        "claims": {"type": "polar", "angular": {"dirichlet": [1.0, 1.0]},
                   "radial": {"law": "pareto", "alpha": 2.0, "scale": 1.0}},
        "ruin_set": {"type": "aggregate", "weights": [1.0, 1.0]},
        "c": [1.0, 1.0], "levels": [10.0], "method": "quadrature"}}
    assert main(["run", str(_write(tmp_path, "h.json", cfg)), "--out", str(tmp_path / "o")]) == 3
    assert "runtime error" in capsys.readouterr().err


def test_inspect_outputs(capsys):
    assert main(["inspect", str(CONFIGS / "bidask_pi2.json")]) == 0
    out = capsys.readouterr().out
    assert "dimension: 2" in out and "0.333333333333 0.666666666667" in out
    assert main(["inspect", str(CONFIGS / "aggregate.json")]) == 0
    assert "supporting directions (1)" in capsys.readouterr().out
    assert main(["inspect", str(CONFIGS / "bad_bidask.json")]) == 2


def test_selftest_passes(capsys):
    assert main(["selftest", "--seed", "3"]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out and "selftest passed" in out


def test_selftest_flags_corrupted_directions(tmp_path, capsys):
    bad = _write(tmp_path, "bad.json", {"type": "hyperplanes", "directions": [[1.0, -0.5], [0.2, 0.3]]})
    assert main(["selftest", "--ruin-set", str(bad)]) == 1
    out = capsys.readouterr().out
    assert "FAIL user ruin set: direction table" in out and "negative" in out


def test_byte_reproducible_and_verify(tmp_path, capsys):
    cfg = _write(tmp_path, "r.json", _ruin_config(seed=77, n=5000))
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", str(cfg), "--out", str(a)]) == 0
    assert main(["run", str(cfg), "--out", str(b), "--threads", "1"]) == 0
    for name in ("ruin.csv", "report.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    assert main(["verify", str(a)]) == 0
    shutil.copy(b / "ruin.csv", a / "ruin.csv")
    (a / "ruin.csv").write_bytes((a / "ruin.csv").read_bytes().replace(b"1.0,", b"1.5,", 1))
    assert main(["verify", str(a)]) == 3
    assert "ruin.csv" in capsys.readouterr().err


@pytest.mark.parametrize("name", ["compare_2d", "hcurve_polar", "diagnose_convolution", "geometry_bidask"])
def test_sample_configs_dry_run(name, capsys):
    assert main(["run", str(CONFIGS / f"{name}.json"), "--dry-run"]) == 0
