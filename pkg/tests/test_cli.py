import csv
import hashlib
import json
import math
import pathlib
import subprocess
import sys

import pytest

from gibbsgeo.cli import config_hash, main, resolve_config


def run(tmp_path, *args):
    code = main([*args, "--out", str(tmp_path)])
    dirs = sorted(p for p in tmp_path.iterdir() if p.is_dir())
    return code, dirs


def load(outdir):
    return (
        json.loads((outdir / "manifest.json").read_text()),
        json.loads((outdir / "result.json").read_text()) if (outdir / "result.json").exists() else None,
    )


def test_normalize_constant_example(tmp_path):
    code, [out] = run(tmp_path, "run", "--experiment", "normalize", "--potential", "const:1.0", "--d", "2", "--k", "1")
    assert code == 0
    manifest, result = load(out)
    assert manifest["exit_status"] == 0
    assert manifest["kernel_backend"] in ("compiled", "python")
    for c in result["normalized"]["coeffs"]:
        assert c == pytest.approx(-math.log(2), abs=1e-12)
    rows = list(csv.reader((out / "table.csv").open()))
    assert rows[0] == ["word", "B", "Pi_B"]
    assert len(rows) == 3


def test_curvature_example_formula_route_nonnegative(tmp_path):
    code, [out] = run(tmp_path, "run", "--experiment", "curvature", "--d", "2", "--k", "2", "--seed", "7")
    assert code == 0
    _, result = load(out)
    assert result["K_formula"] >= 0
    assert "int_Q" in result["residuals"]


def test_same_config_same_bytes(tmp_path):
    args = ("run", "--experiment", "gibbs", "--d", "3", "--k", "2", "--seed", "4")
    digests = []
    for sub in ("a", "b"):
        code, [out] = run(tmp_path / sub, *args)
        assert code == 0
        digests.append([hashlib.sha256((out / n).read_bytes()).hexdigest() for n in ("result.json", "table.csv")])
        assert out.name == config_hash(json.loads((out / "manifest.json").read_text())["config"])
    assert digests[0] == digests[1]


def test_config_file_with_flag_override(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"experiment": "gibbs", "d": 2, "k": 3, "seed": 1}))
    code, [out] = run(tmp_path / "o", "run", "--config", str(cfg), "--k", "2")
    assert code == 0
    manifest, result = load(out)
    assert manifest["config"]["k"] == 2 and manifest["config"]["seed"] == 1
    assert len(result["mu"]) == 4


def test_resolve_config_rejects_unknown_keys():
    from gibbsgeo.errors import ValidationError

    with pytest.raises(ValidationError):
        resolve_config({"colour": "red"}, {})


@pytest.mark.parametrize(
    "args",
    [
        ("run", "--d", "1"),
        ("run", "--experiment", "normalize", "--potential", "coeffs:1,2,3"),
        ("run", "--experiment", "nonsense"),
        ("run", "--potential", "const:abc"),
    ],
)
def test_invalid_input_exits_2(tmp_path, args):
    assert main([*args, "--out", str(tmp_path)]) == 2


def test_bad_config_file_exits_2(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("[1, 2")
    assert main(["run", "--config", str(bad), "--out", str(tmp_path)]) == 2


def test_numerical_failure_exits_3_and_records_residual(tmp_path):
    code, [out] = run(tmp_path, "run", "--experiment", "geodesic", "--rho", "0.2", "--step", "0.2")
    assert code == 3
    manifest, result = load(out)
    assert manifest["error"]["type"] == "AccuracyError"
    assert manifest["error"]["residual"] is not None
    assert result is None


def test_circle_backend_gibbs(tmp_path):
    code, [out] = run(tmp_path, "run", "--backend", "circle", "--potential", "cos:0.3", "--N", "128")
    assert code == 0
    _, result = load(out)
    assert result["backend"] == "circle"
    assert len(result["mu"]) == 128


def test_scan_writes_schema_csv(tmp_path):
    from gibbsgeo.curvature import CSV_COLUMNS

    code, [out] = run(tmp_path, "run", "--experiment", "scan", "--samples", "2", "--seed", "1")
    assert code == 0
    rows = list(csv.reader((out / "table.csv").open()))
    assert tuple(rows[0]) == CSV_COLUMNS
    assert rows[-1][1] == "summary"


@pytest.mark.parametrize(
    "axis,extra,lo",
    [
        ("k", ("--levels", "3"), None),
        ("N", ("--backend", "circle", "--potential", "cos:0.3", "--N", "512"), 3.0),
        ("ode_step", ("--rho", "0.2"), 12.0),
        ("fd_step", (), 3.0),
    ],
)
def test_converge_axes(tmp_path, axis, extra, lo):
    code, [out] = run(tmp_path, "converge", "--axis", axis, *extra)
    assert code == 0
    _, result = load(out)
    assert result["axis"] == axis
    if lo is None:
        # deeper marginals are exact, differences are roundoff
        assert max(result["differences"]) <= 1e-12
    else:
        assert min(result["ratios"]) >= lo


def test_acceptance_subcommand_reports_lines(capsys):
    assert main(["acceptance", "--criterion", "1"]) == 0
    line = capsys.readouterr().out.strip()
    assert line.startswith("[PASS] criterion  1")


def test_module_entry_point_version():
    out = subprocess.run([sys.executable, "-m", "gibbsgeo.cli", "--version"], capture_output=True, text=True,
                         cwd=pathlib.Path(__file__).parent)
    assert out.returncode == 0
    assert out.stdout.startswith("gibbsgeo ")


@pytest.mark.parametrize("cfg", [{"rho": "wide"}, {"spacing": -0.1}, {"step": 0}, {"d": 2.5}, {"seed": -1}])
def test_bad_config_values_exit_2(tmp_path, cfg):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    assert main(["run", "--config", str(path), "--out", str(tmp_path)]) == 2
