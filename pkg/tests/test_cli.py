import csv
import json
import subprocess
import sys

import pytest

from cellhom.cli import list_fixtures, load_fixture, main, run

DW_CONFIG = {
    "command": "homogenize",
    "seed": 7,
    "structure": {"kind": "euclidean", "dim": 1},
    "integrand": {"id": "double_well_1d", "params": {"p": 4}},
    "xi": [0.0, 0.5, 1.5],
    "k_list": [1, 2],
    "resolutions": [32, 64],
    "solver": {"multistart": 4},
}


def test_harmonic_fixture_with_check(tmp_path):
    assert main(["--fixture", "harmonic_1d", "--out", str(tmp_path), "--tasks", "1", "--check"]) == 0
    with open(tmp_path / "lhom.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert rows and all(float(r["deviation"]) <= 0.01 for r in rows)
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["check_passed"] is True
    for name in ("results.csv", "manifest.txt"):
        assert (tmp_path / name).exists()


def test_missing_xi_names_the_field(tmp_path, caplog):
    cfg = load_fixture("harmonic_1d")
    del cfg["xi"]
    res = run(cfg, tmp_path)
    assert res.exit_code == 1
    assert "xi" in res.message
    assert "xi" in caplog.text


def test_missing_xi_on_stderr(tmp_path):
    cfg = load_fixture("harmonic_1d")
    del cfg["xi"]
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    proc = subprocess.run(
        [sys.executable, "-m", "cellhom", "--config", str(path), "--out", str(tmp_path / "o")],
        capture_output=True, text=True,
    )
    assert proc.returncode == 1
    assert "xi" in proc.stderr


def test_seed_is_mandatory(tmp_path):
    cfg = dict(DW_CONFIG)
    del cfg["seed"]
    res = run(cfg, tmp_path)
    assert res.exit_code == 1
    assert "seed" in res.message


@pytest.mark.parametrize(
    "patch",
    [{"command": "nonsense"}, {"seed": -1}, {"xi": 1.0}, {"integrand": {"id": "no_such_id"}}],
)
def test_config_errors_exit_1(tmp_path, patch):
    assert run({**DW_CONFIG, **patch}, tmp_path).exit_code == 1


def test_unreadable_config_exit_1(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["--config", str(bad), "--out", str(tmp_path)]) == 1
    assert main(["--config", str(tmp_path / "missing.json"), "--out", str(tmp_path)]) == 1


def test_solver_failure_exit_2(tmp_path):
    cfg = {**DW_CONFIG, "solver": {"max_dofs": 10}}
    assert run(cfg, tmp_path, tasks=1).exit_code == 2


def test_check_failure_exit_3(tmp_path):
    cfg = load_fixture("harmonic_1d")
    # midpoint quadrature of a trigonometric coefficient is exact from a few
    # elements on, so only a very coarse mesh misses a 1e-9 tolerance
    cfg["resolutions"] = [4, 8]
    cfg["check"] = {"rtol": 1e-9}
    assert run(cfg, tmp_path, tasks=1, check=True).exit_code == 3
    assert run(cfg, tmp_path, tasks=1, check=False).exit_code == 0


def test_determinism_across_reruns_and_pools(tmp_path):
    bodies = []
    for j, tasks in enumerate((1, 1, 2, 3)):
        out = tmp_path / f"r{j}"
        assert run(DW_CONFIG, out, tasks=tasks).exit_code == 0
        bodies.append((out / "results.csv").read_bytes())
    assert all(b == bodies[0] for b in bodies)


def test_seed_flag_overrides_config(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps(DW_CONFIG))
    assert main(["--config", str(cfg), "--seed", "11", "--out", str(tmp_path / "o"), "--tasks", "1"]) == 0
    summary = json.loads((tmp_path / "o" / "summary.json").read_text())
    assert summary["seed"] == 11


def test_manifest_reproduces_run(tmp_path):
    assert run(DW_CONFIG, tmp_path / "a", tasks=1).exit_code == 0
    text = (tmp_path / "a" / "manifest.txt").read_text()
    cfg = json.loads(text.split("config:\n", 1)[1])
    assert cfg == DW_CONFIG
    assert "seed 7" in text and "numpy" in text and "wall_time_s" in text
    assert run(cfg, tmp_path / "b", tasks=1).exit_code == 0
    assert (tmp_path / "a" / "results.csv").read_bytes() == (tmp_path / "b" / "results.csv").read_bytes()


def test_csv_is_rfc4180(tmp_path):
    assert run(DW_CONFIG, tmp_path, tasks=1).exit_code == 0
    raw = (tmp_path / "results.csv").read_bytes()
    assert raw.endswith(b"\r\n") and b"\n" not in raw.replace(b"\r\n", b"")


def test_list_fixtures(capsys):
    assert main(["--list-fixtures"]) == 0
    names = capsys.readouterr().out.split()
    assert names == list_fixtures()
    assert "harmonic_1d" in names and len(names) >= 10


@pytest.mark.parametrize(
    "name",
    ["validate_square_lattice", "cover_disk", "cell_harmonic", "piecewise_mixed", "gamma_harmonic"],
)
def test_fast_fixtures_pass_check(tmp_path, name):
    assert main(["--fixture", name, "--out", str(tmp_path), "--tasks", "1", "--check"]) == 0
