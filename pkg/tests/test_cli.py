import json

import numpy as np
import pytest

from mcnls.cli import main, read_config_file, ConfigError
from mcnls.grid import make_grid, read_field, write_field
from mcnls.groundstate import petviashvili_solve


def _run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_run_soliton_artifacts(tmp_path, capsys):
    code, out, _ = _run(["run", "soliton", "--output-dir", str(tmp_path), "--t-end", "0.2"], capsys)
    assert code == 0 and "[PASS] mass_drift" in out
    d = tmp_path / "soliton"
    man = json.loads((d / "manifest.json").read_text())
    assert man["status"] == "pass" and man["seed"] == 0
    assert man["metrics"]["mass_drift"] < 1e-8
    assert {"numpy", "scipy", "mcnls"} <= set(man["versions"])
    for a in man["artifacts"]:
        assert (d / a).exists(), a
    assert {"heatmap.png", "monitor.png", "timeseries.csv", "trajectory.npz", "u_end.mcnl"} <= set(man["artifacts"])


def test_unknown_scenario_exit_2(tmp_path, capsys):
    code, _, err = _run(["run", "warp-drive", "--output-dir", str(tmp_path)], capsys)
    assert code == 2 and "unknown scenario" in err


def test_bad_flag_exit_2(capsys):
    with pytest.raises(SystemExit) as e:
        main(["run", "soliton", "--mu", "3"])
    assert e.value.code == 2


def test_failing_assertions_exit_1_with_json(tmp_path, capsys):
    code, _, err = _run(["run", "soliton", "--mu", "1", "--t-end", "0.2", "--no-plots", "--output-dir", str(tmp_path)], capsys)
    assert code == 1
    failures = json.loads(err.strip().splitlines()[-1])["failures"]
    assert failures and all(not f["passed"] for f in failures)
    assert json.loads((tmp_path / "soliton" / "manifest.json").read_text())["status"] == "fail"


def _tree_bytes(d):
    return {p.name: p.read_bytes() for p in sorted(d.iterdir()) if p.suffix in (".csv", ".json", ".mcnl")}


def test_runs_are_bit_identical(tmp_path, capsys):
    for sub in ("a", "b"):
        assert main(["run", "profile-demo", "--no-plots", "--output-dir", str(tmp_path / sub)]) == 0
    a, b = _tree_bytes(tmp_path / "a" / "profile-demo"), _tree_bytes(tmp_path / "b" / "profile-demo")
    a.pop("manifest.json"), b.pop("manifest.json")  # echoes its own output_dir
    assert a == b and "decomposition.json" in a


def test_rerun_from_manifest(tmp_path, capsys):
    main(["run", "soliton", "--n", "256", "--t-end", "0.1", "--no-plots", "--output-dir", str(tmp_path / "a")])
    man = tmp_path / "a" / "soliton" / "manifest.json"
    assert main(["run", "--from-manifest", str(man), "--no-plots", "--output-dir", str(tmp_path / "b")]) == 0
    assert (tmp_path / "a/soliton/u_end.mcnl").read_bytes() == (tmp_path / "b/soliton/u_end.mcnl").read_bytes()
    assert json.loads((tmp_path / "b/soliton/manifest.json").read_text())["config"]["n"] == 256


def test_config_file_precedence(tmp_path, capsys):
    ini = tmp_path / "c.ini"
    ini.write_text("[scenario]\nname = soliton\n[grid]\nn = 256\nL = 12\n[solver]\nt_end = 0.3\n")
    assert read_config_file(ini) == {"scenario": "soliton", "n": 256, "L": 12.0, "t_end": 0.3}
    assert main(["run", "--config", str(ini), "--t-end", "0.1", "--no-plots", "--output-dir", str(tmp_path)]) == 0
    cfg = json.loads((tmp_path / "soliton" / "manifest.json").read_text())["config"]
    assert (cfg["n"], cfg["L"], cfg["t_end"]) == (256, 12.0, 0.1)


def test_config_file_errors(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("[grid]\nbogus = 1\n")
    with pytest.raises(ConfigError):
        read_config_file(bad)
    assert main(["run", "soliton", "--config", str(bad)]) == 2
    assert main(["run", "soliton", "--config", str(tmp_path / "missing.ini")]) == 2


def test_env_output_root(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("MCNLS_OUTPUT_DIR", str(tmp_path / "env"))
    assert main(["run", "galilean-check", "--no-plots"]) == 0
    assert (tmp_path / "env" / "galilean-check" / "manifest.json").exists()


def test_verify_rejects_low_resolution(capsys):
    code, _, err = _run(["verify", "--n", "256"], capsys)
    assert code == 2 and "512" in err


def test_groundstate_transform_norms_decompose(tmp_path, capsys):
    q = tmp_path / "Q.mcnl"
    code, out, _ = _run(["groundstate", "--n", "1024", "--L", "32", "--out", str(q)], capsys)
    assert code == 0 and json.loads(out)["mass"] == pytest.approx(np.sqrt(3) * np.pi / 2, rel=1e-8)
    moved = tmp_path / "Qg.mcnl"
    assert main(["transform", str(q), "--x0", "2", "--xi0", "1", "--lam", "0.8", "--t0", "0.2", "--out", str(moved)]) == 0
    capsys.readouterr()
    code, out, _ = _run(["norms", str(q), str(moved), "--p", "2"], capsys)
    rows = json.loads(out)
    assert rows[0]["mass"] == pytest.approx(rows[1]["mass"], rel=1e-9)
    assert rows[0]["L2"] ** 2 == pytest.approx(rows[0]["mass"])
    assert main(["decompose", str(moved), "--max-profiles", "3", "--out", str(tmp_path / "dec")]) == 0
    rep = json.loads((tmp_path / "dec" / "decomposition.json").read_text())
    assert len(rep["profiles"]) == 1
    p = rep["profiles"][0]
    assert p["fit"]["lambda"] == pytest.approx(0.8, rel=1e-4)
    assert p["orbit_distance_to_template"] < 0.05
    assert read_field(tmp_path / "dec" / "profile_0.mcnl").grid == make_grid(1, 1024, 32)


def test_norms_on_trajectory(tmp_path, capsys):
    main(["run", "soliton", "--t-end", "0.1", "--no-plots", "--output-dir", str(tmp_path)])
    capsys.readouterr()
    code, out, _ = _run(["norms", str(tmp_path / "soliton" / "trajectory.npz")], capsys)
    row = json.loads(out)[0]
    assert code == 0 and row["kind"] == "trajectory" and row["S"] > 0
    assert row["mass_first"] == pytest.approx(row["mass_last"], rel=1e-10)


def test_missing_snapshot_exit_2(tmp_path, capsys):
    assert main(["norms", str(tmp_path / "nope.mcnl")]) == 2


def test_transform_2d(tmp_path, capsys):
    g = make_grid(2, 64, 12)
    write_field(tmp_path / "q2.mcnl", petviashvili_solve(g).field)
    assert main(["transform", str(tmp_path / "q2.mcnl"), "--x0", "1", "-1", "--out", str(tmp_path / "o.mcnl")]) == 0
    assert read_field(tmp_path / "o.mcnl").grid.dim == 2
