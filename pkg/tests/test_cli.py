import csv
import json
import shutil

import pytest

from conftest import FIXTURE_DIR, read_summary, run_cli
from ifs_lab import __version__
from ifs_lab.cli import main
from ifs_lab.render import read_ppm

CANTOR = FIXTURE_DIR / "cantor.yaml"


def _config(tmp_path, extra="", base=CANTOR):
    p = tmp_path / "cfg.yaml"
    p.write_text(base.read_text() + extra)
    return p


def test_attractor_writes_everything(tmp_path):
    out = tmp_path / "out"
    assert run_cli("attractor", CANTOR, out) == 0
    names = sorted(p.name for p in out.iterdir())
    assert names == sorted([
        "attractor.png", "attractor.ppm", "attractor_points.csv", "attractor_summary.csv", "attractor_trace.csv",
        "attractor_trace.png", "manifest_attractor.json",
    ])
    with open(out / "attractor_points.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["x0"] and len(rows) == 513
    img = read_ppm(out / "attractor.ppm")
    assert img.shape == (64, 1024, 3)


def test_manifest_contents(tmp_path):
    out = tmp_path / "out"
    assert run_cli("diagnose", CANTOR, out, "--seed", 99, "--threads", 2, "--no-figures") == 0
    man = json.loads((out / "manifest_diagnose.json").read_text())
    assert man["command"] == "diagnose" and man["status"] == "ok"
    assert man["seed"] == 99 and man["threads"] == 2
    assert man["tool_version"] == __version__
    assert len(man["config_sha256"]) == 64
    assert "diagnose_profile.csv" in man["outputs"]
    assert "diagnose.png" not in man["outputs"]
    assert set(man["outputs"]) <= {p.name for p in out.iterdir()}


def test_negative_tol_exit_1_nothing_written(tmp_path, capsys):
    cfg = _config(tmp_path, "\nrender:\n  width: 4\n").read_text().replace("tol: 1.0e-4", "tol: -1.0e-4", 1)
    (tmp_path / "bad.yaml").write_text(cfg)
    out = tmp_path / "out"
    assert run_cli("attractor", tmp_path / "bad.yaml", out) == 1
    assert not out.exists()
    assert "attractor.tol: must be positive" in capsys.readouterr().err


def test_malformed_yaml_exit_1(tmp_path):
    (tmp_path / "bad.yaml").write_text("system: [unclosed\n")
    out = tmp_path / "out"
    assert run_cli("measure", tmp_path / "bad.yaml", out) == 1
    assert not out.exists()


def test_config_error_inside_command_leaves_nothing(tmp_path):
    out = tmp_path / "out"
    assert run_cli("render", CANTOR, out) == 1
    assert not out.exists()


def test_identity_attractor_exit_2_with_trace(tmp_path, capsys):
    out = tmp_path / "out"
    assert run_cli("attractor", FIXTURE_DIR / "identity.yaml", out, "--no-figures") == 2
    assert "no global attractor" in capsys.readouterr().err
    assert (out / "attractor_trace.csv").read_text().startswith("iteration,gap,points\n")
    assert read_summary(out / "attractor_summary.csv")["converged"] == "0"
    man = json.loads((out / "manifest_attractor.json").read_text())
    assert man["status"] == "non_convergence"
    assert not (out / "attractor_points.csv").exists()


def test_nonconvergent_measure_exit_2(tmp_path):
    cfg = _config(tmp_path, "", FIXTURE_DIR / "edalat.yaml")
    text = cfg.read_text().replace("measure:\n  tol: 1.0e-3\n  n_max: 400", "measure:\n  tol: 1.0e-6\n  n_max: 3")
    assert "n_max: 3" in text
    cfg.write_text(text)
    out = tmp_path / "out"
    assert run_cli("measure", cfg, out, "--no-figures") == 2
    assert len((out / "measure_trace.csv").read_text().splitlines()) == 4


def test_budget_overrun_exit_3(tmp_path, capsys):
    out = tmp_path / "out"
    assert run_cli("attractor", _config(tmp_path, "\nbudgets:\n  points: 10\n"), out) == 3
    assert "merge radius" in capsys.readouterr().err
    assert not out.exists()


def test_output_dir_precedence(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv("IFS_LAB_OUT", raising=False)
    assert main(["diagnose", "--config", str(CANTOR), "--no-figures"]) == 0
    assert (tmp_path / "ifs-lab-out" / "diagnose_summary.csv").exists()

    monkeypatch.setenv("IFS_LAB_OUT", str(tmp_path / "env"))
    assert main(["diagnose", "--config", str(CANTOR), "--no-figures"]) == 0
    assert (tmp_path / "env" / "diagnose_summary.csv").exists()

    cfg = _config(tmp_path, f"\noutput:\n  dir: {tmp_path / 'fromcfg'}\n")
    assert main(["diagnose", "--config", str(cfg), "--no-figures"]) == 0
    assert (tmp_path / "fromcfg" / "diagnose_summary.csv").exists()

    assert main(["diagnose", "--config", str(cfg), "--out", str(tmp_path / "flag"), "--no-figures"]) == 0
    assert (tmp_path / "flag" / "diagnose_summary.csv").exists()


def test_seed_flag_changes_random_outputs(tmp_path):
    run_cli("chaos", CANTOR, tmp_path / "a", "--no-figures")
    run_cli("chaos", CANTOR, tmp_path / "b", "--no-figures", "--seed", 1)
    assert (tmp_path / "a" / "chaos_report.csv").read_bytes() != (tmp_path / "b" / "chaos_report.csv").read_bytes()


@pytest.mark.parametrize("flag", [["--seed", "-1"], ["--threads", "0"]])
def test_bad_flags_exit_1(tmp_path, flag):
    assert main(["attractor", "--config", str(CANTOR), "--out", str(tmp_path / "o"), *flag]) == 1
    assert not (tmp_path / "o").exists()


def test_version(capsys):
    with pytest.raises(SystemExit) as info:
        main(["--version"])
    assert info.value.code == 0
    assert __version__ in capsys.readouterr().out


def test_threads_do_not_change_csvs(tmp_path):
    for cmd in ("ergodic", "chaos"):
        run_cli(cmd, CANTOR, tmp_path / "one", "--threads", 1, "--no-figures")
        run_cli(cmd, CANTOR, tmp_path / "four", "--threads", 4, "--no-figures")
    for p in (tmp_path / "one").glob("*.csv"):
        assert p.read_bytes() == (tmp_path / "four" / p.name).read_bytes(), p.name


def test_render_points_and_measure(tmp_path):
    src = tmp_path / "src"
    assert run_cli("measure", FIXTURE_DIR / "sierpinski.yaml", src, "--no-figures") == 0
    shutil.copy(src / "measure.csv", tmp_path / "m.csv")
    (tmp_path / "pts.csv").write_text("x0,x1\n0.5,0.4330127018922193\n")
    for name, kind in (("m.csv", "measure"), ("pts.csv", "points")):
        cfg = _config(tmp_path, f"\nrender:\n  input: {name}\n  width: 32\n",
                      FIXTURE_DIR / "sierpinski.yaml")
        out = tmp_path / f"out-{kind}"
        assert run_cli("render", cfg, out) == 0
        assert read_summary(out / "render_summary.csv")["kind"] == kind
        img = read_ppm(out / f"{name[:-4]}.ppm")
        assert img.shape == (32, 32, 3)
    assert (read_ppm(tmp_path / "out-points" / "pts.ppm").any(axis=2)).sum() == 1


def test_render_rejects_3d(tmp_path):
    (tmp_path / "p.csv").write_text("x0,x1,x2\n0,0,0\n")
    cfg = _config(tmp_path, "\nrender:\n  input: p.csv\n")
    assert run_cli("render", cfg, tmp_path / "out") == 1
