import json
import subprocess
import sys


from knotmono import cli


def run(tmp_path, *args):
    return cli.main(list(args) + ["--out", str(tmp_path / "out")])


def test_modes_pass_and_manifest(tmp_path):
    assert run(tmp_path, "modes", "--m-range=-2:2", "--seed", "4") == 0
    man = json.loads((tmp_path / "out" / "manifest.json").read_text())
    assert man["command"] == "modes"
    assert man["config"]["m_range"] == [-2, 2]
    assert man["seed"] == 4
    assert man["backend"] in ("numba", "numpy")
    assert (tmp_path / "out" / "modes.csv").exists()


def test_config_file_and_flag_override(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# sweep\nm-range = -1:1\ngamma = 0.05\nseed = 2\n")
    assert run(tmp_path, "modes", "--config", str(cfg), "--gamma", "0.1") == 0
    man = json.loads((tmp_path / "out" / "manifest.json").read_text())
    assert man["config"]["gamma"] == 0.1
    assert man["config"]["m_range"] == [-1, 1]


def test_runs_are_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    a.mkdir()
    b.mkdir()
    for d in (a, b):
        assert cli.main(["check-inequalities", "--ids", "ETA_PAIR,PERP_BOUND", "--seeds", "3",
                         "--out", str(d)]) == 0
    assert (a / "inequalities.csv").read_text() == (b / "inequalities.csv").read_text()


def test_unknown_config_key_is_usage_error(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("gamma = 0.1\nbogus = 3\n")
    assert run(tmp_path, "modes", "--config", str(cfg)) == 2


def test_missing_config_file(tmp_path):
    assert run(tmp_path, "modes", "--config", str(tmp_path / "nope.cfg")) == 2


def test_bad_value_and_bad_command(tmp_path):
    assert run(tmp_path, "modes", "--gamma", "abc") == 2
    assert cli.main(["no-such-command"]) == 2


def test_out_of_range_gamma_is_input_error(tmp_path):
    assert run(tmp_path, "modes", "--gamma", "0.25", "--m-range", "0:0") == 2


def test_failed_check_exits_one(tmp_path, monkeypatch):
    monkeypatch.setattr(cli, "monopole_convergence", lambda *a, **k: {"ok": False})
    assert run(tmp_path, "verify-monopole") == 1


def test_verify_monopole_subprocess(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "knotmono.cli", "verify-monopole", "--samples", "50",
                           "--out", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    rep = json.loads((tmp_path / "monopole.json").read_text())
    assert all(1.8 <= o <= 2.2 for o in rep["orders"])
