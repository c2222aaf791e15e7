import subprocess
import sys

import pytest

from gashomotopy.cli import (
    EXIT_ERROR,
    EXIT_FAIL,
    EXIT_PASS,
    EXIT_UNKNOWN,
    NEGATIVE_CONTROLS,
    RUNNERS,
    load_config,
    main,
)
from gashomotopy.integrate import DEFAULT_CONFIG

FAST = ["--s-steps", "3"]


def _exit_code(argv):
    # argparse failures leave through SystemExit, the rest return a code
    try:
        return main(argv)
    except SystemExit as exc:
        return exc.code


def test_list(capsys):
    assert main(["list"]) == EXIT_PASS
    assert capsys.readouterr().out.split() == list(RUNNERS)


@pytest.mark.parametrize("name", [n for n in RUNNERS if n not in NEGATIVE_CONTROLS])
def test_run_example_passes(name, out_dir, capsys):
    assert main(["run-example", name] + FAST) == EXIT_PASS
    report = (out_dir / name / "report.txt").read_text()
    assert report == capsys.readouterr().out
    assert report.startswith(f"example: {name}\nverdict: pass\n")
    assert (out_dir / name / "summary.txt").exists()


def test_trajectory_artifacts(out_dir):
    assert main(["run-example", "ex3_3"] + FAST) == EXIT_PASS
    csvs = sorted(p.name for p in (out_dir / "ex3_3").glob("*.csv"))
    assert len(csvs) == 3
    assert (out_dir / "ex3_3" / csvs[0]).read_text().startswith("t,x1,x2,event\n")


def test_negative_control_fails(out_dir):
    assert main(["run-example", "rotation_family"] + FAST) == EXIT_FAIL
    report = (out_dir / "rotation_family" / "report.txt").read_text()
    assert "note.s=5.000000000000e-01.winding_number: 1" in report


def test_unknown_example(out_dir, capsys):
    assert main(["run-example", "nope"]) == EXIT_UNKNOWN
    assert main(["verify", "nope"]) == EXIT_UNKNOWN
    assert main(["export-frames", "nope", "--s-steps", "2"]) == EXIT_UNKNOWN
    assert "unknown example" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [[], ["frobnicate"], ["run-example"], ["verify", "all", "--s-steps", "x"],
                                  ["verify", "canonical", "--s-steps", "1"]])
def test_bad_arguments_exit_3(argv, out_dir):
    assert _exit_code(argv) == EXIT_ERROR


def test_verify_all_is_deterministic(out_dir):
    assert main(["verify", "all"] + FAST) == EXIT_PASS
    first = (out_dir / "verify_all.txt").read_bytes()
    assert main(["verify", "all"] + FAST) == EXIT_PASS
    assert (out_dir / "verify_all.txt").read_bytes() == first
    assert b"rotation_family" not in first


def test_output_dir_flag_overrides_env(out_dir, tmp_path):
    other = tmp_path / "elsewhere"
    assert main(["verify", "canonical", "--s-steps", "2", "--output-dir", str(other)]) == EXIT_PASS
    assert (other / "verify_canonical.txt").exists()
    assert not out_dir.exists()


def test_export_frames(out_dir):
    assert main(["export-frames", "ex1_1", "--s-steps", "4"]) == EXIT_PASS
    frames = sorted((out_dir / "ex1_1").glob("frame_*.svg"))
    assert [f.name for f in frames] == [f"frame_{i:03d}.svg" for i in range(4)]
    for name in ("ex3_4_invex", "ex3_7", "ex1_3_sign"):
        assert main(["export-frames", name, "--s-steps", "2"]) == EXIT_PASS
        assert (out_dir / name / "frame_001.svg").read_text().startswith("<svg")


def test_config_file(tmp_path, out_dir):
    cfg = tmp_path / "run.ini"
    cfg.write_text("[DEFAULT]\nrel_tol = 1e-8\ns_steps = 2\n\n[ex1_1]\nsamples = 64\n")
    integ, over = load_config(cfg, "canonical")
    assert integ.rel_tol == 1e-8 and integ.abs_tol == DEFAULT_CONFIG.abs_tol and over == {"s_steps": 2}
    _, over = load_config(cfg, "ex1_1")
    assert over == {"s_steps": 2, "samples": 64}
    assert main(["verify", "ex1_1", "--config", str(cfg)]) == EXIT_PASS
    assert "patched_path.sample_count: 128" in (out_dir / "verify_ex1_1.txt").read_text()


def test_config_errors(tmp_path, out_dir):
    bad = tmp_path / "bad.ini"
    bad.write_text("[DEFAULT]\nfrobs = 3\n")
    assert main(["verify", "canonical", "--config", str(bad)]) == EXIT_ERROR
    assert main(["verify", "canonical", "--config", str(tmp_path / "missing.ini")]) == EXIT_ERROR


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "gashomotopy", "verify", "canonical", "--s-steps", "2",
                           "--output-dir", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == EXIT_PASS
    assert proc.stdout == (tmp_path / "verify_canonical.txt").read_text()
