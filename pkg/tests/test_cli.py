import subprocess
import sys

import numpy as np
import pytest
from PIL import Image

from sagtrack.cli import frame_files, main
from sagtrack.io import load_poses


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("scene")
    assert main(["synth", "--out", str(out)]) == 0
    return out


def test_synth_outputs(synth_dir):
    for name in ("model.json", "cameras.txt", "truth.csv", "scene.json"):
        assert (synth_dir / name).exists()
    assert len(frame_files(synth_dir / "frames", 5)) == 10


def test_eval_identity(synth_dir, capsys):
    truth = str(synth_dir / "truth.csv")
    assert main(["eval", "--poses", truth, "--truth", truth]) == 0
    out = capsys.readouterr().out
    assert "pct_below_15=100" in out and "pct_below_45=100" in out and "mean_error_mm=0" in out


def test_synth_track_eval(synth_dir, tmp_path, capsys):
    poses = tmp_path / "poses.csv"
    rc = main(["track", "--cameras", str(synth_dir / "cameras.txt"), "--frames", str(synth_dir / "frames"),
               "--out", str(poses)])
    assert rc == 0
    report = tmp_path / "report.txt"
    assert main(["eval", "--poses", str(poses), "--truth", str(synth_dir / "truth.csv"), "--out", str(report)]) == 0
    values = dict(line.split("=") for line in report.read_text().splitlines() if "=" in line)
    assert float(values["mean_error_mm"]) < 1.0
    assert len(load_poses(poses)) == 10


def test_synth_options(tmp_path):
    out = tmp_path / "s"
    assert main(["synth", "--out", str(out), "--cameras", "2", "--noise-dropout", "1.0", "--seed", "4"]) == 0
    files = frame_files(out / "frames", 2)
    assert len(files) == 10 and len(files[0]) == 2
    assert main(["synth", "--out", str(out), "--cameras", "9"]) == 1


def test_unknown_subcommand(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code != 0
    assert "usage" in capsys.readouterr().err


def test_project_debug(tmp_path, capsys):
    out = tmp_path / "o.png"
    assert main(["project-debug", "--mean", "0", "0", "2", "--sigma", "1", "--focal", "500",
                 "--image-size", "320", "240", "--out", str(out)]) == 0
    text = capsys.readouterr().out
    assert "mu_p = 160 120" in text
    sxx = float(text.split("Sigma_p = ")[1].split()[0])
    assert sxx == pytest.approx(500**2 / 3, rel=1e-11)
    assert Image.open(out).size == (320, 240)


def test_project_debug_degenerate(capsys):
    assert main(["project-debug", "--mean", "0", "0", "0.5", "--sigma", "1"]) == 1
    assert "error" in capsys.readouterr().err


def test_parse_error_names_file_and_line(tmp_path, capsys):
    bad = tmp_path / "cams.txt"
    bad.write_text("# cams\n1 2 3\n")
    assert main(["project-debug", "--mean", "0", "0", "5", "--sigma", "1", "--cameras", str(bad)]) == 1
    assert f"{bad}:2" in capsys.readouterr().err


def test_track_rgb_frames(synth_dir, tmp_path):
    from sagtrack.io import load_cameras
    from sagtrack.hand import default_hand_model
    from sagtrack.synth import render_rgb

    cams = load_cameras(synth_dir / "cameras.txt")[:2]
    from sagtrack.io import save_cameras

    save_cameras(cams, tmp_path / "cams.txt")
    model = default_hand_model()
    frames = tmp_path / "frames"
    frames.mkdir()
    for c, cam in enumerate(cams):
        Image.fromarray(render_rgb(model, model.rest_pose(), cam)).save(frames / f"f0000_c{c}.png")
    assert main(["track", "--cameras", str(tmp_path / "cams.txt"), "--frames", str(frames),
                 "--out", str(tmp_path / "p.csv"), "--iterations", "2"]) == 0


def test_bench_small(capsys):
    assert main(["bench", "--images", "50", "--cameras", "2", "--iterations", "2", "--repeats", "1"]) == 0
    assert "ms_per_frame=" in capsys.readouterr().out


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "sagtrack", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "synth" in res.stdout
