import json
import os

import numpy as np
import pytest

from superframe.cli import main
from superframe.data import translating_clip, write_clip, write_frame
from superframe.evaluation import MetricReport


def write_scenes(root, num_frames=6, shape=(64, 64)):
    for i, name in enumerate(["calendar", "walk"]):
        clip = translating_clip(num_frames, shape, velocity=(1.0, 0.0), seed=i)
        write_clip(root / name, clip)
    return root


def error_line(capsys):
    lines = [
        line for line in capsys.readouterr().err.splitlines() if line.startswith("superframe:")
    ]
    assert len(lines) == 1
    return lines[0]


def test_requires_subcommand(capsys):
    with pytest.raises(SystemExit) as e:
        main([])
    assert e.value.code == 2
    assert error_line(capsys).startswith("superframe: error[args]:")


def test_unknown_preset(capsys):
    with pytest.raises(SystemExit) as e:
        main(["describe", "--preset", "exp9"])
    assert e.value.code == 2


def test_prepare_data(tmp_path):
    raw = write_scenes(tmp_path / "raw")
    out = tmp_path / "prepared"
    assert main(["prepare-data", "--input", str(raw), "--output", str(out)]) == 0
    assert (out / "manifest.jsonl").is_file()
    assert len(list((out / "LR" / "walk").glob("*.png"))) == 6
    manifest = json.loads((out / "run_manifest.json").read_text())
    assert manifest["subcommand"] == "prepare-data"
    assert manifest["config"]["sigma"] == 1.5
    assert manifest["arguments"]["input"] == str(raw)


def test_missing_input(tmp_path, capsys):
    code = main(["prepare-data", "--input", str(tmp_path / "absent"), "--output", str(tmp_path)])
    assert code == 3
    line = error_line(capsys)
    assert line.startswith("superframe: error[data]:")
    assert "absent" in line


def test_corrupt_frame(tmp_path, capsys):
    raw = write_scenes(tmp_path / "raw", num_frames=2)
    (raw / "walk" / "0002.png").write_bytes(b"broken")
    assert main(["prepare-data", "--input", str(raw), "--output", str(tmp_path / "out")]) == 3
    assert "0002.png" in error_line(capsys)


def test_mixed_frame_sizes(tmp_path, capsys):
    write_frame(tmp_path / "raw" / "s" / "0001.png", np.zeros((16, 16, 3)))
    write_frame(tmp_path / "raw" / "s" / "0002.png", np.zeros((16, 12, 3)))
    assert main(["prepare-data", "--input", str(tmp_path / "raw"), "--output", str(tmp_path / "o")]) == 3
    assert error_line(capsys).startswith("superframe: error[format]:")


def test_invalid_value(tmp_path, capsys):
    raw = write_scenes(tmp_path / "raw", num_frames=1)
    code = main(["prepare-data", "--input", str(raw), "--output", str(tmp_path / "o"), "--ksize", "12"])
    assert code == 2
    assert error_line(capsys).startswith("superframe: error[value]:")


def test_evaluate_and_report(tmp_path, capsys):
    gt = write_scenes(tmp_path / "gt")
    report_path = tmp_path / "eval" / "copy.json"
    args = ["--border", "0", "--gt", str(gt), "--report"]
    assert main(["evaluate", "--gen", str(gt), *args, str(report_path), "--model", "copy"]) == 0
    report = MetricReport.load(report_path)
    assert report.scene_ids == ["calendar", "walk"]
    assert report.aggregate()["psnr"] == "inf"
    assert report_path.with_suffix(".csv").is_file()

    baseline_path = tmp_path / "eval" / "bicubic.json"
    assert main(["baseline", *args, str(baseline_path)]) == 0
    baseline = MetricReport.load(baseline_path)
    assert baseline.model == "bicubic"
    assert baseline.aggregate()["psnr"] < 60
    capsys.readouterr()

    out = tmp_path / "tables"
    inputs = ["--inputs", str(report_path), str(baseline_path)]
    assert main(["report", *inputs, "--out", str(out), "--reference", "Vid4"]) == 0
    table = (out / "table.txt").read_text()
    assert "copy" in table
    assert "bicubic" in table
    assert "BIC (published)" in table
    assert (out / "table.csv").is_file()
    assert (out / "plots" / "psnr_walk.png").is_file()
    assert table in capsys.readouterr().out

    assert main(["report", *inputs, "--out", str(out), "--labels", "one"]) == 2


def test_evaluate_scene_mismatch(tmp_path, capsys):
    gt = write_scenes(tmp_path / "gt")
    gen = tmp_path / "gen"
    write_clip(gen / "walk", translating_clip(6, (64, 64)))
    code = main(["evaluate", "--gen", str(gen), "--gt", str(gt), "--report", str(tmp_path / "r.json")])
    assert code == 3
    line = error_line(capsys)
    assert line.startswith("superframe: error[data]:")
    assert "calendar" in line
    assert not (tmp_path / "r.json").exists()


def test_evaluate_frames_too_small_for_protocol(tmp_path, capsys):
    gt = write_scenes(tmp_path / "gt", shape=(8, 8))
    args = ["--border", "0", "--gt", str(gt), "--report", str(tmp_path / "r.json")]
    assert main(["evaluate", "--gen", str(gt), *args]) == 3
    assert error_line(capsys).startswith("superframe: error[data]:")
    assert not (tmp_path / "r.json").exists()


def test_describe(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("SUPERFRAME_HOME", str(tmp_path))
    assert main(["describe", "--preset", "exp4_2"]) == 0
    out = capsys.readouterr().out
    assert out.splitlines()[0].startswith("total")
    assert "generator/reconstruction" in out
    manifest = json.loads((tmp_path / "describe" / "run_manifest.json").read_text())
    assert manifest["config"]["n_neighbors"] == 3


def test_train_and_infer(tmp_path):
    config = tmp_path / "tiny.txt"
    config.write_text(
        "preset = 'exp4_2'\n"
        "total_steps = 1\n"
        "base_channels = 8\n"
        "n_residual_blocks = 1\n"
        "crop = 8\n"
        "batch_size = 1\n"
        "synthetic_scenes = 1\n"
        "flow_variant = 'zero'\n"
    )
    run = tmp_path / "run"
    assert main(["train", "--config", str(config), "--output-dir", str(run)]) == 0
    checkpoint = run / "checkpoints" / "step_0000001.ckpt"
    assert checkpoint.is_file()
    assert "total_steps = 1" in (run / "config.txt").read_text()
    assert json.loads((run / "run_manifest.json").read_text())["seed"] == 0

    lr = tmp_path / "lr"
    write_clip(lr / "walk", translating_clip(3, (6, 5)))
    out = tmp_path / "sr"
    args = ["infer", "--checkpoint", str(checkpoint), "--input", str(lr), "--output", str(out)]
    assert main([*args, "--save-pairs"]) == 0
    frames = sorted((out / "walk").glob("*.png"))
    assert len(frames) == 3
    assert len(list((out / "pairs" / "walk").glob("*.png"))) == 3

    assert main(["infer", "--checkpoint", str(tmp_path / "none.ckpt"), "--input", str(lr), "--output", str(out)]) == 3


@pytest.mark.skipif("VID4_ROOT" not in os.environ, reason="Vid4 is not available")
def test_vid4_bicubic_baseline(tmp_path):
    report_path = tmp_path / "vid4.json"
    assert main(["baseline", "--gt", os.environ["VID4_ROOT"], "--report", str(report_path)]) == 0
    psnr = MetricReport.load(report_path).aggregate()["psnr"]
    assert abs(psnr - 23.66) < 0.5

