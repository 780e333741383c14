"""End-to-end command-line pipeline on a small planted dataset.

Every subcommand is exercised in-process through main(); exit code 0 means
success, 2 means a reported validation error. Report paths must gain a
rendered PNG next to the delimited output.
"""

import csv

import numpy as np
import pytest

from attnenc.attention import require_attention_map
from attnenc.cli import main
from attnenc.data import DatasetManifest
from attnenc.synth import SyntheticSpec, gen_synthetic
from attnenc.tensorfile import read_tensor, write_tensor


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli_data")
    spec = SyntheticSpec(
        train_frames=24,
        val_frames=6,
        test_frames=8,
        grid_height=4,
        grid_width=4,
        channels=2,
        voxels=4,
        stimulus_height=32,
        stimulus_width=32,
        kernel_size=3,
        lag=2,
        noise_std=0.05,
        gaze_samples=40,
        seed=7,
    )
    gen_synthetic(spec, out)
    return spec, out


def _read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


# ----------------------------------------------------------- gen-synthetic


def test_gen_synthetic_cmd(tmp_path, capsys):
    spec_file = tmp_path / "spec.txt"
    spec_file.write_text(
        "train_frames = 3\nval_frames = 1\ntest_frames = 1\ngrid_height = 4\n"
        "grid_width = 4\nchannels = 2\nvoxels = 3\nstimulus_height = 16\n"
        "stimulus_width = 16\nkernel_size = 3\nlag = 1\ngaze_samples = 2\n"
    )
    assert main(["gen-synthetic", "--spec", str(spec_file), "--out", str(tmp_path / "d"), "--seed", "5"]) == 0
    out = capsys.readouterr().out
    assert "wrote 5 frames" in out
    man = DatasetManifest.load(tmp_path / "d" / "manifest.json")
    assert man.lag_seconds == 1
    # --seed overrides the spec file
    assert "seed = 5" in (tmp_path / "d" / "synth_spec.txt").read_text()


def test_gen_synthetic_requires_out():
    assert main(["gen-synthetic"]) == 2


# ----------------------------------------------------------- make-attention


def test_make_attention_center_selects_bandwidth(dataset, tmp_path, capsys):
    spec, data = dataset
    out = tmp_path / "center"
    rc = main([
        "make-attention", "--mode", "center",
        "--fixations", str(data / "fixations.csv"),
        "--grid", "4x4", "--stimulus", "32x32",
        "--sigma-candidates", "2,4,8",
        "--out", str(out),
    ])
    assert rc == 0
    m = require_attention_map(read_tensor(out / "center.atn"))
    assert m.shape == (4, 4)
    header, rows = _read_csv(out / "selection.csv")
    assert header == ["sigma", "mean_log_density", "selected"]
    assert len(rows) == 3
    assert sum(int(r[2]) for r in rows) == 1
    assert (out / "attention.png").stat().st_size > 0


def test_make_attention_fixed_sigma_skips_selection(dataset, tmp_path):
    spec, data = dataset
    out = tmp_path / "center_fixed"
    rc = main([
        "make-attention", "--mode", "center",
        "--fixations", str(data / "fixations.csv"),
        "--grid", "4x4", "--stimulus", "32x32", "--sigma", "6",
        "--out", str(out),
    ])
    assert rc == 0
    _, rows = _read_csv(out / "selection.csv")
    assert len(rows) == 1 and rows[0][0] == "6.0"


def test_make_attention_gaze_writes_per_frame_maps(dataset, tmp_path):
    spec, data = dataset
    out = tmp_path / "gaze"
    rc = main([
        "make-attention", "--mode", "gaze",
        "--fixations", str(data / "fixations.csv"),
        "--grid", "4x4", "--stimulus", "32x32", "--sigma", "6",
        "--out", str(out),
    ])
    assert rc == 0
    maps = sorted(out.glob("gaze_*.atn"))
    assert len(maps) == spec.total_frames
    for p in maps[:5]:
        require_attention_map(read_tensor(p))


def test_make_attention_rejects_bad_geometry(dataset, tmp_path):
    spec, data = dataset
    rc = main([
        "make-attention", "--mode", "center",
        "--fixations", str(data / "fixations.csv"),
        "--grid", "4by4", "--stimulus", "32x32",
        "--out", str(tmp_path / "x"),
    ])
    assert rc == 2


# -------------------------------------------------------------- train/eval


@pytest.fixture(scope="module")
def trained(dataset, tmp_path_factory):
    spec, data = dataset
    out = tmp_path_factory.mktemp("cli_model")
    rc = main([
        "train", "--manifest", str(data / "manifest.json"),
        "--mode", "learned", "--epochs", "12", "--lr", "5e-3", "--seed", "0",
        "--out", str(out),
    ])
    assert rc == 0
    return out


def test_train_writes_checkpoint_trace_and_figure(trained):
    assert (trained / "model.cfg").exists() or any(trained.iterdir())
    header, rows = _read_csv(trained / "trace.csv")
    assert header == ["epoch", "train_loss", "val_loss"]
    assert len(rows) == 12
    losses = [float(r[1]) for r in rows]
    assert losses[-1] < losses[0]
    assert all(r[2] != "" for r in rows)  # val split present
    assert (trained / "loss.png").stat().st_size > 0


def test_eval_writes_sweep_scores_significance(dataset, trained, tmp_path, capsys):
    spec, data = dataset
    report = tmp_path / "ev" / "sweep.csv"
    rc = main([
        "eval", "--model", str(trained), "--manifest", str(data / "manifest.json"),
        "--thresholds", "0.1:0.3:0.1", "--report", str(report),
    ])
    assert rc == 0
    out = capsys.readouterr().out
    assert "mean R" in out
    header, rows = _read_csv(report)
    assert header == ["threshold", "voxel_count", "mean_R"]
    assert [r[0] for r in rows] == ["0.1", "0.2", "0.3"]
    counts = [int(r[1]) for r in rows]
    assert counts == sorted(counts, reverse=True)  # sweep counts non-increasing
    scores = read_tensor(tmp_path / "ev" / "sweep_scores.atn")
    assert scores.shape == (spec.voxels,)
    header, rows = _read_csv(tmp_path / "ev" / "sweep_significance.csv")
    assert header == ["voxel", "R", "p", "significant", "degenerate"]
    assert len(rows) == spec.voxels
    for r in rows:
        assert 0.0 <= float(r[2]) <= 1.0
    assert (tmp_path / "ev" / "sweep.png").stat().st_size > 0


def test_eval_gaze_model_writes_attention_maps(dataset, tmp_path):
    spec, data = dataset
    model_dir = tmp_path / "m_gaze"
    rc = main([
        "train", "--manifest", str(data / "manifest.json"),
        "--mode", "gaze", "--sigma", "8", "--epochs", "6", "--lr", "5e-3",
        "--out", str(model_dir),
    ])
    assert rc == 0
    report = tmp_path / "ev" / "sweep.csv"
    rc = main([
        "eval", "--model", str(model_dir), "--manifest", str(data / "manifest.json"),
        "--attention-out", str(tmp_path / "ev" / "attn"), "--report", str(report),
    ])
    assert rc == 0
    maps = sorted((tmp_path / "ev" / "attn").glob("attn_*.atn"))
    assert len(maps) == spec.test_frames
    for p in maps:
        require_attention_map(read_tensor(p))


def test_eval_unknown_split_fails(dataset, trained, tmp_path):
    spec, data = dataset
    rc = main([
        "eval", "--model", str(trained), "--manifest", str(data / "manifest.json"),
        "--split", "holdout", "--report", str(tmp_path / "r.csv"),
    ])
    assert rc == 2


# ------------------------------------------------------------- estimate-lag


def test_estimate_lag_finds_planted_lag(dataset, tmp_path, capsys):
    spec, data = dataset
    report = tmp_path / "lag.csv"
    rc = main([
        "estimate-lag", "--manifest", str(data / "manifest.json"),
        "--lags", "1..4", "--folds", "3", "--report", str(report),
    ])
    assert rc == 0
    assert f"best lag {spec.lag}" in capsys.readouterr().out
    header, rows = _read_csv(report)
    assert header == ["lag", "mean_R", "std_R", "best"]
    best = [int(r[0]) for r in rows if r[3] == "1"]
    assert best == [spec.lag]
    assert (tmp_path / "lag.png").stat().st_size > 0


# -------------------------------------------------------- saliency-metrics


def test_saliency_metrics_on_planted_maps(dataset, tmp_path, capsys):
    spec, data = dataset
    report = tmp_path / "sal" / "metrics.csv"
    rc = main([
        "saliency-metrics", "--pred", str(data / "attn"),
        "--fixations", str(data / "fixations.csv"),
        "--stimulus", "32x32", "--scale", "density",
        "--report", str(report),
    ])
    assert rc == 0
    header, rows = _read_csv(report)
    assert header == ["frame_id", "SIM", "CC", "NSS", "AUC", "sAUC"]
    assert len(rows) == spec.total_frames
    header, srows = _read_csv(tmp_path / "sal" / "metrics_summary.csv")
    assert header == ["metric", "mean", "sem", "n_frames"]
    by_name = {r[0]: r for r in srows}
    # planted maps generated the fixations, so they beat chance comfortably
    assert float(by_name["AUC"][1]) > 0.6
    assert float(by_name["NSS"][1]) > 0.0
    # a dense frame can fixate every cell of the 4x4 grid, dropping its AUC
    assert spec.total_frames - 3 <= int(by_name["AUC"][3]) <= spec.total_frames
    assert (tmp_path / "sal" / "metrics.png").stat().st_size > 0
    assert "AUC" in capsys.readouterr().out


def test_saliency_metrics_single_file(dataset, tmp_path):
    spec, data = dataset
    rc = main([
        "saliency-metrics", "--pred", str(data / "attn" / "attn_00000.atn"),
        "--fixations", str(data / "fixations.csv"),
        "--stimulus", "32x32", "--scale", "density",
        "--report", str(tmp_path / "one.csv"),
    ])
    assert rc == 0
    _, rows = _read_csv(tmp_path / "one.csv")
    assert len(rows) == 1 and rows[0][5] == ""  # no sAUC with one frame


# ---------------------------------------------------------------------- rsa


def test_rsa_cmd_with_roi_mask(dataset, tmp_path, capsys):
    spec, data = dataset
    mask = tmp_path / "mask.atn"
    write_tensor(mask, np.ones(spec.voxels))
    report = tmp_path / "rsa" / "rsa.csv"
    rc = main([
        "rsa", "--model-reps", str(data / "features"),
        "--responses", str(data / "responses.atn"),
        "--roi-mask", str(mask), "--lag", str(spec.lag),
        "--conditions", "20", "--label", "planted", "--report", str(report),
    ])
    assert rc == 0
    header, rows = _read_csv(report)
    assert header == ["label", "regime", "tau_a", "n_conditions"]
    assert rows[0][0] == "planted"
    assert -1.0 <= float(rows[0][2]) <= 1.0
    assert int(rows[0][3]) == 20
    assert (tmp_path / "rsa" / "rsa.png").stat().st_size > 0
    assert "tau_A" in capsys.readouterr().out


def test_rsa_rejects_short_roi_mask(dataset, tmp_path):
    spec, data = dataset
    mask = tmp_path / "mask.atn"
    write_tensor(mask, np.ones(spec.voxels + 3))
    rc = main([
        "rsa", "--model-reps", str(data / "features"),
        "--responses", str(data / "responses.atn"),
        "--roi-mask", str(mask), "--report", str(tmp_path / "r.csv"),
    ])
    assert rc == 2


# ------------------------------------------------------------------- config


def test_config_file_supplies_defaults_and_flags_override(dataset, tmp_path):
    spec, data = dataset
    cfg = tmp_path / "train.cfg"
    cfg.write_text("epochs = 3\nlr = 0.005\nmode = learned\n")
    out_a = tmp_path / "a"
    assert main(["train", "--manifest", str(data / "manifest.json"),
                 "--config", str(cfg), "--out", str(out_a)]) == 0
    _, rows = _read_csv(out_a / "trace.csv")
    assert len(rows) == 3

    out_b = tmp_path / "b"
    assert main(["train", "--manifest", str(data / "manifest.json"),
                 "--config", str(cfg), "--epochs", "5", "--out", str(out_b)]) == 0
    _, rows = _read_csv(out_b / "trace.csv")
    assert len(rows) == 5


# -------------------------------------------------------------- exit codes


def test_no_command_prints_help(capsys):
    assert main([]) == 2
    assert "usage" in capsys.readouterr().err.lower()


def test_validation_errors_exit_2(dataset, tmp_path, capsys):
    spec, data = dataset
    assert main(["train", "--manifest", str(tmp_path / "missing.json"),
                 "--out", str(tmp_path / "m")]) == 2
    assert "error:" in capsys.readouterr().err
    assert main(["eval", "--model", str(tmp_path / "nope"),
                 "--manifest", str(data / "manifest.json"),
                 "--report", str(tmp_path / "r.csv")]) == 2
    # argparse rejects a bad --lags value before main sees it, same exit status
    with pytest.raises(SystemExit) as exc:
        main(["estimate-lag", "--manifest", str(data / "manifest.json"),
              "--lags", "5..2", "--report", str(tmp_path / "r.csv")])
    assert exc.value.code == 2
