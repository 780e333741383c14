"""Command-line interface.

Subcommands cover the full pipeline: synthetic data generation, fixed
attention-map construction, model training, held-out evaluation with
synchrony sweeps and FDR-corrected significance, response-lag estimation,
saliency metrics, and RDM comparison. Every report path gets a rendered PNG
figure next to its delimited output.

Exit codes: 0 on success, 2 on any validation or input error. A flat
``key = value`` config file (--config) supplies defaults; explicit flags win.
"""

from __future__ import annotations

import argparse
import csv
import re
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .attention import center_attention_map, gaze_attention_map, kde_density_map, kde_log_density
from .data import DatasetManifest, load_fixations, pair_dataset
from .encoder import (
    ATTENTION_MODES,
    HEADS,
    EncoderConfig,
    load_model,
    parse_kv_text,
    save_model,
    train_encoder,
)
from .evalmetrics import (
    DEFAULT_THRESHOLDS,
    accuracy_threshold_sweep,
    estimate_lag,
    pearson_per_voxel,
    significance_mask,
)
from .figures import (
    save_attention_figure,
    save_lag_figure,
    save_loss_figure,
    save_metrics_figure,
    save_rdm_figure,
    save_sweep_figure,
)
from .ridge import RidgeConfig
from .rsa import build_rdm, rsa_compare
from .saliencymetrics import (
    FixationSet,
    PREDICTION_SCALES,
    aggregate_metrics,
    evaluate_prediction,
    fixation_density_map,
    shuffled_negatives,
)
from .synth import SyntheticSpec, gen_synthetic
from .tensorfile import TensorFileError, read_tensor, write_tensor

__all__ = ["main"]


# ------------------------------------------------------------ small parsers


def _parse_hw(text: str) -> tuple[int, int]:
    m = re.fullmatch(r"(\d+)x(\d+)", text.strip())
    if not m:
        raise ValueError(f"expected HxW (e.g. 23x32), got {text!r}")
    h, w = int(m.group(1)), int(m.group(2))
    if h < 1 or w < 1:
        raise ValueError("dimensions must be positive")
    return h, w


def _parse_dims3(text: str) -> tuple[int, int, int]:
    parts = text.strip().split("x")
    if len(parts) != 3:
        raise ValueError(f"expected DxHxW (e.g. 4x4x4), got {text!r}")
    dims = tuple(int(p) for p in parts)
    if min(dims) < 1:
        raise ValueError("dimensions must be positive")
    return dims


def _parse_range(text: str) -> tuple[float, ...]:
    parts = text.strip().split(":")
    if len(parts) != 3:
        raise ValueError(f"expected start:stop:step, got {text!r}")
    start, stop, step = (float(p) for p in parts)
    if step <= 0 or stop < start:
        raise ValueError("need step > 0 and stop >= start")
    count = int(np.floor((stop - start) / step + 1e-9)) + 1
    return tuple(round(start + i * step, 10) for i in range(count))


def _parse_lags(text: str) -> list[int]:
    text = text.strip()
    m = re.fullmatch(r"(\d+)\.\.(\d+)", text)
    if m:
        lo, hi = int(m.group(1)), int(m.group(2))
        if hi < lo:
            raise ValueError(f"empty lag range {text!r}")
        return list(range(lo, hi + 1))
    return [int(p) for p in text.split(",") if p.strip()]


def _parse_floats(text: str) -> tuple[float, ...]:
    vals = tuple(float(p) for p in text.split(",") if p.strip())
    if not vals:
        raise ValueError("empty list")
    return vals


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


class Resolver:
    """Option resolution: explicit flag, then config file entry, then default."""

    def __init__(self, args):
        self.args = args
        path = getattr(args, "config", None)
        self.cfg = parse_kv_text(Path(path).read_text()) if path else {}

    def get(self, name, default=None, cast=None, required=False):
        value = getattr(self.args, name, None)
        if value is None and name in self.cfg:
            value = self.cfg[name]
        if cast is not None and isinstance(value, str):
            value = cast(value)
        if value is None:
            value = default
        if value is None and required:
            raise ValueError(f"missing required option --{name.replace('_', '-')}")
        return value


def _write_csv(path, header, rows) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(float(x))  # plain-float repr even for numpy scalars
    return str(x)


def _frame_id_of(path: Path) -> int:
    m = re.search(r"(\d+)$", path.stem)
    if not m:
        raise ValueError(f"cannot read a frame id from file name {path.name!r}")
    return int(m.group(1))


def _tensor_files(path: Path) -> list[Path]:
    if path.is_dir():
        files = sorted(path.glob("*.atn"))
        if not files:
            raise ValueError(f"no .atn files under {path}")
        return files
    if path.is_file():
        return [path]
    raise ValueError(f"no such file or directory: {path}")


# -------------------------------------------------------------- subcommands


def cmd_gen_synthetic(args) -> int:
    r = Resolver(args)
    out = Path(r.get("out", required=True))
    spec_path = r.get("spec")
    spec = SyntheticSpec.from_file(spec_path) if spec_path else SyntheticSpec()
    seed = r.get("seed", cast=int)
    if seed is not None:
        spec = replace(spec, seed=int(seed))
    summary = gen_synthetic(spec.validate(), out)
    print(f"wrote {summary['frames']} frames ({summary['grid'][0]}x{summary['grid'][1]}x{summary['channels']})")
    print(f"responses {summary['responses_shape'][0]}x{summary['responses_shape'][1]}")
    print(f"manifest {summary['manifest']}")
    return 0


def cmd_make_attention(args) -> int:
    r = Resolver(args)
    mode = r.get("mode", required=True)
    if mode not in ("center", "gaze"):
        raise ValueError(f"--mode must be center or gaze, got {mode!r}")
    stim_h, stim_w = r.get("stimulus", cast=_parse_hw, required=True)
    grid_h, grid_w = r.get("grid", cast=_parse_hw, required=True)
    out = Path(r.get("out", required=True))
    out.mkdir(parents=True, exist_ok=True)
    sigma = r.get("sigma", cast=float)
    candidates = r.get("sigma_candidates", cast=_parse_floats, default=(5.0, 10.0, 20.0, 40.0))
    val_fraction = float(r.get("val_fraction", cast=float, default=0.2))
    table = load_fixations(r.get("fixations", required=True), stim_h, stim_w)
    if len(table) == 0:
        raise ValueError("fixation table is empty")

    if mode == "center":
        if sigma is not None:
            dens = kde_density_map(table.all_points(), sigma, grid_h, grid_w, stim_h, stim_w)
            center = dens / dens.sum()
            rows = [(repr(float(sigma)), "", "1")]
        else:
            if not 0 < val_fraction < 1:
                raise ValueError("--val-fraction must be in (0, 1)")
            frames = table.frames
            n_val = max(1, int(round(val_fraction * len(frames))))
            if n_val >= len(frames):
                raise ValueError("not enough frames to hold out a validation set")
            train_t = table.subset(frames[:-n_val])
            val_t = table.subset(frames[-n_val:])
            center, sigma = center_attention_map(train_t, val_t, candidates, grid_h, grid_w)
            val_pts = val_t.all_points()
            train_pts = train_t.all_points()
            rows = []
            for cand in candidates:
                score = float(kde_log_density(train_pts, cand, val_pts).mean())
                rows.append((repr(float(cand)), repr(score), "1" if cand == sigma else "0"))
        write_tensor(out / "center.atn", center)
        _write_csv(out / "selection.csv", ["sigma", "mean_log_density", "selected"], rows)
        save_attention_figure([center], out / "attention.png", titles=[f"center (sigma={sigma:g})"])
        print(f"wrote {out / 'center.atn'} (sigma {sigma:g})")
        return 0

    if sigma is None:
        raise ValueError("gaze mode needs --sigma (stimulus pixels)")
    dens = kde_density_map(table.all_points(), sigma, grid_h, grid_w, stim_h, stim_w)
    fallback = dens / dens.sum()
    write_tensor(out / "center.atn", fallback)
    frames = table.frames
    sample, titles = [], []
    for fid in frames:
        amap = gaze_attention_map(
            table.points_for_frame(fid), sigma, grid_h, grid_w, stim_h, stim_w, fallback=fallback
        )
        write_tensor(out / f"gaze_{fid:05d}.atn", amap)
        if len(sample) < 8:
            sample.append(amap)
            titles.append(f"frame {fid}")
    save_attention_figure(sample, out / "attention.png", titles=titles)
    print(f"wrote {len(frames)} gaze maps under {out}")
    return 0


def cmd_train(args) -> int:
    r = Resolver(args)
    manifest_path = Path(r.get("manifest", required=True))
    manifest = DatasetManifest.load(manifest_path)
    base = manifest_path.parent
    out = Path(r.get("out", required=True))
    lag = r.get("lag", cast=int)
    datasets, dropped = pair_dataset(manifest, base, lag=lag)
    if "train" not in datasets:
        raise ValueError("manifest has no 'train' split")
    train = datasets["train"]
    val = datasets.get("val")
    if any(dropped.values()):
        detail = ", ".join(f"{k}: {v}" for k, v in dropped.items() if v)
        print(f"dropped frames past the response window ({detail})", file=sys.stderr)

    n, fh, fw, ch = train.features.shape
    voxels = train.targets.shape[1]
    mask = None
    mask_path = r.get("voxel_mask")
    if mask_path is not None:
        mask = read_tensor(mask_path).astype(bool)
        if int(mask.sum()) != voxels:
            raise ValueError(f"voxel mask selects {int(mask.sum())} voxels but responses have {voxels}")
    head = r.get("head", default="linear")
    output_dims = r.get("output_dims", cast=_parse_dims3)
    cfg_kwargs = dict(
        feature_height=fh,
        feature_width=fw,
        channels=ch,
        voxels=voxels,
        attention_mode=r.get("mode", default="learned"),
        head=head,
        lag_seconds=lag if lag is not None else manifest.lag_seconds,
        epochs=int(r.get("epochs", cast=int, default=25)),
        learning_rate=float(r.get("lr", cast=float, default=1e-4)),
        seed=int(r.get("seed", cast=int, default=0)),
        batch_size=r.get("batch_size", cast=int),
        sigma_candidates=r.get("sigma_candidates", cast=_parse_floats, default=(5.0, 10.0, 20.0, 40.0)),
        gaze_sigma=r.get("sigma", cast=float),
    )
    if output_dims is not None:
        cfg_kwargs["output_dims"] = output_dims
    hidden = r.get("hidden_units", cast=int)
    if hidden is not None:
        cfg_kwargs["hidden_units"] = int(hidden)
    elif cfg_kwargs["attention_mode"] == "nopool":
        cfg_kwargs["hidden_units"] = 256
    coarse = r.get("coarse_shape", cast=_parse_dims3)
    if coarse is not None:
        cfg_kwargs["coarse_shape"] = coarse
    cfg = EncoderConfig(**cfg_kwargs).validate()

    fixations = None
    if cfg.attention_mode in ("center", "gaze"):
        if not manifest.fixations:
            raise ValueError(f"{cfg.attention_mode} mode needs a fixation table in the manifest")
        fixations = load_fixations(base / manifest.fixations, manifest.stimulus_height, manifest.stimulus_width)

    model, trace = train_encoder(cfg, train, val, fixations=fixations, voxel_mask=mask)
    save_model(model, out)
    _write_csv(
        out / "trace.csv",
        ["epoch", "train_loss", "val_loss"],
        [(e, _fmt(tl), _fmt(vl)) for e, tl, vl in trace],
    )
    save_loss_figure(trace, out / "loss.png")
    last = trace[-1]
    val_note = f", val {last[2]:.6f}" if last[2] is not None else ""
    print(f"trained {cfg.attention_mode}/{cfg.head} for {cfg.epochs} epochs (train MSE {last[1]:.6f}{val_note})")
    print(f"checkpoint {out}")
    return 0


def _eval_gaze_maps(model, manifest, base, frame_ids):
    if not manifest.fixations:
        raise ValueError("gaze-mode evaluation needs a fixation table in the manifest")
    table = load_fixations(base / manifest.fixations, manifest.stimulus_height, manifest.stimulus_width)
    cfg = model.config
    sigma = model.gaze_sigma
    if sigma is None:
        raise ValueError("model carries no gaze bandwidth")
    maps = np.empty((len(frame_ids), cfg.feature_height, cfg.feature_width))
    for i, fid in enumerate(frame_ids):
        maps[i] = gaze_attention_map(
            table.points_for_frame(fid),
            sigma,
            cfg.feature_height,
            cfg.feature_width,
            manifest.stimulus_height,
            manifest.stimulus_width,
            fallback=model.fixed_attention,
        )
    return maps


def cmd_eval(args) -> int:
    r = Resolver(args)
    model = load_model(r.get("model", required=True))
    manifest_path = Path(r.get("manifest", required=True))
    manifest = DatasetManifest.load(manifest_path)
    base = manifest_path.parent
    split = r.get("split", default="test")
    report = Path(r.get("report", required=True))
    thresholds = r.get("thresholds", cast=_parse_range, default=DEFAULT_THRESHOLDS)
    q = float(r.get("fdr", cast=float, default=0.05))

    datasets, _ = pair_dataset(manifest, base, lag=model.config.lag_seconds)
    if split not in datasets:
        raise ValueError(f"manifest has no {split!r} split")
    ds = datasets[split]
    gaze_maps = None
    if model.config.attention_mode == "gaze":
        gaze_maps = _eval_gaze_maps(model, manifest, base, ds.frame_ids)
    pred = model.predict(ds.features, gaze_maps)
    scores = pearson_per_voxel(pred, ds.targets)

    sync_path = r.get("synchrony")
    if sync_path is None and "synchrony" in manifest.extras:
        sync_path = manifest.resolve(base, manifest.extras["synchrony"])
    if sync_path is None:
        raise ValueError("no synchrony map: pass --synchrony or add one to the manifest extras")
    sync = read_tensor(sync_path)
    sweep = accuracy_threshold_sweep(scores.scores, sync, thresholds)
    mask, pvals = significance_mask(scores, n_samples=len(ds), q=q)

    _write_csv(
        report,
        ["threshold", "voxel_count", "mean_R"],
        [(_fmt(t), c, _fmt(m)) for t, c, m in sweep.rows()],
    )
    stem = report.parent / report.stem
    write_tensor(f"{stem}_scores.atn", scores.scores)
    _write_csv(
        f"{stem}_significance.csv",
        ["voxel", "R", "p", "significant", "degenerate"],
        [
            (v, _fmt(float(scores.scores[v])), _fmt(float(pvals[v])), int(mask[v]), int(scores.degenerate[v]))
            for v in range(len(scores))
        ],
    )
    save_sweep_figure(sweep, f"{stem}.png")

    attention_out = r.get("attention_out")
    if attention_out is not None:
        adir = Path(attention_out)
        adir.mkdir(parents=True, exist_ok=True)
        mode = model.config.attention_mode
        if mode == "learned":
            maps = model.attention_maps(ds.features)
        elif mode == "center":
            maps = np.broadcast_to(model.fixed_attention, (len(ds), *model.fixed_attention.shape))
        elif mode == "gaze":
            maps = gaze_maps
        else:
            raise ValueError(f"{mode} mode has no attention maps to write")
        for fid, amap in zip(ds.frame_ids, maps):
            write_tensor(adir / f"attn_{fid:05d}.atn", amap)
        print(f"wrote {len(ds)} attention maps under {adir}")

    mean_r = float(scores.scores[~scores.degenerate].mean()) if (~scores.degenerate).any() else 0.0
    print(f"{split}: mean R {mean_r:.4f} over {len(scores)} voxels, {int(mask.sum())} significant at q={q:g}")
    print(f"report {report}")
    return 0


def cmd_estimate_lag(args) -> int:
    r = Resolver(args)
    manifest_path = Path(r.get("manifest", required=True))
    manifest = DatasetManifest.load(manifest_path)
    base = manifest_path.parent
    split = r.get("split", default="train")
    lags = r.get("lags", cast=_parse_lags, default=list(range(1, 8)))
    folds = int(r.get("folds", cast=int, default=5))
    report = Path(r.get("report", required=True))

    if split not in manifest.splits:
        raise ValueError(f"manifest has no {split!r} split")
    ids, feats = manifest.load_features(split, base)
    responses = read_tensor(manifest.resolve(base, manifest.responses))
    pooled = feats.reshape(feats.shape[0], -1, feats.shape[-1]).sum(axis=1)
    best, results = estimate_lag(pooled, responses, lags, RidgeConfig(folds=folds), frame_ids=ids)
    _write_csv(
        report,
        ["lag", "mean_R", "std_R", "best"],
        [(lag, _fmt(m), _fmt(s), int(lag == best)) for lag, m, s in results],
    )
    save_lag_figure(results, best, report.parent / (report.stem + ".png"))
    print(f"best lag {best} (candidates {', '.join(str(l) for l, _, _ in results)})")
    print(f"report {report}")
    return 0


def cmd_saliency_metrics(args) -> int:
    r = Resolver(args)
    pred_files = _tensor_files(Path(r.get("pred", required=True)))
    stim_h, stim_w = r.get("stimulus", cast=_parse_hw, required=True)
    scale = r.get("scale", default="arbitrary")
    if scale not in PREDICTION_SCALES:
        raise ValueError(f"--scale must be one of {', '.join(PREDICTION_SCALES)}")
    truth_sigma = float(r.get("truth_sigma", cast=float, default=1.0))
    report = Path(r.get("report", required=True))
    table = load_fixations(r.get("fixations", required=True), stim_h, stim_w)

    preds = {}
    for f in pred_files:
        fid = _frame_id_of(f)
        if fid in preds:
            raise ValueError(f"two prediction files share frame id {fid}")
        grid = read_tensor(f)
        if grid.ndim != 2:
            raise ValueError(f"{f}: prediction must be a 2-D grid, got shape {grid.shape}")
        preds[fid] = grid
    grid_spec = r.get("grid", cast=_parse_hw)
    if grid_spec is None:
        shapes = {g.shape for g in preds.values()}
        if len(shapes) != 1:
            raise ValueError("predictions mix shapes; pass --grid to pick the scoring resolution")
        grid_h, grid_w = next(iter(shapes))
    else:
        grid_h, grid_w = grid_spec

    usable = [fid for fid in sorted(preds) if len(table.points_for_frame(fid)) > 0]
    skipped = len(preds) - len(usable)
    if not usable:
        raise ValueError("no predicted frame has fixations")
    if skipped:
        print(f"skipping {skipped} frames without fixations", file=sys.stderr)
    sets = [
        FixationSet.from_points(fid, table.points_for_frame(fid), grid_h, grid_w, stim_h, stim_w)
        for fid in usable
    ]
    per_frame, rows = [], []
    degenerate_frames = 0
    for i, fid in enumerate(usable):
        shuffled = shuffled_negatives(sets, i) if len(sets) > 1 else None
        if shuffled is not None and shuffled.cells.shape[0] == 0:
            shuffled = None
        truth = fixation_density_map(sets[i], truth_sigma)
        metrics = evaluate_prediction(
            preds[fid], sets[i], truth_map=truth, scale=scale, shuffled=shuffled, strict=False
        )
        expected = 3 + (2 if shuffled is not None else 1)
        if len(metrics) < expected:
            degenerate_frames += 1
        per_frame.append(metrics)
        rows.append(
            (fid, *(_fmt(metrics.get(name)) for name in ("SIM", "CC", "NSS", "AUC", "sAUC")))
        )
    if degenerate_frames:
        print(f"{degenerate_frames} frames had undefined metrics (constant maps); cells left empty", file=sys.stderr)
    agg = aggregate_metrics(per_frame)
    _write_csv(report, ["frame_id", "SIM", "CC", "NSS", "AUC", "sAUC"], rows)
    stem = report.parent / report.stem
    _write_csv(f"{stem}_summary.csv", ["metric", "mean", "sem", "n_frames"], [
        (name, _fmt(m), _fmt(s), n) for name, m, s, n in agg
    ])
    save_metrics_figure(agg, f"{stem}.png")
    for name, m, s, n in agg:
        print(f"{name}: {m:.4f} +/- {s:.4f} (n={n})")
    print(f"report {report}")
    return 0


def cmd_rsa(args) -> int:
    r = Resolver(args)
    reps_path = Path(r.get("model_reps", required=True))
    responses = read_tensor(r.get("responses", required=True))
    if responses.ndim != 2:
        raise ValueError(f"responses must be (T, V), got shape {responses.shape}")
    lag = int(r.get("lag", cast=int, default=0))
    label = r.get("label", default="model")
    regime = r.get("regime", default="pooled")
    normalize_model = bool(r.get("normalize_model", cast=_parse_bool, default=False))
    max_conditions = r.get("conditions", cast=int)
    report = Path(r.get("report", required=True))

    files = _tensor_files(reps_path)
    if len(files) == 1 and read_tensor(files[0]).ndim == 2:
        reps = read_tensor(files[0])
        ids = np.arange(reps.shape[0])
    else:
        ids = np.asarray([_frame_id_of(f) for f in files])
        order = np.argsort(ids)
        ids = ids[order]
        reps = np.stack([read_tensor(files[i]).ravel() for i in order])
    keep = ids + lag < responses.shape[0]
    if not np.all(keep):
        print(f"dropping {int((~keep).sum())} conditions past the response window", file=sys.stderr)
        reps, ids = reps[keep], ids[keep]
    if max_conditions is not None:
        reps, ids = reps[: int(max_conditions)], ids[: int(max_conditions)]
    neural = responses[ids + lag]

    mask_path = r.get("roi_mask")
    if mask_path is not None:
        mask = read_tensor(mask_path).ravel()
        if mask.size != neural.shape[1]:
            raise ValueError(f"ROI mask has {mask.size} entries, responses have {neural.shape[1]} voxels")
        sel = mask != 0
        if int(sel.sum()) < 2:
            raise ValueError("ROI mask keeps fewer than 2 voxels")
        neural = neural[:, sel]

    model_rdm = build_rdm(reps, normalize=normalize_model)
    neural_rdm = build_rdm(neural, normalize=True)
    tau = rsa_compare(model_rdm, neural_rdm)
    _write_csv(report, ["label", "regime", "tau_a", "n_conditions"], [(label, regime, _fmt(tau), reps.shape[0])])
    save_rdm_figure(model_rdm, neural_rdm, tau, report.parent / (report.stem + ".png"))
    print(f"tau_A {tau:.4f} over {reps.shape[0]} conditions")
    print(f"report {report}")
    return 0


# ------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value config file; flags override its entries")

    p = argparse.ArgumentParser(prog="attnenc", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command")

    g = sub.add_parser("gen-synthetic", parents=[common], help="write a synthetic dataset with planted attention")
    g.add_argument("--spec", help="synthetic spec file (key = value); defaults when omitted")
    g.add_argument("--out", help="output dataset directory")
    g.add_argument("--seed", type=int, help="override the spec seed")
    g.set_defaults(func=cmd_gen_synthetic)

    m = sub.add_parser("make-attention", parents=[common], help="build center or per-frame gaze attention maps")
    m.add_argument("--mode", choices=("center", "gaze"))
    m.add_argument("--fixations", help="fixation CSV (frame_id,subject_id,x,y)")
    m.add_argument("--stimulus", help="stimulus size HxW, e.g. 720x1280")
    m.add_argument("--grid", help="attention grid size HxW, e.g. 23x32")
    m.add_argument("--sigma", type=float, help="KDE bandwidth in stimulus pixels")
    m.add_argument("--sigma-candidates", dest="sigma_candidates", type=_parse_floats,
                   help="comma-separated bandwidths for selection (center mode)")
    m.add_argument("--val-fraction", dest="val_fraction", type=float,
                   help="fraction of frames held out for bandwidth selection (default 0.2)")
    m.add_argument("--out", help="output directory")
    m.set_defaults(func=cmd_make_attention)

    t = sub.add_parser("train", parents=[common], help="train an encoding model")
    t.add_argument("--manifest", help="dataset manifest JSON")
    t.add_argument("--mode", choices=ATTENTION_MODES)
    t.add_argument("--head", choices=HEADS)
    t.add_argument("--lag", type=int, help="stimulus-to-response delay (default: manifest value)")
    t.add_argument("--epochs", type=int)
    t.add_argument("--lr", type=float)
    t.add_argument("--seed", type=int)
    t.add_argument("--batch-size", dest="batch_size", type=int, help="mini-batch size (default: full batch)")
    t.add_argument("--hidden-units", dest="hidden_units", type=int)
    t.add_argument("--sigma", type=float, help="gaze KDE bandwidth in stimulus pixels (skips selection)")
    t.add_argument("--sigma-candidates", dest="sigma_candidates", type=_parse_floats)
    t.add_argument("--voxel-mask", dest="voxel_mask", help="0/1 tensor selecting voxels for a conv head")
    t.add_argument("--output-dims", dest="output_dims", type=_parse_dims3, help="conv head volume DxHxW")
    t.add_argument("--coarse-shape", dest="coarse_shape", type=_parse_dims3, help="conv head coarse volume DxHxW")
    t.add_argument("--out", help="checkpoint directory")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", parents=[common], help="evaluate a model: sweep, scores, significance")
    e.add_argument("--model", help="checkpoint directory")
    e.add_argument("--manifest")
    e.add_argument("--split", help="manifest split to score (default test)")
    e.add_argument("--synchrony", help="per-voxel synchrony tensor (default: manifest extras)")
    e.add_argument("--thresholds", type=_parse_range, help="sweep as start:stop:step (default 0.15:0.75:0.05)")
    e.add_argument("--fdr", type=float, help="BH q level (default 0.05)")
    e.add_argument("--attention-out", dest="attention_out", help="directory for per-frame attention tensors")
    e.add_argument("--report", help="sweep CSV path; scores/significance/figure land next to it")
    e.set_defaults(func=cmd_eval)

    l = sub.add_parser("estimate-lag", parents=[common], help="pick the response delay by cross-validated ridge")
    l.add_argument("--manifest")
    l.add_argument("--split", help="split to use (default train)")
    l.add_argument("--lags", type=_parse_lags, help="candidates, e.g. 1..7 or 1,2,4")
    l.add_argument("--folds", type=int)
    l.add_argument("--report")
    l.set_defaults(func=cmd_estimate_lag)

    s = sub.add_parser("saliency-metrics", parents=[common], help="score predicted maps against fixations")
    s.add_argument("--pred", help="directory of per-frame .atn maps (or one file); frame id = trailing digits")
    s.add_argument("--fixations")
    s.add_argument("--stimulus", help="stimulus size HxW")
    s.add_argument("--grid", help="scoring grid HxW (default: prediction resolution)")
    s.add_argument("--scale", choices=PREDICTION_SCALES, help="prediction scale (default arbitrary)")
    s.add_argument("--truth-sigma", dest="truth_sigma", type=float,
                   help="truth-map blur in grid cells (default 1.0)")
    s.add_argument("--report")
    s.set_defaults(func=cmd_saliency_metrics)

    q = sub.add_parser("rsa", parents=[common], help="compare model and neural RDMs")
    q.add_argument("--model-reps", dest="model_reps", help="directory of per-frame vectors or one (N, D) tensor")
    q.add_argument("--responses", help="(T, V) response tensor")
    q.add_argument("--roi-mask", dest="roi_mask", help="per-voxel mask tensor; nonzero selects")
    q.add_argument("--lag", type=int, help="row offset into responses (default 0)")
    q.add_argument("--conditions", type=int, help="cap the number of conditions")
    q.add_argument("--normalize-model", dest="normalize_model", action="store_const", const=True,
                   help="z-score model vector dimensions before the RDM")
    q.add_argument("--label", help="label column for the report")
    q.add_argument("--regime", help="regime column for the report")
    q.add_argument("--report")
    q.set_defaults(func=cmd_rsa)

    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not hasattr(args, "func"):
        parser.print_help(sys.stderr)
        return 2
    try:
        return args.func(args)
    except (TensorFileError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
