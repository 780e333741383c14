"""Synthetic dataset generator with planted attention.

Builds a desk-scale dataset on which the pipeline's qualitative claims are
testable: smooth random feature stacks, a planted channel-mixing kernel
whose attention maps modulate the features, a planted linear response head,
responses delayed by a planted lag, and gaze points sampled from the planted
attention upsampled to stimulus resolution.

Everything derives from one 64-bit seed through named generator streams
(features, kernel, head, noise, gaze, synchrony — spawned in that order), so
two runs with the same spec produce bit-identical files. Features are
rounded through 32-bit floats before any downstream arithmetic, because they
are stored as 32-bit tensors: what the files say is exactly what the
generator used.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .attention import saliency_forward, spatial_softmax
from .data import DatasetManifest, FIXATION_HEADER
from .encoder import parse_kv_text
from .evalmetrics import synchrony_map
from .numerics import bilinear_resize, gaussian_blur
from .tensorfile import write_tensor

__all__ = ["SyntheticSpec", "gen_synthetic"]


@dataclass
class SyntheticSpec:
    train_frames: int = 500
    val_frames: int = 50
    test_frames: int = 100
    grid_height: int = 12
    grid_width: int = 16
    channels: int = 8
    voxels: int = 40
    stimulus_height: int = 144
    stimulus_width: int = 256
    kernel_size: int = 5
    attention_sharpness: float = 4.0
    feature_smoothness: float = 2.0
    lag: int = 4
    noise_std: float = 0.1
    gaze_samples: int = 100
    seed: int = 0

    def validate(self) -> "SyntheticSpec":
        positives = (
            "train_frames", "test_frames", "grid_height", "grid_width",
            "channels", "voxels", "stimulus_height", "stimulus_width", "kernel_size",
        )
        for name in positives:
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.val_frames < 0 or self.gaze_samples < 0 or self.lag < 0:
            raise ValueError("val_frames, gaze_samples, and lag must be non-negative")
        if self.noise_std < 0:
            raise ValueError("noise_std must be non-negative")
        if self.kernel_size % 2 == 0:
            raise ValueError("kernel_size must be odd")
        if self.attention_sharpness <= 0:
            raise ValueError("attention_sharpness must be positive")
        if self.feature_smoothness < 0:
            raise ValueError("feature_smoothness must be non-negative")
        if self.stimulus_height % self.grid_height or self.stimulus_width % self.grid_width:
            raise ValueError("stimulus dims must be integer multiples of the grid")
        return self

    @property
    def total_frames(self) -> int:
        return self.train_frames + self.val_frames + self.test_frames

    def to_file(self, path) -> None:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            lines.append(f"{f.name} = {repr(v) if isinstance(v, float) else v}")
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def from_file(cls, path) -> "SyntheticSpec":
        kv = parse_kv_text(Path(path).read_text())
        known = {f.name: f for f in fields(cls)}
        unknown = set(kv) - set(known)
        if unknown:
            raise ValueError(f"unknown synthetic spec keys: {sorted(unknown)}")
        floats = {"attention_sharpness", "feature_smoothness", "noise_std"}
        args = {k: (float(v) if k in floats else int(v)) for k, v in kv.items()}
        return cls(**args).validate()


def _smooth_features(rng: np.random.Generator, spec: SyntheticSpec) -> np.ndarray:
    n, gh, gw, c = spec.total_frames, spec.grid_height, spec.grid_width, spec.channels
    noise = rng.standard_normal((n, c, gh, gw))
    if spec.feature_smoothness > 0:
        noise = gaussian_blur(noise, spec.feature_smoothness)
    f = np.moveaxis(noise, 1, -1)  # (n, gh, gw, c)
    mean = f.mean(axis=(0, 1, 2))
    std = f.std(axis=(0, 1, 2))
    f = (f - mean) / np.where(std > 0, std, 1.0)
    # round through the storage dtype so files and arithmetic agree bitwise
    return f.astype(np.float32).astype(np.float64)


def _plant_kernel(rng: np.random.Generator, features: np.ndarray, spec: SyntheticSpec) -> np.ndarray:
    raw = rng.standard_normal((spec.kernel_size, spec.kernel_size, spec.channels))
    sal = saliency_forward(features, raw)
    spread = float((sal.max(axis=(1, 2)) - sal.mean(axis=(1, 2))).mean())
    if spread <= 0:
        raise ValueError("planted kernel produced flat saliency; try another seed")
    # rectification is positively homogeneous, so scaling the kernel scales
    # the saliency spread linearly; pin the mean max-minus-mean spread
    return raw * (spec.attention_sharpness / spread)


def _sample_gaze(rng: np.random.Generator, attn: np.ndarray, spec: SyntheticSpec):
    """Fixation points drawn from one frame's attention, upsampled to stimulus size."""
    dens = np.maximum(bilinear_resize(attn, spec.stimulus_height, spec.stimulus_width), 0.0)
    dens = dens / dens.sum()
    idx = rng.choice(dens.size, size=spec.gaze_samples, p=dens.ravel())
    rows, cols = np.divmod(idx, spec.stimulus_width)
    x = cols + rng.uniform(0.0, 1.0, size=spec.gaze_samples)
    y = rows + rng.uniform(0.0, 1.0, size=spec.gaze_samples)
    return x, y


def gen_synthetic(spec: SyntheticSpec, out_dir) -> dict:
    """Write the full dataset under out_dir; returns a small summary dict.

    Layout: features/frame_<id>.atn (32-bit), attn/attn_<id>.atn (planted
    per-frame attention, 64-bit), responses.atn (T x V with T = frames + lag),
    sync.atn (per-voxel synchrony of two simulated observer groups with
    voxel-graded noise), fixations.csv, planted/{kernel,head_weight,head_bias},
    manifest.json, synth_spec.txt.
    """
    spec = spec.validate()
    out = Path(out_dir)
    (out / "features").mkdir(parents=True, exist_ok=True)
    (out / "attn").mkdir(exist_ok=True)
    (out / "planted").mkdir(exist_ok=True)

    streams = np.random.SeedSequence(spec.seed).spawn(6)
    rng_feat, rng_kernel, rng_head, rng_noise, rng_gaze, rng_sync = map(np.random.default_rng, streams)

    n = spec.total_frames
    features = _smooth_features(rng_feat, spec)
    kernel = _plant_kernel(rng_kernel, features, spec)
    attention = spatial_softmax(saliency_forward(features, kernel))

    head_w = rng_head.standard_normal((spec.channels, spec.voxels)) / np.sqrt(spec.channels)
    head_b = np.zeros(spec.voxels)
    pooled = np.einsum("nhw,nhwc->nc", attention, features)
    clean = pooled @ head_w + head_b
    cmean = clean.mean(axis=0)
    cstd = clean.std(axis=0)
    clean = (clean - cmean) / np.where(cstd > 0, cstd, 1.0)

    t_total = n + spec.lag
    responses = spec.noise_std * rng_noise.standard_normal((t_total, spec.voxels))
    responses[spec.lag :] += clean

    # two observer groups seeing the same signal with voxel-graded noise, so
    # the synchrony map spans a useful range for threshold sweeps
    obs_noise = np.linspace(0.05, 2.0, spec.voxels)
    group_a = clean + obs_noise * rng_sync.standard_normal((n, spec.voxels))
    group_b = clean + obs_noise * rng_sync.standard_normal((n, spec.voxels))
    sync = synchrony_map(group_a, group_b)

    fix_rows = []
    for fid in range(n):
        if spec.gaze_samples == 0:
            break
        x, y = _sample_gaze(rng_gaze, attention[fid], spec)
        for sid in range(spec.gaze_samples):
            fix_rows.append((fid, sid, float(x[sid]), float(y[sid])))

    for fid in range(n):
        write_tensor(out / "features" / f"frame_{fid:05d}.atn", features[fid], dtype="float32")
        write_tensor(out / "attn" / f"attn_{fid:05d}.atn", attention[fid])
    write_tensor(out / "responses.atn", responses)
    write_tensor(out / "sync.atn", sync.scores)
    write_tensor(out / "planted" / "kernel.atn", kernel)
    write_tensor(out / "planted" / "head_weight.atn", head_w)
    write_tensor(out / "planted" / "head_bias.atn", head_b)

    with (out / "fixations.csv").open("w") as fh:
        fh.write(",".join(FIXATION_HEADER) + "\n")
        for fid, sid, x, y in fix_rows:
            fh.write(f"{fid},{sid},{x!r},{y!r}\n")

    bounds = {
        "train": range(0, spec.train_frames),
        "val": range(spec.train_frames, spec.train_frames + spec.val_frames),
        "test": range(spec.train_frames + spec.val_frames, n),
    }
    manifest = DatasetManifest(
        splits={
            name: [(fid, f"features/frame_{fid:05d}.atn") for fid in ids]
            for name, ids in bounds.items()
            if len(ids) > 0
        },
        responses="responses.atn",
        fixations="fixations.csv",
        lag_seconds=spec.lag,
        stimulus_height=spec.stimulus_height,
        stimulus_width=spec.stimulus_width,
        split_ratios=f"{spec.train_frames}:{spec.val_frames}:{spec.test_frames}",
        extras={"attention_dir": "attn", "synchrony": "sync.atn", "planted_lag": spec.lag},
    ).validate()
    manifest.save(out / "manifest.json")
    spec.to_file(out / "synth_spec.txt")

    return {
        "frames": n,
        "grid": (spec.grid_height, spec.grid_width),
        "channels": spec.channels,
        "voxels": spec.voxels,
        "responses_shape": responses.shape,
        "manifest": str(out / "manifest.json"),
    }
