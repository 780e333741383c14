"""Trainable encoding models mapping feature stacks to response vectors.

A model pools an (H, W, C) feature stack into a vector (by one of several
attention regimes) and maps it through a response head. The "learned" regime
computes its own attention from a trainable channel-mixing kernel; gradients
for every trainable tensor are derived by hand (reverse mode) and training is
plain Adam on the mean squared error against z-scored targets.

Attention regimes:
    none     unweighted spatial sum
    center   one fixed map for all frames (global gaze density)
    gaze     a fixed map per frame (that frame's blurred fixations)
    learned  softmax of blurred rectified filter responses, trained end to end
    nopool   no pooling at all; the flattened stack feeds the head

Heads: "linear" (affine map) or "conv" (affine map to a coarse 3-D volume,
then repeated x2 trilinear upsampling + 3x3x3 convolutions, ReLU between
stages, cropped to the response volume and masked to the voxel set).
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .attention import (
    FixationTable,
    center_attention_map,
    channel_conv_same,
    gaze_attention_map,
    kde_density_map,
    require_attention_map,
    spatial_softmax,
)
from .numerics import DEGENERATE_STD, correlate_same, gaussian_kernel2d, resize_matrix
from .tensorfile import read_tensor, write_tensor

__all__ = [
    "ATTENTION_MODES",
    "HEADS",
    "EncoderConfig",
    "EncoderModel",
    "Adam",
    "encoder_forward",
    "encoder_loss",
    "encoder_backward",
    "train_encoder",
    "build_attention_inputs",
    "save_model",
    "load_model",
]

ATTENTION_MODES = ("none", "center", "gaze", "learned", "nopool")
HEADS = ("linear", "conv")


@dataclass
class EncoderConfig:
    feature_height: int
    feature_width: int
    channels: int
    voxels: int
    attention_mode: str = "learned"
    head: str = "linear"
    lag_seconds: int = 4
    epochs: int = 25
    learning_rate: float = 1e-4
    seed: int = 0
    batch_size: int | None = None
    hidden_units: int = 1024
    coarse_shape: tuple[int, int, int] = (4, 4, 4)
    stage_channels: tuple[int, ...] = (16, 8, 1)
    output_dims: tuple[int, int, int] | None = None
    attention_kernel_size: int = 5
    blur_size: int = 5
    blur_sigma: float = 1.0
    sigma_candidates: tuple[float, ...] = (5.0, 10.0, 20.0, 40.0)
    gaze_sigma: float | None = None

    def validate(self) -> "EncoderConfig":
        if self.attention_mode not in ATTENTION_MODES:
            raise ValueError(f"unknown attention mode {self.attention_mode!r}")
        if self.head not in HEADS:
            raise ValueError(f"unknown head {self.head!r}")
        for name in ("feature_height", "feature_width", "channels", "voxels", "epochs", "hidden_units"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.lag_seconds < 0:
            raise ValueError("lag_seconds must be non-negative")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be non-negative")
        if self.batch_size is not None and self.batch_size < 1:
            raise ValueError("batch_size must be positive when given")
        if self.attention_kernel_size % 2 == 0 or self.blur_size % 2 == 0:
            raise ValueError("kernel sizes must be odd")
        if self.head == "conv":
            if self.output_dims is None:
                raise ValueError("conv head requires output_dims")
            if len(self.stage_channels) < 2 or self.stage_channels[-1] != 1:
                raise ValueError("stage_channels must end in a single output channel")
            d0, h0, w0 = self.coarse_shape
            if self.stage_channels[0] * d0 * h0 * w0 != self.hidden_units:
                raise ValueError(
                    f"hidden_units {self.hidden_units} must equal first stage channels x coarse volume "
                    f"({self.stage_channels[0]} x {d0 * h0 * w0})"
                )
            stages = len(self.stage_channels) - 1
            grown = tuple(c * 2**stages for c in self.coarse_shape)
            if any(g < o for g, o in zip(grown, self.output_dims)):
                raise ValueError(f"upsampled volume {grown} cannot cover output_dims {self.output_dims}")
        return self

    @property
    def head_input_dim(self) -> int:
        if self.attention_mode == "nopool":
            return self.feature_height * self.feature_width * self.channels
        return self.channels

    # --- flat key = value serialization (checkpoints, config files) ---

    def to_kv_lines(self) -> list[str]:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if v is None:
                text = "none"
            elif isinstance(v, tuple):
                text = ",".join(repr(x) if isinstance(x, float) else str(x) for x in v)
            elif isinstance(v, float):
                text = repr(v)
            else:
                text = str(v)
            lines.append(f"{f.name} = {text}")
        return lines

    @classmethod
    def from_kv(cls, kv: dict) -> "EncoderConfig":
        def parse(name, text):
            text = text.strip()
            if name in ("batch_size",) and text == "none":
                return None
            if name in ("output_dims", "gaze_sigma") and text == "none":
                return None
            if name in ("coarse_shape", "stage_channels", "output_dims"):
                return tuple(int(x) for x in text.split(","))
            if name == "sigma_candidates":
                return tuple(float(x) for x in text.split(","))
            if name in ("learning_rate", "blur_sigma", "gaze_sigma"):
                return float(text)
            if name in ("attention_mode", "head"):
                return text
            return int(text)

        known = {f.name for f in fields(cls)}
        unknown = set(kv) - known
        if unknown:
            raise ValueError(f"unknown encoder config keys: {sorted(unknown)}")
        return cls(**{k: parse(k, v) for k, v in kv.items()})


@dataclass
class EncoderModel:
    config: EncoderConfig
    params: dict[str, np.ndarray]
    fixed_attention: np.ndarray | None = None
    voxel_mask: np.ndarray | None = None
    gaze_sigma: float | None = None
    target_mean: np.ndarray | None = None
    target_std: np.ndarray | None = None

    @property
    def attention_kernel(self) -> np.ndarray | None:
        return self.params.get("attention_kernel")

    @property
    def head_weights(self) -> dict[str, np.ndarray]:
        return {k: v for k, v in self.params.items() if k.startswith("head.")}

    def predict(self, features, gaze_maps=None) -> np.ndarray:
        y, _ = _forward_batch(self, _as_batch(features, self.config), gaze_maps)
        return y

    def attention_maps(self, features) -> np.ndarray:
        """Per-frame learned attention for a (B, H, W, C) stack."""
        if self.config.attention_mode != "learned":
            raise ValueError("attention_maps is only defined for learned mode")
        _, att = _forward_batch(self, _as_batch(features, self.config))
        return att


# ------------------------------------------------------------------ heads


class LinearHead:
    param_names = ("head.weight", "head.bias")

    def __init__(self, in_dim: int, out_dim: int):
        self.in_dim = in_dim
        self.out_dim = out_dim

    def init_params(self, rng: np.random.Generator) -> dict[str, np.ndarray]:
        bound = 1.0 / np.sqrt(self.in_dim)
        return {
            "head.weight": rng.uniform(-bound, bound, (self.in_dim, self.out_dim)),
            "head.bias": rng.uniform(-bound, bound, self.out_dim),
        }

    def forward(self, params, x, cache=None):
        if cache is not None:
            cache["x"] = x
        return x @ params["head.weight"] + params["head.bias"]

    def backward(self, params, cache, dy):
        grads = {
            "head.weight": cache["x"].T @ dy,
            "head.bias": dy.sum(axis=0),
        }
        return grads, dy @ params["head.weight"].T


def _conv3d_windows(u: np.ndarray) -> np.ndarray:
    padded = np.pad(u, [(0, 0), (0, 0), (1, 1), (1, 1), (1, 1)])
    return sliding_window_view(padded, (3, 3, 3), axis=(2, 3, 4))


class ConvHead:
    """Affine map to a coarse volume, then (upsample x2, 3x3x3 conv, ReLU) stages.

    The ReLU is skipped after the last stage; the grown volume is corner-cropped
    to the response dimensions and flattened, optionally through a voxel mask.
    """

    def __init__(self, in_dim: int, cfg: EncoderConfig, voxel_mask: np.ndarray | None):
        self.in_dim = in_dim
        self.coarse = cfg.coarse_shape
        self.channels = cfg.stage_channels
        self.n_stages = len(cfg.stage_channels) - 1
        self.hidden = cfg.hidden_units
        self.output_dims = cfg.output_dims
        full = int(np.prod(cfg.output_dims))
        if voxel_mask is not None:
            m = np.asarray(voxel_mask).astype(bool).ravel()
            if m.size != full:
                raise ValueError(f"voxel mask has {m.size} cells, output volume has {full}")
            if m.sum() != cfg.voxels:
                raise ValueError(f"voxel mask selects {int(m.sum())} voxels, config says {cfg.voxels}")
            self.mask_idx = np.flatnonzero(m)
        else:
            if cfg.voxels != full:
                raise ValueError(f"without a voxel mask, voxels ({cfg.voxels}) must equal the output volume ({full})")
            self.mask_idx = None
        # per-stage, per-axis interpolation matrices for the x2 upsampling
        self.up = []
        dims = list(self.coarse)
        for _ in range(self.n_stages):
            self.up.append([resize_matrix(n, 2 * n) for n in dims])
            dims = [2 * n for n in dims]
        self.grown = tuple(dims)

    @property
    def param_names(self):
        names = ["head.fc_weight", "head.fc_bias"]
        for i in range(self.n_stages):
            names += [f"head.stage{i}_weight", f"head.stage{i}_bias"]
        return tuple(names)

    def init_params(self, rng: np.random.Generator) -> dict[str, np.ndarray]:
        params = {}
        bound = 1.0 / np.sqrt(self.in_dim)
        params["head.fc_weight"] = rng.uniform(-bound, bound, (self.in_dim, self.hidden))
        params["head.fc_bias"] = rng.uniform(-bound, bound, self.hidden)
        for i, (ci, co) in enumerate(zip(self.channels[:-1], self.channels[1:])):
            bound = 1.0 / np.sqrt(ci * 27)
            params[f"head.stage{i}_weight"] = rng.uniform(-bound, bound, (co, ci, 3, 3, 3))
            params[f"head.stage{i}_bias"] = rng.uniform(-bound, bound, co)
        return params

    @staticmethod
    def _apply_axis(t, m, axis):
        moved = np.moveaxis(t, axis, -1)
        return np.moveaxis(moved @ m.T, -1, axis)

    def forward(self, params, x, cache=None):
        b = x.shape[0]
        h = x @ params["head.fc_weight"] + params["head.fc_bias"]
        t = h.reshape(b, self.channels[0], *self.coarse)
        stages = []
        for i in range(self.n_stages):
            u = t
            for axis, m in zip((2, 3, 4), self.up[i]):
                u = self._apply_axis(u, m, axis)
            z = np.einsum(
                "bcdhwxyz,ocxyz->bodhw",
                _conv3d_windows(u),
                params[f"head.stage{i}_weight"],
            )
            z += params[f"head.stage{i}_bias"][None, :, None, None, None]
            t = np.maximum(z, 0.0) if i < self.n_stages - 1 else z
            stages.append((u, z))
        od, oh, ow = self.output_dims
        vol = t[:, 0, :od, :oh, :ow]
        flat = vol.reshape(b, -1)
        if cache is not None:
            cache["x"] = x
            cache["stages"] = stages
        return flat[:, self.mask_idx] if self.mask_idx is not None else flat

    def backward(self, params, cache, dy):
        b = dy.shape[0]
        od, oh, ow = self.output_dims
        full = od * oh * ow
        if self.mask_idx is not None:
            dflat = np.zeros((b, full))
            dflat[:, self.mask_idx] = dy
        else:
            dflat = dy
        dvol = dflat.reshape(b, od, oh, ow)
        dt = np.zeros((b, 1, *self.grown))
        dt[:, 0, :od, :oh, :ow] = dvol
        grads = {}
        for i in range(self.n_stages - 1, -1, -1):
            u, z = cache["stages"][i]
            dz = dt if i == self.n_stages - 1 else dt * (z > 0)
            grads[f"head.stage{i}_bias"] = dz.sum(axis=(0, 2, 3, 4))
            grads[f"head.stage{i}_weight"] = np.einsum(
                "bodhw,bcdhwxyz->ocxyz", dz, _conv3d_windows(u)
            )
            w = params[f"head.stage{i}_weight"]
            du = np.einsum(
                "bodhwxyz,ocxyz->bcdhw",
                _conv3d_windows(dz),
                w[:, :, ::-1, ::-1, ::-1],
            )
            for axis, m in zip((4, 3, 2), reversed(self.up[i])):
                du = self._apply_axis(du, m.T, axis)
            dt = du
        dh = dt.reshape(b, self.hidden)
        grads["head.fc_weight"] = cache["x"].T @ dh
        grads["head.fc_bias"] = dh.sum(axis=0)
        dx = dh @ params["head.fc_weight"].T
        # hand grads back in param_names order so optimizer state iteration is stable
        return {name: grads[name] for name in self.param_names}, dx


def _make_head(cfg: EncoderConfig, voxel_mask=None):
    if cfg.head == "linear":
        return LinearHead(cfg.head_input_dim, cfg.voxels)
    return ConvHead(cfg.head_input_dim, cfg, voxel_mask)


# ------------------------------------------------------------ forward/backward


def _as_batch(features, cfg: EncoderConfig) -> np.ndarray:
    f = np.asarray(features, dtype=np.float64)
    if f.ndim == 3:
        f = f[None]
    if f.ndim != 4:
        raise ValueError(f"features must be (B, H, W, C) or (H, W, C), got shape {f.shape}")
    if f.shape[1:] != (cfg.feature_height, cfg.feature_width, cfg.channels):
        raise ValueError(
            f"feature shape {f.shape[1:]} does not match config "
            f"{(cfg.feature_height, cfg.feature_width, cfg.channels)}"
        )
    return f


def _blur_kernel(cfg: EncoderConfig) -> np.ndarray:
    return gaussian_kernel2d(cfg.blur_size, cfg.blur_sigma).weights


def _forward_batch(model: EncoderModel, f: np.ndarray, gaze_maps=None, cache=None):
    cfg = model.config
    mode = cfg.attention_mode
    b = f.shape[0]
    head = _make_head(cfg, model.voxel_mask)
    attention = None
    if mode == "learned":
        spre = channel_conv_same(f, model.params["attention_kernel"])
        r = np.maximum(spre, 0.0)
        s = correlate_same(r, _blur_kernel(cfg))
        attention = spatial_softmax(s)
        x = np.einsum("bhw,bhwc->bc", attention, f)
        if cache is not None:
            cache.update(spre=spre, attention=attention)
    elif mode == "none":
        x = f.sum(axis=(1, 2))
    elif mode == "nopool":
        x = f.reshape(b, -1)
    elif mode == "center":
        if model.fixed_attention is None:
            raise ValueError("center mode requires a fixed attention map on the model")
        attention = require_attention_map(model.fixed_attention)
        x = np.einsum("hw,bhwc->bc", attention, f)
    elif mode == "gaze":
        if gaze_maps is None:
            raise ValueError("gaze mode requires per-frame attention maps")
        attention = np.asarray(gaze_maps, dtype=np.float64)
        if attention.ndim == 2:
            attention = attention[None]
        if attention.shape != (b, cfg.feature_height, cfg.feature_width):
            raise ValueError(f"gaze maps shape {attention.shape} does not match batch {b} and feature grid")
        x = np.einsum("bhw,bhwc->bc", attention, f)
    else:  # pragma: no cover - guarded by validate()
        raise ValueError(f"unknown attention mode {mode!r}")
    y = head.forward(model.params, x, cache)
    if cache is not None:
        cache["head"] = head
    return y, attention


def encoder_forward(model: EncoderModel, features, gaze_map=None):
    """Run one frame (or a batch) through the model.

    Returns (predictions, attention) where attention is the map actually used
    for pooling, or None for the none/nopool regimes.
    """
    f = np.asarray(features, dtype=np.float64)
    single = f.ndim == 3
    y, att = _forward_batch(model, _as_batch(f, model.config), gaze_map)
    if single:
        return y[0], (att[0] if att is not None and att.ndim == 3 else att)
    return y, att


def encoder_loss(model: EncoderModel, features, targets, gaze_maps=None) -> float:
    y, _ = _forward_batch(model, _as_batch(features, model.config), gaze_maps)
    t = np.asarray(targets, dtype=np.float64).reshape(y.shape)
    return float(np.mean((y - t) ** 2))


def encoder_backward(model: EncoderModel, features, targets, gaze_maps=None, internals=None):
    """MSE loss plus exact gradients for every trainable tensor.

    Gradients cover the attention kernel (learned mode) through the softmax
    Jacobian, the blur and ReLU adjoints and the modulation product rule, and
    all head tensors. ``internals`` (a dict, optional) receives intermediate
    adjoints for inspection.
    """
    cfg = model.config
    f = _as_batch(features, cfg)
    cache = {}
    y, _ = _forward_batch(model, f, gaze_maps, cache)
    t = np.asarray(targets, dtype=np.float64).reshape(y.shape)
    resid = y - t
    loss = float(np.mean(resid**2))
    dy = (2.0 / resid.size) * resid
    head = cache["head"]
    grads, dx = head.backward(model.params, cache, dy)
    if cfg.attention_mode == "learned":
        attention = cache["attention"]
        da = np.einsum("bc,bhwc->bhw", dx, f)
        ds = attention * (da - np.sum(attention * da, axis=(1, 2), keepdims=True))
        blur = _blur_kernel(cfg)
        dr = correlate_same(ds, blur[::-1, ::-1])
        dspre = dr * (cache["spre"] > 0)
        k = model.params["attention_kernel"]
        kh, kw = k.shape[:2]
        padded = np.pad(f, [(0, 0), (kh // 2, kh // 2), (kw // 2, kw // 2), (0, 0)])
        win = sliding_window_view(padded, (kh, kw), axis=(1, 2))
        dkernel = np.einsum("bhw,bhwckl->klc", dspre, win)
        grads = {"attention_kernel": dkernel, **grads}
        if internals is not None:
            internals.update(d_saliency=ds, d_attention=da, attention=attention)
    if not np.isfinite(loss):
        raise RuntimeError("non-finite loss in encoder_backward")
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise RuntimeError(f"non-finite gradient for {name}")
    return loss, grads


# ------------------------------------------------------------------ training


class Adam:
    """Plain Adam: m and v moving averages with bias correction,
    step = lr * mhat / (sqrt(vhat) + eps)."""

    def __init__(self, learning_rate: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for name, g in grads.items():
            m = self.m.setdefault(name, np.zeros_like(g))
            v = self.v.setdefault(name, np.zeros_like(g))
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            mhat = m / (1.0 - b1**self.t)
            vhat = v / (1.0 - b2**self.t)
            params[name] -= self.lr * mhat / (np.sqrt(vhat) + self.eps)


def build_attention_inputs(
    cfg: EncoderConfig,
    fixations: FixationTable,
    train_frame_ids,
    val_frame_ids=None,
):
    """Center map, bandwidth, and per-frame gaze maps for fixed-map regimes.

    The bandwidth comes from cfg.gaze_sigma when set; otherwise it is selected
    by validation log-likelihood over cfg.sigma_candidates (which needs a
    non-empty validation frame list). Gaze maps for frames without fixations
    fall back to the center map.
    """
    gh, gw = cfg.feature_height, cfg.feature_width
    train_fix = fixations.subset(train_frame_ids)
    if len(train_fix) == 0:
        raise ValueError("no training fixations for the requested frames")
    if cfg.gaze_sigma is not None:
        sigma = float(cfg.gaze_sigma)
        dens = kde_density_map(
            train_fix.all_points(),
            sigma,
            gh,
            gw,
            domain_height=fixations.stimulus_height,
            domain_width=fixations.stimulus_width,
        )
        center = dens / dens.sum()
    else:
        val_fix = fixations.subset(val_frame_ids) if val_frame_ids is not None else None
        if val_fix is None or len(val_fix) == 0:
            raise ValueError("bandwidth selection needs validation fixations (or set gaze_sigma)")
        center, sigma = center_attention_map(train_fix, val_fix, cfg.sigma_candidates, gh, gw)

    def maps_for(frame_ids) -> np.ndarray:
        out = np.empty((len(frame_ids), gh, gw))
        for i, fid in enumerate(frame_ids):
            out[i] = gaze_attention_map(
                fixations.points_for_frame(fid),
                sigma,
                gh,
                gw,
                fixations.stimulus_height,
                fixations.stimulus_width,
                fallback=center,
            )
        return out

    return center, sigma, maps_for


def train_encoder(
    config: EncoderConfig,
    train,
    val=None,
    fixations: FixationTable | None = None,
    voxel_mask=None,
):
    """Fit a model with Adam on MSE; returns (model, trace).

    ``train`` and ``val`` are EncodingDataset-like objects (frame_ids,
    features (N, H, W, C), targets (N, V)). Targets are z-scored per voxel
    with training-set statistics (also applied to validation); the statistics
    ride along on the returned model. The trace is a list of
    (epoch, train_loss, val_loss) with val_loss None when no validation set
    is given. Full batch by default; config.batch_size turns on shuffled
    mini-batches. All randomness (init order, shuffles) flows from
    config.seed through one generator.
    """
    cfg = config.validate()
    feats = np.asarray(train.features, dtype=np.float64)
    targets = np.asarray(train.targets, dtype=np.float64)
    n = feats.shape[0]
    if n == 0:
        raise ValueError("training set is empty")
    if targets.shape != (n, cfg.voxels):
        raise ValueError(f"targets shape {targets.shape} does not match ({n}, {cfg.voxels})")
    _as_batch(feats, cfg)

    tmean = targets.mean(axis=0)
    tstd = targets.std(axis=0)
    tstd = np.where(tstd < DEGENERATE_STD, 1.0, tstd)
    tz = (targets - tmean) / tstd

    val_feats = val_tz = None
    if val is not None and len(val.frame_ids) > 0:
        val_feats = np.asarray(val.features, dtype=np.float64)
        val_tz = (np.asarray(val.targets, dtype=np.float64) - tmean) / tstd

    fixed_attention = None
    gaze_sigma = None
    gaze_train = gaze_val = None
    if cfg.attention_mode in ("center", "gaze"):
        if fixations is None:
            raise ValueError(f"{cfg.attention_mode} mode requires fixations")
        val_ids = val.frame_ids if val is not None else None
        fixed_attention, gaze_sigma, maps_for = build_attention_inputs(
            cfg, fixations, train.frame_ids, val_ids
        )
        if cfg.attention_mode == "gaze":
            gaze_train = maps_for(train.frame_ids)
            if val_feats is not None:
                gaze_val = maps_for(val.frame_ids)

    rng = np.random.default_rng(cfg.seed)
    params: dict[str, np.ndarray] = {}
    if cfg.attention_mode == "learned":
        ks, c = cfg.attention_kernel_size, cfg.channels
        bound = 1.0 / np.sqrt(ks * ks * c)
        params["attention_kernel"] = rng.uniform(-bound, bound, (ks, ks, c))
    head = _make_head(cfg, voxel_mask)
    params.update(head.init_params(rng))

    model = EncoderModel(
        config=cfg,
        params=params,
        fixed_attention=fixed_attention,
        voxel_mask=None if voxel_mask is None else np.asarray(voxel_mask).astype(bool),
        gaze_sigma=gaze_sigma,
        target_mean=tmean,
        target_std=tstd,
    )

    opt = Adam(cfg.learning_rate)
    trace: list[tuple[int, float, float | None]] = []
    for epoch in range(1, cfg.epochs + 1):
        if cfg.batch_size is None:
            order = np.arange(n)
            bounds = [(0, n)]
        else:
            order = rng.permutation(n)
            bounds = [(s, min(s + cfg.batch_size, n)) for s in range(0, n, cfg.batch_size)]
        seen = 0
        loss_sum = 0.0
        for lo, hi in bounds:
            idx = order[lo:hi]
            gm = gaze_train[idx] if gaze_train is not None else None
            loss, grads = encoder_backward(model, feats[idx], tz[idx], gm)
            if not np.isfinite(loss):
                raise RuntimeError(f"non-finite training loss at epoch {epoch}")
            opt.step(model.params, grads)
            loss_sum += loss * idx.size
            seen += idx.size
        train_loss = loss_sum / seen
        val_loss = None
        if val_feats is not None:
            val_loss = encoder_loss(model, val_feats, val_tz, gaze_val)
            if not np.isfinite(val_loss):
                raise RuntimeError(f"non-finite validation loss at epoch {epoch}")
        trace.append((epoch, train_loss, val_loss))
    return model, trace


# ---------------------------------------------------------------- checkpoints


def _param_filename(name: str) -> str:
    return name.replace(".", "__") + ".atn"


def save_model(model: EncoderModel, out_dir) -> None:
    """Write a checkpoint: key = value config plus one tensor file per array."""
    out = Path(out_dir)
    (out / "params").mkdir(parents=True, exist_ok=True)
    lines = model.config.to_kv_lines()
    lines.append(f"param_names = {','.join(model.params)}")
    lines.append(f"gaze_sigma_used = {'none' if model.gaze_sigma is None else repr(model.gaze_sigma)}")
    lines.append(f"has_fixed_attention = {int(model.fixed_attention is not None)}")
    lines.append(f"has_voxel_mask = {int(model.voxel_mask is not None)}")
    lines.append(f"has_target_stats = {int(model.target_mean is not None)}")
    (out / "model.cfg").write_text("\n".join(lines) + "\n")
    for name, arr in model.params.items():
        write_tensor(out / "params" / _param_filename(name), arr)
    if model.fixed_attention is not None:
        write_tensor(out / "fixed_attention.atn", model.fixed_attention)
    if model.voxel_mask is not None:
        write_tensor(out / "voxel_mask.atn", model.voxel_mask.astype(np.float64))
    if model.target_mean is not None:
        write_tensor(out / "target_mean.atn", model.target_mean)
        write_tensor(out / "target_std.atn", model.target_std)


def parse_kv_text(text: str) -> dict[str, str]:
    """Parse flat ``key = value`` lines; '#' starts a comment."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def load_model(model_dir) -> EncoderModel:
    d = Path(model_dir)
    cfg_path = d / "model.cfg"
    if not cfg_path.is_file():
        raise ValueError(f"{d} is not a model checkpoint (missing model.cfg)")
    kv = parse_kv_text(cfg_path.read_text())
    extras = {}
    for key in ("param_names", "gaze_sigma_used", "has_fixed_attention", "has_voxel_mask", "has_target_stats"):
        extras[key] = kv.pop(key)
    cfg = EncoderConfig.from_kv(kv).validate()
    params = {}
    for name in extras["param_names"].split(","):
        params[name] = read_tensor(d / "params" / _param_filename(name))
    fixed = read_tensor(d / "fixed_attention.atn") if extras["has_fixed_attention"] == "1" else None
    mask = read_tensor(d / "voxel_mask.atn").astype(bool) if extras["has_voxel_mask"] == "1" else None
    tmean = tstd = None
    if extras["has_target_stats"] == "1":
        tmean = read_tensor(d / "target_mean.atn")
        tstd = read_tensor(d / "target_std.atn")
    sigma = None if extras["gaze_sigma_used"] == "none" else float(extras["gaze_sigma_used"])
    return EncoderModel(
        config=cfg,
        params=params,
        fixed_attention=fixed,
        voxel_mask=mask,
        gaze_sigma=sigma,
        target_mean=tmean,
        target_std=tstd,
    )
