"""Dataset plumbing: fixation CSVs, manifests, and lag-aligned pairing.

A manifest is a JSON file tying together per-split (frame_id, feature file)
lists, the response matrix, the fixation table, and the stimulus geometry.
Feature file paths are stored relative to the manifest's directory so a
dataset directory can be moved wholesale.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .attention import FixationTable
from .tensorfile import read_tensor

__all__ = [
    "FIXATION_HEADER",
    "load_fixations",
    "save_fixations",
    "DatasetManifest",
    "EncodingDataset",
    "pair_dataset",
]

FIXATION_HEADER = ["frame_id", "subject_id", "x", "y"]


def load_fixations(path, stimulus_height: int, stimulus_width: int) -> FixationTable:
    """Read a fixation CSV (header frame_id,subject_id,x,y) with validation.

    Bad rows (non-numeric fields, out-of-bounds coordinates under the
    half-open [0, W) x [0, H) convention) are all reported at once with their
    line numbers. An empty body is a valid, empty table.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file (missing header)") from None
        if [h.strip() for h in header] != FIXATION_HEADER:
            raise ValueError(f"{path}: expected header {','.join(FIXATION_HEADER)}, got {','.join(header)}")
        frame_ids, subject_ids, xs, ys = [], [], [], []
        bad = []
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 4:
                bad.append((lineno, "wrong field count"))
                continue
            try:
                fid = int(row[0])
                sid = int(row[1])
                x = float(row[2])
                y = float(row[3])
            except ValueError:
                bad.append((lineno, "non-numeric field"))
                continue
            if fid < 0 or sid < 0:
                bad.append((lineno, "negative id"))
                continue
            if not (0 <= x < stimulus_width and 0 <= y < stimulus_height):
                bad.append((lineno, f"coordinates ({x}, {y}) out of bounds"))
                continue
            frame_ids.append(fid)
            subject_ids.append(sid)
            xs.append(x)
            ys.append(y)
    if bad:
        detail = "; ".join(f"line {ln}: {why}" for ln, why in bad[:20])
        more = f" (+{len(bad) - 20} more)" if len(bad) > 20 else ""
        raise ValueError(f"{path}: {len(bad)} invalid rows: {detail}{more}")
    return FixationTable(
        frame_id=np.asarray(frame_ids, dtype=np.int64),
        subject_id=np.asarray(subject_ids, dtype=np.int64),
        x=np.asarray(xs, dtype=np.float64),
        y=np.asarray(ys, dtype=np.float64),
        stimulus_height=stimulus_height,
        stimulus_width=stimulus_width,
    )


def save_fixations(table: FixationTable, path) -> None:
    # repr() floats so load(save(t)) reproduces coordinates exactly
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(FIXATION_HEADER)
        for fid, sid, x, y in zip(table.frame_id, table.subject_id, table.x, table.y):
            writer.writerow([int(fid), int(sid), repr(float(x)), repr(float(y))])


@dataclass
class DatasetManifest:
    """Frame-to-file bookkeeping for one dataset directory."""

    splits: dict  # split name -> list of (frame_id, relative feature path)
    responses: str
    fixations: str | None
    lag_seconds: int
    stimulus_height: int
    stimulus_width: int
    split_ratios: str = ""
    extras: dict = field(default_factory=dict)

    def validate(self) -> "DatasetManifest":
        if self.lag_seconds < 0:
            raise ValueError("lag_seconds must be non-negative")
        if self.stimulus_height < 1 or self.stimulus_width < 1:
            raise ValueError("stimulus dims must be positive")
        for name, entries in self.splits.items():
            ids = [fid for fid, _ in entries]
            if len(set(ids)) != len(ids):
                raise ValueError(f"split {name!r} repeats frame_ids")
            if any(fid < 0 for fid in ids):
                raise ValueError(f"split {name!r} has negative frame_ids")
        return self

    def to_json_dict(self) -> dict:
        return {
            "splits": {k: [[int(fid), str(p)] for fid, p in v] for k, v in self.splits.items()},
            "responses": self.responses,
            "fixations": self.fixations,
            "lag_seconds": self.lag_seconds,
            "stimulus_height": self.stimulus_height,
            "stimulus_width": self.stimulus_width,
            "split_ratios": self.split_ratios,
            "extras": self.extras,
        }

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json_dict(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path) -> "DatasetManifest":
        path = Path(path)
        try:
            raw = json.loads(path.read_text())
        except json.JSONDecodeError as e:
            raise ValueError(f"{path}: not valid JSON ({e})") from None
        try:
            m = cls(
                splits={k: [(int(fid), str(p)) for fid, p in v] for k, v in raw["splits"].items()},
                responses=raw["responses"],
                fixations=raw.get("fixations"),
                lag_seconds=int(raw["lag_seconds"]),
                stimulus_height=int(raw["stimulus_height"]),
                stimulus_width=int(raw["stimulus_width"]),
                split_ratios=raw.get("split_ratios", ""),
                extras=raw.get("extras", {}),
            )
        except (KeyError, TypeError) as e:
            raise ValueError(f"{path}: malformed manifest ({e!r})") from None
        return m.validate()

    def frame_ids(self, split: str):
        return [fid for fid, _ in self.splits[split]]

    def resolve(self, base_dir, rel: str) -> Path:
        return Path(base_dir) / rel

    def load_features(self, split: str, base_dir) -> tuple[np.ndarray, np.ndarray]:
        """Stack one split's feature tensors: (frame_ids, (N, ...) array)."""
        entries = self.splits[split]
        if not entries:
            raise ValueError(f"split {split!r} is empty")
        arrays, ids = [], []
        for fid, rel in entries:
            p = self.resolve(base_dir, rel)
            if not p.is_file():
                raise ValueError(f"missing feature file {p}")
            arrays.append(read_tensor(p))
            ids.append(fid)
        shapes = {a.shape for a in arrays}
        if len(shapes) > 1:
            raise ValueError(f"split {split!r} mixes feature shapes {sorted(shapes)}")
        return np.asarray(ids, dtype=np.int64), np.stack(arrays)


@dataclass
class EncodingDataset:
    """Lag-aligned (features, targets) pairs for one split."""

    frame_ids: np.ndarray
    features: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        if len(self.frame_ids) != len(self.features) or len(self.features) != len(self.targets):
            raise ValueError("frame_ids, features, and targets must align")

    def __len__(self) -> int:
        return len(self.frame_ids)


def pair_dataset(manifest: DatasetManifest, base_dir, responses=None, lag: int | None = None):
    """Align features at t with responses at t + lag for every split.

    Frame ids index response rows directly; frames whose lagged row falls past
    the end of the response matrix are dropped. Returns (datasets, dropped)
    where datasets maps split name -> EncodingDataset and dropped maps split
    name -> number of dropped frames.
    """
    if responses is None:
        responses = read_tensor(manifest.resolve(base_dir, manifest.responses))
    r = np.asarray(responses, dtype=np.float64)
    if r.ndim != 2:
        raise ValueError(f"responses must be (T, V), got shape {r.shape}")
    use_lag = manifest.lag_seconds if lag is None else int(lag)
    if use_lag < 0:
        raise ValueError("lag must be non-negative")
    datasets, dropped = {}, {}
    for split in manifest.splits:
        ids, feats = manifest.load_features(split, base_dir)
        keep = ids + use_lag < r.shape[0]
        dropped[split] = int((~keep).sum())
        datasets[split] = EncodingDataset(
            frame_ids=ids[keep],
            features=feats[keep],
            targets=r[ids[keep] + use_lag],
        )
    return datasets, dropped
