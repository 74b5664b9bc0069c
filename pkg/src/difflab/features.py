"""Penultimate-feature dumps (``FEAT`` binary format)."""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from ._binio import Reader, f64_bytes, read_file
from .errors import ValidationError
from .geometry import FeatureMatrix, Split
from .nn import NetworkParams, penultimate

FEAT_MAGIC = b"FEAT"
FEAT_VERSION = 1
HEADER = struct.Struct("<4sHQIIdB")
_SPLIT_CODE = {Split.TRAIN: 0, Split.VAL: 1}


def extract_features(net: NetworkParams, data, temperature_tag: float = 1.0,
                     split: Split = Split.TRAIN) -> FeatureMatrix:
    return FeatureMatrix(penultimate(net, data.inputs), data.labels.copy(), net.num_classes,
                         Split(split), float(temperature_tag))


def write_features(features: FeatureMatrix, path) -> None:
    n, h = features.rows.shape
    head = HEADER.pack(FEAT_MAGIC, FEAT_VERSION, n, h, features.num_classes,
                       features.temperature_tag, _SPLIT_CODE[features.split])
    Path(path).write_bytes(head + f64_bytes(features.rows)
                           + np.asarray(features.labels, dtype="<u4").tobytes())


def dump_features(net: NetworkParams, data, path, temperature_tag: float = 1.0,
                  split: Split = Split.TRAIN) -> FeatureMatrix:
    feats = extract_features(net, data, temperature_tag, split)
    write_features(feats, path)
    return feats


def load_features(path, expected_dim: int | None = None) -> FeatureMatrix:
    r = Reader(read_file(path), path)
    r.magic(FEAT_MAGIC)
    version, n, h, k, temp, split = r.unpack("HQIIdB")
    if version != FEAT_VERSION:
        r.fail(f"unsupported version {version}", 4)
    if split not in (0, 1):
        r.fail(f"bad split tag {split}", HEADER.size - 1)
    if not temp > 0:
        r.fail(f"bad temperature tag {temp}", HEADER.size - 9)
    rows = r.f64(n * h).reshape(n, h)
    labels = r.array("<u4", n).astype(np.int64)
    r.finish()
    if expected_dim is not None and h != expected_dim:
        raise ValidationError(f"{path}: feature dim {h} != expected {expected_dim}")
    if n and labels.max() >= k:
        raise ValidationError(f"{path}: label {labels.max()} >= K={k}")
    return FeatureMatrix(rows, labels, int(k), Split.TRAIN if split == 0 else Split.VAL, temp)
