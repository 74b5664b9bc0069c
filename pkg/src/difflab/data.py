"""Hierarchical Gaussian-mixture datasets with known semantic groups."""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._binio import Reader, f64_bytes, read_file
from .errors import ContractError, SpecError, ValidationError

DSET_MAGIC = b"DSET"
DSET_VERSION = 1


@dataclass(frozen=True)
class HierarchySpec:
    num_groups: int = 4
    classes_per_group: int = 2
    input_dim: int = 16
    group_spread: float = 10.0
    class_spread: float = 3.0
    noise_sigma: float = 1.0
    samples_per_class_train: int = 150
    samples_per_class_val: int = 150
    seed: int = 0

    def __post_init__(self):
        for name in ("num_groups", "classes_per_group", "input_dim",
                     "samples_per_class_train", "samples_per_class_val"):
            if int(getattr(self, name)) < 1:
                raise SpecError(f"{name} must be a positive integer")
        for name in ("group_spread", "class_spread", "noise_sigma"):
            if not getattr(self, name) > 0:
                raise SpecError(f"{name} must be positive")
        if not self.class_spread < self.group_spread:
            raise SpecError("class_spread must be smaller than group_spread")
        if self.seed < 0:
            raise SpecError("seed must be unsigned")

    @property
    def num_classes(self) -> int:
        return self.num_groups * self.classes_per_group


@dataclass
class LabeledDataset:
    inputs: np.ndarray
    labels: np.ndarray
    num_classes: int
    semantic_groups: dict[int, int] | None = field(default=None)

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.inputs.ndim != 2:
            raise ValidationError("inputs must be a 2-D matrix")
        if self.labels.shape != (self.inputs.shape[0],):
            raise ValidationError("labels must align with input rows")
        if self.num_classes < 1:
            raise ValidationError("num_classes must be positive")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise ValidationError(f"labels must lie in [0, {self.num_classes})")

    def __len__(self):
        return self.inputs.shape[0]

    @property
    def input_dim(self) -> int:
        return self.inputs.shape[1]

    def __eq__(self, other):
        if not isinstance(other, LabeledDataset):
            return NotImplemented
        return (self.num_classes == other.num_classes
                and self.semantic_groups == other.semantic_groups
                and self.inputs.shape == other.inputs.shape
                and np.array_equal(self.inputs, other.inputs)
                and np.array_equal(self.labels, other.labels))


def _directions(rng: np.random.Generator, count: int, dim: int) -> np.ndarray:
    """Unit vectors that are mutually orthogonal when ``count <= dim``.

    Beyond ``dim`` directions, the remainder are random unit vectors.
    """
    out = np.empty((count, dim))
    n_orth = min(count, dim)
    q, r = np.linalg.qr(rng.standard_normal((dim, n_orth)))
    q *= np.sign(np.diag(r))
    out[:n_orth] = q.T
    if count > dim:
        extra = rng.standard_normal((count - dim, dim))
        out[dim:] = extra / np.linalg.norm(extra, axis=1, keepdims=True)
    return out


def class_means(spec: HierarchySpec) -> np.ndarray:
    """The K x input_dim matrix of class means generated for ``spec``."""
    rng = np.random.default_rng([spec.seed, 0])
    anchors = spec.group_spread * _directions(rng, spec.num_groups, spec.input_dim)
    means = np.empty((spec.num_classes, spec.input_dim))
    for g in range(spec.num_groups):
        offsets = spec.class_spread * _directions(rng, spec.classes_per_group, spec.input_dim)
        for j in range(spec.classes_per_group):
            means[g * spec.classes_per_group + j] = anchors[g] + offsets[j]
    return means


def _draw(spec, means, rng, per_class):
    k = spec.num_classes
    labels = np.repeat(np.arange(k), per_class)
    noise = rng.standard_normal((k * per_class, spec.input_dim)) * spec.noise_sigma
    return means[labels] + noise, labels


def generate(spec: HierarchySpec) -> tuple[LabeledDataset, LabeledDataset]:
    """Draw independent train and validation splits for ``spec``.

    Classes ``g*classes_per_group .. (g+1)*classes_per_group - 1`` form group ``g``.
    """
    means = class_means(spec)
    groups = {c: c // spec.classes_per_group for c in range(spec.num_classes)}
    train_x, train_y = _draw(spec, means, np.random.default_rng([spec.seed, 1]),
                             spec.samples_per_class_train)
    val_x, val_y = _draw(spec, means, np.random.default_rng([spec.seed, 2]),
                         spec.samples_per_class_val)
    return (LabeledDataset(train_x, train_y, spec.num_classes, dict(groups)),
            LabeledDataset(val_x, val_y, spec.num_classes, dict(groups)))


def ground_truth_sets(data: LabeledDataset, pi: int):
    """Similar set = same-group classes, dissimilar set = everything else."""
    from .geometry import SemanticSets

    if data.semantic_groups is None:
        raise ContractError("dataset carries no semantic group map")
    if not 0 <= pi < data.num_classes:
        raise IndexError(f"class {pi} out of range")
    g = data.semantic_groups[pi]
    s1 = frozenset(c for c, gc in data.semantic_groups.items() if gc == g and c != pi)
    s2 = frozenset(c for c, gc in data.semantic_groups.items() if gc != g)
    return SemanticSets(pi, s1, s2)


def save_dataset(data: LabeledDataset, path) -> None:
    n, dim = data.inputs.shape
    has_groups = data.semantic_groups is not None
    parts = [DSET_MAGIC, struct.pack("<HIIQB", DSET_VERSION, data.num_classes, dim, n,
                                     int(has_groups))]
    if has_groups:
        table = [data.semantic_groups.get(c, -1) for c in range(data.num_classes)]
        parts.append(np.asarray(table, dtype="<i4").tobytes())
    parts.append(f64_bytes(data.inputs))
    parts.append(np.asarray(data.labels, dtype="<u4").tobytes())
    Path(path).write_bytes(b"".join(parts))


def load_dataset(path) -> LabeledDataset:
    r = Reader(read_file(path), path)
    r.magic(DSET_MAGIC)
    version, k, dim, n, has_groups = r.unpack("HIIQB")
    if version != DSET_VERSION:
        r.fail(f"unsupported version {version}", 4)
    if has_groups not in (0, 1):
        r.fail("bad group-map flag", r.pos - 1)
    groups = None
    if has_groups:
        table = r.array("<i4", k)
        groups = {c: int(g) for c, g in enumerate(table) if g >= 0}
    inputs = r.f64(n * dim).reshape(n, dim)
    label_offset = r.pos
    labels = r.array("<u4", n).astype(np.int64)
    r.finish()
    if n and labels.max() >= k:
        bad = int(np.argmax(labels >= k))
        raise ValidationError(
            f"{path}: label {labels[bad]} >= K={k} at byte offset {label_offset + 4 * bad}")
    return LabeledDataset(inputs, labels, int(k), groups)
