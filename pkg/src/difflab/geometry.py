"""Centroid geometry of penultimate representations and the diffusion index."""

from __future__ import annotations

import csv
import enum
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import ContractError, DegenerateGeometryError, ParseError, ShapeError
from .nn import DenseLayer, NetworkParams, predict


class Split(enum.Enum):
    TRAIN = "train"
    VAL = "val"


class Variant(enum.Enum):
    CENTROID = "centroid"
    PAIRWISE = "pairwise"


@dataclass
class FeatureMatrix:
    rows: np.ndarray
    labels: np.ndarray
    num_classes: int
    split: Split = Split.TRAIN
    temperature_tag: float = 1.0

    def __post_init__(self):
        self.rows = np.asarray(self.rows, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.split = Split(self.split)
        if self.rows.ndim != 2 or self.labels.shape != (self.rows.shape[0],):
            raise ShapeError("rows must be N x h with N aligned labels")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise IndexError(f"labels must lie in [0, {self.num_classes})")
        if not self.temperature_tag > 0:
            raise ValueError("temperature_tag must be positive")

    @property
    def dim(self) -> int:
        return self.rows.shape[1]

    def of_class(self, k: int) -> np.ndarray:
        return self.rows[self.labels == k]


@dataclass
class ClassCentroids:
    centroids: np.ndarray  # K x h, NaN rows where counts == 0
    counts: np.ndarray

    @property
    def empty(self) -> np.ndarray:
        return self.counts == 0

    def require(self, classes: Iterable[int]):
        bad = [k for k in classes if self.counts[k] == 0]
        if bad:
            raise ContractError(f"classes {bad} have no samples")


@dataclass(frozen=True)
class SemanticSets:
    target: int
    similar: frozenset
    dissimilar: frozenset

    def __post_init__(self):
        object.__setattr__(self, "similar", frozenset(int(c) for c in self.similar))
        object.__setattr__(self, "dissimilar", frozenset(int(c) for c in self.dissimilar))
        if not self.similar or not self.dissimilar:
            raise ContractError(f"target {self.target}: S1 and S2 must both be nonempty")
        if self.similar & self.dissimilar:
            raise ContractError(f"target {self.target}: S1 and S2 overlap")
        if self.target in self.similar | self.dissimilar:
            raise ContractError(f"target {self.target} cannot be in its own sets")

    @property
    def members(self) -> list[int]:
        return sorted(self.similar | self.dissimilar)


@dataclass(frozen=True)
class DiffusionRow:
    target: int
    split: Split
    variant: Variant
    t1: float
    t2: float
    eta_s1: float
    eta_s2: float


def centroids(features: FeatureMatrix, num_classes: int | None = None) -> ClassCentroids:
    k = features.num_classes if num_classes is None else num_classes
    if features.rows.shape[0] < 1:
        raise ContractError("need at least one sample")
    if features.labels.max() >= k:
        raise IndexError(f"label {features.labels.max()} >= K={k}")
    counts = np.bincount(features.labels, minlength=k)
    sums = np.zeros((k, features.dim))
    np.add.at(sums, features.labels, features.rows)
    with np.errstate(invalid="ignore", divide="ignore"):
        cents = sums / counts[:, None]
    cents[counts == 0] = np.nan
    return ClassCentroids(cents, counts)


def _sqdist(a: np.ndarray, b: np.ndarray) -> float:
    d = a - b
    return float(d @ d)


def _relative_distances(dist: dict[int, float], target: int) -> dict[int, float]:
    r = math.fsum(dist.values())
    if not r > 0:
        raise DegenerateGeometryError(
            f"target {target}: all centroids in S1 and S2 coincide with it (R = 0)")
    return {k: v / r for k, v in dist.items()}


def relative_distance(cents: ClassCentroids, pi: int, k: int, sets: SemanticSets) -> float:
    """``||c_pi - c_k||^2`` divided by the sum over every class in S1 and S2."""
    members = sets.members
    if k not in members:
        raise ContractError(f"class {k} is in neither S1 nor S2")
    if pi != sets.target:
        raise ContractError(f"sets were built for target {sets.target}, not {pi}")
    cents.require([pi, *members])
    dist = {m: _sqdist(cents.centroids[pi], cents.centroids[m]) for m in members}
    return _relative_distances(dist, pi)[k]


def _centroid_sqdists(feat: FeatureMatrix, sets: SemanticSets) -> dict[int, float]:
    cents = centroids(feat)
    cents.require([sets.target, *sets.members])
    c = cents.centroids
    return {m: _sqdist(c[sets.target], c[m]) for m in sets.members}


def mean_cross_sqdist(a: np.ndarray, b: np.ndarray) -> float:
    """Mean of ``||a_i - b_j||^2`` over every pair (i, j).

    Uses the identity ``||mean a - mean b||^2 + var(a) + var(b)`` with
    population (1/n) variances summed over coordinates.
    """
    if len(a) == 0 or len(b) == 0:
        raise ContractError("both point sets must be nonempty")
    ma, mb = a.mean(axis=0), b.mean(axis=0)
    va = float(np.sum((a - ma) ** 2)) / len(a)
    vb = float(np.sum((b - mb) ** 2)) / len(b)
    return _sqdist(ma, mb) + va + vb


def _pairwise_sqdists(feat: FeatureMatrix, sets: SemanticSets) -> dict[int, float]:
    own = feat.of_class(sets.target)
    out = {}
    for m in sets.members:
        other = feat.of_class(m)
        if len(own) == 0 or len(other) == 0:
            raise ContractError(f"class {sets.target if len(own) == 0 else m} has no samples")
        out[m] = mean_cross_sqdist(own, other)
    return out


def _eta(dist1: dict[int, float], dist2: dict[int, float], sets: SemanticSets,
         over: str) -> float:
    group = {"S1": sets.similar, "S2": sets.dissimilar}[over]
    if not group:
        raise ContractError(f"{over} is empty")
    d1 = _relative_distances(dist1, sets.target)
    d2 = _relative_distances(dist2, sets.target)
    zero = [k for k in sorted(group) if d1[k] == 0.0]
    if zero:
        raise DegenerateGeometryError(
            f"target {sets.target}: classes {zero} coincide with it at the reference temperature")
    return math.fsum((d2[k] - d1[k]) / d1[k] for k in sorted(group)) / len(group)


def _check_pair(feat_t1: FeatureMatrix, feat_t2: FeatureMatrix):
    if feat_t1.num_classes != feat_t2.num_classes:
        raise ContractError("feature matrices disagree on K")
    if feat_t1.split is not feat_t2.split:
        raise ContractError("feature matrices come from different splits")
    if feat_t1.temperature_tag == feat_t2.temperature_tag:
        raise ContractError("feature matrices share the same temperature tag")


def diffusion_index(feat_t1: FeatureMatrix, feat_t2: FeatureMatrix, sets: SemanticSets,
                    over: str = "S1") -> float:
    """Average fractional change of relative centroid distance from T1 to T2.

    Negative values over S1 mean the target moved (relatively) closer to its
    similar classes. Multiply by 100 for a percentage.
    """
    _check_pair(feat_t1, feat_t2)
    return _eta(_centroid_sqdists(feat_t1, sets), _centroid_sqdists(feat_t2, sets), sets, over)


def diffusion_index_pairwise(feat_t1: FeatureMatrix, feat_t2: FeatureMatrix,
                             sets: SemanticSets, over: str = "S1") -> float:
    """As :func:`diffusion_index`, with mean cross-class pairwise distances."""
    _check_pair(feat_t1, feat_t2)
    return _eta(_pairwise_sqdists(feat_t1, sets), _pairwise_sqdists(feat_t2, sets), sets, over)


def diffusion_rows(feat_t1: FeatureMatrix, feat_t2: FeatureMatrix,
                   sets: SemanticSets) -> list[DiffusionRow]:
    out = []
    for variant, fn in ((Variant.CENTROID, diffusion_index),
                        (Variant.PAIRWISE, diffusion_index_pairwise)):
        out.append(DiffusionRow(sets.target, feat_t1.split, variant,
                                feat_t1.temperature_tag, feat_t2.temperature_tag,
                                fn(feat_t1, feat_t2, sets, "S1"),
                                fn(feat_t1, feat_t2, sets, "S2")))
    return out


def select_semantic_sets(cents: ClassCentroids, pi: int, similar_frac: float,
                         dissimilar_frac: float) -> SemanticSets:
    """Nearest and farthest classes to ``pi`` by squared centroid distance.

    ``ceil(frac * (K-1))`` classes go into each set; ties are broken by
    ascending class index, and the far set is drawn from what the near set
    left over.
    """
    if not (0 < similar_frac < 1 and 0 < dissimilar_frac < 1):
        raise ContractError("fractions must lie in (0, 1)")
    k = cents.centroids.shape[0]
    others = [c for c in range(k) if c != pi]
    n1 = math.ceil(similar_frac * (k - 1))
    n2 = math.ceil(dissimilar_frac * (k - 1))
    if n1 + n2 > len(others):
        raise ContractError(f"bands overlap: {n1} similar + {n2} dissimilar > {len(others)}")
    cents.require([pi, *others])
    d = {c: _sqdist(cents.centroids[pi], cents.centroids[c]) for c in others}
    near = sorted(others, key=lambda c: (d[c], c))[:n1]
    rest = [c for c in others if c not in set(near)]
    far = sorted(rest, key=lambda c: (-d[c], c))[:n2]
    return SemanticSets(pi, frozenset(near), frozenset(far))


def set_consistency(a: SemanticSets, b: SemanticSets) -> tuple[float, float]:
    """Fraction of ``a``'s S1 (and S2) that ``b`` also contains."""
    if a.target != b.target:
        raise ContractError("sets refer to different targets")
    return (len(a.similar & b.similar) / len(a.similar),
            len(a.dissimilar & b.dissimilar) / len(a.dissimilar))


def cluster_tightness(features: FeatureMatrix) -> np.ndarray:
    """Per-class mean squared distance to the class centroid (NaN if empty)."""
    cents = centroids(features)
    out = np.full(features.num_classes, np.nan)
    for k in range(features.num_classes):
        rows = features.of_class(k)
        if len(rows):
            out[k] = float(np.mean(np.sum((rows - cents.centroids[k]) ** 2, axis=1)))
    return out


def template_distance(x: np.ndarray, final_layer: DenseLayer, k: int) -> float:
    """``||[x; 1] - [w_k; b_k]||^2`` against the full class template."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (final_layer.in_dim,):
        raise ShapeError(f"feature of shape {x.shape} vs template dim {final_layer.in_dim}")
    return _sqdist(np.append(x, 1.0), final_layer.template(k))


@dataclass(frozen=True)
class ClassAccuracy:
    per_class: np.ndarray  # NaN for classes absent from the data
    mean: float


def class_accuracy(net: NetworkParams, data) -> ClassAccuracy:
    pred = predict(net, data.inputs)
    k = net.num_classes
    total = np.bincount(data.labels, minlength=k)
    correct = np.bincount(data.labels[pred == data.labels], minlength=k)
    with np.errstate(invalid="ignore", divide="ignore"):
        per = correct / total
    per = np.where(total > 0, per, np.nan)
    return ClassAccuracy(per, float(np.nanmean(per)))


_SET_LINE = re.compile(
    r"^\s*target\s*=\s*(\d+)\s*;\s*S1\s*=\s*([\d,\s]*);\s*S2\s*=\s*([\d,\s]*?)\s*;?\s*$")


def parse_semantic_sets(text: str, path=None) -> list[SemanticSets]:
    """Parse ``target=<id>; S1=<id,...>; S2=<id,...>`` lines (``#`` comments ok)."""
    out, offset = [], 0
    for line in text.splitlines(keepends=True):
        body = line.split("#", 1)[0]
        if body.strip():
            m = _SET_LINE.match(body)
            if not m:
                raise ParseError(f"malformed semantic-set line {line.strip()!r}", offset, path)
            ids = [[int(t) for t in g.split(",") if t.strip()] for g in m.groups()[1:]]
            out.append(SemanticSets(int(m.group(1)), frozenset(ids[0]), frozenset(ids[1])))
        offset += len(line.encode())
    return out


def load_semantic_sets(path) -> list[SemanticSets]:
    return parse_semantic_sets(Path(path).read_text(), path)


def format_semantic_sets(sets: Iterable[SemanticSets]) -> str:
    return "".join(
        f"target={s.target}; S1={','.join(map(str, sorted(s.similar)))}; "
        f"S2={','.join(map(str, sorted(s.dissimilar)))}\n" for s in sets)


def fmt_float(x) -> str:
    """Shortest round-tripping text for a float."""
    return repr(float(x))


DIFFUSION_COLUMNS = ("target", "split", "variant", "T1", "T2", "eta_S1", "eta_S2")


def write_diffusion_csv(rows: Iterable[DiffusionRow], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(DIFFUSION_COLUMNS)
        for r in rows:
            w.writerow([r.target, r.split.value, r.variant.value, *map(
                fmt_float, (r.t1, r.t2, r.eta_s1, r.eta_s2))])


def read_diffusion_csv(path) -> list[DiffusionRow]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [DiffusionRow(int(r["target"]), Split(r["split"]), Variant(r["variant"]),
                         float(r["T1"]), float(r["T2"]), float(r["eta_S1"]),
                         float(r["eta_S2"])) for r in rows]
