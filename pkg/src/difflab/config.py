"""Experiment configuration: ``key = value`` lines grouped under ``[section]`` headers."""

from __future__ import annotations

import configparser
import hashlib
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .data import HierarchySpec
from .errors import ConfigError
from .nn import SgdConfig

SMOOTHNESS_TEMPERATURES = (1.0, 1.5, 2.0, 3.0, 8.0, 64.0)


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(t) for t in text.replace(",", " ").split())


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(t) for t in text.replace(",", " ").split())


def _triples(text: str) -> tuple[tuple[int, int, int], ...]:
    out = []
    for chunk in text.split(";"):
        if chunk.strip():
            t = _ints(chunk)
            if len(t) != 3 or len(set(t)) != 3:
                raise ConfigError(f"class triple {chunk.strip()!r} needs three distinct ids")
            out.append(t)
    return tuple(out)


@dataclass(frozen=True)
class PhaseConfig:
    hidden: tuple[int, ...]
    sgd: SgdConfig


@dataclass(frozen=True)
class AnalysisConfig:
    eta: bool = True
    projection: bool = True
    smoothness: bool = True
    class_accuracy: bool = True
    dominance: bool = True
    eta_reference: float = 1.0
    class_triples: tuple[tuple[int, int, int], ...] = ((0, 1, 2),)
    dominance_factor: float = 100.0
    similar_frac: float = 0.15
    dissimilar_frac: float = 0.5
    semantic_sets: str | None = None


@dataclass(frozen=True)
class ExperimentConfig:
    data: HierarchySpec | None
    train_path: str | None
    val_path: str | None
    teacher: PhaseConfig
    student: PhaseConfig
    alpha_grid: tuple[float, ...]
    temperature_grid: tuple[float, ...]
    beta: float
    analyses: AnalysisConfig
    output_dir: Path
    seed: int = 0
    jobs: int = 1
    source_text: str = field(default="", compare=False, repr=False)

    def __post_init__(self):
        if not self.alpha_grid or not self.temperature_grid:
            raise ConfigError("alpha and temperature grids must be nonempty")
        if any(not 0 <= a < 1 for a in self.alpha_grid):
            raise ConfigError("every alpha must lie in [0, 1)")
        if any(not t > 0 for t in self.temperature_grid):
            raise ConfigError("temperatures must be positive")
        if len(set(self.alpha_grid)) != len(self.alpha_grid) or \
                len(set(self.temperature_grid)) != len(self.temperature_grid):
            raise ConfigError("grid values must be distinct")
        if 1.0 not in self.temperature_grid:
            raise ConfigError("temperature grid must contain 1")
        if self.analyses.eta_reference not in self.temperature_grid:
            raise ConfigError("eta_reference must be one of the grid temperatures")
        if not 0 <= self.beta <= 1:
            raise ConfigError("beta must lie in [0, 1]")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        if self.data is None and not (self.train_path and self.val_path):
            raise ConfigError("[data] needs either generator keys or train_path and val_path")

    def with_overrides(self, output_dir=None, seed=None, jobs=None) -> "ExperimentConfig":
        kw = {}
        if output_dir is not None:
            kw["output_dir"] = Path(output_dir)
        if seed is not None:
            kw["seed"] = int(seed)
            if self.data is not None:
                kw["data"] = replace(self.data, seed=int(seed))
        if jobs is not None:
            kw["jobs"] = int(jobs)
        return replace(self, **kw)

    @property
    def config_hash(self) -> str:
        """Hash of everything that influences results (not paths or job count)."""
        parts = [repr(self.data), self.train_path, self.val_path, repr(self.teacher),
                 repr(self.student), repr(self.alpha_grid), repr(self.temperature_grid),
                 repr(self.beta), repr(self.analyses), repr(self.seed)]
        return hashlib.sha256("\n".join(map(str, parts)).encode()).hexdigest()[:16]


_SGD_KEYS = {
    "learning_rate": float, "momentum": float, "epochs": int, "batch_size": int,
    "lr_decay_epochs": _ints, "lr_decay_factor": float,
}
_DATA_KEYS = {f.name: (int if f.type in ("int", int) else float)
              for f in fields(HierarchySpec)}


def _phase(sec, name) -> PhaseConfig:
    if sec is None:
        raise ConfigError(f"missing [{name}] section")
    sgd_kw = {}
    for key, conv in _SGD_KEYS.items():
        if key in sec:
            sgd_kw[key] = conv(sec[key])
    unknown = set(sec) - set(_SGD_KEYS) - {"hidden"}
    if unknown:
        raise ConfigError(f"[{name}]: unknown keys {sorted(unknown)}")
    hidden = _ints(sec.get("hidden", ""))
    if any(h < 1 for h in hidden):
        raise ConfigError(f"[{name}]: hidden sizes must be positive")
    try:
        return PhaseConfig(hidden, SgdConfig(**sgd_kw))
    except ValueError as exc:
        raise ConfigError(f"[{name}]: {exc}") from exc


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def parse_config(text: str, base_dir: Path | None = None) -> ExperimentConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",), interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    base_dir = base_dir or Path.cwd()
    known = {"run", "data", "teacher", "student", "grid", "analysis"}
    extra = set(cp.sections()) - known
    if extra:
        raise ConfigError(f"unknown sections {sorted(extra)}")

    def sec(name):
        return dict(cp[name]) if cp.has_section(name) else None

    try:
        run = sec("run") or {}
        seed = int(run.get("seed", 0))
        data_sec = sec("data") or {}
        train_path = data_sec.pop("train_path", None)
        val_path = data_sec.pop("val_path", None)
        unknown = set(data_sec) - set(_DATA_KEYS)
        if unknown:
            raise ConfigError(f"[data]: unknown keys {sorted(unknown)}")
        spec = None
        if train_path is None:
            kw = {k: _DATA_KEYS[k](v) for k, v in data_sec.items()}
            kw.setdefault("seed", seed)
            spec = HierarchySpec(**kw)
        else:
            train_path = str((base_dir / train_path).resolve())
            val_path = str((base_dir / val_path).resolve()) if val_path else None

        grid = sec("grid")
        if grid is None:
            raise ConfigError("missing [grid] section")
        an = sec("analysis") or {}
        an_kw = {}
        for key in ("eta", "projection", "smoothness", "class_accuracy", "dominance"):
            if key in an:
                an_kw[key] = _bool(an.pop(key))
        for key in ("eta_reference", "dominance_factor", "similar_frac", "dissimilar_frac"):
            if key in an:
                an_kw[key] = float(an.pop(key))
        if "class_triples" in an:
            an_kw["class_triples"] = _triples(an.pop("class_triples"))
        if "semantic_sets" in an:
            an_kw["semantic_sets"] = str((base_dir / an.pop("semantic_sets")).resolve())
        if an:
            raise ConfigError(f"[analysis]: unknown keys {sorted(an)}")

        return ExperimentConfig(
            data=spec, train_path=train_path, val_path=val_path,
            teacher=_phase(sec("teacher"), "teacher"),
            student=_phase(sec("student"), "student"),
            alpha_grid=_floats(grid.get("alpha", "")),
            temperature_grid=_floats(grid.get("temperature", "")),
            beta=float(grid.get("beta", 1.0)),
            analyses=AnalysisConfig(**an_kw),
            output_dir=(base_dir / run.get("output_dir", "runs/default")),
            seed=seed, jobs=int(run.get("jobs", 1)), source_text=text)
    except ConfigError:
        raise
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    return parse_config(text, path.parent)


DEFAULT_CONFIG = """\
# Default desk-scale experiment: 4 semantic groups x 2 classes.
[run]
seed = 1
output_dir = runs/default
jobs = 1

[data]
num_groups = 4
classes_per_group = 2
input_dim = 16
group_spread = 2.5
class_spread = 0.625
noise_sigma = 0.25
samples_per_class_train = 150
samples_per_class_val = 150

[teacher]
hidden = 64, 32
learning_rate = 0.05
momentum = 0.9
epochs = 40
batch_size = 32
lr_decay_epochs = 30
lr_decay_factor = 0.1

[student]
hidden = 32, 4
learning_rate = 0.03
momentum = 0.9
epochs = 60
batch_size = 64
lr_decay_epochs = 45
lr_decay_factor = 0.1

[grid]
alpha = 0.0, 0.1
temperature = 1, 2, 4
beta = 1

[analysis]
eta = true
projection = true
smoothness = true
class_accuracy = true
dominance = true
eta_reference = 1
class_triples = 0 1 2
dominance_factor = 100
"""


def default_config(base_dir: Path | None = None) -> ExperimentConfig:
    return parse_config(DEFAULT_CONFIG, base_dir)
