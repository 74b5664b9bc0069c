"""Experiment orchestration: teachers, distillation grid, analyses and report.

Every phase reads and writes artifacts under ``cfg.output_dir``; a phase
only depends on files produced by the previous ones, so phases can be
re-run independently. Grid cells run with ``seed = base_seed + cell_index``
(teachers first, then students in alpha-major order).
"""

from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import geometry as geo
from . import smoothness as sm
from .config import SMOOTHNESS_TEMPERATURES, ExperimentConfig
from .data import LabeledDataset, generate, ground_truth_sets, load_dataset, save_dataset
from .errors import (BracketError, ContractError, DegenerateGeometryError, DependencyError,
                     DifflabError, MonotonicityError)
from .features import dump_features, load_features
from .geometry import Split, fmt_float
from .nn import SgdConfig, accuracy, init_network, load_checkpoint, logits, save_checkpoint, train
from .objectives import DistillConfig, DistillationLoss, SmoothedCrossEntropy, softmax
from .projection import emit_scatter, project_panel

log = logging.getLogger(__name__)

MANIFEST = "manifest.txt"


# ---------------------------------------------------------------- layout

def _tag(x: float) -> str:
    return f"{x:g}"


def data_dir(cfg) -> Path:
    return cfg.output_dir / "data"


def teacher_dir(cfg, alpha: float) -> Path:
    return cfg.output_dir / "teachers" / f"alpha_{_tag(alpha)}"


def student_dir(cfg, alpha: float, temperature: float) -> Path:
    return cfg.output_dir / "students" / f"alpha_{_tag(alpha)}" / f"T_{_tag(temperature)}"


def analysis_dir(cfg) -> Path:
    return cfg.output_dir / "analysis"


def report_dir(cfg) -> Path:
    return cfg.output_dir / "report"


def teacher_seed(cfg, ai: int) -> int:
    return cfg.seed + ai


def student_seed(cfg, ai: int, ti: int) -> int:
    return cfg.seed + len(cfg.alpha_grid) + ai * len(cfg.temperature_grid) + ti


# ---------------------------------------------------------------- small CSV helpers

def write_csv(path: Path, header, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt_float(v) if isinstance(v, (float, np.floating)) else v for v in row])


def read_csv(path: Path) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write_metrics(path: Path, metrics: dict) -> None:
    write_csv(path, list(metrics), [list(metrics.values())])


def read_metrics(path: Path) -> dict[str, str]:
    return read_csv(path)[0]


# ---------------------------------------------------------------- data

def ensure_data(cfg: ExperimentConfig) -> tuple[LabeledDataset, LabeledDataset]:
    """Load the run's dataset files, generating them first if needed."""
    d = data_dir(cfg)
    train_p, val_p = d / "train.dset", d / "val.dset"
    if not (train_p.exists() and val_p.exists()):
        cmd_gen_data(cfg)
    return load_dataset(train_p), load_dataset(val_p)


def cmd_gen_data(cfg: ExperimentConfig) -> int:
    d = data_dir(cfg)
    d.mkdir(parents=True, exist_ok=True)
    if cfg.data is not None:
        train_set, val_set = generate(cfg.data)
    else:
        train_set, val_set = load_dataset(cfg.train_path), load_dataset(cfg.val_path)
    save_dataset(train_set, d / "train.dset")
    save_dataset(val_set, d / "val.dset")
    if train_set.semantic_groups is not None:
        sets = []
        for pi in range(train_set.num_classes):
            try:
                sets.append(ground_truth_sets(train_set, pi))
            except ContractError:
                pass
        (d / "semantic_sets.txt").write_text(geo.format_semantic_sets(sets))
    log.info("wrote %d train / %d val samples to %s", len(train_set), len(val_set), d)
    return 0


# ---------------------------------------------------------------- teachers

def _phase_sgd(base: SgdConfig, seed: int) -> SgdConfig:
    return SgdConfig(base.learning_rate, base.momentum, base.epochs, base.batch_size, seed,
                     tuple(base.lr_decay_epochs), base.lr_decay_factor)


def _train_teacher_cell(args):
    cfg, ai = args
    alpha = cfg.alpha_grid[ai]
    out = teacher_dir(cfg, alpha)
    out.mkdir(parents=True, exist_ok=True)
    train_set, val_set = ensure_data(cfg)
    seed = teacher_seed(cfg, ai)
    k = train_set.num_classes
    net = init_network([train_set.input_dim, *cfg.teacher.hidden, k], seed)
    try:
        net, history = train(net, train_set, SmoothedCrossEntropy(train_set.labels, k, alpha),
                             _phase_sgd(cfg.teacher.sgd, seed))
    except DifflabError as exc:
        (out / "FAILED").write_text(f"{exc}\n")
        return alpha, str(exc)
    save_checkpoint(net, out / "teacher.ckpt")
    dump_features(net, train_set, out / "features_train.feat", 1.0, Split.TRAIN)
    dump_features(net, val_set, out / "features_val.feat", 1.0, Split.VAL)
    write_metrics(out / "metrics.csv", {
        "alpha": float(alpha), "seed": seed, "train_accuracy": accuracy(net, train_set),
        "val_accuracy": accuracy(net, val_set), "final_loss": float(history[-1]) if history
        else float("nan")})
    (out / "FAILED").unlink(missing_ok=True)
    return alpha, None


def _run_cells(fn, jobs, cfg: ExperimentConfig):
    if cfg.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as ex:
            return list(ex.map(fn, jobs))
    return [fn(j) for j in jobs]


def cmd_train_teacher(cfg: ExperimentConfig) -> int:
    ensure_data(cfg)
    results = _run_cells(_train_teacher_cell, [(cfg, i) for i in range(len(cfg.alpha_grid))], cfg)
    failures = [(a, err) for a, err in results if err]
    for a, err in failures:
        log.error("teacher alpha=%g failed: %s", a, err)
    write_manifest(cfg)
    return 1 if failures else 0


# ---------------------------------------------------------------- students

def _distill_cell(args):
    cfg, ai, ti = args
    alpha, temp = cfg.alpha_grid[ai], cfg.temperature_grid[ti]
    out = student_dir(cfg, alpha, temp)
    out.mkdir(parents=True, exist_ok=True)
    ckpt = teacher_dir(cfg, alpha) / "teacher.ckpt"
    if not ckpt.exists():
        err = str(DependencyError(f"cell alpha={alpha:g} T={temp:g}: missing teacher {ckpt}"))
        (out / "FAILED").write_text(err + "\n")
        return (alpha, temp), err
    teacher = load_checkpoint(ckpt)
    train_set, val_set = ensure_data(cfg)
    seed = student_seed(cfg, ai, ti)
    k = train_set.num_classes
    teacher_probs = softmax(logits(teacher, train_set.inputs), temp)
    loss = DistillationLoss(teacher_probs, train_set.labels, DistillConfig(temp, cfg.beta))
    net = init_network([train_set.input_dim, *cfg.student.hidden, k], seed)
    try:
        net, history = train(net, train_set, loss, _phase_sgd(cfg.student.sgd, seed))
    except DifflabError as exc:
        (out / "FAILED").write_text(f"{exc}\n")
        return (alpha, temp), str(exc)
    save_checkpoint(net, out / "student.ckpt")
    dump_features(net, train_set, out / "features_train.feat", temp, Split.TRAIN)
    dump_features(net, val_set, out / "features_val.feat", temp, Split.VAL)
    write_metrics(out / "metrics.csv", {
        "alpha": float(alpha), "temperature": float(temp), "beta": float(cfg.beta),
        "seed": seed, "train_accuracy": accuracy(net, train_set),
        "val_accuracy": accuracy(net, val_set),
        "teacher_val_accuracy": accuracy(teacher, val_set),
        "final_loss": float(history[-1]) if history else float("nan")})
    (out / "FAILED").unlink(missing_ok=True)
    return (alpha, temp), None


def cmd_distill(cfg: ExperimentConfig) -> int:
    ensure_data(cfg)
    jobs = [(cfg, ai, ti) for ai in range(len(cfg.alpha_grid))
            for ti in range(len(cfg.temperature_grid))]
    results = _run_cells(_distill_cell, jobs, cfg)
    failures = [(c, err) for c, err in results if err]
    for (a, t), err in failures:
        log.error("student alpha=%g T=%g failed: %s", a, t, err)
    write_manifest(cfg)
    return 1 if failures else 0


# ---------------------------------------------------------------- analysis

@dataclass
class _Column:
    alpha: float
    feats: dict  # (temperature, Split) -> FeatureMatrix


def _semantic_sets(cfg, train_set, ref_feats) -> tuple[list, list[str]]:
    """Target sets from a set file, the dataset's group map, or centroid proximity."""
    problems = []
    if cfg.analyses.semantic_sets:
        return geo.load_semantic_sets(cfg.analyses.semantic_sets), problems
    out = []
    cents = geo.centroids(ref_feats) if ref_feats is not None else None
    for pi in range(train_set.num_classes):
        try:
            if train_set.semantic_groups is not None:
                out.append(ground_truth_sets(train_set, pi))
            elif cents is not None:
                out.append(geo.select_semantic_sets(cents, pi, cfg.analyses.similar_frac,
                                                    cfg.analyses.dissimilar_frac))
        except ContractError as exc:
            problems.append(f"target {pi}: {exc}")
    return out, problems


def _eta_rows(cfg, col: _Column, sets_list) -> tuple[list, list[str]]:
    t1 = cfg.analyses.eta_reference
    rows, problems = [], []
    for sets in sets_list:
        for split in (Split.TRAIN, Split.VAL):
            for t2 in cfg.temperature_grid:
                if t2 == t1:
                    continue
                f1, f2 = col.feats.get((t1, split)), col.feats.get((t2, split))
                for variant, fn in ((geo.Variant.CENTROID, geo.diffusion_index),
                                    (geo.Variant.PAIRWISE, geo.diffusion_index_pairwise)):
                    e1 = e2 = float("nan")
                    if f1 is None or f2 is None:
                        problems.append(f"target {sets.target} {split.value} T2={t2:g}: "
                                        "missing features")
                    else:
                        try:
                            e1, e2 = fn(f1, f2, sets, "S1"), fn(f1, f2, sets, "S2")
                        except (DegenerateGeometryError, ContractError) as exc:
                            problems.append(f"target {sets.target} {split.value} T2={t2:g} "
                                            f"{variant.value}: {exc}")
                    rows.append(geo.DiffusionRow(sets.target, split, variant, t1, t2, e1, e2))
    return rows, problems


def _load_column(cfg, alpha) -> _Column:
    feats = {}
    for temp in cfg.temperature_grid:
        d = student_dir(cfg, alpha, temp)
        for split in (Split.TRAIN, Split.VAL):
            p = d / f"features_{split.value}.feat"
            if p.exists():
                feats[(temp, split)] = load_features(p)
    return _Column(alpha, feats)


def _teachers(cfg):
    out = {}
    for alpha in cfg.alpha_grid:
        p = teacher_dir(cfg, alpha) / "teacher.ckpt"
        if p.exists():
            out[alpha] = load_checkpoint(p)
    return out


def _class_names(k: int) -> dict[int, str]:
    return {c: f"class {c}" for c in range(k)}


def _pair_rows(cfg, train_set, teachers):
    rows = []
    for alpha, _net in teachers.items():
        p = teacher_dir(cfg, alpha) / "features_train.feat"
        if not p.exists():
            continue
        feats = load_features(p)
        cents = geo.centroids(feats).centroids
        tight = geo.cluster_tightness(feats)
        scale = float(np.nanmean(tight))
        groups = train_set.semantic_groups or {}
        for a in range(train_set.num_classes):
            for b in range(a + 1, train_set.num_classes):
                if a in groups and groups.get(a) == groups.get(b):
                    sq = float(np.sum((cents[a] - cents[b]) ** 2))
                    rows.append((float(alpha), a, b, sq, sq / scale))
    return rows


def cmd_analyze(cfg: ExperimentConfig) -> int:
    train_set, val_set = ensure_data(cfg)
    an = cfg.analyses
    out = analysis_dir(cfg)
    out.mkdir(parents=True, exist_ok=True)
    problems: list[str] = []
    teachers = _teachers(cfg)
    k = train_set.num_classes

    for alpha in cfg.alpha_grid:
        col = _load_column(cfg, alpha)
        col_dir = out / f"alpha_{_tag(alpha)}"
        (col_dir / "projections").mkdir(parents=True, exist_ok=True)
        if an.eta:
            ref = col.feats.get((an.eta_reference, Split.TRAIN))
            sets_list, p1 = _semantic_sets(cfg, train_set, ref)
            (col_dir / "semantic_sets.txt").write_text(geo.format_semantic_sets(sets_list))
            rows, p2 = _eta_rows(cfg, col, sets_list)
            geo.write_diffusion_csv(rows, col_dir / "eta.csv")
            problems += [f"alpha={alpha:g}: {p}" for p in p1 + p2]
        if an.projection:
            for temp in cfg.temperature_grid:
                ckpt = student_dir(cfg, alpha, temp) / "student.ckpt"
                if not ckpt.exists():
                    continue
                final = load_checkpoint(ckpt).final_layer
                for split in (Split.TRAIN, Split.VAL):
                    feats = col.feats.get((temp, split))
                    if feats is None:
                        continue
                    for triple in an.class_triples:
                        name = f"T_{_tag(temp)}_{split.value}_{'-'.join(map(str, triple))}.svg"
                        try:
                            panel = project_panel(feats, final, triple)
                            emit_scatter(panel, _class_names(k), col_dir / "projections" / name,
                                         title=f"alpha={alpha:g} T={temp:g} {split.value}")
                        except (DifflabError, ValueError) as exc:
                            problems.append(f"alpha={alpha:g} projection {name}: {exc}")

    if an.class_accuracy:
        _class_accuracy_table(cfg, train_set, val_set, teachers, out)
    _tightness_table(cfg, out)
    write_csv(out / "similar_pairs.csv",
              ["alpha", "class_a", "class_b", "centroid_sqdist", "separation"],
              _pair_rows(cfg, train_set, teachers))
    if an.smoothness:
        problems += _smoothness_tables(cfg, train_set, val_set, teachers, out)
    if an.dominance:
        _dominance_tables(cfg, train_set, teachers, out)

    (out / "problems.txt").write_text("".join(p + "\n" for p in problems))
    for p in problems:
        log.warning("%s", p)
    write_manifest(cfg)
    return 0


def _class_accuracy_table(cfg, train_set, val_set, teachers, out):
    rows = []
    for alpha, net in teachers.items():
        ca = geo.class_accuracy(net, val_set)
        rows += [("teacher", float(alpha), 1.0, c, float(a)) for c, a in enumerate(ca.per_class)]
        rows.append(("teacher", float(alpha), 1.0, "mean", ca.mean))
    for alpha in cfg.alpha_grid:
        for temp in cfg.temperature_grid:
            p = student_dir(cfg, alpha, temp) / "student.ckpt"
            if not p.exists():
                continue
            ca = geo.class_accuracy(load_checkpoint(p), val_set)
            rows += [("student", float(alpha), float(temp), c, float(a))
                     for c, a in enumerate(ca.per_class)]
            rows.append(("student", float(alpha), float(temp), "mean", ca.mean))
    write_csv(out / "class_accuracy.csv", ["role", "alpha", "temperature", "class", "accuracy"],
              rows)


def _tightness_table(cfg, out):
    rows = []
    for alpha in cfg.alpha_grid:
        cells = [("teacher", 1.0, teacher_dir(cfg, alpha))]
        cells += [("student", t, student_dir(cfg, alpha, t)) for t in cfg.temperature_grid]
        for role, temp, d in cells:
            p = d / "features_train.feat"
            if p.exists():
                tight = geo.cluster_tightness(load_features(p))
                rows += [(role, float(alpha), float(temp), c, float(v))
                         for c, v in enumerate(tight)]
    write_csv(out / "tightness.csv", ["role", "alpha", "temperature", "class", "tightness"], rows)


def _smoothness_tables(cfg, train_set, val_set, teachers, out) -> list[str]:
    temps = sorted(set(SMOOTHNESS_TEMPERATURES) | set(cfg.temperature_grid))
    for name, data in (("smoothness.csv", train_set), ("smoothness_val.csv", val_set)):
        rows = [(t, a, sm.average_entropy(net, data, t)) for a, net in teachers.items()
                for t in temps]
        sm.write_smoothness_csv(rows, out / name)
    problems, rows = [], []
    base = teachers.get(0.0)
    if base is not None:
        for alpha, net in teachers.items():
            if alpha == 0.0:
                continue
            for t in cfg.temperature_grid:
                target = sm.average_entropy(net, train_set, t)
                try:
                    matched = sm.entropy_matched_temperature(base, train_set, target, (0.25, 256.0))
                except (BracketError, MonotonicityError) as exc:
                    problems.append(f"entropy match alpha={alpha:g} T={t:g}: {exc}")
                    matched = float("nan")
                rows.append((float(alpha), float(t), target, 0.0, matched))
    write_csv(out / "entropy_match.csv",
              ["alpha", "temperature", "target_entropy", "matched_alpha", "matched_temperature"],
              rows)
    return problems


def _dominance_tables(cfg, train_set, teachers, out):
    rows = []
    factor = cfg.analyses.dominance_factor
    for alpha, net in teachers.items():
        pdir = out / "profiles" / f"alpha_{_tag(alpha)}"
        pdir.mkdir(parents=True, exist_ok=True)
        for k in range(train_set.num_classes):
            for t in cfg.temperature_grid:
                try:
                    prof = sm.soft_output_profile(net, train_set, k, t)
                except ContractError:
                    continue
                sm.write_profile_csv(prof, pdir / f"class_{k}_T_{_tag(t)}.csv")
                count = sm.dominance_count(prof, factor) if train_set.num_classes >= 3 else 0
                rows.append((float(alpha), k, float(t), float(factor), count, prof.runner_up,
                             prof.gap))
    write_csv(out / "dominance.csv",
              ["alpha", "class", "temperature", "factor", "count", "runner_up", "gap"], rows)


# ---------------------------------------------------------------- report

def _f(s: str) -> float:
    try:
        return float(s)
    except (TypeError, ValueError):
        return float("nan")


def cmd_report(cfg: ExperimentConfig) -> int:
    """Summarize stored CSV artifacts; nothing is recomputed from checkpoints."""
    out = report_dir(cfg)
    out.mkdir(parents=True, exist_ok=True)
    warnings: list[str] = []
    lines = [f"difflab report (config {cfg.config_hash}, seed {cfg.seed})", ""]

    acc = {}
    for alpha in cfg.alpha_grid:
        for temp in cfg.temperature_grid:
            p = student_dir(cfg, alpha, temp) / "metrics.csv"
            if p.exists():
                acc[(alpha, temp)] = _f(read_metrics(p)["val_accuracy"])
            else:
                warnings.append(f"missing student metrics for alpha={alpha:g} T={temp:g}")
    best = {}
    for temp in cfg.temperature_grid:
        col = [acc[(a, temp)] for a in cfg.alpha_grid if (a, temp) in acc]
        best[temp] = max(col) if col else None

    matrix_rows = []
    header = "alpha \\ T".ljust(10) + "".join(f"{_tag(t):>12}" for t in cfg.temperature_grid)
    lines += ["Student validation accuracy (* = best in column)", header]
    for alpha in cfg.alpha_grid:
        cells, csv_cells = [], []
        for temp in cfg.temperature_grid:
            v = acc.get((alpha, temp))
            if v is None:
                cells.append(f"{'MISSING':>12}")
                csv_cells.append("MISSING")
            else:
                mark = "*" if v == best[temp] else " "
                cells.append(f"{v:>11.4f}{mark}")
                csv_cells.append(fmt_float(v) + mark.strip())
        lines.append(f"{_tag(alpha):<10}" + "".join(cells))
        matrix_rows.append([fmt_float(alpha), *csv_cells])
    write_csv(out / "accuracy_matrix.csv",
              ["alpha", *[f"T={_tag(t)}" for t in cfg.temperature_grid]], matrix_rows)

    lines += ["", "Diffusion index sign summary (train split, centroid variant)",
              "fraction of targets with eta_S1 < 0 and eta_S2 > 0; mean eta as fraction "
              "and percent"]
    for alpha in cfg.alpha_grid:
        p = analysis_dir(cfg) / f"alpha_{_tag(alpha)}" / "eta.csv"
        if not p.exists():
            warnings.append(f"missing eta table for alpha={alpha:g}")
            lines.append(f"  alpha={_tag(alpha)}: MISSING")
            continue
        rows = geo.read_diffusion_csv(p)
        for t2 in sorted({r.t2 for r in rows}):
            sel = [r for r in rows if r.t2 == t2 and r.split is Split.TRAIN
                   and r.variant is geo.Variant.CENTROID
                   and not (math.isnan(r.eta_s1) or math.isnan(r.eta_s2))]
            if not sel:
                lines.append(f"  alpha={_tag(alpha)} T1={_tag(rows[0].t1)} T2={_tag(t2)}: "
                             "no valid targets")
                continue
            frac = sum(r.eta_s1 < 0 < r.eta_s2 for r in sel) / len(sel)
            m1 = math.fsum(r.eta_s1 for r in sel) / len(sel)
            m2 = math.fsum(r.eta_s2 for r in sel) / len(sel)
            lines.append(f"  alpha={_tag(alpha)} T1={_tag(sel[0].t1)} T2={_tag(t2)}: "
                         f"pattern {frac:.3f} ({len(sel)} targets); "
                         f"eta_S1 {m1:+.4f} ({100 * m1:+.2f}%), "
                         f"eta_S2 {m2:+.4f} ({100 * m2:+.2f}%)")

    lines += ["", "Teacher soft-target smoothness (average entropy, train split)"]
    p = analysis_dir(cfg) / "smoothness.csv"
    if p.exists():
        rows = read_csv(p)
        temps = sorted({_f(r["temperature"]) for r in rows})
        alphas = sorted({_f(r["alpha"]) for r in rows})
        table = {(_f(r["alpha"]), _f(r["temperature"])): _f(r["average_entropy"]) for r in rows}
        lines.append("alpha \\ T".ljust(10) + "".join(f"{_tag(t):>10}" for t in temps))
        for a in alphas:
            lines.append(f"{_tag(a):<10}" + "".join(
                f"{table[(a, t)]:>10.4f}" if (a, t) in table else f"{'MISSING':>10}"
                for t in temps))
    else:
        warnings.append("missing smoothness table")
        lines.append("  MISSING")

    lines += ["", f"warnings: {len(warnings)}"] + [f"  - {w}" for w in warnings]
    (out / "report.txt").write_text("\n".join(lines) + "\n")
    for w in warnings:
        log.warning("%s", w)
    return 1 if warnings else 0


# ---------------------------------------------------------------- manifest

def _rel(cfg, p: Path) -> str:
    return p.relative_to(cfg.output_dir).as_posix()


def run_record(cfg: ExperimentConfig) -> dict:
    """Snapshot of the run's cells and artifact paths (relative to the output dir)."""
    rec = {"config_hash": cfg.config_hash, "seed": cfg.seed, "teachers": {}, "cells": {}}
    for alpha in cfg.alpha_grid:
        d = teacher_dir(cfg, alpha)
        entry = {"checkpoint": None, "val_accuracy": None, "status": "missing"}
        if (d / "metrics.csv").exists():
            entry.update(checkpoint=_rel(cfg, d / "teacher.ckpt"), status="ok",
                         val_accuracy=_f(read_metrics(d / "metrics.csv")["val_accuracy"]))
        elif (d / "FAILED").exists():
            entry["status"] = "failed: " + (d / "FAILED").read_text().strip()
        rec["teachers"][f"alpha={_tag(alpha)}"] = entry
    for alpha in cfg.alpha_grid:
        col_dir = analysis_dir(cfg) / f"alpha_{_tag(alpha)}"
        for temp in cfg.temperature_grid:
            d = student_dir(cfg, alpha, temp)
            entry = {"status": "missing", "teacher_accuracy": None, "student_accuracy": None,
                     "checkpoint": None, "features": {}, "artifacts": []}
            if (d / "metrics.csv").exists():
                m = read_metrics(d / "metrics.csv")
                entry.update(status="ok", teacher_accuracy=_f(m["teacher_val_accuracy"]),
                             student_accuracy=_f(m["val_accuracy"]),
                             checkpoint=_rel(cfg, d / "student.ckpt"),
                             features={s.value: _rel(cfg, d / f"features_{s.value}.feat")
                                       for s in Split})
            elif (d / "FAILED").exists():
                entry["status"] = "failed: " + (d / "FAILED").read_text().strip()
            proj = col_dir / "projections"
            if proj.exists():
                entry["artifacts"] = sorted(_rel(cfg, p) for p in proj.glob(f"T_{_tag(temp)}_*"))
            rec["cells"][f"alpha={_tag(alpha)},T={_tag(temp)}"] = entry
    return rec


def write_manifest(cfg: ExperimentConfig) -> None:
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    text = json.dumps(run_record(cfg), indent=2, sort_keys=True, allow_nan=True)
    (cfg.output_dir / MANIFEST).write_text(text + "\n")


def cmd_run(cfg: ExperimentConfig) -> int:
    """All phases in order; returns the worst exit code."""
    codes = [cmd_gen_data(cfg), cmd_train_teacher(cfg), cmd_distill(cfg), cmd_analyze(cfg),
             cmd_report(cfg)]
    return max(codes)
