"""Acceptance criteria 1-9, one test per criterion.

Each test prints a single ``criterion N: PASS|FAIL`` line (also collected in
the pytest terminal summary) before asserting.
"""

import math
import time

import numpy as np
import pytest

from conftest import record_criterion, run_default
from difflab import harness
from difflab.data import load_dataset, save_dataset
from difflab.features import load_features, write_features
from difflab.geometry import (FeatureMatrix, SemanticSets, Split, Variant, centroids,
                              cluster_tightness, diffusion_index, diffusion_index_pairwise,
                              read_diffusion_csv)
from difflab.nn import (Activation, DenseLayer, backward, forward, init_network,
                        load_checkpoint, save_checkpoint)
from difflab.objectives import DistillConfig, DistillationLoss, SmoothedCrossEntropy, softmax
from difflab.projection import pca_2d, project, qr_basis
from difflab.smoothness import (average_entropy, dominance_count, entropy,
                                entropy_matched_temperature, soft_output_profile)

from oracles import brute_eta, central_diff, centroid_dists, pairwise_dists, rel_err

LS_ALPHA = 0.1


def _check(number, passed, detail):
    record_criterion(number, bool(passed), detail)
    assert passed, detail


# -- 1 ------------------------------------------------------------------------

def _net_grad_error(net, x, objective):
    idx = np.arange(len(x))
    trace = forward(net, x)
    _, dlogits = objective(trace.logits, idx)
    grads = backward(net, trace, dlogits)
    worst = 0.0
    for layer, g in zip(net.layers, grads):
        for param, analytic in ((layer.weights, g.weights), (layer.bias, g.bias)):
            numeric = central_diff(lambda: objective(forward(net, x).logits, idx)[0], param,
                                   1e-5)
            worst = max(worst, rel_err(analytic, numeric))
    return worst


def test_criterion_1_gradient_oracle():
    start = time.perf_counter()
    worst, checks = 0.0, 0
    for seed in range(50):
        rng = np.random.default_rng(seed)
        k = int(rng.integers(3, 6))
        dims = [int(rng.integers(2, 6)), int(rng.integers(2, 6)), int(rng.integers(2, 6)), k]
        net = init_network(dims, seed)
        for layer in net.layers:
            layer.bias[:] = rng.normal(scale=0.2, size=layer.bias.shape)
        x = rng.normal(size=(3, dims[0]))
        labels = rng.integers(0, k, 3)
        objectives = [SmoothedCrossEntropy(labels, k, alpha) for alpha in (0.0, 0.1)]
        for t in (1.0, 2.0, 3.0, 64.0):
            teacher = softmax(rng.normal(scale=2, size=(3, k)), t)
            objectives += [DistillationLoss(teacher, labels, DistillConfig(t, beta))
                           for beta in (0.0, 0.5, 1.0)]
        for obj in objectives:
            worst = max(worst, _net_grad_error(net, x, obj))
            checks += 1
    elapsed = time.perf_counter() - start
    _check(1, worst < 1e-4 and elapsed < 30,
           f"{checks} loss/net pairs, max relative error {worst:.2e} (< 1e-4), "
           f"{elapsed:.1f}s (< 30s)")


# -- 2 ------------------------------------------------------------------------

def test_criterion_2_eta_oracle():
    start = time.perf_counter()
    worst = 0.0
    for seed in range(100):
        rng = np.random.default_rng(1000 + seed)
        k, per, h = int(rng.integers(4, 8)), int(rng.integers(1, 5)), int(rng.integers(2, 5))
        labels = np.repeat(np.arange(k), per)
        r1 = rng.normal(size=(k, h))[labels] * 4 + rng.normal(size=(k * per, h))
        r2 = rng.normal(size=(k, h))[labels] * 4 + rng.normal(size=(k * per, h))
        order = rng.permutation(k)
        n1 = int(rng.integers(1, k - 1))
        s = SemanticSets(int(order[0]), frozenset(order[1:1 + n1].tolist()),
                         frozenset(order[1 + n1:].tolist()))
        f1 = FeatureMatrix(r1, labels, k, Split.TRAIN, 1.0)
        f2 = FeatureMatrix(r2, labels, k, Split.TRAIN, 3.0)
        for fn, dist in ((diffusion_index, centroid_dists),
                         (diffusion_index_pairwise, pairwise_dists)):
            d1 = dist(r1.tolist(), labels.tolist(), s.target, s.members)
            d2 = dist(r2.tolist(), labels.tolist(), s.target, s.members)
            for over, grp in (("S1", s.similar), ("S2", s.dissimilar)):
                worst = max(worst, abs(fn(f1, f2, s, over) - brute_eta(d1, d2, grp)))
    elapsed = time.perf_counter() - start
    _check(2, worst <= 1e-12 and elapsed < 5,
           f"100 geometries x 2 variants, max |eta - brute force| {worst:.1e} (<= 1e-12), "
           f"{elapsed:.2f}s (< 5s)")


# -- 3 and 4 --------------------------------------------------------------------

def _student_acc(cfg, alpha, t):
    return float(harness.read_metrics(harness.student_dir(cfg, alpha, t) / "metrics.csv")
                 ["val_accuracy"])


def test_criterion_3_accuracy_pattern(default_runs):
    degrade, compatible, parts = [], [], []
    for seed, (cfg, code) in default_runs.items():
        assert code == 0
        a1, a4 = _student_acc(cfg, LS_ALPHA, 1.0), _student_acc(cfg, LS_ALPHA, 4.0)
        p1 = _student_acc(cfg, 0.0, 1.0)
        degrade.append(a4 <= a1)
        compatible.append(a1 >= p1)
        parts.append(f"seed {seed}: LS T=4 {a4:.4f} vs T=1 {a1:.4f}, plain T=1 {p1:.4f}")
    ok = all(degrade) and sum(compatible) >= 2 and default_runs.elapsed < 180
    _check(3, ok, f"T=4<=T=1 in {sum(degrade)}/3 seeds, LS>=plain at T=1 in "
                  f"{sum(compatible)}/3 seeds; {'; '.join(parts)}; "
                  f"runs took {default_runs.elapsed:.1f}s (< 180s)")


def test_criterion_4_diffusion_sign_pattern(default_runs):
    fractions = []
    for cfg, _ in default_runs.values():
        rows = read_diffusion_csv(harness.analysis_dir(cfg) / f"alpha_{LS_ALPHA:g}" / "eta.csv")
        sel = [r for r in rows if r.split is Split.TRAIN and r.variant is Variant.CENTROID
               and r.t1 == 1.0 and r.t2 == 4.0]
        assert len(sel) == 8
        fractions.append(sum(r.eta_s1 < 0 < r.eta_s2 for r in sel) / len(sel))
    _check(4, all(f >= 0.75 for f in fractions),
           "share of targets with eta(S1) < 0 < eta(S2) per seed: "
           + ", ".join(f"{f:.3f}" for f in fractions) + " (each >= 0.75)")


# -- 5 --------------------------------------------------------------------------

def _teacher_features(cfg, alpha):
    return load_features(harness.teacher_dir(cfg, alpha) / "features_train.feat")


def test_criterion_5_tightening_and_enlargement(default_runs):
    tighter, wider, raw_wider, total = [], 0, 0, 0
    for cfg, _ in default_runs.values():
        train = load_dataset(harness.data_dir(cfg) / "train.dset")
        sep, raw = {}, {}
        for alpha in (0.0, LS_ALPHA):
            feats = _teacher_features(cfg, alpha)
            tight = cluster_tightness(feats)
            cents = centroids(feats).centroids
            scale = float(np.mean(tight))
            sep[alpha], raw[alpha] = {}, {}
            for a in range(train.num_classes):
                for b in range(a + 1, train.num_classes):
                    if train.semantic_groups[a] == train.semantic_groups[b]:
                        d = float(np.sum((cents[a] - cents[b]) ** 2))
                        raw[alpha][(a, b)] = d
                        sep[alpha][(a, b)] = d / scale
        tighter.append(float(np.mean(cluster_tightness(_teacher_features(cfg, LS_ALPHA))))
                       < float(np.mean(cluster_tightness(_teacher_features(cfg, 0.0)))))
        for pair in sep[0.0]:
            total += 1
            wider += sep[LS_ALPHA][pair] > sep[0.0][pair]
            raw_wider += raw[LS_ALPHA][pair] > raw[0.0][pair]
    share = wider / total
    _check(5, all(tighter) and share >= 0.75,
           f"LS tighter in {sum(tighter)}/3 seeds; similar pairs further apart (in units of "
           f"mean cluster tightness) {wider}/{total} = {share:.3f} (>= 0.75); "
           f"raw squared distance larger in {raw_wider}/{total}")


# -- 6 --------------------------------------------------------------------------

def test_criterion_6_entropy(default_runs):
    uniform = entropy(np.full(200, 1 / 200))
    grid = (1.0, 1.5, 2.0, 3.0, 8.0, 64.0)
    monotone, count = True, 0
    fixed_err = 0.0
    for cfg, _ in default_runs.values():
        train = load_dataset(harness.data_dir(cfg) / "train.dset")
        for alpha in cfg.alpha_grid:
            net = load_checkpoint(harness.teacher_dir(cfg, alpha) / "teacher.ckpt")
            h = [average_entropy(net, train, t) for t in grid]
            monotone &= all(a <= b for a, b in zip(h, h[1:]))
            count += 1
            target = average_entropy(net, train, 2.0)
            t = entropy_matched_temperature(net, train, target, (1.0, 8.0))
            fixed_err = max(fixed_err, abs(t - 2.0))
    ok = abs(uniform - math.log(200)) <= 1e-9 and monotone and fixed_err < 1e-4
    _check(6, ok, f"H(uniform_200) = {uniform:.12f} (ln 200 = {math.log(200):.12f}); "
                  f"average entropy non-decreasing on {count} teachers: {monotone}; "
                  f"entropy-matched T recovers 2 within {fixed_err:.1e} (< 1e-4)")


# -- 7 --------------------------------------------------------------------------

def test_criterion_7_projection(default_runs):
    ortho = span = 0.0
    ordered = True
    for seed in range(100):
        rng = np.random.default_rng(seed)
        h, k = int(rng.integers(3, 12)), 5
        layer = DenseLayer(rng.normal(size=(k, h)), rng.normal(size=k), Activation.IDENTITY)
        triple = tuple(int(c) for c in rng.choice(k, 3, replace=False))
        b = qr_basis(layer, triple)
        ortho = max(ortho, float(np.max(np.abs(b.basis.T @ b.basis - np.eye(3)))))
        nb = qr_basis(layer, triple, append_bias=False)
        x = rng.normal(size=(8, 3)) @ layer.weights[list(triple)]
        p = project(x, nb)
        for i in range(8):
            for j in range(i + 1, 8):
                span = max(span, abs(np.linalg.norm(p[i] - p[j]) - np.linalg.norm(x[i] - x[j])))
        ev = pca_2d(rng.normal(size=(int(rng.integers(3, 50)), 3)) * rng.uniform(0.1, 5, 3)
                    ).explained_variance
        ordered &= bool(ev[0] >= ev[1] >= 0)
    cfg = default_runs[1][0]
    svg = (harness.analysis_dir(cfg) / f"alpha_{LS_ALPHA:g}" / "projections" /
           "T_1_train_0-1-2.svg").read_text()
    circles = svg.count('<circle class="pt"')
    expected = 3 * cfg.data.samples_per_class_train
    ok = ortho < 1e-10 and span < 1e-9 and ordered and circles == expected
    _check(7, ok, f"orthonormality residual {ortho:.1e} (< 1e-10), in-span distance error "
                  f"{span:.1e} (< 1e-9), PCA ordering on 100 inputs: {ordered}, "
                  f"SVG points {circles} (expected {expected})")


# -- 8 --------------------------------------------------------------------------

def test_criterion_8_dominance_erosion(default_runs):
    erodes, shrinks, n = 0, 0, 0
    for cfg, _ in default_runs.values():
        train = load_dataset(harness.data_dir(cfg) / "train.dset")
        net = load_checkpoint(harness.teacher_dir(cfg, LS_ALPHA) / "teacher.ckpt")
        for c in range(train.num_classes):
            prof = {t: soft_output_profile(net, train, c, t) for t in (1.0, 2.0, 4.0)}
            erodes += dominance_count(prof[1.0], 100) >= dominance_count(prof[4.0], 100)
            shrinks += prof[2.0].gap < prof[1.0].gap
            n += 1
    _check(8, erodes == n and shrinks == n,
           f"dominance(T=1) >= dominance(T=4) for {erodes}/{n} classes; "
           f"gap shrinks from T=1 to T=2 for {shrinks}/{n} classes")


# -- 9 --------------------------------------------------------------------------

def test_criterion_9_determinism_and_io(default_runs, tmp_path):
    cfg1, _ = default_runs[1]
    cfg2, code = run_default(tmp_path, 1)
    assert code == 0

    def csvs(root):
        return {p.relative_to(root).as_posix(): p.read_bytes() for p in root.rglob("*.csv")}

    a, b = csvs(cfg1.output_dir), csvs(cfg2.output_dir)
    identical = a == b and len(a) > 0
    same_manifest = (cfg1.output_dir / "manifest.txt").read_bytes() == \
        (cfg2.output_dir / "manifest.txt").read_bytes()

    train = load_dataset(harness.data_dir(cfg1) / "train.dset")
    save_dataset(train, tmp_path / "rt.dset")
    ds_ok = load_dataset(tmp_path / "rt.dset") == train and \
        (tmp_path / "rt.dset").read_bytes() == (harness.data_dir(cfg1) / "train.dset").read_bytes()
    net = load_checkpoint(harness.student_dir(cfg1, LS_ALPHA, 4.0) / "student.ckpt")
    save_checkpoint(net, tmp_path / "rt.ckpt")
    ck_ok = load_checkpoint(tmp_path / "rt.ckpt").equals(net)
    feats = load_features(harness.student_dir(cfg1, LS_ALPHA, 4.0) / "features_val.feat")
    write_features(feats, tmp_path / "rt.feat")
    back = load_features(tmp_path / "rt.feat")
    ft_ok = (np.array_equal(back.rows, feats.rows) and np.array_equal(back.labels, feats.labels)
             and back.temperature_tag == feats.temperature_tag and back.split is feats.split)
    ok = identical and same_manifest and ds_ok and ck_ok and ft_ok
    _check(9, ok, f"{len(a)} CSVs byte-identical across two runs: {identical}; manifest "
                  f"identical: {same_manifest}; round trips dataset/checkpoint/features: "
                  f"{ds_ok}/{ck_ok}/{ft_ok}")
