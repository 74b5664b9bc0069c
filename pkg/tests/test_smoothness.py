import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from difflab import harness
from difflab.data import LabeledDataset, load_dataset
from difflab.errors import BracketError, ContractError
from difflab.nn import (Activation, DenseLayer, NetworkParams, init_network, load_checkpoint,
                        logits)
from difflab.objectives import softmax
from difflab.smoothness import (SoftOutputProfile, average_entropy, dominance_count, entropy,
                                entropy_matched_temperature, soft_output_profile)


def test_entropy_uniform_200():
    h = entropy(np.full(200, 1 / 200))
    assert h == pytest.approx(math.log(200), abs=1e-9)
    assert round(h, 3) == 5.298


def test_entropy_closed_forms():
    assert entropy(np.eye(5)[2]) == 0.0
    assert entropy([0.5, 0.5]) == pytest.approx(0.6931, abs=5e-5)
    assert entropy([0.5, 0.5, 0.0]) == pytest.approx(math.log(2), rel=1e-15)


@settings(max_examples=200)
@given(seed=st.integers(0, 2**32 - 1), k=st.integers(2, 50))
def test_entropy_maximized_only_by_uniform(seed, k):
    rng = np.random.default_rng(seed)
    p = rng.dirichlet(np.full(k, 0.5))
    if np.max(np.abs(p - 1 / k)) < 1e-6:
        return
    h = entropy(p)
    assert 0 <= h < math.log(k) - 1e-9


def constant_logit_net(z, in_dim=3):
    z = np.asarray(z, float)
    return NetworkParams([DenseLayer(np.zeros((len(z), in_dim)), z, Activation.IDENTITY)])


def random_data(n=1000, dim=3, k=4, seed=0):
    rng = np.random.default_rng(seed)
    return LabeledDataset(rng.normal(size=(n, dim)) * 3, rng.integers(0, k, n), k)


def test_average_entropy_identical_outputs():
    z = [2.0, -1.0, 0.5, 0.0]
    net = constant_logit_net(z)
    data = random_data(50)
    for t in (1.0, 3.0):
        assert average_entropy(net, data, t) == pytest.approx(entropy(softmax(np.array(z), t)),
                                                              rel=1e-14)


def test_average_entropy_high_temperature_limit():
    net = init_network([3, 8, 4], 0)
    assert average_entropy(net, random_data(), 1e6) == pytest.approx(math.log(4), abs=1e-4)


@pytest.mark.parametrize("seed", range(5))
def test_average_entropy_monotone_on_random_teacher(seed):
    net = init_network([3, 16, 4], seed)
    data = random_data(seed=seed)
    values = [average_entropy(net, data, t) for t in (1, 2, 3, 8, 64)]
    assert all(a <= b for a, b in zip(values, values[1:]))


def test_average_entropy_empty():
    with pytest.raises(ContractError):
        average_entropy(init_network([3, 4], 0), LabeledDataset(np.zeros((0, 3)), [], 4), 1.0)


def test_entropy_match_fixed_point():
    net = init_network([3, 16, 4], 1)
    data = random_data()
    target = average_entropy(net, data, 2.0)
    t = entropy_matched_temperature(net, data, target, (1.0, 8.0))
    assert t == pytest.approx(2.0, abs=1e-4)
    assert abs(average_entropy(net, data, t) - target) < 1e-6


def test_entropy_match_unreachable_and_bad_bracket():
    net = init_network([3, 16, 4], 1)
    data = random_data()
    with pytest.raises(BracketError):
        entropy_matched_temperature(net, data, math.log(4), (1.0, 64.0))
    with pytest.raises(BracketError):
        entropy_matched_temperature(net, data, 0.5, (8.0, 1.0))


def test_profile_single_sample():
    net = init_network([3, 5, 4], 2)
    data = LabeledDataset(np.array([[0.3, -1.0, 2.0]]), [1], 4)
    prof = soft_output_profile(net, data, 1, 2.0)
    np.testing.assert_allclose(prof.mean_probs, softmax(logits(net, data.inputs[0]), 2.0),
                               rtol=1e-15)
    with pytest.raises(ContractError):
        soft_output_profile(net, data, 0, 1.0)


def test_dominance_uniform():
    assert dominance_count(SoftOutputProfile(0, np.full(10, 0.1), 1.0), 100) == 0


def test_dominance_arithmetic():
    p = np.array([0.9, 0.099, 1e-4, 9.9e-4, 1e-3, 5e-4])
    p[0] += 1 - p.sum()
    prof = SoftOutputProfile(0, p, 1.0)
    assert prof.runner_up == 1
    # classes at or below 0.099 / 100 = 9.9e-4: indices 2, 3 and 5
    assert dominance_count(prof, 100) == 3


def test_dominance_needs_three_classes():
    with pytest.raises(ContractError):
        dominance_count(SoftOutputProfile(0, np.array([0.7, 0.3]), 1.0))


# -- trained teachers from the default experiment ---------------------------

def _teachers(default_runs, alpha):
    for cfg, _ in default_runs.values():
        net = load_checkpoint(harness.teacher_dir(cfg, alpha) / "teacher.ckpt")
        train = load_dataset(harness.data_dir(cfg) / "train.dset")
        yield cfg.seed, net, train


@pytest.mark.parametrize("alpha", [0.0, 0.1])
def test_profile_argmax_is_class_of_interest(default_runs, alpha):
    for _, net, train in _teachers(default_runs, alpha):
        for k in range(train.num_classes):
            assert int(np.argmax(soft_output_profile(net, train, k, 1.0).mean_probs)) == k


@pytest.mark.parametrize("alpha", [0.0, 0.1])
def test_raising_temperature_shrinks_gap(default_runs, alpha):
    for _, net, train in _teachers(default_runs, alpha):
        for k in range(train.num_classes):
            g1 = soft_output_profile(net, train, k, 1.0).gap
            g2 = soft_output_profile(net, train, k, 2.0).gap
            assert g2 < g1


def test_ls_entropy_matched_by_hotter_plain_teacher(default_runs):
    for cfg, _ in default_runs.values():
        ls = load_checkpoint(harness.teacher_dir(cfg, 0.1) / "teacher.ckpt")
        plain = load_checkpoint(harness.teacher_dir(cfg, 0.0) / "teacher.ckpt")
        train = load_dataset(harness.data_dir(cfg) / "train.dset")
        t_star = entropy_matched_temperature(plain, train, average_entropy(ls, train, 1.0),
                                             (1.0, 64.0))
        assert t_star > 1.0


@pytest.mark.xfail(strict=True, reason="label smoothing lifts every incorrect class to a "
                   "common floor, so no incorrect class is 100x below the runner-up")
def test_ls_teacher_dominance_bound(default_runs):
    for _, net, train in _teachers(default_runs, 0.1):
        k = train.num_classes
        for c in range(k):
            count = dominance_count(soft_output_profile(net, train, c, 1.0), 100)
            assert count >= math.ceil(0.8 * (k - 2))


def test_dominance_erodes_with_temperature(default_runs):
    for alpha in (0.0, 0.1):
        for _, net, train in _teachers(default_runs, alpha):
            for c in range(train.num_classes):
                d1 = dominance_count(soft_output_profile(net, train, c, 1.0), 100)
                d4 = dominance_count(soft_output_profile(net, train, c, 4.0), 100)
                assert d1 >= d4
