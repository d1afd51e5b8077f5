"""Losses and metrics against brute-force oracles."""

import math

import numpy as np
import pytest

from poselift import metrics
from poselift.errors import ConfigError, DimensionError
from poselift.losses import action_loss, pose_loss, total_loss
from poselift.tensor import Tensor
from poselift.text_prompts import classify


def _pose_loss_oracle(pred, gt):
    total, count = 0.0, 0
    for b in range(pred.shape[0]):
        for j in range(pred.shape[1]):
            d = pred[b, j] - gt[b, j]
            total += math.sqrt(d[0] ** 2 + d[1] ** 2 + d[2] ** 2)
            count += 1
    return total / count


def test_pose_loss_zero_on_identical():
    x = np.random.default_rng(0).normal(size=(4, 6, 3))
    assert pose_loss(Tensor(x), Tensor(x)).item() == 0.0


def test_pose_loss_three_four_five():
    gt = np.zeros((2, 5, 3))
    pred = gt + np.array([3.0, 0.0, 4.0])
    assert abs(pose_loss(Tensor(pred), Tensor(gt)).item() - 5.0) < 1e-6


def test_pose_loss_shape_mismatch():
    with pytest.raises(DimensionError):
        pose_loss(Tensor(np.zeros((2, 5, 3))), Tensor(np.zeros((2, 4, 3))))


def test_pose_loss_matches_oracle_100_cases():
    rng = np.random.default_rng(1)
    for _ in range(100):
        b, j = rng.integers(1, 6), rng.integers(1, 9)
        pred = rng.normal(size=(b, j, 3)) * 10
        gt = rng.normal(size=(b, j, 3)) * 10
        ours = pose_loss(Tensor(pred), Tensor(gt)).item()
        assert abs(ours - _pose_loss_oracle(pred, gt)) < 1e-4 * max(1.0, ours)


def test_action_loss_certain_prediction_is_zero():
    y = np.zeros(4)
    y[2] = 1.0
    assert action_loss(Tensor(y), 2).item() == 0.0


def test_action_loss_uniform_is_log_k():
    for k in (2, 4, 15):
        y = np.full(k, 1.0 / k)
        assert abs(action_loss(Tensor(y), 0).item() - math.log(k)) < 1e-6


def test_action_loss_direct_case():
    y = np.array([2 / 3, 1 / 3])
    assert abs(action_loss(Tensor(y), 1).item() - math.log(3)) < 1e-6


def test_action_loss_label_out_of_range():
    with pytest.raises(ConfigError):
        action_loss(Tensor(np.full(3, 1 / 3)), 3)


def test_action_loss_matches_oracle_100_cases():
    rng = np.random.default_rng(2)
    for _ in range(100):
        b, k = rng.integers(1, 5), rng.integers(2, 7)
        logits = rng.normal(size=(b, k))
        probs = np.exp(logits) / np.exp(logits).sum(axis=-1, keepdims=True)
        labels = rng.integers(0, k, size=b)
        expected = float(np.mean([-math.log(probs[i, labels[i]]) for i in range(b)]))
        ours = action_loss(Tensor(probs), labels).item()
        assert abs(ours - expected) < 1e-6


def test_total_loss_cases():
    lp, la = Tensor(np.array(2.0)), Tensor(np.array(3.0))
    assert total_loss(lp, la, 0.0).item() == 2.0
    assert abs(total_loss(lp, la, 0.1).item() - 2.3) < 1e-6
    assert total_loss(Tensor(np.array(0.0)), Tensor(np.array(0.0)), 0.1).item() == 0.0
    with pytest.raises(ConfigError):
        total_loss(lp, la, -0.1)


# -- metrics ------------------------------------------------------------------

def _mpjpe_oracle(pred, gt):
    total, count = 0.0, 0
    for b in range(pred.shape[0]):
        for j in range(pred.shape[1]):
            d = pred[b, j] - gt[b, j]
            total += math.sqrt(float((d * d).sum()))
            count += 1
    return total / count


def _dmpjpe_oracle(pred, gt):
    total, count = 0.0, 0
    for b in range(pred.shape[0]):
        for j in range(pred.shape[1]):
            total += abs(float(pred[b, j, 2] - gt[b, j, 2]))
            count += 1
    return total / count


def test_mpjpe_identical_zero_per_action():
    rng = np.random.default_rng(3)
    pred = rng.normal(size=(6, 4, 3))
    labels = np.array([0, 0, 1, 1, 2, 2])
    report = metrics.build_report(pred, pred.copy(), labels,
                                  ["a", "b", "c"], ["c"])
    assert report.p1 == 0.0 and report.p2 == 0.0 and report.p3 == 0.0
    assert all(v == 0.0 for v in report.per_action_p1.values())


def test_single_sample_aggregate_equals_sample_value():
    rng = np.random.default_rng(4)
    pred, gt = rng.normal(size=(1, 5, 3)), rng.normal(size=(1, 5, 3))
    report = metrics.build_report(pred, gt, np.array([0]), ["only"], ["only"])
    assert abs(report.p1 - metrics.mpjpe(pred, gt)) < 1e-12
    assert abs(report.p3 - report.per_action_p2["only"]) < 1e-12


def test_depth_offset_case():
    gt = np.random.default_rng(5).normal(size=(3, 4, 3))
    pred = gt.copy()
    pred[..., 2] += 2.0
    assert abs(metrics.dmpjpe(pred, gt) - 2.0) < 1e-6
    assert abs(metrics.mpjpe(pred, gt) - 2.0) < 1e-6   # x/y exact -> norms equal |dz|


def test_metrics_match_oracles_100_cases():
    rng = np.random.default_rng(6)
    for _ in range(100):
        b, j = rng.integers(1, 5), rng.integers(1, 7)
        pred = rng.normal(size=(b, j, 3)) * 20
        gt = rng.normal(size=(b, j, 3)) * 20
        assert abs(metrics.mpjpe(pred, gt) - _mpjpe_oracle(pred, gt)) < 1e-6
        assert abs(metrics.dmpjpe(pred, gt) - _dmpjpe_oracle(pred, gt)) < 1e-6


def test_aggregate_p1_is_count_weighted_mean():
    rng = np.random.default_rng(7)
    pred = rng.normal(size=(10, 4, 3))
    gt = rng.normal(size=(10, 4, 3))
    labels = np.array([0] * 7 + [1] * 3)
    report = metrics.build_report(pred, gt, labels, ["x", "y"], ["y"])
    weighted = (report.per_action_p1["x"] * 7 + report.per_action_p1["y"] * 3) / 10
    assert abs(report.p1 - weighted) < 1e-6


def test_tail_dmpjpe_cases():
    per_action = {"a": 1.0, "b": 2.0, "c": 6.0}
    assert metrics.tail_dmpjpe(per_action, ["a", "b", "c"]) == 3.0
    assert metrics.tail_dmpjpe(per_action, ["c"]) == 6.0
    assert metrics.tail_dmpjpe(per_action, ["a", "c"]) == 3.5
    with pytest.raises(ConfigError):
        metrics.tail_dmpjpe(per_action, [])
    with pytest.raises(ConfigError):
        metrics.tail_dmpjpe(per_action, ["missing"])


def test_tail_equals_p2_when_all_actions_hard_and_balanced():
    rng = np.random.default_rng(8)
    pred = rng.normal(size=(9, 4, 3))
    gt = rng.normal(size=(9, 4, 3))
    labels = np.array([0, 0, 0, 1, 1, 1, 2, 2, 2])
    report = metrics.build_report(pred, gt, labels, ["a", "b", "c"],
                                  ["a", "b", "c"])
    assert abs(report.p3 - report.p2) < 1e-6


def test_accuracy_recount():
    rng = np.random.default_rng(9)
    pred = rng.normal(size=(8, 4, 3))
    labels = np.array([0, 1, 2, 3, 0, 1, 2, 3])
    predicted = np.array([0, 1, 2, 0, 0, 1, 2, 3])
    report = metrics.build_report(pred, pred, labels, list("abcd"), ["d"],
                                  predicted_labels=predicted)
    assert report.accuracy == pytest.approx((predicted == labels).mean())


# -- classification vector against brute force -----------------------------------

def _classify_oracle(t_bar, a, tau):
    k = t_bar.shape[0]
    cos = np.empty(k)
    for i in range(k):
        num = float((t_bar[i] * a).sum())
        den = math.sqrt(float((t_bar[i] ** 2).sum())) * math.sqrt(float((a ** 2).sum())) + 1e-8
        cos[i] = num / den
    e = np.exp(cos / tau - (cos / tau).max())
    return e / e.sum()


def test_classification_matches_oracle_100_cases():
    rng = np.random.default_rng(10)
    for _ in range(100):
        k, c = rng.integers(2, 7), rng.integers(3, 10)
        t_bar = rng.normal(size=(k, c))
        a = rng.normal(size=c)
        tau = float(rng.uniform(0.05, 1.5))
        ours = classify(Tensor(t_bar), Tensor(a), tau).data
        assert np.abs(ours - _classify_oracle(t_bar, a, tau)).max() < 1e-6
