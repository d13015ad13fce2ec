#!/usr/bin/env python3
"""
Tests for gated joint prediction and the evaluation harness
"""

import logging

import numpy as np
import pandas as pd
import pytest

from a3d.attributes import FilterConfig
from a3d.datamodel import ClassVocabulary, Split, VideoSample
from a3d.errors import ValidationError
from a3d.fusion import FusionMode, FusionWeights
from a3d.inference import (GateConfig, compare_fusions, evaluate, indicator, joint_predict,
                           routes_to_attributes, run_pipeline)
from a3d.synthetic import SyntheticConfig, gen_synthetic
from a3d.training import Strategy, TrainConfig, fit_split_classifiers


def test_indicator():
    test_cases = [
        {"x": 0.0, "expected": 0, "description": "boundary"},
        {"x": 0.05, "expected": 1, "description": "positive"},
        {"x": -1.0, "expected": 0, "description": "negative"},
    ]
    for case in test_cases:
        assert indicator(case["x"]) == case["expected"], case["description"]


def test_joint_predict_examples():
    gate = GateConfig(0.1)
    p2 = np.full(51, 1 / 51)

    confident = np.array([0.5, 0.3, 0.2])
    assert joint_predict(confident, np.array([0.2, 0.3, 0.5]), gate) is confident

    flat = np.full(51, 1 / 51)
    other = np.eye(51)[3]
    assert joint_predict(flat, other, gate) is other

    assert joint_predict(p2, other, GateConfig(0.0)) is p2


def test_joint_predict_tie_goes_to_attributes(caplog):
    caplog.set_level(logging.INFO)
    p1 = np.full(10, 0.1)
    p2 = np.eye(10)[0]
    assert joint_predict(p1, p2, GateConfig(0.1)) is p2
    assert routes_to_attributes(p1, GateConfig(0.1))
    assert "tie" in caplog.text


def test_gating_law_random_pairs():
    rng = np.random.default_rng(42)
    gate = GateConfig(0.1)
    for _ in range(10000):
        p1 = rng.dirichlet(np.full(20, rng.choice([0.05, 1.0, 20.0])))
        p2 = rng.dirichlet(np.ones(20))
        expected = p1 if p1.max() > 0.1 else p2
        assert joint_predict(p1, p2, gate) is expected


def test_joint_predict_errors():
    with pytest.raises(ValidationError):
        joint_predict(np.array([0.5, 0.5]), np.array([1.0, 0.0, 0.0]))
    with pytest.raises(ValidationError):
        GateConfig(1.5)


def _samples(labels, split_index=1):
    return [VideoSample(f"v{i}", Split.TEST, split_index, label) for i, label in enumerate(labels)]


def test_evaluate_counts():
    vocab = ClassVocabulary(("A", "B"))
    samples = _samples([0, 1] * 5)
    correct = {(1, s.video_id): np.eye(2)[s.true_label] for s in samples}
    report = evaluate(samples, correct, vocab)
    assert report.split_accuracy == {1: 1.0}
    assert report.mean_accuracy == 1.0

    alternating = {(1, s.video_id): np.eye(2)[s.true_label if i % 2 == 0 else 1 - s.true_label]
                   for i, s in enumerate(samples)}
    assert evaluate(samples, alternating, vocab).mean_accuracy == 0.5


def test_evaluate_tie_breaks_to_lowest_index():
    vocab = ClassVocabulary(("A", "B"))
    samples = _samples([0, 1])
    predictions = {(1, "v0"): np.array([0.5, 0.5]), (1, "v1"): np.array([0.5, 0.5])}
    assert evaluate(samples, predictions, vocab).mean_accuracy == 0.5


def test_evaluate_matches_counting_oracle(rng):
    vocab = ClassVocabulary(tuple(f"Class{i}" for i in range(5)))
    samples = _samples(rng.integers(5, size=30), 1) + _samples(rng.integers(5, size=20), 2)
    predictions = {(s.split_index, s.video_id): rng.dirichlet(np.ones(5)) for s in samples}
    report = evaluate(samples, predictions, vocab)

    for split_index in (1, 2):
        chosen = [s for s in samples if s.split_index == split_index]
        hits = sum(int(np.argmax(predictions[(s.split_index, s.video_id)]) == s.true_label) for s in chosen)
        assert report.split_accuracy[split_index] == hits / len(chosen)
    assert report.mean_accuracy == pytest.approx(np.mean(list(report.split_accuracy.values())))
    assert report.per_class["total"].sum() == 50


def test_evaluate_ignores_sample_order(rng):
    vocab = ClassVocabulary(tuple(f"Class{i}" for i in range(4)))
    samples = _samples(rng.integers(4, size=25), 1) + _samples(rng.integers(4, size=15), 2)
    predictions = {(s.split_index, s.video_id): rng.dirichlet(np.ones(4)) for s in samples}
    report = evaluate(samples, predictions, vocab)

    for _ in range(5):
        shuffled = [samples[i] for i in rng.permutation(len(samples))]
        again = evaluate(shuffled, predictions, vocab)
        assert again.split_accuracy == report.split_accuracy
        assert again.mean_accuracy == report.mean_accuracy
        pd.testing.assert_frame_equal(again.per_class, report.per_class)


def test_evaluate_missing_prediction():
    vocab = ClassVocabulary(("A", "B"))
    with pytest.raises(ValidationError):
        evaluate(_samples([0, 1]), {(1, "v0"): np.array([1.0, 0.0])}, vocab)


def test_report_frames():
    vocab = ClassVocabulary(("A", "B"))
    samples = _samples([0, 1])
    predictions = {(1, "v0"): np.array([1.0, 0.0]), (1, "v1"): np.array([1.0, 0.0])}
    report = evaluate(samples, predictions, vocab, "p1", routed={(1, "v0"): True, (1, "v1"): False})

    frame = report.metrics_frame()
    assert list(frame.columns) == ["metric", "split", "value"]
    assert frame.loc[frame["split"] == "mean", "value"].item() == 0.5
    assert report.gate_fraction == 0.5
    assert "routed to p2" in report.to_text()
    assert "correct" not in report.to_text()
    detailed = report.to_text(per_class=True)
    assert "correct" in detailed and "label" in detailed
    assert report.per_class["total"].tolist() == [1, 1]


@pytest.fixture
def trained(small_bundle):
    return fit_split_classifiers(small_bundle, Strategy.ATTR_CLASSIFIER, FilterConfig(), TrainConfig(max_epochs=3))


def test_gate_extremes(small_bundle, trained):
    """T=0 reduces to p1, T=1 reduces to p2"""
    weights, cfg = FusionWeights(), FilterConfig()

    open_gate = run_pipeline(small_bundle, weights, FusionMode.REVISED, cfg, trained, GateConfig(0.0))
    assert open_gate.joint.split_accuracy == open_gate.p1.split_accuracy
    assert open_gate.joint.gate_fraction == 0.0

    closed_gate = run_pipeline(small_bundle, weights, FusionMode.REVISED, cfg, trained, GateConfig(1.0))
    assert closed_gate.joint.split_accuracy == closed_gate.p2.split_accuracy
    assert closed_gate.joint.gate_fraction == 1.0


def test_run_pipeline_shares_samples(small_bundle, trained):
    reports = run_pipeline(small_bundle, FusionWeights(), FusionMode.REVISED, FilterConfig(), trained, GateConfig())
    keys = {name: set(preds) for name, preds in reports.predictions.items()}
    assert keys["p1"] == keys["p2"] == keys["joint"]
    assert len(keys["p1"]) == len(small_bundle.video_ids())
    assert list(reports.summary_frame()["classifier"]) == ["p1", "p2", "joint"]


def test_compare_fusions(small_bundle):
    reports = compare_fusions(small_bundle, FusionWeights())
    assert set(reports) == {"revised", "original"}
    assert all(0.0 <= r.mean_accuracy <= 1.0 for r in reports.values())


def test_confident_streams_never_route():
    """No low-confidence videos: the joint report is the p1-only report"""
    bundle = gen_synthetic(SyntheticConfig(num_classes=6, num_videos=60, low_confidence_fraction=0.0), seed=3)
    classifiers = fit_split_classifiers(bundle, Strategy.ATTR_CLASSIFIER, FilterConfig(), TrainConfig(max_epochs=3))
    reports = run_pipeline(bundle, FusionWeights(), FusionMode.REVISED, FilterConfig(), classifiers, GateConfig())

    assert reports.joint.split_accuracy == reports.p1.split_accuracy
    assert reports.joint.mean_accuracy == reports.p1.mean_accuracy
    assert reports.joint.gate_fraction == 0.0
    for key, p1 in reports.predictions["p1"].items():
        assert reports.predictions["joint"][key] is p1
