#!/usr/bin/env python3
"""
Tests for the seeded synthetic dataset generator
"""

import numpy as np
import pytest

from a3d.attributes import cosine_sim, label_vector
from a3d.errors import ValidationError
from a3d.fusion import fuse_revised
from a3d.storage import save_bundle
from a3d.synthetic import DISTRACTORS, SyntheticConfig, gen_synthetic


def test_same_seed_same_bytes(tmp_path, small_config):
    first = save_bundle(str(tmp_path / "a"), gen_synthetic(small_config, seed=11))
    second = save_bundle(str(tmp_path / "b"), gen_synthetic(small_config, seed=11))

    for name in first:
        with open(first[name], "rb") as fa, open(second[name], "rb") as fb:
            assert fa.read() == fb.read(), name


def test_different_seed_differs(small_config):
    a = gen_synthetic(small_config, seed=1)
    b = gen_synthetic(small_config, seed=2)
    assert not np.array_equal(a.features[0].vector, b.features[0].vector)


def test_no_low_confidence_videos():
    """With fraction 0 every fused p1 clears the 0.1 gate"""
    bundle = gen_synthetic(SyntheticConfig(num_classes=20, num_videos=200, low_confidence_fraction=0.0), seed=5)
    for video_id in bundle.video_ids():
        assert fuse_revised(*bundle.stream_pair(video_id)).max() > 0.1


def test_low_confidence_fraction_routes_to_attributes():
    bundle = gen_synthetic(SyntheticConfig(num_classes=20, num_videos=200, low_confidence_fraction=0.3), seed=5)
    routed = [fuse_revised(*bundle.stream_pair(v)).max() <= 0.1 for v in bundle.video_ids()]
    assert sum(routed) == 60


def test_few_classes_warn_that_flat_videos_stay_with_p1(caplog):
    test_cases = [
        {"classes": 5, "fraction": 0.3, "warns": True, "description": "flat p1 peaks at 0.2"},
        {"classes": 10, "fraction": 0.3, "warns": True, "description": "flat p1 peaks at 0.1"},
        {"classes": 20, "fraction": 0.3, "warns": False, "description": "flat p1 under the gate"},
        {"classes": 5, "fraction": 0.0, "warns": False, "description": "no flat videos"},
    ]
    for case in test_cases:
        caplog.clear()
        cfg = SyntheticConfig(num_classes=case["classes"], num_videos=100, low_confidence_fraction=case["fraction"])
        bundle = gen_synthetic(cfg, seed=5)
        assert ("not routed" in caplog.text) == case["warns"], case["description"]

        if case["classes"] == 5:
            assert all(fuse_revised(*bundle.stream_pair(v)).max() > 0.1 for v in bundle.video_ids())


def test_embedding_layout(small_bundle):
    """Each class label is similar to its own attribute words and not to distractors"""
    table = small_bundle.embeddings
    for index in range(len(small_bundle.vocabulary)):
        words = small_bundle.vocabulary.words(index)
        target = label_vector(words, table)
        noun = words[-1]
        assert cosine_sim(target, table.get(noun + "case")) > 0.5
        for distractor in DISTRACTORS:
            assert cosine_sim(target, table.get(distractor)) < 0.5


def test_planted_noise_detections(small_bundle):
    """Every video carries one tiny box and one sub-threshold confidence"""
    for video_id in small_bundle.video_ids():
        dets = small_bundle.detections_for(video_id)
        assert any(d.bbox.min_side < 20 for d in dets)
        assert any(d.confidence < 0.02 for d in dets)
        assert any("person" in d.label_words for d in dets)


def test_invalid_config():
    test_cases = [
        {"kwargs": {"num_classes": 2, "num_videos": 1}, "description": "fewer videos than classes"},
        {"kwargs": {"num_classes": 1, "num_videos": 10}, "description": "single class"},
        {"kwargs": {"low_confidence_fraction": 1.5}, "description": "fraction out of range"},
        {"kwargs": {"spatial_margin": 1.0}, "description": "margin below clipped noise"},
    ]
    for case in test_cases:
        with pytest.raises(ValidationError):
            SyntheticConfig(**case["kwargs"])
