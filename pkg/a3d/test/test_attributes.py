#!/usr/bin/env python3
"""
Tests for visual attribute candidate filtering
"""

import itertools

import numpy as np
import pytest

from a3d.attributes import (FilterConfig, apply_test_filters, apply_training_filters, cosine_sim,
                            filter_by_bbox, filter_by_confidence, filter_by_relevance, filter_person,
                            label_vector, sample_frames)
from a3d.errors import NumericError, ValidationError

WORDS = [("guitar",), ("person",), ("person", "bicycle"), ("tree",), ("dhol",)]


def _random_detections(detection, rng, count=1000):
    return [detection(words=WORDS[rng.integers(len(WORDS))],
                      confidence=float(rng.choice([0.019, 0.02, rng.uniform()])),
                      width=float(rng.choice([19.0, 20.0, rng.uniform(1, 100)])),
                      height=float(rng.uniform(1, 100)),
                      video_id=f"v{rng.integers(20)}")
            for _ in range(count)]


def _is_subsequence(sub, seq):
    it = iter(seq)
    return all(any(x is y for y in it) for x in sub)


def test_filter_boundaries(detection):
    """Confidence and box side thresholds are inclusive"""
    test_cases = [
        {"det": detection(confidence=0.02), "kept": True, "filter": "confidence", "description": "0.02 kept"},
        {"det": detection(confidence=0.019), "kept": False, "filter": "confidence", "description": "0.019 removed"},
        {"det": detection(width=19, height=30), "kept": False, "filter": "bbox", "description": "19x30 removed"},
        {"det": detection(width=20, height=20), "kept": True, "filter": "bbox", "description": "20x20 kept"},
        {"det": detection(words=("person",)), "kept": False, "filter": "person", "description": "person removed"},
        {"det": detection(words=("guitar",)), "kept": True, "filter": "person", "description": "guitar kept"},
        {"det": detection(words=("person", "bicycle")), "kept": False, "filter": "person",
         "description": "any person word removes"},
    ]

    for case in test_cases:
        if case["filter"] == "confidence":
            out = filter_by_confidence([case["det"]], 0.02)
        elif case["filter"] == "bbox":
            out = filter_by_bbox([case["det"]], 20)
        else:
            out = filter_person([case["det"]], ["person"])
        assert (len(out) == 1) == case["kept"], case["description"]


def test_filters_match_linear_scan(detection, rng):
    dets = _random_detections(detection, rng)
    assert filter_by_confidence(dets, 0.02) == [d for d in dets if d.confidence >= 0.02]
    assert filter_by_bbox(dets, 20) == [d for d in dets if min(d.bbox.width, d.bbox.height) >= 20]


def test_filter_algebra(detection, rng):
    """Idempotent, pairwise commuting, order preserving"""
    dets = _random_detections(detection, rng)
    filters = [
        lambda ds: filter_by_confidence(ds, 0.02),
        lambda ds: filter_by_bbox(ds, 20),
        lambda ds: filter_person(ds, ["person"]),
    ]

    for f in filters:
        once = f(dets)
        assert f(once) == once
        assert _is_subsequence(once, dets)

    for f, g in itertools.combinations(filters, 2):
        assert f(g(dets)) == g(f(dets))


def test_apply_test_filters_composition(detection, rng):
    dets = _random_detections(detection, rng)
    expected = filter_person(filter_by_bbox(filter_by_confidence(dets, 0.02), 20), ["person"])
    assert apply_test_filters(dets, FilterConfig()) == expected


def test_label_vector(toy_table, caplog):
    np.testing.assert_array_equal(label_vector(["guitar"], toy_table), [0.0, 1.0, 0.0])
    np.testing.assert_array_equal(label_vector(["playing", "guitar"], toy_table), [0.5, 0.5, 0.0])

    np.testing.assert_array_equal(label_vector(["guitar", "zither"], toy_table), [0.0, 1.0, 0.0])
    assert "zither" in caplog.text

    with pytest.raises(ValidationError):
        label_vector(["zither"], toy_table)


def test_cosine_sim():
    test_cases = [
        {"u": [1.0, 2.0], "v": [1.0, 2.0], "expected": 1.0, "description": "self"},
        {"u": [1.0, 0.0], "v": [0.0, 1.0], "expected": 0.0, "description": "orthogonal"},
        {"u": [0.6, 0.8], "v": [0.8, 0.6], "expected": 0.96, "description": "hand computed"},
    ]
    for case in test_cases:
        assert cosine_sim(np.array(case["u"]), np.array(case["v"])) == pytest.approx(
            case["expected"], abs=1e-12), case["description"]

    with pytest.raises(NumericError):
        cosine_sim(np.zeros(2), np.ones(2))


def test_relevance_toy_table(detection, toy_table):
    """s(t)=[.5,.5,0]: guitar at cos 0.7071 is kept, tree at cos 0 is discarded"""
    guitar = detection(words=("guitar",))
    tree = detection(words=("tree",))
    unknown = detection(words=("zither",))

    assert filter_by_relevance([guitar, tree, unknown], ["playing", "guitar"], toy_table, 0.5) == [guitar]
    assert filter_by_relevance([guitar, tree, unknown], ["playing", "guitar"], toy_table, -1.0) == [guitar, tree]

    with pytest.raises(ValidationError):
        filter_by_relevance([guitar], ["bowling"], toy_table, 0.5)


def test_training_filters_add_relevance(detection, toy_table):
    keep = detection(words=("guitar",))
    dets = [keep, detection(words=("tree",)), detection(words=("guitar",), confidence=0.01),
            detection(words=("person",))]
    assert apply_training_filters(dets, FilterConfig(), ["playing", "guitar"], toy_table) == [keep]


def test_filter_config_validation():
    for kwargs in ({"min_confidence": 1.5}, {"min_side_px": -1}, {"t_sim": 2.0}):
        with pytest.raises(ValidationError):
            FilterConfig(**kwargs)
    assert FilterConfig(person_words=("Person",)).person_words == ("person",)


def test_sample_frames(detection):
    dets = [detection(video_id=v, frame_index=f) for v in ("a", "b") for f in range(5)]
    assert sample_frames(dets, 0, seed=0) == dets

    picked = sample_frames(dets, 2, seed=0)
    for video_id in ("a", "b"):
        assert len({d.frame_index for d in picked if d.video_id == video_id}) == 2
    assert sample_frames(dets, 2, seed=0) == picked
    assert _is_subsequence(picked, dets)
