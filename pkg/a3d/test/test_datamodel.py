#!/usr/bin/env python3
"""
Tests for the core data types
"""

import numpy as np
import pytest

from a3d.datamodel import (BoundingBox, ClassVocabulary, DatasetBundle, DetectionRecord,
                           EmbeddingTable, LinearModel, Split, Stream, StreamFeatures,
                           VideoSample, check_distribution, parse_label)
from a3d.errors import ValidationError


def test_parse_label():
    """Class and detector labels split into lowercase words"""
    test_cases = [
        {"label": "PlayingGuitar", "expected": ["playing", "guitar"], "description": "camel case"},
        {"label": "bowling", "expected": ["bowling"], "description": "single word"},
        {"label": "Apply_Eye_Makeup", "expected": ["apply", "eye", "makeup"], "description": "underscores"},
        {"label": "ride horse", "expected": ["ride", "horse"], "description": "spaces"},
        {"label": "YoYo", "expected": ["yo", "yo"], "description": "repeated capital"},
    ]

    for case in test_cases:
        assert parse_label(case["label"]) == case["expected"], case["description"]


def test_parse_label_rejects_empty():
    for label in ["", "   "]:
        with pytest.raises(ValidationError):
            parse_label(label)


def test_vocabulary():
    vocab = ClassVocabulary(("PlayingGuitar", "RidingHorse"))
    assert len(vocab) == 2
    assert vocab.index_of("RidingHorse") == 1
    assert vocab.words(0) == ["playing", "guitar"]

    with pytest.raises(ValidationError):
        vocab.index_of("Bowling")
    with pytest.raises(ValidationError):
        ClassVocabulary(("A", "A"))
    with pytest.raises(ValidationError):
        ClassVocabulary(())


def test_bounding_box_invariants():
    test_cases = [
        {"box": (0, 0, 0, 10), "description": "zero width"},
        {"box": (0, 0, 10, -1), "description": "negative height"},
        {"box": (0, 0, float("nan"), 10), "description": "nan width"},
    ]
    for case in test_cases:
        with pytest.raises(ValidationError):
            BoundingBox(*case["box"])
    assert BoundingBox(5, 5, 19, 30).min_side == 19


def test_detection_record():
    det = DetectionRecord("v1", 0, ("Guitar", "Case"), 1.0, BoundingBox(0, 0, 20, 20))
    assert det.label_words == ("guitar", "case")
    assert det.feature is None

    with pytest.raises(ValidationError):
        DetectionRecord("v1", 0, ("guitar",), 1.5, BoundingBox(0, 0, 20, 20))
    with pytest.raises(ValidationError):
        DetectionRecord("v1", -1, ("guitar",), 0.5, BoundingBox(0, 0, 20, 20))
    with pytest.raises(ValidationError):
        DetectionRecord("v1", 0, (), 0.5, BoundingBox(0, 0, 20, 20))


def test_embedding_table_duplicate_last_wins(caplog):
    table = EmbeddingTable(2)
    table.add("Guitar", [1.0, 0.0])
    table.add("guitar", [0.0, 1.0])

    assert len(table) == 1
    np.testing.assert_array_equal(table.get("GUITAR"), [0.0, 1.0])
    assert "Duplicate" in caplog.text
    assert "drum" not in table

    with pytest.raises(ValidationError):
        table.add("drum", [1.0, 2.0, 3.0])


def test_check_distribution():
    check_distribution(np.array([0.25, 0.75]))
    for probs in ([0.5, 0.6], [-0.1, 1.1], []):
        with pytest.raises(ValidationError):
            check_distribution(np.array(probs))


def test_linear_model_zeros():
    model = LinearModel.zeros(3, 4)
    assert (model.num_classes, model.input_dim) == (3, 4)
    np.testing.assert_array_equal(model.logits(np.ones(4)), np.zeros(3))
    with pytest.raises(ValidationError):
        model.logits(np.ones(5))


def test_bundle_rejects_feature_dim_mismatch():
    vocab = ClassVocabulary(("A", "B"))
    with pytest.raises(ValidationError):
        DatasetBundle(vocab, [VideoSample("v1", Split.TEST, 1, 0)],
                      [StreamFeatures("v1", Stream.SPATIAL, [1.0, 2.0, 3.0])], [], EmbeddingTable(2))


def test_bundle_accessors(small_bundle):
    video_id = small_bundle.video_ids()[0]
    spatial, temporal = small_bundle.stream_pair(video_id)
    assert spatial.size == temporal.size == len(small_bundle.vocabulary)
    assert small_bundle.split_indices() == [1, 2, 3]

    # every video is a test video in exactly one split
    for vid in small_bundle.video_ids():
        test_splits = [s.split_index for s in small_bundle.samples
                       if s.video_id == vid and s.split == Split.TEST]
        assert len(test_splits) == 1

    with pytest.raises(ValidationError):
        small_bundle.stream_pair("missing")
