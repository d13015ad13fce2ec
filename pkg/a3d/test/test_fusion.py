#!/usr/bin/env python3
"""
Tests for two-stream fusion
"""

import math

import numpy as np
import pytest

from a3d.errors import ValidationError
from a3d.fusion import (FusionMode, FusionWeights, find_disagreement_witness, fuse, fuse_original,
                        fuse_revised, softmax)


def _oracle_softmax(values):
    exps = [math.exp(v) for v in values]
    return [e / sum(exps) for e in exps]


def test_softmax():
    test_cases = [
        {"logits": [0.0, 0.0], "expected": [0.5, 0.5], "description": "symmetry"},
        {"logits": [1000.0, 0.0], "expected": [1.0, 0.0], "description": "no overflow"},
        {"logits": [1.2, 0.8], "expected": _oracle_softmax([1.2, 0.8]), "description": "oracle"},
    ]
    for case in test_cases:
        np.testing.assert_allclose(softmax(np.array(case["logits"])), case["expected"],
                                   rtol=0, atol=1e-12, err_msg=case["description"])

    with pytest.raises(ValidationError):
        softmax(np.array([]))


def test_fuse_revised_hand_computed():
    fused = fuse_revised([2.0, 0.0], [0.0, 2.0], FusionWeights(0.6, 0.4))
    np.testing.assert_allclose(fused, [0.598687660112452, 0.401312339887548], rtol=0, atol=1e-9)
    np.testing.assert_allclose(fused, _oracle_softmax([1.2, 0.8]), rtol=0, atol=1e-12)


def test_fuse_revised_properties(rng):
    f_s, f_t = rng.normal(size=5), rng.normal(size=5)

    np.testing.assert_array_equal(fuse_revised(f_s, f_t, FusionWeights(1.0, 0.0)), softmax(f_s))
    np.testing.assert_allclose(fuse_revised([3.0, 3.0], [3.0, 3.0]), [0.5, 0.5], rtol=0, atol=1e-15)
    np.testing.assert_allclose(fuse_revised(f_s + 7.0, f_t + 7.0), fuse_revised(f_s, f_t), rtol=0, atol=1e-12)

    # both weight orderings are accepted
    for w in (FusionWeights(0.6, 0.4), FusionWeights(0.4, 0.6)):
        assert fuse_revised(f_s, f_t, w).sum() == pytest.approx(1.0, abs=1e-12)
        assert np.argmax(fuse_revised(f_s, f_s, w.scaled(3.0))) == np.argmax(fuse_revised(f_s, f_s, w))


def test_fuse_original():
    np.testing.assert_allclose(fuse_original([0.0, 0.0], [0.0, 0.0], FusionWeights(0.5, 0.5)), [0.5, 0.5])

    expected = (0.6 * np.array(_oracle_softmax([4.0, 0.0])) + 0.4 * np.array(_oracle_softmax([0.0, 1.0])))
    np.testing.assert_allclose(fuse_original([4.0, 0.0], [0.0, 1.0], FusionWeights(0.6, 0.4)),
                               expected, rtol=0, atol=1e-10)


def test_fuse_original_scale_invariant(rng):
    f_s, f_t = rng.normal(size=4), rng.normal(size=4)
    w = FusionWeights(0.6, 0.4)
    np.testing.assert_allclose(fuse_original(f_s, f_t, w.scaled(5.0)), fuse_original(f_s, f_t, w),
                               rtol=0, atol=1e-12)


def test_fusions_coincide_with_single_stream(rng):
    """With w=(1, 0) both fusions return softmax(f_s) bit for bit"""
    w = FusionWeights(1.0, 0.0)
    for _ in range(1000):
        f_s, f_t = rng.normal(size=7), rng.normal(size=7)
        np.testing.assert_array_equal(fuse_revised(f_s, f_t, w), fuse_original(f_s, f_t, w))
        np.testing.assert_array_equal(fuse_original(f_s, f_t, w), softmax(f_s))


def test_disagreement_witness():
    witness = find_disagreement_witness(seed=0)
    assert witness is not None
    f_s, f_t, w = witness
    assert np.argmax(fuse(f_s, f_t, w, FusionMode.REVISED)) != np.argmax(fuse(f_s, f_t, w, FusionMode.ORIGINAL))


def test_fusion_errors():
    with pytest.raises(ValidationError):
        fuse_revised([1.0, 2.0], [1.0, 2.0, 3.0])
    with pytest.raises(ValidationError):
        fuse_original([1.0], [1.0, 2.0])
    with pytest.raises(ValidationError):
        FusionWeights(0.0, 0.0)
    with pytest.raises(ValidationError):
        FusionWeights(-0.1, 1.0)
