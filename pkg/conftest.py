"""
Shared pytest fixtures for the A3D toolkit tests
"""

import numpy as np
import pytest

from a3d.datamodel import BoundingBox, DetectionRecord, EmbeddingTable
from a3d.synthetic import SyntheticConfig, gen_synthetic


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_config():
    return SyntheticConfig(num_classes=6, num_videos=60)


@pytest.fixture
def small_bundle(small_config):
    return gen_synthetic(small_config, seed=3)


@pytest.fixture
def toy_table():
    """playing/guitar/tree on orthogonal axes"""
    return EmbeddingTable(3, {
        "playing": [1.0, 0.0, 0.0],
        "guitar": [0.0, 1.0, 0.0],
        "tree": [0.0, 0.0, 1.0],
    })


def make_detection(words=("guitar",), confidence=0.5, width=30.0, height=30.0,
                   video_id="v1", frame_index=0, feature=None):
    return DetectionRecord(video_id, frame_index, tuple(words), confidence,
                           BoundingBox(0.0, 0.0, width, height), feature)


@pytest.fixture
def detection():
    return make_detection
