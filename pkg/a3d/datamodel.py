"""
Core data types for the A3D toolkit
Vocabulary, stream features, detections, embeddings, samples and linear models
"""

import logging
import math
import re
from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .errors import NumericError, ValidationError

logger = logging.getLogger(__name__)

# FeatureVector and ProbabilityDistribution are 1-D float64 arrays
FeatureVector = np.ndarray
ProbabilityDistribution = np.ndarray

_CAMEL_BOUNDARY = re.compile(r'(?<=[a-z0-9])(?=[A-Z])|(?<=[A-Z])(?=[A-Z][a-z])')
_DELIMITERS = re.compile(r'[\s_\-]+')


def parse_label(label: str) -> List[str]:
    """Split a class or detector label into ordered lowercase words"""
    if label is None or not label.strip():
        raise ValidationError("empty label")

    words = []
    for chunk in _DELIMITERS.split(label.strip()):
        if chunk:
            words.extend(part.lower() for part in _CAMEL_BOUNDARY.split(chunk) if part)
    return words


def as_feature_vector(values: Iterable[float], name: str = "vector") -> FeatureVector:
    """Convert values to a finite, non-empty float64 vector"""
    vector = np.asarray(list(values) if not isinstance(values, np.ndarray) else values,
                        dtype=np.float64)
    if vector.ndim != 1 or vector.size == 0:
        raise ValidationError(f"{name} must be a non-empty 1-D vector")
    if not np.all(np.isfinite(vector)):
        raise NumericError(f"{name} contains non-finite entries")
    return vector


def check_distribution(probs: np.ndarray, name: str = "distribution", atol: float = 1e-9) -> np.ndarray:
    """Validate a probability distribution"""
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim != 1 or probs.size == 0:
        raise ValidationError(f"{name} must be a non-empty 1-D vector")
    if not np.all(np.isfinite(probs)) or np.any(probs < 0):
        raise ValidationError(f"{name} has negative or non-finite entries")
    if abs(probs.sum() - 1.0) > atol:
        raise ValidationError(f"{name} sums to {probs.sum():.12f}, not 1")
    return probs


@dataclass(frozen=True)
class ClassVocabulary:
    """Ordered, unique class labels"""

    labels: Tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(self.labels))
        if not self.labels:
            raise ValidationError("vocabulary is empty")
        if len(set(self.labels)) != len(self.labels):
            raise ValidationError("vocabulary labels must be unique")
        for label in self.labels:
            parse_label(label)

    def __len__(self) -> int:
        return len(self.labels)

    def index_of(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise ValidationError(f"unknown class label: {label}")

    def words(self, index: int) -> List[str]:
        return parse_label(self.labels[index])


class Stream(str, Enum):
    SPATIAL = "spatial"
    TEMPORAL = "temporal"


class Split(str, Enum):
    TRAIN = "train"
    TEST = "test"


@dataclass(frozen=True)
class StreamFeatures:
    """Last-FC output of one I3D stream for one video"""

    video_id: str
    stream: Stream
    vector: FeatureVector

    def __post_init__(self):
        if not self.video_id:
            raise ValidationError("empty video_id")
        object.__setattr__(self, "stream", Stream(self.stream))
        object.__setattr__(self, "vector", as_feature_vector(self.vector, "stream vector"))


@dataclass(frozen=True)
class BoundingBox:
    x: float
    y: float
    width: float
    height: float

    def __post_init__(self):
        values = (self.x, self.y, self.width, self.height)
        if not all(math.isfinite(v) for v in values):
            raise ValidationError("bbox has non-finite fields")
        if self.width <= 0 or self.height <= 0:
            raise ValidationError(f"bbox width/height must be > 0, got {self.width}x{self.height}")

    @property
    def min_side(self) -> float:
        return min(self.width, self.height)


@dataclass(frozen=True)
class DetectionRecord:
    """One detected attribute candidate"""

    video_id: str
    frame_index: int
    label_words: Tuple[str, ...]
    confidence: float
    bbox: BoundingBox
    feature: Optional[FeatureVector] = None

    def __post_init__(self):
        if not self.video_id:
            raise ValidationError("empty video_id")
        if int(self.frame_index) != self.frame_index or self.frame_index < 0:
            raise ValidationError(f"frame index must be a non-negative integer, got {self.frame_index}")
        words = tuple(w.lower() for w in self.label_words)
        if not words or not all(words):
            raise ValidationError("detection label has no words")
        object.__setattr__(self, "label_words", words)
        if not (0.0 <= self.confidence <= 1.0):
            raise ValidationError(f"confidence must be in [0,1], got {self.confidence}")
        if self.feature is not None:
            object.__setattr__(self, "feature", as_feature_vector(self.feature, "detection feature"))


class EmbeddingTable:
    """Word -> vector table standing in for a word2vec model; lookups are lowercased"""

    def __init__(self, dim: int, entries: Optional[Mapping[str, Sequence[float]]] = None):
        if dim <= 0:
            raise ValidationError(f"embedding dim must be positive, got {dim}")
        self.dim = int(dim)
        self._entries: Dict[str, np.ndarray] = {}
        for word, vector in (entries or {}).items():
            self.add(word, vector)

    def add(self, word: str, vector: Sequence[float]):
        key = word.lower()
        values = as_feature_vector(vector, f"embedding '{word}'")
        if values.size != self.dim:
            raise ValidationError(f"embedding '{word}' has dim {values.size}, expected {self.dim}")
        if key in self._entries:
            logger.warning(f"Duplicate embedding word '{key}': last occurrence wins")
        self._entries[key] = values

    def get(self, word: str) -> Optional[np.ndarray]:
        return self._entries.get(word.lower())

    def __contains__(self, word: str) -> bool:
        return word.lower() in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def words(self) -> List[str]:
        return list(self._entries)

    def items(self):
        return self._entries.items()


@dataclass(frozen=True)
class VideoSample:
    """Membership of one video in one of the three train/test splits"""

    video_id: str
    split: Split
    split_index: int
    true_label: int

    def __post_init__(self):
        object.__setattr__(self, "split", Split(self.split))
        if self.split_index not in (1, 2, 3):
            raise ValidationError(f"split_index must be 1, 2 or 3, got {self.split_index}")
        if self.true_label < 0:
            raise ValidationError(f"invalid true label {self.true_label}")


@dataclass
class LinearModel:
    """Fully connected classifier: logits = W x + b"""

    weights: np.ndarray
    biases: np.ndarray

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.biases = np.asarray(self.biases, dtype=np.float64)
        if self.weights.ndim != 2 or self.biases.shape != (self.weights.shape[0],):
            raise ValidationError(
                f"inconsistent linear model shapes {self.weights.shape} / {self.biases.shape}")
        if not (np.all(np.isfinite(self.weights)) and np.all(np.isfinite(self.biases))):
            raise NumericError("linear model has non-finite parameters")

    @classmethod
    def zeros(cls, num_classes: int, input_dim: int) -> "LinearModel":
        return cls(np.zeros((num_classes, input_dim)), np.zeros(num_classes))

    @property
    def num_classes(self) -> int:
        return self.weights.shape[0]

    @property
    def input_dim(self) -> int:
        return self.weights.shape[1]

    def logits(self, inputs: np.ndarray) -> np.ndarray:
        inputs = np.asarray(inputs, dtype=np.float64)
        if inputs.shape[-1] != self.input_dim:
            raise ValidationError(f"input dim {inputs.shape[-1]} != model dim {self.input_dim}")
        return inputs @ self.weights.T + self.biases


@dataclass
class DatasetBundle:
    """Everything one experiment reads: vocabulary, splits, stream features, detections, embeddings"""

    vocabulary: ClassVocabulary
    samples: List[VideoSample]
    features: List[StreamFeatures]
    detections: List[DetectionRecord]
    embeddings: EmbeddingTable
    _streams: Dict[str, Dict[Stream, FeatureVector]] = field(default_factory=dict, repr=False)
    _dets: Dict[str, List[DetectionRecord]] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        num_classes = len(self.vocabulary)
        for record in self.features:
            if record.vector.size != num_classes:
                raise ValidationError(
                    f"{record.video_id}/{record.stream.value}: feature dim {record.vector.size} "
                    f"!= vocabulary size {num_classes}")
            per_video = self._streams.setdefault(record.video_id, {})
            if record.stream in per_video:
                raise ValidationError(f"duplicate {record.stream.value} features for {record.video_id}")
            per_video[record.stream] = record.vector
        for sample in self.samples:
            if sample.true_label >= num_classes:
                raise ValidationError(f"{sample.video_id}: label {sample.true_label} out of range")
        grouped = defaultdict(list)
        for det in self.detections:
            grouped[det.video_id].append(det)
        self._dets = dict(grouped)

    def video_ids(self) -> List[str]:
        seen = {}
        for sample in self.samples:
            seen.setdefault(sample.video_id, None)
        return list(seen)

    def labels(self) -> Dict[str, int]:
        return {s.video_id: s.true_label for s in self.samples}

    def stream_pair(self, video_id: str) -> Tuple[FeatureVector, FeatureVector]:
        """Spatial and temporal features of one video"""
        streams = self._streams.get(video_id, {})
        if Stream.SPATIAL not in streams or Stream.TEMPORAL not in streams:
            raise ValidationError(f"{video_id}: missing spatial or temporal features")
        return streams[Stream.SPATIAL], streams[Stream.TEMPORAL]

    def detections_for(self, video_id: str) -> List[DetectionRecord]:
        return list(self._dets.get(video_id, []))

    def split_samples(self, split_index: int, split: Split) -> List[VideoSample]:
        return [s for s in self.samples if s.split_index == split_index and s.split == Split(split)]

    def split_indices(self) -> List[int]:
        return sorted({s.split_index for s in self.samples})
