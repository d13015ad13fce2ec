"""
Seeded synthetic dataset generator
Builds a desk-scale stand-in for stream features, detector output and a word embedding table
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np

from .config import DEFAULT_GATE_THRESHOLD
from .datamodel import (BoundingBox, ClassVocabulary, DatasetBundle, DetectionRecord,
                        EmbeddingTable, Split, Stream, StreamFeatures, VideoSample, parse_label)
from .errors import ValidationError

logger = logging.getLogger(__name__)

VERBS = ["playing", "riding", "throwing", "cutting", "brushing", "lifting", "pushing", "shooting"]
NOUNS = ["guitar", "bicycle", "ball", "onion", "teeth", "barbell", "cart", "bow", "drum", "horse",
         "kayak", "piano", "violin", "frisbee", "rope", "hammer", "sword", "skis", "flute", "cello",
         "tabla", "dhol", "paddle", "javelin"]
ATTRIBUTE_SUFFIXES = ["case", "stand", "strap", "rack"]
DISTRACTORS = ["tree", "chair", "car", "window", "lamp", "sign", "bench", "cloud"]
PERSON_WORDS = ["person"]
NUM_SPLITS = 3


@dataclass(frozen=True)
class SyntheticConfig:
    num_classes: int = 20
    num_videos: int = 600
    low_confidence_fraction: float = 0.3
    stream_confusion_rate: float = 0.03
    attribute_reliability: float = 0.5
    planted_per_video: int = 3
    distractors_per_video: int = 2
    frames_per_video: int = 1
    feature_dim: int = 32
    feature_scale: float = 1.5
    feature_noise: float = 0.5
    spatial_margin: float = 4.0
    temporal_margin: float = 3.0

    def __post_init__(self):
        if self.num_classes < 2:
            raise ValidationError(f"num_classes must be >= 2, got {self.num_classes}")
        if self.num_videos < self.num_classes:
            raise ValidationError(f"num_videos ({self.num_videos}) must be >= num_classes ({self.num_classes})")
        for name in ("low_confidence_fraction", "stream_confusion_rate", "attribute_reliability"):
            value = getattr(self, name)
            if not (0.0 <= value <= 1.0):
                raise ValidationError(f"{name} must be in [0,1], got {value}")
        if self.planted_per_video < 1 or self.distractors_per_video < 0:
            raise ValidationError("need >= 1 planted attribute and >= 0 distractors per video")
        if self.frames_per_video < 1 or self.feature_dim < 1:
            raise ValidationError("frames_per_video and feature_dim must be >= 1")
        if self.feature_scale <= 0 or self.feature_noise < 0:
            raise ValidationError("feature_scale must be > 0 and feature_noise >= 0")
        if self.spatial_margin <= 2 or self.temporal_margin <= 2:
            raise ValidationError("stream margins must exceed the clipped noise range (2)")


def _class_names(num_classes: int) -> Tuple[List[str], List[str], List[str]]:
    """Camel-case labels plus the verb and noun of each"""
    labels, verbs, nouns = [], [], []
    for c in range(num_classes):
        verb = VERBS[c % len(VERBS)]
        noun = NOUNS[c] if c < len(NOUNS) else f"gadget{c}"
        labels.append(verb.capitalize() + noun.capitalize())
        verbs.append(verb)
        nouns.append(noun)
    return labels, verbs, nouns


def _build_embeddings(nouns: List[str], verbs: List[str], attribute_words: List[List[str]],
                      rng: np.random.Generator) -> EmbeddingTable:
    """Orthonormal layout: each noun owns a direction, its attribute words lean on it.

    cos(mean(verb, noun), attribute) = 0.5 / (sqrt(0.5) * sqrt(1 + 0.4^2)) ~ 0.66 for planted words,
    and 0 against other classes' attributes and distractors.
    """
    unique_verbs = sorted(set(verbs))
    noise_dims = 8
    dim = len(nouns) + len(unique_verbs) + len(DISTRACTORS) + len(PERSON_WORDS) + noise_dims
    basis, _ = np.linalg.qr(rng.normal(size=(dim, dim)))
    columns = iter(basis.T)

    table = EmbeddingTable(dim)
    noun_vectors = {}
    for noun in nouns:
        noun_vectors[noun] = next(columns)
        table.add(noun, noun_vectors[noun])
    for verb in unique_verbs:
        table.add(verb, next(columns))
    for word in DISTRACTORS + PERSON_WORDS:
        table.add(word, next(columns))
    noise_basis = [next(columns) for _ in range(noise_dims)]
    for noun, words in zip(nouns, attribute_words):
        for j, word in enumerate(words):
            table.add(word, noun_vectors[noun] + 0.4 * noise_basis[(j + len(word)) % noise_dims])
    return table


def _stream_logits(cfg: SyntheticConfig, target: int, confident: bool,
                   rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    if not confident:
        # flat logits: max softmax stays near 1/C
        return rng.normal(0.0, 0.02, cfg.num_classes), rng.normal(0.0, 0.02, cfg.num_classes)
    spatial = np.clip(rng.normal(0.0, 0.5, cfg.num_classes), -1.0, 1.0)
    temporal = np.clip(rng.normal(0.0, 0.5, cfg.num_classes), -1.0, 1.0)
    spatial[target] += cfg.spatial_margin
    temporal[target] += cfg.temporal_margin
    return spatial, temporal


def _random_other(c: int, num_classes: int, rng: np.random.Generator) -> int:
    other = int(rng.integers(num_classes - 1))
    return other if other < c else other + 1


def _bbox(rng: np.random.Generator, low: float, high: float) -> BoundingBox:
    return BoundingBox(float(rng.uniform(0, 300)), float(rng.uniform(0, 200)),
                       float(rng.uniform(low, high)), float(rng.uniform(low, high)))


def gen_synthetic(config: SyntheticConfig, seed: int) -> DatasetBundle:
    """Deterministic dataset for (config, seed).

    A `low_confidence_fraction` of videos get flat stream logits, so max(p1) stays near 1/C. The
    default gate (T=0.1) only routes them to the attribute pipeline when num_classes > 10.

    Each video carries planted attributes (of its own class with probability
    `attribute_reliability`, otherwise of a random other class), distractor objects, a person,
    one sub-20-pixel box and one sub-0.02-confidence detection.
    """
    cfg = config
    rng = np.random.default_rng(seed)
    if cfg.low_confidence_fraction > 0 and 1.0 / cfg.num_classes >= DEFAULT_GATE_THRESHOLD:
        logger.warning(f"{cfg.num_classes} classes: flat p1 peaks near {1.0 / cfg.num_classes:.3f}, "
                       f"so low-confidence videos are not routed at T={DEFAULT_GATE_THRESHOLD}")
    labels, verbs, nouns = _class_names(cfg.num_classes)
    vocabulary = ClassVocabulary(tuple(labels))
    attribute_words = [[noun + suffix for suffix in ATTRIBUTE_SUFFIXES] for noun in nouns]
    embeddings = _build_embeddings(nouns, verbs, attribute_words, rng)

    prototypes: Dict[str, np.ndarray] = {}
    for word in [w for words in attribute_words for w in words] + DISTRACTORS + PERSON_WORDS:
        prototypes[word] = rng.normal(0.0, cfg.feature_scale, cfg.feature_dim)

    # every class appears at least once; labels then shuffled
    video_labels = np.arange(cfg.num_videos) % cfg.num_classes
    rng.shuffle(video_labels)
    folds = rng.permutation(cfg.num_videos) % NUM_SPLITS
    num_low = int(round(cfg.low_confidence_fraction * cfg.num_videos))
    low_confidence = np.zeros(cfg.num_videos, dtype=bool)
    low_confidence[rng.permutation(cfg.num_videos)[:num_low]] = True

    samples, features, detections = [], [], []
    width = len(str(cfg.num_videos))
    for v in range(cfg.num_videos):
        video_id = f"v{v:0{width}d}"
        label = int(video_labels[v])
        for split_index in range(1, NUM_SPLITS + 1):
            split = Split.TEST if folds[v] == split_index - 1 else Split.TRAIN
            samples.append(VideoSample(video_id, split, split_index, label))

        target = label
        if rng.random() < cfg.stream_confusion_rate:
            target = _random_other(label, cfg.num_classes, rng)
        spatial, temporal = _stream_logits(cfg, target, not low_confidence[v], rng)
        features.append(StreamFeatures(video_id, Stream.SPATIAL, spatial))
        features.append(StreamFeatures(video_id, Stream.TEMPORAL, temporal))

        planted_class = label
        if rng.random() >= cfg.attribute_reliability:
            planted_class = _random_other(label, cfg.num_classes, rng)

        def detection(word: str, confidence: float, bbox: BoundingBox) -> DetectionRecord:
            frame = int(rng.integers(cfg.frames_per_video))
            feature = prototypes[word] + rng.normal(0.0, cfg.feature_noise, cfg.feature_dim)
            return DetectionRecord(video_id, frame, tuple(parse_label(word)), confidence, bbox, feature)

        words = attribute_words[planted_class]
        for _ in range(cfg.planted_per_video):
            word = words[int(rng.integers(len(words)))]
            detections.append(detection(word, float(rng.uniform(0.1, 0.9)), _bbox(rng, 24, 200)))
        for _ in range(cfg.distractors_per_video):
            word = DISTRACTORS[int(rng.integers(len(DISTRACTORS)))]
            detections.append(detection(word, float(rng.uniform(0.05, 0.9)), _bbox(rng, 24, 200)))
        detections.append(detection("person", float(rng.uniform(0.5, 0.99)), _bbox(rng, 60, 300)))

        noise_words = attribute_words[_random_other(label, cfg.num_classes, rng)]
        detections.append(detection(noise_words[0], float(rng.uniform(0.1, 0.9)), _bbox(rng, 4, 19.5)))
        detections.append(detection(noise_words[1], float(rng.uniform(0.001, 0.019)), _bbox(rng, 24, 200)))

    logger.info(f"Generated {cfg.num_videos} videos, {cfg.num_classes} classes, "
                f"{num_low} low-confidence, {len(detections)} detections (seed {seed})")
    return DatasetBundle(vocabulary, samples, features, detections, embeddings)
