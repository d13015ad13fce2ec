"""
Visual attribute candidate filtering
Detector confidence, bounding box size, person removal and word-embedding relevance
"""

import logging
from collections import defaultdict
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .config import DEFAULT_MIN_CONFIDENCE, DEFAULT_MIN_SIDE_PX, DEFAULT_PERSON_WORDS, DEFAULT_T_SIM
from .datamodel import DetectionRecord, EmbeddingTable
from .errors import NumericError, ValidationError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FilterConfig:
    min_confidence: float = DEFAULT_MIN_CONFIDENCE
    min_side_px: int = DEFAULT_MIN_SIDE_PX
    person_words: Tuple[str, ...] = DEFAULT_PERSON_WORDS
    t_sim: float = DEFAULT_T_SIM

    def __post_init__(self):
        if not (0.0 <= self.min_confidence <= 1.0):
            raise ValidationError(f"min_confidence must be in [0,1], got {self.min_confidence}")
        if self.min_side_px < 0:
            raise ValidationError(f"min_side_px must be >= 0, got {self.min_side_px}")
        if not (-1.0 <= self.t_sim <= 1.0):
            raise ValidationError(f"t_sim must be in [-1,1], got {self.t_sim}")
        object.__setattr__(self, "person_words", tuple(w.lower() for w in self.person_words))


def filter_by_confidence(dets: Sequence[DetectionRecord], min_confidence: float) -> List[DetectionRecord]:
    return [d for d in dets if d.confidence >= min_confidence]


def filter_by_bbox(dets: Sequence[DetectionRecord], min_side_px: float) -> List[DetectionRecord]:
    return [d for d in dets if d.bbox.min_side >= min_side_px]


def filter_person(dets: Sequence[DetectionRecord], person_words: Iterable[str]) -> List[DetectionRecord]:
    person = {w.lower() for w in person_words}
    return [d for d in dets if person.isdisjoint(d.label_words)]


def label_vector(words: Sequence[str], table: EmbeddingTable) -> np.ndarray:
    """s(.) = mean of the embedding vectors of the in-table words"""
    found = []
    for word in words:
        vector = table.get(word)
        if vector is None:
            logger.warning(f"Word '{word}' not in embedding table, skipped")
        else:
            found.append(vector)
    if not found:
        raise ValidationError(f"no word of {list(words)} found in embedding table")
    return np.mean(np.vstack(found), axis=0)


def cosine_sim(u: np.ndarray, v: np.ndarray) -> float:
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise ValidationError(f"cosine of vectors with dims {u.shape} and {v.shape}")
    norm_u = np.linalg.norm(u)
    norm_v = np.linalg.norm(v)
    if norm_u == 0 or norm_v == 0:
        raise NumericError("cosine similarity of a zero vector")
    return float(np.clip(np.dot(u, v) / (norm_u * norm_v), -1.0, 1.0))


def filter_by_relevance(dets: Sequence[DetectionRecord], video_label_words: Sequence[str],
                        table: EmbeddingTable, t_sim: float) -> List[DetectionRecord]:
    """Keep attributes whose label is cosine-similar (>= t_sim) to the video's ground-truth label.

    Training-time only: the ground-truth label is unknown at test time.
    """
    target = label_vector(video_label_words, table)
    kept = []
    cache: Dict[Tuple[str, ...], Optional[np.ndarray]] = {}
    for det in dets:
        if det.label_words not in cache:
            in_table = [w for w in det.label_words if w in table]
            if not in_table:
                logger.warning(f"{det.video_id}: attribute '{' '.join(det.label_words)}' "
                               f"has no word in embedding table, discarded")
                cache[det.label_words] = None
            else:
                cache[det.label_words] = label_vector(in_table, table)
        vector = cache[det.label_words]
        if vector is not None and cosine_sim(target, vector) >= t_sim:
            kept.append(det)
    return kept


def apply_test_filters(dets: Sequence[DetectionRecord], cfg: FilterConfig) -> List[DetectionRecord]:
    """confidence -> bbox -> person"""
    kept = filter_by_confidence(dets, cfg.min_confidence)
    kept = filter_by_bbox(kept, cfg.min_side_px)
    return filter_person(kept, cfg.person_words)


def apply_training_filters(dets: Sequence[DetectionRecord], cfg: FilterConfig,
                           video_label_words: Sequence[str], table: EmbeddingTable) -> List[DetectionRecord]:
    return filter_by_relevance(apply_test_filters(dets, cfg), video_label_words, table, cfg.t_sim)


def sample_frames(dets: Sequence[DetectionRecord], frames_per_video: int, seed: int) -> List[DetectionRecord]:
    """Keep detections from a seeded random choice of frames in each video; 0 keeps every frame"""
    if frames_per_video < 0:
        raise ValidationError(f"frames_per_video must be >= 0, got {frames_per_video}")
    if frames_per_video == 0:
        return list(dets)

    frames = defaultdict(set)
    for det in dets:
        frames[det.video_id].add(det.frame_index)

    rng = np.random.default_rng(seed)
    chosen = {}
    for video_id in sorted(frames):
        available = sorted(frames[video_id])
        if len(available) <= frames_per_video:
            chosen[video_id] = set(available)
        else:
            picks = rng.choice(len(available), size=frames_per_video, replace=False)
            chosen[video_id] = {available[i] for i in picks}
    return [d for d in dets if d.frame_index in chosen[d.video_id]]
