"""
Two-stream fusion for the 3D CNN pipeline
Revised fusion sums weighted fc features before one softmax; original fusion sums per-stream softmax outputs
"""

from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple

import numpy as np

from .config import DEFAULT_W_SPATIAL, DEFAULT_W_TEMPORAL
from .datamodel import FeatureVector, ProbabilityDistribution, as_feature_vector
from .errors import ValidationError


class FusionMode(str, Enum):
    REVISED = "revised"
    ORIGINAL = "original"


@dataclass(frozen=True)
class FusionWeights:
    w_spatial: float = DEFAULT_W_SPATIAL
    w_temporal: float = DEFAULT_W_TEMPORAL

    def __post_init__(self):
        if not (np.isfinite(self.w_spatial) and np.isfinite(self.w_temporal)):
            raise ValidationError("fusion weights must be finite")
        if self.w_spatial < 0 or self.w_temporal < 0:
            raise ValidationError("fusion weights must be non-negative")
        if self.w_spatial + self.w_temporal <= 0:
            raise ValidationError("fusion weights must not both be zero")

    def scaled(self, factor: float) -> "FusionWeights":
        return FusionWeights(self.w_spatial * factor, self.w_temporal * factor)


def softmax(logits: FeatureVector) -> ProbabilityDistribution:
    """Numerically stable softmax over the last axis"""
    logits = np.asarray(logits, dtype=np.float64)
    if logits.size == 0 or logits.shape[-1] == 0:
        raise ValidationError("softmax of an empty vector")
    shifted = logits - logits.max(axis=-1, keepdims=True)
    exps = np.exp(shifted)
    return exps / exps.sum(axis=-1, keepdims=True)


def _check_pair(f_spatial, f_temporal) -> Tuple[np.ndarray, np.ndarray]:
    f_spatial = as_feature_vector(f_spatial, "spatial features")
    f_temporal = as_feature_vector(f_temporal, "temporal features")
    if f_spatial.shape != f_temporal.shape:
        raise ValidationError(f"stream dims differ: {f_spatial.size} vs {f_temporal.size}")
    return f_spatial, f_temporal


def fuse_revised(f_spatial: FeatureVector, f_temporal: FeatureVector,
                 w: Optional[FusionWeights] = None) -> ProbabilityDistribution:
    """p1 = softmax(w_s * f_s + w_t * f_t)"""
    w = w or FusionWeights()
    f_spatial, f_temporal = _check_pair(f_spatial, f_temporal)
    return softmax(w.w_spatial * f_spatial + w.w_temporal * f_temporal)


def fuse_original(f_spatial: FeatureVector, f_temporal: FeatureVector,
                  w: Optional[FusionWeights] = None) -> ProbabilityDistribution:
    """p1 = normalize(w_s * softmax(f_s) + w_t * softmax(f_t))

    The weights are normalized before mixing, so w=(1, 0) returns softmax(f_s) unchanged.
    """
    w = w or FusionWeights()
    f_spatial, f_temporal = _check_pair(f_spatial, f_temporal)
    total = w.w_spatial + w.w_temporal
    return (w.w_spatial / total) * softmax(f_spatial) + (w.w_temporal / total) * softmax(f_temporal)


def fuse(f_spatial: FeatureVector, f_temporal: FeatureVector,
         w: Optional[FusionWeights] = None, mode: FusionMode = FusionMode.REVISED) -> ProbabilityDistribution:
    if FusionMode(mode) is FusionMode.REVISED:
        return fuse_revised(f_spatial, f_temporal, w)
    return fuse_original(f_spatial, f_temporal, w)


def find_disagreement_witness(seed: int = 0, num_classes: int = 3, trials: int = 1000,
                              w: Optional[FusionWeights] = None):
    """Search random stream pairs for one where revised and original fusion pick different classes.

    One stream is drawn saturated (large logit range) so its softmax is near one-hot,
    which is where the two fusions diverge. Returns (f_spatial, f_temporal, weights) or None.
    """
    w = w or FusionWeights()
    rng = np.random.default_rng(seed)
    for _ in range(trials):
        f_spatial = rng.normal(0.0, 1.0, num_classes)
        f_temporal = rng.normal(0.0, 1.0, num_classes) * rng.choice([1.0, 10.0])
        revised = int(np.argmax(fuse_revised(f_spatial, f_temporal, w)))
        original = int(np.argmax(fuse_original(f_spatial, f_temporal, w)))
        if revised != original:
            return f_spatial, f_temporal, w
    return None
