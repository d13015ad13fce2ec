"""
Video attribute representations
Mean pooling, NetVLAD aggregation (forward and analytic gradients) and per-attribute prediction averaging
"""

from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .config import DEFAULT_NETVLAD_ALPHA
from .datamodel import FeatureVector, ProbabilityDistribution, check_distribution
from .errors import NumericError, ValidationError


class EncoderTag(str, Enum):
    MEAN_POOL = "mean_pool"
    NETVLAD = "netvlad"
    PRED_AGG = "pred_agg"


@dataclass
class VideoRepresentation:
    vector: np.ndarray
    encoder_tag: EncoderTag
    video_id: Optional[str] = None

    def __post_init__(self):
        self.vector = np.asarray(self.vector, dtype=np.float64)
        self.encoder_tag = EncoderTag(self.encoder_tag)


@dataclass
class NetVladParams:
    """Cluster centers c_k, assignment weights w_k and biases b_k"""

    centers: np.ndarray
    assign_weights: np.ndarray
    assign_biases: np.ndarray

    def __post_init__(self):
        self.centers = np.asarray(self.centers, dtype=np.float64)
        self.assign_weights = np.asarray(self.assign_weights, dtype=np.float64)
        self.assign_biases = np.asarray(self.assign_biases, dtype=np.float64)
        if self.centers.ndim != 2 or self.centers.shape[0] < 1 or self.centers.shape[1] < 1:
            raise ValidationError(f"centers must be K x D with K, D >= 1, got {self.centers.shape}")
        if self.assign_weights.shape != self.centers.shape:
            raise ValidationError(f"assign weights {self.assign_weights.shape} != centers {self.centers.shape}")
        if self.assign_biases.shape != (self.num_clusters,):
            raise ValidationError(f"assign biases must have length {self.num_clusters}")
        for name in ("centers", "assign_weights", "assign_biases"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise NumericError(f"NetVLAD {name} contain non-finite values")

    @property
    def num_clusters(self) -> int:
        return self.centers.shape[0]

    @property
    def dim(self) -> int:
        return self.centers.shape[1]

    def copy(self) -> "NetVladParams":
        return NetVladParams(self.centers.copy(), self.assign_weights.copy(), self.assign_biases.copy())


def _stack(features: Sequence[FeatureVector], dim: Optional[int] = None) -> np.ndarray:
    if len(features) == 0:
        raise ValidationError("empty feature list")
    sizes = {np.asarray(f).size for f in features}
    if len(sizes) != 1:
        raise ValidationError(f"ragged feature dims: {sorted(sizes)}")
    matrix = np.vstack([np.asarray(f, dtype=np.float64) for f in features])
    if dim is not None and matrix.shape[1] != dim:
        raise ValidationError(f"feature dim {matrix.shape[1]} != NetVLAD dim {dim}")
    return matrix


def mean_pool(features: Sequence[FeatureVector]) -> VideoRepresentation:
    return VideoRepresentation(_stack(features).mean(axis=0), EncoderTag.MEAN_POOL)


def init_netvlad_params(features: Sequence[FeatureVector], num_clusters: int,
                        alpha: float = DEFAULT_NETVLAD_ALPHA, seed: int = 0) -> NetVladParams:
    """Centers sampled from training descriptors; w_k = 2*alpha*c_k, b_k = -alpha*|c_k|^2"""
    if num_clusters < 1:
        raise ValidationError(f"cluster count must be >= 1, got {num_clusters}")
    pool = _stack(features)
    rng = np.random.default_rng(seed)
    replace = pool.shape[0] < num_clusters
    centers = pool[rng.choice(pool.shape[0], size=num_clusters, replace=replace)].copy()
    return NetVladParams(centers, 2.0 * alpha * centers, -alpha * np.sum(centers ** 2, axis=1))


def _soft_assign(x: np.ndarray, params: NetVladParams) -> np.ndarray:
    scores = x @ params.assign_weights.T + params.assign_biases
    scores -= scores.max(axis=1, keepdims=True)
    exps = np.exp(scores)
    return exps / exps.sum(axis=1, keepdims=True)


def netvlad_residuals(features: Sequence[FeatureVector], params: NetVladParams) -> np.ndarray:
    """Unnormalized V[k] = sum_i a_k(x_i) * (x_i - c_k), shape K x D"""
    x = _stack(features, params.dim)
    assign = _soft_assign(x, params)
    return assign.T @ x - assign.sum(axis=0)[:, None] * params.centers


def _safe_normalize(matrix: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Row-wise L2 normalization leaving zero rows at zero"""
    norms = np.linalg.norm(matrix, axis=-1, keepdims=True)
    safe = np.where(norms > 0, norms, 1.0)
    return np.where(norms > 0, matrix / safe, 0.0), norms


def _forward(x: np.ndarray, params: NetVladParams):
    assign = _soft_assign(x, params)
    residuals = assign.T @ x - assign.sum(axis=0)[:, None] * params.centers
    intra, row_norms = _safe_normalize(residuals)
    flat = intra.reshape(-1)
    total = float(np.linalg.norm(flat))
    out = flat / total if total > 0 else np.zeros_like(flat)
    return assign, intra, row_norms, total, out


def netvlad_forward(features: Sequence[FeatureVector], params: NetVladParams) -> VideoRepresentation:
    x = _stack(features, params.dim)
    _, _, _, _, out = _forward(x, params)
    return VideoRepresentation(out, EncoderTag.NETVLAD)


def netvlad_gradients(features: Sequence[FeatureVector], params: NetVladParams,
                      upstream: np.ndarray) -> Tuple[NetVladParams, List[np.ndarray]]:
    """Gradients of upstream . netvlad_forward(features) w.r.t. parameters and inputs"""
    x = _stack(features, params.dim)
    k, d = params.num_clusters, params.dim
    upstream = np.asarray(upstream, dtype=np.float64).reshape(-1)
    if upstream.size != k * d:
        raise ValidationError(f"upstream length {upstream.size} != K*D = {k * d}")

    assign, intra, row_norms, total, out = _forward(x, params)

    # global L2 normalization
    if total > 0:
        d_flat = (upstream - out * np.dot(out, upstream)) / total
    else:
        d_flat = np.zeros_like(upstream)
    d_intra = d_flat.reshape(k, d)

    # intra normalization, zero rows pass no gradient
    dots = np.sum(intra * d_intra, axis=1, keepdims=True)
    safe = np.where(row_norms > 0, row_norms, 1.0)
    d_resid = np.where(row_norms > 0, (d_intra - intra * dots) / safe, 0.0)

    # V = A^T X - diag(sum_i A) C
    d_centers = -assign.sum(axis=0)[:, None] * d_resid
    d_assign = x @ d_resid.T - np.sum(params.centers * d_resid, axis=1)[None, :]
    d_x = assign @ d_resid

    # softmax over clusters
    d_scores = assign * (d_assign - np.sum(d_assign * assign, axis=1, keepdims=True))
    d_weights = d_scores.T @ x
    d_biases = d_scores.sum(axis=0)
    d_x = d_x + d_scores @ params.assign_weights

    return NetVladParams(d_centers, d_weights, d_biases), [row for row in d_x]


def aggregate_attribute_predictions(per_attr: Sequence[ProbabilityDistribution]) -> ProbabilityDistribution:
    """Video-level p2 as the mean of per-attribute class distributions"""
    if len(per_attr) == 0:
        raise ValidationError("no attribute predictions to aggregate")
    stacked = _stack(per_attr)
    for row in stacked:
        check_distribution(row, "attribute prediction", atol=1e-6)
    return stacked.mean(axis=0)
