"""
Training for the attribute pipeline
Mini-batch SGD with momentum, weight decay and stepped learning rate; linear and NetVLAD+linear heads
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .attributes import FilterConfig, apply_test_filters, apply_training_filters
from .config import ATTRIBUTE_SCHEDULE, DEFAULT_CLUSTERS, DEFAULT_NETVLAD_ALPHA
from .datamodel import (ClassVocabulary, DatasetBundle, DetectionRecord, EmbeddingTable,
                        LinearModel, Split)
from .encoding import (NetVladParams, aggregate_attribute_predictions, init_netvlad_params,
                       mean_pool, netvlad_forward, netvlad_gradients)
from .errors import NumericError, ValidationError
from .fusion import softmax

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    initial_lr: float = ATTRIBUTE_SCHEDULE["initial_lr"]
    decay_factor: float = ATTRIBUTE_SCHEDULE["decay_factor"]
    decay_every_epochs: int = ATTRIBUTE_SCHEDULE["decay_every_epochs"]
    momentum: float = ATTRIBUTE_SCHEDULE["momentum"]
    weight_decay: float = ATTRIBUTE_SCHEDULE["weight_decay"]
    max_epochs: int = ATTRIBUTE_SCHEDULE["max_epochs"]
    batch_size: int = ATTRIBUTE_SCHEDULE["batch_size"]
    seed: int = ATTRIBUTE_SCHEDULE["seed"]

    def __post_init__(self):
        if not self.initial_lr > 0:
            raise ValidationError(f"initial_lr must be > 0, got {self.initial_lr}")
        if not (0 < self.decay_factor <= 1):
            raise ValidationError(f"decay_factor must be in (0,1], got {self.decay_factor}")
        if self.decay_every_epochs < 1:
            raise ValidationError(f"decay_every_epochs must be >= 1, got {self.decay_every_epochs}")
        if not (0 <= self.momentum < 1):
            raise ValidationError(f"momentum must be in [0,1), got {self.momentum}")
        if self.weight_decay < 0:
            raise ValidationError(f"weight_decay must be >= 0, got {self.weight_decay}")
        if self.max_epochs < 1:
            raise ValidationError(f"max_epochs must be >= 1, got {self.max_epochs}")
        if self.batch_size < 0:
            raise ValidationError(f"batch_size must be >= 0 (0 = full batch), got {self.batch_size}")


@dataclass
class OptimState:
    """Momentum buffers shaped like the trainable parameters"""

    velocity: Dict[str, np.ndarray]
    epoch: int = 0

    @classmethod
    def zeros_like(cls, params: Dict[str, np.ndarray]) -> "OptimState":
        return cls({name: np.zeros_like(np.asarray(value, dtype=np.float64)) for name, value in params.items()})


@dataclass(frozen=True)
class EpochLog:
    epoch: int
    lr: float
    loss: float


def history_frame(history: Sequence[EpochLog]) -> pd.DataFrame:
    return pd.DataFrame([{"epoch": h.epoch, "lr": h.lr, "loss": h.loss} for h in history],
                        columns=["epoch", "lr", "loss"])


def lr_at(epoch: int, cfg: TrainConfig) -> float:
    """initial_lr * decay_factor ** floor(epoch / decay_every_epochs), one multiplication per step"""
    if epoch < 0:
        raise ValidationError(f"epoch must be >= 0, got {epoch}")
    lr = cfg.initial_lr
    for _ in range(epoch // cfg.decay_every_epochs):
        lr *= cfg.decay_factor
    return lr


def sgd_step(params: Dict[str, np.ndarray], grads: Dict[str, np.ndarray], state: OptimState,
             lr: float, momentum: float, weight_decay: float) -> Tuple[Dict[str, np.ndarray], OptimState]:
    """v <- momentum*v + (grad + wd*param); param <- param - lr*v"""
    if set(params) != set(grads) or set(params) != set(state.velocity):
        raise ValidationError("parameter, gradient and velocity names differ")
    new_params, new_velocity = {}, {}
    for name, param in params.items():
        param = np.asarray(param, dtype=np.float64)
        grad = np.asarray(grads[name], dtype=np.float64)
        velocity = state.velocity[name]
        if grad.shape != param.shape or velocity.shape != param.shape:
            raise ValidationError(f"shape mismatch for '{name}': param {param.shape}, "
                                  f"grad {grad.shape}, velocity {velocity.shape}")
        if not np.all(np.isfinite(grad)):
            raise NumericError(f"non-finite gradient for '{name}'")
        v = momentum * velocity + (grad + weight_decay * param)
        new_velocity[name] = v
        new_params[name] = param - lr * v
    return new_params, OptimState(new_velocity, state.epoch)


def softmax_cross_entropy(logits: np.ndarray, labels: np.ndarray) -> Tuple[float, np.ndarray]:
    """Mean cross-entropy over the batch and its gradient w.r.t. the logits"""
    probs = softmax(logits)
    n = logits.shape[0]
    picked = probs[np.arange(n), labels]
    loss = float(-np.mean(np.log(np.maximum(picked, np.finfo(np.float64).tiny))))
    d_logits = probs.copy()
    d_logits[np.arange(n), labels] -= 1.0
    return loss, d_logits / n


def _batches(n: int, cfg: TrainConfig, rng: np.random.Generator) -> List[np.ndarray]:
    if cfg.batch_size == 0 or cfg.batch_size >= n:
        return [np.arange(n)]
    order = rng.permutation(n)
    return [order[i:i + cfg.batch_size] for i in range(0, n, cfg.batch_size)]


def _check_labels(labels: np.ndarray, num_classes: int):
    if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
        raise ValidationError(f"labels must lie in [0, {num_classes})")
    missing = sorted(set(range(num_classes)) - set(labels.tolist()))
    if missing:
        logger.warning(f"{len(missing)} classes have no training example: {missing[:10]}")


def linear_loss_and_grads(params: Dict[str, np.ndarray], inputs: np.ndarray,
                          labels: np.ndarray) -> Tuple[float, Dict[str, np.ndarray]]:
    logits = inputs @ params["weights"].T + params["biases"]
    loss, d_logits = softmax_cross_entropy(logits, labels)
    return loss, {"weights": d_logits.T @ inputs, "biases": d_logits.sum(axis=0)}


def _run_sgd(params: Dict[str, np.ndarray], n: int, cfg: TrainConfig,
             loss_and_grads: Callable[[Dict[str, np.ndarray], np.ndarray], Tuple[float, Dict[str, np.ndarray]]],
             label: str) -> Tuple[Dict[str, np.ndarray], List[EpochLog]]:
    rng = np.random.default_rng(cfg.seed)
    state = OptimState.zeros_like(params)
    history = []
    for epoch in range(cfg.max_epochs):
        lr = lr_at(epoch, cfg)
        total = 0.0
        for batch in _batches(n, cfg, rng):
            loss, grads = loss_and_grads(params, batch)
            if not math.isfinite(loss):
                raise NumericError(f"{label}: non-finite loss at epoch {epoch}")
            total += loss * len(batch)
            params, state = sgd_step(params, grads, state, lr, cfg.momentum, cfg.weight_decay)
        state.epoch = epoch + 1
        history.append(EpochLog(epoch, lr, total / n))
        logger.debug(f"{label} epoch {epoch}: lr={lr:.6g} loss={total / n:.6f}")
    if history:
        logger.info(f"{label}: {cfg.max_epochs} epochs, final loss {history[-1].loss:.4f}")
    return params, history


def train_linear_classifier(inputs: np.ndarray, labels: Sequence[int], num_classes: int,
                            cfg: TrainConfig) -> Tuple[LinearModel, List[EpochLog]]:
    """Cross-entropy softmax regression from zero initialization"""
    inputs = np.asarray(inputs, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if inputs.ndim != 2 or inputs.shape[0] == 0:
        raise ValidationError("empty training set")
    if labels.shape != (inputs.shape[0],):
        raise ValidationError(f"{inputs.shape[0]} inputs but {labels.size} labels")
    _check_labels(labels, num_classes)

    start = LinearModel.zeros(num_classes, inputs.shape[1])
    params = {"weights": start.weights, "biases": start.biases}
    params, history = _run_sgd(
        params, inputs.shape[0], cfg,
        lambda p, batch: linear_loss_and_grads(p, inputs[batch], labels[batch]),
        "linear classifier")
    return LinearModel(params["weights"], params["biases"]), history


def _netvlad_from(params: Dict[str, np.ndarray]) -> NetVladParams:
    return NetVladParams(params["centers"], params["assign_weights"], params["assign_biases"])


def netvlad_stack_loss_and_grads(params: Dict[str, np.ndarray], videos: Sequence[np.ndarray],
                                 labels: Sequence[int]) -> Tuple[float, Dict[str, np.ndarray]]:
    """Mean cross-entropy of linear(netvlad(video)) and gradients for every parameter"""
    vlad = _netvlad_from(params)
    encoded = np.vstack([netvlad_forward(list(v), vlad).vector for v in videos])
    labels = np.asarray(labels, dtype=np.int64)
    logits = encoded @ params["weights"].T + params["biases"]
    loss, d_logits = softmax_cross_entropy(logits, labels)

    grads = {
        "weights": d_logits.T @ encoded,
        "biases": d_logits.sum(axis=0),
        "centers": np.zeros_like(vlad.centers),
        "assign_weights": np.zeros_like(vlad.assign_weights),
        "assign_biases": np.zeros_like(vlad.assign_biases),
    }
    d_encoded = d_logits @ params["weights"]
    for video, upstream in zip(videos, d_encoded):
        g, _ = netvlad_gradients(list(video), vlad, upstream)
        grads["centers"] += g.centers
        grads["assign_weights"] += g.assign_weights
        grads["assign_biases"] += g.assign_biases
    return loss, grads


def train_netvlad_classifier(videos: Sequence[np.ndarray], labels: Sequence[int], num_classes: int,
                             cfg: TrainConfig, num_clusters: int = DEFAULT_CLUSTERS,
                             alpha: float = DEFAULT_NETVLAD_ALPHA,
                             init: Optional[NetVladParams] = None
                             ) -> Tuple[NetVladParams, LinearModel, List[EpochLog]]:
    """End-to-end SGD through the linear head and NetVLAD; each video is an (n_i x D) feature matrix"""
    videos = [np.atleast_2d(np.asarray(v, dtype=np.float64)) for v in videos]
    labels = np.asarray(labels, dtype=np.int64)
    if not videos:
        raise ValidationError("empty training set")
    if labels.shape != (len(videos),):
        raise ValidationError(f"{len(videos)} videos but {labels.size} labels")
    if any(v.shape[0] == 0 for v in videos):
        raise ValidationError("every training video needs at least one attribute feature")
    _check_labels(labels, num_classes)

    vlad = init.copy() if init is not None else init_netvlad_params(
        [row for v in videos for row in v], num_clusters, alpha, cfg.seed)
    head = LinearModel.zeros(num_classes, vlad.num_clusters * vlad.dim)
    params = {
        "weights": head.weights, "biases": head.biases,
        "centers": vlad.centers, "assign_weights": vlad.assign_weights, "assign_biases": vlad.assign_biases,
    }
    params, history = _run_sgd(
        params, len(videos), cfg,
        lambda p, batch: netvlad_stack_loss_and_grads(p, [videos[i] for i in batch], labels[batch]),
        "netvlad classifier")
    return _netvlad_from(params), LinearModel(params["weights"], params["biases"]), history


def grad_check(loss_fn: Callable[[np.ndarray], float], analytic_grad: np.ndarray,
               point: np.ndarray, eps: float = 1e-5) -> float:
    """Max per-coordinate relative error between analytic and central-difference gradients.

    Relative error is |a - n| / max(1, |a|, |n|).
    """
    if not eps > 0:
        raise ValidationError(f"eps must be > 0, got {eps}")
    point = np.asarray(point, dtype=np.float64)
    analytic_grad = np.asarray(analytic_grad, dtype=np.float64)
    if analytic_grad.shape != point.shape:
        raise ValidationError(f"gradient shape {analytic_grad.shape} != point shape {point.shape}")

    worst = 0.0
    flat = point.reshape(-1)
    for i in range(flat.size):
        probe = flat.copy()
        probe[i] = flat[i] + eps
        f_plus = loss_fn(probe.reshape(point.shape))
        probe[i] = flat[i] - eps
        f_minus = loss_fn(probe.reshape(point.shape))
        if not (math.isfinite(f_plus) and math.isfinite(f_minus)):
            raise NumericError(f"non-finite loss evaluation at coordinate {i}")
        numeric = (f_plus - f_minus) / (2 * eps)
        analytic = analytic_grad.reshape(-1)[i]
        error = abs(analytic - numeric) / max(1.0, abs(analytic), abs(numeric))
        worst = max(worst, error)
    return worst


# ------------------------------------------------------ attribute pipeline

class Strategy(str, Enum):
    MEAN_POOL = "mean-pool"
    NETVLAD = "netvlad"
    ATTR_CLASSIFIER = "attr-classifier"


@dataclass
class AttributeClassifier:
    """Produces p2 for a video from its (already filtered) attribute detections"""

    strategy: Strategy
    linear: LinearModel
    netvlad: Optional[NetVladParams] = None
    history: List[EpochLog] = field(default_factory=list, repr=False)

    def __post_init__(self):
        self.strategy = Strategy(self.strategy)
        if self.strategy is Strategy.NETVLAD and self.netvlad is None:
            raise ValidationError("netvlad strategy needs NetVLAD parameters")

    def uniform(self) -> np.ndarray:
        return np.full(self.linear.num_classes, 1.0 / self.linear.num_classes)

    def predict_proba(self, detections: Sequence[DetectionRecord]) -> np.ndarray:
        features = [d.feature for d in detections if d.feature is not None]
        if not features:
            return self.uniform()
        if self.strategy is Strategy.ATTR_CLASSIFIER:
            per_attr = softmax(self.linear.logits(np.vstack(features)))
            return aggregate_attribute_predictions(list(per_attr))
        if self.strategy is Strategy.NETVLAD:
            encoded = netvlad_forward(features, self.netvlad).vector
        else:
            encoded = mean_pool(features).vector
        return softmax(self.linear.logits(encoded))


def _usable_features(detections: Sequence[DetectionRecord]) -> List[np.ndarray]:
    return [d.feature for d in detections if d.feature is not None]


def fit_attribute_classifier(strategy: Strategy, videos: Sequence[Tuple[str, Sequence[DetectionRecord], int]],
                             vocabulary: ClassVocabulary, embeddings: EmbeddingTable,
                             filter_cfg: FilterConfig, cfg: TrainConfig,
                             num_clusters: int = DEFAULT_CLUSTERS,
                             alpha: float = DEFAULT_NETVLAD_ALPHA) -> AttributeClassifier:
    """Filter each training video's attributes and train one of the three representation strategies"""
    strategy = Strategy(strategy)
    num_classes = len(vocabulary)
    kept: List[Tuple[List[np.ndarray], int]] = []
    for video_id, dets, label in videos:
        if strategy is Strategy.ATTR_CLASSIFIER:
            filtered = apply_training_filters(dets, filter_cfg, vocabulary.words(label), embeddings)
        else:
            filtered = apply_test_filters(dets, filter_cfg)
        features = _usable_features(filtered)
        if not features:
            logger.warning(f"{video_id}: no attribute left after filtering, skipped for training")
            continue
        kept.append((features, label))
    if not kept:
        raise ValidationError("no training video has usable attributes")
    logger.info(f"Training {strategy.value} on {len(kept)}/{len(videos)} videos")

    if strategy is Strategy.ATTR_CLASSIFIER:
        inputs = np.vstack([f for features, _ in kept for f in features])
        labels = [label for features, label in kept for _ in features]
        linear, history = train_linear_classifier(inputs, labels, num_classes, cfg)
        return AttributeClassifier(strategy, linear, None, history)
    if strategy is Strategy.MEAN_POOL:
        inputs = np.vstack([mean_pool(features).vector for features, _ in kept])
        linear, history = train_linear_classifier(inputs, [label for _, label in kept], num_classes, cfg)
        return AttributeClassifier(strategy, linear, None, history)

    vlad, linear, history = train_netvlad_classifier(
        [np.vstack(features) for features, _ in kept], [label for _, label in kept],
        num_classes, cfg, num_clusters, alpha)
    return AttributeClassifier(strategy, linear, vlad, history)


def fit_split_classifiers(bundle: DatasetBundle, strategy: Strategy, filter_cfg: FilterConfig,
                          cfg: TrainConfig, num_clusters: int = DEFAULT_CLUSTERS,
                          split_indices: Optional[Sequence[int]] = None) -> Dict[int, AttributeClassifier]:
    """One attribute classifier per split, trained on that split's training videos"""
    classifiers = {}
    for split_index in split_indices or bundle.split_indices():
        train = bundle.split_samples(split_index, Split.TRAIN)
        if not train:
            raise ValidationError(f"split {split_index} has no training videos")
        videos = [(s.video_id, bundle.detections_for(s.video_id), s.true_label) for s in train]
        classifiers[split_index] = fit_attribute_classifier(
            strategy, videos, bundle.vocabulary, bundle.embeddings, filter_cfg, cfg, num_clusters)
    return classifiers
