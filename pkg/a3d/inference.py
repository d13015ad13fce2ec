"""
Joint inference and evaluation
Threshold-gated choice between the 3D CNN pipeline (p1) and the attribute pipeline (p2)
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .attributes import FilterConfig, apply_test_filters
from .config import DEFAULT_GATE_THRESHOLD
from .datamodel import ClassVocabulary, DatasetBundle, ProbabilityDistribution, Split, VideoSample
from .errors import ValidationError
from .fusion import FusionMode, FusionWeights, fuse
from .training import AttributeClassifier, Strategy, TrainConfig, fit_split_classifiers

logger = logging.getLogger(__name__)

PredictionKey = Tuple[int, str]


@dataclass(frozen=True)
class GateConfig:
    threshold: float = DEFAULT_GATE_THRESHOLD

    def __post_init__(self):
        if not (0.0 <= self.threshold <= 1.0):
            raise ValidationError(f"gate threshold must be in [0,1], got {self.threshold}")


def indicator(x: float) -> int:
    """I(x) = 1 if x > 0 else 0"""
    return 1 if x > 0 else 0


def routes_to_attributes(p1: ProbabilityDistribution, gate: GateConfig) -> bool:
    """True when max(p1) <= T, i.e. the 3D CNN pipeline is not confident enough"""
    return indicator(float(np.max(p1)) - gate.threshold) == 0


def joint_predict(p1: ProbabilityDistribution, p2: ProbabilityDistribution,
                  gate: Optional[GateConfig] = None) -> ProbabilityDistribution:
    """p = p1 * I(max p1 - T) + p2 * I(T - max p1), with the max(p1) == T tie going to p2"""
    gate = gate or GateConfig()
    if np.shape(p1) != np.shape(p2):
        raise ValidationError(f"p1 and p2 lengths differ: {np.size(p1)} vs {np.size(p2)}")
    confidence = float(np.max(p1))
    if indicator(confidence - gate.threshold):
        return p1
    if not indicator(gate.threshold - confidence):
        logger.info(f"Gate tie: max(p1) == T == {gate.threshold}; falling back to p2")
    return p2


@dataclass
class EvalReport:
    """Accuracy per split, their mean, a per-class table and the gate statistic"""

    name: str
    split_accuracy: Dict[int, float]
    mean_accuracy: float
    per_class: pd.DataFrame = field(repr=False)
    gate_fraction: Optional[float] = None

    def metrics_frame(self) -> pd.DataFrame:
        """Machine-readable rows: metric, split, value"""
        rows = [{"metric": f"{self.name}_accuracy", "split": str(s), "value": acc}
                for s, acc in sorted(self.split_accuracy.items())]
        rows.append({"metric": f"{self.name}_accuracy", "split": "mean", "value": self.mean_accuracy})
        if self.gate_fraction is not None:
            rows.append({"metric": f"{self.name}_routed_to_p2", "split": "all", "value": self.gate_fraction})
        return pd.DataFrame(rows, columns=["metric", "split", "value"])

    def to_text(self, per_class: bool = False) -> str:
        table = pd.DataFrame(
            {"split": [str(s) for s in sorted(self.split_accuracy)] + ["mean"],
             "accuracy": [self.split_accuracy[s] for s in sorted(self.split_accuracy)] + [self.mean_accuracy]})
        lines = [f"{self.name}:", table.to_string(index=False, float_format=lambda v: f"{v:.4f}")]
        if self.gate_fraction is not None:
            lines.append(f"routed to p2: {self.gate_fraction:.4f}")
        if per_class:
            lines.append(self.per_class.to_string(index=False, float_format=lambda v: f"{v:.4f}", na_rep="-"))
        return "\n".join(lines)


def _argmax_lowest(probs: np.ndarray) -> int:
    # np.argmax returns the first maximal index
    return int(np.argmax(probs))


def evaluate(samples: Sequence[VideoSample], predictions: Mapping[PredictionKey, np.ndarray],
             vocabulary: ClassVocabulary, name: str = "prediction",
             routed: Optional[Mapping[PredictionKey, bool]] = None) -> EvalReport:
    """Accuracy over the test samples of every split, averaged over splits"""
    test = [s for s in samples if s.split == Split.TEST]
    if not test:
        raise ValidationError("no test samples to evaluate")
    missing = [(s.split_index, s.video_id) for s in test if (s.split_index, s.video_id) not in predictions]
    if missing:
        raise ValidationError(f"{len(missing)} test samples have no prediction, e.g. split "
                              f"{missing[0][0]} / {missing[0][1]}")

    correct: Dict[int, int] = {}
    total: Dict[int, int] = {}
    class_correct = np.zeros(len(vocabulary), dtype=np.int64)
    class_total = np.zeros(len(vocabulary), dtype=np.int64)
    for s in test:
        probs = np.asarray(predictions[(s.split_index, s.video_id)])
        if probs.size != len(vocabulary):
            raise ValidationError(f"prediction for {s.video_id} has {probs.size} classes, "
                                  f"expected {len(vocabulary)}")
        hit = _argmax_lowest(probs) == s.true_label
        correct[s.split_index] = correct.get(s.split_index, 0) + int(hit)
        total[s.split_index] = total.get(s.split_index, 0) + 1
        class_correct[s.true_label] += int(hit)
        class_total[s.true_label] += 1

    split_accuracy = {k: correct[k] / total[k] for k in sorted(total)}
    per_class = pd.DataFrame({
        "label": list(vocabulary.labels),
        "correct": class_correct,
        "total": class_total,
        "accuracy": np.where(class_total > 0, class_correct / np.maximum(class_total, 1), np.nan),
    })
    gate_fraction = None
    if routed is not None:
        flags = [bool(routed[(s.split_index, s.video_id)]) for s in test]
        gate_fraction = sum(flags) / len(flags)
    return EvalReport(name, split_accuracy, float(np.mean(list(split_accuracy.values()))),
                      per_class, gate_fraction)


@dataclass
class PipelineReports:
    p1: EvalReport
    p2: EvalReport
    joint: EvalReport
    predictions: Dict[str, Dict[PredictionKey, np.ndarray]] = field(default_factory=dict, repr=False)

    def reports(self) -> List[EvalReport]:
        return [self.p1, self.p2, self.joint]

    def summary_frame(self) -> pd.DataFrame:
        rows = []
        for report in self.reports():
            row = {"classifier": report.name}
            row.update({f"split{s}": acc for s, acc in sorted(report.split_accuracy.items())})
            row["mean"] = report.mean_accuracy
            rows.append(row)
        return pd.DataFrame(rows)

    def to_text(self) -> str:
        text = self.summary_frame().to_string(index=False, float_format=lambda v: f"{v:.4f}")
        return f"{text}\nrouted to p2: {self.joint.gate_fraction:.4f}"

    def metrics_frame(self) -> pd.DataFrame:
        return pd.concat([r.metrics_frame() for r in self.reports()], ignore_index=True)


def stream_predictions(bundle: DatasetBundle, samples: Sequence[VideoSample], weights: FusionWeights,
                       mode: FusionMode) -> Dict[PredictionKey, np.ndarray]:
    return {(s.split_index, s.video_id): fuse(*bundle.stream_pair(s.video_id), weights, mode) for s in samples}


def attribute_predictions(bundle: DatasetBundle, samples: Sequence[VideoSample],
                          classifiers: Mapping[int, AttributeClassifier],
                          filter_cfg: FilterConfig) -> Dict[PredictionKey, np.ndarray]:
    """p2 per test sample from its split's classifier; test-time filters only"""
    predictions = {}
    empty = 0
    for s in samples:
        if s.split_index not in classifiers:
            raise ValidationError(f"no attribute classifier for split {s.split_index}")
        dets = apply_test_filters(bundle.detections_for(s.video_id), filter_cfg)
        if not any(d.feature is not None for d in dets):
            empty += 1
        predictions[(s.split_index, s.video_id)] = classifiers[s.split_index].predict_proba(dets)
    if empty:
        logger.warning(f"{empty} test videos had no usable attribute; p2 is uniform for them")
    return predictions


def run_pipeline(bundle: DatasetBundle, weights: FusionWeights, fusion_mode: FusionMode,
                 filter_cfg: FilterConfig, classifiers: Mapping[int, AttributeClassifier],
                 gate: GateConfig) -> PipelineReports:
    """p1 via fusion, p2 via the attribute path, p via joint_predict; all evaluated on the same samples"""
    test = [s for s in bundle.samples if s.split == Split.TEST]
    if not test:
        raise ValidationError("empty test split")

    p1 = stream_predictions(bundle, test, weights, fusion_mode)
    p2 = attribute_predictions(bundle, test, classifiers, filter_cfg)
    joint = {key: joint_predict(p1[key], p2[key], gate) for key in p1}
    routed = {key: routes_to_attributes(p1[key], gate) for key in p1}

    reports = PipelineReports(
        p1=evaluate(test, p1, bundle.vocabulary, "p1"),
        p2=evaluate(test, p2, bundle.vocabulary, "p2"),
        joint=evaluate(test, joint, bundle.vocabulary, "joint", routed),
        predictions={"p1": p1, "p2": p2, "joint": joint},
    )
    logger.info(f"Accuracy p1={reports.p1.mean_accuracy:.4f} p2={reports.p2.mean_accuracy:.4f} "
                f"joint={reports.joint.mean_accuracy:.4f} routed={reports.joint.gate_fraction:.4f}")
    return reports


def compare_fusions(bundle: DatasetBundle, weights: FusionWeights) -> Dict[str, EvalReport]:
    """p1-only accuracy under revised and original fusion"""
    test = [s for s in bundle.samples if s.split == Split.TEST]
    return {mode.value: evaluate(test, stream_predictions(bundle, test, weights, mode),
                                 bundle.vocabulary, f"p1_{mode.value}")
            for mode in FusionMode}


def compare_strategies(bundle: DatasetBundle, filter_cfg: FilterConfig, train_cfg: TrainConfig,
                       num_clusters: int) -> Dict[str, EvalReport]:
    """p2-only accuracy of the three attribute representation strategies"""
    test = [s for s in bundle.samples if s.split == Split.TEST]
    reports = {}
    for strategy in Strategy:
        classifiers = fit_split_classifiers(bundle, strategy, filter_cfg, train_cfg, num_clusters)
        predictions = attribute_predictions(bundle, test, classifiers, filter_cfg)
        reports[strategy.value] = evaluate(test, predictions, bundle.vocabulary, f"p2_{strategy.value}")
    return reports
