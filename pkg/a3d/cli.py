#!/usr/bin/env python3
"""
A3D command-line interface
gen / filter / encode / train / predict / evaluate / demo / validate / replay
"""

import argparse
import logging
import os
import sys
from collections import OrderedDict
from typing import Any, Callable, Dict, List, Optional

import numpy as np
import pandas as pd

from . import __version__
from .attributes import (FilterConfig, apply_test_filters, filter_by_relevance, sample_frames)
from .config import (DEFAULT_CLUSTERS, DEFAULT_GATE_THRESHOLD, DEFAULT_MIN_CONFIDENCE,
                     DEFAULT_MIN_SIDE_PX, DEFAULT_PERSON_WORDS, DEFAULT_T_SIM, DEFAULT_W_SPATIAL,
                     DEFAULT_W_TEMPORAL, SCHEDULES, Settings, load_settings)
from .datamodel import Split
from .encoding import VideoRepresentation, init_netvlad_params, mean_pool, netvlad_forward
from .errors import A3DError, NumericError, OrderingError, UsageError, ValidationError
from .fusion import FusionMode, FusionWeights
from .inference import (GateConfig, compare_fusions, compare_strategies, evaluate, joint_predict,
                        routes_to_attributes, run_pipeline, stream_predictions, attribute_predictions)
from .run_monitor import RunMonitor, load_manifest, manifest_path_for, setup_logging
from .storage import (bundle_paths, load_bundle, load_detections, load_model, load_predictions,
                      save_bundle, save_detections, save_model, save_predictions,
                      save_representations)
from .synthetic import SyntheticConfig, gen_synthetic
from .training import Strategy, TrainConfig, fit_split_classifiers, history_frame
from .validator import AcceptanceValidator

logger = logging.getLogger(__name__)

TRAIN_FIELDS = ["initial_lr", "decay_factor", "decay_every_epochs", "momentum",
                "weight_decay", "max_epochs", "batch_size", "seed"]
NOT_RECORDED = {"handler", "log_level", "log_file"}


# ------------------------------------------------------------- arguments

def _add_filter_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--min-confidence", type=float, default=DEFAULT_MIN_CONFIDENCE)
    parser.add_argument("--min-side-px", type=int, default=DEFAULT_MIN_SIDE_PX)
    parser.add_argument("--person-words", nargs="+", default=list(DEFAULT_PERSON_WORDS))
    parser.add_argument("--t-sim", type=float, default=DEFAULT_T_SIM)


def _add_train_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--schedule", choices=sorted(SCHEDULES), default="attribute",
                        help="preset that fills any training flag left unset")
    parser.add_argument("--initial-lr", type=float)
    parser.add_argument("--decay-factor", type=float)
    parser.add_argument("--decay-every-epochs", type=int)
    parser.add_argument("--momentum", type=float)
    parser.add_argument("--weight-decay", type=float)
    parser.add_argument("--max-epochs", type=int)
    parser.add_argument("--batch-size", type=int)
    parser.add_argument("--clusters", type=int, default=DEFAULT_CLUSTERS)


def _add_fusion_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--w-spatial", type=float, default=DEFAULT_W_SPATIAL)
    parser.add_argument("--w-temporal", type=float, default=DEFAULT_W_TEMPORAL)
    parser.add_argument("--fusion", choices=[m.value for m in FusionMode], default=FusionMode.REVISED.value)
    parser.add_argument("--gate-threshold", type=float, default=DEFAULT_GATE_THRESHOLD)


def _add_synthetic_flags(parser: argparse.ArgumentParser, seed: int):
    parser.add_argument("--seed", type=int, default=seed)
    parser.add_argument("--classes", type=int, default=SyntheticConfig.num_classes)
    parser.add_argument("--videos", type=int, default=SyntheticConfig.num_videos)
    parser.add_argument("--low-confidence-fraction", type=float,
                        default=SyntheticConfig.low_confidence_fraction)
    parser.add_argument("--attribute-reliability", type=float,
                        default=SyntheticConfig.attribute_reliability)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="a3d", description="A3D action recognition toolkit")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", default=None)
    parser.add_argument("--log-file", default=None)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic dataset bundle")
    _add_synthetic_flags(p, seed=0)
    p.add_argument("--out-dir")
    p.set_defaults(handler=cmd_gen)

    p = sub.add_parser("filter", help="filter attribute candidates")
    p.add_argument("--detections", required=True)
    p.add_argument("--out")
    _add_filter_flags(p)
    p.add_argument("--relevance", action="store_true",
                   help="also apply the ground-truth relevance filter (training data only)")
    p.add_argument("--data-dir", help="bundle supplying labels and embeddings for --relevance")
    p.add_argument("--frames-per-video", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(handler=cmd_filter)

    p = sub.add_parser("encode", help="encode each video's attribute features")
    p.add_argument("--detections", required=True)
    p.add_argument("--encoder", choices=["mean-pool", "netvlad"], default="mean-pool")
    p.add_argument("--clusters", type=int, default=DEFAULT_CLUSTERS)
    p.add_argument("--model", help="trained netvlad model; otherwise centers are sampled from the input")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(handler=cmd_encode)

    p = sub.add_parser("train", help="train the attribute classifier of one split")
    p.add_argument("--data-dir", required=True)
    p.add_argument("--strategy", choices=[s.value for s in Strategy], default=Strategy.ATTR_CLASSIFIER.value)
    p.add_argument("--split-index", type=int, choices=[1, 2, 3], default=1)
    p.add_argument("--seed", type=int)
    _add_train_flags(p)
    _add_filter_flags(p)
    p.add_argument("--out-dir")
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("predict", help="p1, p2 and joint predictions for the test videos")
    p.add_argument("--data-dir", required=True)
    p.add_argument("--model-dir", required=True, help="directory with model_split<N>.txt files")
    _add_fusion_flags(p)
    _add_filter_flags(p)
    p.add_argument("--out-dir")
    p.set_defaults(handler=cmd_predict)

    p = sub.add_parser("evaluate", help="accuracy report for prediction files")
    p.add_argument("--data-dir", required=True)
    p.add_argument("--predictions", nargs="+", required=True)
    p.add_argument("--out")
    p.set_defaults(handler=cmd_evaluate)

    p = sub.add_parser("demo", help="generate, train and evaluate end to end")
    _add_synthetic_flags(p, seed=7)
    p.add_argument("--strategy", choices=[s.value for s in Strategy], default=Strategy.ATTR_CLASSIFIER.value)
    _add_fusion_flags(p)
    _add_filter_flags(p)
    _add_train_flags(p)
    p.add_argument("--compare", action="store_true", help="also compare fusions and strategies")
    p.add_argument("--out-dir")
    p.set_defaults(handler=cmd_demo)

    p = sub.add_parser("validate", help="run the fast acceptance checks")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(handler=cmd_validate)

    p = sub.add_parser("replay", help="re-run a command from its manifest")
    p.add_argument("manifest")
    p.set_defaults(handler=cmd_replay)

    return parser


# --------------------------------------------------------------- helpers

def _resolve_train_flags(args: argparse.Namespace):
    """Fill unset training flags from the chosen schedule so manifests record every value"""
    preset = SCHEDULES[args.schedule]
    for name in TRAIN_FIELDS:
        if getattr(args, name, None) is None:
            setattr(args, name, preset[name])


def _materialize(args: argparse.Namespace, settings: Settings):
    """Resolve environment-dependent defaults into the namespace"""
    if hasattr(args, "schedule"):
        _resolve_train_flags(args)
    if hasattr(args, "out_dir") and not args.out_dir:
        args.out_dir = os.path.join(settings.output_dir, args.command)


def _recorded_config(args: argparse.Namespace) -> Dict[str, Any]:
    return {k: v for k, v in sorted(vars(args).items()) if k not in NOT_RECORDED}


def _monitor(args: argparse.Namespace) -> RunMonitor:
    return RunMonitor(args.command, _recorded_config(args), getattr(args, "seed", None))


def _as_usage(build: Callable[[], Any]) -> Any:
    """Configuration values coming straight from flags are usage errors"""
    try:
        return build()
    except ValidationError as e:
        raise UsageError(str(e))


def _filter_config(args: argparse.Namespace) -> FilterConfig:
    return _as_usage(lambda: FilterConfig(args.min_confidence, args.min_side_px,
                                          tuple(args.person_words), args.t_sim))


def _train_config(args: argparse.Namespace) -> TrainConfig:
    return _as_usage(lambda: TrainConfig(**{name: getattr(args, name) for name in TRAIN_FIELDS}))


def _fusion(args: argparse.Namespace):
    weights = _as_usage(lambda: FusionWeights(args.w_spatial, args.w_temporal))
    gate = _as_usage(lambda: GateConfig(args.gate_threshold))
    return weights, FusionMode(args.fusion), gate


def _synthetic_config(args: argparse.Namespace) -> SyntheticConfig:
    return _as_usage(lambda: SyntheticConfig(
        num_classes=args.classes, num_videos=args.videos,
        low_confidence_fraction=args.low_confidence_fraction,
        attribute_reliability=args.attribute_reliability))


def _model_path(model_dir: str, split_index: int) -> str:
    return os.path.join(model_dir, f"model_split{split_index}.txt")


def _write_frame(frame, path: str):
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    frame.to_csv(path, sep="\t", index=False, lineterminator="\n")


# -------------------------------------------------------------- commands

def cmd_gen(args: argparse.Namespace) -> int:
    """Write the five dataset files and a manifest"""
    cfg = _synthetic_config(args)
    monitor = _monitor(args)
    with monitor.stage("generate"):
        bundle = gen_synthetic(cfg, args.seed)
    with monitor.stage("save"):
        for name, path in save_bundle(args.out_dir, bundle).items():
            monitor.add_output(name, path)
    monitor.write_manifest(manifest_path_for(args.out_dir))
    print(f"✅ Dataset written to {args.out_dir}")
    return 0


def cmd_filter(args: argparse.Namespace) -> int:
    cfg = _filter_config(args)
    monitor = _monitor(args)
    monitor.add_input("detections", args.detections)
    out = args.out or os.path.splitext(args.detections)[0] + ".filtered.tsv"

    with monitor.stage("filter"):
        dets = sample_frames(load_detections(args.detections), args.frames_per_video, args.seed)
        kept = apply_test_filters(dets, cfg)
        if args.relevance:
            if not args.data_dir:
                raise UsageError("--relevance needs --data-dir for labels and embeddings")
            bundle = load_bundle(args.data_dir)
            monitor.add_input("data_dir", args.data_dir)
            labels = bundle.labels()
            grouped: Dict[str, List] = OrderedDict()
            for det in kept:
                grouped.setdefault(det.video_id, []).append(det)
            relevant = set()
            for video_id, video_dets in grouped.items():
                if video_id not in labels:
                    logger.warning(f"{video_id}: no ground-truth label, relevance filter drops it")
                    continue
                words = bundle.vocabulary.words(labels[video_id])
                relevant.update(id(d) for d in filter_by_relevance(video_dets, words, bundle.embeddings, cfg.t_sim))
            kept = [d for d in kept if id(d) in relevant]
    save_detections(out, kept)
    monitor.add_output("detections", out)
    monitor.write_manifest(manifest_path_for(out))
    print(f"✅ Kept {len(kept)}/{len(dets)} detections -> {out}")
    return 0


def cmd_encode(args: argparse.Namespace) -> int:
    monitor = _monitor(args)
    monitor.add_input("detections", args.detections)
    out = args.out or os.path.splitext(args.detections)[0] + f".{args.encoder}.tsv"

    with monitor.stage("encode"):
        per_video: Dict[str, List[np.ndarray]] = OrderedDict()
        for det in load_detections(args.detections):
            if det.feature is not None:
                per_video.setdefault(det.video_id, []).append(det.feature)
        if not per_video:
            raise ValidationError(f"{args.detections}: no detection carries a feature vector")

        if args.encoder == "netvlad":
            if args.model:
                params = load_model(args.model).netvlad
                monitor.add_input("model", args.model)
                if params is None:
                    raise ValidationError(f"{args.model} has no NetVLAD layer")
            else:
                params = init_netvlad_params([f for fs in per_video.values() for f in fs],
                                             args.clusters, seed=args.seed)
            reps = [netvlad_forward(fs, params) for fs in per_video.values()]
        else:
            reps = [mean_pool(fs) for fs in per_video.values()]
        reps = [VideoRepresentation(r.vector, r.encoder_tag, video_id)
                for r, video_id in zip(reps, per_video)]
    save_representations(out, reps)
    monitor.add_output("representations", out)
    monitor.write_manifest(manifest_path_for(out))
    print(f"✅ Encoded {len(reps)} videos -> {out}")
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    filter_cfg = _filter_config(args)
    train_cfg = _train_config(args)
    monitor = _monitor(args)
    monitor.add_input("data_dir", args.data_dir)

    bundle = load_bundle(args.data_dir)
    with monitor.stage("train"):
        classifier = fit_split_classifiers(bundle, Strategy(args.strategy), filter_cfg, train_cfg,
                                           args.clusters, [args.split_index])[args.split_index]
    model_path = _model_path(args.out_dir, args.split_index)
    log_path = os.path.join(args.out_dir, f"loss_split{args.split_index}.tsv")
    save_model(model_path, classifier)
    _write_frame(history_frame(classifier.history), log_path)
    monitor.add_output("model", model_path)
    monitor.add_output("loss_log", log_path)
    monitor.write_manifest(manifest_path_for(model_path))

    for entry in classifier.history:
        print(f"epoch {entry.epoch:3d}  lr {entry.lr:.6g}  loss {entry.loss:.6f}")
    print(f"✅ Model written to {model_path}")
    return 0


def cmd_predict(args: argparse.Namespace) -> int:
    weights, mode, gate = _fusion(args)
    filter_cfg = _filter_config(args)
    monitor = _monitor(args)
    monitor.add_input("data_dir", args.data_dir)

    bundle = load_bundle(args.data_dir)
    classifiers = {}
    for split_index in bundle.split_indices():
        path = _model_path(args.model_dir, split_index)
        if os.path.isfile(path):
            classifiers[split_index] = load_model(path)
            monitor.add_input(f"model_split{split_index}", path)
    if not classifiers:
        raise ValidationError(f"no model_split<N>.txt found in {args.model_dir}")

    test = [s for s in bundle.samples if s.split == Split.TEST and s.split_index in classifiers]
    with monitor.stage("predict"):
        p1 = stream_predictions(bundle, test, weights, mode)
        p2 = attribute_predictions(bundle, test, classifiers, filter_cfg)
        joint = {key: joint_predict(p1[key], p2[key], gate) for key in p1}
    routed = sum(routes_to_attributes(p, gate) for p in p1.values())

    for name, predictions in (("p1", p1), ("p2", p2), ("joint", joint)):
        path = os.path.join(args.out_dir, f"{name}.tsv")
        save_predictions(path, predictions)
        monitor.add_output(name, path)
    monitor.write_manifest(manifest_path_for(args.out_dir))
    print(f"✅ Predicted {len(test)} test samples; {routed} routed to p2 -> {args.out_dir}")
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    monitor = _monitor(args)
    paths = bundle_paths(args.data_dir)
    bundle = load_bundle(args.data_dir)
    monitor.add_input("samples", paths["samples"])

    frames = []
    for path in args.predictions:
        monitor.add_input(f"predictions:{path}", path)
        predictions = load_predictions(path)
        splits = {key[0] for key in predictions}
        samples = [s for s in bundle.samples if s.split_index in splits]
        name = os.path.splitext(os.path.basename(path))[0]
        report = evaluate(samples, predictions, bundle.vocabulary, name)
        print(report.to_text(per_class=True))
        frames.append(report.metrics_frame())

    out = args.out or os.path.join(os.path.dirname(args.predictions[0]) or ".", "metrics.tsv")
    _write_frame(pd.concat(frames, ignore_index=True), out)
    monitor.add_output("metrics", out)
    monitor.write_manifest(manifest_path_for(out))
    return 0


def cmd_demo(args: argparse.Namespace) -> int:
    """Generate, train per split, evaluate p1 / p2 / joint and check joint >= p1 > p2"""
    synthetic_cfg = _synthetic_config(args)
    weights, mode, gate = _fusion(args)
    filter_cfg = _filter_config(args)
    train_cfg = _train_config(args)
    monitor = _monitor(args)

    with monitor.stage("generate"):
        bundle = gen_synthetic(synthetic_cfg, args.seed)
    with monitor.stage("train"):
        classifiers = fit_split_classifiers(bundle, Strategy(args.strategy), filter_cfg, train_cfg, args.clusters)
    with monitor.stage("evaluate"):
        reports = run_pipeline(bundle, weights, mode, filter_cfg, classifiers, gate)

    print("\n📊 A3D demo (three-split average)")
    print("=" * 60)
    print(reports.to_text())
    text = [reports.to_text()]

    if args.compare:
        with monitor.stage("compare"):
            fusions = compare_fusions(bundle, weights)
            strategies = compare_strategies(bundle, filter_cfg, train_cfg, args.clusters)
        lines = ["", "p1 by fusion:"]
        lines += [f"  {name:<16} {r.mean_accuracy:.4f}" for name, r in fusions.items()]
        lines += ["p2 by strategy:"]
        lines += [f"  {name:<16} {r.mean_accuracy:.4f}" for name, r in strategies.items()]
        print("\n".join(lines))
        text.extend(lines)

    report_path = os.path.join(args.out_dir, "report.txt")
    metrics_path = os.path.join(args.out_dir, "metrics.tsv")
    os.makedirs(args.out_dir, exist_ok=True)
    with open(report_path, 'w', encoding='utf-8') as f:
        f.write("\n".join(text) + "\n")
    _write_frame(reports.metrics_frame(), metrics_path)
    monitor.add_output("report", report_path)
    monitor.add_output("metrics", metrics_path)
    monitor.write_manifest(manifest_path_for(args.out_dir))

    acc_p1 = reports.p1.mean_accuracy
    acc_p2 = reports.p2.mean_accuracy
    acc_joint = reports.joint.mean_accuracy
    if not (acc_joint >= acc_p1 and acc_p1 > acc_p2):
        raise OrderingError(f"ordering joint >= p1 > p2 failed: joint={acc_joint:.4f} "
                            f"p1={acc_p1:.4f} p2={acc_p2:.4f}")
    print(f"\n✅ joint >= p1 > p2 holds (joint - p1 = {100 * (acc_joint - acc_p1):.2f} points)")
    return 0


def cmd_validate(args: argparse.Namespace) -> int:
    return 0 if AcceptanceValidator(args.seed).run_validation() else 1


def cmd_replay(args: argparse.Namespace) -> int:
    manifest = load_manifest(args.manifest)
    command = manifest["command"]
    if command not in HANDLERS or command == "replay":
        raise UsageError(f"manifest command '{command}' cannot be replayed")
    replayed = argparse.Namespace(**manifest["config"])
    replayed.command = command
    logger.info(f"Replaying '{command}' from {args.manifest}")
    return HANDLERS[command](replayed)


HANDLERS: Dict[str, Callable[[argparse.Namespace], int]] = {
    "gen": cmd_gen, "filter": cmd_filter, "encode": cmd_encode, "train": cmd_train,
    "predict": cmd_predict, "evaluate": cmd_evaluate, "demo": cmd_demo,
    "validate": cmd_validate, "replay": cmd_replay,
}


def main(argv: Optional[List[str]] = None) -> int:
    settings = load_settings()
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level or settings.log_level, args.log_file or settings.log_file)

    try:
        _materialize(args, settings)
        return args.handler(args)
    except A3DError as e:
        print(f"❌ {e}", file=sys.stderr)
        return e.exit_code
    except FloatingPointError as e:
        print(f"❌ {e}", file=sys.stderr)
        return NumericError.exit_code
    except OSError as e:
        print(f"❌ {e}", file=sys.stderr)
        return ValidationError.exit_code


if __name__ == "__main__":
    sys.exit(main())
