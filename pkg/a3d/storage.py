"""
File ingestion and serialization for the A3D toolkit
Line-oriented text formats; floats are written with shortest round-trip repr so reloads are bit-exact
"""

import logging
import os
from typing import Dict, Iterator, List, Sequence, Tuple

import numpy as np

from .datamodel import (BoundingBox, ClassVocabulary, DatasetBundle, DetectionRecord,
                        EmbeddingTable, LinearModel, Split, Stream, StreamFeatures,
                        VideoSample)
from .encoding import EncoderTag, NetVladParams, VideoRepresentation
from .errors import A3DError, DataFormatError, ValidationError
from .training import AttributeClassifier, Strategy

logger = logging.getLogger(__name__)

VOCAB_HEADER = "# a3d vocabulary v1"
MODEL_HEADER = "# a3d model v1"

BUNDLE_FILES = {
    "vocabulary": "vocabulary.txt",
    "samples": "samples.tsv",
    "features": "features.tsv",
    "detections": "detections.tsv",
    "embeddings": "embeddings.txt",
}


def format_floats(values: Sequence[float], sep: str = ",") -> str:
    return sep.join(repr(float(v)) for v in values)


def _parse_floats(text: str, sep: str = ",") -> List[float]:
    tokens = text.split(sep) if sep != " " else text.split()
    if not tokens or any(t.strip() == "" for t in tokens):
        raise ValueError("empty numeric field")
    return [float(t) for t in tokens]


def _read_lines(path: str) -> Iterator[Tuple[int, str]]:
    """Yield (line_number, line) for non-blank lines"""
    if not os.path.isfile(path):
        raise DataFormatError(path, None, "file not found")
    with open(path, 'r', encoding='utf-8') as f:
        for number, raw in enumerate(f, 1):
            line = raw.rstrip("\n").rstrip("\r")
            if line.strip():
                yield number, line


def _ensure_parent(path: str):
    directory = os.path.dirname(os.fspath(path))
    if directory:
        os.makedirs(directory, exist_ok=True)


def _wrap(path: str, number: int, error: Exception) -> DataFormatError:
    if isinstance(error, DataFormatError):
        return error
    return DataFormatError(path, number, str(error))


# ---------------------------------------------------------------- vectors

def _load_vector_lines(path: str) -> List[Tuple[int, str, str, np.ndarray]]:
    """Parse `id<TAB>tag<TAB>v1,...` lines, enforcing one dimension per file"""
    rows = []
    dim = None
    for number, line in _read_lines(path):
        fields = line.split("\t")
        if len(fields) != 3:
            raise DataFormatError(path, number, f"expected 3 tab-separated fields, got {len(fields)}")
        try:
            values = np.asarray(_parse_floats(fields[2]), dtype=np.float64)
        except ValueError as e:
            raise DataFormatError(path, number, f"non-numeric vector entry ({e})")
        if not np.all(np.isfinite(values)):
            raise DataFormatError(path, number, "vector has non-finite entries")
        if dim is None:
            dim = values.size
        elif values.size != dim:
            raise DataFormatError(path, number, f"vector dim {values.size} != {dim} of first record")
        rows.append((number, fields[0], fields[1], values))
    return rows


def load_features(path: str) -> List[StreamFeatures]:
    """Load stream features: `video_id<TAB>stream<TAB>v1,...,vN`"""
    records = []
    seen = set()
    for number, video_id, stream, values in _load_vector_lines(path):
        try:
            record = StreamFeatures(video_id, Stream(stream), values)
        except (ValueError, A3DError) as e:
            raise _wrap(path, number, e)
        key = (record.video_id, record.stream)
        if key in seen:
            raise DataFormatError(path, number, f"duplicate record for {video_id}/{stream}")
        seen.add(key)
        records.append(record)
    return records


def save_features(path: str, records: Sequence[StreamFeatures]):
    _ensure_parent(path)
    with open(path, 'w', encoding='utf-8') as f:
        for r in records:
            f.write(f"{r.video_id}\t{r.stream.value}\t{format_floats(r.vector)}\n")


def load_representations(path: str) -> List[VideoRepresentation]:
    """Load encoded videos: `video_id<TAB>encoder_tag<TAB>v1,...`"""
    reps = []
    for number, video_id, tag, values in _load_vector_lines(path):
        try:
            reps.append(VideoRepresentation(values, EncoderTag(tag), video_id=video_id))
        except (ValueError, A3DError) as e:
            raise _wrap(path, number, e)
    return reps


def save_representations(path: str, reps: Sequence[VideoRepresentation]):
    _ensure_parent(path)
    with open(path, 'w', encoding='utf-8') as f:
        for rep in reps:
            f.write(f"{rep.video_id}\t{rep.encoder_tag.value}\t{format_floats(rep.vector)}\n")


def load_predictions(path: str) -> Dict[Tuple[int, str], np.ndarray]:
    """Load predictions: `video_id<TAB>split_index<TAB>p1,...,pC`"""
    predictions = {}
    for number, video_id, split_index, values in _load_vector_lines(path):
        try:
            key = (int(split_index), video_id)
        except ValueError:
            raise DataFormatError(path, number, f"invalid split index '{split_index}'")
        if key in predictions:
            raise DataFormatError(path, number, f"duplicate prediction for split {key[0]} / {video_id}")
        predictions[key] = values
    return predictions


def save_predictions(path: str, predictions: Dict[Tuple[int, str], np.ndarray]):
    _ensure_parent(path)
    with open(path, 'w', encoding='utf-8') as f:
        for (split_index, video_id), probs in predictions.items():
            f.write(f"{video_id}\t{split_index}\t{format_floats(probs)}\n")


# ------------------------------------------------------------- detections

def load_detections(path: str) -> List[DetectionRecord]:
    """Load detections: `video_id<TAB>frame<TAB>words<TAB>confidence<TAB>x,y,w,h[<TAB>f1,...]`"""
    records = []
    feature_dim = None
    for number, line in _read_lines(path):
        fields = line.split("\t")
        if len(fields) not in (5, 6):
            raise DataFormatError(path, number, f"expected 5 or 6 tab-separated fields, got {len(fields)}")
        try:
            frame = int(fields[1])
            confidence = float(fields[3])
            bbox_values = _parse_floats(fields[4])
            if len(bbox_values) != 4:
                raise ValueError(f"bbox needs 4 values, got {len(bbox_values)}")
            feature = None
            if len(fields) == 6:
                feature = np.asarray(_parse_floats(fields[5]), dtype=np.float64)
                if feature_dim is None:
                    feature_dim = feature.size
                elif feature.size != feature_dim:
                    raise ValueError(f"feature dim {feature.size} != {feature_dim} of first record")
            record = DetectionRecord(
                video_id=fields[0],
                frame_index=frame,
                label_words=tuple(fields[2].split()),
                confidence=confidence,
                bbox=BoundingBox(*bbox_values),
                feature=feature,
            )
        except (ValueError, A3DError) as e:
            raise _wrap(path, number, e)
        records.append(record)
    return records


def save_detections(path: str, records: Sequence[DetectionRecord]):
    _ensure_parent(path)
    with open(path, 'w', encoding='utf-8') as f:
        for d in records:
            b = d.bbox
            fields = [d.video_id, str(d.frame_index), " ".join(d.label_words), repr(float(d.confidence)),
                      format_floats((b.x, b.y, b.width, b.height))]
            if d.feature is not None:
                fields.append(format_floats(d.feature))
            f.write("\t".join(fields) + "\n")


# ------------------------------------------------------------- embeddings

def load_embeddings(path: str) -> EmbeddingTable:
    """Load a `word v1 v2 ... vD` embedding file"""
    table = None
    for number, line in _read_lines(path):
        parts = line.split()
        if len(parts) < 2:
            raise DataFormatError(path, number, "expected a word followed by at least one value")
        try:
            values = [float(v) for v in parts[1:]]
        except ValueError as e:
            raise DataFormatError(path, number, f"non-numeric embedding value ({e})")
        if table is None:
            table = EmbeddingTable(len(values))
        elif len(values) != table.dim:
            raise DataFormatError(path, number, f"ragged embedding: dim {len(values)} != {table.dim}")
        try:
            table.add(parts[0], values)
        except A3DError as e:
            raise _wrap(path, number, e)
    if table is None:
        raise DataFormatError(path, None, "embedding file is empty")
    return table


def save_embeddings(path: str, table: EmbeddingTable):
    _ensure_parent(path)
    with open(path, 'w', encoding='utf-8') as f:
        for word, vector in table.items():
            f.write(f"{word} {format_floats(vector, ' ')}\n")


# ------------------------------------------------------ vocabulary/samples

def load_vocabulary(path: str) -> ClassVocabulary:
    lines = list(_read_lines(path))
    if not lines or lines[0][1].strip() != VOCAB_HEADER:
        raise DataFormatError(path, 1, f"missing header '{VOCAB_HEADER}'")
    try:
        return ClassVocabulary(tuple(line.strip() for _, line in lines[1:]))
    except A3DError as e:
        raise DataFormatError(path, None, str(e))


def save_vocabulary(path: str, vocabulary: ClassVocabulary):
    _ensure_parent(path)
    with open(path, 'w', encoding='utf-8') as f:
        f.write(VOCAB_HEADER + "\n")
        for label in vocabulary.labels:
            f.write(label + "\n")


def load_samples(path: str) -> List[VideoSample]:
    """Load split membership: `video_id<TAB>split<TAB>split_index<TAB>label_index`"""
    samples = []
    for number, line in _read_lines(path):
        fields = line.split("\t")
        if len(fields) != 4:
            raise DataFormatError(path, number, f"expected 4 tab-separated fields, got {len(fields)}")
        try:
            samples.append(VideoSample(fields[0], Split(fields[1]), int(fields[2]), int(fields[3])))
        except (ValueError, A3DError) as e:
            raise _wrap(path, number, e)
    return samples


def save_samples(path: str, samples: Sequence[VideoSample]):
    _ensure_parent(path)
    with open(path, 'w', encoding='utf-8') as f:
        for s in samples:
            f.write(f"{s.video_id}\t{s.split.value}\t{s.split_index}\t{s.true_label}\n")


# ------------------------------------------------------------------ models

def save_model(path: str, classifier: AttributeClassifier):
    """Write an attribute classifier (linear head plus optional NetVLAD layer)"""
    _ensure_parent(path)
    linear = classifier.linear
    with open(path, 'w', encoding='utf-8') as f:
        f.write(MODEL_HEADER + "\n")
        f.write(f"strategy\t{classifier.strategy.value}\n")
        f.write(f"linear\t{linear.num_classes}\t{linear.input_dim}\n")
        for row in linear.weights:
            f.write(f"w\t{format_floats(row)}\n")
        f.write(f"b\t{format_floats(linear.biases)}\n")
        if classifier.netvlad is not None:
            p = classifier.netvlad
            f.write(f"netvlad\t{p.num_clusters}\t{p.dim}\n")
            for row in p.centers:
                f.write(f"c\t{format_floats(row)}\n")
            for row in p.assign_weights:
                f.write(f"a\t{format_floats(row)}\n")
            f.write(f"ab\t{format_floats(p.assign_biases)}\n")


def load_model(path: str) -> AttributeClassifier:
    lines = list(_read_lines(path))
    if not lines or lines[0][1].strip() != MODEL_HEADER:
        raise DataFormatError(path, 1, f"missing header '{MODEL_HEADER}'")
    cursor = 1

    def take(tag: str) -> Tuple[int, List[str]]:
        nonlocal cursor
        if cursor >= len(lines):
            raise DataFormatError(path, None, f"unexpected end of file, expected '{tag}'")
        number, line = lines[cursor]
        fields = line.split("\t")
        if fields[0] != tag:
            raise DataFormatError(path, number, f"expected '{tag}' record, got '{fields[0]}'")
        cursor += 1
        return number, fields[1:]

    def take_rows(tag: str, count: int, width: int) -> np.ndarray:
        rows = []
        for _ in range(count):
            number, fields = take(tag)
            try:
                row = _parse_floats(fields[0])
            except (ValueError, IndexError) as e:
                raise DataFormatError(path, number, f"bad '{tag}' row ({e})")
            if len(row) != width:
                raise DataFormatError(path, number, f"'{tag}' row has {len(row)} values, expected {width}")
            rows.append(row)
        return np.asarray(rows, dtype=np.float64)

    try:
        number, fields = take("strategy")
        strategy = Strategy(fields[0])
        number, fields = take("linear")
        num_classes, input_dim = int(fields[0]), int(fields[1])
        weights = take_rows("w", num_classes, input_dim)
        biases = take_rows("b", 1, num_classes)[0]
        netvlad = None
        if cursor < len(lines):
            number, fields = take("netvlad")
            k, d = int(fields[0]), int(fields[1])
            netvlad = NetVladParams(take_rows("c", k, d), take_rows("a", k, d), take_rows("ab", 1, k)[0])
        if cursor < len(lines):
            raise DataFormatError(path, lines[cursor][0], "trailing records")
        return AttributeClassifier(strategy, LinearModel(weights, biases), netvlad)
    except (ValueError, IndexError) as e:
        raise DataFormatError(path, None, str(e))
    except DataFormatError:
        raise
    except A3DError as e:
        raise DataFormatError(path, None, str(e))


# ------------------------------------------------------------------ bundle

def bundle_paths(directory: str) -> Dict[str, str]:
    return {name: os.path.join(directory, filename) for name, filename in BUNDLE_FILES.items()}


def save_bundle(directory: str, bundle: DatasetBundle) -> Dict[str, str]:
    """Write the five dataset files into a directory"""
    try:
        os.makedirs(directory, exist_ok=True)
    except OSError as e:
        raise ValidationError(f"cannot create output directory {directory}: {e}")
    paths = bundle_paths(directory)
    save_vocabulary(paths["vocabulary"], bundle.vocabulary)
    save_samples(paths["samples"], bundle.samples)
    save_features(paths["features"], bundle.features)
    save_detections(paths["detections"], bundle.detections)
    save_embeddings(paths["embeddings"], bundle.embeddings)
    return paths


def load_bundle(directory: str) -> DatasetBundle:
    paths = bundle_paths(directory)
    bundle = DatasetBundle(
        vocabulary=load_vocabulary(paths["vocabulary"]),
        samples=load_samples(paths["samples"]),
        features=load_features(paths["features"]),
        detections=load_detections(paths["detections"]),
        embeddings=load_embeddings(paths["embeddings"]),
    )
    logger.info(f"Loaded bundle {directory}: {len(bundle.vocabulary)} classes, "
                f"{len(bundle.video_ids())} videos, {len(bundle.detections)} detections")
    return bundle
