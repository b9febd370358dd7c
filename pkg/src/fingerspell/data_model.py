"""Dataset records, spans, labels, folds, and every on-disk format.

Formats owned by this module:

* manifest: UTF-8 TSV with header
  ``video_id  article_id  interpreter_id  fps  n_frames  pose_path  sentence``;
  the sentence is the last column and is double-quoted when it contains tabs.
* annotations: UTF-8 CSV with header ``video_id,annotator_id,start_s,end_s,word``.
* pose arrays: binary, 16-byte header (magic ``FSPZ``, version u32=1,
  n_frames u32, keypoints u32=75) followed by little-endian float32 data of
  logical shape [n_frames, 75, 2].
"""

from __future__ import annotations

import csv
import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ParseError, ValidationError

N_KEYPOINTS = 75
POSE_MAGIC = b"FSPZ"
POSE_VERSION = 1

# Tolerance for float fuzz when seconds*fps lands within rounding error of a
# frame boundary (e.g. 0.1 * 10 == 1.0000000000000002).
_FRAME_EPS = 1e-9

MANIFEST_COLUMNS = (
    "video_id",
    "article_id",
    "interpreter_id",
    "fps",
    "n_frames",
    "pose_path",
    "sentence",
)

ANNOTATION_COLUMNS = ("video_id", "annotator_id", "start_s", "end_s", "word")


@dataclass(frozen=True)
class VideoRecord:
    """One row of a dataset manifest: a single sentence-level video."""

    video_id: str
    article_id: str
    interpreter_id: str
    fps: float
    n_frames: int
    pose_path: str
    sentence: str

    def validate(self) -> None:
        if self.n_frames < 1:
            raise ValidationError(f"{self.video_id}: n_frames must be >= 1, got {self.n_frames}")
        if not self.fps > 0:
            raise ValidationError(f"{self.video_id}: fps must be > 0, got {self.fps}")
        if not self.sentence:
            raise ValidationError(f"{self.video_id}: sentence must be non-empty")


@dataclass(frozen=True, order=True)
class FrameSpan:
    """Inclusive interval [start, end] of frame indices."""

    start: int
    end: int

    def __post_init__(self):
        if self.start < 0 or self.end < self.start:
            raise ValidationError(f"invalid span [{self.start}, {self.end}]")

    def __len__(self) -> int:
        return self.end - self.start + 1

    def frames(self) -> range:
        return range(self.start, self.end + 1)


@dataclass(frozen=True)
class AlignedSpan:
    """A frame span paired with the 0-based whitespace-token index it spells."""

    span: FrameSpan
    word_index: int

    def __post_init__(self):
        if self.word_index < 0:
            raise ValidationError(f"word_index must be >= 0, got {self.word_index}")


@dataclass(frozen=True)
class FingerspellingAnnotation:
    """Gold fingerspelling occurrence: times in seconds plus the spelled word."""

    video_id: str
    annotator_id: str
    start_s: float
    end_s: float
    word: str

    def validate(self) -> None:
        if self.start_s < 0:
            raise ValidationError(f"{self.video_id}: start_s must be >= 0, got {self.start_s}")
        if not self.end_s > self.start_s:
            raise ValidationError(
                f"{self.video_id}: end_s ({self.end_s}) must be > start_s ({self.start_s})"
            )
        if not self.word or len(self.word.split()) != 1:
            raise ValidationError(
                f"{self.video_id}: word must be a single non-empty token, got {self.word!r}"
            )


@dataclass(frozen=True)
class Fold:
    train_article_ids: tuple[str, ...]
    eval_article_id: str


@dataclass(frozen=True)
class FoldPlan:
    """Leave-one-article-out cross-validation plan."""

    folds: tuple[Fold, ...]


# ---------------------------------------------------------------------------
# manifest I/O


def load_manifest(path) -> list[VideoRecord]:
    """Parse a manifest TSV into records, preserving row order.

    Raises ParseError naming the line for malformed rows and ValidationError
    for duplicate video ids or invariant violations.
    """
    path = Path(path)
    records: list[VideoRecord] = []
    seen: set[str] = set()
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh, delimiter="\t", quotechar='"')
        header = next(reader, None)
        if header is None or tuple(header) != MANIFEST_COLUMNS:
            raise ParseError(path, 1, f"expected header {list(MANIFEST_COLUMNS)}, got {header}")
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(MANIFEST_COLUMNS):
                raise ParseError(path, line_no, f"expected {len(MANIFEST_COLUMNS)} fields, got {len(row)}")
            vid, article, interp, fps_s, n_frames_s, pose_path, sentence = row
            try:
                fps = float(fps_s)
                n_frames = int(n_frames_s)
            except ValueError as exc:
                raise ParseError(path, line_no, f"bad numeric field: {exc}") from exc
            rec = VideoRecord(vid, article, interp, fps, n_frames, pose_path, sentence)
            try:
                rec.validate()
            except ValidationError as exc:
                raise ValidationError(f"{path}:{line_no}: {exc}") from exc
            if vid in seen:
                raise ValidationError(f"{path}:{line_no}: duplicate video_id {vid!r}")
            seen.add(vid)
            records.append(rec)
    return records


def save_manifest(records: Iterable[VideoRecord], path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, delimiter="\t", quotechar='"', quoting=csv.QUOTE_MINIMAL, lineterminator="\n")
        writer.writerow(MANIFEST_COLUMNS)
        for rec in records:
            rec.validate()
            writer.writerow(
                [
                    rec.video_id,
                    rec.article_id,
                    rec.interpreter_id,
                    repr(rec.fps),
                    str(rec.n_frames),
                    rec.pose_path,
                    rec.sentence,
                ]
            )


# ---------------------------------------------------------------------------
# annotation I/O


def load_annotations(path) -> list[FingerspellingAnnotation]:
    """Parse an annotation CSV; row order is preserved."""
    path = Path(path)
    anns: list[FingerspellingAnnotation] = []
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return []
        if tuple(header) != ANNOTATION_COLUMNS:
            raise ParseError(path, 1, f"expected header {list(ANNOTATION_COLUMNS)}, got {header}")
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(ANNOTATION_COLUMNS):
                raise ParseError(path, line_no, f"expected {len(ANNOTATION_COLUMNS)} fields, got {len(row)}")
            vid, annotator, start_s, end_s, word = row
            try:
                ann = FingerspellingAnnotation(vid, annotator, float(start_s), float(end_s), word)
            except ValueError as exc:
                raise ParseError(path, line_no, f"bad numeric field: {exc}") from exc
            try:
                ann.validate()
            except ValidationError as exc:
                raise ValidationError(f"{path}:{line_no}: {exc}") from exc
            anns.append(ann)
    return anns


def save_annotations(annotations: Iterable[FingerspellingAnnotation], path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(ANNOTATION_COLUMNS)
        for ann in annotations:
            ann.validate()
            writer.writerow([ann.video_id, ann.annotator_id, repr(ann.start_s), repr(ann.end_s), ann.word])


# ---------------------------------------------------------------------------
# span / label conversions


def annotation_to_span(ann: FingerspellingAnnotation, fps: float, n_frames: int) -> FrameSpan:
    """Convert second-resolution times to an inclusive frame span.

    start = floor(start_s * fps), end = min(ceil(end_s * fps) - 1, n_frames - 1),
    with end clamped up to start so a positive-duration annotation always
    yields a non-empty span.
    """
    if not fps > 0:
        raise ValidationError(f"fps must be > 0, got {fps}")
    ann.validate()
    start = int(math.floor(ann.start_s * fps + _FRAME_EPS))
    end = int(math.ceil(ann.end_s * fps - _FRAME_EPS)) - 1
    if start >= n_frames:
        raise ValidationError(
            f"{ann.video_id}: annotation at {ann.start_s}s starts past frame {n_frames - 1}"
        )
    end = min(end, n_frames - 1)
    end = max(end, start)
    return FrameSpan(start, end)


def spans_to_labels(spans: Iterable[FrameSpan], n_frames: int) -> np.ndarray:
    """Binary per-frame labels; overlapping spans merge implicitly."""
    labels = np.zeros(n_frames, dtype=np.uint8)
    for span in spans:
        if span.end >= n_frames:
            raise ValidationError(f"span [{span.start}, {span.end}] out of range for {n_frames} frames")
        labels[span.start : span.end + 1] = 1
    return labels


def labels_to_spans(labels: Sequence[int]) -> list[FrameSpan]:
    """Maximal runs of 1s as sorted, disjoint spans."""
    spans: list[FrameSpan] = []
    start = None
    for i, v in enumerate(labels):
        if v and start is None:
            start = i
        elif not v and start is not None:
            spans.append(FrameSpan(start, i - 1))
            start = None
    if start is not None:
        spans.append(FrameSpan(start, len(labels) - 1))
    return spans


def merge_spans(spans: Iterable[FrameSpan]) -> list[FrameSpan]:
    """Union of spans as sorted, disjoint maximal spans."""
    ordered = sorted(spans)
    merged: list[FrameSpan] = []
    for span in ordered:
        if merged and span.start <= merged[-1].end + 1:
            merged[-1] = FrameSpan(merged[-1].start, max(merged[-1].end, span.end))
        else:
            merged.append(span)
    return merged


def make_folds(article_ids: Sequence[str]) -> FoldPlan:
    """Leave-one-article-out plan, one fold per article, eval order = input order."""
    unique: list[str] = []
    for a in article_ids:
        if a not in unique:
            unique.append(a)
    if len(unique) < 2:
        raise ValidationError(f"need at least 2 distinct articles for folds, got {len(unique)}")
    folds = tuple(
        Fold(tuple(a for a in unique if a != eval_article), eval_article) for eval_article in unique
    )
    return FoldPlan(folds)


# ---------------------------------------------------------------------------
# pose array I/O (FSPZ)


def write_pose_file(path, frames: np.ndarray) -> None:
    """Write [n_frames, 75, 2] float32 keypoints in the FSPZ binary format."""
    frames = np.asarray(frames, dtype=np.float32)
    if frames.ndim != 3 or frames.shape[1] != N_KEYPOINTS or frames.shape[2] != 2:
        raise ValidationError(f"pose array must have shape [n, {N_KEYPOINTS}, 2], got {frames.shape}")
    path = Path(path)
    with path.open("wb") as fh:
        fh.write(POSE_MAGIC)
        fh.write(struct.pack("<III", POSE_VERSION, frames.shape[0], N_KEYPOINTS))
        fh.write(frames.astype("<f4").tobytes())


def read_pose_file(path) -> np.ndarray:
    """Read an FSPZ pose file back into a [n_frames, 75, 2] float32 array."""
    path = Path(path)
    with path.open("rb") as fh:
        magic = fh.read(4)
        if magic != POSE_MAGIC:
            raise ValidationError(f"{path}: bad magic {magic!r}, expected {POSE_MAGIC!r}")
        version, n_frames, keypoints = struct.unpack("<III", fh.read(12))
        if version != POSE_VERSION:
            raise ValidationError(f"{path}: unsupported pose file version {version}")
        if keypoints != N_KEYPOINTS:
            raise ValidationError(f"{path}: expected {N_KEYPOINTS} keypoints, got {keypoints}")
        payload = fh.read()
    expected = n_frames * keypoints * 2 * 4
    if len(payload) != expected:
        raise ValidationError(f"{path}: truncated pose data ({len(payload)} bytes, expected {expected})")
    data = np.frombuffer(payload, dtype="<f4").reshape(n_frames, keypoints, 2)
    return np.ascontiguousarray(data)
