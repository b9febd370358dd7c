"""IOU metrics, random baselines, cross-validation, agreement, statistics.

Detection IOU compares the frame sets covered by two span collections;
alignment IOU compares (frame, word_index) pair sets. Both are computed
with merged-interval arithmetic (tests check them against an explicit
frame-set oracle). Empty vs empty is defined as 1.0: perfect agreement on
absence.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .alignment import FrequencyTable, align
from .config import ModelConfig, TrainConfig
from .data_model import (
    AlignedSpan,
    FingerspellingAnnotation,
    FoldPlan,
    FrameSpan,
    VideoRecord,
    annotation_to_span,
    labels_to_spans,
    merge_spans,
)
from .detection import (
    DetectionModel,
    build_training_items,
    detect_probs,
    extract_spans,
    finetune,
    new_detection_model,
)
from .errors import ValidationError
from .preprocessing import PoseSequence
from .stopwords import STOP_WORDS
from .textnorm import normalize_token, whitespace_tokens

CATEGORIES = ("STEM", "proper_noun", "loan_word", "other")


# ---------------------------------------------------------------------------
# IOU metrics


def _covered(spans: Iterable[FrameSpan]) -> tuple[list[FrameSpan], int]:
    merged = merge_spans(spans)
    return merged, sum(len(s) for s in merged)


def _intersection_size(a: list[FrameSpan], b: list[FrameSpan]) -> int:
    total = 0
    i = j = 0
    while i < len(a) and j < len(b):
        lo = max(a[i].start, b[j].start)
        hi = min(a[i].end, b[j].end)
        if lo <= hi:
            total += hi - lo + 1
        if a[i].end < b[j].end:
            i += 1
        else:
            j += 1
    return total


def iou_detection(pred: Iterable[FrameSpan], gold: Iterable[FrameSpan]) -> float:
    """|covered(pred) ∩ covered(gold)| / |covered(pred) ∪ covered(gold)|."""
    merged_p, size_p = _covered(pred)
    merged_g, size_g = _covered(gold)
    if size_p == 0 and size_g == 0:
        return 1.0
    inter = _intersection_size(merged_p, merged_g)
    union = size_p + size_g - inter
    return inter / union


def iou_alignment(pred: Iterable[AlignedSpan], gold: Iterable[AlignedSpan]) -> float:
    """IOU over (frame, word_index) pairs; word mismatches kill the overlap."""
    by_word_p: dict[int, list[FrameSpan]] = {}
    by_word_g: dict[int, list[FrameSpan]] = {}
    for a in pred:
        by_word_p.setdefault(a.word_index, []).append(a.span)
    for a in gold:
        by_word_g.setdefault(a.word_index, []).append(a.span)
    inter = 0
    union = 0
    for word in set(by_word_p) | set(by_word_g):
        merged_p, size_p = _covered(by_word_p.get(word, []))
        merged_g, size_g = _covered(by_word_g.get(word, []))
        word_inter = _intersection_size(merged_p, merged_g)
        inter += word_inter
        union += size_p + size_g - word_inter
    if union == 0:
        return 1.0
    return inter / union


# ---------------------------------------------------------------------------
# random baselines


def random_detection_baseline(rate: float, n_frames: int, rng: np.random.Generator) -> list[FrameSpan]:
    """Mark each frame independently with probability rate; return maximal runs."""
    if not 0.0 <= rate <= 1.0:
        raise ValidationError(f"rate must be in [0, 1], got {rate}")
    marks = rng.random(n_frames) < rate
    return labels_to_spans(marks.astype(np.uint8))


def random_alignment_baseline(
    rate: float,
    sentence: str,
    spans: Sequence[FrameSpan],
    rng: np.random.Generator,
) -> list[AlignedSpan]:
    """Mark each token fingerspelled with probability rate, pair with spans in order.

    The longer of (marked tokens, spans) is truncated so the output pairs up
    one to one.
    """
    if not 0.0 <= rate <= 1.0:
        raise ValidationError(f"rate must be in [0, 1], got {rate}")
    tokens = whitespace_tokens(sentence)
    marked = [i for i in range(len(tokens)) if rng.random() < rate]
    pairs = zip(sorted(spans, key=lambda s: (s.start, s.end)), marked)
    return [AlignedSpan(span=s, word_index=w) for s, w in pairs]


# ---------------------------------------------------------------------------
# cross-validation

Predictor = Callable[[VideoRecord, np.ndarray], list[FrameSpan]]
PredictorFactory = Callable[[list[VideoRecord]], Predictor]


@dataclass
class SampleResult:
    video_id: str
    fold_index: int
    detection_iou: float
    alignment_iou: float


@dataclass
class EvalReport:
    samples: list[SampleResult] = field(default_factory=list)

    @property
    def mean_detection_iou(self) -> float:
        return float(np.mean([s.detection_iou for s in self.samples])) if self.samples else 0.0

    @property
    def mean_alignment_iou(self) -> float:
        return float(np.mean([s.alignment_iou for s in self.samples])) if self.samples else 0.0

    def fold_summary(self) -> list[dict]:
        folds = sorted({s.fold_index for s in self.samples})
        out = []
        for f in folds:
            fold_samples = [s for s in self.samples if s.fold_index == f]
            out.append(
                {
                    "fold": f,
                    "n_samples": len(fold_samples),
                    "detection_iou": float(np.mean([s.detection_iou for s in fold_samples])),
                    "alignment_iou": float(np.mean([s.alignment_iou for s in fold_samples])),
                }
            )
        return out

    def to_dict(self) -> dict:
        return {
            "mean_detection_iou": self.mean_detection_iou,
            "mean_alignment_iou": self.mean_alignment_iou,
            "folds": self.fold_summary(),
            "samples": [
                {
                    "video_id": s.video_id,
                    "fold": s.fold_index,
                    "detection_iou": s.detection_iou,
                    "alignment_iou": s.alignment_iou,
                }
                for s in self.samples
            ],
        }


def gold_aligned_spans(
    record: VideoRecord, annotations: Sequence[FingerspellingAnnotation]
) -> list[AlignedSpan]:
    """Gold (span, word_index) pairs for one video.

    Annotation words are matched to sentence tokens in temporal order, each
    occurrence consuming the leftmost unused matching token.
    """
    tokens = [normalize_token(t) for t in whitespace_tokens(record.sentence)]
    used = [False] * len(tokens)
    ordered = sorted(annotations, key=lambda a: a.start_s)
    aligned = []
    for ann in ordered:
        span = annotation_to_span(ann, record.fps, record.n_frames)
        target = normalize_token(ann.word)
        for pos, tok in enumerate(tokens):
            if not used[pos] and tok == target:
                used[pos] = True
                aligned.append(AlignedSpan(span=span, word_index=pos))
                break
        else:
            raise ValidationError(
                f"{record.video_id}: annotated word {ann.word!r} not found in sentence"
            )
    return aligned


def _default_predictor_factory(
    poses: dict[str, np.ndarray],
    annotations: Sequence[FingerspellingAnnotation],
    model_cfg: ModelConfig,
    train_cfg: TrainConfig,
    init_model: Optional[Callable[[], DetectionModel]] = None,
    threshold: float = 0.5,
    merge_gap: int = 2,
    min_len: int = 3,
) -> PredictorFactory:
    def factory(train_records: list[VideoRecord]) -> Predictor:
        train_ids = {r.video_id for r in train_records}
        fold_anns = [a for a in annotations if a.video_id in train_ids]
        items = build_training_items(train_records, poses, fold_anns, model_cfg)
        model = init_model() if init_model is not None else new_detection_model(model_cfg, train_cfg.seed)
        finetune(model, items, train_cfg)

        def predict(record: VideoRecord, pose: np.ndarray) -> list[FrameSpan]:
            probs = detect_probs(PoseSequence.from_array(pose), record.sentence, model)
            return extract_spans(probs, threshold=threshold, merge_gap=merge_gap, min_len=min_len)

        return predict

    return factory


def cross_validate(
    records: Sequence[VideoRecord],
    poses: dict[str, np.ndarray],
    annotations: Sequence[FingerspellingAnnotation],
    folds: FoldPlan,
    freq_table: FrequencyTable,
    model_cfg: Optional[ModelConfig] = None,
    train_cfg: Optional[TrainConfig] = None,
    predictor_factory: Optional[PredictorFactory] = None,
) -> EvalReport:
    """Leave-one-article-out evaluation with micro-averaging over samples.

    Each fold trains (or obtains, via predictor_factory) a predictor on the
    train articles and scores every video of the eval article. Detection
    uses covered-frame IOU; alignment runs the frequency heuristic on the
    predicted spans and uses pair-set IOU against the gold alignment.
    """
    if predictor_factory is None:
        if model_cfg is None or train_cfg is None:
            raise ValidationError("cross_validate needs model_cfg and train_cfg (or a predictor_factory)")
        predictor_factory = _default_predictor_factory(poses, annotations, model_cfg, train_cfg)

    by_article: dict[str, list[VideoRecord]] = {}
    for rec in records:
        by_article.setdefault(rec.article_id, []).append(rec)
    anns_by_video: dict[str, list[FingerspellingAnnotation]] = {}
    for ann in annotations:
        anns_by_video.setdefault(ann.video_id, []).append(ann)

    report = EvalReport()
    for fold_index, fold in enumerate(folds.folds):
        eval_records = by_article.get(fold.eval_article_id, [])
        if not eval_records:
            raise ValidationError(f"fold {fold_index}: no samples for article {fold.eval_article_id!r}")
        train_records = [r for a in fold.train_article_ids for r in by_article.get(a, [])]
        predict = predictor_factory(train_records)
        for rec in eval_records:
            gold_anns = anns_by_video.get(rec.video_id, [])
            gold_spans = [annotation_to_span(a, rec.fps, rec.n_frames) for a in gold_anns]
            pred_spans = predict(rec, poses[rec.video_id])
            det = iou_detection(pred_spans, gold_spans)
            gold_aligned = gold_aligned_spans(rec, gold_anns)
            tokens = whitespace_tokens(rec.sentence)
            usable = sum(1 for t in tokens if normalize_token(t))
            pred_for_align = pred_spans[:usable]
            pred_aligned = align(pred_for_align, rec.sentence, freq_table)
            ali = iou_alignment(pred_aligned, gold_aligned)
            report.samples.append(
                SampleResult(
                    video_id=rec.video_id,
                    fold_index=fold_index,
                    detection_iou=det,
                    alignment_iou=ali,
                )
            )
    return report


# ---------------------------------------------------------------------------
# inter-annotator agreement


def _annotator_video_spans(
    annotations: Sequence[FingerspellingAnnotation], videos: Sequence[VideoRecord]
) -> dict[str, dict[str, list[FrameSpan]]]:
    by_id = {v.video_id: v for v in videos}
    table: dict[str, dict[str, list[FrameSpan]]] = {}
    for ann in annotations:
        video = by_id.get(ann.video_id)
        if video is None:
            continue
        span = annotation_to_span(ann, video.fps, video.n_frames)
        table.setdefault(ann.annotator_id, {}).setdefault(ann.video_id, []).append(span)
    return table


def pairwise_agreement(
    annotations: Sequence[FingerspellingAnnotation], videos: Sequence[VideoRecord]
) -> float:
    """Mean detection IOU over annotator pairs and videos."""
    table = _annotator_video_spans(annotations, videos)
    annotators = sorted(table)
    if len(annotators) < 2:
        raise ValidationError(f"agreement needs >= 2 annotators, got {len(annotators)}")
    scores = []
    for i in range(len(annotators)):
        for j in range(i + 1, len(annotators)):
            for video in videos:
                spans_i = table[annotators[i]].get(video.video_id, [])
                spans_j = table[annotators[j]].get(video.video_id, [])
                scores.append(iou_detection(spans_i, spans_j))
    return float(np.mean(scores))


def _random_placement(lengths: Sequence[int], n_frames: int, rng: np.random.Generator) -> list[FrameSpan]:
    """Uniform non-overlapping placement of spans with the given lengths."""
    k = len(lengths)
    if k == 0:
        return []
    shuffled = [int(lengths[i]) for i in rng.permutation(k)]
    total = sum(shuffled)
    free = n_frames - total
    if free < 0:
        raise ValidationError(f"spans of total length {total} cannot fit in {n_frames} frames")
    cuts = np.sort(rng.choice(free + k, size=k, replace=False))
    spans = []
    placed = 0
    for idx, cut in enumerate(cuts):
        start = int(cut) - idx + placed
        spans.append(FrameSpan(start, start + shuffled[idx] - 1))
        placed += shuffled[idx]
    return spans


def shuffled_agreement_baseline(
    annotations: Sequence[FingerspellingAnnotation],
    videos: Sequence[VideoRecord],
    rng: np.random.Generator,
    trials: int = 1000,
) -> float:
    """Agreement after re-placing every annotator's spans uniformly at random.

    Span lengths and counts are preserved per annotator and video; placements
    never overlap within one annotator's set. Returns the mean over trials.
    """
    if trials < 1:
        raise ValidationError("trials must be >= 1")
    table = _annotator_video_spans(annotations, videos)
    annotators = sorted(table)
    if len(annotators) < 2:
        raise ValidationError(f"agreement needs >= 2 annotators, got {len(annotators)}")
    n_frames = {v.video_id: v.n_frames for v in videos}
    results = []
    for _ in range(trials):
        scores = []
        shuffled: dict[str, dict[str, list[FrameSpan]]] = {}
        for annotator in annotators:
            shuffled[annotator] = {}
            for video_id, spans in table[annotator].items():
                lengths = [len(s) for s in spans]
                shuffled[annotator][video_id] = _random_placement(lengths, n_frames[video_id], rng)
        for i in range(len(annotators)):
            for j in range(i + 1, len(annotators)):
                for video in videos:
                    spans_i = shuffled[annotators[i]].get(video.video_id, [])
                    spans_j = shuffled[annotators[j]].get(video.video_id, [])
                    scores.append(iou_detection(spans_i, spans_j))
        results.append(float(np.mean(scores)))
    return float(np.mean(results))


# ---------------------------------------------------------------------------
# dataset statistics


def fingerspelling_percent(
    annotations: Sequence[FingerspellingAnnotation],
    sentences: dict[str, str],
    mode: str = "all_words",
    stop_words: frozenset[str] = STOP_WORDS,
) -> float:
    """Percentage of words annotated as fingerspelled.

    all_words divides by every whitespace token of the covered sentences;
    non_stop_words divides by tokens whose normalized form is non-empty and
    not in the stop list.
    """
    if mode not in ("all_words", "non_stop_words"):
        raise ValidationError(f"mode must be all_words or non_stop_words, got {mode!r}")
    annotated_videos = {a.video_id for a in annotations}
    missing = annotated_videos - set(sentences)
    if missing:
        raise ValidationError(f"sentences missing for annotated videos: {sorted(missing)}")
    denominator = 0
    for sentence in sentences.values():
        tokens = whitespace_tokens(sentence)
        if mode == "all_words":
            denominator += len(tokens)
        else:
            denominator += sum(
                1 for t in tokens if normalize_token(t) and normalize_token(t) not in stop_words
            )
    if denominator == 0:
        raise ValidationError("no words in the provided sentences for the requested mode")
    return 100.0 * len(annotations) / denominator


def category_tally(labeled_words: Sequence[tuple[str, str]]) -> dict[str, dict[str, float]]:
    """Counts and percentages per fingerspelled-word category.

    Categories are fixed: STEM, proper_noun, loan_word, other. Unlabeled
    categories are omitted from the result; percentages sum to 100.
    """
    if not labeled_words:
        raise ValidationError("category tally needs at least one labeled word")
    counts: dict[str, int] = {}
    for word, category in labeled_words:
        if category not in CATEGORIES:
            raise ValidationError(f"unknown category {category!r} for word {word!r}; expected one of {CATEGORIES}")
        counts[category] = counts.get(category, 0) + 1
    total = sum(counts.values())
    return {
        cat: {"count": counts[cat], "percent": 100.0 * counts[cat] / total}
        for cat in CATEGORIES
        if cat in counts
    }
