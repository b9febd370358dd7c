"""Supervised fingerspelling detection: fused model, loss, training, decoding.

Per-frame video features are concatenated with the pooled sentence vector
(broadcast to every frame) and passed through a single linear unit with
logistic squashing, giving one fingerspelling probability per frame.
Training balances the two classes with per-batch weights; decoding
thresholds the probabilities, merges runs across short gaps, and drops
spans below a minimum length.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np
import torch
import torch.nn as nn

from .checkpoint import (
    has_prefix,
    load_checkpoint,
    load_module_arrays,
    module_arrays,
    save_checkpoint,
)
from .config import ModelConfig, TrainConfig
from .data_model import (
    FingerspellingAnnotation,
    FrameSpan,
    VideoRecord,
    annotation_to_span,
    labels_to_spans,
    spans_to_labels,
)
from .errors import ModelError, ValidationError
from .preprocessing import PoseSequence, pad_or_truncate_text, pad_or_truncate_video
from .text_encoder import TextEncoder, hash_codepoints
from .video_encoder import VideoEncoder

FINETUNE_EPOCHS_PRETRAINED = 20
FINETUNE_EPOCHS_SCRATCH = 40


@dataclass
class FrameProbabilities:
    """Per-frame fingerspelling probabilities with a pad-frame mask."""

    probs: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=np.float64)
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.probs.shape != self.mask.shape:
            raise ValidationError("probs and mask must have identical shape")
        if self.probs.size and (self.probs.min() < 0 or self.probs.max() > 1):
            raise ValidationError("probabilities must lie in [0, 1]")


class DetectionModel(nn.Module):
    """Video encoder + text encoder + per-frame fusion head."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        cfg.validate()
        self.cfg = cfg
        self.video = VideoEncoder(cfg)
        self.text = TextEncoder(cfg)
        self.fusion = nn.Linear(cfg.video_hidden + cfg.text_width, 1)

    def forward(
        self, frames: torch.Tensor, buckets: torch.Tensor, char_mask: torch.Tensor
    ) -> torch.Tensor:
        """Returns per-frame logits [N, T]."""
        vfeat = self.video(frames)
        _, pooled = self.text(buckets, char_mask)
        broadcast = pooled[:, None, :].expand(-1, vfeat.shape[1], -1)
        fused = torch.cat([vfeat, broadcast], dim=-1)
        return self.fusion(fused).squeeze(-1)


def new_detection_model(cfg: ModelConfig, seed: int = 0) -> DetectionModel:
    torch.manual_seed(seed)
    return DetectionModel(cfg)


def detection_arrays(model: DetectionModel) -> dict[str, np.ndarray]:
    arrays = {}
    arrays.update(module_arrays(model.video, "video"))
    arrays.update(module_arrays(model.text, "text"))
    arrays.update(module_arrays(model.fusion, "fusion"))
    return arrays


def save_detection_checkpoint(path, model: DetectionModel) -> None:
    save_checkpoint(path, model.cfg, detection_arrays(model))


def load_detection_model(path) -> DetectionModel:
    """Build a model from a checkpoint; encoder-only checkpoints get a fresh head."""
    cfg, arrays = load_checkpoint(path)
    model = new_detection_model(cfg, seed=0)
    load_module_arrays(model.video, arrays, "video")
    load_module_arrays(model.text, arrays, "text")
    if has_prefix(arrays, "fusion"):
        load_module_arrays(model.fusion, arrays, "fusion")
    return model


# ---------------------------------------------------------------------------
# losses


def _class_weights(labels: torch.Tensor, mask: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    fmask = mask.to(labels.dtype)
    n_pos = (labels * fmask).sum()
    n_valid = fmask.sum()
    n_neg = n_valid - n_pos
    if float(n_pos) == 0 or float(n_neg) == 0:
        # degenerate batch: fall back to the unweighted loss
        one = torch.ones_like(n_valid)
        return one, one, n_valid
    return n_valid / (2.0 * n_pos), n_valid / (2.0 * n_neg), n_valid


def weighted_bce_logits(logits: torch.Tensor, labels: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
    """Class-balanced binary cross-entropy over unmasked frames, from logits."""
    labels = labels.to(logits.dtype)
    if not mask.any():
        raise ValidationError("weighted BCE needs at least one unmasked frame")
    w_pos, w_neg, n_valid = _class_weights(labels, mask)
    weights = torch.where(labels > 0.5, w_pos, w_neg) * mask.to(logits.dtype)
    per_frame = nn.functional.binary_cross_entropy_with_logits(logits, labels, reduction="none")
    return (weights * per_frame).sum() / n_valid


def weighted_bce(probs: np.ndarray, labels: np.ndarray, mask: Optional[np.ndarray] = None) -> float:
    """Class-balanced binary cross-entropy from probabilities.

    Weights are computed per call: w_pos = N/(2*N1), w_neg = N/(2*N0) over
    the N unmasked frames, so the weights average to 1 and uniform p=0.5
    scores ln 2. A batch with only one class present falls back to the
    unweighted loss (both weights 1), which keeps fingerspelling-free
    batches well-defined.
    """
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    if mask is None:
        mask = np.ones_like(labels, dtype=bool)
    mask = np.asarray(mask, dtype=bool)
    if probs.shape != labels.shape or probs.shape != mask.shape:
        raise ValidationError("probs, labels, and mask must have identical shape")
    if not mask.any():
        raise ValidationError("weighted BCE needs at least one unmasked frame")
    n_valid = float(mask.sum())
    n_pos = float((labels[mask] > 0.5).sum())
    n_neg = n_valid - n_pos
    if n_pos == 0 or n_neg == 0:
        w_pos = w_neg = 1.0  # degenerate batch: unweighted
    else:
        w_pos = n_valid / (2.0 * n_pos)
        w_neg = n_valid / (2.0 * n_neg)
    p = np.clip(probs, 1e-12, 1.0 - 1e-12)
    per_frame = -(labels * np.log(p) + (1.0 - labels) * np.log(1.0 - p))
    weights = np.where(labels > 0.5, w_pos, w_neg) * mask
    return float((weights * per_frame).sum() / n_valid)


# ---------------------------------------------------------------------------
# training


@dataclass
class TrainItem:
    """One supervised example, already padded to the model's target lengths."""

    video_id: str
    frames: np.ndarray      # [T, 75, 2] float32
    frame_mask: np.ndarray  # [T] bool
    labels: np.ndarray      # [T] uint8 (0 on pad frames)
    chars: np.ndarray       # [L] int64 code points (0 = pad)
    text_len: int


def build_training_items(
    records: Sequence[VideoRecord],
    poses: dict[str, np.ndarray],
    annotations: Iterable[FingerspellingAnnotation],
    cfg: ModelConfig,
) -> list[TrainItem]:
    """Assemble padded tensors and frame labels for a set of videos.

    Videos without annotations get all-zero labels; annotations for unknown
    videos are rejected.
    """
    by_video: dict[str, list[FingerspellingAnnotation]] = {}
    known = {r.video_id for r in records}
    for ann in annotations:
        if ann.video_id not in known:
            raise ValidationError(f"annotation references unknown video {ann.video_id!r}")
        by_video.setdefault(ann.video_id, []).append(ann)

    items = []
    for rec in records:
        seq = PoseSequence.from_array(poses[rec.video_id])
        spans = [annotation_to_span(a, rec.fps, rec.n_frames) for a in by_video.get(rec.video_id, [])]
        labels = spans_to_labels(spans, rec.n_frames)
        padded = pad_or_truncate_video(seq, cfg.video_target_len)
        padded_labels = np.zeros(cfg.video_target_len, dtype=np.uint8)
        n_keep = min(rec.n_frames, cfg.video_target_len)
        padded_labels[:n_keep] = labels[:n_keep]
        text = pad_or_truncate_text(rec.sentence, cfg.text_target_len)
        items.append(
            TrainItem(
                video_id=rec.video_id,
                frames=padded.frames,
                frame_mask=padded.mask,
                labels=padded_labels,
                chars=text.chars,
                text_len=text.length,
            )
        )
    return items


def _batch_tensors(items: Sequence[TrainItem], cfg: ModelConfig, dtype=torch.float32):
    frames = torch.from_numpy(np.stack([it.frames for it in items])).to(dtype)
    frame_mask = torch.from_numpy(np.stack([it.frame_mask for it in items]))
    labels = torch.from_numpy(np.stack([it.labels for it in items])).to(dtype)
    chars = np.stack([it.chars for it in items])
    buckets = torch.from_numpy(hash_codepoints(chars, cfg.text_buckets))
    lengths = np.array([it.text_len for it in items])
    char_mask = torch.from_numpy(np.arange(chars.shape[1])[None, :] < lengths[:, None])
    return frames, frame_mask, labels, buckets, char_mask


def finetune(
    model: DetectionModel,
    items: Sequence[TrainItem],
    train_cfg: TrainConfig,
) -> list[tuple[int, int, str, float]]:
    """Train the detection model in place; returns the loss log.

    Deterministic for a fixed seed; aborts with ModelError if the loss goes
    non-finite. epochs=0 leaves the parameters untouched.
    """
    train_cfg.validate()
    if not items:
        raise ValidationError("training set is empty")
    if train_cfg.epochs == 0:
        return []
    torch.manual_seed(train_cfg.seed)
    rng = np.random.default_rng(train_cfg.seed)
    optimizer = torch.optim.Adam(model.parameters(), lr=train_cfg.lr)
    log: list[tuple[int, int, str, float]] = []
    model.train()
    for epoch in range(train_cfg.epochs):
        order = rng.permutation(len(items))
        for step, start in enumerate(range(0, len(items), train_cfg.batch_size)):
            batch = [items[i] for i in order[start : start + train_cfg.batch_size]]
            frames, frame_mask, labels, buckets, char_mask = _batch_tensors(batch, model.cfg)
            optimizer.zero_grad()
            logits = model(frames, buckets, char_mask)
            loss = weighted_bce_logits(logits, labels, frame_mask)
            if not torch.isfinite(loss):
                raise ModelError(f"training diverged at epoch {epoch} step {step}: loss={loss.item()}")
            loss.backward()
            optimizer.step()
            log.append((epoch, step, "detection", float(loss.item())))
    model.eval()
    return log


# ---------------------------------------------------------------------------
# inference and decoding


def detect_probs(video: PoseSequence, sentence: str, model: DetectionModel) -> FrameProbabilities:
    """Per-frame fingerspelling probabilities for one video/sentence pair."""
    cfg = model.cfg
    padded = pad_or_truncate_video(video, cfg.video_target_len)
    text = pad_or_truncate_text(sentence, cfg.text_target_len)
    model.eval()
    with torch.no_grad():
        frames = torch.from_numpy(padded.frames).unsqueeze(0).to(next(model.parameters()).dtype)
        buckets = torch.from_numpy(hash_codepoints(text.chars[None, :], cfg.text_buckets))
        char_mask = torch.from_numpy(text.mask()[None, :])
        logits = model(frames, buckets, char_mask)
        probs = torch.sigmoid(logits).squeeze(0).cpu().numpy().astype(np.float64)
    if not np.isfinite(probs).all():
        raise ModelError("detection produced non-finite probabilities")
    return FrameProbabilities(probs=probs, mask=padded.mask)


def extract_spans(
    probs: FrameProbabilities,
    threshold: float = 0.5,
    merge_gap: int = 2,
    min_len: int = 3,
) -> list[FrameSpan]:
    """Decode probabilities into sorted, disjoint spans.

    Unmasked frames with prob >= threshold form runs; runs separated by at
    most merge_gap sub-threshold frames are merged; merged runs shorter than
    min_len frames are dropped.
    """
    if merge_gap < 0 or min_len < 1:
        raise ValidationError("merge_gap must be >= 0 and min_len >= 1")
    selected = (probs.probs >= threshold) & probs.mask
    runs = labels_to_spans(selected.astype(np.uint8))
    merged: list[FrameSpan] = []
    for run in runs:
        if merged and run.start - merged[-1].end - 1 <= merge_gap:
            merged[-1] = FrameSpan(merged[-1].start, run.end)
        else:
            merged.append(run)
    return [span for span in merged if len(span) >= min_len]


def span_scores(probs: FrameProbabilities, spans: Sequence[FrameSpan]) -> list[float]:
    """Mean in-span probability, used as the reported span score."""
    return [float(probs.probs[s.start : s.end + 1].mean()) for s in spans]
