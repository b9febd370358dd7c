"""Self-supervised contrastive pretraining on unlabeled video/sentence pairs.

Two objectives share the encoders:

* temporal: given two fixed-length clips, classify different-video /
  first-clip-earlier / first-clip-later (balanced three-way cross-entropy);
* sentential: given a video and two candidate sentences, pick the sentence
  the video interprets (two-way cross-entropy over bilinear match scores).

Batches of the two objectives alternate 1:1. Heads are discarded at
fine-tuning; only encoder weights transfer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum
from typing import Sequence

import numpy as np
import torch
import torch.nn as nn

from .checkpoint import module_arrays, save_checkpoint
from .config import ModelConfig, PretrainConfig
from .data_model import VideoRecord
from .errors import ModelError, ValidationError
from .preprocessing import (
    PaddedText,
    PoseSequence,
    pad_or_truncate_text,
    pad_or_truncate_video,
)
from .text_encoder import TextEncoder, hash_codepoints
from .video_encoder import VideoEncoder


class TemporalLabel(IntEnum):
    DIFFERENT_VIDEO = 0
    A_EARLIER = 1
    A_LATER = 2


@dataclass
class TemporalPair:
    clip_a: PoseSequence
    clip_b: PoseSequence
    label: TemporalLabel


@dataclass
class SententialExample:
    video: PoseSequence
    sent_a: PaddedText
    sent_b: PaddedText
    label: int  # 0 = sentence A matches, 1 = sentence B matches


@dataclass
class PretrainDataset:
    """Videos plus their pose arrays, kept in memory for sampling."""

    records: list[VideoRecord]
    poses: dict[str, np.ndarray]

    def __post_init__(self):
        if not self.records:
            raise ValidationError("pretraining dataset is empty")

    def n_frames(self, i: int) -> int:
        return self.poses[self.records[i].video_id].shape[0]

    def clip(self, i: int, start: int, length: int) -> PoseSequence:
        pose = self.poses[self.records[i].video_id]
        return PoseSequence.from_array(pose[start : start + length])


def sample_temporal_pair(dataset: PretrainDataset, rng: np.random.Generator, clip_len: int) -> TemporalPair:
    """Draw one labeled clip pair; the three classes are equally likely.

    Same-video pairs are only taken from videos strictly longer than
    2*clip_len and never overlap. A_EARLIER means clip_a starts first.
    """
    n_videos = len(dataset.records)
    long_enough = [i for i in range(n_videos) if dataset.n_frames(i) > 2 * clip_len]
    fits_one = [i for i in range(n_videos) if dataset.n_frames(i) >= clip_len]
    if n_videos < 2 or len(fits_one) < 2:
        raise ValidationError("temporal sampling needs at least 2 videos of clip length")
    if not long_enough:
        raise ValidationError(f"no video longer than {2 * clip_len} frames for same-video pairs")

    label = TemporalLabel(int(rng.integers(3)))
    if label == TemporalLabel.DIFFERENT_VIDEO:
        i, j = rng.choice(fits_one, size=2, replace=False)
        start_i = int(rng.integers(dataset.n_frames(int(i)) - clip_len + 1))
        start_j = int(rng.integers(dataset.n_frames(int(j)) - clip_len + 1))
        return TemporalPair(dataset.clip(int(i), start_i, clip_len), dataset.clip(int(j), start_j, clip_len), label)

    i = int(long_enough[int(rng.integers(len(long_enough)))])
    n = dataset.n_frames(i)
    start_early = int(rng.integers(0, n - 2 * clip_len + 1))
    start_late = int(rng.integers(start_early + clip_len, n - clip_len + 1))
    early = dataset.clip(i, start_early, clip_len)
    late = dataset.clip(i, start_late, clip_len)
    if label == TemporalLabel.A_EARLIER:
        return TemporalPair(early, late, label)
    return TemporalPair(late, early, label)


def sample_sentential_example(
    dataset: PretrainDataset,
    rng: np.random.Generator,
    video_len: int,
    text_len: int,
) -> SententialExample:
    """Draw one video with its true sentence and a distractor, balanced slots."""
    n_videos = len(dataset.records)
    if n_videos < 2:
        raise ValidationError("sentential sampling needs at least 2 videos")
    i = int(rng.integers(n_videos))
    true_sentence = dataset.records[i].sentence
    others = [j for j in range(n_videos) if dataset.records[j].sentence != true_sentence]
    if not others:
        raise ValidationError("all sentences are identical; no distractor available")
    j = int(others[int(rng.integers(len(others)))])
    video = pad_or_truncate_video(PoseSequence.from_array(dataset.poses[dataset.records[i].video_id]), video_len)
    true_text = pad_or_truncate_text(true_sentence, text_len)
    distractor = pad_or_truncate_text(dataset.records[j].sentence, text_len)
    label = int(rng.integers(2))
    if label == 0:
        return SententialExample(video, true_text, distractor, 0)
    return SententialExample(video, distractor, true_text, 1)


class PretrainModel(nn.Module):
    """Shared encoders plus the two contrastive heads.

    The temporal head is linear over the pair-interaction features
    [a, b, a-b, a*b]; plain concatenation cannot linearly separate
    same-video from different-video pairs, the elementwise product can.
    """

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        cfg.validate()
        self.cfg = cfg
        self.video = VideoEncoder(cfg)
        self.text = TextEncoder(cfg)
        self.temporal_head = nn.Linear(4 * cfg.video_hidden, 3)
        self.sentential = nn.Bilinear(cfg.video_hidden, cfg.text_width, 1)

    def clip_features(self, frames: torch.Tensor) -> torch.Tensor:
        """[N, L, 75, 2] -> temporal mean-pooled clip vectors [N, C]."""
        return self.video(frames).mean(dim=1)

    def video_vector(self, frames: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        """Masked temporal mean over a padded video."""
        feats = self.video(frames)
        fmask = mask.to(feats.dtype).unsqueeze(-1)
        return (feats * fmask).sum(dim=1) / fmask.sum(dim=1).clamp(min=1.0)


def temporal_logits(head: nn.Linear, feat_a: torch.Tensor, feat_b: torch.Tensor) -> torch.Tensor:
    pair = torch.cat([feat_a, feat_b, feat_a - feat_b, feat_a * feat_b], dim=-1)
    return head(pair)


def temporal_head_loss(
    head: nn.Linear, feat_a: torch.Tensor, feat_b: torch.Tensor, labels: torch.Tensor
) -> torch.Tensor:
    """Three-way cross-entropy on the trinary clip-relation prediction."""
    return nn.functional.cross_entropy(temporal_logits(head, feat_a, feat_b), labels)


def sentential_scores(
    scorer: nn.Bilinear, video_vec: torch.Tensor, feat_a: torch.Tensor, feat_b: torch.Tensor
) -> torch.Tensor:
    score_a = scorer(video_vec, feat_a)
    score_b = scorer(video_vec, feat_b)
    return torch.cat([score_a, score_b], dim=-1)


def sentential_head_loss(
    scorer: nn.Bilinear,
    video_vec: torch.Tensor,
    feat_a: torch.Tensor,
    feat_b: torch.Tensor,
    labels: torch.Tensor,
) -> torch.Tensor:
    """Binary cross-entropy over the two shared-scorer sentence scores."""
    return nn.functional.cross_entropy(sentential_scores(scorer, video_vec, feat_a, feat_b), labels)


# ---------------------------------------------------------------------------
# training loop


def _temporal_batch(model, dataset, rng, cfg: PretrainConfig):
    pairs = [sample_temporal_pair(dataset, rng, cfg.clip_len) for _ in range(cfg.batch_size)]
    dtype = next(model.parameters()).dtype
    a = torch.from_numpy(np.stack([p.clip_a.frames for p in pairs])).to(dtype)
    b = torch.from_numpy(np.stack([p.clip_b.frames for p in pairs])).to(dtype)
    labels = torch.tensor([int(p.label) for p in pairs], dtype=torch.long)
    feat_a = model.clip_features(a)
    feat_b = model.clip_features(b)
    return temporal_head_loss(model.temporal_head, feat_a, feat_b, labels)


def _text_tensors(texts: Sequence[PaddedText], model):
    chars = np.stack([t.chars for t in texts])
    buckets = torch.from_numpy(hash_codepoints(chars, model.cfg.text_buckets))
    mask = torch.from_numpy(np.stack([t.mask() for t in texts]))
    return buckets, mask


def _sentential_batch(model, dataset, rng, cfg: PretrainConfig):
    examples = [
        sample_sentential_example(dataset, rng, model.cfg.video_target_len, cfg.sentential_text_len)
        for _ in range(cfg.batch_size)
    ]
    dtype = next(model.parameters()).dtype
    frames = torch.from_numpy(np.stack([e.video.frames for e in examples])).to(dtype)
    mask = torch.from_numpy(np.stack([e.video.mask for e in examples]))
    video_vec = model.video_vector(frames, mask)
    buckets_a, mask_a = _text_tensors([e.sent_a for e in examples], model)
    buckets_b, mask_b = _text_tensors([e.sent_b for e in examples], model)
    _, feat_a = model.text(buckets_a, mask_a)
    _, feat_b = model.text(buckets_b, mask_b)
    labels = torch.tensor([e.label for e in examples], dtype=torch.long)
    return sentential_head_loss(model.sentential, video_vec, feat_a, feat_b, labels)


def pretrain(
    dataset: PretrainDataset,
    model_cfg: ModelConfig,
    cfg: PretrainConfig,
) -> tuple[PretrainModel, list[tuple[int, int, str, float]]]:
    """Run contrastive pretraining and return the model plus its loss log.

    Objectives alternate per batch within an epoch. Deterministic for a
    fixed seed; aborts with ModelError on divergence.
    """
    cfg.validate()
    torch.manual_seed(cfg.seed)
    model = PretrainModel(model_cfg)
    if cfg.epochs == 0:
        model.eval()
        return model, []
    rng = np.random.default_rng(cfg.seed)
    optimizer = torch.optim.Adam(model.parameters(), lr=cfg.lr)
    objectives = cfg.objective_list()
    samples = cfg.samples_per_epoch or len(dataset.records)
    steps_per_epoch = math.ceil(samples / cfg.batch_size)
    log: list[tuple[int, int, str, float]] = []
    model.train()
    for epoch in range(cfg.epochs):
        step = 0
        for _ in range(steps_per_epoch):
            for objective in objectives:
                optimizer.zero_grad()
                if objective == "temporal":
                    loss = _temporal_batch(model, dataset, rng, cfg)
                else:
                    loss = _sentential_batch(model, dataset, rng, cfg)
                if not torch.isfinite(loss):
                    raise ModelError(
                        f"pretraining diverged at epoch {epoch} step {step} ({objective}): loss={loss.item()}"
                    )
                loss.backward()
                optimizer.step()
                log.append((epoch, step, objective, float(loss.item())))
                step += 1
    model.eval()
    return model, log


def save_pretrain_checkpoint(path, model: PretrainModel) -> None:
    arrays = {}
    arrays.update(module_arrays(model.video, "video"))
    arrays.update(module_arrays(model.text, "text"))
    arrays.update(module_arrays(model.temporal_head, "temporal_head"))
    arrays.update(module_arrays(model.sentential, "sentential"))
    save_checkpoint(path, model.cfg, arrays)


def temporal_holdout_accuracy(
    model: PretrainModel,
    dataset: PretrainDataset,
    rng: np.random.Generator,
    clip_len: int,
    n_samples: int = 300,
) -> float:
    """Trinary accuracy of the temporal head on freshly sampled pairs."""
    model.eval()
    correct = 0
    dtype = next(model.parameters()).dtype
    with torch.no_grad():
        for start in range(0, n_samples, 32):
            count = min(32, n_samples - start)
            pairs = [sample_temporal_pair(dataset, rng, clip_len) for _ in range(count)]
            a = torch.from_numpy(np.stack([p.clip_a.frames for p in pairs])).to(dtype)
            b = torch.from_numpy(np.stack([p.clip_b.frames for p in pairs])).to(dtype)
            logits = temporal_logits(model.temporal_head, model.clip_features(a), model.clip_features(b))
            preds = logits.argmax(dim=-1).cpu().numpy()
            correct += int(sum(int(p.label) == int(q) for p, q in zip(pairs, preds)))
    return correct / n_samples
