"""Shared test utilities: brute-force oracles and a gradient checker."""

from __future__ import annotations

import numpy as np
import torch

from fingerspell.config import ModelConfig
from fingerspell.data_model import AlignedSpan, FrameSpan


def iou_detection_oracle(pred, gold) -> float:
    """Frame-set IOU computed with explicit Python sets."""
    frames_p = set()
    for s in pred:
        frames_p.update(range(s.start, s.end + 1))
    frames_g = set()
    for s in gold:
        frames_g.update(range(s.start, s.end + 1))
    if not frames_p and not frames_g:
        return 1.0
    return len(frames_p & frames_g) / len(frames_p | frames_g)


def iou_alignment_oracle(pred, gold) -> float:
    """(frame, word_index) pair-set IOU with explicit Python sets."""
    pairs_p = {(f, a.word_index) for a in pred for f in range(a.span.start, a.span.end + 1)}
    pairs_g = {(f, a.word_index) for a in gold for f in range(a.span.start, a.span.end + 1)}
    if not pairs_p and not pairs_g:
        return 1.0
    return len(pairs_p & pairs_g) / len(pairs_p | pairs_g)


def random_span_set(rng: np.random.Generator, n_frames: int, max_spans: int = 6) -> list[FrameSpan]:
    spans = []
    for _ in range(int(rng.integers(0, max_spans + 1))):
        start = int(rng.integers(0, n_frames))
        end = int(rng.integers(start, n_frames))
        spans.append(FrameSpan(start, end))
    return spans


def random_aligned_set(rng: np.random.Generator, n_frames: int, n_words: int = 8) -> list[AlignedSpan]:
    return [
        AlignedSpan(span=s, word_index=int(rng.integers(0, n_words)))
        for s in random_span_set(rng, n_frames)
    ]


def tiny_model_config(**overrides) -> ModelConfig:
    """The small double-precision-friendly config used by gradient checks."""
    base = dict(
        video_blocks=2,
        video_hidden=8,
        temporal_kernel=9,
        video_target_len=8,
        text_layers=2,
        text_heads=2,
        text_width=16,
        text_buckets=64,
        text_target_len=12,
    )
    base.update(overrides)
    return ModelConfig(**base)


def directional_gradient_errors(
    loss_fn,
    module: torch.nn.Module,
    n_directions: int = 20,
    eps: float = 1e-5,
    seed: int = 0,
) -> list[float]:
    """Relative errors between analytic and central-difference directional derivatives.

    loss_fn must rebuild the scalar loss from the module's current
    parameters on every call; the module is restored before returning.
    """
    rng = np.random.default_rng(seed)
    params = [p for p in module.parameters() if p.requires_grad]
    loss = loss_fn()
    grads = torch.autograd.grad(loss, params, allow_unused=False)
    flat_grad = torch.cat([g.reshape(-1) for g in grads]).detach()

    def nudge(direction: torch.Tensor, scale: float) -> None:
        offset = 0
        with torch.no_grad():
            for p in params:
                k = p.numel()
                p += scale * direction[offset : offset + k].reshape(p.shape)
                offset += k

    errors = []
    n_total = int(flat_grad.numel())
    for _ in range(n_directions):
        direction = torch.from_numpy(rng.normal(size=n_total)).to(flat_grad.dtype)
        direction /= direction.norm()
        analytic = float(flat_grad @ direction)
        nudge(direction, eps)
        with torch.no_grad():
            loss_plus = float(loss_fn())
        nudge(direction, -2 * eps)
        with torch.no_grad():
            loss_minus = float(loss_fn())
        nudge(direction, eps)
        numeric = (loss_plus - loss_minus) / (2 * eps)
        denom = max(abs(analytic), abs(numeric), 1e-8)
        errors.append(abs(analytic - numeric) / denom)
    return errors
