"""Raw landmark selection and fixed-size padding for video and text inputs."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ValidationError

N_BODY = 33
N_HAND = 21
N_KEYPOINTS = N_BODY + 2 * N_HAND  # 75, ordered body / left hand / right hand

VIDEO_TARGET_LEN = 2000
TEXT_TARGET_LEN = 600


@dataclass
class PoseSequence:
    """Model-ready keypoints: [n_frames, 75, 2] float32 plus a validity mask.

    mask[t] == False marks padding frames; real frames keep mask True even
    when individual landmark groups were undetected (those are zero-filled).
    """

    frames: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float32)
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.frames.ndim != 3 or self.frames.shape[1:] != (N_KEYPOINTS, 2):
            raise ValidationError(f"frames must be [n, {N_KEYPOINTS}, 2], got {self.frames.shape}")
        if self.mask.shape != (self.frames.shape[0],):
            raise ValidationError("mask length must equal n_frames")
        if not np.isfinite(self.frames).all():
            raise ValidationError("pose coordinates must be finite")

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    @classmethod
    def from_array(cls, frames: np.ndarray) -> "PoseSequence":
        frames = np.asarray(frames, dtype=np.float32)
        return cls(frames, np.ones(frames.shape[0], dtype=bool))


@dataclass
class RawLandmarks:
    """Extractor output before keypoint selection: 3D groups per frame.

    Arrays are [n, group_size, 3]; presence flags mark frames where the
    extractor detected the group. Face landmarks, when present, are ignored.
    """

    body: np.ndarray
    left_hand: np.ndarray
    right_hand: np.ndarray
    body_present: Optional[np.ndarray] = None
    left_present: Optional[np.ndarray] = None
    right_present: Optional[np.ndarray] = None
    face: Optional[np.ndarray] = None


@dataclass
class PaddedText:
    """Fixed-length sequence of unicode code points; 0 marks padding."""

    chars: np.ndarray
    length: int

    def __post_init__(self):
        self.chars = np.asarray(self.chars, dtype=np.int64)
        if self.chars.ndim != 1:
            raise ValidationError("chars must be 1-D")
        if not 0 <= self.length <= self.chars.shape[0]:
            raise ValidationError("text length out of range")

    @property
    def target_len(self) -> int:
        return self.chars.shape[0]

    def mask(self) -> np.ndarray:
        m = np.zeros(self.target_len, dtype=bool)
        m[: self.length] = True
        return m


def _presence(flags: Optional[np.ndarray], n: int) -> np.ndarray:
    if flags is None:
        return np.ones(n, dtype=bool)
    flags = np.asarray(flags, dtype=bool)
    if flags.shape != (n,):
        raise ValidationError(f"presence flags must have shape ({n},)")
    return flags


def select_keypoints(raw: RawLandmarks) -> PoseSequence:
    """Keep body + both hands (75 points), drop z and face, zero-fill gaps.

    Output keypoint order is body 0-32, left hand 33-53, right hand 54-74.
    Frames with an undetected group stay valid (mask=1) with that group
    zeroed. Raises if the body group is missing on every frame.
    """
    body = np.asarray(raw.body, dtype=np.float32)
    left = np.asarray(raw.left_hand, dtype=np.float32)
    right = np.asarray(raw.right_hand, dtype=np.float32)
    n = body.shape[0]
    if body.shape != (n, N_BODY, 3):
        raise ValidationError(f"body landmarks must be [n, {N_BODY}, 3], got {body.shape}")
    if left.shape != (n, N_HAND, 3) or right.shape != (n, N_HAND, 3):
        raise ValidationError(f"hand landmarks must be [n, {N_HAND}, 3]")

    body_present = _presence(raw.body_present, n)
    left_present = _presence(raw.left_present, n)
    right_present = _presence(raw.right_present, n)
    if not body_present.any():
        raise ValidationError("body landmarks missing on every frame")

    frames = np.zeros((n, N_KEYPOINTS, 2), dtype=np.float32)
    frames[body_present, 0:N_BODY] = body[body_present, :, :2]
    frames[left_present, N_BODY : N_BODY + N_HAND] = left[left_present, :, :2]
    frames[right_present, N_BODY + N_HAND :] = right[right_present, :, :2]
    if not np.isfinite(frames).all():
        raise ValidationError("landmarks contain non-finite coordinates")
    return PoseSequence(frames, np.ones(n, dtype=bool))


def pad_or_truncate_video(seq: PoseSequence, target: int = VIDEO_TARGET_LEN) -> PoseSequence:
    """Exact-length output: zero frames with mask=0 appended, or prefix kept."""
    if target < 1:
        raise ValidationError("target length must be >= 1")
    n = seq.n_frames
    if n == target:
        return PoseSequence(seq.frames.copy(), seq.mask.copy())
    if n > target:
        return PoseSequence(seq.frames[:target].copy(), seq.mask[:target].copy())
    frames = np.zeros((target, N_KEYPOINTS, 2), dtype=np.float32)
    mask = np.zeros(target, dtype=bool)
    frames[:n] = seq.frames
    mask[:n] = seq.mask
    return PoseSequence(frames, mask)


def pad_or_truncate_text(text: str, target: int = TEXT_TARGET_LEN) -> PaddedText:
    """Exact-length code point sequence; pad code point is 0."""
    if target < 1:
        raise ValidationError("target length must be >= 1")
    codes = [ord(c) for c in text[:target]]
    chars = np.zeros(target, dtype=np.int64)
    chars[: len(codes)] = codes
    return PaddedText(chars, len(codes))
