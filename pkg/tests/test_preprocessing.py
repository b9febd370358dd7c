import numpy as np
import pytest

from fingerspell.errors import ValidationError
from fingerspell.preprocessing import (
    PoseSequence,
    RawLandmarks,
    pad_or_truncate_text,
    pad_or_truncate_video,
    select_keypoints,
)


def make_raw(n=5, rng=None, **kw):
    rng = rng or np.random.default_rng(0)
    return RawLandmarks(
        body=rng.normal(0.5, 0.1, (n, 33, 3)),
        left_hand=rng.normal(0.4, 0.1, (n, 21, 3)),
        right_hand=rng.normal(0.6, 0.1, (n, 21, 3)),
        **kw,
    )


class TestSelectKeypoints:
    def test_order_body_left_right(self):
        raw = make_raw()
        seq = select_keypoints(raw)
        assert seq.frames.shape == (5, 75, 2)
        assert np.allclose(seq.frames[:, 0:33], raw.body[:, :, :2].astype(np.float32))
        assert np.allclose(seq.frames[:, 33:54], raw.left_hand[:, :, :2].astype(np.float32))
        assert np.allclose(seq.frames[:, 54:75], raw.right_hand[:, :, :2].astype(np.float32))
        assert seq.mask.all()

    def test_undetected_right_hand_zero_filled(self):
        raw = make_raw(right_present=np.array([True, True, False, True, True]))
        seq = select_keypoints(raw)
        assert np.all(seq.frames[2, 54:75] == 0.0)
        assert seq.mask[2]  # frame stays valid

    def test_z_coordinate_ignored(self):
        rng = np.random.default_rng(1)
        raw = make_raw(rng=rng)
        other = RawLandmarks(
            body=raw.body.copy(),
            left_hand=raw.left_hand.copy(),
            right_hand=raw.right_hand.copy(),
        )
        other.body[:, :, 2] += 10.0
        other.left_hand[:, :, 2] -= 3.0
        assert np.array_equal(select_keypoints(raw).frames, select_keypoints(other).frames)

    def test_body_missing_everywhere_rejected(self):
        raw = make_raw(body_present=np.zeros(5, dtype=bool))
        with pytest.raises(ValidationError):
            select_keypoints(raw)

    def test_output_always_finite(self):
        seq = select_keypoints(make_raw(n=20, rng=np.random.default_rng(3)))
        assert np.isfinite(seq.frames).all()


class TestPadVideo:
    def test_pad_appends_masked_zero_frames(self):
        seq = PoseSequence.from_array(np.ones((100, 75, 2), dtype=np.float32))
        out = pad_or_truncate_video(seq, 2000)
        assert out.n_frames == 2000
        assert out.mask[:100].all() and not out.mask[100:].any()
        assert np.all(out.frames[100:] == 0.0)

    def test_truncate_keeps_prefix(self):
        frames = np.arange(2500 * 75 * 2, dtype=np.float32).reshape(2500, 75, 2)
        out = pad_or_truncate_video(PoseSequence.from_array(frames), 2000)
        assert out.n_frames == 2000
        assert np.array_equal(out.frames, frames[:2000])

    def test_exact_length_is_identity(self):
        frames = np.random.default_rng(0).normal(size=(64, 75, 2)).astype(np.float32)
        seq = PoseSequence.from_array(frames)
        out = pad_or_truncate_video(seq, 64)
        assert np.array_equal(out.frames, frames) and out.mask.all()

    def test_idempotent_at_target(self):
        seq = PoseSequence.from_array(np.random.default_rng(1).normal(size=(30, 75, 2)))
        once = pad_or_truncate_video(seq, 50)
        twice = pad_or_truncate_video(once, 50)
        assert np.array_equal(once.frames, twice.frames)
        assert np.array_equal(once.mask, twice.mask)


class TestPadText:
    def test_short_text_zero_padded(self):
        out = pad_or_truncate_text("acid", 6)
        assert out.chars.tolist() == [ord(c) for c in "acid"] + [0, 0]
        assert out.length == 4

    def test_long_text_truncated(self):
        out = pad_or_truncate_text("x" * 700, 600)
        assert out.target_len == 600 and out.length == 600

    def test_empty_text(self):
        out = pad_or_truncate_text("", 3)
        assert out.chars.tolist() == [0, 0, 0] and out.length == 0
        assert not out.mask().any()
