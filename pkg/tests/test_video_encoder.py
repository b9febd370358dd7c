import numpy as np
import pytest
import torch

from helpers import directional_gradient_errors, tiny_model_config

from fingerspell.errors import ValidationError
from fingerspell.video_encoder import N_NODES, VideoEncoder, build_skeleton_graph


class TestSkeletonGraph:
    def test_adjacency_symmetric(self):
        g = build_skeleton_graph()
        assert np.array_equal(g.adjacency, g.adjacency.T)

    def test_node_count(self):
        g = build_skeleton_graph()
        assert g.adjacency.shape == (75, 75)

    def test_every_node_connected(self):
        g = build_skeleton_graph()
        assert (np.diag(g.adjacency) == 1.0).all()
        assert (g.adjacency.sum(axis=1) >= 1.0).all()

    def test_normalization_finite_and_symmetric(self):
        g = build_skeleton_graph()
        assert np.isfinite(g.normalized).all()
        assert np.allclose(g.normalized, g.normalized.T)

    def test_wrist_links_present(self):
        g = build_skeleton_graph()
        assert g.adjacency[15, 33] == 1.0  # left wrist to left hand root
        assert g.adjacency[16, 54] == 1.0  # right wrist to right hand root


@pytest.fixture()
def encoder():
    torch.manual_seed(0)
    return VideoEncoder(tiny_model_config(video_target_len=64)).eval()


class TestVideoEncoder:
    def test_output_shape(self, encoder):
        x = torch.randn(2, 64, N_NODES, 2)
        assert encoder(x).shape == (2, 64, 8)

    def test_constant_input_constant_output(self, encoder):
        with torch.no_grad():
            out = encoder(torch.zeros(1, 64, N_NODES, 2))
        assert float((out - out[:, :1, :]).abs().max()) == 0.0

    def test_locality_matches_receptive_field(self, encoder):
        torch.manual_seed(1)
        x = torch.randn(1, 64, N_NODES, 2)
        y = x.clone()
        y[0, 40] += 1.0
        with torch.no_grad():
            fx, fy = encoder(x), encoder(y)
        changed = np.nonzero((fx - fy).abs().sum(-1).squeeze(0).numpy() > 1e-9)[0]
        radius = encoder.receptive_radius
        assert radius == 2 * 4
        assert changed.min() >= 40 - radius
        assert changed.max() <= 40 + radius

    def test_deterministic_given_seed(self):
        cfg = tiny_model_config(video_target_len=32)
        torch.manual_seed(5)
        enc1 = VideoEncoder(cfg).eval()
        torch.manual_seed(5)
        enc2 = VideoEncoder(cfg).eval()
        x = torch.full((1, 32, N_NODES, 2), 0.25)
        with torch.no_grad():
            a, b = enc1(x), enc2(x)
        assert torch.equal(a, b)

    def test_finite_output_for_finite_input(self, encoder):
        x = torch.randn(1, 64, N_NODES, 2) * 100.0
        assert torch.isfinite(encoder(x)).all()

    def test_nonfinite_input_rejected(self, encoder):
        x = torch.randn(1, 64, N_NODES, 2)
        x[0, 0, 0, 0] = float("nan")
        with pytest.raises(ValidationError):
            encoder(x)

    def test_bad_shape_rejected(self, encoder):
        with pytest.raises(ValidationError):
            encoder(torch.zeros(1, 10, 20, 2))

    def test_gradients_match_finite_differences(self):
        torch.manual_seed(7)
        encoder = VideoEncoder(tiny_model_config()).double().train()
        x = torch.randn(2, 8, N_NODES, 2, dtype=torch.float64)
        target = torch.randn(2, 8, 8, dtype=torch.float64)

        def loss_fn():
            return ((encoder(x) - target) ** 2).mean()

        errors = directional_gradient_errors(loss_fn, encoder, n_directions=8, eps=1e-6)
        assert max(errors) < 1e-4
