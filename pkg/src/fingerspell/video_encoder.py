"""Temporal graph convolutional encoder over the 75-node skeleton.

Each block applies a spatial graph convolution (degree-normalized adjacency
with self-loops), a temporal convolution (odd kernel, stride 1, same-length
padding), batch normalization, and a rectifier, with a residual connection.
The final per-node features are mean-pooled over nodes to give one vector
per frame, so frame alignment is preserved end to end.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn

from .config import ModelConfig
from .errors import ModelError, ValidationError

N_BODY = 33
N_HAND = 21
N_NODES = 75

# Anatomical bone connections, indices into the 33 body landmarks.
BODY_EDGES = (
    (0, 1), (1, 2), (2, 3), (3, 7), (0, 4), (4, 5), (5, 6), (6, 8),
    (9, 10), (11, 12), (11, 13), (13, 15), (15, 17), (15, 19), (15, 21),
    (17, 19), (12, 14), (14, 16), (16, 18), (16, 20), (16, 22), (18, 20),
    (11, 23), (12, 24), (23, 24), (23, 25), (24, 26), (25, 27), (26, 28),
    (27, 29), (28, 30), (29, 31), (30, 32), (27, 31), (28, 32),
)

# Bone connections within one 21-point hand (wrist = 0).
HAND_EDGES = (
    (0, 1), (1, 2), (2, 3), (3, 4),
    (0, 5), (5, 6), (6, 7), (7, 8),
    (5, 9), (9, 10), (10, 11), (11, 12),
    (9, 13), (13, 14), (14, 15), (15, 16),
    (13, 17), (0, 17), (17, 18), (18, 19), (19, 20),
)

LEFT_WRIST_BODY = 15
RIGHT_WRIST_BODY = 16
LEFT_HAND_ROOT = N_BODY
RIGHT_HAND_ROOT = N_BODY + N_HAND


@dataclass(frozen=True)
class SkeletonGraph:
    """Binary adjacency (with self-loops) and its symmetric normalization."""

    adjacency: np.ndarray
    normalized: np.ndarray


def build_skeleton_graph() -> SkeletonGraph:
    """Fixed skeleton over 75 nodes: body bones, hand bones, wrist links."""
    adj = np.zeros((N_NODES, N_NODES), dtype=np.float64)
    for a, b in BODY_EDGES:
        adj[a, b] = adj[b, a] = 1.0
    for base in (LEFT_HAND_ROOT, RIGHT_HAND_ROOT):
        for a, b in HAND_EDGES:
            adj[base + a, base + b] = adj[base + b, base + a] = 1.0
    adj[LEFT_WRIST_BODY, LEFT_HAND_ROOT] = adj[LEFT_HAND_ROOT, LEFT_WRIST_BODY] = 1.0
    adj[RIGHT_WRIST_BODY, RIGHT_HAND_ROOT] = adj[RIGHT_HAND_ROOT, RIGHT_WRIST_BODY] = 1.0
    np.fill_diagonal(adj, 1.0)

    degree = adj.sum(axis=1)
    inv_sqrt = 1.0 / np.sqrt(degree)
    normalized = adj * inv_sqrt[:, None] * inv_sqrt[None, :]
    if not np.isfinite(normalized).all():
        raise ModelError("skeleton graph normalization produced non-finite values")
    return SkeletonGraph(adjacency=adj, normalized=normalized)


class GraphConvBlock(nn.Module):
    def __init__(self, c_in: int, c_out: int, kernel: int):
        super().__init__()
        self.spatial = nn.Conv2d(c_in, c_out, kernel_size=1)
        # replicate padding keeps constant inputs constant across frames
        self.temporal = nn.Conv2d(
            c_out, c_out, kernel_size=(kernel, 1), padding=(kernel // 2, 0), padding_mode="replicate"
        )
        self.norm = nn.BatchNorm2d(c_out)
        if c_in == c_out:
            self.residual = nn.Identity()
        else:
            self.residual = nn.Conv2d(c_in, c_out, kernel_size=1)

    def forward(self, x: torch.Tensor, adj: torch.Tensor) -> torch.Tensor:
        # x: [N, C, T, V]
        y = torch.einsum("nctv,vw->nctw", x, adj)
        y = self.spatial(y)
        y = self.temporal(y)
        y = self.norm(y)
        return torch.relu(y + self.residual(x))


class VideoEncoder(nn.Module):
    """Stack of graph-convolution blocks producing per-frame feature vectors."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        cfg.validate()
        self.cfg = cfg
        graph = build_skeleton_graph()
        self.register_buffer("adj", torch.tensor(graph.normalized, dtype=torch.float32))
        blocks = []
        c_in = 2
        for _ in range(cfg.video_blocks):
            blocks.append(GraphConvBlock(c_in, cfg.video_hidden, cfg.temporal_kernel))
            c_in = cfg.video_hidden
        self.blocks = nn.ModuleList(blocks)

    @property
    def receptive_radius(self) -> int:
        """Frames on each side of t that can influence the output at t."""
        return self.cfg.video_blocks * (self.cfg.temporal_kernel // 2)

    def forward(self, frames: torch.Tensor) -> torch.Tensor:
        """[N, T, 75, 2] -> per-frame features [N, T, hidden]."""
        if frames.ndim != 4 or frames.shape[2] != N_NODES or frames.shape[3] != 2:
            raise ValidationError(f"expected input [N, T, {N_NODES}, 2], got {tuple(frames.shape)}")
        if not torch.isfinite(frames).all():
            raise ValidationError("video encoder input contains non-finite values")
        x = frames.permute(0, 3, 1, 2)  # [N, 2, T, V]
        adj = self.adj.to(x.dtype)
        for block in self.blocks:
            x = block(x, adj)
        x = x.mean(dim=3)  # pool over nodes -> [N, C, T]
        return x.transpose(1, 2)  # [N, T, C]


def encode_video(seq_frames: np.ndarray, encoder: VideoEncoder) -> np.ndarray:
    """Single-sequence convenience wrapper (inference mode)."""
    encoder.eval()
    with torch.no_grad():
        x = torch.from_numpy(np.asarray(seq_frames, dtype=np.float32)).unsqueeze(0)
        out = encoder(x.to(next(encoder.parameters()).dtype))
    result = out.squeeze(0).cpu().numpy()
    if not np.isfinite(result).all():
        raise ModelError("video encoder produced non-finite output")
    return result
