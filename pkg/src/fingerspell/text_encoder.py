"""Character-level transformer encoder with hash-bucket embeddings.

Characters are raw unicode code points hashed into a fixed embedding table,
so there is no tokenizer or vocabulary file. Padding positions (code point
0 beyond the text) are excluded from attention and from the mean-pooled
sentence vector; an all-pad input pools to the zero vector by definition.
"""

from __future__ import annotations

import numpy as np
import torch
import torch.nn as nn

from .config import ModelConfig
from .errors import ValidationError

_HASH_MULTIPLIER = 2654435761  # Knuth multiplicative hash
_MASK_32 = 0xFFFFFFFF
_NEG_INF = -1e9


def hash_codepoints(codes: np.ndarray, buckets: int) -> np.ndarray:
    """Deterministic bucket ids for unicode code points."""
    codes = np.asarray(codes, dtype=np.int64)
    return ((codes * _HASH_MULTIPLIER) & _MASK_32) % buckets


class EncoderLayer(nn.Module):
    def __init__(self, width: int, heads: int):
        super().__init__()
        self.heads = heads
        self.head_dim = width // heads
        self.ln_attn = nn.LayerNorm(width)
        self.qkv = nn.Linear(width, 3 * width)
        self.proj = nn.Linear(width, width)
        self.ln_ff = nn.LayerNorm(width)
        self.ff1 = nn.Linear(width, 4 * width)
        self.ff2 = nn.Linear(4 * width, width)

    def forward(self, x: torch.Tensor, key_mask: torch.Tensor) -> torch.Tensor:
        # x: [N, L, W]; key_mask: [N, L] bool, True = real character
        n, length, width = x.shape
        h = self.ln_attn(x)
        q, k, v = self.qkv(h).chunk(3, dim=-1)
        shape = (n, length, self.heads, self.head_dim)
        q = q.view(shape).transpose(1, 2)  # [N, H, L, D]
        k = k.view(shape).transpose(1, 2)
        v = v.view(shape).transpose(1, 2)
        scores = q @ k.transpose(-1, -2) / (self.head_dim**0.5)
        bias = torch.where(key_mask, 0.0, _NEG_INF).to(x.dtype)
        scores = scores + bias[:, None, None, :]
        attn = torch.softmax(scores, dim=-1)
        out = (attn @ v).transpose(1, 2).reshape(n, length, width)
        x = x + self.proj(out)
        x = x + self.ff2(torch.nn.functional.gelu(self.ff1(self.ln_ff(x))))
        return x


class TextEncoder(nn.Module):
    """Per-character features plus a masked-mean sentence vector."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        cfg.validate()
        self.cfg = cfg
        self.embed = nn.Embedding(cfg.text_buckets, cfg.text_width)
        self.position = nn.Embedding(cfg.text_target_len, cfg.text_width)
        self.layers = nn.ModuleList(EncoderLayer(cfg.text_width, cfg.text_heads) for _ in range(cfg.text_layers))
        self.final_ln = nn.LayerNorm(cfg.text_width)

    def forward(self, buckets: torch.Tensor, mask: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        """[N, L] bucket ids + [N, L] bool mask -> ([N, L, W] features, [N, W] pooled)."""
        if buckets.ndim != 2:
            raise ValidationError(f"expected [N, L] bucket ids, got {tuple(buckets.shape)}")
        if buckets.shape[1] > self.cfg.text_target_len:
            raise ValidationError(
                f"text length {buckets.shape[1]} exceeds configured maximum {self.cfg.text_target_len}"
            )
        n, length = buckets.shape
        pos = torch.arange(length, device=buckets.device)
        x = self.embed(buckets) + self.position(pos)[None, :, :]
        for layer in self.layers:
            x = layer(x, mask)
        x = self.final_ln(x)
        fmask = mask.to(x.dtype).unsqueeze(-1)
        denom = fmask.sum(dim=1).clamp(min=1.0)
        pooled = (x * fmask).sum(dim=1) / denom
        return x, pooled

    def encode_strings(self, padded_chars: np.ndarray, lengths: np.ndarray) -> tuple[torch.Tensor, torch.Tensor]:
        """numpy code points [N, L] + lengths [N] -> forward() on hashed ids."""
        buckets = torch.from_numpy(hash_codepoints(padded_chars, self.cfg.text_buckets))
        length = padded_chars.shape[1]
        mask = torch.from_numpy(np.arange(length)[None, :] < np.asarray(lengths)[:, None])
        dtype = next(self.parameters()).dtype
        device = next(self.parameters()).device
        return self.forward(buckets.to(device), mask.to(device))
