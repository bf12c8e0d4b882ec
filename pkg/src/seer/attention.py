"""Masked multihead attention, transformer encoder layers and co-attention blocks.

Sequences are ``(batch, length, d)`` tensors (a bare ``(length, d)`` is
accepted too) with a boolean mask that is True at valid positions. No
positional encoding is added anywhere.
"""
import math

import torch
import torch.nn as nn
import torch.nn.functional as F


def masked_mean(x, mask=None):
    """Mean over valid positions of the sequence axis."""
    if mask is None:
        return x.mean(dim=-2)
    w = mask.to(x.dtype).unsqueeze(-1)
    return (x * w).sum(dim=-2) / w.sum(dim=-2)


class MultiHeadAttention(nn.Module):
    def __init__(self, d, heads):
        super().__init__()
        if d % heads:
            raise ValueError(f"d={d} is not divisible by heads={heads}")
        self.d = d
        self.heads = heads
        self.d_h = d // heads
        self.w_q = nn.Linear(d, d, bias=False)
        self.w_k = nn.Linear(d, d, bias=False)
        self.w_v = nn.Linear(d, d, bias=False)
        self.w_o = nn.Linear(d, d, bias=False)

    def _split(self, x):
        b, n, _ = x.shape
        return x.view(b, n, self.heads, self.d_h).transpose(1, 2)

    def forward(self, query, key, value, key_mask=None, return_weights=False):
        unbatched = query.dim() == 2
        if unbatched:
            query, key, value = query.unsqueeze(0), key.unsqueeze(0), value.unsqueeze(0)
            key_mask = None if key_mask is None else key_mask.unsqueeze(0)
        for name, t in (("query", query), ("key", key), ("value", value)):
            if t.shape[-1] != self.d:
                raise ValueError(f"{name} has feature dim {t.shape[-1]}, expected {self.d}")
        if key.shape[:2] != value.shape[:2]:
            raise ValueError(f"key shape {tuple(key.shape)} and value shape {tuple(value.shape)} disagree")
        if query.shape[0] != key.shape[0]:
            raise ValueError(f"query batch {query.shape[0]} != key batch {key.shape[0]}")
        if key_mask is not None:
            if key_mask.shape != key.shape[:2]:
                raise ValueError(f"key_mask shape {tuple(key_mask.shape)} != key shape {tuple(key.shape[:2])}")
            if not bool(key_mask.any(dim=-1).all()):
                raise ValueError("every key row needs at least one valid position")

        q = self._split(self.w_q(query))
        k = self._split(self.w_k(key))
        v = self._split(self.w_v(value))
        logits = q @ k.transpose(-1, -2) / math.sqrt(self.d_h)
        if key_mask is not None:
            logits = logits.masked_fill(~key_mask[:, None, None, :], float("-inf"))
        weights = torch.softmax(logits, dim=-1)
        heads = (weights @ v).transpose(1, 2).reshape(query.shape[0], query.shape[1], self.d)
        out = self.w_o(heads)
        if unbatched:
            out, weights = out.squeeze(0), weights.squeeze(0)
        return (out, weights) if return_weights else out


class EncoderLayer(nn.Module):
    """``h' = Norm(x + MHA(x, ctx, ctx))``, then ``Norm(h' + FFN(h'))``."""

    def __init__(self, d, heads, ffn_mult=4):
        super().__init__()
        self.attn = MultiHeadAttention(d, heads)
        self.norm1 = nn.LayerNorm(d)
        self.ffn = nn.Sequential(nn.Linear(d, ffn_mult * d), nn.GELU(), nn.Linear(ffn_mult * d, d))
        self.norm2 = nn.LayerNorm(d)

    def forward(self, primary, context, context_mask=None):
        h = self.norm1(primary + self.attn(primary, context, context, context_mask))
        return self.norm2(h + self.ffn(h))


class SelfAttention(EncoderLayer):
    def forward(self, x, mask=None):
        return super().forward(x, x, mask)


class CoAttention(nn.Module):
    """Two independent encoder layers; each side attends to the other."""

    def __init__(self, d, heads, ffn_mult=4):
        super().__init__()
        self.a_from_b = EncoderLayer(d, heads, ffn_mult)
        self.b_from_a = EncoderLayer(d, heads, ffn_mult)

    def forward(self, a, b, a_mask=None, b_mask=None):
        return self.a_from_b(a, b, b_mask), self.b_from_a(b, a, a_mask)
