"""Expert emotional reasoning.

A bank of ``k`` experts (BiLSTM, multihead self-attention, 2-way score
head) rates the positive tone of text and caption. Scores and features
are averaged over experts, mixed across modalities with ``lambda``, and
turned into a closed-form estimate of P(real) from emotional tone alone.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import torch
import torch.nn as nn

from .attention import masked_mean

PROB_EPS = 1e-7


class PriorError(ValueError):
    pass


def _lstm_scan(x, mask, w_ih, w_hh, b):
    """Bidirectional LSTM over ``x`` for every expert at once.

    ``x`` is (B, L, d); weights carry leading (k, 2) expert/direction axes.
    Masked positions leave the recurrent state untouched, so padding never
    reaches the backward direction. Returns (k, B, L, 2h).
    """
    k = w_ih.shape[0]
    batch, length, _ = x.shape
    hidden = w_hh.shape[-1]
    proj = torch.einsum("kgfd,bld->lkgbf", w_ih, x) + b[:, :, None, :]
    if mask is None:
        mask = torch.ones(batch, length, dtype=torch.bool, device=x.device)
    # Step t feeds position t forward and position L-1-t backward.
    steps = torch.stack([proj[:, :, 0], proj[:, :, 1].flip(0)], dim=2).unbind(0)
    valid = torch.stack([mask.T, mask.T.flip(0)], dim=1)[:, None, :, :, None].unbind(0)
    h = x.new_zeros(k, 2, batch, hidden)
    c = x.new_zeros(k, 2, batch, hidden)
    w_hh_t = w_hh.transpose(-1, -2)
    states = []
    for step, ok in zip(steps, valid):
        gates = step + h @ w_hh_t
        i, f, g, o = gates.chunk(4, dim=-1)
        c_new = torch.sigmoid(f) * c + torch.sigmoid(i) * torch.tanh(g)
        h_new = torch.sigmoid(o) * torch.tanh(c_new)
        c = torch.where(ok, c_new, c)
        h = torch.where(ok, h_new, h)
        states.append(h)
    hs = torch.stack(states, dim=0)
    fwd = hs[:, :, 0].permute(1, 2, 0, 3)
    bwd = hs[:, :, 1].flip(0).permute(1, 2, 0, 3)
    return torch.cat([fwd, bwd], dim=-1)


def _expert_attention(e, mask, w_q, w_k, w_v, w_o, heads):
    k, batch, length, d = e.shape
    d_h = d // heads

    def split(t):
        return t.view(k, batch, length, heads, d_h).transpose(2, 3)

    q = split(torch.einsum("kbld,kde->kble", e, w_q))
    kk = split(torch.einsum("kbld,kde->kble", e, w_k))
    v = split(torch.einsum("kbld,kde->kble", e, w_v))
    logits = q @ kk.transpose(-1, -2) / math.sqrt(d_h)
    if mask is not None:
        logits = logits.masked_fill(~mask[None, :, None, None, :], float("-inf"))
    out = (torch.softmax(logits, dim=-1) @ v).transpose(2, 3).reshape(k, batch, length, d)
    return torch.einsum("kbld,kde->kble", out, w_o)


class ExpertBank(nn.Module):
    """``k`` independently initialised experts evaluated in one batched pass."""

    def __init__(self, k, d, heads):
        super().__init__()
        if k < 1:
            raise ValueError("need at least one expert")
        if d % 2 or d % heads:
            raise ValueError(f"d={d} must be even and divisible by heads={heads}")
        self.k, self.d, self.heads = k, d, heads
        h = d // 2
        self.w_ih = nn.Parameter(torch.empty(k, 2, 4 * h, d))
        self.w_hh = nn.Parameter(torch.empty(k, 2, 4 * h, h))
        self.b = nn.Parameter(torch.empty(k, 2, 4 * h))
        self.w_q = nn.Parameter(torch.empty(k, d, d))
        self.w_k = nn.Parameter(torch.empty(k, d, d))
        self.w_v = nn.Parameter(torch.empty(k, d, d))
        self.w_o = nn.Parameter(torch.empty(k, d, d))
        self.head_w = nn.Parameter(torch.empty(k, 2, d))
        self.head_b = nn.Parameter(torch.empty(k, 2))
        self.reset_parameters()

    def reset_parameters(self):
        lstm_bound = 1 / math.sqrt(self.d // 2)
        proj_bound = 1 / math.sqrt(self.d)
        with torch.no_grad():
            for p in (self.w_ih, self.w_hh, self.b):
                p.uniform_(-lstm_bound, lstm_bound)
            for p in (self.w_q, self.w_k, self.w_v, self.w_o, self.head_w, self.head_b):
                p.uniform_(-proj_bound, proj_bound)

    def forward(self, x, mask=None):
        """Per-expert ``(features (k, B, d), positive scores (k, B))``."""
        e = _lstm_scan(x, mask, self.w_ih, self.w_hh, self.b)
        e = _expert_attention(e, mask, self.w_q, self.w_k, self.w_v, self.w_o, self.heads)
        feature = masked_mean(e, mask)
        logits = torch.einsum("kcd,kbd->kbc", self.head_w, feature) + self.head_b[:, None, :]
        return feature, torch.softmax(logits, dim=-1)[..., 1]


def expert_score(bank: ExpertBank, index: int, x, mask=None):
    """Feature and positive score from the single expert ``index``."""
    sl = slice(index, index + 1)
    e = _lstm_scan(x, mask, bank.w_ih[sl], bank.w_hh[sl], bank.b[sl])
    e = _expert_attention(e, mask, bank.w_q[sl], bank.w_k[sl], bank.w_v[sl], bank.w_o[sl], bank.heads)
    feature = masked_mean(e, mask)[0]
    logits = feature @ bank.head_w[index].T + bank.head_b[index]
    return feature, torch.softmax(logits, dim=-1)[..., 1]


def mix_scores(g_text, g_caption, lambda_):
    return lambda_ * g_text + (1 - lambda_) * g_caption


@dataclass
class EmotionVerdict:
    g_text: torch.Tensor
    g_caption: torch.Tensor
    g_e: torch.Tensor
    e_feature: torch.Tensor
    y_emo: torch.Tensor | None = None


def bayes_coefficients(alpha: float, beta: float) -> tuple[float, float]:
    """P(real | positive tone) and P(real | negative tone) under equal label priors."""
    if not (0 < alpha < 1 and 0 < beta < 1):
        raise PriorError(f"alpha and beta must lie in (0, 1), got alpha={alpha}, beta={beta}")
    if alpha + beta <= 0 or 2 - alpha - beta <= 0:
        raise PriorError("degenerate priors")
    return alpha / (alpha + beta), (1 - alpha) / (2 - alpha - beta)


def bayes_estimate(g_e, alpha: float, beta: float):
    pos, neg = bayes_coefficients(alpha, beta)
    return pos * g_e + neg * (1 - g_e)


def binary_cross_entropy(prob, label):
    """Summed BCE with ``prob`` clamped to [1e-7, 1 - 1e-7]."""
    if not torch.is_tensor(prob):
        prob = torch.tensor(prob, dtype=torch.float64)
    label = torch.as_tensor(label, dtype=prob.dtype)
    p = prob.clamp(PROB_EPS, 1 - PROB_EPS)
    return -(label * torch.log(p) + (1 - label) * torch.log(1 - p)).sum()


def emotion_loss(y_emo, label):
    return binary_cross_entropy(y_emo, label)


class EmotionReasoner(nn.Module):
    def __init__(self, k, d, d_f, heads):
        super().__init__()
        self.experts = ExpertBank(k, d, heads)
        self.mlp_e = nn.Sequential(nn.Linear(2 * d, d_f), nn.GELU(), nn.Linear(d_f, d_f))

    def aggregate(self, text, caption, lambda_, text_mask=None, caption_mask=None, no_captions=False):
        """Expert-averaged scores/features mixed across modalities (``y_emo`` left unset)."""
        if not 0.0 <= lambda_ <= 1.0:
            raise ValueError(f"lambda must lie in [0, 1], got {lambda_}")
        if no_captions:
            feats, scores = self.experts(text, text_mask)
            e_t, g_t = feats.mean(dim=0), scores.mean(dim=0)
            e_p, g_p = torch.zeros_like(e_t), torch.zeros_like(g_t)
            lambda_ = 1.0
        else:
            batch = text.shape[0]
            joint, joint_mask = _stack_padded(text, caption, text_mask, caption_mask)
            feats, scores = self.experts(joint, joint_mask)
            feats, scores = feats.mean(dim=0), scores.mean(dim=0)
            e_t, e_p = feats[:batch], feats[batch:]
            g_t, g_p = scores[:batch], scores[batch:]
        g_e = mix_scores(g_t, g_p, lambda_)
        e_feature = self.mlp_e(torch.cat([lambda_ * e_t, (1 - lambda_) * e_p], dim=-1))
        return EmotionVerdict(g_t, g_p, g_e, e_feature)


def _stack_padded(a, b, a_mask, b_mask):
    """Concatenate two (B, L, d) batches along batch, right-padding the shorter one."""
    length = max(a.shape[1], b.shape[1])

    def pad(x, m):
        if m is None:
            m = torch.ones(x.shape[:2], dtype=torch.bool, device=x.device)
        extra = length - x.shape[1]
        if extra:
            x = torch.cat([x, x.new_zeros(x.shape[0], extra, x.shape[2])], dim=1)
            m = torch.cat([m, m.new_zeros(m.shape[0], extra)], dim=1)
        return x, m

    a, a_mask = pad(a, a_mask)
    b, b_mask = pad(b, b_mask)
    return torch.cat([a, b], dim=0), torch.cat([a_mask, b_mask], dim=0)
