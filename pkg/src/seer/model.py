"""The assembled network: enhancement, emotional reasoning and detector."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn

from .config import HyperParams
from .detector import Detector, total_loss
from .emotion import EmotionReasoner, bayes_estimate
from .fusion import SemanticEnhancement


@dataclass
class Batch:
    text: torch.Tensor
    text_mask: torch.Tensor
    image: torch.Tensor
    image_mask: torch.Tensor
    caption: torch.Tensor
    caption_mask: torch.Tensor
    clip_text: torch.Tensor
    clip_image: torch.Tensor
    labels: torch.Tensor | None = None

    def __len__(self):
        return self.text.shape[0]

    def select(self, index) -> "Batch":
        fields = {k: (v[index] if v is not None else None) for k, v in self.__dict__.items()}
        return Batch(**fields)

    def to(self, dtype) -> "Batch":
        fields = {}
        for k, v in self.__dict__.items():
            fields[k] = v.to(dtype) if v is not None and v.is_floating_point() else v
        return Batch(**fields)


def _pad(seqs, length, d, dtype):
    out = torch.zeros(len(seqs), length, d, dtype=dtype)
    mask = torch.zeros(len(seqs), length, dtype=torch.bool)
    for i, s in enumerate(seqs):
        n = s.shape[0]
        if n > length:
            raise ValueError(f"sequence of length {n} exceeds configured length {length}")
        out[i, :n] = torch.as_tensor(s, dtype=dtype)
        mask[i, :n] = True
    return out, mask


def collate(bundles, hp: HyperParams, labels=None, dtype=torch.float32) -> Batch:
    """Pad bundles to the configured lengths (zero rows, mask False) and stack them."""
    text, text_mask = _pad([b.text_seq for b in bundles], hp.m_len, hp.d, dtype)
    caption, caption_mask = _pad([b.caption_seq for b in bundles], hp.z_len, hp.d, dtype)
    image, image_mask = _pad([b.image_seq for b in bundles], hp.n_regions, hp.d, dtype)
    clip_text = torch.as_tensor(np.stack([b.clip_text for b in bundles]), dtype=dtype)
    clip_image = torch.as_tensor(np.stack([b.clip_image for b in bundles]), dtype=dtype)
    y = None if labels is None else torch.as_tensor(np.asarray(labels), dtype=torch.long)
    return Batch(text, text_mask, image, image_mask, caption, caption_mask, clip_text, clip_image, y)


@dataclass
class SEEROutput:
    y_fnd: torch.Tensor
    y_emo: torch.Tensor
    g_text: torch.Tensor
    g_caption: torch.Tensor
    g_e: torch.Tensor
    theta: torch.Tensor
    t_tra: torch.Tensor
    v_tra: torch.Tensor
    e_feature: torch.Tensor
    m_ter: torch.Tensor
    m_all: torch.Tensor


class SEER(nn.Module):
    """Semantic-enhancement and emotional-reasoning fake news detector.

    Ablation flags in ``hp.ablation`` rewire the forward pass without ever
    changing the shapes that reach the detector: removed feature blocks are
    zeroed, not dropped.
    """

    def __init__(self, hp: HyperParams):
        super().__init__()
        self.hp = hp
        self.enhance = SemanticEnhancement(hp.d, hp.d_c, hp.d_f, hp.heads)
        self.emotion = EmotionReasoner(hp.k_experts, hp.d, hp.d_f, hp.heads)
        self.detector = Detector(hp.d_f)

    def forward(self, batch: Batch) -> SEEROutput:
        hp = self.hp
        has = hp.has
        clip_text, clip_image, theta = batch.clip_text, batch.clip_image, None
        if has("no_clip"):
            clip_text = torch.zeros_like(clip_text)
            clip_image = torch.zeros_like(clip_image)
            theta = clip_text.new_ones(clip_text.shape[0])

        h_t, h_v, h_p = self.enhance.enhance_pairwise(
            batch.text, batch.image, batch.caption, batch.text_mask, batch.image_mask, batch.caption_mask,
            no_ca=has("no_ca"), no_captions=has("no_captions"),
        )
        m_ter, theta = self.enhance.fuse(clip_text, clip_image, h_t, h_v, h_p, theta, hp.positive_gate)
        t_tra, v_tra = self.enhance.enhance_unimodal(
            batch.text, batch.image, clip_text, clip_image, batch.text_mask, batch.image_mask, no_sa=has("no_sa"),
        )

        n = batch.text.shape[0]
        if has("no_eerm"):
            half = batch.text.new_full((n,), 0.5)
            g_t = g_p = g_e = y_emo = half
            e_feature = batch.text.new_zeros(n, hp.d_f)
        else:
            if has("seer_i"):
                second, second_mask = batch.image, batch.image_mask
            else:
                second, second_mask = batch.caption, batch.caption_mask
            verdict = self.emotion.aggregate(
                batch.text, second, hp.lambda_, batch.text_mask, second_mask, no_captions=has("no_captions"),
            )
            g_t, g_p, g_e, e_feature = verdict.g_text, verdict.g_caption, verdict.g_e, verdict.e_feature
            y_emo = bayes_estimate(g_e, hp.alpha, hp.beta)

        if has("no_text"):
            t_tra = torch.zeros_like(t_tra)
        if has("no_image"):
            v_tra = torch.zeros_like(v_tra)
        if has("no_msem"):
            m_ter = torch.zeros_like(m_ter)
        y_fnd, m_all = self.detector(t_tra, v_tra, e_feature, m_ter)
        return SEEROutput(y_fnd, y_emo, g_t, g_p, g_e, theta, t_tra, v_tra, e_feature, m_ter, m_all)

    def loss(self, batch: Batch, out: SEEROutput | None = None):
        """``(l_f, l_e, l)`` summed over the batch."""
        out = self(batch) if out is None else out
        return total_loss(out.y_fnd, out.y_emo, batch.labels, use_emotion=not self.hp.has("no_eerm"))


def build_model(hp: HyperParams, dtype=torch.float32) -> SEER:
    """Construct with parameters initialised from the ``(seed, "init")`` stream."""
    from .numerics import seeded_rng

    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seeded_rng(hp.seed, "init").torch_seed())
        model = SEER(hp)
    return model.to(dtype)
