"""Finite-difference gradient checks over every model component on toy instances."""
from __future__ import annotations

import torch

from .attention import CoAttention, EncoderLayer, MultiHeadAttention, SelfAttention, masked_mean
from .config import HyperParams
from .data import make_synthetic
from .detector import Detector, total_loss
from .emotion import EmotionReasoner, bayes_estimate, emotion_loss
from .fusion import SemanticEnhancement
from .model import build_model
from .numerics import GradCheckReport, grad_check, module_loss_fn, seeded_rng
from .training import encode_items


def toy_hyperparams(dim: int = 8, **overrides) -> HyperParams:
    heads = 2 if dim % 2 == 0 and dim >= 4 else 1
    base = dict(d=dim, d_c=max(2, dim // 2), d_f=dim, heads=heads, k_experts=2, m_len=4, z_len=4,
                n_regions=3, raw_dim=4, vocab_size=48, seed=3)
    base.update(overrides)
    return HyperParams(**base)


def _seq(gen, batch, length, dim, valid):
    x = torch.randn(batch, length, dim, generator=gen, dtype=torch.float64)
    mask = torch.zeros(batch, length, dtype=torch.bool)
    for i, n in enumerate(valid):
        mask[i, :n] = True
    return x * mask.unsqueeze(-1), mask


def _weighted(out, gen):
    """A scalar loss with random weights so no gradient is trivially symmetric."""
    w = torch.randn(out.shape, generator=gen, dtype=out.dtype)
    return (out * w).sum()


def component_checks(dim: int = 8, epsilon: float = 1e-3, tol: float = 1e-4) -> dict[str, list[GradCheckReport]]:
    """Named groups of reports, one group per component."""
    hp = toy_hyperparams(dim)
    torch.manual_seed(seeded_rng(hp.seed, "gradsuite").torch_seed())
    gen = torch.Generator().manual_seed(1234)
    groups = {}

    a, a_mask = _seq(gen, 2, 3, dim, [3, 2])
    b, b_mask = _seq(gen, 2, 4, dim, [4, 1])

    mha = MultiHeadAttention(dim, hp.heads).double()
    wq = torch.randn(2, 3, dim, generator=gen, dtype=torch.float64)
    fn, params = module_loss_fn(mha, lambda m: (m(a, b, b, b_mask) * wq).sum())
    groups["multihead"] = grad_check(fn, params, epsilon, tol)

    layer = EncoderLayer(dim, hp.heads).double()
    w1 = torch.randn(2, 3, dim, generator=gen, dtype=torch.float64)
    fn, params = module_loss_fn(layer, lambda m: (m(a, b, b_mask) * w1).sum())
    groups["encoder_layer"] = grad_check(fn, params, epsilon, tol)

    co = CoAttention(dim, hp.heads).double()
    w2 = torch.randn(2, 4, dim, generator=gen, dtype=torch.float64)

    def co_loss(m):
        ha, hb = m(a, b, a_mask, b_mask)
        return (ha * w1).sum() + (hb * w2).sum()

    fn, params = module_loss_fn(co, co_loss)
    groups["co_attention"] = grad_check(fn, params, epsilon, tol)

    sa = SelfAttention(dim, hp.heads).double()
    fn, params = module_loss_fn(sa, lambda m: (masked_mean(m(a, a_mask), a_mask) * w1[:, 0]).sum())
    groups["self_attention"] = grad_check(fn, params, epsilon, tol)

    items = make_synthetic(4, 0.8, 0.8, seed=hp.seed, vocab_size=hp.vocab_size, m_len=hp.m_len,
                           z_len=hp.z_len, n_regions=hp.n_regions, raw_dim=hp.raw_dim)
    batch = encode_items(items, hp, dtype=torch.float64)

    enh = SemanticEnhancement(hp.d, hp.d_c, hp.d_f, hp.heads).double()
    wf = torch.randn(len(batch), 3 * hp.d_f, generator=gen, dtype=torch.float64)

    def fusion_loss(m):
        h = m.enhance_pairwise(batch.text, batch.image, batch.caption,
                               batch.text_mask, batch.image_mask, batch.caption_mask)
        m_ter, _ = m.fuse(batch.clip_text, batch.clip_image, *h)
        t_tra, v_tra = m.enhance_unimodal(batch.text, batch.image, batch.clip_text, batch.clip_image,
                                          batch.text_mask, batch.image_mask)
        return (torch.cat([m_ter, t_tra, v_tra], dim=-1) * wf).sum()

    fn, params = module_loss_fn(enh, fusion_loss)
    groups["fusion"] = grad_check(fn, params, epsilon, tol)

    single = EmotionReasoner(1, hp.d, hp.d_f, hp.heads).double()
    we = torch.randn(len(batch), hp.d, generator=gen, dtype=torch.float64)

    def expert_loss(m):
        feature, score = m.experts(batch.text, batch.text_mask)
        return (feature[0] * we).sum() + score.sum()

    fn, params = module_loss_fn(single.experts, lambda m: expert_loss(single))
    groups["expert"] = grad_check(fn, params, epsilon, tol)

    reasoner = EmotionReasoner(hp.k_experts, hp.d, hp.d_f, hp.heads).double()

    def emotion_chain(m):
        verdict = m.aggregate(batch.text, batch.caption, hp.lambda_, batch.text_mask, batch.caption_mask)
        y_emo = bayes_estimate(verdict.g_e, hp.alpha, hp.beta)
        return emotion_loss(y_emo, batch.labels) + (verdict.e_feature * we[:, : hp.d_f]).sum()

    fn, params = module_loss_fn(reasoner, emotion_chain)
    groups["emotion_bayes_loss"] = grad_check(fn, params, epsilon, tol)

    det = Detector(hp.d_f).double()
    feats = [torch.randn(len(batch), hp.d_f, generator=gen, dtype=torch.float64) for _ in range(4)]
    y_emo = torch.full((len(batch),), 0.4, dtype=torch.float64)
    fn, params = module_loss_fn(det, lambda m: total_loss(m(*feats)[0], y_emo, batch.labels)[2])
    groups["detector"] = grad_check(fn, params, epsilon, tol)

    model = build_model(hp, torch.float64)
    fn, params = module_loss_fn(model, lambda m: m.loss(batch)[2])
    groups["seer_end_to_end"] = grad_check(fn, params, epsilon, tol)
    return groups


def flat_reports(groups: dict[str, list[GradCheckReport]]) -> list[GradCheckReport]:
    return [GradCheckReport(f"{g}.{r.param}", r.max_rel_error, r.passed) for g, rs in groups.items() for r in rs]
