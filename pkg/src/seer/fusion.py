"""Multimodal semantic enhancement: co-attention over text/image/caption,
the three fusion branches with the cosine gate, and unimodal enhancement."""
import torch
import torch.nn as nn

from .attention import CoAttention, SelfAttention, masked_mean


def _mlp(d_in, d_hidden, d_out):
    return nn.Sequential(nn.Linear(d_in, d_hidden), nn.GELU(), nn.Linear(d_hidden, d_out))


def cosine(a, b):
    """Row-wise cosine similarity; zero-norm inputs are rejected rather than smoothed."""
    na = a.norm(dim=-1)
    nb = b.norm(dim=-1)
    if not bool(((na > 0) & (nb > 0)).all()):
        raise ValueError("cosine gate needs non-zero aligned-space vectors")
    return (a * b).sum(dim=-1) / (na * nb)


class SemanticEnhancement(nn.Module):
    def __init__(self, d, d_c, d_f, heads, ffn_mult=4):
        super().__init__()
        self.co_tv = CoAttention(d, heads, ffn_mult)
        self.co_tp = CoAttention(d, heads, ffn_mult)
        self.co_vp = CoAttention(d, heads, ffn_mult)
        self.sigma1 = nn.Sequential(nn.Linear(2 * d, d_f), nn.GELU())
        self.sigma2 = nn.Sequential(nn.Linear(2 * d_c, d_f), nn.GELU())
        self.sigma3 = nn.Sequential(nn.Linear(d_c + d, d_f), nn.GELU())
        self.mlp_m = _mlp(3 * d_f, 2 * d_f, d_f)
        self.sa_text = SelfAttention(d, heads, ffn_mult)
        self.sa_image = SelfAttention(d, heads, ffn_mult)
        self.mlp_t = _mlp(d_c + d, d_f, d_f)
        self.mlp_v = _mlp(d_c + d, d_f, d_f)

    def enhance_pairwise(self, text, image, caption, text_mask=None, image_mask=None, caption_mask=None,
                         no_ca=False, no_captions=False):
        """Pooled enhanced vectors ``(h_T, h_V, h_P)``.

        Each modality's two enhanced sequences are averaged elementwise and
        then mean-pooled over valid positions. ``no_ca`` pools the raw
        sequences instead; ``no_captions`` skips the caption blocks and
        returns a zero ``h_P``.
        """
        if no_ca:
            h_p = masked_mean(caption, caption_mask)
            if no_captions:
                h_p = torch.zeros_like(h_p)
            return masked_mean(text, text_mask), masked_mean(image, image_mask), h_p
        t_from_v, v_from_t = self.co_tv(text, image, text_mask, image_mask)
        if no_captions:
            h_p = torch.zeros_like(masked_mean(caption, caption_mask))
            return masked_mean(t_from_v, text_mask), masked_mean(v_from_t, image_mask), h_p
        t_from_p, p_from_t = self.co_tp(text, caption, text_mask, caption_mask)
        v_from_p, p_from_v = self.co_vp(image, caption, image_mask, caption_mask)
        h_t = masked_mean((t_from_v + t_from_p) / 2, text_mask)
        h_v = masked_mean((v_from_t + v_from_p) / 2, image_mask)
        h_p = masked_mean((p_from_t + p_from_v) / 2, caption_mask)
        return h_t, h_v, h_p

    def fuse(self, clip_text, clip_image, h_t, h_v, h_p, theta=None, positive_gate=False):
        """Gated fusion feature and the gate. Pass ``theta`` to override the cosine."""
        m1 = self.sigma1(torch.cat([h_t, h_v], dim=-1))
        m2 = self.sigma2(torch.cat([clip_text, clip_image], dim=-1))
        m3 = self.sigma3(torch.cat([clip_text, h_p], dim=-1))
        if theta is None:
            theta = cosine(clip_text, clip_image)
        gate = (theta + 1) / 2 if positive_gate else theta
        m_ter = gate.unsqueeze(-1) * self.mlp_m(torch.cat([m1, m2, m3], dim=-1))
        return m_ter, theta

    def enhance_unimodal(self, text, image, clip_text, clip_image, text_mask=None, image_mask=None, no_sa=False):
        if no_sa:
            w = masked_mean(text, text_mask)
            v = masked_mean(image, image_mask)
        else:
            w = masked_mean(self.sa_text(text, text_mask), text_mask)
            v = masked_mean(self.sa_image(image, image_mask), image_mask)
        t_tra = self.mlp_t(torch.cat([clip_text, w], dim=-1))
        v_tra = self.mlp_v(torch.cat([clip_image, v], dim=-1))
        return t_tra, v_tra
