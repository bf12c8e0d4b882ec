"""Final classifier over the concatenated feature blocks and the joint objective."""
import torch
import torch.nn as nn

from .emotion import binary_cross_entropy


class Detector(nn.Module):
    def __init__(self, d_f):
        super().__init__()
        self.d_f = d_f
        self.fc = nn.Linear(4 * d_f, 2)

    def forward(self, t_tra, v_tra, e_feature, m_ter):
        """Returns ``(P(real), M_all)``."""
        for name, t in (("t_tra", t_tra), ("v_tra", v_tra), ("e_feature", e_feature), ("m_ter", m_ter)):
            if t.shape[-1] != self.d_f:
                raise ValueError(f"{name} has dim {t.shape[-1]}, expected {self.d_f}")
        m_all = torch.cat([t_tra, v_tra, e_feature, m_ter], dim=-1)
        return torch.softmax(self.fc(m_all), dim=-1)[..., 1], m_all


def total_loss(y_fnd, y_emo, label, use_emotion=True):
    """``(l_f, l_e, l_f + l_e)``; ``use_emotion=False`` drops the emotion term entirely."""
    l_f = binary_cross_entropy(y_fnd, label)
    if use_emotion:
        l_e = binary_cross_entropy(y_emo, label)
    else:
        l_e = torch.zeros((), dtype=l_f.dtype)
    return l_f, l_e, l_f + l_e
