import math

import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from seer.emotion import (
    EmotionReasoner,
    ExpertBank,
    PriorError,
    _lstm_scan,
    bayes_coefficients,
    bayes_estimate,
    binary_cross_entropy,
    emotion_loss,
    expert_score,
    mix_scores,
)
from seer.numerics import grad_check, module_loss_fn

D = 8


def _x(seed, batch=2, length=5):
    g = torch.Generator().manual_seed(seed)
    x = torch.randn(batch, length, D, generator=g, dtype=torch.float64)
    mask = torch.ones(batch, length, dtype=torch.bool)
    mask[1, 3:] = False
    return x, mask


def _bank(k=3, seed=0):
    torch.manual_seed(seed)
    return ExpertBank(k, D, 2).double()


def test_scan_matches_reference_lstm():
    torch.manual_seed(1)
    bank = _bank(k=2)
    ref = torch.nn.LSTM(D, D // 2, bidirectional=True, batch_first=True).double()
    x, mask = _x(1)
    out = _lstm_scan(x, mask, bank.w_ih, bank.w_hh, bank.b)
    for e in range(2):
        with torch.no_grad():
            for g, suffix in ((0, ""), (1, "_reverse")):
                getattr(ref, "weight_ih_l0" + suffix).copy_(bank.w_ih[e, g])
                getattr(ref, "weight_hh_l0" + suffix).copy_(bank.w_hh[e, g])
                getattr(ref, "bias_ih_l0" + suffix).copy_(bank.b[e, g])
                getattr(ref, "bias_hh_l0" + suffix).zero_()
        for i in range(2):
            n = int(mask[i].sum())
            expected, _ = ref(x[i:i + 1, :n])
            torch.testing.assert_close(out[e, i, :n], expected[0], rtol=0, atol=1e-12)


def test_padding_does_not_change_scores():
    bank = _bank()
    x, mask = _x(2)
    feats, scores = bank(x, mask)
    junk = x.clone()
    junk[1, 3:] = 1e3
    feats2, scores2 = bank(junk, mask)
    torch.testing.assert_close(scores, scores2, rtol=0, atol=1e-13)
    f_short, s_short = bank(x[1:, :3])
    torch.testing.assert_close(scores[:, 1], s_short[:, 0], rtol=0, atol=1e-13)
    torch.testing.assert_close(feats[:, 1], f_short[:, 0], rtol=0, atol=1e-13)


def test_scores_strictly_inside_unit_interval():
    bank = _bank(k=4)
    for seed in range(5):
        x, mask = _x(seed, batch=3)
        _, scores = bank(x * (1 + 10 * seed), mask)
        assert torch.all((scores > 0) & (scores < 1))


def test_zero_head_scores_half():
    bank = _bank()
    with torch.no_grad():
        bank.head_w.zero_()
        bank.head_b.zero_()
    x, mask = _x(3)
    _, scores = bank(x, mask)
    assert torch.all(scores == 0.5)


def test_single_expert_matches_bank():
    bank = _bank()
    x, mask = _x(4)
    feats, scores = bank(x, mask)
    for i in range(bank.k):
        f, s = expert_score(bank, i, x, mask)
        torch.testing.assert_close(s, scores[i], rtol=0, atol=1e-14)
        torch.testing.assert_close(f, feats[i], rtol=0, atol=1e-14)


def test_mix_scores_hand_value():
    assert mix_scores(0.8, 0.4, 0.75) == pytest.approx(0.7, abs=1e-15)


def _reasoner(k=3, seed=0):
    torch.manual_seed(seed)
    return EmotionReasoner(k, D, 6, 2).double()


@pytest.mark.parametrize("lam, keep", [(1.0, "text"), (0.0, "caption")])
def test_lambda_endpoints_ignore_other_modality(lam, keep):
    r = _reasoner()
    t, tm = _x(5)
    p, pm = _x(6, length=4)
    base = r.aggregate(t, p, lam, tm, pm)
    if keep == "text":
        other = r.aggregate(t, torch.randn_like(p), lam, tm, pm)
    else:
        other = r.aggregate(torch.randn_like(t), p, lam, tm, pm)
    assert torch.equal(base.g_e, other.g_e)
    assert torch.equal(base.e_feature, other.e_feature)


def test_lambda_out_of_range():
    r = _reasoner()
    t, tm = _x(5)
    with pytest.raises(ValueError, match="lambda"):
        r.aggregate(t, t, 1.5, tm, tm)


def test_identical_experts_equal_single_expert():
    r = _reasoner(k=4)
    with torch.no_grad():
        for p in r.experts.parameters():
            p.copy_(p[:1].expand_as(p))
    t, tm = _x(7)
    p, pm = _x(8)
    verdict = r.aggregate(t, p, 0.6, tm, pm)
    _, s_t = expert_score(r.experts, 0, t, tm)
    _, s_p = expert_score(r.experts, 0, p, pm)
    torch.testing.assert_close(verdict.g_e, 0.6 * s_t + 0.4 * s_p, rtol=0, atol=1e-13)


def test_expert_order_irrelevant():
    r = _reasoner(k=3)
    t, tm = _x(9)
    p, pm = _x(10)
    base = r.aggregate(t, p, 0.3, tm, pm)
    perm = torch.tensor([2, 0, 1])
    with torch.no_grad():
        for prm in r.experts.parameters():
            prm.copy_(prm[perm].clone())
    shuffled = r.aggregate(t, p, 0.3, tm, pm)
    torch.testing.assert_close(base.g_e, shuffled.g_e, rtol=0, atol=1e-14)
    torch.testing.assert_close(base.e_feature, shuffled.e_feature, rtol=0, atol=1e-14)


def test_no_captions_uses_text_only():
    r = _reasoner()
    t, tm = _x(11)
    v = r.aggregate(t, None, 0.4, tm, None, no_captions=True)
    torch.testing.assert_close(v.g_e, v.g_text)
    assert torch.all(v.g_caption == 0)


def test_bayes_coefficients_desk_values():
    pos, neg = bayes_coefficients(0.45, 0.3)
    assert abs(pos - 0.6) < 1e-12 and abs(neg - 0.44) < 1e-12
    pos, neg = bayes_coefficients(0.65, 0.3)
    assert abs(pos - 0.65 / 0.95) < 1e-12 and abs(neg - 0.35 / 1.05) < 1e-12


def test_bayes_estimate_affine_and_bounded():
    pos, neg = bayes_coefficients(0.45, 0.3)
    g = torch.linspace(0, 1, 101, dtype=torch.float64)
    y = bayes_estimate(g, 0.45, 0.3)
    torch.testing.assert_close(y, neg + (pos - neg) * g, rtol=0, atol=1e-15)
    assert torch.all(y >= min(pos, neg)) and torch.all(y <= max(pos, neg))
    assert torch.all(torch.diff(y) > 0)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.01, 0.99), st.floats(0.01, 0.99))
def test_bayes_direction_follows_priors(alpha, beta):
    pos, neg = bayes_coefficients(alpha, beta)
    assert 0 < pos < 1 and 0 < neg < 1
    # positive tone favours real exactly when alpha > beta
    if alpha > beta + 1e-9:
        assert pos > neg
    elif beta > alpha + 1e-9:
        assert pos < neg


@pytest.mark.parametrize("alpha, beta", [(0, 0.3), (1, 0.3), (0.5, 0), (0.5, 1), (-0.1, 0.5), (0.5, 1.2)])
def test_bad_priors_rejected(alpha, beta):
    with pytest.raises(PriorError):
        bayes_coefficients(alpha, beta)


def test_loss_hand_values():
    assert emotion_loss(torch.tensor(0.5, dtype=torch.float64), 1).item() == pytest.approx(math.log(2), abs=1e-12)
    assert emotion_loss(torch.tensor(0.6, dtype=torch.float64), 1).item() == pytest.approx(-math.log(0.6), abs=1e-12)
    assert emotion_loss(torch.tensor(0.6, dtype=torch.float64), 0).item() == pytest.approx(-math.log(0.4), abs=1e-12)


def test_loss_clamped_at_extremes():
    for p, y in ((0.0, 1), (1.0, 0)):
        loss = binary_cross_entropy(torch.tensor(p, dtype=torch.float64), y)
        assert math.isfinite(loss.item())
        assert loss.item() == pytest.approx(-math.log(1e-7), rel=1e-6)


def test_reasoner_gradients():
    r = _reasoner(k=2)
    t, tm = _x(12, length=4)
    p, pm = _x(13, length=3)
    label = torch.tensor([1.0, 0.0], dtype=torch.float64)
    w = torch.randn(2, 6, dtype=torch.float64)

    def fwd(m):
        v = m.aggregate(t, p, 0.75, tm, pm)
        y = bayes_estimate(v.g_e, 0.45, 0.3)
        return emotion_loss(y, label) + (v.e_feature * w).sum()

    fn, params = module_loss_fn(r, fwd)
    reports = grad_check(fn, params)
    assert all(r.passed for r in reports), [r for r in reports if not r.passed]
