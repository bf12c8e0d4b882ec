import pytest
import torch

from seer.config import HyperParams
from seer.data import NewsItem, make_synthetic

torch.set_num_threads(1)


@pytest.fixture
def small_hp():
    return HyperParams(d=8, d_c=4, d_f=8, heads=2, k_experts=2, m_len=6, z_len=5, n_regions=3,
                       raw_dim=4, vocab_size=48, seed=11, epochs=2, batch_size=4)


@pytest.fixture
def small_items(small_hp):
    return make_synthetic(12, 0.8, 0.8, seed=2, vocab_size=small_hp.vocab_size, m_len=small_hp.m_len,
                          z_len=small_hp.z_len, n_regions=small_hp.n_regions, raw_dim=small_hp.raw_dim)


@pytest.fixture
def item(small_hp):
    gen = torch.Generator().manual_seed(0)
    regions = torch.rand(small_hp.n_regions, small_hp.raw_dim, generator=gen, dtype=torch.float64).numpy()
    return NewsItem("n1", [5, 7, 9, 5], [3, 4, 40], regions, 1)
