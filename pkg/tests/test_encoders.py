import copy

import numpy as np
import pytest

from seer.encoders import (
    CacheMissError,
    ConfigMismatchError,
    EmbeddingBundle,
    StubEncoder,
    VocabularyError,
    load_cache,
    load_cached,
    save_cache,
    stub_encode,
)


def test_same_item_same_seed_identical(item, small_hp):
    hp = small_hp.replace(seed=7)
    assert stub_encode(item, hp) == stub_encode(item, hp)


def test_different_seed_changes_embeddings(item, small_hp):
    a = stub_encode(item, small_hp.replace(seed=7))
    b = stub_encode(item, small_hp.replace(seed=8))
    assert not np.array_equal(a.text_seq, b.text_seq)


def test_one_token_change_touches_one_row(item, small_hp):
    other = copy.deepcopy(item)
    other.text_tokens[2] = 11
    a, b = stub_encode(item, small_hp), stub_encode(other, small_hp)
    differs = ~np.all(a.text_seq == b.text_seq, axis=1)
    assert differs.tolist() == [False, False, True, False]
    np.testing.assert_array_equal(a.image_seq, b.image_seq)
    np.testing.assert_array_equal(a.caption_seq, b.caption_seq)


def test_identical_tokens_identical_rows(item, small_hp):
    item.text_tokens = [6] * 5
    seq = stub_encode(item, small_hp).text_seq
    assert np.all(seq == seq[0])


def test_text_and_caption_share_token_table(item, small_hp):
    item.caption_tokens = [5]
    bundle = stub_encode(item, small_hp)
    np.testing.assert_array_equal(bundle.caption_seq[0], bundle.text_seq[0])


def test_padding_id_is_zero_vector(item, small_hp):
    item.text_tokens = [0, 3]
    seq = stub_encode(item, small_hp).text_seq
    assert not seq[0].any() and seq[1].any()


def test_embedding_range(item, small_hp):
    table = StubEncoder(small_hp).token_table
    assert table[1:].min() >= -0.5 and table[1:].max() < 0.5


def test_clip_vectors_unit_norm(small_items, small_hp):
    enc = StubEncoder(small_hp)
    for it in small_items:
        b = enc.encode(it)
        assert abs(np.linalg.norm(b.clip_text) - 1) < 1e-6
        assert abs(np.linalg.norm(b.clip_image) - 1) < 1e-6


def test_bundle_shapes(item, small_hp):
    b = stub_encode(item, small_hp)
    assert b.text_seq.shape == (4, small_hp.d)
    assert b.caption_seq.shape == (3, small_hp.d)
    assert b.image_seq.shape == (small_hp.n_regions, small_hp.d)
    assert b.clip_text.shape == b.clip_image.shape == (small_hp.d_c,)
    b.validate(small_hp)


def test_out_of_vocab_rejected_with_position(item, small_hp):
    item.caption_tokens = [1, 2, small_hp.vocab_size]
    with pytest.raises(VocabularyError, match=r"'n1'.*caption_tokens\[2\]"):
        stub_encode(item, small_hp)


def test_too_long_rejected(item, small_hp):
    item.text_tokens = [1] * (small_hp.m_len + 1)
    with pytest.raises(ConfigMismatchError):
        stub_encode(item, small_hp)


def test_cache_round_trip_bit_exact(tmp_path, small_items, small_hp):
    enc = StubEncoder(small_hp)
    bundles = {it.id: enc.encode(it) for it in small_items}
    # awkward floats survive too
    bundles["odd"] = EmbeddingBundle(
        np.array([[1e-300, -0.1 + 0.2, np.nextafter(1.0, 2.0)] + [0.3] * (small_hp.d - 3)]),
        bundles[small_items[0].id].image_seq,
        np.full((1, small_hp.d), 1 / 3),
        np.full(small_hp.d_c, 2 / 7),
        np.full(small_hp.d_c, -5e-324),
    )
    path = tmp_path / "cache.jsonl"
    save_cache(path, bundles)
    for key, bundle in bundles.items():
        loaded = load_cached(path, key)
        assert loaded == bundle
        for f in EmbeddingBundle.FIELDS:
            assert getattr(loaded, f).tobytes() == getattr(bundle, f).tobytes()
    assert load_cache(path).keys() == bundles.keys()


def test_cache_missing_id(tmp_path, item, small_hp):
    path = tmp_path / "cache.jsonl"
    save_cache(path, {"a": stub_encode(item, small_hp)})
    with pytest.raises(CacheMissError, match="'zzz'"):
        load_cached(path, "zzz")


def test_cache_dim_mismatch(tmp_path, item, small_hp):
    path = tmp_path / "cache.jsonl"
    save_cache(path, {"a": stub_encode(item, small_hp.replace(d=64, heads=2))})
    with pytest.raises(ConfigMismatchError, match=r"expected shape.*8.*found.*64"):
        load_cached(path, "a", small_hp)
