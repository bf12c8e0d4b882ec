"""Per-sample representations: deterministic stub encoders and an embedding cache.

The stubs stand in for pretrained text, image and aligned-space encoders.
Token ids index a frozen table whose row for id ``t`` is drawn uniformly
from [-0.5, 0.5] by a SplitMix64 stream keyed on ``(seed, tag, t)``; id 0
is padding and maps to the zero vector.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import HyperParams
from .data import NewsItem
from .numerics import uniform_rows


class VocabularyError(ValueError):
    pass


class CacheMissError(KeyError):
    pass


class ConfigMismatchError(ValueError):
    pass


@dataclass(eq=False)
class EmbeddingBundle:
    """Unpadded sequences (rows = valid positions) plus the two aligned-space vectors."""

    text_seq: np.ndarray
    image_seq: np.ndarray
    caption_seq: np.ndarray
    clip_text: np.ndarray
    clip_image: np.ndarray

    FIELDS = ("text_seq", "image_seq", "caption_seq", "clip_text", "clip_image")

    def __eq__(self, other):
        if not isinstance(other, EmbeddingBundle):
            return NotImplemented
        return all(np.array_equal(getattr(self, f), getattr(other, f)) for f in self.FIELDS)

    def validate(self, hp: HyperParams) -> None:
        expected = {
            "text_seq": (None, hp.d),
            "image_seq": (hp.n_regions, hp.d),
            "caption_seq": (None, hp.d),
            "clip_text": (hp.d_c,),
            "clip_image": (hp.d_c,),
        }
        limits = {"text_seq": hp.m_len, "caption_seq": hp.z_len}
        for name, shape in expected.items():
            arr = getattr(self, name)
            if arr.ndim != len(shape) or any(s is not None and s != a for s, a in zip(shape, arr.shape)):
                raise ConfigMismatchError(
                    f"{name}: expected shape {tuple('*' if s is None else s for s in shape)}, found {arr.shape}"
                )
            if name in limits and not 1 <= arr.shape[0] <= limits[name]:
                raise ConfigMismatchError(f"{name}: length {arr.shape[0]} outside [1, {limits[name]}]")
        for name in ("clip_text", "clip_image"):
            if not np.linalg.norm(getattr(self, name)) > 0:
                raise ConfigMismatchError(f"{name} has zero norm")


def _normalize(v: np.ndarray) -> np.ndarray:
    norm = np.linalg.norm(v)
    if norm == 0:
        raise ValueError("cannot normalize a zero vector")
    return v / norm


class StubEncoder:
    """Frozen pseudo-random encoders, a pure function of ``(item, seed, dims)``.

    Text and caption share one token table (both come from the same text
    encoder). Image regions are projected by a seeded ``raw_dim x d``
    matrix. The aligned-space vectors mean-pool the pseudo-embeddings,
    project them with fixed seeded matrices, then L2-normalize.
    """

    def __init__(self, hp: HyperParams, raw_dim: int | None = None):
        self.hp = hp
        self.raw_dim = raw_dim or hp.raw_dim
        seed = hp.seed
        self.token_table = uniform_rows(seed, "token", np.arange(hp.vocab_size), hp.d)
        self.token_table[0] = 0.0
        self.image_proj = uniform_rows(seed, "image", np.arange(self.raw_dim), hp.d)
        self.clip_text_proj = uniform_rows(seed, "clip_text", np.arange(hp.d), hp.d_c)
        self.clip_image_proj = uniform_rows(seed, "clip_image", np.arange(hp.d), hp.d_c)

    def _lookup(self, item: NewsItem, field: str, limit: int) -> np.ndarray:
        tokens = np.asarray(getattr(item, field), dtype=np.int64)
        bad = np.nonzero((tokens < 0) | (tokens >= self.hp.vocab_size))[0]
        if bad.size:
            pos = int(bad[0])
            raise VocabularyError(
                f"item {item.id!r}: {field}[{pos}] = {int(tokens[pos])} outside vocabulary of size {self.hp.vocab_size}"
            )
        if tokens.size > limit:
            raise ConfigMismatchError(f"item {item.id!r}: {field} has {tokens.size} tokens, limit {limit}")
        return self.token_table[tokens]

    def encode(self, item: NewsItem) -> EmbeddingBundle:
        hp = self.hp
        text = self._lookup(item, "text_tokens", hp.m_len)
        caption = self._lookup(item, "caption_tokens", hp.z_len)
        if item.image_regions.shape != (hp.n_regions, self.raw_dim):
            raise ConfigMismatchError(
                f"item {item.id!r}: image_regions shape {item.image_regions.shape}, "
                f"expected {(hp.n_regions, self.raw_dim)}"
            )
        image = item.image_regions @ self.image_proj
        clip_text = _normalize(text.mean(axis=0) @ self.clip_text_proj)
        clip_image = _normalize(image.mean(axis=0) @ self.clip_image_proj)
        return EmbeddingBundle(text, image, caption, clip_text, clip_image)


def stub_encode(item: NewsItem, config: HyperParams) -> EmbeddingBundle:
    return StubEncoder(config).encode(item)


def save_cache(path: str | Path, bundles: dict[str, EmbeddingBundle]) -> None:
    """Write bundles as JSON Lines. Python float repr round-trips float64 exactly."""
    with open(path, "w") as fh:
        for key, bundle in bundles.items():
            record = {"id": key}
            for f in EmbeddingBundle.FIELDS:
                record[f] = getattr(bundle, f).tolist()
            fh.write(json.dumps(record) + "\n")


def _record_to_bundle(record: dict) -> EmbeddingBundle:
    return EmbeddingBundle(**{f: np.asarray(record[f], dtype=np.float64) for f in EmbeddingBundle.FIELDS})


def load_cached(path: str | Path, id: str, config: HyperParams | None = None) -> EmbeddingBundle:
    with open(path) as fh:
        for line in fh:
            if not line.strip():
                continue
            record = json.loads(line)
            if record.get("id") == id:
                bundle = _record_to_bundle(record)
                if config is not None:
                    bundle.validate(config)
                return bundle
    raise CacheMissError(f"id {id!r} not found in embedding cache {path}")


def load_cache(path: str | Path, config: HyperParams | None = None) -> dict[str, EmbeddingBundle]:
    out = {}
    with open(path) as fh:
        for line in fh:
            if line.strip():
                record = json.loads(line)
                bundle = _record_to_bundle(record)
                if config is not None:
                    bundle.validate(config)
                out[record["id"]] = bundle
    return out
