"""News items, JSONL dataset I/O, splits and the synthetic generator."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .numerics import seeded_rng

SPLITS = ("train", "val", "test")


class DatasetError(ValueError):
    pass


@dataclass(eq=False)
class NewsItem:
    id: str
    text_tokens: list[int]
    caption_tokens: list[int]
    image_regions: np.ndarray
    label: int
    split: str | None = None
    embedding_ref: str | None = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.text_tokens = [int(t) for t in self.text_tokens]
        self.caption_tokens = [int(t) for t in self.caption_tokens]
        self.image_regions = np.asarray(self.image_regions, dtype=np.float64)
        if self.label not in (0, 1):
            raise DatasetError(f"item {self.id!r}: label must be 0 or 1, got {self.label!r}")
        if self.image_regions.ndim != 2:
            raise DatasetError(f"item {self.id!r}: image_regions must be a matrix")
        if not self.text_tokens or not self.caption_tokens:
            raise DatasetError(f"item {self.id!r}: text and caption need at least one token")
        if any(t < 0 for t in self.text_tokens + self.caption_tokens):
            raise DatasetError(f"item {self.id!r}: negative token id")
        if self.split is not None and self.split not in SPLITS:
            raise DatasetError(f"item {self.id!r}: unknown split {self.split!r}")

    def to_json(self) -> dict:
        out = {
            "id": self.id,
            "text_tokens": self.text_tokens,
            "caption_tokens": self.caption_tokens,
            "image_regions": self.image_regions.tolist(),
            "label": self.label,
        }
        if self.split is not None:
            out["split"] = self.split
        if self.embedding_ref is not None:
            out["embedding_ref"] = self.embedding_ref
        return out

    def __eq__(self, other):
        if not isinstance(other, NewsItem):
            return NotImplemented
        return (
            self.id == other.id
            and self.text_tokens == other.text_tokens
            and self.caption_tokens == other.caption_tokens
            and np.array_equal(self.image_regions, other.image_regions)
            and self.label == other.label
            and self.split == other.split
            and self.embedding_ref == other.embedding_ref
        )


def load_dataset(path: str | Path) -> list[NewsItem]:
    items = []
    region_count = None
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                raw = json.loads(line)
                item = NewsItem(
                    id=str(raw["id"]),
                    text_tokens=raw["text_tokens"],
                    caption_tokens=raw["caption_tokens"],
                    image_regions=raw["image_regions"],
                    label=raw["label"],
                    split=raw.get("split"),
                    embedding_ref=raw.get("embedding_ref"),
                )
            except DatasetError as exc:
                raise DatasetError(f"line {lineno}: {exc}") from exc
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise DatasetError(f"line {lineno}: malformed record ({exc})") from exc
            if region_count is None:
                region_count = item.image_regions.shape[0]
            elif item.image_regions.shape[0] != region_count:
                raise DatasetError(
                    f"line {lineno}: {item.image_regions.shape[0]} image regions, expected {region_count}"
                )
            items.append(item)
    return items


def save_dataset(items, path: str | Path) -> None:
    with open(path, "w") as fh:
        for item in items:
            fh.write(json.dumps(item.to_json()) + "\n")


def split_dataset(items, seed: int = 0, ratios=(0.7, 0.1, 0.2)) -> dict[str, list[NewsItem]]:
    """Honor each item's ``split`` field when every item has one, else a seeded 70/10/20 shuffle."""
    if items and all(it.split is not None for it in items):
        return {s: [it for it in items if it.split == s] for s in SPLITS}
    order = seeded_rng(seed, "split").numpy().permutation(len(items))
    n_train = int(round(ratios[0] * len(items)))
    n_val = int(round(ratios[1] * len(items)))
    parts = (order[:n_train], order[n_train:n_train + n_val], order[n_train + n_val:])
    return {s: [items[i] for i in idx] for s, idx in zip(SPLITS, parts)}


def holdout(items, n_test: int, seed: int = 0) -> tuple[list[NewsItem], list[NewsItem]]:
    """Seeded label-stratified split into ``(train, test)`` with ``n_test`` test items."""
    rng = seeded_rng(seed, "holdout").numpy()
    by_label = {0: [], 1: []}
    for i, it in enumerate(items):
        by_label[it.label].append(i)
    test_idx = []
    for label in (0, 1):
        pool = np.array(by_label[label])
        want = int(round(n_test * len(pool) / len(items)))
        test_idx.extend(rng.permutation(pool)[:want].tolist())
    test_set = set(test_idx)
    train = [it for i, it in enumerate(items) if i not in test_set]
    test = [items[i] for i in sorted(test_set)]
    return train, test


# Vocabulary layout of synthetic items: 0 is padding, then the negative
# lexicon, the positive lexicon, and neutral filler for the rest.
LEXICON_SIZE = 16
# Per-token probability of a lexicon draw at emotion_strength = 1.
LEXICON_RATE = 0.3


def lexicon_ranges(vocab_size: int = 512) -> dict[str, range]:
    if vocab_size < 2 * LEXICON_SIZE + 8:
        raise ValueError("vocab too small for the synthetic lexicon layout")
    return {
        "negative": range(1, 1 + LEXICON_SIZE),
        "positive": range(1 + LEXICON_SIZE, 1 + 2 * LEXICON_SIZE),
        "neutral": range(1 + 2 * LEXICON_SIZE, vocab_size),
    }


def make_synthetic(
    n: int,
    emotion_strength: float,
    alignment_strength: float,
    seed: int = 0,
    *,
    vocab_size: int = 512,
    m_len: int = 32,
    z_len: int = 32,
    n_regions: int = 16,
    raw_dim: int = 32,
) -> list[NewsItem]:
    """Balanced fake/real items with tunable emotion and text-image alignment signal.

    Each text or caption token comes from the label's lexicon (negative for
    fake, positive for real) with probability ``LEXICON_RATE *
    emotion_strength``, otherwise from neutral filler. Image regions mix a
    per-token visual prototype with Gaussian noise at weight
    ``alignment_strength``; real items take prototypes of their own text
    tokens, fake items of unrelated random tokens.
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    for name, v in (("emotion_strength", emotion_strength), ("alignment_strength", alignment_strength)):
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"{name} must lie in [0, 1]")
    ranges = lexicon_ranges(vocab_size)
    rng = seeded_rng(seed, "synthetic").numpy()
    prototypes = seeded_rng(seed, "synthetic-visual").numpy().standard_normal((vocab_size, raw_dim))
    labels = np.array([0] * (n // 2) + [1] * (n - n // 2))
    rng.shuffle(labels)
    p_lex = LEXICON_RATE * emotion_strength
    neutral = np.arange(ranges["neutral"].start, ranges["neutral"].stop)

    def tokens(length, lexicon):
        use_lex = rng.random(length) < p_lex
        out = rng.choice(neutral, size=length)
        out[use_lex] = rng.integers(lexicon.start, lexicon.stop, size=int(use_lex.sum()))
        return out.tolist()

    items = []
    for i, label in enumerate(labels):
        lexicon = ranges["positive"] if label == 1 else ranges["negative"]
        text = tokens(int(rng.integers(m_len // 2, m_len + 1)), lexicon)
        caption = tokens(int(rng.integers(z_len // 2, z_len + 1)), lexicon)
        if label == 1:
            source = rng.choice(text, size=n_regions)
        else:
            source = rng.integers(1, vocab_size, size=n_regions)
        noise = rng.standard_normal((n_regions, raw_dim))
        regions = alignment_strength * prototypes[source] + (1.0 - alignment_strength) * noise
        items.append(NewsItem(f"syn-{seed}-{i}", text, caption, regions, int(label)))
    return items


def lexicon_count_predict(item: NewsItem, vocab_size: int = 512) -> int:
    """Baseline label guess: fake (0) iff negative-lexicon tokens outnumber positive ones."""
    ranges = lexicon_ranges(vocab_size)
    toks = item.text_tokens + item.caption_tokens
    neg = sum(t in ranges["negative"] for t in toks)
    pos = sum(t in ranges["positive"] for t in toks)
    return 0 if neg > pos else 1
