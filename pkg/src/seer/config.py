"""Hyperparameters and ablation flags."""
from __future__ import annotations

import configparser
import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

ABLATIONS = frozenset(
    {"no_text", "no_image", "no_msem", "no_clip", "no_captions", "no_ca", "no_sa", "no_eerm", "seer_i"}
)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class HyperParams:
    """Model, optimizer and data-shape settings.

    Defaults are desk scale. ``weibo()`` and ``twitter()`` return the
    lambda/alpha/beta settings tuned for each dataset.
    """

    lambda_: float = 0.75
    alpha: float = 0.45
    beta: float = 0.3
    k_experts: int = 10
    heads: int = 4
    d: int = 64
    d_c: int = 32
    d_f: int = 64
    m_len: int = 32
    z_len: int = 32
    n_regions: int = 16
    raw_dim: int = 32
    vocab_size: int = 512
    lr: float = 1e-3
    epochs: int = 30
    batch_size: int = 16
    seed: int = 0
    ablation: frozenset = field(default_factory=frozenset)
    positive_gate: bool = False

    def __post_init__(self):
        object.__setattr__(self, "ablation", frozenset(self.ablation))
        self.validate()

    def validate(self) -> None:
        if not 0.0 <= self.lambda_ <= 1.0:
            raise ConfigError(f"lambda must lie in [0, 1], got {self.lambda_}")
        for name in ("alpha", "beta"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ConfigError(f"{name} must lie in (0, 1), got {v}")
        for name in ("k_experts", "heads", "d", "d_c", "d_f", "m_len", "z_len", "n_regions",
                     "raw_dim", "epochs", "batch_size"):
            v = getattr(self, name)
            if not isinstance(v, int) or v < 1:
                raise ConfigError(f"{name} must be a positive integer, got {v!r}")
        if self.vocab_size < 2:
            raise ConfigError("vocab_size must be at least 2 (id 0 is padding)")
        if self.d % self.heads:
            raise ConfigError(f"d={self.d} is not divisible by heads={self.heads}")
        if self.d % 2:
            raise ConfigError("d must be even (BiLSTM hidden size is d/2 per direction)")
        if not self.lr >= 0:
            raise ConfigError(f"lr must be non-negative, got {self.lr}")
        unknown = self.ablation - ABLATIONS
        if unknown:
            raise ConfigError(f"unknown ablation flags: {sorted(unknown)}")

    @property
    def d_h(self) -> int:
        return self.d // self.heads

    def has(self, flag: str) -> bool:
        return flag in self.ablation

    def replace(self, **changes) -> "HyperParams":
        if "lambda" in changes:
            changes["lambda_"] = changes.pop("lambda")
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        out = {}
        for f in dataclasses.fields(self):
            key = "lambda" if f.name == "lambda_" else f.name
            value = getattr(self, f.name)
            out[key] = sorted(value) if f.name == "ablation" else value
        return out

    @classmethod
    def from_dict(cls, raw: dict) -> "HyperParams":
        raw = dict(raw)
        if "lambda" in raw:
            raw["lambda_"] = raw.pop("lambda")
        names = {f.name: f for f in dataclasses.fields(cls)}
        unknown = set(raw) - set(names)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kwargs = {}
        for key, value in raw.items():
            default = getattr(cls(), key)
            if key == "ablation":
                if isinstance(value, str):
                    value = [v.strip() for v in value.split(",") if v.strip()]
                kwargs[key] = frozenset(value)
            elif isinstance(default, bool):
                kwargs[key] = value if isinstance(value, bool) else str(value).lower() in ("1", "true", "yes")
            elif isinstance(default, int):
                kwargs[key] = int(value)
            else:
                kwargs[key] = float(value)
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path: str | Path) -> "HyperParams":
        """Read a JSON object or a flat INI file (keys in any single section, or none)."""
        text = Path(path).read_text()
        stripped = text.lstrip()
        if stripped.startswith("{"):
            return cls.from_dict(json.loads(text))
        parser = configparser.ConfigParser()
        if not stripped.startswith("["):
            text = "[seer]\n" + text
        parser.read_string(text)
        raw = {}
        for section in parser.sections():
            raw.update(parser[section])
        return cls.from_dict(raw)

    @classmethod
    def weibo(cls, **overrides) -> "HyperParams":
        return cls(lambda_=0.75, alpha=0.45, beta=0.3, **overrides)

    @classmethod
    def twitter(cls, **overrides) -> "HyperParams":
        return cls(lambda_=0.25, alpha=0.65, beta=0.3, **overrides)
