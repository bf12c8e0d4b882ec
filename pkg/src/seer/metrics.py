"""Accuracy and per-class precision/recall/F1, fake news as the positive class."""
from __future__ import annotations

import csv
import io
from dataclasses import astuple, dataclass, fields

import numpy as np

FAKE, REAL = 0, 1
HEADER = ("accuracy", "fake_precision", "fake_recall", "fake_f1", "real_precision", "real_recall", "real_f1")


@dataclass(frozen=True)
class Confusion:
    """Counts with fake as positive: tp = fake predicted fake, tn = real predicted real."""

    tp: int
    fp: int
    fn: int
    tn: int

    @classmethod
    def from_labels(cls, predicted, actual) -> "Confusion":
        predicted = np.asarray(predicted)
        actual = np.asarray(actual)
        if predicted.shape != actual.shape:
            raise ValueError("predictions and labels differ in length")
        return cls(
            tp=int(np.sum((predicted == FAKE) & (actual == FAKE))),
            fp=int(np.sum((predicted == FAKE) & (actual == REAL))),
            fn=int(np.sum((predicted == REAL) & (actual == FAKE))),
            tn=int(np.sum((predicted == REAL) & (actual == REAL))),
        )

    @property
    def total(self):
        return self.tp + self.fp + self.fn + self.tn


def _ratio(num, den):
    return num / den if den else 0.0


def _f1(p, r):
    return 2 * p * r / (p + r) if p + r else 0.0


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    fake_precision: float
    fake_recall: float
    fake_f1: float
    real_precision: float
    real_recall: float
    real_f1: float

    @classmethod
    def from_confusion(cls, c: Confusion) -> "MetricsReport":
        if c.total == 0:
            raise ValueError("cannot score an empty dataset")
        fp_, fr_ = _ratio(c.tp, c.tp + c.fp), _ratio(c.tp, c.tp + c.fn)
        rp_, rr_ = _ratio(c.tn, c.tn + c.fn), _ratio(c.tn, c.tn + c.fp)
        return cls((c.tp + c.tn) / c.total, fp_, fr_, _f1(fp_, fr_), rp_, rr_, _f1(rp_, rr_))

    @classmethod
    def from_labels(cls, predicted, actual) -> "MetricsReport":
        return cls.from_confusion(Confusion.from_labels(predicted, actual))

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def to_csv(rows, key_name=None) -> str:
    """Serialise reports (or ``(key, report)`` pairs when ``key_name`` is set) with repr floats."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(((key_name,) if key_name else ()) + HEADER)
    for row in rows:
        if key_name:
            key, report = row
            writer.writerow([key] + [repr(v) for v in astuple(report)])
        else:
            writer.writerow([repr(v) for v in astuple(row)])
    return buf.getvalue()
