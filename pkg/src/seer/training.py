"""Training loop, evaluation, parameter sweeps and model persistence."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import torch

from .config import HyperParams
from .encoders import EmbeddingBundle, StubEncoder
from .metrics import MetricsReport
from .model import SEER, Batch, build_model, collate
from .numerics import seeded_rng

log = logging.getLogger(__name__)


class TrainingDivergedError(FloatingPointError):
    def __init__(self, epoch, batch_index):
        super().__init__(f"non-finite loss at epoch {epoch}, batch {batch_index}")
        self.epoch = epoch
        self.batch_index = batch_index


def encode_items(items, hp: HyperParams, cache: dict[str, EmbeddingBundle] | None = None,
                 dtype=torch.float32) -> Batch:
    """Embed items (cache entry when ``embedding_ref`` resolves, stub otherwise) into one padded batch."""
    encoder = None
    bundles = []
    for item in items:
        key = item.embedding_ref or item.id
        if cache is not None and key in cache:
            bundle = cache[key]
            bundle.validate(hp)
        else:
            if encoder is None:
                encoder = StubEncoder(hp, raw_dim=item.image_regions.shape[1])
            bundle = encoder.encode(item)
        bundles.append(bundle)
    return collate(bundles, hp, labels=[it.label for it in items], dtype=dtype)


@dataclass
class TrainResult:
    model: SEER
    loss_trace: list[float] = field(default_factory=list)


def train(dataset, hp: HyperParams, cache=None, dtype=torch.float32) -> TrainResult:
    """Mini-batch Adam on the joint loss. Returns the model and per-epoch mean loss.

    A pure function of ``(dataset, hp)``: initialisation and batch order come
    from streams keyed on ``hp.seed``.
    """
    data = dataset if isinstance(dataset, Batch) else encode_items(dataset, hp, cache, dtype)
    if len(data) == 0:
        raise ValueError("cannot train on an empty dataset")
    model = build_model(hp, dtype)
    optimizer = torch.optim.Adam(model.parameters(), lr=hp.lr, betas=(0.9, 0.999))
    order_rng = seeded_rng(hp.seed, "shuffle").numpy()
    trace = []
    model.train()
    for epoch in range(hp.epochs):
        order = order_rng.permutation(len(data))
        total = 0.0
        for b, start in enumerate(range(0, len(data), hp.batch_size)):
            batch = data.select(torch.as_tensor(order[start:start + hp.batch_size]))
            _, _, loss = model.loss(batch)
            if not torch.isfinite(loss):
                raise TrainingDivergedError(epoch, b)
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            total += loss.item()
        trace.append(total / len(data))
        log.debug("epoch %d loss %.6f", epoch, trace[-1])
    model.eval()
    return TrainResult(model, trace)


@torch.no_grad()
def predict(model: SEER, data: Batch, batch_size: int = 256):
    outputs = []
    for start in range(0, len(data), batch_size):
        outputs.append(model(data.select(slice(start, start + batch_size))))
    return outputs


def evaluate(model: SEER, dataset, cache=None) -> MetricsReport:
    """Threshold P(real) at 0.5 (ties count as real) and score against the labels."""
    if isinstance(dataset, Batch):
        data = dataset
    else:
        if len(dataset) == 0:
            raise ValueError("cannot evaluate an empty dataset")
        dtype = next(model.parameters()).dtype
        data = encode_items(dataset, model.hp, cache, dtype)
    y_fnd = torch.cat([o.y_fnd for o in predict(model, data)])
    predicted = (y_fnd >= 0.5).long().numpy()
    return MetricsReport.from_labels(predicted, data.labels.numpy())


SWEEPABLE = {"lambda": "lambda_", "k_experts": "k_experts"}


def sweep(param_name: str, values, base_hp: HyperParams, train_items, eval_items, cache=None):
    """Train and evaluate one model per value, everything else held fixed."""
    if param_name not in SWEEPABLE:
        raise ValueError(f"can only sweep {sorted(SWEEPABLE)}, got {param_name!r}")
    rows = []
    for value in values:
        value = int(value) if param_name == "k_experts" else float(value)
        hp = base_hp.replace(**{SWEEPABLE[param_name]: value})
        result = train(train_items, hp, cache)
        rows.append((value, evaluate(result.model, eval_items, cache)))
    return rows


def save_model(model: SEER, path: str | Path) -> None:
    torch.save({"hp": model.hp.to_dict(), "state_dict": model.state_dict()}, path)


def load_model(path: str | Path) -> SEER:
    blob = torch.load(path, map_location="cpu", weights_only=True)
    hp = HyperParams.from_dict(blob["hp"])
    state = blob["state_dict"]
    dtype = next(iter(state.values())).dtype
    model = build_model(hp, dtype)
    model.load_state_dict(state)
    model.eval()
    return model


def feature_rows(model: SEER, items, cache=None):
    """Yield ``(id, label, y_fnd, theta, M_all, E, M_ter)`` per item for external plotting."""
    dtype = next(model.parameters()).dtype
    data = encode_items(items, model.hp, cache, dtype)
    outs = predict(model, data)
    fields_ = {k: torch.cat([getattr(o, k) for o in outs]).numpy() for k in
               ("y_fnd", "theta", "m_all", "e_feature", "m_ter")}
    for i, item in enumerate(items):
        yield (item.id, item.label, float(fields_["y_fnd"][i]), float(fields_["theta"][i]),
               fields_["m_all"][i], fields_["e_feature"][i], fields_["m_ter"][i])

