"""Deterministic random streams and finite-difference gradient verification."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping

import numpy as np
import torch
from torch.func import vmap

from . import _kernels

MASK64 = 0xFFFFFFFFFFFFFFFF


def fnv1a64(text: str) -> int:
    h = 0xCBF29CE484222325
    for byte in text.encode("utf-8"):
        h = ((h ^ byte) * 0x100000001B3) & MASK64
    return h


def stream_key(seed: int, tag: str) -> int:
    """64-bit key identifying the ``(seed, tag)`` stream."""
    return _kernels.mix64((seed & MASK64) ^ fnv1a64(tag))


class SplitMix64:
    """SplitMix64 generator (Steele, Lea & Flood 2014).

    ``next_u64`` follows the reference algorithm: add the golden gamma to
    the state, then run the variant-13 finalizer over it.
    """

    def __init__(self, state: int):
        self.state = state & MASK64

    def next_u64(self) -> int:
        value, self.state = _kernels.next_u64(self.state)
        return int(value)

    def random(self) -> float:
        """Uniform double in [0, 1) from the top 53 bits."""
        return (self.next_u64() >> 11) * (1.0 / 9007199254740992.0)

    def uniform(self, lo: float, hi: float, size: int) -> np.ndarray:
        out, self.state = _kernels.fill_uniform(self.state, int(size), float(lo), float(hi))
        self.state = int(self.state)
        return out

    def numpy(self) -> np.random.Generator:
        """A numpy Generator seeded from the next draw."""
        return np.random.default_rng(self.next_u64())

    def torch_seed(self) -> int:
        return self.next_u64() & 0x7FFFFFFFFFFFFFFF


def seeded_rng(seed: int, stream_tag: str) -> SplitMix64:
    """Identical ``(seed, tag)`` pairs give identical streams; distinct tags give unrelated ones."""
    return SplitMix64(stream_key(seed, stream_tag))


def uniform_rows(seed: int, tag: str, ids, dim: int, lo: float = -0.5, hi: float = 0.5) -> np.ndarray:
    """Row ``r`` is drawn from its own stream keyed by ``(seed, tag, ids[r])``."""
    return _kernels.uniform_rows(stream_key(seed, tag), np.asarray(ids, dtype=np.int64), dim, lo, hi)


@dataclass(frozen=True)
class GradCheckReport:
    param: str
    max_rel_error: float
    passed: bool


class NonFiniteLossError(FloatingPointError):
    pass


def _relative_error(analytic: torch.Tensor, numeric: torch.Tensor) -> torch.Tensor:
    denom = torch.maximum(torch.ones_like(analytic), torch.maximum(analytic.abs(), numeric.abs()))
    return (analytic - numeric).abs() / denom


def _numeric_grad_sequential(loss_fn, params, name, epsilon):
    base = params[name]
    flat = base.detach().reshape(-1)
    grad = torch.empty_like(flat)
    for i in range(flat.numel()):
        values = []
        for sign in (1.0, -1.0):
            bumped = flat.clone()
            bumped[i] += sign * epsilon
            trial = dict(params)
            trial[name] = bumped.reshape(base.shape)
            value = loss_fn(trial)
            if not torch.isfinite(value):
                raise NonFiniteLossError(f"non-finite loss perturbing {name}[{i}]")
            values.append(value)
        grad[i] = (values[0] - values[1]) / (2 * epsilon)
    return grad.reshape(base.shape)


def _numeric_grad_vectorized(loss_fn, params, name, epsilon, chunk_size):
    base = params[name].detach()
    n = base.numel()
    eye = torch.eye(n, dtype=base.dtype, device=base.device) * epsilon
    rest = {k: v.detach() for k, v in params.items() if k != name}

    def at(flat_value):
        trial = dict(rest)
        trial[name] = flat_value.reshape(base.shape)
        return loss_fn(trial)

    batched = vmap(at, chunk_size=chunk_size)
    flat = base.reshape(1, -1)
    plus = batched(flat + eye)
    minus = batched(flat - eye)
    both = torch.stack([plus, minus], dim=1)
    bad = ~torch.isfinite(both)
    if bad.any():
        idx = int(bad.any(dim=1).nonzero()[0])
        raise NonFiniteLossError(f"non-finite loss perturbing {name}[{idx}]")
    return ((plus - minus) / (2 * epsilon)).reshape(base.shape)


def grad_check(
    loss_fn: Callable[[Mapping[str, torch.Tensor]], torch.Tensor],
    params: Mapping[str, torch.Tensor],
    epsilon: float = 1e-3,
    tol: float = 1e-4,
    vectorize: bool = True,
    chunk_size: int | None = 512,
) -> list[GradCheckReport]:
    """Compare autograd gradients of ``loss_fn(params)`` with central differences.

    ``loss_fn`` must be a pure function of the parameter mapping it receives;
    the caller's tensors are never modified. Relative error per scalar uses
    ``max(1, |analytic|, |numeric|)`` as denominator, and one report is
    returned per named parameter.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    leaves = {k: v.detach().clone().requires_grad_(True) for k, v in params.items()}
    loss = loss_fn(leaves)
    if not torch.isfinite(loss):
        raise NonFiniteLossError("non-finite loss at the unperturbed parameters")
    names = list(leaves)
    if loss.requires_grad:
        analytic = torch.autograd.grad(loss, [leaves[k] for k in names], allow_unused=True)
    else:
        analytic = [None] * len(names)
    frozen = {k: v.detach() for k, v in leaves.items()}

    reports = []
    for name, a_grad in zip(names, analytic):
        if a_grad is None:
            a_grad = torch.zeros_like(frozen[name])
        if vectorize:
            try:
                n_grad = _numeric_grad_vectorized(loss_fn, frozen, name, epsilon, chunk_size)
            except NonFiniteLossError:
                raise
            except RuntimeError:
                n_grad = _numeric_grad_sequential(loss_fn, frozen, name, epsilon)
        else:
            n_grad = _numeric_grad_sequential(loss_fn, frozen, name, epsilon)
        err = float(_relative_error(a_grad.detach(), n_grad).max()) if a_grad.numel() else 0.0
        reports.append(GradCheckReport(name, err, err <= tol))
    return reports


def module_loss_fn(module: torch.nn.Module, forward: Callable[[torch.nn.Module], torch.Tensor]):
    """Wrap ``forward(module)`` as a function of the module's parameter mapping."""
    from torch.func import functional_call

    class _Bound(torch.nn.Module):
        def __init__(self):
            super().__init__()
            self.inner = module

        def forward(self):
            return forward(self.inner)

    bound = _Bound()

    def loss_fn(p):
        return functional_call(bound, {f"inner.{k}": v for k, v in p.items()}, ())

    return loss_fn, dict(module.named_parameters())


def reports_to_csv(reports: Iterable[GradCheckReport]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["param", "max_rel_error", "pass"])
    for r in reports:
        writer.writerow([r.param, repr(r.max_rel_error), str(r.passed).lower()])
    return buf.getvalue()

