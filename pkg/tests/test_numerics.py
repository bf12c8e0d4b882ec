import math

import numpy as np
import pytest
import torch

from seer import _kernels, _splitmix_py
from seer.numerics import (
    GradCheckReport,
    NonFiniteLossError,
    SplitMix64,
    _numeric_grad_sequential,
    _numeric_grad_vectorized,
    grad_check,
    reports_to_csv,
    seeded_rng,
    uniform_rows,
)

# Reference outputs of SplitMix64 seeded with 1234567 (Rosetta Code task
# "Pseudo-random numbers/Splitmix64", matching Vigna's splitmix64.c).
SPLITMIX_SEED = 1234567
SPLITMIX_VECTOR = [
    6457827717110365317,
    3203168211198807973,
    9817491932198370423,
    4593380528125082431,
    16408922859458223821,
]


def test_splitmix_reference_vector():
    gen = SplitMix64(SPLITMIX_SEED)
    assert [gen.next_u64() for _ in range(5)] == SPLITMIX_VECTOR


def test_splitmix_reference_vector_pure_python():
    state = SPLITMIX_SEED
    out = []
    for _ in range(5):
        value, state = _splitmix_py.next_u64(state)
        out.append(value)
    assert out == SPLITMIX_VECTOR


def test_same_seed_same_stream():
    a, b = seeded_rng(7, "text"), seeded_rng(7, "text")
    assert [a.next_u64() for _ in range(100)] == [b.next_u64() for _ in range(100)]


def test_distinct_tags_differ():
    a, b = seeded_rng(7, "text"), seeded_rng(7, "image")
    assert [a.next_u64() for _ in range(100)] != [b.next_u64() for _ in range(100)]


def test_uniform_matches_scalar_draws():
    a, b = seeded_rng(3, "x"), seeded_rng(3, "x")
    block = a.uniform(-0.5, 0.5, 50)
    scalars = np.array([b.random() - 0.5 for _ in range(50)])
    np.testing.assert_array_equal(block, scalars)
    assert a.state == b.state


def test_uniform_range():
    draws = seeded_rng(0, "r").uniform(-0.5, 0.5, 10000)
    assert draws.min() >= -0.5 and draws.max() < 0.5
    assert abs(draws.mean()) < 0.02


def test_uniform_rows_are_per_id_streams():
    full = uniform_rows(5, "token", [3, 9, 3], 6)
    np.testing.assert_array_equal(full[0], full[2])
    np.testing.assert_array_equal(full[1], uniform_rows(5, "token", [9], 6)[0])


def test_compiled_and_fallback_bit_exact():
    if _kernels.BACKEND != "cython":
        pytest.skip("compiled kernels not built")
    from seer import _splitmix

    key = 0xDEADBEEFCAFEBABE
    ids = np.arange(0, 200, 7)
    np.testing.assert_array_equal(
        _splitmix.uniform_rows(key, ids, 13, -0.5, 0.5), _splitmix_py.uniform_rows(key, ids, 13, -0.5, 0.5)
    )
    a, sa = _splitmix.fill_uniform(key, 333, 0.0, 1.0)
    b, sb = _splitmix_py.fill_uniform(key, 333, 0.0, 1.0)
    np.testing.assert_array_equal(a, b)
    assert int(sa) == int(sb)
    assert _splitmix.mix64(key) == _splitmix_py.mix64(key)


def _quadratic(p):
    return sum((v ** 2).sum() for v in p.values())


def test_grad_check_quadratic():
    params = {"a": torch.randn(3, 4, dtype=torch.float64), "b": torch.randn(5, dtype=torch.float64)}
    reports = grad_check(_quadratic, params)
    assert [r.param for r in reports] == ["a", "b"]
    assert all(r.passed for r in reports)
    # central differences are exact for quadratics up to rounding
    assert max(r.max_rel_error for r in reports) < 1e-9


def test_grad_check_constant_loss():
    params = {"w": torch.randn(4, dtype=torch.float64)}
    reports = grad_check(lambda p: torch.tensor(2.5, dtype=torch.float64), params)
    assert reports == [GradCheckReport("w", 0.0, True)]


class _WrongSquare(torch.autograd.Function):
    @staticmethod
    def forward(ctx, x):
        ctx.save_for_backward(x)
        return x ** 2

    @staticmethod
    def backward(ctx, g):
        (x,) = ctx.saved_tensors
        return g * 3 * x


def test_grad_check_flags_wrong_backward():
    params = {"w": torch.tensor([0.5, -1.0, 2.0], dtype=torch.float64)}
    reports = grad_check(lambda p: _WrongSquare.apply(p["w"]).sum(), params, vectorize=False)
    assert not reports[0].passed
    assert reports[0].max_rel_error == pytest.approx(2.0 / 6.0, rel=1e-6)


def test_grad_check_leaves_params_untouched():
    w = torch.randn(6, dtype=torch.float64)
    before = w.clone()
    grad_check(lambda p: (p["w"].sin()).sum(), {"w": w})
    assert torch.equal(w, before)


def test_vectorized_equals_sequential():
    params = {"w": torch.randn(2, 3, dtype=torch.float64), "v": torch.randn(3, dtype=torch.float64)}

    def loss(p):
        return torch.tanh(p["w"] @ p["v"]).sum() + (p["v"] ** 3).sum()

    seq = _numeric_grad_sequential(loss, params, "w", 1e-3)
    vec = _numeric_grad_vectorized(loss, params, "w", 1e-3, None)
    torch.testing.assert_close(seq, vec, rtol=0, atol=1e-12)


def test_non_finite_loss_aborts_with_location():
    params = {"w": torch.tensor([1.0, 0.0005, 3.0], dtype=torch.float64)}
    with pytest.raises(NonFiniteLossError, match=r"w\[1\]"):
        grad_check(lambda p: torch.log(p["w"]).sum(), params, vectorize=False)


def test_epsilon_must_be_positive():
    with pytest.raises(ValueError):
        grad_check(_quadratic, {"a": torch.ones(1, dtype=torch.float64)}, epsilon=0.0)


def test_reports_csv():
    text = reports_to_csv([GradCheckReport("w", 1.5e-7, True), GradCheckReport("b", 0.25, False)])
    lines = text.splitlines()
    assert lines[0] == "param,max_rel_error,pass"
    assert lines[1] == "w,1.5e-07,true"
    assert lines[2] == "b,0.25,false"
    assert math.isclose(float(lines[1].split(",")[1]), 1.5e-7)


def test_benchmark_quick_run():
    import importlib.util
    from pathlib import Path

    path = Path(__file__).parent.parent / "benchmarks" / "bench_kernels.py"
    loader_spec = importlib.util.spec_from_file_location("bench_kernels", path)
    bench = importlib.util.module_from_spec(loader_spec)
    loader_spec.loader.exec_module(bench)
    rows = bench.run(repeat=1, quick=True)
    assert rows and all(py > 0 for _, py, _ in rows)
