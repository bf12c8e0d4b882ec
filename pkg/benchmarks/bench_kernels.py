"""Compiled vs pure-Python SplitMix64 kernels.

    python3 benchmarks/bench_kernels.py [--repeat N] [--quick]

Times the two calls the stub encoder makes: a full token table
(``uniform_rows`` over vocab x d) and a flat ``fill_uniform`` draw.
"""
from __future__ import annotations

import argparse
import timeit

import numpy as np

from seer import _splitmix_py
from seer.numerics import stream_key

try:
    from seer import _splitmix
except ImportError:
    _splitmix = None

CASES = {
    "token table 512x64": lambda k: k.uniform_rows(stream_key(0, "token"), np.arange(512), 64, -0.5, 0.5),
    "token table 8192x64": lambda k: k.uniform_rows(stream_key(0, "token"), np.arange(8192), 64, -0.5, 0.5),
    "fill_uniform 200k": lambda k: k.fill_uniform(12345, 200_000, 0.0, 1.0),
}
QUICK = {"token table 64x8": lambda k: k.uniform_rows(stream_key(0, "token"), np.arange(64), 8, -0.5, 0.5)}


def _values(out):
    return out[0] if isinstance(out, tuple) else out


def run(repeat: int = 3, quick: bool = False) -> list[tuple[str, float, float | None]]:
    rows = []
    for name, case in (QUICK if quick else CASES).items():
        py = min(timeit.repeat(lambda: case(_splitmix_py), number=1, repeat=repeat))
        cy = None
        if _splitmix is not None:
            if not np.array_equal(_values(case(_splitmix_py)), _values(case(_splitmix))):
                raise AssertionError(f"{name}: backends disagree")
            cy = min(timeit.repeat(lambda: case(_splitmix), number=1, repeat=repeat))
        rows.append((name, py, cy))
    return rows


def main(argv=None) -> None:
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--quick", action="store_true")
    args = parser.parse_args(argv)
    print(f"{'case':<22}{'python (s)':>12}{'cython (s)':>12}{'speedup':>10}")
    for name, py, cy in run(args.repeat, args.quick):
        if cy is None:
            print(f"{name:<22}{py:>12.4f}{'n/a':>12}{'':>10}")
        else:
            print(f"{name:<22}{py:>12.4f}{cy:>12.5f}{py / cy:>9.0f}x")


if __name__ == "__main__":
    main()
