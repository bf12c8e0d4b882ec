"""Pure-Python SplitMix64 kernels. Same API and bit-exact output as ``_splitmix.pyx``."""
import numpy as np

MASK64 = 0xFFFFFFFFFFFFFFFF
GOLDEN = 0x9E3779B97F4A7C15
_INV_2_53 = 1.0 / 9007199254740992.0


def mix64(z):
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def next_u64(state):
    """Advance ``state`` once; returns ``(output, new_state)``."""
    state = (state + GOLDEN) & MASK64
    return mix64(state), state


def fill_uniform(state, n, lo, hi):
    out = np.empty(n, dtype=np.float64)
    span = hi - lo
    for i in range(n):
        state = (state + GOLDEN) & MASK64
        out[i] = lo + span * ((mix64(state) >> 11) * _INV_2_53)
    return out, state


def uniform_rows(key, ids, dim, lo, hi):
    """One independent stream per id, seeded by ``mix64(key + id * GOLDEN)``."""
    ids = np.asarray(ids, dtype=np.int64)
    out = np.empty((ids.shape[0], dim), dtype=np.float64)
    span = hi - lo
    for r in range(ids.shape[0]):
        state = mix64((key + int(ids[r]) * GOLDEN) & MASK64)
        for c in range(dim):
            state = (state + GOLDEN) & MASK64
            out[r, c] = lo + span * ((mix64(state) >> 11) * _INV_2_53)
    return out
