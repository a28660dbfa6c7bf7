import numpy as np
import pytest
from hypothesis import strategies as st


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pulse_pairs(min_n=2, max_n=32):
    """Strategy yielding ``(x1, x2)`` complex Gaussian pulses of a shared length."""
    return st.tuples(st.integers(min_n, max_n), st.integers(0, 2**32 - 1)).map(_draw_pair)


def _draw_pair(args):
    n, seed = args
    r = np.random.default_rng(seed)
    return (r.standard_normal(n) + 1j * r.standard_normal(n),
            r.standard_normal(n) + 1j * r.standard_normal(n))


def rel_err(a, b) -> float:
    a, b = np.asarray(a), np.asarray(b)
    scale = max(np.abs(b).max(), 1e-300)
    return float(np.abs(a - b).max() / scale)
