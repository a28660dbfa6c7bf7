import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from froglab.core import (FrogTrace, Kind, TraceGeometry, as_pulse, bandlimited_support,
                          circular_shift, dft_forward, dft_inverse, random_bandlimited_pulse)

seeds = st.integers(0, 2**32 - 1)


def _pulse(n, seed):
    r = np.random.default_rng(seed)
    return r.standard_normal(n) + 1j * r.standard_normal(n)


def test_dft_delta_and_dc():
    np.testing.assert_allclose(dft_forward([1, 0, 0, 0]), [1, 1, 1, 1])
    np.testing.assert_allclose(dft_forward([1, 1, 1, 1]), [4, 0, 0, 0], atol=1e-15)
    np.testing.assert_allclose(dft_inverse([1, 1, 1, 1]), [1, 0, 0, 0], atol=1e-15)
    np.testing.assert_allclose(dft_inverse([4, 0, 0, 0]), [1, 1, 1, 1])


def test_dft_kernel_sign():
    # a single tone at +1 cycle lands in bin 1
    n = np.arange(8)
    X = dft_forward(np.exp(2j * np.pi * n / 8))
    assert abs(X[1] - 8) < 1e-12 and np.abs(np.delete(X, 1)).max() < 1e-12


@given(st.integers(2, 128), seeds)
@settings(max_examples=60, deadline=None)
def test_round_trip_and_parseval(n, seed):
    x = _pulse(n, seed)
    X = dft_forward(x)
    assert np.linalg.norm(dft_inverse(X) - x) <= 1e-12 * np.linalg.norm(x)
    assert np.allclose(dft_forward(dft_inverse(X)), X, rtol=0, atol=1e-12 * np.abs(X).max())
    e_t, e_f = np.sum(np.abs(x) ** 2), np.sum(np.abs(X) ** 2) / n
    assert abs(e_t - e_f) <= 1e-12 * e_t


def test_circular_shift_examples():
    np.testing.assert_array_equal(circular_shift([1, 2, 3, 4], 1), [4, 1, 2, 3])
    x = np.arange(5.0)
    np.testing.assert_array_equal(circular_shift(x, 0), x)
    np.testing.assert_array_equal(circular_shift(x, 5), x)
    np.testing.assert_array_equal(circular_shift(x, -1), [1, 2, 3, 4, 0])


@given(st.integers(2, 40), st.integers(-100, 100), st.integers(-100, 100), seeds)
@settings(max_examples=50, deadline=None)
def test_shift_composition_and_spectrum(n, a, b, seed):
    x = _pulse(n, seed)
    np.testing.assert_array_equal(circular_shift(circular_shift(x, a), b), circular_shift(x, a + b))
    k = np.arange(n)
    expected = dft_forward(x) * np.exp(-2j * np.pi * k * a / n)
    assert np.abs(dft_forward(circular_shift(x, a)) - expected).max() <= 1e-12 * n * np.abs(x).sum()


def test_as_pulse_validation():
    with pytest.raises(ValueError):
        as_pulse([1.0])
    with pytest.raises(ValueError):
        as_pulse(np.ones((2, 2)))
    with pytest.raises(ValueError):
        as_pulse([1.0, np.nan])
    with pytest.raises(ValueError):
        as_pulse([1.0, 2.0], n=3)


def test_geometry_counts_and_signs():
    g = TraceGeometry(10, 3)
    assert g.m_count == 4 and g.m_count * g.l >= g.n
    assert g.delay_sign == 1 and g.delay(2) == 6
    assert TraceGeometry(8, 1, Kind.THG).delay_sign == -1
    assert TraceGeometry(8, 1, Kind.PG, delay_sign=1).delay_sign == -1
    assert TraceGeometry(8, 1, Kind.SHG, delay_sign=-1).delay_sign == -1
    assert TraceGeometry.from_dict(g.to_dict()) == g


@pytest.mark.parametrize("bad", [dict(n=1), dict(n=4, l=0), dict(n=4, l=5), dict(n=4, delay_sign=2)])
def test_geometry_rejects(bad):
    with pytest.raises(ValueError):
        TraceGeometry(**bad)


def test_trace_validation():
    g = TraceGeometry(3)
    with pytest.raises(ValueError):
        FrogTrace(np.ones((3, 2)), g)
    with pytest.raises(ValueError):
        FrogTrace(-np.ones((3, 3)), g)
    t = FrogTrace(np.ones((3, 3)), g)
    with pytest.raises(ValueError):
        t.values[0, 0] = 2.0


@pytest.mark.parametrize("n", [3, 4, 7, 8, 16, 33])
@pytest.mark.parametrize("profile", ["iid", "smooth"])
def test_bandlimited_draw_has_zero_run(n, profile, rng):
    x = random_bandlimited_pulse(n, rng, profile=profile)
    X = np.abs(np.fft.fft(x))
    run = math.ceil((n - 1) / 2)
    zero = ~bandlimited_support(n)
    assert zero.sum() == run
    assert X[zero].max() <= 1e-12 * X.max()
    assert np.all(X[~zero] > 0)


def test_bandlimited_zero_run_start(rng):
    x = random_bandlimited_pulse(8, rng, zero_run_start=6)
    X = np.abs(np.fft.fft(x))
    assert X[[6, 7, 0, 1]].max() < 1e-12 * X.max()
