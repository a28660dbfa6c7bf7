import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from froglab.core import Kind, TraceGeometry, random_bandlimited_pulse, random_pulse
from froglab.forward import synthesize_trace
from froglab.recon import (InitKind, ReconOptions, magnitude_projection, pcgp_reconstruct,
                           ptycho_reconstruct, trace_error)


def _shg(x, l=1):
    return synthesize_trace(x, None, TraceGeometry(x.size, l, Kind.SHG))


# -- trace error -------------------------------------------------------------------

def test_trace_error_examples(rng):
    z = rng.random((8, 8))
    assert trace_error(z, z) == pytest.approx((0.0, 1.0), abs=1e-15)
    G, mu = trace_error(2 * z, z)
    assert G < 1e-15 and mu == pytest.approx(0.5)


def test_trace_error_zero_estimate_and_errors(rng):
    z = rng.random((4, 4))
    G, mu = trace_error(np.zeros((4, 4)), z)
    assert mu == 0 and G > 0
    with pytest.raises(ValueError):
        trace_error(z, np.zeros((4, 4)))
    with pytest.raises(ValueError):
        trace_error(z, np.ones((4, 5)))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.1, 10))
def test_trace_error_zero_iff_proportional(seed, scale):
    rng = np.random.default_rng(seed)
    a, b = rng.random((6, 6)), rng.random((6, 6))
    assert trace_error(scale * a, a)[0] < 1e-12
    assert trace_error(b, a)[0] > 1e-6


# -- options ------------------------------------------------------------------------

@pytest.mark.parametrize("kw", [dict(max_iter=0), dict(beta=1.5), dict(beta=-0.1),
                                dict(tol=-1), dict(restarts=0), dict(rank1="qr"),
                                dict(shg_tie="right"), dict(init="provided")])
def test_options_validation(kw):
    with pytest.raises(ValueError):
        ReconOptions(**kw)


# -- projection ---------------------------------------------------------------------

def test_projection_idempotent(rng):
    z = _shg(random_pulse(16, rng)).values
    gates = rng.standard_normal((16, 16)) + 1j * rng.standard_normal((16, 16))
    once = magnitude_projection(gates, z)
    twice = magnitude_projection(once, z)
    assert np.abs(twice - once).max() < 1e-12 * np.abs(once).max()
    np.testing.assert_allclose(np.abs(np.fft.fft(once, axis=0)) ** 2, z, atol=1e-10 * z.max())


# -- PCGP ---------------------------------------------------------------------------

def test_pcgp_delta_success_rate():
    x = np.zeros(16, dtype=complex)
    x[0] = 1
    t = _shg(x)
    wins = sum(pcgp_reconstruct(t, ReconOptions(max_iter=200, tol=1e-6, seed=s)).trace_error < 1e-6
               for s in range(20))
    assert wins >= 18


def test_pcgp_rejects_strided_and_other_kinds(rng):
    x = random_pulse(8, rng)
    with pytest.raises(ValueError, match="L=1"):
        pcgp_reconstruct(_shg(x, 2))
    with pytest.raises(ValueError):
        pcgp_reconstruct(synthesize_trace(x, None, TraceGeometry(8, 1, Kind.THG)))
    zero = _shg(np.zeros(8))
    with pytest.raises(ValueError, match="zero"):
        pcgp_reconstruct(zero)


@pytest.mark.parametrize("rank1", ["power", "svd"])
@pytest.mark.parametrize("tie", ["average", "left"])
def test_pcgp_variants_reduce_error(rank1, tie, rng):
    x = random_bandlimited_pulse(16, rng)
    opts = ReconOptions(max_iter=100, rank1=rank1, shg_tie=tie, seed=3)
    rep = pcgp_reconstruct(_shg(x), opts, truth=(x, x))
    assert rep.trajectory[-1] < rep.trajectory[0]
    assert rep.aligned_residual is not None


def test_pcgp_blind_runs(rng):
    x1, x2 = random_pulse(8, rng), random_pulse(8, rng)
    t = synthesize_trace(x1, x2, TraceGeometry(8, 1, Kind.BLIND_SHG))
    rep = pcgp_reconstruct(t, ReconOptions(max_iter=50, restarts=3))
    assert len(rep.trajectory) == rep.iterations + 1
    assert len(rep.restart_errors) == 3


def test_pcgp_final_error_matches_independent(rng):
    x = random_bandlimited_pulse(16, rng)
    t = _shg(x)
    rep = pcgp_reconstruct(t, ReconOptions(max_iter=40, restarts=2))
    G, _ = trace_error(_shg(rep.x1), t)
    assert abs(G - rep.trajectory[-1]) < 1e-12
    assert rep.trace_error == rep.trajectory[-1]


def test_pcgp_deterministic(rng):
    t = _shg(random_bandlimited_pulse(16, rng))
    opts = ReconOptions(max_iter=30, restarts=3, seed=11)
    a, b = pcgp_reconstruct(t, opts), pcgp_reconstruct(t, opts)
    np.testing.assert_array_equal(a.x1, b.x1)
    np.testing.assert_array_equal(a.trajectory, b.trajectory)


# -- ptychographic engine --------------------------------------------------------------

def test_ptycho_success_rate_n32():
    wins = 0
    for s in range(10):
        x = random_bandlimited_pulse(32, np.random.default_rng(500 + s))
        rep = ptycho_reconstruct(_shg(x), ReconOptions(max_iter=1000, tol=1e-4, seed=s))
        wins += rep.trace_error < 1e-4
    assert wins >= 7


def test_ptycho_strided_improves():
    better = 0
    for s in range(10):
        x = random_bandlimited_pulse(32, np.random.default_rng(700 + s))
        rep = ptycho_reconstruct(_shg(x, 2), ReconOptions(max_iter=100, seed=s))
        better += rep.trajectory[-1] < rep.trajectory[0]
    assert better >= 9


def test_ptycho_zero_step_freezes(rng):
    x = random_pulse(8, rng)
    g1, g2 = random_pulse(8, rng), random_pulse(8, rng)
    t = synthesize_trace(x, random_pulse(8, rng), TraceGeometry(8, 1, Kind.BLIND_SHG))
    opts = ReconOptions(beta=0, max_iter=7, tol=0, init=InitKind.PROVIDED, guess=(g1, g2),
                        rescale=False)
    rep = ptycho_reconstruct(t, opts)
    assert rep.iterations == 7
    np.testing.assert_array_equal(rep.x1, g1)
    np.testing.assert_array_equal(rep.x2, g2)
    assert np.ptp(rep.trajectory) == 0


def test_ptycho_final_error_and_determinism(rng):
    x = random_bandlimited_pulse(16, rng)
    t = _shg(x, 2)
    opts = ReconOptions(max_iter=20, restarts=2, seed=5)
    a, b = ptycho_reconstruct(t, opts), ptycho_reconstruct(t, opts)
    np.testing.assert_array_equal(a.x1, b.x1)
    assert abs(trace_error(_shg(a.x1, 2), t)[0] - a.trajectory[-1]) < 1e-12


def test_ptycho_truth_residual_uses_alignment(rng):
    x = random_bandlimited_pulse(16, rng)
    shifted = np.roll(x, 5) * np.exp(0.7j)
    opts = ReconOptions(init=InitKind.PROVIDED, guess=(shifted, None), max_iter=3, tol=1e-12)
    rep = ptycho_reconstruct(_shg(x), opts, truth=(x, x))
    assert rep.trajectory[0] < 1e-12
    assert rep.aligned_residual < 1e-10
