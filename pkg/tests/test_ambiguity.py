import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from froglab.ambiguity import (AmbiguityTransform, align_up_to_ambiguities, apply_transform,
                               check_trace_invariance, fractional_shift,
                               fractional_shift_is_ambiguity)
from froglab.core import Kind, TraceGeometry, random_bandlimited_pulse
from froglab.forward import synthesize_trace

from conftest import pulse_pairs, rel_err


def _transforms(N, r):
    return [
        AmbiguityTransform(psi1=r.uniform(-np.pi, np.pi), psi2=r.uniform(-np.pi, np.pi)),
        AmbiguityTransform(n0=int(r.integers(1, N))),
        AmbiguityTransform(reflect=True),
        AmbiguityTransform(k0=int(r.integers(1, N))),
    ]


def test_identity_transform(rng):
    x1, x2 = rng.standard_normal(5) + 0j, rng.standard_normal(5) + 1j
    y1, y2 = apply_transform(x1, x2, AmbiguityTransform())
    np.testing.assert_array_equal(y1, x1)
    np.testing.assert_array_equal(y2, x2)


def test_shifted_delta():
    d = np.zeros(6, dtype=complex)
    d[0] = 1
    y1, y2 = apply_transform(d, d, AmbiguityTransform(n0=1))
    np.testing.assert_array_equal(y1, np.roll(d, 1))
    np.testing.assert_array_equal(y2, np.roll(d, 1))
    g = TraceGeometry(6, 1, Kind.SHG)
    np.testing.assert_allclose(synthesize_trace(y1, None, g).values, synthesize_trace(d, None, g).values)


def test_reflection_swaps_roles(rng):
    x1 = rng.standard_normal(7) + 1j * rng.standard_normal(7)
    x2 = rng.standard_normal(7) + 1j * rng.standard_normal(7)
    y1, y2 = apply_transform(x1, x2, AmbiguityTransform(reflect=True))
    n = np.arange(7)
    np.testing.assert_allclose(y1, np.conj(x2[(-n) % 7]))
    np.testing.assert_allclose(y2, np.conj(x1[(-n) % 7]))


@pytest.mark.parametrize("l", [1, 2, 3])
def test_each_transform_preserves_blind_trace(l, rng):
    for _ in range(5):
        x1 = rng.standard_normal(16) + 1j * rng.standard_normal(16)
        x2 = rng.standard_normal(16) + 1j * rng.standard_normal(16)
        g = TraceGeometry(16, l)
        ref = synthesize_trace(x1, x2, g).values
        for t in _transforms(16, rng):
            y1, y2 = apply_transform(x1, x2, t)
            assert rel_err(synthesize_trace(y1, y2, g).values, ref) < 1e-10


def test_shg_mode_restrictions(rng):
    x = rng.standard_normal(8) + 1j * rng.standard_normal(8)
    with pytest.raises(ValueError):
        apply_transform(x, x, AmbiguityTransform(k0=1), shg_mode=True)
    with pytest.raises(ValueError):
        apply_transform(x, x, AmbiguityTransform(psi1=0.1, psi2=0.2), shg_mode=True)
    # the half-band modulation is x -> x * (-1)**n, which keeps x1 == x2
    y1, y2 = apply_transform(x, x, AmbiguityTransform(k0=4), shg_mode=True)
    np.testing.assert_allclose(y1, y2)
    g = TraceGeometry(8, 1, Kind.SHG)
    assert rel_err(synthesize_trace(y1, None, g).values, synthesize_trace(x, None, g).values) < 1e-12


def test_length_mismatch():
    with pytest.raises(ValueError):
        apply_transform(np.ones(4), np.ones(5), AmbiguityTransform())


@given(pulse_pairs(4, 16), st.integers(0, 2**32 - 1))
@settings(max_examples=60, deadline=None)
def test_alignment_recovers_group_element(pair, seed):
    ref1, ref2 = pair
    N = ref1.size
    r = np.random.default_rng(seed)
    t = AmbiguityTransform(r.uniform(-np.pi, np.pi), r.uniform(-np.pi, np.pi),
                           int(r.integers(N)), bool(r.integers(2)), int(r.integers(N)))
    c1, c2 = apply_transform(ref1, ref2, t)
    t_hat, res = align_up_to_ambiguities(c1, c2, ref1, ref2)
    assert res < 1e-10
    y1, y2 = apply_transform(ref1, ref2, t_hat)
    assert np.allclose(y1, c1, atol=1e-9) and np.allclose(y2, c2, atol=1e-9)


def test_alignment_global_phase(rng):
    x1 = rng.standard_normal(9) + 1j * rng.standard_normal(9)
    x2 = rng.standard_normal(9) + 1j * rng.standard_normal(9)
    ph = np.exp(1j * np.pi / 3)
    t, res = align_up_to_ambiguities(x1 * ph, x2 * ph, x1, x2)
    assert res < 1e-12
    assert abs(np.angle(np.exp(1j * (t.psi1 - np.pi / 3)))) < 1e-12
    assert abs(np.angle(np.exp(1j * (t.psi2 - np.pi / 3)))) < 1e-12


def test_alignment_perturbation_bound(rng):
    for _ in range(10):
        x1 = rng.standard_normal(12) + 1j * rng.standard_normal(12)
        x2 = rng.standard_normal(12) + 1j * rng.standard_normal(12)
        e1 = rng.standard_normal(12) + 1j * rng.standard_normal(12)
        e2 = rng.standard_normal(12) + 1j * rng.standard_normal(12)
        scale = 1e-3 * np.sqrt((np.linalg.norm(x1) ** 2 + np.linalg.norm(x2) ** 2)
                               / (np.linalg.norm(e1) ** 2 + np.linalg.norm(e2) ** 2))
        _, res = align_up_to_ambiguities(x1 + scale * e1, x2 + scale * e2, x1, x2)
        assert 1e-4 <= res <= 1e-2


def test_alignment_symmetric_for_equal_energy(rng):
    for _ in range(10):
        a1, a2, b1, b2 = (rng.standard_normal(10) + 1j * rng.standard_normal(10) for _ in range(4))
        na = np.sqrt(np.linalg.norm(a1) ** 2 + np.linalg.norm(a2) ** 2)
        nb = np.sqrt(np.linalg.norm(b1) ** 2 + np.linalg.norm(b2) ** 2)
        a1, a2, b1, b2 = a1 / na, a2 / na, b1 / nb, b2 / nb
        _, r_ab = align_up_to_ambiguities(a1, a2, b1, b2)
        _, r_ba = align_up_to_ambiguities(b1, b2, a1, a2)
        assert abs(r_ab - r_ba) < 1e-10


def test_alignment_zero_reference():
    with pytest.raises(ValueError):
        align_up_to_ambiguities(np.ones(4), np.ones(4), np.zeros(4), np.zeros(4))


def test_alignment_ties_break_to_first_cell():
    x = np.ones(4, dtype=complex)
    t, res = align_up_to_ambiguities(x, x, x, x)
    assert res < 1e-15
    assert (t.reflect, t.n0, t.k0) == (False, 0, 0)


def test_fractional_shift_is_exact_for_bandlimited_shg(rng):
    x = random_bandlimited_pulse(16, rng)
    X = np.fft.fft(x)
    assert fractional_shift_is_ambiguity(X, X)
    y = fractional_shift(x, 2.37)
    g = TraceGeometry(16, 1, Kind.SHG)
    assert rel_err(synthesize_trace(y, None, g).values, synthesize_trace(x, None, g).values) < 1e-12
    t, res = align_up_to_ambiguities(y * np.exp(0.3j), y * np.exp(0.3j), x, x,
                                     shg_mode=True, fractional=True)
    assert res < 1e-10
    assert abs(t.shift - 2.37) < 1e-6


def test_fractional_shift_not_an_ambiguity_for_full_support(rng):
    x = rng.standard_normal(8) + 1j * rng.standard_normal(8)
    X = np.fft.fft(x)
    assert not fractional_shift_is_ambiguity(X, X)
    np.testing.assert_allclose(fractional_shift(x, 3.0), np.roll(x, 3), atol=1e-12)


def test_shg_alignment_finds_half_band_modulation(rng):
    x = random_bandlimited_pulse(12, rng)
    y = x * (-1.0) ** np.arange(12)
    t, res = align_up_to_ambiguities(y, y, x, x, shg_mode=True)
    assert res < 1e-12 and t.k0 == 6


@pytest.mark.parametrize("l", [1, 2])
def test_invariance_report_passes(l, rng):
    for kind in Kind:
        x1 = rng.standard_normal(12) + 1j * rng.standard_normal(12)
        x2 = rng.standard_normal(12) + 1j * rng.standard_normal(12)
        rep = check_trace_invariance(x1, x2, TraceGeometry(12, l, kind), seed=3)
        assert rep.passed, [(c.name, c.status, c.max_deviation) for c in rep.checks]
        assert [c.name for c in rep.checks] == ["global-phase", "shift",
                                                "conjugate-reflection", "modulation"]


def test_invariance_skips(rng):
    x = rng.standard_normal(8) + 1j * rng.standard_normal(8)
    rep = check_trace_invariance(x, None, TraceGeometry(8, 1, Kind.SHG))
    assert rep.checks[3].status == "skipped (bivariate-only)"
    rep = check_trace_invariance(x, None, TraceGeometry(8, 1, Kind.THG))
    assert rep.checks[2].status.startswith("skipped")


def test_reflection_is_not_a_thg_ambiguity(rng):
    x = rng.standard_normal(8) + 1j * rng.standard_normal(8)
    g = TraceGeometry(8, 1, Kind.THG)
    y, _ = apply_transform(x, x, AmbiguityTransform(reflect=True))
    assert rel_err(synthesize_trace(y, None, g).values, synthesize_trace(x, None, g).values) > 1e-3


def test_corrupted_shift_fails(rng):
    x1 = rng.standard_normal(16) + 1j * rng.standard_normal(16)
    x2 = rng.standard_normal(16) + 1j * rng.standard_normal(16)
    rep = check_trace_invariance(x1, x2, TraceGeometry(16), corrupt=True)
    status = {c.name: c.status for c in rep.checks}
    assert status["shift"] == "FAIL" and not rep.passed
    assert status["global-phase"] == "PASS"
