"""Trivial ambiguities of (blind) FROG and ambiguity-aware signal comparison.

The transforms are global phases, a joint circular time shift, conjugate
reflection and an opposite-sign modulation pair. They are applied in the
fixed order reflect, shift, modulate, phase.

Conjugate reflection is implemented as ``(x1, x2) -> (conj x2[-n], conj x1[-n])``.
Reflecting both pulses without exchanging their roles reverses the delay
axis of a blind trace, while the exchanged form maps every gate product to
``conj(y_m[-n - d])`` and so leaves each column's power spectrum unchanged.
For ``x1 == x2`` both forms coincide.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .core import Kind, TraceGeometry, as_pulse
from .forward import synthesize_trace


@dataclass(frozen=True)
class AmbiguityTransform:
    psi1: float = 0.0
    psi2: float = 0.0
    n0: int = 0
    reflect: bool = False
    k0: int = 0
    # sub-sample part of the shift, realised as a linear spectral phase over
    # each pulse's spectral support arc; zero for the discrete group
    fraction: float = 0.0

    @property
    def shift(self) -> float:
        return self.n0 + self.fraction


def _reflect(x):
    return np.conj(np.roll(x[::-1], 1))


def spectral_window(X, weights=None) -> np.ndarray:
    """Unwrapped frequency index of every bin, centred on the spectral energy.

    Bins are mapped to representatives ``e[l] = l (mod N)`` lying in a window
    of length N centred at the circular centroid of ``|X|**2``. For a
    contiguous spectral support shorter than N/2+1 the whole support falls
    inside the window without wrapping.
    """
    X = np.asarray(X)
    N = X.size
    w = np.abs(X) ** 2 if weights is None else weights
    ell = np.arange(N)
    z = np.sum(w * np.exp(2j * np.pi * ell / N))
    centre = (np.angle(z) * N / (2 * np.pi)) % N if abs(z) > 1e-14 * max(w.sum(), 1e-300) else 0.0
    lo = centre - N / 2
    return lo + (ell - lo) % N


def fractional_shift(x, tau: float) -> np.ndarray:
    """Shift by ``tau`` samples using a linear phase over the spectral window.

    Integer ``tau`` reproduces the circular shift exactly.
    """
    X = np.fft.fft(x)
    e = spectral_window(X)
    return np.fft.ifft(X * np.exp(-2j * np.pi * e * tau / X.size))


def apply_transform(x1, x2, t: AmbiguityTransform, shg_mode: bool = False):
    """Apply ``t`` to the pair in the canonical order. Returns ``(x1', x2')``.

    In ``shg_mode`` the pair must stay a single pulse, so the two phases have
    to agree and the modulation must be its own conjugate (``k0`` is 0, or
    ``N/2`` for even ``N``, which multiplies the pulse by ``(-1)**n``).
    """
    x1 = as_pulse(x1)
    x2 = as_pulse(x2, x1.size)
    N = x1.size
    if shg_mode and ((2 * t.k0) % N != 0 or not np.isclose(t.psi1, t.psi2)):
        raise ValueError("SHG mode allows only psi1 == psi2 and k0 in {0, N/2}")
    if t.reflect:
        x1, x2 = _reflect(x2), _reflect(x1)
    if t.fraction:
        x1, x2 = fractional_shift(x1, t.shift), fractional_shift(x2, t.shift)
    else:
        x1, x2 = np.roll(x1, t.n0), np.roll(x2, t.n0)
    if t.k0:
        ramp = np.exp(-2j * np.pi * t.k0 * np.arange(N) / N)
        x1, x2 = x1 * ramp, x2 * np.conj(ramp)
    return x1 * np.exp(1j * t.psi1), x2 * np.exp(1j * t.psi2)


def _pair_residual(c1, c2, r1, r2) -> float:
    num = np.linalg.norm(c1 - r1) ** 2 + np.linalg.norm(c2 - r2) ** 2
    return float(np.sqrt(num / (np.linalg.norm(r1) ** 2 + np.linalg.norm(r2) ** 2)))


def align_up_to_ambiguities(cand1, cand2, ref1, ref2, shg_mode: bool = False,
                            fractional: bool = False):
    """Best trivial-ambiguity match between a candidate pair and a reference.

    Searches reflect x shift x modulation exhaustively (in ``shg_mode`` the
    modulation is limited to ``k0`` in {0, N/2}); global phases are chosen
    in closed form. Ties go to the first cell in (reflect, n0, k0) order.
    The returned transform ``t`` satisfies ``apply_transform(ref1, ref2, t) ~ (cand1, cand2)``
    and the residual is

        sqrt((|ref1 - c1|^2 + |ref2 - c2|^2) / (|ref1|^2 + |ref2|^2))

    where ``c`` is the candidate mapped back onto the reference frame, which
    has the same norm as ``cand - T(ref)``. With ``fractional=True`` the
    shift is optimised continuously; use this only where sub-sample shifts
    are exact ambiguities (see :func:`fractional_shift_is_ambiguity`).

    Returns ``(transform, residual)``.
    """
    r1, r2 = as_pulse(ref1), as_pulse(ref2)
    N = r1.size
    c1, c2 = as_pulse(cand1, N), as_pulse(cand2, N)
    e_ref = np.linalg.norm(r1) ** 2 + np.linalg.norm(r2) ** 2
    if e_ref == 0:
        raise ValueError("reference pair has zero energy")
    C1, C2 = np.fft.fft(c1), np.fft.fft(c2)
    if not shg_mode:
        k0s = np.arange(N)
    else:
        k0s = np.array([0, N // 2]) if N % 2 == 0 else np.array([0])
    ell = np.arange(N)
    # demodulated candidate spectra, one row per k0
    D1 = C1[(ell[None, :] - k0s[:, None]) % N]
    D2 = C2[(ell[None, :] + k0s[:, None]) % N]

    scores = np.empty((2, N, k0s.size))
    cross = {}
    for refl in (0, 1):
        a1, a2 = (_reflect(r2), _reflect(r1)) if refl else (r1, r2)
        A1, A2 = np.fft.fft(a1), np.fft.fft(a2)
        b1 = np.conj(A1)[None, :] * D1 / N
        b2 = np.conj(A2)[None, :] * D2 / N
        cross[refl] = (A1, A2, b1, b2)
        # H[k0, n0] = <shift_n0 a, demodulated c>
        H1 = N * np.fft.ifft(b1, axis=1)
        H2 = N * np.fft.ifft(b2, axis=1)
        if shg_mode:
            s = np.abs(H1 + H2)
        else:
            s = np.abs(H1) + np.abs(H2)
        scores[refl] = s.T

    best = scores.max()
    flat = np.flatnonzero(scores.ravel() >= best - 1e-12 * max(best, 1e-300))[0]
    refl, n0, ki = np.unravel_index(flat, scores.shape)
    tau = float(n0)

    if fractional:
        best_val = -1.0
        for rf in (0, 1):
            A1, A2, b1, b2 = cross[rf]
            e1, e2 = spectral_window(A1), spectral_window(A2)
            for i in range(k0s.size):
                tau_i, val = _refine_shift(b1[i], b2[i], e1, e2, N, shg_mode)
                if val > best_val + 1e-12 * abs(best_val):
                    best_val, refl, ki, tau = val, rf, i, tau_i

    k0 = int(k0s[ki])
    n0 = int(np.floor(tau + 0.5)) % N
    frac = float(tau - np.floor(tau + 0.5)) if fractional else 0.0
    base = AmbiguityTransform(0.0, 0.0, n0, bool(refl), k0, frac)
    t1, t2 = apply_transform(r1, r2, base)
    p1, p2 = np.vdot(t1, c1), np.vdot(t2, c2)
    if shg_mode:
        psi1 = psi2 = float(np.angle(p1 + p2))
    else:
        psi1, psi2 = float(np.angle(p1)), float(np.angle(p2))
    t = AmbiguityTransform(psi1, psi2, n0, bool(refl), k0, frac)
    t1, t2 = apply_transform(r1, r2, t)
    return t, _pair_residual(c1, c2, t1, t2)


def _refine_shift(b1, b2, e1, e2, N, shg_mode, oversample=16):
    """Continuous maximiser of the phase-optimal overlap over the shift."""
    w1 = 2 * np.pi * e1 / N
    w2 = 2 * np.pi * e2 / N
    taus = np.arange(N * oversample) / oversample

    def g(tau, b, w):
        return np.exp(1j * np.outer(np.atleast_1d(tau), w)) @ b

    def objective(tau):
        g1, g2 = g(tau, b1, w1), g(tau, b2, w2)
        return np.abs(g1 + g2) if shg_mode else np.abs(g1) + np.abs(g2)

    def slope(tau):
        g1, g2 = g(tau, b1, w1)[0], g(tau, b2, w2)[0]
        d1 = (np.exp(1j * w1 * tau) * 1j * w1) @ b1
        d2 = (np.exp(1j * w2 * tau) * 1j * w2) @ b2
        if shg_mode:
            s, ds = g1 + g2, d1 + d2
            return np.real(np.conj(s) * ds) / max(abs(s), 1e-300)
        return (np.real(np.conj(g1) * d1) / max(abs(g1), 1e-300)
                + np.real(np.conj(g2) * d2) / max(abs(g2), 1e-300))

    vals = objective(taus)
    i = int(np.argmax(vals))
    h = 1.0 / oversample
    lo, hi = taus[i] - h, taus[i] + h
    best_tau, best_val = taus[i], vals[i]
    slo, shi = slope(lo), slope(hi)
    if slo > 0 > shi:
        root = brentq(slope, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
        v = objective(root)[0]
        if v >= best_val:
            best_tau, best_val = root, v
    return float(best_tau % N), float(best_val)


def fractional_shift_is_ambiguity(X1, X2, threshold: float = 1e-12) -> bool:
    """Whether a joint sub-sample shift leaves the SHG-type trace unchanged.

    True when the spectral supports of both pulses are circular arcs whose
    lengths satisfy ``len1 + len2 - 1 <= N``, so the support sums never alias.
    """
    N = len(X1)
    lengths = []
    for X in (X1, X2):
        mag = np.abs(np.asarray(X))
        nz = mag > threshold * mag.max()
        if nz.all():
            return False
        # a single arc has exactly one circular zero->nonzero transition
        if np.count_nonzero(nz & ~np.roll(nz, 1)) != 1:
            return False
        lengths.append(int(nz.sum()))
    return lengths[0] + lengths[1] - 1 <= N


@dataclass
class InvarianceCheck:
    name: str
    status: str
    max_deviation: float = float("nan")
    transform: AmbiguityTransform | None = None


@dataclass
class InvarianceReport:
    checks: list[InvarianceCheck] = field(default_factory=list)
    tolerance: float = 1e-10

    @property
    def passed(self) -> bool:
        return all(c.status != "FAIL" for c in self.checks)


def check_trace_invariance(x1, x2, g: TraceGeometry, seed: int = 0,
                           tolerance: float = 1e-10,
                           corrupt: bool = False) -> InvarianceReport:
    """Check that each trivial ambiguity leaves the trace unchanged.

    Transforms that are not ambiguities of ``g.kind`` are reported as
    skipped: modulation is bivariate-only (blind SHG); reflection reverses
    the delay axis of THG, PG and CRAB traces; for CRAB only x1 may take a
    global phase. With
    ``corrupt=True`` the shift is applied to x1 alone (negative control).
    """
    rng = np.random.default_rng(seed)
    N = g.n
    single = g.kind.single_pulse
    x1 = as_pulse(x1, N)
    x2 = x1 if single else as_pulse(x2, N)
    ref = synthesize_trace(x1, None if g.kind is Kind.SHG else x2, g).values
    scale = max(ref.max(), 1e-300)

    psi1 = float(rng.uniform(-np.pi, np.pi))
    psi2 = psi1 if single else (0.0 if g.kind is Kind.CRAB else float(rng.uniform(-np.pi, np.pi)))
    n0 = int(rng.integers(1, N))
    k0 = int(rng.integers(1, N))
    plan = [
        ("global-phase", AmbiguityTransform(psi1=psi1, psi2=psi2), None),
        ("shift", AmbiguityTransform(n0=n0), None),
        ("conjugate-reflection", AmbiguityTransform(reflect=True),
         None if g.kind in (Kind.BLIND_SHG, Kind.SHG)
         else f"skipped (not an ambiguity of {g.kind.value})"),
        ("modulation", AmbiguityTransform(k0=k0),
         None if g.kind is Kind.BLIND_SHG else "skipped (bivariate-only)"),
    ]
    report = InvarianceReport(tolerance=tolerance)
    for name, t, skip in plan:
        if skip:
            report.checks.append(InvarianceCheck(name, skip, transform=t))
            continue
        y1, y2 = apply_transform(x1, x2, t)
        if corrupt and name == "shift":
            y1, y2 = np.roll(x1, t.n0), x2
        if g.kind is Kind.SHG:
            y2 = None
        z = synthesize_trace(y1, y2, g).values
        dev = float(np.abs(z - ref).max() / scale)
        report.checks.append(InvarianceCheck(name, "PASS" if dev < tolerance else "FAIL", dev, t))
    return report
