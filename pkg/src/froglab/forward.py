"""Gate products and FROG trace synthesis for every supported nonlinearity."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .core import FrogTrace, Kind, TraceGeometry, as_pulse


class NoiseModel(str, enum.Enum):
    NONE = "none"
    GAUSSIAN = "gaussian"
    POISSON = "poisson"


@dataclass(frozen=True)
class NoiseSpec:
    """Detector noise applied to trace intensities.

    For ``GAUSSIAN`` the level is the standard deviation relative to the
    trace peak; for ``POISSON`` it is the expected photon count at the peak.
    """

    model: NoiseModel = NoiseModel.NONE
    level: float = 0.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "model", NoiseModel(self.model))
        if not self.level >= 0:
            raise ValueError(f"noise level must be nonnegative, got {self.level}")


def _check_pair(x1, x2, g: TraceGeometry):
    x1 = as_pulse(x1, g.n)
    if g.kind is Kind.SHG:
        if x2 is not None and not np.array_equal(as_pulse(x2, g.n), x1):
            raise ValueError("SHG FROG requires x2 == x1")
        return x1, x1
    if g.kind in (Kind.THG, Kind.PG):
        return x1, x1 if x2 is None else as_pulse(x2, g.n)
    if x2 is None:
        raise ValueError(f"{g.kind.value} requires a second pulse")
    return x1, as_pulse(x2, g.n)


def _gate_columns(x1, x2, g: TraceGeometry, ms) -> np.ndarray:
    """Gate products for delays ``ms`` as an ``(N, len(ms))`` array."""
    n = np.arange(g.n)[:, None]
    d = np.asarray([g.delay(m) for m in ms])[None, :]
    if g.kind in (Kind.BLIND_SHG, Kind.SHG):
        return x1[:, None] * x2[(n + d) % g.n]
    # the remaining kinds carry delay_sign == -1, so n + d == n - |d|
    delayed = (n + d) % g.n
    if g.kind is Kind.THG:
        return (x1**2)[:, None] * x1[delayed]
    if g.kind is Kind.PG:
        return x1[:, None] * np.abs(x1[delayed])
    return x1[:, None] * np.exp(1j * x2[delayed].real)


def gate_product(x1, x2, m: int, g: TraceGeometry) -> np.ndarray:
    """Signal field ``y_m`` leaving the nonlinear medium at delay index ``m``.

    With ``d = g.delay(m)`` and indices mod N:

    * blind SHG / SHG: ``x1[n] * x2[n + d]``
    * THG: ``x1[n]**2 * x1[n - |d|]``
    * PG: ``x1[n] * |x1[n - |d|]|``
    * CRAB: ``x1[n] * exp(1j * Re x2[n - |d|])``

    ``x2`` may be ``None`` for the single-pulse kinds.
    """
    x1, x2 = _check_pair(x1, x2, g)
    if not 0 <= m < g.m_count:
        raise ValueError(f"delay index {m} outside [0, {g.m_count})")
    return _gate_columns(x1, x2, g, [m])[:, 0]


def synthesize_trace(x1, x2, g: TraceGeometry) -> FrogTrace:
    """Trace ``Z[k, m] = |DFT(y_m)[k]|**2`` for all delay columns."""
    x1, x2 = _check_pair(x1, x2, g)
    y = _gate_columns(x1, x2, g, range(g.m_count))
    return FrogTrace(np.abs(np.fft.fft(y, axis=0)) ** 2, g)


def spectral_field(x1, x2, delay_sign: int = 1) -> np.ndarray:
    """Complex field ``Y[k, m]`` (L=1) built from the spectra of x1 and x2.

    Uses ``Y[k, m] = (1/N) sum_l X1[k-l] X2[l] exp(2j pi s m l / N)`` with
    ``s`` the delay sign; no time-domain product is formed.
    """
    x1 = as_pulse(x1)
    x2 = as_pulse(x2, x1.size)
    N = x1.size
    X1, X2 = np.fft.fft(x1), np.fft.fft(x2)
    k = np.arange(N)[:, None]
    ell = np.arange(N)[None, :]
    conv = X1[(k - ell) % N] * X2[ell] / N
    if delay_sign == 1:
        return N * np.fft.ifft(conv, axis=1)
    return np.fft.fft(conv, axis=1)


def synthesize_trace_spectral(x1, x2=None, g: TraceGeometry | None = None) -> FrogTrace:
    """Same trace as :func:`synthesize_trace`, computed in the frequency domain.

    Only defined for L=1 and the two SHG kinds. With ``g=None`` a blind-SHG
    geometry is assumed.
    """
    x1 = as_pulse(x1)
    if g is None:
        g = TraceGeometry(x1.size, 1, Kind.SHG if x2 is None else Kind.BLIND_SHG)
    if g.l != 1 or g.kind not in (Kind.BLIND_SHG, Kind.SHG):
        raise ValueError("spectral synthesis requires L=1 and an SHG kind")
    x1, x2 = _check_pair(x1, x2, g)
    Y = spectral_field(x1, x2, g.delay_sign)
    return FrogTrace(np.abs(Y) ** 2, g)


def power_spectrum(x) -> np.ndarray:
    return np.abs(np.fft.fft(as_pulse(x))) ** 2


def add_noise(t: FrogTrace, spec: NoiseSpec) -> FrogTrace:
    """Return a noisy copy of ``t``; deterministic in ``spec.seed``.

    Each delay column draws from its own generator seeded by
    ``(seed, column)``, so the result does not depend on evaluation order.
    """
    if spec.model is NoiseModel.NONE:
        return t
    z = np.array(t.values, dtype=float)
    peak = z.max()
    out = np.empty_like(z)
    if spec.model is NoiseModel.POISSON and spec.level == 0:
        raise ValueError("Poisson noise needs a positive peak photon count")
    for m in range(z.shape[1]):
        rng = np.random.default_rng([spec.seed, m])
        col = z[:, m]
        if spec.model is NoiseModel.GAUSSIAN:
            out[:, m] = col + spec.level * peak * rng.standard_normal(col.size)
        else:
            scale = spec.level / peak if peak > 0 else 0.0
            out[:, m] = rng.poisson(col * scale) / scale if scale > 0 else col
    return FrogTrace(np.clip(out, 0.0, None), t.geometry)
