"""Shared types, circular indexing and the DFT convention.

Transform convention used throughout the package: the forward DFT is
unnormalized with kernel ``exp(-2j*pi*k*n/N)`` and the inverse carries the
``1/N`` factor, i.e. exactly ``numpy.fft.fft`` / ``numpy.fft.ifft``.
Pulses are plain 1-D complex ``numpy`` arrays with periodic indexing.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np


class Kind(str, enum.Enum):
    """Nonlinear gating mechanism of a FROG measurement."""

    BLIND_SHG = "blind-shg"
    SHG = "shg"
    THG = "thg"
    PG = "pg"
    CRAB = "crab"

    @property
    def default_delay_sign(self) -> int:
        return 1 if self in (Kind.BLIND_SHG, Kind.SHG) else -1

    @property
    def single_pulse(self) -> bool:
        """True when the gate is built from x1 alone."""
        return self in (Kind.SHG, Kind.THG, Kind.PG)


def as_pulse(x, n: int | None = None) -> np.ndarray:
    """Validate and return ``x`` as a complex pulse array.

    Raises ``ValueError`` for non 1-D input, length < 2, non-finite samples
    or a length other than ``n`` when given.
    """
    arr = np.asarray(x, dtype=complex)
    if arr.ndim != 1:
        raise ValueError(f"pulse must be one-dimensional, got shape {arr.shape}")
    if arr.size < 2:
        raise ValueError("pulse length must be at least 2")
    if not np.all(np.isfinite(arr)):
        raise ValueError("pulse samples must be finite")
    if n is not None and arr.size != n:
        raise ValueError(f"pulse length {arr.size} does not match N={n}")
    return arr


@dataclass(frozen=True)
class TraceGeometry:
    """Sampling geometry of a trace.

    ``m_count`` is ``ceil(n / l)``; delays ``m*l`` wrap circularly. The
    delay sign defaults to +1 for SHG kinds and is forced to -1 for THG,
    PG and CRAB, whose gates are written with a negative delay.
    """

    n: int
    l: int = 1
    kind: Kind = Kind.BLIND_SHG
    delay_sign: int | None = None
    m_count: int = field(init=False)

    def __post_init__(self):
        kind = Kind(self.kind)
        object.__setattr__(self, "kind", kind)
        if self.n < 2:
            raise ValueError("N must be at least 2")
        if not 1 <= self.l <= self.n:
            raise ValueError(f"delay stride L={self.l} outside [1, N={self.n}]")
        sign = self.delay_sign
        if sign is None or kind not in (Kind.BLIND_SHG, Kind.SHG):
            sign = kind.default_delay_sign
        if sign not in (1, -1):
            raise ValueError("delay_sign must be +1 or -1")
        object.__setattr__(self, "delay_sign", sign)
        object.__setattr__(self, "m_count", math.ceil(self.n / self.l))

    def delay(self, m: int) -> int:
        """Signed sample delay of column ``m``."""
        return self.delay_sign * m * self.l

    def to_dict(self) -> dict:
        return {"n": self.n, "l": self.l, "kind": self.kind.value,
                "delay_sign": self.delay_sign}

    @classmethod
    def from_dict(cls, d: dict) -> "TraceGeometry":
        return cls(n=int(d["n"]), l=int(d.get("l", 1)), kind=Kind(d["kind"]),
                   delay_sign=d.get("delay_sign"))


@dataclass(frozen=True)
class FrogTrace:
    """Measured intensity ``values[k, m]`` with its geometry."""

    values: np.ndarray
    geometry: TraceGeometry

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        g = self.geometry
        if v.shape != (g.n, g.m_count):
            raise ValueError(f"trace shape {v.shape} != ({g.n}, {g.m_count})")
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise ValueError("trace entries must be finite and nonnegative")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)


def dft_forward(x) -> np.ndarray:
    """Unnormalized DFT, ``X[k] = sum_n x[n] exp(-2j pi k n / N)``."""
    return np.fft.fft(as_pulse(x))


def dft_inverse(s) -> np.ndarray:
    """Inverse DFT with the 1/N factor."""
    return np.fft.ifft(as_pulse(s))


def circular_shift(x, n0: int) -> np.ndarray:
    """Return ``out[n] = x[(n - n0) mod N]``."""
    return np.roll(as_pulse(x), int(n0))


def bandlimited_support(n: int, zero_run_start: int | None = None) -> np.ndarray:
    """Boolean spectral support whose complement is the minimal zero run.

    The zero run has length ``ceil((n - 1) / 2)`` and starts at
    ``ceil(n / 2)`` by default.
    """
    run = math.ceil((n - 1) / 2)
    start = math.ceil(n / 2) if zero_run_start is None else zero_run_start
    support = np.ones(n, dtype=bool)
    support[(start + np.arange(run)) % n] = False
    return support


def random_pulse(n: int, rng: np.random.Generator) -> np.ndarray:
    return rng.standard_normal(n) + 1j * rng.standard_normal(n)


def random_bandlimited_pulse(n: int, rng: np.random.Generator,
                             zero_run_start: int | None = None,
                             profile: str = "iid") -> np.ndarray:
    """Draw a pulse whose spectrum vanishes on a zero run of length ceil((n-1)/2).

    ``profile="iid"`` draws independent complex Gaussian coefficients on the
    support. ``profile="smooth"`` uses a Gaussian spectral envelope centred on
    the support with a random cubic spectral phase, which is closer to a real
    laser pulse.
    """
    support = bandlimited_support(n, zero_run_start)
    spec = np.zeros(n, dtype=complex)
    idx = np.flatnonzero(support)
    if profile == "iid":
        spec[idx] = rng.standard_normal(idx.size) + 1j * rng.standard_normal(idx.size)
    elif profile == "smooth":
        zero_start = math.ceil(n / 2) if zero_run_start is None else zero_run_start
        pos = (idx - zero_start - math.ceil((n - 1) / 2)) % n
        u = (pos - (idx.size - 1) / 2) / max(idx.size / 2, 1)
        coef = rng.normal(0.0, [0.0, 2.0, 3.0, 3.0])
        phase = coef[1] * u + coef[2] * u**2 + coef[3] * u**3 + rng.uniform(-np.pi, np.pi)
        amp = np.exp(-((u / 0.6) ** 2)) * (1 + 0.2 * rng.standard_normal(idx.size)).clip(0.3)
        spec[idx] = amp * np.exp(1j * phase)
    else:
        raise ValueError(f"unknown profile {profile!r}")
    return np.fft.ifft(spec)
