"""Iterative trace inversion: PCGP and a ptychographic (ePIE-style) engine.

Both reconstructors work on SHG-type traces. Success is measured by the
scale-optimal trace error :func:`trace_error` and, when the true pulses are
known, by the residual after :func:`~froglab.ambiguity.align_up_to_ambiguities`.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .ambiguity import align_up_to_ambiguities, fractional_shift_is_ambiguity
from .core import FrogTrace, Kind, TraceGeometry, as_pulse
from .forward import synthesize_trace


class InitKind(str, enum.Enum):
    GAUSSIAN_RANDOM_PHASE = "gaussian"
    PROVIDED = "provided"


@dataclass(frozen=True)
class ReconOptions:
    """Settings shared by both reconstructors.

    ``guess`` is used when ``init`` is ``PROVIDED``; it is an ``(x1, x2)``
    pair (``x2`` may be ``None`` in SHG mode). ``rank1`` selects the PCGP
    factor extraction ("power" or "svd") and ``shg_tie`` the way PCGP merges
    the two factors of an SHG estimate ("average" or "left"). With
    ``rescale`` the returned pulses are scaled so that their trace matches
    the measured one in overall level. ``beta=0`` is accepted and freezes
    the ptychographic engine.
    """

    max_iter: int = 1000
    tol: float = 1e-6
    restarts: int = 1
    seed: int = 0
    beta: float = 0.2
    init: InitKind = InitKind.GAUSSIAN_RANDOM_PHASE
    guess: tuple | None = None
    rank1: str = "power"
    shg_tie: str = "average"
    rescale: bool = True

    def __post_init__(self):
        object.__setattr__(self, "init", InitKind(self.init))
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if not 0 <= self.beta <= 1:
            raise ValueError("beta must lie in [0, 1]")
        if not self.tol >= 0:
            raise ValueError("tol must be nonnegative")
        if self.restarts < 1:
            raise ValueError("restarts must be at least 1")
        if self.rank1 not in ("power", "svd"):
            raise ValueError(f"unknown rank-1 method {self.rank1!r}")
        if self.shg_tie not in ("average", "left"):
            raise ValueError(f"unknown SHG tying {self.shg_tie!r}")
        if self.init is InitKind.PROVIDED and self.guess is None:
            raise ValueError("init='provided' needs a guess")


@dataclass
class ReconReport:
    x1: np.ndarray
    x2: np.ndarray
    trajectory: np.ndarray
    iterations: int
    converged: bool
    aligned_residual: float | None = None
    restart: int = 0
    restart_errors: list = field(default_factory=list)

    @property
    def trace_error(self) -> float:
        return float(self.trajectory[-1])


def trace_error(z_est, z_meas) -> tuple[float, float]:
    """Scale-optimal RMS trace error ``(G, mu)``.

    ``mu = sum(Zm*Ze) / sum(Ze**2)`` (0 when ``Ze`` vanishes) and
    ``G = sqrt(mean((Zm - mu*Ze)**2)) / max(Zm)``.
    """
    ze = np.asarray(getattr(z_est, "values", z_est), dtype=float)
    zm = np.asarray(getattr(z_meas, "values", z_meas), dtype=float)
    if ze.shape != zm.shape:
        raise ValueError(f"trace shapes differ: {ze.shape} vs {zm.shape}")
    peak = zm.max()
    if peak <= 0:
        raise ValueError("measured trace is identically zero")
    denom = np.sum(ze * ze)
    mu = float(np.sum(zm * ze) / denom) if denom > 0 else 0.0
    G = float(np.sqrt(np.mean((zm - mu * ze) ** 2)) / peak)
    return G, mu


def _check_geometry(t: FrogTrace, need_l1: bool, name: str):
    g = t.geometry
    if g.kind not in (Kind.SHG, Kind.BLIND_SHG):
        raise ValueError(f"{name} supports SHG kinds only, got {g.kind.value}")
    if need_l1 and g.l != 1:
        raise ValueError(f"{name} requires L=1 (got L={g.l})")
    if not np.any(t.values > 0):
        raise ValueError("measured trace is identically zero")


def _gaussian_random_phase(N: int, rng) -> np.ndarray:
    n = np.arange(N)
    env = np.exp(-0.5 * ((n - N / 2) / (N / 8)) ** 2)
    return env * np.exp(1j * rng.uniform(-np.pi, np.pi, N))


def _initial(opts: ReconOptions, N: int, shg_mode: bool, restart: int):
    if opts.init is InitKind.PROVIDED:
        g1, g2 = opts.guess
        x1 = as_pulse(g1, N)
        x2 = x1.copy() if (shg_mode or g2 is None) else as_pulse(g2, N)
        return x1.copy(), x2.copy()
    rng = np.random.default_rng([opts.seed, restart])
    x1 = _gaussian_random_phase(N, rng)
    x2 = x1.copy() if shg_mode else _gaussian_random_phase(N, rng)
    return x1, x2


def _estimate_trace(x1, x2, g: TraceGeometry) -> np.ndarray:
    # a blind geometry accepts x1 != x2 and equals SHG when they coincide
    bg = TraceGeometry(g.n, g.l, Kind.BLIND_SHG, g.delay_sign)
    return synthesize_trace(x1, x2, bg).values


def _rescale(x1, x2, z_meas, g: TraceGeometry):
    """Match the estimate's trace scale to the measurement."""
    _, mu = trace_error(_estimate_trace(x1, x2, g), z_meas)
    if mu > 0:
        s = mu ** 0.25
        return x1 * s, x2 * s
    return x1, x2


def _aligned_residual(x1, x2, truth, shg_mode: bool) -> float:
    r1, r2 = truth
    r1 = as_pulse(r1, x1.size)
    r2 = r1 if (shg_mode or r2 is None) else as_pulse(r2, x1.size)
    if not shg_mode:
        # the trace fixes x1*x2 only; split the scale as in the reference
        n1, n2 = np.linalg.norm(x1), np.linalg.norm(x2)
        if n1 > 0 and n2 > 0:
            a = np.sqrt(np.linalg.norm(r1) * n2 / (np.linalg.norm(r2) * n1))
            x1, x2 = x1 * a, x2 / a
    frac = shg_mode and fractional_shift_is_ambiguity(np.fft.fft(r1), np.fft.fft(r2))
    _, res = align_up_to_ambiguities(x1, x2, r1, r2, shg_mode=shg_mode, fractional=frac)
    return res


def _batched_traces(X1, X2, cols) -> np.ndarray:
    """Traces of ``R`` pulse pairs at once; ``cols[n, m] = (n + d_m) mod N``."""
    gates = X1[:, :, None] * X2[:, cols]
    return np.abs(np.fft.fft(gates, axis=1)) ** 2


def _batched_error(est, z) -> np.ndarray:
    """:func:`trace_error` G for a stack of estimated traces."""
    den = np.sum(est * est, axis=(1, 2))
    mu = np.where(den > 0, np.sum(z * est, axis=(1, 2)) / np.where(den > 0, den, 1), 0.0)
    return np.sqrt(np.mean((z - mu[:, None, None] * est) ** 2, axis=(1, 2))) / z.max()


def _delay_columns(g: TraceGeometry, count: int) -> np.ndarray:
    n = np.arange(g.n)[:, None]
    return (n + np.asarray([g.delay(m) for m in range(count)])[None, :]) % g.n


def _starts(opts: ReconOptions, N: int, shg_mode: bool):
    pairs = [_initial(opts, N, shg_mode, r) for r in range(opts.restarts)]
    return np.array([p[0] for p in pairs]), np.array([p[1] for p in pairs])


def _finish(X1, X2, traj, iters, z, g, opts, truth, shg_mode) -> ReconReport:
    traj = np.asarray(traj)
    last = traj[-1]
    i = int(np.argmin(last))
    x1, x2 = X1[i], X2[i]
    if opts.rescale:
        x1, x2 = _rescale(x1, x2, z, g)
    G, _ = trace_error(_estimate_trace(x1, x2, g), z)
    path = np.append(traj[:-1, i], G)
    res = None if truth is None else _aligned_residual(x1, x2, truth, shg_mode)
    return ReconReport(x1, x2, path, iters, bool(G < opts.tol), res, i,
                       [float(v) for v in last])


# -- PCGP ---------------------------------------------------------------------

def magnitude_projection(gates: np.ndarray, z: np.ndarray, axis: int = 0) -> np.ndarray:
    """Replace the Fourier magnitudes of each gate column by ``sqrt(Z)``."""
    Y = np.fft.fft(gates, axis=axis)
    Y = np.sqrt(np.clip(z, 0, None)) * np.exp(1j * np.angle(Y))
    return np.fft.ifft(Y, axis=axis)


def _rank1(O, X1, X2, method: str):
    """Rank-one factors of a stack of matrices ``O[r] ~ x1[r] x2[r]^T``."""
    if method == "svd":
        u, s, vh = np.linalg.svd(O)
        r = np.sqrt(s[:, :1])
        return r * u[:, :, 0], r * vh[:, 0, :]
    a = np.einsum("rij,rj->ri", O, np.conj(X2))
    b = np.einsum("rij,ri->rj", O, np.conj(a))
    na = np.linalg.norm(a, axis=1, keepdims=True)
    nb = np.linalg.norm(b, axis=1, keepdims=True)
    u = a / np.where(na > 0, na, 1)
    v = b / np.where(nb > 0, nb, 1)
    sigma = np.einsum("ri,rij,rj->r", np.conj(u), O, np.conj(v))[:, None]
    return np.sqrt(np.abs(sigma)) * np.exp(1j * np.angle(sigma)) * u, np.sqrt(np.abs(sigma)) * v


def _tie(X1, X2, how: str):
    if how == "left":
        return X1, X1.copy()
    ip = np.einsum("ri,ri->r", np.conj(X2), X1)[:, None]
    rot = np.exp(-0.5j * np.angle(ip))
    X = 0.5 * (X1 * rot + X2 / rot)
    return X, X.copy()


def pcgp_reconstruct(t: FrogTrace, opts: ReconOptions | None = None,
                     shg_mode: bool | None = None, truth=None) -> ReconReport:
    """Principal-components generalized projections.

    Each iteration forms the outer product ``O = x1 x2^T``, reads the gate
    columns out of it, projects their spectra onto the measured magnitudes,
    writes them back and extracts a rank-one factor pair (one power-method
    step each, or a full SVD with ``opts.rank1="svd"``). In SHG mode the two
    factors are phase-aligned and averaged.

    All restarts advance together as one stacked array; iteration stops as
    soon as any restart reaches ``opts.tol`` (or after ``opts.max_iter``)
    and the restart with the lowest trace error is returned, rescaled so its
    trace matches the measurement scale.
    """
    opts = opts or ReconOptions()
    _check_geometry(t, True, "PCGP")
    g = t.geometry
    if shg_mode is None:
        shg_mode = g.kind is Kind.SHG
    z = np.asarray(t.values)
    N = g.n
    X1, X2 = _starts(opts, N, shg_mode)
    cols = _delay_columns(g, N)
    rows = np.broadcast_to(np.arange(N)[:, None], cols.shape)
    traj = []
    it = 0
    while True:
        O = X1[:, :, None] * X2[:, None, :]
        gates = O[:, rows, cols]
        est = np.abs(np.fft.fft(gates, axis=1)) ** 2
        G = _batched_error(est, z)
        traj.append(G)
        if G.min() < opts.tol or it >= opts.max_iter:
            break
        O = np.empty_like(O)
        O[:, rows, cols] = magnitude_projection(gates, z, axis=1)
        X1, X2 = _rank1(O, X1, X2, opts.rank1)
        if shg_mode:
            X1, X2 = _tie(X1, X2, opts.shg_tie)
        it += 1
    return _finish(X1, X2, traj, it, z, g, opts, truth, shg_mode)


# -- ptychographic engine -------------------------------------------------------

def ptycho_reconstruct(t: FrogTrace, opts: ReconOptions | None = None,
                       shg_mode: bool | None = None, truth=None) -> ReconReport:
    """Ptychographic reconstruction with ePIE-form updates, any delay stride.

    Each sweep visits the delay columns in a seeded random order. For a
    column the gate product is projected onto the measured spectral
    magnitude (bins where the current spectrum vanishes keep their value)
    and both pulses take a step of size ``opts.beta`` along the
    multiplicative-gate update. In SHG mode both updates act on one signal.
    Restarts run side by side with the same stopping rule as
    :func:`pcgp_reconstruct`.
    """
    opts = opts or ReconOptions()
    _check_geometry(t, False, "ptychographic engine")
    g = t.geometry
    if shg_mode is None:
        shg_mode = g.kind is Kind.SHG
    z = np.asarray(t.values)
    N, M, R = g.n, g.m_count, opts.restarts
    X1, X2 = _starts(opts, N, shg_mode)
    rngs = [np.random.default_rng([opts.seed, r, 1]) for r in range(R)]
    amp = np.sqrt(np.clip(z, 0, None))
    cols = _delay_columns(g, M)
    beta = opts.beta
    traj = []
    it = 0
    while True:
        G = _batched_error(_batched_traces(X1, X2, cols), z)
        traj.append(G)
        if G.min() < opts.tol or it >= opts.max_iter:
            break
        order = np.array([rng.permutation(M) for rng in rngs])
        for step in range(M):
            m = order[:, step]
            idx = cols[:, m].T
            gate = np.take_along_axis(X2, idx, axis=1)
            y = X1 * gate
            Y = np.fft.fft(y, axis=1)
            mag = np.abs(Y)
            Yn = np.where(mag > 0, amp[:, m].T * Y / np.where(mag > 0, mag, 1.0), Y)
            dy = np.fft.ifft(Yn, axis=1) - y
            w1 = np.max(np.abs(X2), axis=1, keepdims=True) ** 2
            w2 = np.max(np.abs(X1), axis=1, keepdims=True) ** 2
            p1 = beta * np.conj(gate) / np.maximum(w1, 1e-300) * dy
            p2 = beta * np.conj(X1) / np.maximum(w2, 1e-300) * dy
            X1 = X1 + p1
            target = X1 if shg_mode else X2.copy()
            np.put_along_axis(target, idx, np.take_along_axis(target, idx, axis=1) + p2, axis=1)
            if shg_mode:
                X1, X2 = target, target
            else:
                X2 = target
        it += 1
    return _finish(X1, X2, traj, it, z, g, opts, truth, shg_mode)
