"""Constructive uniqueness check for blind FROG with known power spectra.

For L=1 the complex trace field factorises in the frequency domain as

    Y[k, -m] = sum_l S[k, l] exp(-2j pi m l / N),
    S[k, l]  = I[k, l] exp(1j P[k, l]),
    I[k, l]  = |X1[k-l]| |X2[l]| / N,   P[k, l] = phi1[k-l] + phi2[l].

Row ``k`` of the trace is therefore the power spectrum of ``S[k, .]`` whose
moduli ``I[k, .]`` are known from the pulse spectra. Recovering each row up
to a phase ``psi[k]`` and then solving the linear system

    phi1[k-l] + phi2[l] + psi[k] = P~[k, l]

in the minimum-norm least-squares sense returns both spectral phases up to
the trivial ambiguities. :func:`verify_uniqueness` runs the whole chain on a
known pair and compares the result with the truth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy import sparse

from .ambiguity import AmbiguityTransform, align_up_to_ambiguities, fractional_shift_is_ambiguity
from .core import FrogTrace, Kind, TraceGeometry, as_pulse
from .forward import synthesize_trace
from .oracle import numeric_nullspace

SUPPORT_THRESHOLD = 1e-12
NULLSPACE_THRESHOLD = 1e-10


class BandlimitResult(NamedTuple):
    satisfied: bool
    zero_run_start: int
    zero_run_length: int
    degenerate: bool = False


def check_bandlimit(s, threshold: float = SUPPORT_THRESHOLD) -> BandlimitResult:
    """Longest circular run of (near-)zero spectral entries.

    The hypothesis holds when the run has at least ``ceil((N-1)/2)`` entries.
    An all-zero spectrum is reported as degenerate and not satisfied.
    """
    mag = np.abs(np.asarray(s))
    N = mag.size
    peak = mag.max() if N else 0.0
    if peak == 0:
        return BandlimitResult(False, 0, N, True)
    zero = mag <= threshold * peak
    best_len, best_start = 0, 0
    if zero.any():
        # unroll twice so runs crossing index 0 are seen whole
        z2 = np.r_[zero, zero]
        run = 0
        for i, z in enumerate(z2):
            run = run + 1 if z else 0
            if run > best_len and run <= N:
                best_len, best_start = run, (i - run + 1) % N
    return BandlimitResult(best_len >= math.ceil((N - 1) / 2), best_start, best_len)


@dataclass
class MagnitudePhaseDecomp:
    magnitude_product: np.ndarray
    support: np.ndarray
    mag1: np.ndarray
    mag2: np.ndarray
    phase_sum: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.mag1.size


def build_decomposition(ps1, ps2, phases=None,
                        threshold: float = SUPPORT_THRESHOLD) -> MagnitudePhaseDecomp:
    """Magnitude-product matrix I[k, l] and, given true phases, P[k, l].

    ``phases`` is an optional ``(phi1, phi2)`` pair of spectral phases; the
    resulting ``phase_sum`` is NaN off the support.
    """
    ps1 = np.asarray(ps1, dtype=float)
    ps2 = np.asarray(ps2, dtype=float)
    if ps1.shape != ps2.shape or ps1.ndim != 1:
        raise ValueError("power spectra must be 1-D of equal length")
    if np.any(ps1 < 0) or np.any(ps2 < 0):
        raise ValueError("power spectra must be nonnegative")
    if not ps1.any() or not ps2.any():
        raise ValueError("power spectrum is identically zero")
    N = ps1.size
    m1, m2 = np.sqrt(ps1), np.sqrt(ps2)
    k = np.arange(N)[:, None]
    ell = np.arange(N)[None, :]
    diff = (k - ell) % N
    I = m1[diff] * m2[ell] / N
    support = I > threshold * I.max()
    P = None
    if phases is not None:
        phi1, phi2 = (np.asarray(p, dtype=float) for p in phases)
        P = np.where(support, phi1[diff] + phi2[ell], np.nan)
    return MagnitudePhaseDecomp(I, support, m1, m2, P)


def rows_from_trace(t: FrogTrace) -> np.ndarray:
    """Row ``k`` is the power spectrum of ``l -> S[k, l]``: ``Z[k, -m mod N]``.

    For a geometry with delay sign -1 the trace columns are already in that
    order.
    """
    g = t.geometry
    if g.l != 1:
        raise ValueError("row reduction requires L=1")
    if g.kind not in (Kind.BLIND_SHG, Kind.SHG):
        raise ValueError("row reduction is defined for SHG kinds only")
    z = np.asarray(t.values)
    if g.delay_sign == -1:
        return z.copy()
    return z[:, (-np.arange(g.n)) % g.n]


@dataclass
class RowRetrieval:
    phases: np.ndarray
    residual: float
    iterations: int
    converged: bool


def retrieve_row_phases_gs(row_spectrum, row_magnitudes, max_iter: int = 3000,
                           tol: float = 1e-8, restarts: int = 32,
                           seed=0) -> RowRetrieval:
    """Phase retrieval of one row with known temporal and Fourier magnitudes.

    Alternating projections between the two magnitude constraints, run for
    all restarts at once from uniform random phases. The reported residual
    is ``|| |F u| - sqrt(row_spectrum) || / || sqrt(row_spectrum) ||`` of the
    best restart. Phases off the support are returned as zero.
    """
    spec = np.asarray(row_spectrum, dtype=float)
    mags = np.asarray(row_magnitudes, dtype=float)
    if spec.shape != mags.shape:
        raise ValueError("row spectrum and magnitudes differ in length")
    if np.any(mags < 0) or np.any(spec < -1e-12 * max(spec.max(), 0)):
        raise ValueError("magnitudes must be nonnegative")
    N = mags.size
    e_time = N * np.sum(mags**2)
    e_freq = np.sum(spec)
    if e_time == 0 and e_freq == 0:
        return RowRetrieval(np.zeros(N), 0.0, 0, True)
    if abs(e_freq - e_time) > 1e-6 * max(e_freq, e_time):
        raise ValueError(f"Parseval mismatch: {e_freq:.6g} vs {e_time:.6g}")
    support = mags > SUPPORT_THRESHOLD * mags.max()
    mags = np.where(support, mags, 0.0)
    target = np.sqrt(np.clip(spec, 0, None))
    norm = np.linalg.norm(target)

    rng = np.random.default_rng(seed)
    u = mags * np.exp(1j * rng.uniform(-np.pi, np.pi, (restarts, N)))
    it = 0
    while True:
        U = np.fft.fft(u, axis=1)
        res = np.linalg.norm(np.abs(U) - target, axis=1) / norm
        if res.min() < tol or it >= max_iter:
            break
        u = mags * np.exp(1j * np.angle(np.fft.ifft(target * np.exp(1j * np.angle(U)), axis=1)))
        it += 1
    best = int(np.argmin(res))
    phases = np.where(support, np.angle(u[best]), 0.0)
    return RowRetrieval(phases, float(res[best]), it + 1, bool(res[best] < tol))


def inject_row_offsets(P, seed=0, psi=None):
    """Add an unknown per-row phase ``psi[k]`` (uniform on [-pi, pi)) to ``P``.

    Returns ``(P_tilde, psi)``; an explicit ``psi`` bypasses the draw.
    """
    P = np.asarray(P, dtype=float)
    if psi is None:
        psi = np.random.default_rng(seed).uniform(-np.pi, np.pi, P.shape[0])
    psi = np.asarray(psi, dtype=float)
    return P + psi[:, None], psi


@dataclass
class PhaseSystem:
    """Sparse system ``A v = rhs`` over ``v = (phi1, phi2, psi)``.

    ``matrix`` always has 3N columns; ``column_mask`` marks the unknowns that
    are not pinned to zero. In ``tied`` mode phi2 is identified with phi1
    (single-pulse FROG) and the phi2 block is folded onto phi1.
    """

    matrix: sparse.csr_matrix
    rhs: np.ndarray
    column_mask: np.ndarray
    cells: np.ndarray
    n: int
    tied: bool = False

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape

    def reduced(self) -> np.ndarray:
        """Dense matrix over the free unknowns (tying applied)."""
        A = self.matrix.toarray()
        if self.tied:
            N = self.n
            A = A.copy()
            A[:, :N] += A[:, N:2 * N]
            A[:, N:2 * N] = 0.0
        return A[:, self.column_mask]

    def expand(self, v_free) -> np.ndarray:
        """Embed a free-unknown vector into the full 3N layout."""
        v = np.zeros(3 * self.n)
        v[self.column_mask] = v_free
        if self.tied:
            v[self.n:2 * self.n] = v[:self.n]
        return v


def build_phase_system(decomp: MagnitudePhaseDecomp, P_tilde, tied: bool = False,
                       threshold: float = SUPPORT_THRESHOLD) -> PhaseSystem:
    """One equation per supported cell, cells in column-stacked order.

    Spectral bins at or below ``threshold * max`` are pinned to zero, as are
    row offsets of empty rows.
    """
    N = decomp.n
    support = decomp.support
    if not support.any():
        raise ValueError("empty support")
    P_tilde = np.asarray(P_tilde, dtype=float)
    # column-stacked: l varies slowest
    ell, k = np.nonzero(support.T)
    rows = np.arange(k.size)
    cols = np.concatenate([(k - ell) % N, N + ell, 2 * N + k])
    data = np.ones(3 * k.size)
    A = sparse.csr_matrix((data, (np.tile(rows, 3), cols)), shape=(k.size, 3 * N))
    rhs = P_tilde[k, ell]
    if not np.all(np.isfinite(rhs)):
        raise ValueError("P_tilde must be defined on the support")
    mask = np.zeros(3 * N, dtype=bool)
    mask[:N] = decomp.mag1 > threshold * decomp.mag1.max()
    mask[N:2 * N] = decomp.mag2 > threshold * decomp.mag2.max()
    mask[2 * N:] = support.any(axis=1)
    if tied:
        mask[:N] |= mask[N:2 * N]
        mask[N:2 * N] = False
    return PhaseSystem(A, rhs, mask, np.column_stack([k, ell]), N, tied)


class PhaseSolution(NamedTuple):
    phi1: np.ndarray
    phi2: np.ndarray
    psi: np.ndarray
    residual: float


def solve_phases(system: PhaseSystem, rcond: float = NULLSPACE_THRESHOLD) -> PhaseSolution:
    """Minimum-norm least-squares solution (Moore-Penrose pseudoinverse)."""
    A = system.reduced()
    v_free = np.linalg.pinv(A, rcond=rcond) @ system.rhs
    v = system.expand(v_free)
    N = system.n
    residual = float(np.linalg.norm(A @ v_free - system.rhs))
    return PhaseSolution(v[:N], v[N:2 * N], v[2 * N:], residual)


@dataclass
class NullspaceReport:
    dimension: int
    basis: np.ndarray
    contains_constants: bool
    constant_residual: float
    contains_affine: bool
    shape: tuple[int, int] = (0, 0)


def _gauge_directions(system: PhaseSystem):
    N = system.n
    one = np.ones(N)
    zero = np.zeros(N)
    ramp = np.arange(N, dtype=float)
    if system.tied:
        consts = [np.concatenate([one, one, -2 * one])]
        affine = np.concatenate([ramp, ramp, -ramp])
    else:
        consts = [np.concatenate([one, zero, -one]), np.concatenate([zero, one, -one])]
        affine = np.concatenate([ramp, ramp, -ramp])
    return consts, affine


def analyze_nullspace(system: PhaseSystem,
                      threshold: float = NULLSPACE_THRESHOLD) -> NullspaceReport:
    """Numerical null space of the reduced system and its gauge content.

    ``contains_constants`` tests the constant-phase directions
    (phi1 + c1, phi2 + c2, psi - c1 - c2); ``contains_affine`` tests the
    linear-phase direction (phi1 + a k, phi2 + a k, psi - a k) with plain
    indices 0..N-1, which over the reals is only a null direction when the
    support sums never wrap around N.
    """
    A = system.reduced()
    dim, basis = numeric_nullspace(A, threshold)
    mask = system.column_mask
    consts, affine = _gauge_directions(system)

    def out_of_span(direction):
        d = direction[mask]
        nd = np.linalg.norm(d)
        if nd == 0:
            return 0.0
        proj = basis @ (basis.T @ d) if dim else np.zeros_like(d)
        return float(np.linalg.norm(d - proj) / nd)

    const_res = max(out_of_span(d) for d in consts)
    aff_res = out_of_span(affine)
    return NullspaceReport(dim, basis, const_res < threshold, const_res,
                           aff_res < threshold, A.shape)


def assemble_signals(ps1, phi1, ps2, phi2):
    """Pulses with spectra ``sqrt(ps_i) * exp(1j * phi_i)``."""
    x1 = np.fft.ifft(np.sqrt(np.asarray(ps1, dtype=float)) * np.exp(1j * np.asarray(phi1)))
    x2 = np.fft.ifft(np.sqrt(np.asarray(ps2, dtype=float)) * np.exp(1j * np.asarray(phi2)))
    return x1, x2


def estimate_row_offsets(W: np.ndarray) -> np.ndarray:
    """Row phases that make ``W[(j+l) mod N, l]`` rank one.

    For ``W[k, l] = A[k-l] B[l] exp(1j psi[k])`` the 2x2 minors at adjacent
    (j, l) give second differences ``psi[k] - 2 psi[k+1] + psi[k+2]`` mod
    2 pi. They are integrated along each run of nonempty rows; the free
    slope is set by cyclic closure when every row is populated and to zero
    otherwise (both choices are shift gauges).
    """
    N = W.shape[0]
    j = np.arange(N)[:, None]
    ell = np.arange(N)[None, :]
    T = W[(j + ell) % N, ell]
    T11 = np.roll(T, (-1, -1), axis=(0, 1))
    T01 = np.roll(T, -1, axis=1)
    T10 = np.roll(T, -1, axis=0)
    Q = T * T11 * np.conj(T01 * T10)
    C = np.zeros(N, dtype=complex)
    np.add.at(C, ((j + ell) % N).ravel(), Q.ravel())
    scale = np.abs(Q).max()
    known = np.abs(C) > 1e-12 * scale if scale > 0 else np.zeros(N, bool)
    active = np.abs(W).sum(axis=1) > 0

    psi = np.zeros(N)
    if not active.any():
        return psi
    if active.all():
        start, length = 0, N
    else:
        start = int(np.flatnonzero(active & ~np.roll(active, 1))[0])
        length = 0
        while length < N and active[(start + length) % N]:
            length += 1
    delta = 0.0
    phase = 0.0
    for i in range(length):
        k = (start + i) % N
        psi[k] = phase
        phase += delta
        if known[k]:
            delta += np.angle(C[k])
    if length == N:
        # closure psi[start + N] == psi[start] mod 2 pi fixes the slope
        slope = -phase / N
        for i in range(N):
            psi[(start + i) % N] += slope * i
    return psi


def _active_arc(active: np.ndarray) -> tuple[list[int], bool]:
    N = active.size
    if active.all():
        return list(range(N)), True
    start = int(np.flatnonzero(active & ~np.roll(active, 1))[0])
    ks = []
    while len(ks) < N and active[(start + len(ks)) % N]:
        ks.append((start + len(ks)) % N)
    return ks, False


def resolve_row_conjugation(W: np.ndarray) -> np.ndarray:
    """Choose which rows of ``W`` to complex-conjugate.

    Single-pulse rows have mirror-symmetric moduli, so per-row retrieval
    cannot tell ``S[k, .]`` from its conjugate. With the right choice the
    adjacent 2x2 minors of the re-indexed matrix share one phase per row
    triple; the choice maximising ``sum_k |sum of minors|`` is found by
    dynamic programming over consecutive rows. Row ``ks[0]`` is never
    flipped (a global conjugation is itself a trivial ambiguity).
    """
    N = W.shape[0]
    active = np.abs(W).sum(axis=1) > 0
    flips = np.zeros(N, dtype=bool)
    if active.sum() < 3:
        return flips
    ks, cyclic = _active_arc(active)
    j = np.arange(N)[:, None]
    ell = np.arange(N)[None, :]
    T = W[(j + ell) % N, ell]
    a = T
    b = np.roll(T, (-1, -1), axis=(0, 1))
    c = np.roll(T, -1, axis=1)
    d = np.roll(T, -1, axis=0)
    rowidx = (j + ell) % N

    def triple_scores(k):
        sel = rowidx == k
        aa, bb, cc, dd = a[sel], b[sel], c[sel], d[sel]
        out = np.zeros((2, 2, 2))
        for f0 in (0, 1):
            for f1 in (0, 1):
                for f2 in (0, 1):
                    x = np.conj(aa) if f0 else aa
                    y = np.conj(bb) if f2 else bb
                    z = (np.conj(cc) * np.conj(dd)) if f1 else cc * dd
                    out[f0, f1, f2] = abs(np.sum(x * y * np.conj(z)))
        return out

    L = len(ks)
    n_triples = L if cyclic else L - 2
    scores = [triple_scores(ks[i]) for i in range(n_triples)]
    best_total, best_flags = -1.0, None
    for f1 in (0, 1):
        # dp over the state (flag[i], flag[i+1]); flag[0] = 0
        dp = {(0, f1): (0.0, [0, f1])}
        for i in range(L - 2):
            nxt = {}
            for (p, q), (val, path) in dp.items():
                for r in (0, 1):
                    v = val + scores[i][p, q, r]
                    if (q, r) not in nxt or v > nxt[(q, r)][0]:
                        nxt[(q, r)] = (v, path + [r])
            dp = nxt
        for (p, q), (val, path) in dp.items():
            if cyclic:
                val += scores[L - 2][p, q, path[0]] + scores[L - 1][q, path[0], path[1]]
            if val > best_total:
                best_total, best_flags = val, path
    for k, f in zip(ks, best_flags):
        flips[k] = bool(f)
    return flips


def solve_wrapped_phases(decomp: MagnitudePhaseDecomp, theta, tied: bool = False,
                         max_rounds: int = 50) -> tuple[PhaseSolution, PhaseSystem, int]:
    """Solve the phase system when the right-hand side is known only mod 2 pi.

    In ``tied`` mode rows are first conjugated where needed
    (:func:`resolve_row_conjugation`). A torus-consistent starting point
    comes from :func:`estimate_row_offsets` and a rank-one factorisation.
    The right-hand side is then re-wrapped to the nearest branch of the
    current prediction and re-solved until the branch choice no longer
    changes. Returns ``(solution, system, rounds)``.
    """
    N = decomp.n
    support = decomp.support
    theta = np.where(support, np.asarray(theta, dtype=float), 0.0)
    W = np.where(support, decomp.magnitude_product * np.exp(1j * theta), 0.0)
    if tied:
        flips = resolve_row_conjugation(W)
        theta = np.where(flips[:, None], -theta, theta)
        W = np.where(flips[:, None], np.conj(W), W)
    psi = estimate_row_offsets(W)
    j = np.arange(N)[:, None]
    ell = np.arange(N)[None, :]
    M = (W * np.exp(-1j * psi)[:, None])[(j + ell) % N, ell]
    u, _, vh = np.linalg.svd(M)
    phi1 = np.angle(u[:, 0])
    phi2 = phi1.copy() if tied else np.angle(vh[0])
    diff = (j - ell) % N
    pair = phi1[diff] + phi2[ell]
    psi = np.angle(np.sum(W * np.exp(-1j * pair), axis=1))
    pred = pair + psi[:, None]

    system = None
    branch_prev = None
    rounds = 0
    for rounds in range(1, max_rounds + 1):
        branch = np.where(support, np.round((pred - theta) / (2 * np.pi)), 0)
        system = build_phase_system(decomp, np.where(support, theta + 2 * np.pi * branch, np.nan),
                                    tied=tied)
        if branch_prev is not None and np.array_equal(branch, branch_prev):
            break
        branch_prev = branch
        sol = solve_phases(system)
        pred = sol.phi1[diff] + sol.phi2[ell] + sol.psi[:, None]
    sol = solve_phases(system)
    return sol, system, rounds


@dataclass
class GsOptions:
    max_iter: int = 3000
    tol: float = 1e-8
    restarts: int = 32


@dataclass
class UniquenessReport:
    mode: str
    n: int
    shg: bool
    bandlimit: BandlimitResult
    row_residuals: np.ndarray
    row_converged: np.ndarray
    system_residual: float
    system_shape: tuple[int, int]
    nullspace: NullspaceReport
    aligned_residual: float
    transform: AmbiguityTransform
    threshold: float
    estimate: tuple[np.ndarray, np.ndarray]
    fractional_alignment: bool = False
    notes: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.aligned_residual < self.threshold

    @property
    def hypothesis_violated(self) -> bool:
        return not self.bandlimit.satisfied

    @property
    def failed_rows(self) -> list[int]:
        return [int(k) for k in np.flatnonzero(~self.row_converged)]


def verify_uniqueness(x1, x2=None, mode: str = "oracle", opts: GsOptions | None = None,
                      seed: int = 0, strict: bool = False,
                      threshold: float | None = None) -> UniquenessReport:
    """Run the reduction pipeline on a known pair and compare with the truth.

    ``x2=None`` selects single-pulse (SHG) FROG, where the phase system ties
    the two spectral phases together. ``mode`` is ``"oracle"`` (row phases
    taken from the truth, offsets injected) or ``"gs"`` (row phases
    retrieved from the trace by alternating projections). The report passes
    when the ambiguity-aligned residual is below ``threshold`` (default 1e-8
    for oracle mode, 1e-4 for GS mode).
    """
    if mode not in ("oracle", "gs"):
        raise ValueError(f"unknown mode {mode!r}")
    opts = opts or GsOptions()
    x1 = as_pulse(x1)
    N = x1.size
    shg = x2 is None
    x2 = x1 if shg else as_pulse(x2, N)
    if threshold is None:
        threshold = 1e-8 if mode == "oracle" else 1e-4
    notes = []

    X1, X2 = np.fft.fft(x1), np.fft.fft(x2)
    band = check_bandlimit(X1)
    if not band.satisfied:
        if strict:
            raise ValueError("x1 violates the bandlimit hypothesis")
        notes.append("bandlimit hypothesis violated")

    g = TraceGeometry(N, 1, Kind.SHG if shg else Kind.BLIND_SHG)
    trace = synthesize_trace(x1, None if shg else x2, g)
    rows = rows_from_trace(trace)
    ps1, ps2 = np.abs(X1) ** 2, np.abs(X2) ** 2
    scale = max(rows.max(), 1e-300)

    if mode == "oracle":
        decomp = build_decomposition(ps1, ps2, phases=(np.angle(X1), np.angle(X2)))
        S = np.where(decomp.support, decomp.magnitude_product * np.exp(1j * decomp.phase_sum), 0)
        row_res = np.abs(np.abs(np.fft.fft(S, axis=1)) ** 2 - rows).max(axis=1) / scale
        row_ok = row_res < 1e-8
        P_tilde, _ = inject_row_offsets(decomp.phase_sum, seed=seed)
        system = build_phase_system(decomp, P_tilde, tied=shg)
        sol = solve_phases(system)
    else:
        decomp = build_decomposition(ps1, ps2)
        theta = np.zeros((N, N))
        row_res = np.zeros(N)
        row_ok = np.ones(N, dtype=bool)
        for k in range(N):
            if not decomp.support[k].any():
                continue
            r = retrieve_row_phases_gs(rows[k], decomp.magnitude_product[k],
                                       opts.max_iter, opts.tol, opts.restarts,
                                       seed=[seed, k])
            theta[k] = r.phases
            row_res[k] = r.residual
            row_ok[k] = r.converged
        sol, system, rounds = solve_wrapped_phases(decomp, theta, tied=shg)
        notes.append(f"branch refinement rounds: {rounds}")

    null = analyze_nullspace(system)
    est1, est2 = assemble_signals(ps1, sol.phi1, ps2, sol.phi2)
    fractional = shg and fractional_shift_is_ambiguity(X1, X2)
    t, resid = align_up_to_ambiguities(est1, est2, x1, x2, shg_mode=shg, fractional=fractional)
    return UniquenessReport(
        mode=mode, n=N, shg=shg, bandlimit=band,
        row_residuals=row_res, row_converged=row_ok,
        system_residual=sol.residual, system_shape=system.shape,
        nullspace=null, aligned_residual=resid, transform=t,
        threshold=threshold, estimate=(est1, est2),
        fractional_alignment=fractional, notes=notes,
    )
