"""Brute-force reference computations.

Nothing here may call into :mod:`froglab.forward` or use the FFT; the point
of these routines is to check the fast paths by an independent route.
"""

from __future__ import annotations

import functools
import itertools
import math

import numpy as np

from .core import FrogTrace, Kind, TraceGeometry, as_pulse

MAX_SEARCH_N = 6
MAX_SEARCH_Q = 16


@functools.lru_cache(maxsize=128)
def _dft_matrix(N: int) -> np.ndarray:
    k = np.arange(N)
    # reduce k*n mod N before scaling so large products stay exact
    W = np.exp(-2j * math.pi * (np.outer(k, k) % N) / N)
    W.flags.writeable = False
    return W


def _direct_gate(x1, x2, kind: Kind, j) -> np.ndarray:
    """Gate products; ``j`` holds the shifted sample index, one column per delay."""
    a = x1[:, None]
    if kind in (Kind.BLIND_SHG, Kind.SHG):
        return a * x2[j]
    if kind is Kind.THG:
        return a * a * x1[j]
    if kind is Kind.PG:
        return a * np.sqrt(x1[j].real**2 + x1[j].imag**2)
    return a * (np.cos(x2[j].real) + 1j * np.sin(x2[j].real))


def direct_trace(x1, x2, g: TraceGeometry) -> FrogTrace:
    """Trace by literal evaluation of the gate and the DFT sum.

    The gate shift for column ``m`` is ``delay_sign * m * L``; for THG, PG and
    CRAB the geometry already carries ``delay_sign = -1``.
    """
    N = g.n
    x1 = as_pulse(x1, N)
    if g.kind is Kind.SHG:
        if x2 is not None and not np.array_equal(as_pulse(x2, N), x1):
            raise ValueError("SHG FROG requires x2 == x1")
        x2 = x1
    elif x2 is None:
        if g.kind is Kind.BLIND_SHG or g.kind is Kind.CRAB:
            raise ValueError(f"{g.kind.value} requires a second pulse")
        x2 = x1
    x2 = as_pulse(x2, N)
    shifts = g.delay_sign * g.l * np.arange(g.m_count)
    j = (np.arange(N)[:, None] + shifts[None, :]) % N
    Y = _dft_matrix(N) @ _direct_gate(x1, x2, g.kind, j)
    return FrogTrace(Y.real**2 + Y.imag**2, g)


def exhaustive_row_search(row_magnitudes, row_spectrum, q: int = 8,
                          tol: float = 1e-9) -> list[np.ndarray]:
    """All grid-phase signals matching both magnitude constraints.

    Every assignment of phases ``2*pi*i/q`` to the nonzero entries of
    ``row_magnitudes`` is tried; an assignment matches when its Fourier
    magnitudes agree with ``sqrt(row_spectrum)`` to within ``tol``
    (max-abs). Returns the matching complex signals.
    """
    mags = np.asarray(row_magnitudes, dtype=float)
    target = np.sqrt(np.clip(np.asarray(row_spectrum, dtype=float), 0, None))
    N = mags.size
    if N > MAX_SEARCH_N or q > MAX_SEARCH_Q:
        raise ValueError(f"search budget exceeded (N={N} > {MAX_SEARCH_N} "
                         f"or q={q} > {MAX_SEARCH_Q})")
    if target.size != N:
        raise ValueError("magnitude and spectrum lengths differ")
    support = np.flatnonzero(mags > 0)
    W = _dft_matrix(N)
    grid = np.exp(2j * math.pi * np.arange(q) / q)
    matches = []
    for combo in itertools.product(range(q), repeat=support.size):
        u = np.zeros(N, dtype=complex)
        u[support] = mags[support] * grid[list(combo)]
        if np.max(np.abs(np.abs(W @ u) - target)) <= tol:
            matches.append(u)
    return matches


def equivalent_up_to_trivial(u, v, tol: float = 1e-8, allow_reflection: bool = True) -> bool:
    """Whether ``v`` equals ``u`` up to a global phase or a conjugate reflection.

    Reflections ``conj(u[(c - n) mod N])`` about every centre ``c`` are
    tried: with the temporal magnitudes fixed, only centres that map the
    magnitude pattern onto itself can produce a match.
    """
    u = np.asarray(u, dtype=complex)
    v = np.asarray(v, dtype=complex)
    N = u.size
    scale = max(np.linalg.norm(u), 1e-300)
    candidates = [u]
    if allow_reflection:
        n = np.arange(N)
        candidates += [np.conj(u[(c - n) % N]) for c in range(N)]
    for c in candidates:
        ip = np.vdot(c, v)
        phase = ip / abs(ip) if abs(ip) > 0 else 1.0
        if np.linalg.norm(v - phase * c) <= tol * scale:
            return True
    return False


def inequivalent_pairs(matches, tol: float = 1e-8) -> list[tuple[int, int]]:
    """Index pairs of matches that are not related by a trivial ambiguity."""
    bad = []
    for i, j in itertools.combinations(range(len(matches)), 2):
        if not equivalent_up_to_trivial(matches[i], matches[j], tol):
            bad.append((i, j))
    return bad


def numeric_nullspace(matrix, threshold: float = 1e-10) -> tuple[int, np.ndarray]:
    """Numerical null space by singular-value thresholding.

    Right singular vectors whose singular value is at most
    ``threshold * sigma_max`` (plus those beyond the row count) are returned
    as the columns of an orthonormal basis.
    """
    A = np.asarray(matrix.toarray() if hasattr(matrix, "toarray") else matrix, dtype=float)
    if A.size == 0:
        raise ValueError("empty matrix")
    _, s, vh = np.linalg.svd(A, full_matrices=True)
    cutoff = threshold * s[0] if s.size else 0.0
    rank = int(np.sum(s > cutoff))
    basis = vh[rank:].T.copy()
    return basis.shape[1], basis
