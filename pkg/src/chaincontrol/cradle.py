"""Cradle-mode basis, embedded nearest-neighbour couplings and Lie closure.

Cradle mode ``j`` (``1 <= j < N``) moves the first ``j`` oscillators in phase
with amplitude ``1/sqrt(j(j+1))`` and oscillator ``j+1`` against them with
amplitude ``sqrt(j/(j+1))``.  Row ``N`` of the basis is the total displacement,
which no spring can touch.  A spring between oscillators ``n`` and ``n+1``
acting with ``S`` on their relative coordinate shows up in the cradle basis as
``D_n(S)``: it touches only cradle modes ``n-1`` and ``n``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .symplectic import SP2_GENERATORS, require_symplectic

RANK_RTOL = 1e-9


@dataclass(frozen=True)
class CradleBasis:
    n_oscillators: int
    position_matrix: np.ndarray = field(repr=False)
    phase_space_matrix: np.ndarray = field(repr=False)

    @property
    def n_modes(self) -> int:
        """Number of controllable cradle modes, ``N - 1``."""
        return self.n_oscillators - 1


def cradle_basis(N: int) -> CradleBasis:
    """Orthogonal cradle basis for a chain of ``N`` oscillators."""
    if int(N) != N or N < 2:
        raise ValueError(f"a chain needs at least two oscillators, got N={N!r}")
    N = int(N)
    C = np.zeros((N, N))
    for j in range(1, N):
        C[j - 1, :j] = 1.0 / math.sqrt(j * (j + 1))
        C[j - 1, j] = -math.sqrt(j / (j + 1))
    C[N - 1, :] = 1.0 / math.sqrt(N)
    return CradleBasis(N, C, np.kron(C, np.eye(2)))


def _pair_weights(n: int) -> tuple[float, float]:
    """Components ``(a, b)`` of the relative coordinate of sites ``n, n+1``
    along cradle modes ``n-1`` and ``n``.

    ``D_n(S) = 1 + (u u^T) kron (S - 1)`` on those two modes with ``u = (a, b)``.
    """
    return -math.sqrt((n - 1) / (2.0 * n)), math.sqrt((n + 1) / (2.0 * n))


def coupling_weights(n: int) -> np.ndarray:
    """The 2x2 projector ``u u^T`` that places an inner action on modes ``n-1, n``."""
    a, b = _pair_weights(n)
    return np.array([[a * a, a * b], [a * b, b * b]])


def active_slice(n: int) -> slice:
    """Rows/columns (0-based) touched by a coupling at site ``n``."""
    return slice(0, 2) if n == 1 else slice(2 * n - 4, 2 * n)


def coupling_block(n: int, S: np.ndarray) -> np.ndarray:
    """The nontrivial block of ``D_n(S)``: ``S`` itself for ``n = 1``, else 4x4."""
    S = np.asarray(S)
    if n == 1:
        return S.copy()
    c = math.sqrt(n * n - 1) / (2 * n)
    lo, hi = (n - 1) / (2 * n), (n + 1) / (2 * n)
    out = np.empty((4, 4))
    out[:2, :2] = lo * S
    out[2:, 2:] = hi * S
    out[:2, 2:] = -c * S
    out[2:, :2] = -c * S
    out[0, 0] += hi
    out[1, 1] += hi
    out[2, 2] += lo
    out[3, 3] += lo
    out[0, 2] += c
    out[1, 3] += c
    out[2, 0] += c
    out[3, 1] += c
    return out


def coupling_matrix(n: int, S: np.ndarray, n_modes: int) -> np.ndarray:
    """``D_n(S)`` as a dense ``2 n_modes`` square matrix (no validation)."""
    M = np.eye(2 * n_modes)
    sl = active_slice(n)
    M[sl, sl] = coupling_block(n, S)
    return M


@dataclass(frozen=True)
class EmbeddedCoupling:
    site: int
    inner: np.ndarray = field(repr=False)
    matrix: np.ndarray = field(repr=False)


def _check_site(n: int, n_modes: int) -> int:
    if int(n) != n or not 1 <= n <= n_modes:
        raise ValueError(f"site {n!r} outside 1..{n_modes}")
    return int(n)


def embed_coupling(n: int, S: np.ndarray, N: int) -> EmbeddedCoupling:
    """Embed the inner action ``S`` of spring ``n`` into the cradle basis of an
    ``N``-oscillator chain."""
    if N < 2:
        raise ValueError(f"a chain needs at least two oscillators, got N={N!r}")
    n = _check_site(n, N - 1)
    S = require_symplectic(S, what="inner action")
    if S.shape != (2, 2):
        raise ValueError(f"inner action must be 2x2, got shape {S.shape}")
    return EmbeddedCoupling(n, S.copy(), coupling_matrix(n, S, N - 1))


def _check_in_span(s: np.ndarray) -> None:
    # span{s1, s2, s3} is exactly the traceless 2x2 matrices
    if abs(s[0, 0] + s[1, 1]) > 1e-12:
        raise ValueError("matrix lies outside the span of the sp(2) generators")


def generator(n: int, s: np.ndarray, n_modes: int) -> np.ndarray:
    """``d_n(s) = log D_n(exp(s))`` on ``n_modes`` cradle modes.

    For ``n > 1`` the active block is ``(u u^T) kron s``.
    """
    n = _check_site(n, n_modes)
    s = np.asarray(s, dtype=float)
    if s.shape != (2, 2):
        raise ValueError(f"generator argument must be 2x2, got shape {s.shape}")
    _check_in_span(s)
    G = np.zeros((2 * n_modes, 2 * n_modes))
    sl = active_slice(n)
    G[sl, sl] = s if n == 1 else np.kron(coupling_weights(n), s)
    return G


def coupling_commutator(i: int, j: int, n: int) -> np.ndarray:
    """Active 4x4 block of ``[s_i on mode n-1, d_n(s_j)]``.

    Only mode ``n-1`` carries the first generator.  The result is
    ``[[w [s_i, s_j], -c s_i s_j], [c s_j s_i, 0]]`` with
    ``w = (n-1)/2n`` and ``c = sqrt(n^2-1)/2n``.
    """
    if i not in (1, 2, 3) or j not in (1, 2, 3):
        raise ValueError(f"generator indices must be in 1..3, got ({i}, {j})")
    if int(n) != n or n < 2:
        raise ValueError(f"site must be at least 2, got {n!r}")
    si, sj = SP2_GENERATORS[i - 1], SP2_GENERATORS[j - 1]
    w = (n - 1) / (2 * n)
    c = math.sqrt(n * n - 1) / (2 * n)
    return np.block([[w * (si @ sj - sj @ si), -c * (si @ sj)], [c * (sj @ si), np.zeros((2, 2))]])


def chain_generators(n_modes: int) -> list[np.ndarray]:
    """All ``d_n(s_i)`` for sites ``1..n_modes``."""
    return [generator(n, s, n_modes) for n in range(1, n_modes + 1) for s in SP2_GENERATORS]


def _orthonormal_extend(basis: list[np.ndarray], candidates, rtol: float) -> list[np.ndarray]:
    """Append the parts of ``candidates`` not already spanned by ``basis``
    (modified Gram-Schmidt, two passes)."""
    added = []
    for v in candidates:
        norm0 = np.linalg.norm(v)
        if norm0 == 0.0:
            continue
        w = v.copy()
        for _ in range(2):
            for b in basis:
                w -= (b @ w) * b
            for b in added:
                w -= (b @ w) * b
        norm = np.linalg.norm(w)
        if norm > rtol * norm0:
            added.append(w / norm)
    return added


@dataclass
class LieClosure:
    basis: np.ndarray  # rows are orthonormal vectorized algebra elements
    rounds: int
    growth: list[int]

    @property
    def dimension(self) -> int:
        return self.basis.shape[0]


def lie_closure(generators: list[np.ndarray], rtol: float = RANK_RTOL, max_rounds: int = 200) -> LieClosure:
    """Span of all nested commutators of ``generators``.

    Each round brackets every generator with every element found so far and
    keeps the new directions.  The loop stops after a round that adds nothing,
    so ``growth`` always ends with a zero.
    """
    dim = generators[0].shape[0]
    gens = [np.asarray(g, dtype=float) for g in generators]
    basis = _orthonormal_extend([], [g.ravel() for g in gens], rtol)
    frontier = list(basis)
    growth = [len(basis)]
    rounds = 0
    while frontier and rounds < max_rounds:
        rounds += 1
        cands = []
        for f in frontier:
            F = f.reshape(dim, dim)
            cands.extend((g @ F - F @ g).ravel() for g in gens)
        frontier = _orthonormal_extend(basis, cands, rtol)
        basis.extend(frontier)
        growth.append(len(frontier))
    return LieClosure(np.array(basis), rounds, growth)


def algebra_rank(vectors: np.ndarray, rtol: float = RANK_RTOL) -> int:
    """Number of singular values above ``rtol`` times the largest."""
    sv = np.linalg.svd(np.atleast_2d(vectors), compute_uv=False)
    if sv.size == 0 or sv[0] == 0.0:
        return 0
    return int(np.sum(sv > rtol * sv[0]))


def controllability_dimension(n_modes: int) -> int:
    """Dimension of the Lie algebra generated by every ``d_n(s_i)``."""
    if int(n_modes) != n_modes or n_modes < 1:
        raise ValueError(f"number of cradle modes must be positive, got {n_modes!r}")
    closure = lie_closure(chain_generators(int(n_modes)))
    return algebra_rank(closure.basis)

