"""Gaussian states as covariance matrices: propagation, phonon targets,
quadrature ellipses and pairwise entanglement."""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .cradle import cradle_basis
from .symplectic import VACUUM_VARIANCE, is_symplectic, symplectic_form

ENTANGLEMENT_THRESHOLD = 1e-9


def _check_covariance(sigma: np.ndarray) -> np.ndarray:
    sigma = np.asarray(sigma, dtype=float)
    if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1] or sigma.shape[0] % 2:
        raise ValueError(f"covariance must be square with even dimension, got shape {sigma.shape}")
    if np.max(np.abs(sigma - sigma.T), initial=0.0) > 1e-12 * max(1.0, np.max(np.abs(sigma))):
        raise ValueError("covariance matrix is not symmetric")
    return sigma


def vacuum_state(m: int) -> np.ndarray:
    if int(m) != m or m < 1:
        raise ValueError(f"number of modes must be positive, got {m!r}")
    return VACUUM_VARIANCE * np.eye(2 * int(m))


def apply_symplectic(sigma: np.ndarray, M: np.ndarray) -> np.ndarray:
    """Congruence ``M sigma M^T``."""
    sigma = np.asarray(sigma, dtype=float)
    M = np.asarray(M, dtype=float)
    if M.shape != sigma.shape:
        raise ValueError(f"dimension mismatch: state {sigma.shape} vs transformation {M.shape}")
    out = M @ sigma @ M.T
    return 0.5 * (out + out.T)


def symplectic_eigenvalues(sigma: np.ndarray) -> np.ndarray:
    """Williamson spectrum of ``sigma``, one value per mode, descending."""
    sigma = _check_covariance(sigma)
    m = sigma.shape[0] // 2
    ev = np.sort(np.abs(np.linalg.eigvals(symplectic_form(m) @ sigma)))[::-1]
    # eigenvalues come in +-i nu pairs
    return 0.5 * (ev[0::2] + ev[1::2])


def is_physical(sigma: np.ndarray, tol: float = 1e-9) -> bool:
    try:
        nu = symplectic_eigenvalues(sigma)
    except ValueError:
        return False
    return bool(np.all(nu >= VACUUM_VARIANCE - tol))


def site_to_cradle(sigma_site: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Split a chain state into its cradle-mode covariance and the 2x2 block of
    the total displacement."""
    sigma_site = _check_covariance(sigma_site)
    N = sigma_site.shape[0] // 2
    if N < 2:
        raise ValueError("a chain needs at least two oscillators")
    C = cradle_basis(N).phase_space_matrix
    full = C @ sigma_site @ C.T
    full = 0.5 * (full + full.T)
    return full[:-2, :-2].copy(), full[-2:, -2:].copy()


def cradle_to_site(sigma_cradle: np.ndarray, sum_mode_block: np.ndarray | None = None) -> np.ndarray:
    """Inverse of :func:`site_to_cradle`; the sum mode defaults to vacuum with no
    cross-correlations."""
    sigma_cradle = _check_covariance(sigma_cradle)
    n_modes = sigma_cradle.shape[0] // 2
    full = VACUUM_VARIANCE * np.eye(2 * n_modes + 2)
    full[:-2, :-2] = sigma_cradle
    if sum_mode_block is not None:
        full[-2:, -2:] = sum_mode_block
    C = cradle_basis(n_modes + 1).phase_space_matrix
    out = C.T @ full @ C
    return 0.5 * (out + out.T)


# --------------------------------------------------------------------------
# pseudo-phonon targets


def allowed_momenta(N: int) -> list[int]:
    """Crystal-momentum labels for a chain of ``N`` sites: ``-N/2+1 .. N/2``
    for even ``N`` and ``-(N-1)/2 .. (N-1)/2`` for odd ``N``."""
    if N % 2:
        return list(range(-(N - 1) // 2, (N - 1) // 2 + 1))
    return list(range(-N // 2 + 1, N // 2 + 1))


@dataclass(frozen=True)
class PhononTarget:
    N: int
    k1: int
    k2: int
    xi: float

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 2:
            raise ValueError(f"chain length must be at least 2, got {self.N!r}")
        ks = allowed_momenta(self.N)
        for name, k in (("k1", self.k1), ("k2", self.k2)):
            if int(k) != k:
                raise ValueError(f"{name} must be an integer, got {k!r}")
            if k == 0:
                raise ValueError(f"{name}=0 is the total displacement, which cannot be driven")
            if k not in ks:
                raise ValueError(f"{name}={k} outside the allowed range {ks[0]}..{ks[-1]} for N={self.N}")
        if not (math.isfinite(self.xi) and self.xi >= 0):
            raise ValueError(f"squeezing parameter must be finite and non-negative, got {self.xi!r}")


def phonon_site_symplectic(t: PhononTarget) -> np.ndarray:
    """Site-basis symplectic matrix for the phonon-pair squeezing
    ``a_k1 -> cosh(xi) a_k1 - i sinh(xi) a_k2^dag`` (and ``1 <-> 2``).

    The Bogoliubov map ``a -> alpha a + beta a^dag`` on site operators has
    ``alpha = F^dag A F`` and ``beta = F^dag B conj(F)`` where
    ``F[k, n] = exp(2 pi i k n / N) / sqrt(N)`` is the phonon transform.
    """
    N = t.N
    ks = allowed_momenta(N)
    sites = np.arange(1, N + 1)
    F = np.exp(2j * np.pi * np.outer(ks, sites) / N) / math.sqrt(N)
    i1, i2 = ks.index(t.k1), ks.index(t.k2)
    ch, sh = math.cosh(t.xi), math.sinh(t.xi)
    A = np.eye(N, dtype=complex)
    B = np.zeros((N, N), dtype=complex)
    if i1 == i2:
        A[i1, i1] = ch
        B[i1, i1] = -1j * sh
    else:
        A[i1, i1] = A[i2, i2] = ch
        B[i1, i2] = B[i2, i1] = -1j * sh
    alpha = F.conj().T @ A @ F
    beta = F.conj().T @ B @ F.conj()
    # x' = Re(X) x - Im(Y) p ,  p' = Im(X) x + Re(Y) p
    X, Y = alpha + beta, alpha - beta
    M = np.empty((2 * N, 2 * N))
    M[0::2, 0::2] = X.real
    M[0::2, 1::2] = -Y.imag
    M[1::2, 0::2] = X.imag
    M[1::2, 1::2] = Y.real
    return M


def phonon_target_symplectic(t: PhononTarget) -> np.ndarray:
    """The phonon-pair squeezer restricted to the ``N-1`` cradle modes."""
    M = phonon_site_symplectic(t)
    if not is_symplectic(M, 1e-10):
        raise RuntimeError("phonon transformation failed its symplectic certificate")
    C = cradle_basis(t.N).phase_space_matrix
    Tc = C @ M @ C.T
    eye = np.eye(2 * t.N)
    if max(np.max(np.abs(Tc[-2:] - eye[-2:])), np.max(np.abs(Tc[:, -2:] - eye[:, -2:]))) > 1e-10:
        raise RuntimeError("phonon transformation couples to the total displacement")
    return Tc[:-2, :-2].copy()


# --------------------------------------------------------------------------
# ellipses and entanglement


@dataclass(frozen=True)
class EllipseReport:
    pair: tuple[int, int]
    kind: str  # "sum" or "difference"
    semi_major: float
    semi_minor: float
    angle: float


def _n_sites(sigma: np.ndarray) -> int:
    return sigma.shape[0] // 2


def _check_sites(sigma: np.ndarray, *sites: int) -> None:
    N = _n_sites(sigma)
    for s in sites:
        if int(s) != s or not 1 <= s <= N:
            raise ValueError(f"site {s!r} outside 1..{N}")


def _block(sigma: np.ndarray, n: int, m: int) -> np.ndarray:
    return sigma[2 * n - 2:2 * n, 2 * m - 2:2 * m]


def ellipse_of(cov2: np.ndarray, pair: tuple[int, int], kind: str) -> EllipseReport:
    """Semi-axes and orientation of the uncertainty ellipse of a 2x2 covariance."""
    cov2 = 0.5 * (cov2 + cov2.T)
    w, v = np.linalg.eigh(cov2)
    w = np.clip(w, 0.0, None)
    major, minor = math.sqrt(w[1]), math.sqrt(w[0])
    if w[1] - w[0] <= 1e-12 * max(w[1], 1e-300):
        angle = 0.0
    else:
        angle = math.atan2(v[1, 1], v[0, 1])
        if angle > math.pi / 2:
            angle -= math.pi
        elif angle <= -math.pi / 2:
            angle += math.pi
    return EllipseReport(pair, kind, major, minor, angle)


def pair_ellipses(sigma_site: np.ndarray, n: int, m: int):
    """Ellipses of ``(x_n + x_m, p_n + p_m)/sqrt(2)`` and of the difference.

    For ``n == m`` the single-site ellipse is returned and the difference is
    ``None``.
    """
    sigma_site = _check_covariance(sigma_site)
    _check_sites(sigma_site, n, m)
    if n == m:
        return ellipse_of(_block(sigma_site, n, n), (n, n), "sum"), None
    nn, mm = _block(sigma_site, n, n), _block(sigma_site, m, m)
    cross = _block(sigma_site, n, m) + _block(sigma_site, m, n)
    return (
        ellipse_of(0.5 * (nn + mm + cross), (n, m), "sum"),
        ellipse_of(0.5 * (nn + mm - cross), (n, m), "difference"),
    )


def all_ellipses(sigma_site: np.ndarray) -> list[EllipseReport]:
    """Sum ellipses for every ``n <= m`` followed by difference ellipses for ``n < m``."""
    N = _n_sites(sigma_site)
    sums, diffs = [], []
    for n in range(1, N + 1):
        for m in range(n, N + 1):
            s, d = pair_ellipses(sigma_site, n, m)
            sums.append(s)
            if d is not None:
                diffs.append(d)
    return sums + diffs


def two_site_covariance(sigma_site: np.ndarray, n: int, m: int) -> np.ndarray:
    idx = [2 * n - 2, 2 * n - 1, 2 * m - 2, 2 * m - 1]
    return sigma_site[np.ix_(idx, idx)]


def log_negativity(sigma_site: np.ndarray, n: int, m: int) -> float:
    """Logarithmic negativity of the reduced state of sites ``n`` and ``m``."""
    sigma_site = _check_covariance(sigma_site)
    _check_sites(sigma_site, n, m)
    if n == m:
        raise ValueError("log_negativity needs two distinct sites")
    flip = np.diag([1.0, 1.0, 1.0, -1.0])
    pt = flip @ two_site_covariance(sigma_site, n, m) @ flip
    nu_minus = symplectic_eigenvalues(pt)[-1]
    # roundoff puts pure separable states a hair below the vacuum value
    if 2.0 * nu_minus >= 1.0 - 1e-12:
        return 0.0
    return -math.log(2.0 * nu_minus)


def negativity_table(sigma_site: np.ndarray) -> dict[tuple[int, int], float]:
    sigma_site = _check_covariance(sigma_site)
    N = _n_sites(sigma_site)
    return {(n, m): log_negativity(sigma_site, n, m) for n, m in combinations(range(1, N + 1), 2)}


def entangled_pair_count(sigma_site: np.ndarray, threshold: float = ENTANGLEMENT_THRESHOLD) -> int:
    return sum(1 for v in negativity_table(sigma_site).values() if v > threshold)


def two_mode_squeezed_state(r: float) -> np.ndarray:
    """Standard-form two-mode squeezed vacuum of two sites."""
    c, s = math.cosh(2 * r), math.sinh(2 * r)
    Z = np.diag([1.0, -1.0])
    return 0.5 * np.block([[c * np.eye(2), s * Z], [s * Z, c * np.eye(2)]])
