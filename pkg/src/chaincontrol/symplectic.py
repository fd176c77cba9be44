"""Real symplectic matrices and the two-dimensional group Sp(2, R).

Quadratures are ordered ``(x1, p1, x2, p2, ...)`` and the symplectic form is
the block-diagonal matrix built from ``[[0, 1], [-1, 0]]``.  The vacuum has
variance 1/2 in every quadrature.  Every other module in the package uses
this convention and no function accepts an alternative ordering.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TOL_SYM = 1e-9
TOL_RECON = 1e-9
VACUUM_VARIANCE = 0.5

S1 = np.array([[1.0, 0.0], [0.0, -1.0]])
S2 = np.array([[0.0, 1.0], [1.0, 0.0]])
S3 = np.array([[0.0, -1.0], [1.0, 0.0]])
SP2_GENERATORS = (S1, S2, S3)
_GEN_STACK = np.stack(SP2_GENERATORS)

# below this |delta| the exponential coefficients come from their Taylor series
_SERIES_CUTOFF = 1e-12
# the derivative coefficient cancels badly far earlier, so it switches sooner
_DSERIES_CUTOFF = 1e-3

Triple = tuple[float, float, float]


@dataclass(frozen=True)
class QuadratureConvention:
    """The single phase-space convention used across the package."""

    ordering: str = "interleaved (x1, p1, x2, p2, ...)"
    vacuum_variance: float = VACUUM_VARIANCE

    def form_matrix(self, m: int) -> np.ndarray:
        return symplectic_form(m)


CONVENTION = QuadratureConvention()


def symplectic_form(m: int) -> np.ndarray:
    """Return the ``2m x 2m`` symplectic form for ``m`` modes."""
    if int(m) != m or m < 1:
        raise ValueError(f"number of modes must be a positive integer, got {m!r}")
    return np.kron(np.eye(int(m)), np.array([[0.0, 1.0], [-1.0, 0.0]]))


def _check_square_even(M: np.ndarray) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    if M.shape[0] % 2:
        raise ValueError(f"phase-space matrices have even dimension, got {M.shape[0]}")
    return M


def symplectic_defect(M: np.ndarray) -> float:
    """Max-norm of ``M^T J M - J``."""
    M = _check_square_even(M)
    J = symplectic_form(M.shape[0] // 2)
    return float(np.max(np.abs(M.T @ J @ M - J)))


def is_symplectic(M: np.ndarray, tol: float = TOL_SYM) -> bool:
    """True when ``M^T J M`` matches ``J`` to ``tol`` in the max-norm."""
    return symplectic_defect(M) <= tol


def require_symplectic(M: np.ndarray, tol: float = TOL_SYM, what: str = "matrix") -> np.ndarray:
    M = _check_square_even(M)
    defect = symplectic_defect(M)
    if not defect <= tol:
        raise ValueError(f"{what} is not symplectic (defect {defect:.3e} > {tol:.1e})")
    return M


def _exp_coeffs(delta):
    """Coefficients ``(c, s)`` with ``exp(X) = c I + s X`` whenever ``X @ X = delta I``.

    ``c = cosh(sqrt(delta))`` and ``s = sinh(sqrt(delta)) / sqrt(delta)``.  Both
    are entire functions of ``delta``, so the negative (elliptic) branch needs
    no special casing beyond the choice of cos/sin.
    """
    if abs(delta) < _SERIES_CUTOFF:
        return 1.0 + delta / 2.0 + delta * delta / 24.0, 1.0 + delta / 6.0 + delta * delta / 120.0
    if delta > 0:
        w = math.sqrt(delta)
        return math.cosh(w), math.sinh(w) / w
    w = math.sqrt(-delta)
    return math.cos(w), math.sin(w) / w


def _exp_coeffs_grad(delta):
    """``(c, s, dc/ddelta, ds/ddelta)`` for the coefficients of :func:`_exp_coeffs`."""
    c, s = _exp_coeffs(delta)
    dc = s / 2.0
    if abs(delta) < _DSERIES_CUTOFF:
        ds = 1.0 / 6.0 + delta / 60.0 + delta**2 / 1680.0 + delta**3 / 90720.0
    else:
        ds = (c - s) / (2.0 * delta)
    return c, s, dc, ds


def sp2_algebra(alpha: float, beta: float, gamma: float) -> np.ndarray:
    """The generator ``alpha*s1 + beta*s2 + gamma*s3``."""
    return np.array([[alpha, beta - gamma], [beta + gamma, -alpha]], dtype=float)


def sp2_exp(alpha: float, beta: float, gamma: float) -> np.ndarray:
    """Closed-form ``exp(alpha*s1 + beta*s2 + gamma*s3)``.

    The generator ``X`` squares to ``delta * I`` with
    ``delta = alpha**2 + beta**2 - gamma**2`` (Cayley-Hamilton), so the
    exponential collapses to ``c(delta) I + s(delta) X``.
    """
    c, s = _exp_coeffs(alpha * alpha + beta * beta - gamma * gamma)
    return np.array([[c + s * alpha, s * (beta - gamma)], [s * (beta + gamma), c - s * alpha]])


def sp2_exp_jacobian(alpha: float, beta: float, gamma: float) -> tuple[np.ndarray, np.ndarray]:
    """Return ``exp(X)`` and its three partial derivatives, stacked as ``(3, 2, 2)``."""
    X = sp2_algebra(alpha, beta, gamma)
    c, s, dc, ds = _exp_coeffs_grad(alpha * alpha + beta * beta - gamma * gamma)
    E = s * X
    E[0, 0] += c
    E[1, 1] += c
    common = ds * X
    common[0, 0] += dc
    common[1, 1] += dc
    ddelta = np.array([2.0 * alpha, 2.0 * beta, -2.0 * gamma])
    grads = ddelta[:, None, None] * common + s * _GEN_STACK
    return E, grads


def rotation(theta: float) -> np.ndarray:
    """``exp(theta * s3)``, a counter-clockwise phase-space rotation."""
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def squeeze(r: float) -> np.ndarray:
    return np.diag([math.exp(r), math.exp(-r)])


def sp2_inverse(S: np.ndarray) -> np.ndarray:
    """Exact inverse of a 2x2 matrix with unit determinant."""
    return np.array([[S[1, 1], -S[0, 1]], [-S[1, 0], S[0, 0]]])


def sp2_coordinates(X: np.ndarray) -> Triple:
    """Coordinates ``(alpha, beta, gamma)`` of a traceless 2x2 matrix."""
    return (float(X[0, 0]), float(0.5 * (X[0, 1] + X[1, 0])), float(0.5 * (X[1, 0] - X[0, 1])))


def _principal_log(S: np.ndarray) -> Triple:
    t = 0.5 * (S[0, 0] + S[1, 1])
    if t >= 1.0:
        delta = math.acosh(t) ** 2
    else:
        delta = -math.acos(max(t, -1.0)) ** 2
    _, s = _exp_coeffs(delta)
    return sp2_coordinates((S - t * np.eye(2)) / s)


def sp2_log(S: np.ndarray) -> tuple[Triple, ...]:
    """Exponent triples whose exponentials multiply (left to right) to ``S``.

    A single triple is returned whenever ``trace(S) > -2``.  Otherwise no real
    logarithm exists and ``S`` is split as ``rotation(+-pi/2) @ W`` with ``W``
    chosen so that ``trace(W) >= 0``; the result then holds two triples.
    """
    S = require_symplectic(S, what="S")
    if S.shape != (2, 2):
        raise ValueError(f"sp2_log expects a 2x2 matrix, got shape {S.shape}")
    if np.trace(S) > -2.0 + 1e-12:
        return (_principal_log(S),)
    # trace(R(-pi/2) S) = S10 - S01 and trace(R(pi/2) S) = S01 - S10; one is >= 0
    sign = 1.0 if S[1, 0] - S[0, 1] >= 0 else -1.0
    W = rotation(-sign * math.pi / 2) @ S
    return ((0.0, 0.0, sign * math.pi / 2), _principal_log(W))


def _wrap_angle(theta: float) -> float:
    """Map an angle to ``(-pi, pi]``."""
    wrapped = math.remainder(theta, 2.0 * math.pi)
    return math.pi if wrapped <= -math.pi else wrapped


def euler_decompose(S: np.ndarray) -> tuple[float, float, float]:
    """Rotation-squeeze-rotation form ``S = rotation(t1) @ squeeze(r) @ rotation(t2)``.

    Writing ``S = p I + q s3 + u s1 + v s2`` splits it into a scaled rotation
    of size ``rho_p = hypot(p, q) = cosh r`` and a scaled reflection of size
    ``rho_m = hypot(u, v) = sinh r``.  The rotation angle gives ``t1 + t2`` and
    the reflection angle gives ``t1 - t2``.

    ``r >= 0`` always; for ``r == 0`` the whole rotation goes into ``t1``.
    Angles lie in ``(-pi, pi]``.
    """
    S = require_symplectic(S, what="S")
    if S.shape != (2, 2):
        raise ValueError(f"euler_decompose expects a 2x2 matrix, got shape {S.shape}")
    p = 0.5 * (S[0, 0] + S[1, 1])
    q = 0.5 * (S[1, 0] - S[0, 1])
    u = 0.5 * (S[0, 0] - S[1, 1])
    v = 0.5 * (S[0, 1] + S[1, 0])
    rho_p, rho_m = math.hypot(p, q), math.hypot(u, v)
    phi = math.atan2(q, p)
    if rho_m <= 1e-15 * rho_p:
        return _wrap_angle(phi), 0.0, 0.0
    r = math.log(rho_p + rho_m)
    psi = math.atan2(v, u)
    theta1 = _wrap_angle(0.5 * (phi + psi))
    theta2 = _wrap_angle(phi - theta1)
    return theta1, r, theta2


def random_sp2(rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    """``sp2_exp`` of an exponent triple drawn uniformly from ``[-scale, scale]^3``."""
    return sp2_exp(*rng.uniform(-scale, scale, size=3))
