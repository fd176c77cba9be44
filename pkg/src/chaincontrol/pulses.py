"""Lowering coupling steps to spring-drive schedules and checking them against
the equations of motion.

Units: the bare frequency is 1, so strengths are in units of omega and times
in units of 1/omega.  A spring between sites ``n`` and ``n+1`` contributes
``Omega(t) (x_n - x_{n+1})**2`` to the Hamiltonian, which makes the relative
coordinate ``r = (x_n - x_{n+1})/sqrt(2)`` obey ``r'' = -(1 + 4 Omega) r``.

All step targets live in the frame co-rotating at omega.  Segment durations
are whole multiples of pi, so the free evolution between segments is ``+-1``
and the drive phase is referenced to each segment's own start.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from .symplectic import (
    S1,
    S2,
    S3,
    euler_decompose,
    is_symplectic,
    rotation,
    sp2_coordinates,
    sp2_exp,
    sp2_log,
    symplectic_defect,
)
from .synthesis import CouplingStep

log = logging.getLogger(__name__)

DEFAULT_RWA_RATIO = 0.01
MAX_RWA_RATIO = 0.02
DEFAULT_DT = 2.0 * math.pi / 500
MAX_DT = 2.0 * math.pi / 200
# parametric modulation depth; above 2 the averaged drive squeezes
MODULATION_DEPTH = 4.0
# fraction of the strength ceiling used by the first guess, leaving the fit room
STRENGTH_HEADROOM = 0.8
# a static phase advance below this is wrapped by a full turn
MIN_STATIC_ANGLE = 0.05
COMPILE_RETRIES = 4
SYMPLECTIC_WARN = 1e-6
SYMPLECTIC_ABORT = 1e-4

# Averaged rotating-frame generator of one spring, per unit mean strength:
#   -(STATIC_PHASE_RATE * s3 + SQUEEZE_RATE * A * (sin(phi) s1 + cos(phi) s2))
# Fixed from `calibrate()` at mean strength 0.01 on a two-site chain.
STATIC_PHASE_RATE = 2.0
SQUEEZE_RATE = 1.0
CALIBRATION_STRENGTH = 0.01
CALIBRATION_PERIODS = 20


class IntegrationError(RuntimeError):
    """Raised when RK4 drift breaks symplecticity beyond the abort budget."""


@dataclass(frozen=True)
class PulseSegment:
    site: int
    mean_strength: float
    modulation_depth: float
    modulation_phase: float
    duration: float

    def __post_init__(self):
        if int(self.site) != self.site or self.site < 1:
            raise ValueError(f"segment site must be a positive integer, got {self.site!r}")
        for name in ("mean_strength", "modulation_depth", "duration"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be finite and non-negative, got {v!r}")
        if not (-math.pi < self.modulation_phase <= math.pi):
            raise ValueError(f"modulation phase {self.modulation_phase!r} outside (-pi, pi]")

    def strength(self, t: float) -> float:
        """Spring strength ``t`` time units after the segment starts."""
        return self.mean_strength * (1.0 + self.modulation_depth * math.cos(2.0 * t + self.modulation_phase))

    @property
    def peak_strength(self) -> float:
        return self.mean_strength * (1.0 + self.modulation_depth)


@dataclass
class PulseSchedule:
    omega: float
    segments: list[PulseSegment]
    target_step: CouplingStep | None = field(default=None, repr=False)

    @property
    def duration(self) -> float:
        return float(sum(seg.duration for seg in self.segments))


# --------------------------------------------------------------------------
# single-spring models in the rotating frame


def _drive_components(depth: float, phase: float) -> dict[int, np.ndarray]:
    """Fourier components ``K_m`` (in ``exp(2imt)``) of the rotating-frame
    generator per unit mean strength."""
    b = {0: S3 / 2 + 0j, 1: 0.5 * (-S1 / 2j + S2 / 2), -1: 0.5 * (S1 / 2j + S2 / 2)}
    w = {0: 1.0 + 0j, 1: 0.5 * depth * np.exp(1j * phase), -1: 0.5 * depth * np.exp(-1j * phase)}
    comps: dict[int, np.ndarray] = {}
    for m, bm in b.items():
        for n, wn in w.items():
            comps[m + n] = comps.get(m + n, 0) - 4.0 * wn * bm
    return comps


def _i1(m):
    return math.pi if m == 0 else 0.0


def _i2(m, n):
    """Ordered double integral of ``exp(2imt1) exp(2int2)`` over ``0 < t2 < t1 < pi``."""
    if n == 0:
        return math.pi ** 2 / 2 if m == 0 else math.pi / (2j * m)
    return (_i1(m + n) - _i1(m)) / (2j * n)


def period_generator(mean_strength: float, depth: float, phase: float) -> np.ndarray:
    """Second-order Magnus exponent of one drive period (length pi)."""
    comps = _drive_components(depth, phase)
    first = sum(k * _i1(m) for m, k in comps.items())
    second = 0
    for m, km in comps.items():
        for n, kn in comps.items():
            second = second + 0.5 * (km @ kn - kn @ km) * _i2(m, n)
    return np.real(mean_strength * first + mean_strength ** 2 * second)


def modulated_map(mean_strength: float, depth: float, phase: float, periods: int) -> np.ndarray:
    X = periods * period_generator(mean_strength, depth, phase)
    return sp2_exp(*sp2_coordinates(X))


def static_map(mean_strength: float, periods: int) -> np.ndarray:
    """Exact rotating-frame map of a constant spring held for ``periods * pi``."""
    w = math.sqrt(1.0 + 4.0 * mean_strength)
    t = periods * math.pi
    c, s = math.cos(w * t), math.sin(w * t)
    lab = np.array([[c, s / w], [-w * s, c]])
    return rotation(t) @ lab


# --------------------------------------------------------------------------
# compilation


def _periods_for(amount: float, rate_cap: float) -> int:
    return max(1, math.ceil(amount / (math.pi * STRENGTH_HEADROOM * rate_cap)))


def _first_guess(S: np.ndarray, rwa_ratio: float):
    """Mean strengths, phase and period counts from the averaged generator."""
    A = MODULATION_DEPTH
    theta1, r, theta2 = euler_decompose(S)
    root = math.sqrt(A * A - 4.0)
    # exp(tau g) has sinh(r) = A sinh(root tau) / root for g at unit strength
    tau = math.asinh(root * math.sinh(r) / A) / root if r > 0 else 0.0
    W = sp2_exp(0.0, -SQUEEZE_RATE * A * tau, -STATIC_PHASE_RATE * tau)
    a1, _, a2 = euler_decompose(W) if tau > 0 else (0.0, 0.0, 0.0)
    # exp(tau g(phi)) = R(-phi/2) W R(phi/2)
    phi = 2.0 * (theta2 - a2)
    beta = (a1 - 0.5 * phi - theta1) % (2.0 * math.pi)
    if beta < MIN_STATIC_ANGLE:
        beta += 2.0 * math.pi
    mod_cap = rwa_ratio / (1.0 + A)
    # the static segment is not a pure rotation; leave room to undo its squeeze
    k_mod = _periods_for(tau + 2.0 * rwa_ratio / A, mod_cap)
    k_static = _periods_for(beta / STATIC_PHASE_RATE, rwa_ratio)
    return (tau / (math.pi * k_mod), phi, beta / (STATIC_PHASE_RATE * math.pi * k_static)), k_mod, k_static


def _wrap(phi: float) -> float:
    w = math.remainder(phi, 2.0 * math.pi)
    return math.pi if w <= -math.pi else w


def _schedule_map(params, k_mod, k_static):
    mod, phi, stat = params
    return static_map(stat, k_static) @ modulated_map(mod, MODULATION_DEPTH, phi, k_mod)


def compile_step(step: CouplingStep, omega: float = 1.0, rwa_ratio: float = DEFAULT_RWA_RATIO) -> PulseSchedule:
    """Two rectangular segments on the step's spring: a parametric one at
    depth ``MODULATION_DEPTH`` followed by an unmodulated one.

    The three continuous knobs (both mean strengths and the phase) are fitted
    so that the modelled rotating-frame map equals ``step.inner``.  Peak
    strengths stay at or below ``rwa_ratio``.
    """
    if not (math.isfinite(omega) and omega > 0):
        raise ValueError(f"omega must be positive, got {omega!r}")
    if not (0 < rwa_ratio <= MAX_RWA_RATIO):
        raise ValueError(f"rwa_ratio {rwa_ratio!r} outside (0, {MAX_RWA_RATIO}]: the rotating-wave picture fails")
    S = np.asarray(step.inner, dtype=float)
    if not is_symplectic(S):
        raise ValueError("step inner action is not symplectic")
    if np.max(np.abs(S - np.eye(2))) <= 1e-12:
        return PulseSchedule(omega, [], step)
    x0, k_mod, k_static = _first_guess(S, rwa_ratio)
    mod_cap = rwa_ratio / (1.0 + MODULATION_DEPTH)
    lo = [0.0, -4.0 * math.pi, 0.0]
    hi = [mod_cap, 4.0 * math.pi, rwa_ratio]
    for _ in range(COMPILE_RETRIES):
        def residual(p):
            return (_schedule_map(p, k_mod, k_static) - S).ravel()

        fit = least_squares(residual, np.clip(x0, lo, hi), bounds=(lo, hi), xtol=1e-15, ftol=1e-15, gtol=1e-15)
        mismatch = float(np.max(np.abs(fit.fun)))
        if mismatch <= 1e-9:
            break
        # not enough drive time within the strength ceiling: lengthen both segments
        k_mod, k_static = 2 * k_mod, 2 * k_static
        x0 = (0.5 * x0[0], x0[1], 0.5 * x0[2])
    else:
        raise RuntimeError(f"pulse fit for site {step.site} left model mismatch {mismatch:.2e}")
    mod, phi, stat = fit.x
    segments = []
    if mod > 0:
        segments.append(PulseSegment(step.site, float(mod), MODULATION_DEPTH, _wrap(phi), k_mod * math.pi))
    if stat > 0:
        segments.append(PulseSegment(step.site, float(stat), 0.0, 0.0, k_static * math.pi))
    return PulseSchedule(omega, segments, step)


# --------------------------------------------------------------------------
# direct integration


def _free_generator(N: int) -> np.ndarray:
    return np.kron(np.eye(N), np.array([[0.0, 1.0], [-1.0, 0.0]]))


def _spring_generator(N: int, site: int) -> np.ndarray:
    """Generator of the spring term per unit strength: ``p_n' -= 2 (x_n - x_{n+1})``."""
    G = np.zeros((2 * N, 2 * N))
    xn, xm = 2 * site - 2, 2 * site
    G[xn + 1, xn], G[xn + 1, xm] = -2.0, 2.0
    G[xm + 1, xn], G[xm + 1, xm] = 2.0, -2.0
    return G


def _rk4(M, t0, h, steps, free, spring, seg):
    t = t0
    for _ in range(steps):
        a = free + seg.strength(t) * spring
        b = free + seg.strength(t + 0.5 * h) * spring
        c = free + seg.strength(t + h) * spring
        k1 = a @ M
        k2 = b @ (M + 0.5 * h * k1)
        k3 = b @ (M + 0.5 * h * k2)
        k4 = c @ (M + h * k3)
        M = M + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t += h
    return M


def integrate_chain(schedule: PulseSchedule, N: int, dt: float = DEFAULT_DT) -> np.ndarray:
    """Lab-frame site propagator of the whole schedule by classic RK4.

    The drive has period pi, so the map of one period is computed once per
    segment and raised to the number of whole periods; any remainder is
    stepped explicitly.  No projection is applied: the symplectic defect is
    reported, and beyond ``SYMPLECTIC_ABORT`` the run is rejected.
    """
    if int(N) != N or N < 2:
        raise ValueError(f"chain length must be at least 2, got {N!r}")
    if not (0 < dt <= MAX_DT):
        raise ValueError(f"dt={dt!r} exceeds one two-hundredth of the bare period")
    N = int(N)
    free = _free_generator(N)
    per_period = math.ceil(math.pi / dt - 1e-12)
    h = math.pi / per_period
    M = np.eye(2 * N)
    for seg in schedule.segments:
        if seg.site >= N:
            raise ValueError(f"segment drives spring {seg.site}, but a chain of {N} has springs 1..{N - 1}")
        spring = _spring_generator(N, seg.site)
        periods = math.floor(seg.duration / math.pi + 1e-12)
        if periods:
            P = _rk4(np.eye(2 * N), 0.0, h, per_period, free, spring, seg)
            M = np.linalg.matrix_power(P, periods) @ M
        rest = seg.duration - periods * math.pi
        if rest > 1e-12:
            n = math.ceil(rest / h - 1e-12)
            M = _rk4(M, periods * math.pi, rest / n, n, free, spring, seg)
    defect = symplectic_defect(M)
    if defect > SYMPLECTIC_ABORT:
        raise IntegrationError(f"symplectic drift {defect:.2e} exceeds {SYMPLECTIC_ABORT:.0e}; reduce dt")
    if defect > SYMPLECTIC_WARN:
        log.warning("symplectic drift %.2e above %.0e", defect, SYMPLECTIC_WARN)
    return M


def to_rotating_frame(M: np.ndarray, t: float) -> np.ndarray:
    """Undo the free rotation ``exp(-t s3)`` shared by every site."""
    return np.kron(np.eye(M.shape[0] // 2), rotation(t)) @ M


def _relative_mode(N: int, site: int) -> np.ndarray:
    v = np.zeros(N)
    v[site - 1], v[site] = 1 / math.sqrt(2), -1 / math.sqrt(2)
    return np.kron(v[:, None], np.eye(2))


@dataclass(frozen=True)
class ValidationReport:
    action_error: float
    leakage: float
    symplectic_defect: float

    @property
    def error(self) -> float:
        return max(self.action_error, self.leakage)


def validation_report(schedule: PulseSchedule, N: int, dt: float = DEFAULT_DT) -> ValidationReport:
    """Compare the integrated rotating-frame propagator with the target step.

    ``action_error`` is the spectral distance between the map induced on the
    relative coordinate of the driven pair and ``target_step.inner``;
    ``leakage`` is the spectral norm of everything else in the propagator
    that a pure relative-mode action would not produce.
    """
    step = schedule.target_step
    if not schedule.segments:
        gap = 0.0 if step is None else float(np.linalg.norm(step.inner - np.eye(2), 2))
        return ValidationReport(gap, 0.0, 0.0)
    M = to_rotating_frame(integrate_chain(schedule, N, dt), schedule.duration)
    if step is None:
        return ValidationReport(0.0, float(np.linalg.norm(M - np.eye(2 * N), 2)), symplectic_defect(M))
    V = _relative_mode(N, step.site)
    induced = V.T @ M @ V
    ideal = np.eye(2 * N) + V @ (induced - np.eye(2)) @ V.T
    return ValidationReport(
        float(np.linalg.norm(induced - step.inner, 2)),
        float(np.linalg.norm(M - ideal, 2)),
        symplectic_defect(M),
    )


def validate_schedule(schedule: PulseSchedule, N: int, dt: float = DEFAULT_DT) -> float:
    """Worse of the action error and the leakage from :func:`validation_report`."""
    return validation_report(schedule, N, dt).error


def sum_mode_deviation(schedule: PulseSchedule, N: int, dt: float = DEFAULT_DT) -> float:
    """Max-norm gap between the total-displacement rows and columns of the
    driven propagator and those of free evolution integrated the same way.

    Springs cancel in the total displacement, so this measures only how well
    that cancellation survives the integration.
    """
    quiet = PulseSchedule(schedule.omega, [
        PulseSegment(seg.site, 0.0, 0.0, 0.0, seg.duration) for seg in schedule.segments])
    M = integrate_chain(schedule, N, dt)
    F = integrate_chain(quiet, N, dt)
    V = np.kron(np.full((N, 1), 1 / math.sqrt(N)), np.eye(2))
    return float(max(np.max(np.abs((M - F) @ V)), np.max(np.abs(V.T @ (M - F)))))


# --------------------------------------------------------------------------
# calibration


@dataclass(frozen=True)
class Calibration:
    mean_strength: float
    periods: int
    static_phase_rate: float
    squeeze_rate: float


def calibrate(mean_strength: float = CALIBRATION_STRENGTH, periods: int = CALIBRATION_PERIODS,
              dt: float = DEFAULT_DT) -> Calibration:
    """Measure the averaged rates on a two-site chain with :func:`integrate_chain`.

    The static rate is the clockwise phase advance of the relative mode per
    unit strength and time; the squeeze rate is the squeeze-generator weight
    per unit ``mean_strength * depth`` at depth ``MODULATION_DEPTH``.
    """
    t = periods * math.pi
    V = _relative_mode(2, 1)

    def induced(seg):
        M = integrate_chain(PulseSchedule(1.0, [seg]), 2, dt)
        return V.T @ to_rotating_frame(M, t) @ V

    still = induced(PulseSegment(1, mean_strength, 0.0, 0.0, t))
    angle = math.atan2(still[1, 0] - still[0, 1], still[0, 0] + still[1, 1])
    driven = induced(PulseSegment(1, mean_strength, MODULATION_DEPTH, 0.0, t))
    logs = sp2_log(driven / math.sqrt(np.linalg.det(driven)))
    if len(logs) != 1:
        raise RuntimeError("calibration map has no real logarithm; shorten the run")
    alpha, beta, _ = logs[0]
    return Calibration(
        mean_strength,
        periods,
        static_phase_rate=-angle / (mean_strength * t),
        squeeze_rate=math.hypot(alpha, beta) / (mean_strength * MODULATION_DEPTH * t),
    )

