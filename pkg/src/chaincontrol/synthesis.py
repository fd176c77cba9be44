"""Factor a symplectic map on the cradle modes into nearest-neighbour couplings.

The target ``T`` on ``m`` modes is peeled one mode at a time.  A product ``U``
of couplings is built whose last two rows equal those of ``T``; then
``T U^-1`` acts trivially on mode ``m`` and the problem shrinks to ``m - 1``
modes.  ``U`` is found by spreading the rows of mode ``m`` towards mode 1 with
coupling triples ``D_n(S1) D_{n-1}(S2) D_n(S3)`` for ``n = m, ..., 2``, each
triple fixing one more block of the target rows.
"""

from __future__ import annotations

import hashlib
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .cradle import active_slice, coupling_block, coupling_matrix, coupling_weights
from .gaussian import ENTANGLEMENT_THRESHOLD, cradle_to_site, negativity_table
from .symplectic import (
    S1,
    S2,
    S3,
    TOL_SYM,
    Triple,
    require_symplectic,
    sp2_exp,
    sp2_exp_jacobian,
    sp2_inverse,
    sp2_log,
)

log = logging.getLogger(__name__)

TOL_BLOCK = 1e-10
TOL_PLAN = 1e-8
TRIM_TOL = 1e-12
MAX_RESTARTS = 32
INITIAL_DAMPING = 1e-3
RIDGE_SCHEDULE = (1e-1, 1e-2, 1e-3)
PREFIX_PULL = 0.3
PLAN_ATTEMPTS = 3


class SynthesisError(RuntimeError):
    """Raised when the least-squares solver cannot meet its tolerance."""


@dataclass(frozen=True)
class CouplingStep:
    """Spring ``site`` acts with ``inner`` on the relative coordinate of
    oscillators ``site`` and ``site + 1``."""

    site: int
    inner: np.ndarray = field(repr=False)
    exponent: Triple | None = None

    def matrix(self, n_modes: int) -> np.ndarray:
        return coupling_matrix(self.site, self.inner, n_modes)

    def transposed(self) -> "CouplingStep":
        e = self.exponent
        # exp(X)^T = exp(X^T): s1, s2 are symmetric and s3 flips sign
        return CouplingStep(self.site, self.inner.T.copy(), None if e is None else (e[0], e[1], -e[2]))


@dataclass
class SynthesisPlan:
    """Couplings in time order (``steps[0]`` acts first) realizing ``target``."""

    chain_length: int
    steps: list[CouplingStep]
    target: np.ndarray = field(repr=False)
    residual: float = math.nan
    seed: int = 0
    # (cradle mode l, first step index, end step index) per decorrelation level
    levels: list[tuple[int, int, int]] = field(default_factory=list)

    @property
    def n_modes(self) -> int:
        return self.chain_length - 1

    def product(self) -> np.ndarray:
        return plan_product(self.steps, self.n_modes)


def step_bound(N: int) -> int:
    return 3 * N * (N - 1) // 2


def plan_product(steps, n_modes: int) -> np.ndarray:
    """``D(steps[-1]) ... D(steps[0])``, updated in place on the active rows."""
    M = np.eye(2 * n_modes)
    for st in steps:
        sl = active_slice(st.site)
        M[sl, :] = coupling_block(st.site, st.inner) @ M[sl, :]
    return M


def verify_plan(plan: SynthesisPlan) -> float:
    """Spectral-norm distance between the plan's product and its target;
    the value is also stored on the plan."""
    n_modes = plan.target.shape[0] // 2
    plan.residual = float(np.linalg.norm(plan_product(plan.steps, n_modes) - plan.target, 2))
    return plan.residual


def matrix_hash(M: np.ndarray) -> str:
    """SHA-256 of the little-endian float64 bytes of ``M``."""
    return hashlib.sha256(np.ascontiguousarray(M, dtype="<f8").tobytes()).hexdigest()


# --------------------------------------------------------------------------
# least squares over coupling sequences


class _RowSequence:
    """``start @ D_{sites[0]}(E_0) @ ... @ D_{sites[K-1]}(E_{K-1})`` compared to
    ``goal`` on selected columns, with ``E_i = sp2_exp(theta[3i:3i+3])``."""

    def __init__(self, sites, start, goal, columns):
        self.sites = list(sites)
        self.start = np.asarray(start, dtype=float)
        self.goal = np.asarray(goal, dtype=float)
        self.columns = columns
        self.n_modes = self.start.shape[1] // 2
        self.weights = [None if n == 1 else coupling_weights(n) for n in self.sites]
        # regularized phase: ridge term reg * theta plus a soft pull of the
        # columns in `soft` towards the goal
        self.reg = 0.0
        self.soft = np.array([], dtype=int)
        self.soft_weight = 0.0
        self.row_scale = _row_whitening(self.goal[:, columns])

    def _eval_columns(self):
        if self.reg and self.soft.size:
            cols = np.concatenate([self.columns, self.soft])
            scale = np.concatenate([np.ones(self.columns.size), np.full(self.soft.size, self.soft_weight)])
            return cols, scale
        return self.columns, None

    def _whitening(self):
        # the ridge phase works on the raw residual so the ridge keeps its meaning
        return np.eye(self.goal.shape[0]) if self.reg else self.row_scale

    def mismatch(self, theta) -> float:
        """Max-norm of the unweighted goal mismatch on the constrained columns."""
        reg, self.reg = self.reg, 0.0
        try:
            r = _safe_residual(self, theta)
            if r is None:
                return math.inf
            k = self.goal.shape[0]
            return float(np.max(np.abs(np.linalg.solve(self.row_scale, r.reshape(k, -1))), initial=0.0))
        finally:
            self.reg = reg

    def _augment(self, res, theta):
        return np.concatenate([res, self.reg * theta]) if self.reg else res

    def _blocks(self, theta):
        exps, grads = [], []
        for i in range(len(self.sites)):
            E, G = sp2_exp_jacobian(*theta[3 * i:3 * i + 3])
            exps.append(E)
            grads.append(G)
        return exps, grads

    def _embed(self, i, E):
        n = self.sites[i]
        return E if n == 1 else coupling_block(n, E)

    def _embed_grads(self, i, G):
        """All three generator derivatives of one embedded block, ``(3, d, d)``."""
        w = self.weights[i]
        if w is None:
            return G
        return np.einsum("ij,akl->aikjl", w, G).reshape(3, 4, 4)

    def residual(self, theta):
        P = self.start.copy()
        for i, n in enumerate(self.sites):
            sl = active_slice(n)
            P[:, sl] = P[:, sl] @ self._embed(i, sp2_exp(*theta[3 * i:3 * i + 3]))
        cols, scale = self._eval_columns()
        diff = (P - self.goal)[:, cols]
        if not self.reg:
            diff = self.row_scale @ diff
        if scale is not None:
            diff = diff * scale
        return self._augment(diff.ravel(), theta)

    def residual_and_jacobian(self, theta):
        K = len(self.sites)
        exps, grads = self._blocks(theta)
        blocks = [self._embed(i, exps[i]) for i in range(K)]
        prefix = [self.start]
        for i, n in enumerate(self.sites):
            sl = active_slice(n)
            P = prefix[-1].copy()
            P[:, sl] = P[:, sl] @ blocks[i]
            prefix.append(P)
        dim = 2 * self.n_modes
        suffix = [None] * (K + 1)
        cols, scale = self._eval_columns()
        Q = np.eye(dim)[:, cols]
        if scale is not None:
            Q = Q * scale
        suffix[K] = Q
        for i in range(K - 1, -1, -1):
            sl = active_slice(self.sites[i])
            Q = Q.copy()
            Q[sl, :] = blocks[i] @ Q[sl, :]
            suffix[i] = Q
        W = None if self.reg else self.row_scale
        diff = (prefix[K] - self.goal)[:, cols]
        if W is not None:
            diff = W @ diff
        res = (diff if scale is None else diff * scale).ravel()
        jac = np.empty((res.size, 3 * K))
        for i, n in enumerate(self.sites):
            sl = active_slice(n)
            left = prefix[i][:, sl] if W is None else W @ prefix[i][:, sl]
            right = suffix[i + 1][sl, :]
            d = left @ self._embed_grads(i, grads[i]) @ right
            jac[:, 3 * i:3 * i + 3] = d.reshape(3, -1).T
        if self.reg:
            res = self._augment(res, theta)
            jac = np.vstack([jac, self.reg * np.eye(3 * K)])
        return res, jac


def _row_whitening(G, max_ratio=1e6):
    """Row transform that equalizes the singular values of ``G``.

    Goal rows that are nearly rank deficient make the plain residual badly
    scaled and damped Gauss-Newton crawls.  The returned matrix has singular
    values in ``[1, max_ratio]``, so its residual bounds the unscaled one.
    """
    k = G.shape[0]
    if not np.any(G):
        return np.eye(k)
    U, sv, _ = np.linalg.svd(G, full_matrices=False)
    if sv.size < k:
        return np.eye(k)
    ratio = np.minimum(sv[0] / np.maximum(sv, sv[0] / max_ratio), max_ratio)
    return (ratio[:, None] * U.T) if U.shape == (k, k) else np.eye(k)


def _safe_residual(problem, x):
    try:
        with np.errstate(all="ignore"):
            r = problem.residual(x)
    except OverflowError:
        return None
    # huge but finite entries would still overflow r @ r
    return r if np.all(np.isfinite(r)) and np.max(np.abs(r), initial=0.0) < 1e150 else None


def _levenberg_marquardt(problem: _RowSequence, x0, tol, max_iter=200):
    """Damped Gauss-Newton with gain-ratio damping updates.

    The damping starts at ``INITIAL_DAMPING`` times the largest diagonal entry
    of ``J^T J``.  A truncated Gauss-Newton step is tried before each damped
    step and kept when it cuts the residual norm in half.  Converged runs take three extra steps so that errors do not
    pile up across the many factors of a plan.
    """
    x = np.array(x0, dtype=float)
    r, J = problem.residual_and_jacobian(x)
    cost = 0.5 * (r @ r)
    A = J.T @ J
    g = J.T @ r
    mu = INITIAL_DAMPING * max(np.max(np.diag(A)), 1e-12)
    nu = 2.0
    polish = 0
    eye = np.eye(A.shape[0])
    for _ in range(max_iter):
        if np.max(np.abs(r), initial=0.0) <= tol:
            polish += 1
            if polish > 3:
                break
        # a truncated Gauss-Newton step first: near a root the Jacobian is
        # often rank deficient and the damped step would only creep
        h = -np.linalg.lstsq(J, r, rcond=1e-9)[0]
        r_gn = _safe_residual(problem, x + h)
        if r_gn is not None and r_gn @ r_gn < 0.25 * (r @ r):
            x = x + h
            r, J = problem.residual_and_jacobian(x)
            cost = 0.5 * (r @ r)
            A = J.T @ J
            g = J.T @ r
            continue
        try:
            h = np.linalg.solve(A + mu * eye, -g)
        except np.linalg.LinAlgError:
            mu *= nu
            nu *= 2.0
            continue
        if np.linalg.norm(h) <= 1e-15 * (np.linalg.norm(x) + 1e-15):
            break
        r_new = _safe_residual(problem, x + h)
        rho = -1.0
        if r_new is not None:
            predicted = 0.5 * (h @ (mu * h - g))
            if predicted > 0:
                with np.errstate(over="ignore", invalid="ignore"):
                    rho = (cost - 0.5 * (r_new @ r_new)) / predicted
        if rho > 0:
            x = x + h
            r, J = problem.residual_and_jacobian(x)
            cost = 0.5 * (r @ r)
            A = J.T @ J
            g = J.T @ r
            mu *= max(1.0 / 3.0, 1.0 - (2.0 * rho - 1.0) ** 3)
            nu = 2.0
        else:
            mu *= nu
            nu *= 2.0
            if mu > 1e20 or polish:
                break
    return x


def _solve_sequence(problem: _RowSequence, rng, tol, max_restarts=MAX_RESTARTS):
    """Zero-residual check at the identity, then seeded random restarts.

    Each restart follows a decreasing ridge schedule before the unregularized
    solve.  The ridge steers towards small exponents, which keeps coupling
    norms (and hence the reduced target) well conditioned.

    Returns the parameters and the best max-residual; the parameters are
    ``None`` when every restart failed.
    """
    K = len(problem.sites)
    x = np.zeros(3 * K)
    best = problem.mismatch(x)
    if best <= tol:
        return x, best
    for attempt in range(max_restarts):
        scale = 0.5 if attempt == 0 else 1.0 + 0.05 * attempt
        x = rng.uniform(-scale, scale, size=3 * K)
        for reg in RIDGE_SCHEDULE:
            problem.reg = reg
            x = _levenberg_marquardt(problem, x, 0.0, max_iter=25)
        problem.reg = 0.0
        # aim well below the acceptance tolerance: stage errors add up
        x = _levenberg_marquardt(problem, x, 1e-4 * tol)
        res = problem.mismatch(x)
        if res <= tol:
            return x, res
        best = min(best, res)
    return None, best


def _goal_tolerance(goal) -> float:
    return TOL_BLOCK * max(1.0, float(np.max(np.abs(goal), initial=0.0)))


def _mode_columns(modes, n_modes) -> np.ndarray:
    cols = [c for l in sorted(modes) for c in (2 * l - 2, 2 * l - 1)]
    return np.array(cols, dtype=int) if cols else np.arange(2 * n_modes)


def solve_triple(n: int, goal: np.ndarray, start: np.ndarray | None = None, modes=None,
                 seed: int | np.random.Generator = 0, max_restarts: int = MAX_RESTARTS):
    """Find ``(S1, S2, S3)`` with ``start @ D_n(S1) @ D_{n-1}(S2) @ D_n(S3)``
    equal to ``goal`` on the columns of ``modes`` (default: every column).

    ``start`` defaults to the identity, in which case ``goal`` must be square.
    Raises :class:`SynthesisError` if no restart reaches ``TOL_BLOCK``.
    """
    goal = np.asarray(goal, dtype=float)
    n_modes = goal.shape[1] // 2
    if start is None:
        if goal.shape[0] != goal.shape[1]:
            raise ValueError("a non-square goal needs explicit start rows")
        start = np.eye(goal.shape[0])
    if not 2 <= n <= n_modes:
        raise ValueError(f"triple centre {n} outside 2..{n_modes}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    problem = _RowSequence([n, n - 1, n], start, goal, _mode_columns(modes or [], n_modes))
    theta, res = _solve_sequence(problem, rng, _goal_tolerance(goal), max_restarts)
    if theta is None:
        raise SynthesisError(f"triple at site {n} failed: best residual {res:.3e} after {max_restarts} restarts")
    return tuple(sp2_exp(*theta[3 * i:3 * i + 3]) for i in range(3))


def _spread_sites(m: int) -> list[int]:
    sites = []
    for n in range(m, 1, -1):
        sites += [n, n - 1, n]
    return sites


def _fit_rows_staged(R, rng):
    """Spread ``e_m`` onto the target rows ``R`` one triple at a time.

    A stage that fails is merged with the stage before it and solved jointly
    from the rows as they were before that stage, backing up further while
    the merged solve keeps failing.  The step count is unchanged.
    """
    m = R.shape[1] // 2
    tol = _goal_tolerance(R)
    r = np.zeros_like(R)
    r[:, 2 * m - 2:] = np.eye(2)
    history = []  # (rows before the stage, sites, parameters)
    for n in range(m, 1, -1):
        modes = [1, 2] if n == 2 else [n]
        # a zero prefix can never be recovered later, so demand it now
        if n > 2 and np.max(np.abs(R[:, :2 * n - 2])) <= tol:
            modes = list(range(1, n + 1))
        sites = [n, n - 1, n]
        x = _stage(r, R, sites, modes, rng)
        while x is None and history:
            r, prev_sites, _ = history.pop()
            sites = prev_sites + sites
            modes = list(range(min(modes), max(sites) + 1))
            log.debug("stage %d failed; merging it with the stage before (%d sites)", n, len(sites))
            x = _stage(r, R, sites, modes, rng, max_restarts=8)
        if x is None:
            return None
        history.append((r.copy(), sites, x))
        for i, site in enumerate(sites):
            sl = active_slice(site)
            r[:, sl] = r[:, sl] @ coupling_block(site, sp2_exp(*x[3 * i:3 * i + 3]))
        if n > 2 and len(modes) >= n:
            break
    return ([s for _, st, _ in history for s in st],
            np.concatenate([x for _, _, x in history]))


def _stage(r, R, sites, modes, rng, max_restarts=4):
    m = R.shape[1] // 2
    problem = _RowSequence(sites, r, R, _mode_columns(modes, m))
    # the target's own prefix is always reachable by later stages
    problem.soft = _mode_columns(range(1, min(modes)), m) if min(modes) > 1 else np.array([], dtype=int)
    problem.soft_weight = PREFIX_PULL
    x, _ = _solve_sequence(problem, rng, _goal_tolerance(R), max_restarts=max_restarts)
    return x


def _fit_rows_joint(R, sites, rng):
    m = R.shape[1] // 2
    start = np.zeros_like(R)
    start[:, 2 * m - 2:] = np.eye(2)
    problem = _RowSequence(sites, start, R, np.arange(2 * m))
    x, res = _solve_sequence(problem, rng, _goal_tolerance(R))
    return None if x is None else (sites, x)


def _fit_rows(R, rng):
    """Coupling sites and exponents whose product (matrix order) has last
    rows ``R``."""
    m = R.shape[1] // 2
    fit = _fit_rows_staged(R, rng)
    if fit is None:
        log.debug("staged spread failed on mode %d; solving the level jointly", m)
        fit = _fit_rows_joint(R, _spread_sites(m), rng)
    if fit is None:
        log.debug("joint spread failed on mode %d; adding a closing triple", m)
        fit = _fit_rows_joint(R, _spread_sites(m) + [m, m - 1, m], rng)
    if fit is None:
        raise SynthesisError(f"could not match the rows of cradle mode {m} after {MAX_RESTARTS} restarts")
    return fit


def _decorrelate_rows(T, rng):
    """Couplings ``G_1 .. G_K`` (matrix order) with ``T (G_1 ... G_K)^-1``
    trivial on the last mode, and the reduced map on the remaining modes."""
    m = T.shape[0] // 2
    R = T[-2:, :]
    eye_rows = np.eye(2 * m)[-2:, :]
    if np.max(np.abs(R - eye_rows)) <= _goal_tolerance(R):
        return [], T[:-2, :-2].copy()
    if m == 1:
        factors = [CouplingStep(1, R.copy(), _single_exponent(R))]
    else:
        sites, theta = _fit_rows(R, rng)
        factors = []
        for i, n in enumerate(sites):
            e = tuple(float(v) for v in theta[3 * i:3 * i + 3])
            factors.append(CouplingStep(n, sp2_exp(*e), e))
    # T U^-1 with U^-1 = G_K^-1 ... G_1^-1
    W = T.copy()
    for st in reversed(factors):
        sl = active_slice(st.site)
        W[:, sl] = W[:, sl] @ coupling_block(st.site, sp2_inverse(st.inner))
    tail = max(np.max(np.abs(W[-2:, :] - eye_rows)), np.max(np.abs(W[:, -2:] - eye_rows.T)))
    if tail > 1e3 * _goal_tolerance(R):
        raise SynthesisError(f"decorrelation of mode {m} left residual coupling {tail:.3e}")
    return factors, W[:-2, :-2].copy()


def _single_exponent(S) -> Triple | None:
    try:
        logs = sp2_log(S / math.sqrt(np.linalg.det(S)))
    except ValueError:
        return None
    return logs[0] if len(logs) == 1 else None


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def _decorrelate(T, rng, use_columns):
    if use_columns:
        factors, red = _decorrelate_rows(T.T, rng)
        # V = U^T = G_K^T ... G_1^T, so G_1^T acts first
        return [st.transposed() for st in factors], red.T.copy()
    factors, red = _decorrelate_rows(T, rng)
    return list(reversed(factors)), red


def decorrelate_last(T: np.ndarray, seed: int | np.random.Generator = 0, use_columns: bool = False):
    """One peeling stage.

    Returns ``(steps, T_reduced)`` where ``steps`` is in time order.  With the
    default row path the steps form ``U`` with ``T = (T_reduced + 1) U``;
    with ``use_columns`` they form ``V`` with ``T = V (T_reduced + 1)``.
    """
    T = require_symplectic(T, TOL_SYM, "target")
    return _decorrelate(T, _rng(seed), use_columns)


def trim_plan(steps: list[CouplingStep]) -> list[CouplingStep]:
    return [st for st in steps if np.max(np.abs(st.inner - np.eye(2))) > TRIM_TOL]


def refine_steps(steps: list[CouplingStep], T: np.ndarray, max_iter: int = 8) -> list[CouplingStep]:
    """Gauss-Newton polish of every inner action against the full target.

    Each inner ``B`` is perturbed as ``B @ exp(delta)``; the sites stay fixed.
    Peeling leaves small errors whenever an intermediate row block is nearly
    degenerate, and this removes them.
    """
    if not steps:
        return steps
    n_modes = T.shape[0] // 2
    inners = [st.inner.copy() for st in steps]
    sites = [st.site for st in steps]
    weights = [None if n == 1 else coupling_weights(n) for n in sites]

    def product(mats):
        return plan_product([CouplingStep(n, B) for n, B in zip(sites, mats)], n_modes)

    err = product(inners) - T
    best = np.linalg.norm(err)
    for _ in range(max_iter):
        if best <= 1e-14 * max(1.0, np.linalg.norm(T)):
            break
        # M = G_K ... G_1 ; dM = (G_K..G_{i+1}) dG_i (G_{i-1}..G_1)
        K = len(sites)
        before = [np.eye(2 * n_modes)]
        for n, B in zip(sites, inners):
            P = before[-1].copy()
            sl = active_slice(n)
            P[sl, :] = coupling_block(n, B) @ P[sl, :]
            before.append(P)
        after = [None] * (K + 1)
        Q = np.eye(2 * n_modes)
        after[K] = Q
        for i in range(K - 1, -1, -1):
            sl = active_slice(sites[i])
            Q = Q.copy()
            Q[:, sl] = Q[:, sl] @ coupling_block(sites[i], inners[i])
            after[i] = Q
        jac = np.empty((err.size, 3 * K))
        for i, n in enumerate(sites):
            sl = active_slice(n)
            for a, gen in enumerate((S1, S2, S3)):
                dB = inners[i] @ gen
                dG = dB if weights[i] is None else np.kron(weights[i], dB)
                jac[:, 3 * i + a] = (after[i + 1][:, sl] @ dG @ before[i][sl, :]).ravel()
        h = -np.linalg.lstsq(jac, err.ravel(), rcond=1e-10)[0]
        trial = [B @ sp2_exp(*h[3 * i:3 * i + 3]) for i, B in enumerate(inners)]
        trial_err = product(trial) - T
        if not np.linalg.norm(trial_err) < best:
            break
        inners, err, best = trial, trial_err, np.linalg.norm(trial_err)
    return [CouplingStep(n, B, _single_exponent(B)) for n, B in zip(sites, inners)]


def synthesize(T: np.ndarray, seed: int = 0, use_columns: bool = False, tol_plan: float = TOL_PLAN) -> SynthesisPlan:
    """Factor ``T`` into at most ``3N(N-1)/2`` coupling steps.

    Raises :class:`SynthesisError` if the plan does not reproduce ``T`` to
    ``tol_plan``; an unverified plan is never returned.
    """
    T = require_symplectic(T, TOL_SYM, "target")
    error = None
    for attempt in range(PLAN_ATTEMPTS):
        # reduced targets depend on earlier solver branches, so a fresh
        # stream usually steps around a degenerate level
        rng = np.random.default_rng(seed if attempt == 0 else [seed, attempt])
        try:
            return _synthesize_once(T, rng, seed, use_columns, tol_plan)
        except SynthesisError as e:
            log.debug("attempt %d failed: %s", attempt, e)
            error = e
    raise error


def _synthesize_once(T, rng, seed, use_columns, tol_plan) -> SynthesisPlan:
    n_modes = T.shape[0] // 2
    current = T.copy()
    stages = []
    for m in range(n_modes, 0, -1):
        lvl, current = _decorrelate(current, rng, use_columns)
        stages.append((m, trim_plan(lvl)))
    # row path: the largest stage acts first; column path: it acts last
    if use_columns:
        stages.reverse()
    steps, levels = [], []
    for m, lvl in stages:
        levels.append((m, len(steps), len(steps) + len(lvl)))
        steps += lvl
    steps = refine_steps(steps, T)
    plan = SynthesisPlan(n_modes + 1, steps, T.copy(), seed=seed, levels=levels)
    verify_plan(plan)
    if not plan.residual <= tol_plan:
        raise SynthesisError(f"plan residual {plan.residual:.3e} exceeds {tol_plan:.1e}")
    if len(steps) > step_bound(plan.chain_length):
        raise SynthesisError(f"plan has {len(steps)} steps, above the bound {step_bound(plan.chain_length)}")
    return plan


def random_chain_target(n_modes: int, rng: np.random.Generator, sweeps: int = 2) -> np.ndarray:
    """Product of ``D_n(sp2_exp(theta))`` with ``theta`` uniform in ``[-1, 1]^3``.

    Sites run ``1..n_modes`` and back ``sweeps`` times in total, which spreads
    correlations across every mode.
    """
    order = []
    for k in range(sweeps):
        run = list(range(1, n_modes + 1))
        order += run if k % 2 == 0 else run[::-1]
    steps = [CouplingStep(n, sp2_exp(*rng.uniform(-1.0, 1.0, 3))) for n in order]
    return plan_product(steps, n_modes)


# --------------------------------------------------------------------------
# entanglement along a plan


@dataclass(frozen=True)
class TraceRecord:
    step: int  # number of couplings applied so far
    site: int | None
    entangled_pairs: int
    touched_pair_bound: int
    negativities: dict = field(repr=False, compare=False)


def correlation_trace(plan: SynthesisPlan, threshold: float | None = None) -> list[TraceRecord]:
    """Entangled-pair count after each coupling of ``plan`` applied to vacuum.

    ``touched_pair_bound`` counts pairs among oscillators that any coupling
    has touched so far.
    """
    thr = ENTANGLEMENT_THRESHOLD if threshold is None else threshold
    n_modes = plan.n_modes
    sigma = 0.5 * np.eye(2 * n_modes)
    touched: set[int] = set()

    def record(i, site, sigma):
        site_state = cradle_to_site(sigma)
        table = negativity_table(site_state)
        count = sum(1 for v in table.values() if v > thr)
        k = len(touched)
        return TraceRecord(i, site, count, k * (k - 1) // 2, table)

    out = [record(0, None, sigma)]
    for i, st in enumerate(plan.steps, start=1):
        sl = active_slice(st.site)
        B = coupling_block(st.site, st.inner)
        sigma[sl, :] = B @ sigma[sl, :]
        sigma[:, sl] = sigma[:, sl] @ B.T
        sigma = 0.5 * (sigma + sigma.T)
        touched.update((st.site, st.site + 1))
        out.append(record(i, st.site, sigma))
    return out
