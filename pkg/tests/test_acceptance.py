"""End-to-end acceptance checks, one test per criterion.

Each test prints a single ``CRITERION <n> PASS|FAIL <details>`` line to the
terminal (bypassing pytest's capture) before asserting.
"""

import itertools
import math
import time

import numpy as np
import pytest
from scipy.linalg import expm

from chaincontrol.cli import main
from chaincontrol.cradle import (
    controllability_dimension,
    coupling_commutator,
    cradle_basis,
    embed_coupling,
    generator,
)
from chaincontrol.gaussian import (
    PhononTarget,
    apply_symplectic,
    log_negativity,
    negativity_table,
    pair_ellipses,
    phonon_target_symplectic,
    symplectic_eigenvalues,
    two_mode_squeezed_state,
    vacuum_state,
)
from chaincontrol.pulses import compile_step, integrate_chain, validation_report
from chaincontrol.symplectic import SP2_GENERATORS, is_symplectic, random_sp2, sp2_exp
from chaincontrol.synthesis import (
    CouplingStep,
    correlation_trace,
    random_chain_target,
    step_bound,
    synthesize,
)


@pytest.fixture
def say(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\nCRITERION {n} {'PASS' if ok else 'FAIL'} {detail}")
    return emit


def site_coupling(N, n, S):
    v = np.zeros((N, 1))
    v[n - 1], v[n] = 1 / math.sqrt(2), -1 / math.sqrt(2)
    V = np.kron(v, np.eye(2))
    return np.eye(2 * N) + V @ (S - np.eye(2)) @ V.T


def test_criterion_1_controllability(say):
    t0 = time.perf_counter()
    got = {n: controllability_dimension(n) for n in range(1, 6)}
    elapsed = time.perf_counter() - t0
    want = {1: 3, 2: 10, 3: 21, 4: 36, 5: 55}
    ok = got == want and elapsed < 10
    say(1, ok, f"dims {got} in {elapsed:.2f}s")
    assert got == want
    assert elapsed < 10


def test_criterion_2_step_bound(say):
    t0 = time.perf_counter()
    worst_res, worst_excess, failures = 0.0, -math.inf, []
    for modes in range(1, 7):
        rng = np.random.default_rng(2000 + modes)
        bound = step_bound(modes + 1)
        for i in range(100):
            T = random_chain_target(modes, rng)
            try:
                plan = synthesize(T, seed=i)
            except Exception as e:  # noqa: BLE001 - report, then fail below
                failures.append((modes, i, str(e)))
                continue
            worst_res = max(worst_res, plan.residual)
            worst_excess = max(worst_excess, len(plan.steps) - bound)
    elapsed = time.perf_counter() - t0
    ok = not failures and worst_res <= 1e-8 and worst_excess <= 0 and elapsed < 300
    say(2, ok, f"600 targets, worst residual {worst_res:.2e}, max(len - bound) {worst_excess}, "
               f"failures {len(failures)}, {elapsed:.0f}s")
    assert not failures, failures[:3]
    assert worst_res <= 1e-8
    assert worst_excess <= 0
    assert elapsed < 300


def _phonon_case(seed=0):
    N = 7
    T = phonon_target_symplectic(PhononTarget(N, 1, 1, 1.0))
    plan = synthesize(T, seed=seed)
    # site-basis propagator assembled step by step, independent of the cradle embedding
    M = np.eye(2 * N)
    for st in plan.steps:
        M = site_coupling(N, st.site, st.inner) @ M
    return N, T, plan, M


def test_criterion_3_phonon_case_study(say):
    N, T, plan, M = _phonon_case()
    C = cradle_basis(N).phase_space_matrix
    assert np.max(np.abs((C @ M @ C.T)[:-2, :-2] - T)) < 1e-8
    sigma = apply_symplectic(vacuum_state(N), M)
    trace = correlation_trace(plan)

    a = len(plan.steps) <= 63
    pairs = sum(1 for v in negativity_table(sigma).values() if v > 1e-9)
    b = pairs == 21 and trace[-1].entangled_pairs == 21
    angles = [pair_ellipses(sigma, n, n)[0].angle for n in range(1, N + 1)]
    incs = [math.remainder(angles[i + 1] - angles[i], math.pi) for i in range(N - 1)]
    # ellipse angles are counted counter-clockwise from x; the phonon pattern turns clockwise
    c = all(abs(d + 2 * math.pi / N) < 1e-6 for d in incs)
    u = np.kron(np.full((N, 1), 1 / math.sqrt(N)), np.eye(2))
    sum_block = u.T @ sigma @ u
    d = np.max(np.abs(sum_block - 0.5 * np.eye(2))) < 1e-10
    nu = symplectic_eigenvalues(sigma)
    e = np.max(np.abs(nu - 0.5)) < 1e-8
    dashed = all(r.entangled_pairs <= r.touched_pair_bound for r in trace)
    ok = a and b and c and d and e and dashed
    say(3, ok, f"(a) {len(plan.steps)} steps <= 63 {a}; (b) {pairs} pairs {b}; "
               f"(c) increment {incs[0]:.9f} vs -2pi/7 {c}; (d) sum block {d}; (e) purity "
               f"{np.max(np.abs(nu - 0.5)):.1e} {e}; dashed bound {dashed}")
    assert a and b and c and d and e and dashed


def test_criterion_4_oracle_equivalence(say):
    rng = np.random.default_rng(4)
    worst_block = 0.0
    for _ in range(200):
        N = int(rng.integers(2, 9))
        n = int(rng.integers(1, N))
        S = random_sp2(rng, 1.0)
        C = cradle_basis(N).phase_space_matrix
        oracle = (C @ site_coupling(N, n, S) @ C.T)[:-2, :-2]
        worst_block = max(worst_block, np.max(np.abs(embed_coupling(n, S, N).matrix - oracle)))
    worst_exp = 0.0
    for _ in range(100):
        N = int(rng.integers(2, 9))
        n = int(rng.integers(1, N))
        t = rng.uniform(-1, 1, 3)
        s = sum(c * g for c, g in zip(t, SP2_GENERATORS))
        worst_exp = max(worst_exp, np.max(np.abs(expm(generator(n, s, N - 1))
                                                 - embed_coupling(n, sp2_exp(*t), N).matrix)))
    worst_comm = 0.0
    for n in range(2, 7):
        for i, j in itertools.product(range(1, 4), repeat=2):
            A = np.zeros((2 * n, 2 * n))
            A[2 * n - 4:2 * n - 2, 2 * n - 4:2 * n - 2] = SP2_GENERATORS[i - 1]
            B = generator(n, SP2_GENERATORS[j - 1], n)
            brute = (A @ B - B @ A)[2 * n - 4:, 2 * n - 4:]
            worst_comm = max(worst_comm, np.max(np.abs(brute - coupling_commutator(i, j, n))))
    ok = worst_block <= 1e-10 and worst_exp <= 1e-9 and worst_comm <= 1e-12
    say(4, ok, f"block {worst_block:.1e}, exp {worst_exp:.1e}, commutator {worst_comm:.1e}")
    assert worst_block <= 1e-10
    assert worst_exp <= 1e-9
    assert worst_comm <= 1e-12


def test_criterion_5_pulse_rwa(say):
    t0 = time.perf_counter()
    rng = np.random.default_rng(5)
    N = 4
    suite = [CouplingStep(int(rng.integers(1, N)), random_sp2(rng, 1.0)) for _ in range(20)]
    errs = {r: [] for r in (0.005, 0.01, 0.02)}
    worst_defect = 0.0
    for st in suite:
        for r in errs:
            sched = compile_step(st, 1.0, r)
            rep = validation_report(sched, N)
            errs[r].append(rep.error)
            worst_defect = max(worst_defect, rep.symplectic_defect)
    # the raw lab-frame propagator must also be symplectic
    raw_ok = all(is_symplectic(integrate_chain(compile_step(st), N), 1e-6) for st in suite[:5])
    elapsed = time.perf_counter() - t0
    at_01 = max(errs[0.01])
    grows = max(errs[0.02]) > max(errs[0.005]) and all(a > b for a, b in zip(errs[0.02], errs[0.005]))
    ok = at_01 <= 1e-2 and grows and worst_defect <= 1e-6 and raw_ok and elapsed < 600
    say(5, ok, f"max error 0.005/0.01/0.02: {max(errs[0.005]):.2e}/{at_01:.2e}/{max(errs[0.02]):.2e}; "
               f"defect {worst_defect:.1e}; {elapsed:.0f}s")
    assert at_01 <= 1e-2
    assert grows
    assert worst_defect <= 1e-6 and raw_ok
    assert elapsed < 600


def test_criterion_6_gaussian_oracles(say):
    r = 1.0
    sigma = two_mode_squeezed_state(r)
    ln = log_negativity(sigma, 1, 2)
    vac = negativity_table(vacuum_state(6))
    s, d = pair_ellipses(sigma, 1, 2)
    hi, lo = math.exp(r) / math.sqrt(2), math.exp(-r) / math.sqrt(2)
    axes = max(abs(s.semi_major - hi), abs(s.semi_minor - lo), abs(d.semi_major - hi), abs(d.semi_minor - lo))
    ok = abs(ln - 2.0) <= 1e-9 and all(v == 0 for v in vac.values()) and axes <= 1e-10
    say(6, ok, f"log-negativity {ln:.12f}, vacuum max {max(vac.values())}, axes gap {axes:.1e}")
    assert abs(ln - 2.0) <= 1e-9
    assert all(v == 0 for v in vac.values())
    assert axes <= 1e-10


def test_criterion_7_determinism(say, tmp_path, capsys):
    files = ("plan.txt", "ellipses.csv", "trace.csv", "state.csv")
    for d in ("run1", "run2"):
        code = main(["phonon", "--chain-length", "7", "--k1", "1", "--k2", "1", "--xi", "1",
                     "--seed", "0", "--output-dir", str(tmp_path / d)])
        assert code == 0
    capsys.readouterr()
    same = {f: (tmp_path / "run1" / f).read_bytes() == (tmp_path / "run2" / f).read_bytes() for f in files}
    ok = all(same.values())
    say(7, ok, f"byte-identical {same}")
    assert ok
