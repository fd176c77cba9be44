import math

import numpy as np
import pytest

from chaincontrol.cradle import cradle_basis
from chaincontrol.gaussian import (
    PhononTarget,
    all_ellipses,
    allowed_momenta,
    apply_symplectic,
    cradle_to_site,
    ellipse_of,
    entangled_pair_count,
    is_physical,
    log_negativity,
    negativity_table,
    pair_ellipses,
    phonon_site_symplectic,
    phonon_target_symplectic,
    site_to_cradle,
    symplectic_eigenvalues,
    two_mode_squeezed_state,
    vacuum_state,
)
from chaincontrol.symplectic import is_symplectic, random_sp2, squeeze


def annihilator_rows(N):
    """Coefficient rows of a_n = (x_n + i p_n)/sqrt(2) over the quadratures."""
    rows = np.zeros((N, 2 * N), dtype=complex)
    for n in range(N):
        rows[n, 2 * n] = 1 / math.sqrt(2)
        rows[n, 2 * n + 1] = 1j / math.sqrt(2)
    return rows


def phonon_rows(N):
    ks = allowed_momenta(N)
    F = np.exp(2j * np.pi * np.outer(ks, np.arange(1, N + 1)) / N) / math.sqrt(N)
    return ks, F @ annihilator_rows(N)


def test_allowed_momenta():
    assert allowed_momenta(7) == [-3, -2, -1, 0, 1, 2, 3]
    assert allowed_momenta(4) == [-1, 0, 1, 2]


@pytest.mark.parametrize("kw", [dict(k1=0), dict(k2=4), dict(xi=-1.0), dict(N=1), dict(k1=1.5)])
def test_phonon_target_validation(kw):
    args = dict(N=7, k1=1, k2=1, xi=1.0) | kw
    with pytest.raises(ValueError):
        PhononTarget(**args)


@pytest.mark.parametrize("N,k1,k2,xi", [(7, 1, 1, 1.0), (4, 1, -1, 0.5), (5, 2, -1, 0.3), (6, 3, 3, 0.8)])
def test_phonon_heisenberg_action(N, k1, k2, xi):
    """Independent check on mode operators: a_k1 -> cosh a_k1 - i sinh a_k2^dag."""
    M = phonon_site_symplectic(PhononTarget(N, k1, k2, xi))
    ks, A = phonon_rows(N)
    ch, sh = math.cosh(xi), math.sinh(xi)
    for k, partner in ((k1, k2), (k2, k1)):
        got = A[ks.index(k)] @ M
        want = ch * A[ks.index(k)] - 1j * sh * np.conj(A[ks.index(partner)])
        assert np.max(np.abs(got - want)) < 1e-12
    for k in ks:
        if k not in (k1, k2):
            assert np.max(np.abs(A[ks.index(k)] @ M - A[ks.index(k)])) < 1e-12


def test_phonon_cradle_target():
    T = phonon_target_symplectic(PhononTarget(7, 1, 1, 1.0))
    assert T.shape == (12, 12)
    assert is_symplectic(T, 1e-12)
    assert np.allclose(phonon_target_symplectic(PhononTarget(5, 1, 2, 0.0)), np.eye(8), atol=1e-14)


def test_vacuum_and_physicality():
    v = vacuum_state(3)
    assert np.array_equal(v, 0.5 * np.eye(6))
    assert is_physical(v)
    assert not is_physical(0.4 * np.eye(2))
    assert np.allclose(symplectic_eigenvalues(v), 0.5)


def test_pure_state_spectrum():
    rng = np.random.default_rng(0)
    M = np.kron(np.eye(1), random_sp2(rng, 1.0))
    assert np.allclose(symplectic_eigenvalues(apply_symplectic(vacuum_state(1), M)), 0.5)
    thermal = np.diag([1.5, 1.5, 0.5, 0.5])
    assert np.allclose(symplectic_eigenvalues(thermal), [1.5, 0.5])


def test_apply_symplectic_checks_shapes():
    with pytest.raises(ValueError):
        apply_symplectic(vacuum_state(2), np.eye(2))


def test_cradle_round_trip():
    rng = np.random.default_rng(2)
    N = 5
    sigma = apply_symplectic(vacuum_state(N), np.kron(np.eye(N), random_sp2(rng)))
    C = cradle_basis(N).phase_space_matrix
    lead, tail = site_to_cradle(sigma)
    full = C @ sigma @ C.T
    back = cradle_to_site(lead, tail)
    # cross terms with the sum mode are dropped, so compare the blocks only
    assert np.allclose(lead, full[:-2, :-2])
    assert np.allclose(site_to_cradle(back)[0], lead)


def test_two_mode_squeezed_log_negativity_closed_form():
    for r in (0.0, 0.3, 1.0, 2.2):
        sigma = two_mode_squeezed_state(r)
        assert abs(log_negativity(sigma, 1, 2) - 2 * r) < 1e-9


def test_vacuum_has_no_entanglement():
    table = negativity_table(vacuum_state(5))
    assert len(table) == 10
    assert all(v == 0.0 for v in table.values())
    assert entangled_pair_count(vacuum_state(5)) == 0


def test_log_negativity_site_checks():
    with pytest.raises(ValueError):
        log_negativity(vacuum_state(3), 2, 2)
    with pytest.raises(ValueError):
        log_negativity(vacuum_state(3), 1, 4)


def test_ellipses_of_two_mode_squeezing():
    r = 1.0
    s, d = pair_ellipses(two_mode_squeezed_state(r), 1, 2)
    hi, lo = math.exp(r) / math.sqrt(2), math.exp(-r) / math.sqrt(2)
    assert (s.semi_major, s.semi_minor) == pytest.approx((hi, lo), abs=1e-10)
    assert (d.semi_major, d.semi_minor) == pytest.approx((hi, lo), abs=1e-10)
    # x_1 + x_2 is anti-squeezed and x_1 - x_2 squeezed
    assert s.angle == pytest.approx(0.0, abs=1e-12)
    assert abs(d.angle) == pytest.approx(math.pi / 2, abs=1e-12)


def test_single_site_ellipse_and_circle():
    sigma = apply_symplectic(vacuum_state(1), squeeze(0.5))
    e, none = pair_ellipses(sigma, 1, 1)
    assert none is None
    assert e.semi_major == pytest.approx(math.exp(0.5) / math.sqrt(2))
    assert ellipse_of(0.5 * np.eye(2), (1, 1), "sum").angle == 0.0


def test_ellipse_angle_is_counter_clockwise_from_x():
    from chaincontrol.symplectic import rotation
    sigma = apply_symplectic(vacuum_state(1), rotation(0.3) @ squeeze(0.5))
    assert pair_ellipses(sigma, 1, 1)[0].angle == pytest.approx(0.3)


def test_all_ellipses_counts():
    reps = all_ellipses(vacuum_state(7))
    assert sum(r.kind == "sum" for r in reps) == 28
    assert sum(r.kind == "difference" for r in reps) == 21
    assert all(r.semi_major == pytest.approx(r.semi_minor) for r in reps)


def test_covariance_validation():
    with pytest.raises(ValueError, match="symmetric"):
        negativity_table(np.array([[0.5, 0.1], [0.0, 0.5]]))
    with pytest.raises(ValueError):
        symplectic_eigenvalues(np.eye(3))
