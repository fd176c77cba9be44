import itertools
import math

import numpy as np
import pytest
from scipy.linalg import expm

from chaincontrol.cradle import (
    algebra_rank,
    chain_generators,
    controllability_dimension,
    coupling_commutator,
    cradle_basis,
    embed_coupling,
    generator,
    lie_closure,
)
from chaincontrol.symplectic import SP2_GENERATORS, is_symplectic, random_sp2, sp2_exp


def site_coupling(N, n, S):
    """Site-basis propagator acting with S on (q_n - q_{n+1})/sqrt(2)."""
    v = np.zeros((N, 1))
    v[n - 1], v[n] = 1 / math.sqrt(2), -1 / math.sqrt(2)
    V = np.kron(v, np.eye(2))
    return np.eye(2 * N) + V @ (S - np.eye(2)) @ V.T


def conjugation_oracle(n, S, N):
    C = cradle_basis(N).phase_space_matrix
    return (C @ site_coupling(N, n, S) @ C.T)[:-2, :-2]


def test_cradle_basis_rows():
    B = cradle_basis(4)
    C = B.position_matrix
    assert B.n_modes == 3
    assert np.allclose(C @ C.T, np.eye(4))
    assert np.allclose(C[0], [1 / math.sqrt(2), -1 / math.sqrt(2), 0, 0])
    assert np.allclose(C[2], [1 / math.sqrt(12)] * 3 + [-math.sqrt(3 / 4)])
    assert np.allclose(C[3], 0.5)


def test_cradle_basis_rejects_short_chain():
    with pytest.raises(ValueError):
        cradle_basis(1)


@pytest.mark.parametrize("N", [2, 3, 5, 8])
def test_block_formula_matches_conjugation(N):
    rng = np.random.default_rng(N)
    for n in range(1, N):
        S = random_sp2(rng, 1.0)
        D = embed_coupling(n, S, N).matrix
        assert np.max(np.abs(D - conjugation_oracle(n, S, N))) < 1e-12
        assert is_symplectic(D)


def test_embedding_touches_only_two_modes():
    S = sp2_exp(0.3, 0.1, -0.4)
    D = embed_coupling(3, S, 6).matrix
    off = D.copy()
    off[2:6, 2:6] = np.eye(4)
    assert np.array_equal(off, np.eye(10))


def test_embedding_validates():
    with pytest.raises(ValueError):
        embed_coupling(0, np.eye(2), 4)
    with pytest.raises(ValueError):
        embed_coupling(4, np.eye(2), 4)
    with pytest.raises(ValueError):
        embed_coupling(1, 2 * np.eye(2), 4)


def test_generator_exponentiates_to_coupling():
    rng = np.random.default_rng(3)
    for _ in range(20):
        N = int(rng.integers(2, 8))
        n = int(rng.integers(1, N))
        t = rng.uniform(-1, 1, 3)
        s = sum(c * g for c, g in zip(t, SP2_GENERATORS))
        lhs = expm(generator(n, s, N - 1))
        assert np.max(np.abs(lhs - embed_coupling(n, sp2_exp(*t), N).matrix)) < 1e-9


def test_generator_rejects_trace():
    with pytest.raises(ValueError, match="span"):
        generator(1, np.eye(2), 2)


@pytest.mark.parametrize("n", range(2, 7))
def test_commutator_formula_brute_force(n):
    for i, j in itertools.product(range(1, 4), repeat=2):
        si, sj = SP2_GENERATORS[i - 1], SP2_GENERATORS[j - 1]
        a = np.zeros((2 * n, 2 * n))
        a[2 * n - 4:2 * n - 2, 2 * n - 4:2 * n - 2] = si
        b = generator(n, sj, n)
        brute = (a @ b - b @ a)[2 * n - 4:, 2 * n - 4:]
        assert np.max(np.abs(brute - coupling_commutator(i, j, n))) < 1e-12


def test_commutator_argument_checks():
    with pytest.raises(ValueError):
        coupling_commutator(0, 1, 3)
    with pytest.raises(ValueError):
        coupling_commutator(1, 1, 1)


@pytest.mark.parametrize("modes,dim", [(1, 3), (2, 10), (3, 21), (4, 36)])
def test_controllability(modes, dim):
    assert controllability_dimension(modes) == dim


def test_closure_stops_after_empty_round():
    c = lie_closure(chain_generators(2))
    assert c.growth[-1] == 0
    assert c.dimension == 10
    assert algebra_rank(c.basis) == 10


def test_single_site_generators_do_not_close_to_everything():
    # couplings on site 2 alone only reach a copy of sp(2)
    gens = [generator(2, s, 2) for s in SP2_GENERATORS]
    assert lie_closure(gens).dimension == 3
