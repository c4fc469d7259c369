from functools import reduce

import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, strategies as st

from dipolar_sim import spins
from dipolar_sim.observables import (Bipartition, ModeMoments, log_negativity, mode_moments_from_state,
                                     mode_operators, moments_from_density, partial_transpose,
                                     reduced_state, renyi2, structure_factor, toth_squeezing,
                                     wineland_ratio)

BELL = np.array([1, 0, 0, 1]) / np.sqrt(2)


def _random_rho(seed, d, rank=None):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(d, rank or d)) + 1j * rng.normal(size=(d, rank or d))
    rho = a @ a.conj().T
    return rho / np.trace(rho)


def _random_unitary(seed, d):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return sla.expm(1j * (a + a.conj().T))


def test_bell_and_product_states():
    bell = np.outer(BELL, BELL)
    assert log_negativity(bell, [2, 2], Bipartition((0,), 2)) == pytest.approx(1.0)
    assert renyi2(BELL, [2, 2], Bipartition((0,), 2)) == pytest.approx(1.0)
    prod = np.kron(_random_rho(1, 2), _random_rho(2, 3))
    assert log_negativity(prod, [2, 3], Bipartition((0,), 2)) == pytest.approx(0.0, abs=1e-12)


def test_partial_trace_and_transpose_of_kron():
    a, b, c = _random_rho(3, 2), _random_rho(4, 3), _random_rho(5, 2)
    rho = reduce(np.kron, [a, b, c])
    assert np.allclose(reduced_state(rho, [2, 3, 2], [1]), b)
    assert np.allclose(reduced_state(rho, [2, 3, 2], [0, 2]), np.kron(a, c))
    assert np.allclose(partial_transpose(rho, [2, 3, 2], [1]), reduce(np.kron, [a, b.T, c]))
    with pytest.raises(ValueError):
        reduced_state(rho, [2, 2], [0])


@given(st.integers(0, 10**6), st.integers(1, 4))
def test_negativity_eig_and_svd_routes_agree(seed, rank):
    rho = _random_rho(seed, 6, rank)
    part = Bipartition((0,), 2)
    assert log_negativity(rho, [2, 3], part) == pytest.approx(
        log_negativity(rho, [2, 3], part, method="svd"), abs=1e-9)


@given(st.integers(0, 10**6))
def test_local_unitary_invariance(seed):
    rho = _random_rho(seed, 8, 2)
    u = reduce(np.kron, [_random_unitary(seed + i, 2) for i in range(3)])
    rho2 = u @ rho @ u.conj().T
    part = Bipartition((1,), 3)
    assert log_negativity(rho2, 2, part) == pytest.approx(log_negativity(rho, 2, part), abs=1e-9)
    assert renyi2(rho2, 2, part) == pytest.approx(renyi2(rho, 2, part), abs=1e-9)


def test_bipartition_validation():
    assert Bipartition.middle(5).subsystem == (2,)
    assert Bipartition((3, 1, 1), 4).complement == (0, 2)
    with pytest.raises(ValueError):
        Bipartition((), 3)
    with pytest.raises(ValueError):
        Bipartition((3,), 3)


def _css(n):
    psi = spins.product_ket(spins.PLUS_X, n)
    return np.outer(psi, psi.conj())


def test_toth_parameter_of_coherent_state_is_one():
    for n in (2, 3, 4):
        assert toth_squeezing(moments_from_density(_css(n), n)) == pytest.approx(1.0)


@given(st.floats(0, np.pi), st.floats(0, 2 * np.pi))
def test_toth_parameter_rotation_invariant(theta, phi):
    n = 3
    rho = _random_rho(7, 8, 1)
    axis = np.array([np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)])
    gen = sum(a * p for a, p in zip(axis, spins.PAULI))
    u = reduce(np.kron, [sla.expm(-0.6j * gen)] * n)
    a = toth_squeezing(moments_from_density(rho, n))
    b = toth_squeezing(moments_from_density(u @ rho @ u.conj().T, n))
    assert a == pytest.approx(b, rel=1e-9, abs=1e-12)


def test_toth_detects_dicke_state():
    # symmetric Dicke state with two of four spins flipped is entangled: xi_D^2 < 1
    psi = np.zeros(16)
    for idx in range(16):
        if bin(idx).count("1") == 2:
            psi[idx] = 1
    psi /= np.linalg.norm(psi)
    assert toth_squeezing(moments_from_density(np.outer(psi, psi), 4)) < 1


def test_mode_observables_of_coherent_state():
    pos = np.array([[0.0, 0, 0], [0.1, 0, 0], [0.2, 0, 0]])
    ops = mode_operators(pos, np.array([np.pi / 0.3, 0.0]))
    psi = spins.product_ket(spins.PLUS_X, 3)
    m = mode_moments_from_state(psi, ops, 3)
    assert structure_factor(m) == pytest.approx(0.0, abs=1e-12)
    for phi in (0.0, 0.7, 2.0):
        assert wineland_ratio(m, phi) == pytest.approx(1.0)
    # the density-matrix route agrees with the ket route
    m2 = mode_moments_from_state(np.outer(psi, psi.conj()), ops, 3)
    assert m2.szz == pytest.approx(m.szz) and m2.sx == pytest.approx(m.sx)


@given(st.floats(0.1, 2), st.floats(0.1, 2), st.floats(-0.9, 0.9))
def test_optimal_phi_minimizes_variance(zz, yy, corr):
    zy = corr * np.sqrt(zz * yy)
    m = ModeMoments(zz, yy, zy, 1.0, 4)
    grid = np.linspace(0, np.pi, 2001)
    assert m.variance(m.optimal_phi()) <= m.variance(grid).min() + 1e-9
