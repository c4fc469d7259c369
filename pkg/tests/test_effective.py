import dataclasses

import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, strategies as st

from dipolar_sim import spins
from dipolar_sim.effective import (NumericalError, build_h_nh, effective_operators, gsm_model,
                                   nearfield_cx, pauli_decompose_n2, renyi_closed_form,
                                   truncation_error, xy_model, _pauli_terms)
from dipolar_sim.green import couplings
from dipolar_sim.lattice import DriveField, build_lattice, four_level, two_level
from dipolar_sim.observables import Bipartition, renyi2


@given(rabi=st.floats(0.01, 0.3), det=st.floats(-20, 20).filter(lambda d: abs(d) > 0.5))
def test_single_two_level_atom_light_shift_and_scattering(rabi, det):
    # second-order perturbation theory for H = -Delta |e><e| - Omega (|e><g| + h.c.), Gamma = 1
    m = gsm_model(two_level(), build_lattice(1, 1, 0.1), DriveField(rabi, det))
    denom = det**2 + 0.25
    assert m.h_eff[0, 0].real == pytest.approx(rabi**2 * det / denom, rel=1e-10)
    (jump,) = m.jumps_list()
    scatter = 2 * m.rates[0, 0].real * abs(jump[0, 0]) ** 2
    assert scatter == pytest.approx(rabi**2 / denom, rel=1e-10)


def test_effective_generator_scales_with_rabi_squared():
    g = build_lattice(1, 3, 0.1)
    a = gsm_model(four_level(), g, DriveField(0.1, -3.0))
    b = gsm_model(four_level(), g, DriveField(0.05, -3.0))
    assert np.allclose(a.h_eff, 4 * b.h_eff, atol=1e-15)
    for ja, jb in zip(a.jumps_list(), b.jumps_list()):
        assert np.allclose(ja, 2 * jb, atol=1e-15)
    assert np.allclose(a.rates, b.rates)


def test_effective_hamiltonian_hermitian_and_rates_psd():
    m = gsm_model(four_level(), build_lattice(2, 2, 0.1), DriveField(0.1, -3.0))
    assert np.allclose(m.h_eff, m.h_eff.conj().T)
    assert np.linalg.eigvalsh(m.rates).min() > -1e-12
    assert m.condition < 1e12


def test_singular_block_raises():
    g = build_lattice(1, 2, 0.1)
    cpl = couplings(g)
    block = build_h_nh(four_level(), cpl, -3.0)
    h = block.h_nh.copy()
    h[:, 0] = 0
    with pytest.raises(NumericalError, match="singular"):
        effective_operators(dataclasses.replace(block, h_nh=h), DriveField(0.1, -3.0), g, cpl=cpl)


def test_xy_coefficients_near_field_limit():
    for r in (0.01, 0.02):
        xy = xy_model(build_lattice(1, 2, r), DriveField(0.1, 100.0))
        ref = nearfield_cx(r, 0.1, 100.0)
        assert xy.cx[0, 1] == pytest.approx(ref, rel=5 * (2 * np.pi * r) ** 2)
        assert xy.cy[0, 1] / xy.cx[0, 1] == pytest.approx(-2, rel=5 * (2 * np.pi * r) ** 2)
        assert np.allclose(xy.cx, xy.cx.T) and np.allclose(xy.cy, xy.cy.T)


def test_xy_truncation_error_falls_with_detuning():
    g = build_lattice(1, 3, 0.1)
    errs = []
    for det in (30.0, 300.0, 3000.0):
        gsm = gsm_model(four_level(), g, DriveField(0.1, det))
        errs.append(truncation_error(gsm.h_eff, xy_model(g, DriveField(0.1, det))))
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 1e-2


def test_xy_spectrum_matches_gsm_at_large_detuning():
    g = build_lattice(1, 3, 0.1)
    drive = DriveField(0.1, 1000.0)
    gsm = gsm_model(four_level(), g, drive)
    xy = xy_model(g, drive)
    a = np.linalg.eigvalsh(gsm.h_eff - np.trace(gsm.h_eff) / 8 * np.eye(8))
    b = np.linalg.eigvalsh(xy.hamiltonian(sparse=False))
    assert np.abs(a - b).max() < 1e-2 * np.abs(b).max()


@given(st.lists(st.floats(-1, 1), min_size=7, max_size=7))
def test_pauli_decomposition_roundtrip(c):
    h = _pauli_terms(c[0], tuple(c[1:4]), c[4], c[5], c[6])
    d = pauli_decompose_n2(h)
    assert np.allclose([d.c_ii, *d.c_alpha, d.c_pp, d.c_pm, d.c_zz], c, atol=1e-12)


def test_pauli_decomposition_rejects_foreign_terms():
    h = np.kron(spins.SX, spins.SZ)
    with pytest.raises(ValueError):
        pauli_decompose_n2(h)


@given(st.lists(st.floats(-1, 1), min_size=4, max_size=4))
def test_renyi_closed_form_matches_evolution(c):
    c_ii, c_pp, c_pm, c_zz = c
    h = _pauli_terms(c_ii, (0.0, 0.0, 0.0), c_pp, c_pm, c_zz)
    lam1, lam2 = pauli_decompose_n2(h).eigen_pair()
    psi0 = np.kron(spins.PLUS_X, spins.PLUS_X)
    for t in (0.0, 0.7, 2.3):
        psi = sla.expm(-1j * h * t) @ psi0
        assert renyi2(psi, [2, 2], Bipartition((0,), 2)) == pytest.approx(
            renyi_closed_form(lam1, lam2, t), abs=1e-9)


def test_gsm_two_atom_hamiltonian_in_two_body_basis():
    m = gsm_model(four_level(), build_lattice(1, 2, 0.1), DriveField(0.1, -3.0))
    d = pauli_decompose_n2(m.h_eff)
    assert d.residual < 1e-10
