"""Full multilevel master equation for small arrays (ED tier)."""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .green import DipoleCouplings, couplings as build_couplings
from .hilbert import ProductBasis
from .lattice import ArrayGeometry, DriveField, LevelScheme, PolarizationBasis
from .lindblad import LindbladGenerator


def lowering_ops(scheme: LevelScheme, basis: ProductBasis, qs=None):
    """{(i, q): D^{i-}_q} as sparse matrices on `basis`."""
    qs = scheme.active_q() if qs is None else qs
    return {(i, q): basis.site_operator(scheme.lowering(q), i)
            for i in range(basis.n_atoms) for q in qs}


def excited_projector(scheme: LevelScheme, basis: ProductBasis):
    return sp.diags(basis.n_exc.astype(complex), format="csr")


def build_drive_hamiltonian(scheme: LevelScheme, geom: ArrayGeometry, drive: DriveField,
                            basis: ProductBasis, pol: PolarizationBasis | None = None):
    """Returns (detuning part, laser part) with H0 = detuning + envelope(t) * laser."""
    pol = pol or PolarizationBasis()
    if basis.n_atoms != geom.n_atoms or basis.local_dim != scheme.local_dim:
        raise ValueError("level scheme / geometry do not match the Hilbert space")
    h_det = -drive.detuning * excited_projector(scheme, basis)
    amp = drive.site_amplitudes(geom, pol)
    h_drv = sp.csr_matrix((basis.dim, basis.dim), dtype=complex)
    for i in range(geom.n_atoms):
        for q in scheme.active_q():
            w = amp[i, q + 1]
            if w == 0:
                continue
            up = basis.site_operator(scheme.raising(q), i)
            h_drv = h_drv - w * up
    h_drv = h_drv + h_drv.conj().T
    return h_det, h_drv


def build_dipolar_terms(scheme: LevelScheme, cpl: DipoleCouplings, basis: ProductBasis):
    """Flip-flop Hamiltonian over i != j, plus the jump list and (i,q) rate matrix."""
    qs = scheme.active_q()
    low = lowering_ops(scheme, basis, qs)
    n = basis.n_atoms
    h = sp.csr_matrix((basis.dim, basis.dim), dtype=complex)
    for i in range(n):
        for q in qs:
            acc = None
            for j in range(n):
                if j == i:
                    continue
                for qq in qs:
                    c = cpl.delta[i, j, q + 1, qq + 1]
                    if c == 0:
                        continue
                    term = c * low[(j, qq)]
                    acc = term if acc is None else acc + term
            if acc is not None:
                h = h - low[(i, q)].conj().T @ acc
    jumps = [low[(i, q)] for i in range(n) for q in qs]
    rates = cpl.rate_matrix(qs)
    return h, jumps, rates


def ed_generator(scheme: LevelScheme, geom: ArrayGeometry, drive: DriveField,
                 pol: PolarizationBasis | None = None, max_excited=None,
                 cpl: DipoleCouplings | None = None):
    """Full master-equation generator; max_excited caps simultaneously excited atoms."""
    pol = pol or PolarizationBasis()
    basis = ProductBasis.for_scheme(scheme, geom.n_atoms, max_excited=max_excited)
    cpl = cpl or build_couplings(geom, pol)
    h_det, h_drv = build_drive_hamiltonian(scheme, geom, drive, basis, pol)
    h_dd, jumps, rates = build_dipolar_terms(scheme, cpl, basis)
    gen = LindbladGenerator.build(h_det + h_dd, jumps, rates, driven=h_drv,
                                  envelope=drive.envelope if drive.shape != 1 else None,
                                  switch_times=drive.switch_times())
    return gen, basis


def default_ground_state(scheme: LevelScheme) -> np.ndarray:
    """Local initial ket: |g> for two-level, equal superposition of the two lowest ground
    sublevels otherwise."""
    psi = np.zeros(scheme.local_dim, complex)
    if scheme.n_ground == 1:
        psi[0] = 1
    else:
        psi[:2] = 1 / np.sqrt(2)
    return psi


def product_density(basis: ProductBasis, local_states) -> np.ndarray:
    if np.ndim(local_states[0]) == 0:
        local_states = [local_states] * basis.n_atoms
    psi = basis.product_state(local_states)
    return np.outer(psi, psi.conj())
