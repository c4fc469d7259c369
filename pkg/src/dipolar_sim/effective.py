"""Adiabatic elimination of the excited manifold and the large-detuning XY model."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .green import DipoleCouplings, couplings as build_couplings
from .hilbert import ProductBasis
from .lattice import ArrayGeometry, DriveField, LevelScheme, PolarizationBasis
from .lindblad import LindbladGenerator, NumericalError
from . import spins

COND_LIMIT = 1e12


# ---------------------------------------------------------------- GSM

@dataclass
class SingleExcitationBlock:
    h_nh: np.ndarray
    ground: ProductBasis
    single: ProductBasis
    raise_ops: dict      # (i, q) -> D^{i+}_q : ground -> single, dense
    lower_ops: dict      # (i, q) -> D^{i-}_q : single -> ground, dense
    scheme: LevelScheme


def build_h_nh(scheme: LevelScheme, cpl: DipoleCouplings, detuning: float,
               n_atoms: int | None = None) -> SingleExcitationBlock:
    """Non-Hermitian Hamiltonian on the one-excitation sector."""
    n = cpl.n_atoms if n_atoms is None else n_atoms
    ground = ProductBasis.ground_manifold(scheme, n)
    single = ProductBasis.for_scheme(scheme, n, exact_excited=1)
    qs = scheme.active_q()
    up = {(i, q): ground.site_operator(scheme.raising(q), i, target=single).toarray()
          for i in range(n) for q in qs}
    down = {(i, q): single.site_operator(scheme.lowering(q), i, target=ground).toarray()
            for i in range(n) for q in qs}
    h = -detuning * np.eye(single.dim, dtype=complex)
    for i in range(n):
        for j in range(n):
            for q in qs:
                for qq in qs:
                    coh = cpl.delta[i, j, q + 1, qq + 1] if i != j else 0.0
                    c = coh + 1j * cpl.gamma[i, j, q + 1, qq + 1]
                    if c != 0:
                        h -= c * (up[(i, q)] @ down[(j, qq)])
    return SingleExcitationBlock(h, ground, single, up, down, scheme)


@dataclass
class EffectiveModel:
    h_eff: np.ndarray
    jump_ops: dict                 # (i, q) -> L^{i-}_q on the ground manifold
    rates: np.ndarray              # Gamma^{ij}_{qq'} on the (i, q) index
    ground: ProductBasis
    condition: float
    e0: float = 0.0                # tr(h_eff) / dim, reported only

    def jumps_list(self):
        return list(self.jump_ops.values())

    def generator(self, envelope=None, switch_times=(), keep_hamiltonian=True,
                  keep_dissipation=True) -> LindbladGenerator:
        h = self.h_eff if keep_hamiltonian else np.zeros_like(self.h_eff)
        rates = self.rates if keep_dissipation else np.zeros_like(self.rates)
        gen = LindbladGenerator.build(h, self.jumps_list(), rates)
        if envelope is not None:
            # the whole effective generator scales with Omega^2, so it switches off with the drive
            gen.envelope = envelope
            gen.switch_times = tuple(switch_times)
            gen.gate_all = True
        return gen


def _resonance_report(block: SingleExcitationBlock) -> str:
    w, v = np.linalg.eig(block.h_nh)
    k = int(np.argmin(np.abs(w)))
    s = int(np.argmax(np.abs(v[:, k])))
    lab = block.single.labels[s]
    return f"eigenvalue {w[k]:.3e} dominated by local levels {lab.tolist()}"


def effective_operators(block: SingleExcitationBlock, drive: DriveField, geom: ArrayGeometry,
                        pol: PolarizationBasis | None = None,
                        rates: np.ndarray | None = None,
                        cpl: DipoleCouplings | None = None) -> EffectiveModel:
    """H_eff = -1/2 V- (H^-1 + H^-1^+) V+ and L^{i-}_q = D^{i-}_q H^-1 V+ by LU solves."""
    pol = pol or PolarizationBasis()
    cond = np.linalg.cond(block.h_nh)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise NumericalError(f"non-Hermitian block near singular (cond {cond:.2e}): "
                             + _resonance_report(block))
    amp = drive.site_amplitudes(geom, pol)
    v_plus = np.zeros((block.single.dim, block.ground.dim), complex)
    for (i, q), op in block.raise_ops.items():
        v_plus -= amp[i, q + 1] * op
    lu = sla.lu_factor(block.h_nh)
    x = sla.lu_solve(lu, v_plus)             # H^-1 V+
    y = v_plus.conj().T @ x                  # V- H^-1 V+
    h_eff = -0.5 * (y + y.conj().T)
    jumps = {key: op @ x for key, op in block.lower_ops.items()}
    qs = block.scheme.active_q()
    if rates is None:
        rates = cpl.rate_matrix(qs)
    e0 = float(np.trace(h_eff).real / len(h_eff))
    return EffectiveModel(h_eff, jumps, rates, block.ground, float(cond), e0)


def gsm_model(scheme: LevelScheme, geom: ArrayGeometry, drive: DriveField,
              pol: PolarizationBasis | None = None) -> EffectiveModel:
    pol = pol or PolarizationBasis()
    cpl = build_couplings(geom, pol)
    block = build_h_nh(scheme, cpl, drive.detuning)
    return effective_operators(block, drive, geom, pol, cpl=cpl)


# ---------------------------------------------------------------- XY model

@dataclass
class XYModel:
    """H = sum_{i != j} (cx_ij sx_i sx_j + cy_ij sy_i sy_j) + sum_i field_i . sigma_i

    Dissipation: jumps c1 * sigma^-_j (from q=+1) and c1 * sigma^+_j (q=-1) with the
    correlated rate matrix `rates` on the (j, channel) index, entering as
    sum_ab 2 R_ab (L_b rho L_a^+ - {L_a^+ L_b, rho}/2). The identity (q=0) jump
    has been folded into `field` where it has cross rates with the other channels.
    """
    cx: np.ndarray
    cy: np.ndarray
    rates: np.ndarray = field(repr=False)      # (2N, 2N), channel order (sigma^-, sigma^+) per site
    jump_amp: float = 0.0                      # -sqrt(2) Omega / (3 Delta)
    identity_amp: float = 0.0                  # Omega / (3 Delta)
    field: np.ndarray | None = None            # (N, 3)
    e0: float = 0.0
    rabi: float = 0.0
    detuning: float = 0.0

    @property
    def n_atoms(self) -> int:
        return self.cx.shape[0]

    def without_dissipation(self) -> "XYModel":
        return XYModel(self.cx, self.cy, np.zeros_like(self.rates), 0.0, 0.0,
                       np.zeros((self.n_atoms, 3)), self.e0, self.rabi, self.detuning)

    def hamiltonian(self, sparse=True, include_field=True):
        n = self.n_atoms
        sx = [spins.site_op(spins.SX, i, n, sparse) for i in range(n)]
        sy = [spins.site_op(spins.SY, i, n, sparse) for i in range(n)]
        h = 0 * sx[0]
        for i in range(n):
            for j in range(n):
                if i == j:
                    continue
                if self.cx[i, j]:
                    h = h + self.cx[i, j] * (sx[i] @ sx[j])
                if self.cy[i, j]:
                    h = h + self.cy[i, j] * (sy[i] @ sy[j])
        if include_field and self.field is not None and np.any(self.field):
            for i in range(n):
                for a, p in enumerate(spins.PAULI):
                    if self.field[i, a]:
                        h = h + self.field[i, a] * spins.site_op(p, i, n, sparse)
        return h

    def jump_list(self, sparse=True):
        n = self.n_atoms
        out = []
        for j in range(n):
            out.append(self.jump_amp * spins.site_op(spins.SM, j, n, sparse))
            out.append(self.jump_amp * spins.site_op(spins.SP, j, n, sparse))
        return out

    def generator(self) -> LindbladGenerator:
        return LindbladGenerator.build(self.hamiltonian(), self.jump_list(), self.rates)

    def classical_energy(self, s):
        """XY energy of classical spins s (..., N, 3), field excluded."""
        sx, sy = s[..., 0], s[..., 1]
        return (np.einsum("...i,ij,...j->...", sx, self.cx, sx)
                + np.einsum("...i,ij,...j->...", sy, self.cy, sy))


def xy_coefficients(cpl: DipoleCouplings, rabi: float, detuning: float):
    """C^x, C^y from the (q, q') = (+1, +1) and (+1, -1) dipolar couplings."""
    d11 = cpl.delta[:, :, 2, 2]
    d1m1 = cpl.delta[:, :, 2, 0]
    pref = -rabi**2 / (9 * detuning**2)
    cx = pref * (d11 + d1m1)
    cy = pref * (d11 - d1m1)
    imag = max(np.abs(cx.imag).max(), np.abs(cy.imag).max())
    if imag > 1e-12 * max(np.abs(cx).max(), 1e-300):
        raise ValueError("XY coefficients are complex for this geometry")
    cx, cy = cx.real.copy(), cy.real.copy()
    np.fill_diagonal(cx, 0)
    np.fill_diagonal(cy, 0)
    return cx, cy


def xy_truncation(cpl: DipoleCouplings, drive: DriveField, near_field_ok=True) -> XYModel:
    """Large-detuning limit of the GSM for F=1/2 <-> 1/2 atoms driven on the pi transition."""
    rabi, det = drive.rabi, drive.detuning
    if det == 0:
        raise ValueError("the XY limit needs a non-zero detuning")
    d_nn = np.abs(cpl.delta).max()
    if abs(det) < 10 * d_nn:
        import warnings
        warnings.warn(f"|Delta| = {abs(det)} is not large compared to dipolar shifts ~{d_nn:.3g}",
                      RuntimeWarning, stacklevel=2)
    cx, cy = xy_coefficients(cpl, rabi, det)
    n = cpl.n_atoms
    c1 = -np.sqrt(2) * rabi / (3 * det)
    c0 = rabi / (3 * det)
    # channel order per site: (q=+1 -> sigma^-, q=-1 -> sigma^+)
    g = cpl.gamma
    rates = np.zeros((2 * n, 2 * n), complex)
    for a, qa in enumerate((1, -1)):
        for b, qb in enumerate((1, -1)):
            rates[a::2, b::2] = g[:, :, qa + 1, qb + 1]
    # identity jump: cross terms with the spin jumps act as a Hamiltonian
    # H' = i sum_b (w_b L_b - w_b^* L_b^+), w_b = sum_i Gamma_{(i,0), b} c0
    h_field = np.zeros((n, 3))
    w = np.zeros(2 * n, complex)
    for b, qb in enumerate((1, -1)):
        w[b::2] = c0 * g[:, :, 1, qb + 1].sum(0)
    if np.abs(w).max() > 1e-14:
        for j in range(n):
            # L_b = c1 sigma^-  and  c1 sigma^+ ; collect i (w L - w^* L^+) in Pauli components
            op = np.zeros((2, 2), complex)
            for b, sig in enumerate((spins.SM, spins.SP)):
                lb = c1 * sig
                op += 1j * (w[2 * j + b] * lb - np.conj(w[2 * j + b]) * lb.conj().T)
            h_field[j] = [0.5 * np.trace(op @ p).real for p in spins.PAULI]
    e0 = n * rabi**2 / (3 * det)
    return XYModel(cx, cy, rates, c1, c0, h_field, e0, rabi, det)


def xy_model(geom: ArrayGeometry, drive: DriveField, pol: PolarizationBasis | None = None):
    return xy_truncation(build_couplings(geom, pol or PolarizationBasis()), drive)


def nearfield_cx(dist, rabi=1.0, detuning=1.0):
    """Closed-form near-field C^x = (Omega^2 / 12 Delta^2) cos(k r) / (k r)^3 (Gamma = 1)."""
    kr = 2 * np.pi * np.asarray(dist, float)
    return rabi**2 / (12 * detuning**2) * np.cos(kr) / kr**3


def truncation_error(h_eff: np.ndarray, xy: XYModel) -> float:
    """||H_eff - E0 - H_XY|| / ||H_XY|| (Frobenius), E0 the trace part of H_eff."""
    h_xy = xy.hamiltonian(sparse=False, include_field=True)
    e0 = np.trace(h_eff) / len(h_eff)
    resid = h_eff - e0 * np.eye(len(h_eff)) - h_xy
    return float(np.linalg.norm(resid) / np.linalg.norm(h_xy))


# ---------------------------------------------------------------- N = 2 analysis

@dataclass(frozen=True)
class PauliDecomposition:
    c_ii: float
    c_alpha: tuple        # (C_x, C_y, C_z) of sum_i sigma^alpha_i
    c_pp: float           # sigma+ sigma+ + h.c.
    c_pm: float           # sigma+ sigma- + h.c.
    c_zz: float
    residual: float

    def eigen_pair(self):
        """(lambda_1, lambda_2) for the Bell states (|--> + |++>) and (|-+> + |+->)."""
        lam1 = self.c_zz + self.c_pp + self.c_ii
        lam2 = -self.c_zz + self.c_pm + self.c_ii
        return lam1, lam2

    def matrix(self):
        return _pauli_terms(self.c_ii, self.c_alpha, self.c_pp, self.c_pm, self.c_zz)


def _two_site_basis():
    k = np.kron
    s = spins
    one = k(s.ID2, s.ID2)
    single = [k(p, s.ID2) + k(s.ID2, p) for p in s.PAULI]
    pp = k(s.SP, s.SP) + k(s.SM, s.SM)
    pm = k(s.SP, s.SM) + k(s.SM, s.SP)
    zz = k(s.SZ, s.SZ)
    return one, single, pp, pm, zz


def _pauli_terms(c_ii, c_alpha, c_pp, c_pm, c_zz):
    one, single, pp, pm, zz = _two_site_basis()
    return (c_ii * one + sum(c * op for c, op in zip(c_alpha, single))
            + c_pp * pp + c_pm * pm + c_zz * zz)


def pauli_decompose_n2(h_eff: np.ndarray, tol=1e-8) -> PauliDecomposition:
    if h_eff.shape != (4, 4):
        raise ValueError("Pauli decomposition needs a two-atom spin-1/2 ground manifold")
    one, single, pp, pm, zz = _two_site_basis()
    proj = lambda op: (np.trace(op.conj().T @ h_eff) / np.trace(op.conj().T @ op)).real
    c = dict(c_ii=proj(one), c_alpha=tuple(proj(o) for o in single),
             c_pp=proj(pp), c_pm=proj(pm), c_zz=proj(zz))
    resid = float(np.abs(h_eff - _pauli_terms(**c)).max())
    if resid > tol:
        raise ValueError(f"Hamiltonian has components outside the two-body basis (residual {resid:.2e})")
    return PauliDecomposition(residual=resid, **c)


def renyi_closed_form(lam1, lam2, t):
    """Second Renyi entropy of one atom for the two-Bell-state superposition."""
    return -np.log2(0.75 + 0.25 * np.cos(2 * (lam1 - lam2) * np.asarray(t, float)))
