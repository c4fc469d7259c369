"""Linear spin-wave theory of the anisotropic XY model around the x-polarized state.

Holstein-Primakoff bosons on the periodic lattice give, per momentum k,
    H_k = eps_k b_k^+ b_k - (Omega_k / 2)(b_k b_-k + h.c.)
with eps_k = -4 Cx_0 + 2 Cy_k and Omega_k = 2 Cy_k. All observables below are the
closed-form solutions for the vacuum initial state.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .effective import XYModel, xy_coefficients
from .green import couplings as build_couplings, green_tensor_array
from .lattice import ArrayGeometry, DriveField, PolarizationBasis
from .green import DipoleCouplings


# ---------------------------------------------------------------- periodic couplings

def _grid_shape(geom: ArrayGeometry):
    if geom.dim == 1:
        return (geom.n_atoms,)
    if geom.dim == 2:
        n = geom.n_per_side
        if n * n != geom.n_atoms:
            raise ValueError("2D spin-wave analysis needs a square array")
        return (n, n)
    raise ValueError("spin-wave analysis needs a generated 1D or 2D lattice")


def minimum_image_displacements(geom: ArrayGeometry) -> np.ndarray:
    """Cartesian minimum-image vector for every displacement (dx, dz) on the torus."""
    shape = _grid_shape(geom)
    a = geom.lattice_constant
    out = np.zeros(shape + (3,))
    for idx in np.ndindex(*shape):
        wrapped = [(d + L // 2) % L - L // 2 for d, L in zip(idx, shape)]
        if len(shape) == 1:
            out[idx] = (wrapped[0] * a, 0, 0)
        else:
            # index order (row along Z, column along X) matches site = col + L * row
            out[idx] = (wrapped[1] * a, 0, wrapped[0] * a)
    return out


def periodic_couplings(geom: ArrayGeometry, pol: PolarizationBasis | None = None,
                       gamma: float = 1.0) -> DipoleCouplings:
    """Dipolar couplings with pair separations taken as minimum images on the torus."""
    pol = pol or PolarizationBasis()
    shape = _grid_shape(geom)
    disp = minimum_image_displacements(geom)
    flat = disp.reshape(-1, 3)
    a = geom.lattice_constant
    # G at each displacement (the zero displacement is skipped). On even L a component of
    # exactly L/2 has two equally short images; averaging them keeps C(d) = C(-d).
    g = np.zeros((len(flat), 3, 3), complex)
    axes = (0,) if len(shape) == 1 else (2, 0)        # Cartesian axis of each grid index
    for n, r in enumerate(flat):
        if not np.any(r):
            continue
        images = [r]
        for L, ax in zip(shape, axes):
            if L % 2 == 0 and np.isclose(abs(r[ax]), L // 2 * a):
                flipped = [im.copy() for im in images]
                for im in flipped:
                    im[ax] = -im[ax]
                images += flipped
        g[n] = np.mean([green_tensor_array(np.stack([np.zeros(3), im]), gamma)[1, 0]
                        for im in images], axis=0)
    ev = pol.vectors
    proj = lambda m: np.einsum("qa,dab,pb->dqp", ev.conj(), m, ev)
    d_disp, g_disp = proj(g.real), proj(g.imag)
    n = geom.n_atoms
    coords = _site_coords(geom, shape)
    delta = np.zeros((n, n, 3, 3), complex)
    gam = np.zeros((n, n, 3, 3), complex)
    for i in range(n):
        rel = tuple(((coords[i] - coords).T) % np.array(shape)[:, None])
        lin = np.ravel_multi_index(rel, shape)
        delta[i] = d_disp[lin]
        gam[i] = g_disp[lin]
        gam[i, i] = 0.5 * gamma * np.eye(3)
    return DipoleCouplings(delta, gam, gamma)


def _site_coords(geom, shape):
    idx = np.arange(geom.n_atoms)
    if len(shape) == 1:
        return idx[:, None]
    L = shape[0]
    return np.stack([idx // L, idx % L], axis=1)      # (row along Z, column along X)


def periodic_xy_model(geom: ArrayGeometry, drive: DriveField,
                      pol: PolarizationBasis | None = None) -> XYModel:
    """XY couplings on the torus (no dissipation), the Hamiltonian the spin-wave theory solves."""
    cpl = periodic_couplings(geom, pol)
    cx, cy = xy_coefficients(cpl, drive.rabi, drive.detuning)
    n = geom.n_atoms
    return XYModel(cx, cy, np.zeros((2 * n, 2 * n)), 0.0, 0.0, np.zeros((n, 3)),
                   n * drive.rabi**2 / (3 * drive.detuning), drive.rabi, drive.detuning)


# ---------------------------------------------------------------- Fourier transform

def reciprocal_grid(geom: ArrayGeometry) -> np.ndarray:
    """Momenta (k_X, k_Z), components 2 pi n / (L a) with n = 1..L; shape (N, 2)."""
    shape = _grid_shape(geom)
    L = shape[0]
    a = geom.lattice_constant
    comp = 2 * np.pi * np.arange(1, L + 1) / (L * a)
    if len(shape) == 1:
        return np.stack([comp, np.zeros(L)], axis=1)
    kz, kx = np.meshgrid(comp, comp, indexing="ij")
    return np.stack([kx.ravel(), kz.ravel()], axis=1)


def displacement_table(c, geom: ArrayGeometry) -> np.ndarray:
    """C(r_i - r_j) as a function of the lattice displacement, read off row 0.

    Raises if the matrix is not translation invariant on the torus.
    """
    shape = _grid_shape(geom)
    coords = _site_coords(geom, shape)
    tab = np.zeros(shape)
    seen = np.zeros(shape, bool)
    for i in range(geom.n_atoms):
        rel = ((coords[i] - coords) % np.array(shape))
        for j in range(geom.n_atoms):
            key = tuple(rel[j])
            if seen[key]:
                if abs(tab[key] - c[i, j]) > 1e-9 * max(1.0, abs(c).max()):
                    raise ValueError("couplings are not translation invariant; use periodic=False")
            else:
                tab[key] = c[i, j]
                seen[key] = True
    return tab


def fourier_coefficients(c, geom: ArrayGeometry, periodic=True) -> np.ndarray:
    """C~_k on the reciprocal grid (ordering of reciprocal_grid).

    periodic: C~_k = sum_d exp(-i k . d) C(d) over torus displacements d.
    otherwise the site-averaged form (1/N) sum_ij exp(-i k . (r_i - r_j)) C_ij.
    """
    ks = reciprocal_grid(geom)
    if periodic:
        tab = displacement_table(c, geom)
        # FFT index m corresponds to k = 2 pi m / (L a); the grid n = 1..L maps to m = n mod L
        ft = np.fft.fftn(tab)
        shape = tab.shape
        L = shape[0]
        idx = np.arange(1, L + 1) % L
        if len(shape) == 1:
            out = ft[idx]
        else:
            # ks is ordered with k_Z slow, k_X fast; table axes are (Z, X)
            out = ft[np.ix_(idx, idx)].ravel()
        return out.real if np.abs(out.imag).max() < 1e-12 * max(1, np.abs(out).max()) else out
    pos = geom.positions
    ph = np.exp(-1j * (np.outer(ks[:, 0], pos[:, 0]) + np.outer(ks[:, 1], pos[:, 2])))
    out = np.einsum("ki,ij,kj->k", ph, c, ph.conj()) / geom.n_atoms
    return out.real if np.abs(out.imag).max() < 1e-12 * max(1, np.abs(out).max()) else out


def inverse_fourier(ck, geom: ArrayGeometry) -> np.ndarray:
    """Rebuild the N x N coupling matrix from C~_k: C_ij = (1/N) sum_k exp(i k . r_ij) C~_k."""
    ks = reciprocal_grid(geom)
    pos = geom.positions
    ph = np.exp(1j * (np.outer(pos[:, 0], ks[:, 0]) + np.outer(pos[:, 2], ks[:, 1])))   # (N, K)
    c = (ph * ck[None, :]) @ ph.conj().T / geom.n_atoms
    return c.real if np.abs(c.imag).max() < 1e-10 else c


# ---------------------------------------------------------------- spectrum

def self_conjugate(ks, geom: ArrayGeometry) -> np.ndarray:
    """f(k): 1 where k and -k are the same mode (2k on the reciprocal lattice)."""
    a = geom.lattice_constant
    m = ks * a / np.pi                     # k in units of pi / a
    return np.all(np.abs(m - np.round(m)) < 1e-9, axis=1).astype(float)


@dataclass(frozen=True)
class SpinWaveSpectrum:
    ks: np.ndarray          # (K, 2)
    eps: np.ndarray
    omega: np.ndarray
    xi2: np.ndarray
    f: np.ndarray
    cx_k: np.ndarray
    cy_k: np.ndarray

    @property
    def unstable(self) -> np.ndarray:
        return self.xi2 < 0

    def index(self, k) -> int:
        d = np.linalg.norm(self.ks - np.asarray(k, float)[None, :], axis=1)
        i = int(np.argmin(d))
        if d[i] > 1e-8 * max(1.0, np.abs(self.ks).max()):
            raise ValueError(f"k = {k} is not on the reciprocal grid")
        return i

    def bogoliubov_angle(self):
        """theta(k) with tanh(2 theta) = Omega_k / eps_k on stable modes (nan elsewhere)."""
        out = np.full(len(self.ks), np.nan)
        ok = (self.xi2 > 0) & (np.abs(self.eps) > np.abs(self.omega))
        out[ok] = 0.5 * np.arctanh(self.omega[ok] / self.eps[ok])
        return out


def spectrum(cx_k, cy_k, ks, geom: ArrayGeometry) -> SpinWaveSpectrum:
    cx_k, cy_k = np.real_if_close(cx_k), np.real_if_close(cy_k)
    if np.iscomplexobj(cx_k) or np.iscomplexobj(cy_k):
        raise ValueError("spin-wave couplings must be real")
    zero = np.all(np.isclose(np.mod(ks * geom.lattice_constant, 2 * np.pi), 0)
                  | np.isclose(np.mod(ks * geom.lattice_constant, 2 * np.pi), 2 * np.pi), axis=1)
    cx0 = cx_k[zero][0]
    eps = -4 * cx0 + 2 * cy_k
    om = 2 * cy_k
    return SpinWaveSpectrum(ks, eps, om, eps**2 - om**2, self_conjugate(ks, geom), cx_k, cy_k)


def spinwave_spectrum(xy: XYModel, geom: ArrayGeometry, periodic=True) -> SpinWaveSpectrum:
    cxk = fourier_coefficients(xy.cx, geom, periodic)
    cyk = fourier_coefficients(xy.cy, geom, periodic)
    return spectrum(cxk, cyk, reciprocal_grid(geom), geom)


# ---------------------------------------------------------------- closed forms

def _sin2_over(u):
    """sin^2(sqrt u) / u, continued to u < 0 as sinh^2(sqrt(-u)) / (-u)."""
    u = np.asarray(u, float)
    out = np.ones_like(u)
    small = np.abs(u) < 1e-6
    out[small] = 1 - u[small] / 3 + 2 * u[small] ** 2 / 45
    pos = (u > 0) & ~small
    neg = (u < 0) & ~small
    out[pos] = np.sin(np.sqrt(u[pos])) ** 2 / u[pos]
    out[neg] = np.sinh(np.sqrt(-u[neg])) ** 2 / (-u[neg])
    return out


def _sin2x_over(u):
    """sin(2 sqrt u) / (2 sqrt u), continued to u < 0."""
    u = np.asarray(u, float)
    out = np.ones_like(u)
    small = np.abs(u) < 1e-6
    out[small] = 1 - 2 * u[small] / 3 + 2 * u[small] ** 2 / 15
    pos = (u > 0) & ~small
    neg = (u < 0) & ~small
    out[pos] = np.sin(2 * np.sqrt(u[pos])) / (2 * np.sqrt(u[pos]))
    out[neg] = np.sinh(2 * np.sqrt(-u[neg])) / (2 * np.sqrt(-u[neg]))
    return out


def _mode(spec, k):
    i = spec.index(k) if np.ndim(k) else int(k)
    return spec.eps[i], spec.omega[i], spec.xi2[i], spec.f[i]


def mode_occupation(spec: SpinWaveSpectrum, k, t):
    """<n_k(t)> from the vacuum; k is a momentum pair or a mode index."""
    _, om, xi2, _ = _mode(spec, k)
    t = np.asarray(t, float)
    return om**2 * t**2 * _sin2_over(xi2 * t**2)


def _quad_terms(spec, k, t):
    eps, om, xi2, f = _mode(spec, k)
    t = np.asarray(t, float)
    u = xi2 * t**2
    n = om**2 * t**2 * _sin2_over(u)
    a = f * om * eps * t**2 * _sin2_over(u)        # cos(2 phi) coefficient
    b = f * om * t * _sin2x_over(u)                # sin(2 phi) coefficient
    return n, a, b, f


def quadrature_variance(spec: SpinWaveSpectrum, k, t, phi):
    """<Q_k(phi)^2> with Q = X cos(phi) + P sin(phi); R quadrature is phi + pi/2."""
    n, a, b, _ = _quad_terms(spec, k, t)
    phi = np.asarray(phi, float)
    return 0.5 + n + a * np.cos(2 * phi) + b * np.sin(2 * phi)


def optimal_angle(spec: SpinWaveSpectrum, k, t):
    """Quadrature angle of minimal variance, picked among the two stationary points."""
    n, a, b, f = _quad_terms(spec, k, t)
    if f == 0:
        raise ValueError("no squeezing axis: k and -k are distinct modes (variance is phi independent)")
    phi1 = 0.5 * np.arctan2(b, a)          # a stationary point (maximum of a cos + b sin)
    cands = np.stack([phi1, phi1 + np.pi / 2])
    vals = quadrature_variance(spec, k, t, cands)
    pick = np.argmin(vals, axis=0)
    return np.where(pick == 0, cands[0], cands[1])


def theta_scan(geom: ArrayGeometry, drive: DriveField, thetas, t):
    """Per tilt angle: n_k and both quadrature variances at time t for every mode."""
    rows = []
    for th in thetas:
        if not 0 <= th <= np.pi / 2 + 1e-12:
            raise ValueError("theta must lie in [0, pi/2]")
        xy = periodic_xy_model(geom, drive, PolarizationBasis(th))
        spec = spinwave_spectrum(xy, geom)
        for i, k in enumerate(spec.ks):
            n = float(mode_occupation(spec, i, t))
            if spec.f[i]:
                phi = float(optimal_angle(spec, i, t))
            else:
                phi = 0.0
            rows.append(dict(theta=float(th), kx=k[0], kz=k[1], n_k=n, xi2=spec.xi2[i],
                             var_q=float(quadrature_variance(spec, i, t, phi)),
                             var_r=float(quadrature_variance(spec, i, t, phi + np.pi / 2)),
                             phi=phi))
    return rows
