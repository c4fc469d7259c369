"""Free-space Green's tensor and the dipolar coupling tables in the spherical basis."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .lattice import ArrayGeometry, PolarizationBasis

K0 = 2 * np.pi  # wavenumber for lengths measured in wavelengths


def green_tensor(r, gamma: float = 1.0, near_field: bool = False) -> np.ndarray:
    """Dyadic Green's tensor at separation r (3-vector, units of lambda).

    near_field keeps only the static 1/(k r)^3 term (used for lattice-sum checks).
    """
    r = np.asarray(r, float)
    dist = np.linalg.norm(r)
    if dist == 0:
        raise ValueError("Green's tensor is singular at r = 0")
    rr = np.outer(r, r) / dist**2
    eye = np.eye(3)
    kr = K0 * dist
    ph = np.exp(1j * kr)
    if near_field:
        return 0.75 * gamma * (eye - 3 * rr) * (-ph / kr**3)
    return 0.75 * gamma * ((eye - rr) * ph / kr
                           + (eye - 3 * rr) * (1j * ph / kr**2 - ph / kr**3))


def green_tensor_array(positions, gamma=1.0, near_field=False) -> np.ndarray:
    """G(r_i - r_j) for all pairs, shape (N, N, 3, 3); the diagonal is left at zero."""
    pos = np.asarray(positions, float)
    n = len(pos)
    rij = pos[:, None, :] - pos[None, :, :]
    dist = np.linalg.norm(rij, axis=-1)
    off = ~np.eye(n, dtype=bool)
    if np.any(dist[off] == 0):
        raise ValueError("coincident atoms")
    out = np.zeros((n, n, 3, 3), complex)
    d = dist[off]
    rhat = rij[off] / d[:, None]
    rr = rhat[:, :, None] * rhat[:, None, :]
    eye = np.eye(3)[None]
    kr = (K0 * d)[:, None, None]
    ph = np.exp(1j * kr)
    if near_field:
        g = (eye - 3 * rr) * (-ph / kr**3)
    else:
        g = (eye - rr) * ph / kr + (eye - 3 * rr) * (1j * ph / kr**2 - ph / kr**3)
    out[off] = 0.75 * gamma * g
    return out


@dataclass(frozen=True)
class DipoleCouplings:
    """delta[i, j, q+1, q'+1] and gamma[i, j, q+1, q'+1].

    delta has zero diagonal blocks (no self Lamb shift), gamma[i, i] = (Gamma/2) 1.
    Entries are complex in general and real for arrays lying in the X-Z plane.
    """
    delta: np.ndarray = field(repr=False)
    gamma: np.ndarray = field(repr=False)
    gamma0: float = 1.0

    @property
    def n_atoms(self) -> int:
        return self.delta.shape[0]

    def rate_matrix(self, qs=(-1, 0, 1)) -> np.ndarray:
        """Collective (i, q) x (j, q') decay matrix restricted to the listed q."""
        idx = [q + 1 for q in qs]
        g = self.gamma[:, :, idx][:, :, :, idx]
        n, m = self.n_atoms, len(idx)
        return g.transpose(0, 2, 1, 3).reshape(n * m, n * m)

    def is_real(self, tol=1e-12) -> bool:
        return bool(np.abs(self.delta.imag).max(initial=0) < tol
                    and np.abs(self.gamma.imag).max(initial=0) < tol)


_CACHE: dict = {}


def couplings(geom: ArrayGeometry, basis: PolarizationBasis | None = None,
              gamma: float = 1.0, near_field: bool = False) -> DipoleCouplings:
    """Elastic (Re G) and inelastic (Im G) couplings e_q^* . G . e_q' for every pair."""
    basis = basis or PolarizationBasis()
    key = (geom.positions.tobytes(), geom.positions.shape, float(basis.theta),
           float(gamma), bool(near_field))
    hit = _CACHE.get(key)
    if hit is not None:
        return hit
    g = green_tensor_array(geom.positions, gamma, near_field)
    ev = basis.vectors                    # (3 q, 3 cart)
    # e_q^* . M . e_q' for M = Re G and Im G separately
    proj = lambda m: np.einsum("qa,ijab,pb->ijqp", ev.conj(), m, ev)
    delta = proj(g.real)
    gam = proj(g.imag)
    n = geom.n_atoms
    for i in range(n):
        gam[i, i] = 0.5 * gamma * np.eye(3)
    if np.abs(delta.imag).max(initial=0) < 1e-14 and np.abs(gam.imag).max(initial=0) < 1e-14:
        delta, gam = delta.real.astype(complex), gam.real.astype(complex)
    for a in (delta, gam):
        a.setflags(write=False)
    out = DipoleCouplings(delta, gam, float(gamma))
    if len(_CACHE) > 64:
        _CACHE.clear()
    _CACHE[key] = out
    return out
