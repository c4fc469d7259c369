"""Entanglement and spin-squeezing observables."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

NEG_CUTOFF = 1e-12


@dataclass(frozen=True)
class Bipartition:
    subsystem: tuple      # sites in A
    n_sites: int

    def __post_init__(self):
        a = tuple(sorted(set(int(s) for s in self.subsystem)))
        if not a:
            raise ValueError("subsystem A must be non-empty")
        if a[0] < 0 or a[-1] >= self.n_sites:
            raise ValueError("subsystem sites out of range")
        object.__setattr__(self, "subsystem", a)

    @property
    def complement(self) -> tuple:
        return tuple(s for s in range(self.n_sites) if s not in self.subsystem)

    @classmethod
    def middle(cls, n_sites: int) -> "Bipartition":
        return cls(((n_sites - 1) // 2,), n_sites)


def _dims(dims, n_sites=None):
    if np.ndim(dims) == 0:
        return [int(dims)] * int(n_sites)
    return [int(d) for d in dims]


def partial_transpose(rho, dims, sites):
    dims = list(dims)
    n = len(dims)
    if rho.shape != (np.prod(dims),) * 2:
        raise ValueError(f"density matrix shape {rho.shape} does not match local dims {dims}")
    t = rho.reshape(dims + dims)
    axes = list(range(2 * n))
    for s in sites:
        axes[s], axes[n + s] = axes[n + s], axes[s]
    return t.transpose(axes).reshape(rho.shape)


def reduced_state(rho, dims, keep):
    dims = list(dims)
    n = len(dims)
    if rho.shape != (np.prod(dims),) * 2:
        raise ValueError(f"density matrix shape {rho.shape} does not match local dims {dims}")
    keep = sorted(keep)
    drop = [s for s in range(n) if s not in keep]
    t = rho.reshape(dims + dims)
    # trace out dropped sites one by one, highest first so indices stay valid
    cur_n = n
    for s in sorted(drop, reverse=True):
        t = np.trace(t, axis1=s, axis2=s + cur_n)
        cur_n -= 1
    dk = int(np.prod([dims[s] for s in keep]))
    return t.reshape(dk, dk)


def log_negativity(rho, dims, part: Bipartition | None = None, method="eig"):
    """log2(2 N + 1), N the magnitude sum of negative partial-transpose eigenvalues.

    method="svd" computes the same quantity as log2 of the trace norm.
    """
    dims = _dims(dims, part.n_sites if part else None)
    part = part or Bipartition.middle(len(dims))
    if part.n_sites != len(dims):
        raise ValueError("bipartition does not match the number of sites")
    pt = partial_transpose(np.asarray(rho), dims, part.subsystem)
    if method == "svd":
        return float(np.log2(np.linalg.svd(pt, compute_uv=False).sum()))
    lam = np.linalg.eigvalsh(0.5 * (pt + pt.conj().T))
    neg = lam[lam < -NEG_CUTOFF]
    return float(np.log2(1 - 2 * neg.sum()))


def renyi2(rho, dims, part: Bipartition | None = None):
    dims = _dims(dims, part.n_sites if part else None)
    part = part or Bipartition.middle(len(dims))
    rho = np.asarray(rho)
    if rho.ndim == 1:
        rho = np.outer(rho, rho.conj())
    ra = reduced_state(rho, dims, part.subsystem)
    return float(-np.log2(np.real(np.trace(ra @ ra))))


# ---------------------------------------------------------------- collective moments

@dataclass(frozen=True)
class SpinMoments:
    """First and symmetrized second moments of S = sum_i sigma_i / 2."""
    mean: np.ndarray      # <S_alpha>
    second: np.ndarray    # <S_a S_b + S_b S_a> / 2
    n_spins: int


def moments_from_density(rho, n) -> SpinMoments:
    from . import spins
    s = spins.collective(n)
    mean = np.array([np.trace(op @ rho).real for op in s])
    sec = np.zeros((3, 3))
    for a in range(3):
        for b in range(3):
            ab = s[a] @ s[b]
            sec[a, b] = 0.5 * (np.trace(ab @ rho) + np.trace((s[b] @ s[a]) @ rho)).real
    return SpinMoments(mean, sec, n)


def toth_squeezing(mom: SpinMoments) -> float:
    """xi_D^2 = lambda_min((N-1) Cov + J) / (<S^2> - N/2), Cov = J - <S><S>^T."""
    n = mom.n_spins
    cov = mom.second - np.outer(mom.mean, mom.mean)
    chi = (n - 1) * cov + mom.second
    den = np.trace(mom.second) - n / 2
    if den <= 0:
        return float("nan")
    return float(np.linalg.eigvalsh(0.5 * (chi + chi.T)).min() / den)


# ---------------------------------------------------------------- spin waves

def spinwave_phases(positions, k):
    """cos(k.r_i), sin(k.r_i) using the X and Z components of positions."""
    pos = np.asarray(positions, float)
    kr = pos[:, 0] * k[0] + pos[:, 2] * k[1]
    return np.cos(kr), np.sin(kr)


@dataclass(frozen=True)
class ModeMoments:
    """Second moments of the spin-wave quadratures at one k.

    szz = <S~z(k)^2>, syy = <S~y(k)^2>, szy = <{S~z, S~y}>/2, sx = <S_x>.
    """
    szz: float
    syy: float
    szy: float
    sx: float
    n_spins: int

    def variance(self, phi):
        """<S~_phi^2> for S~_phi = -S~z cos(phi) + S~y sin(phi)."""
        c, s = np.cos(phi), np.sin(phi)
        return self.szz * c * c + self.syy * s * s - 2 * self.szy * c * s

    def optimal_phi(self):
        """Angle of minimal quadrature variance."""
        # variance = A + B cos(2 phi) + C sin(2 phi); minimum at 2 phi = atan2(-C, -B)
        b = 0.5 * (self.szz - self.syy)
        c = -self.szy
        return 0.5 * np.arctan2(-c, -b)


def structure_factor(m: ModeMoments) -> float:
    """Mode occupation (<S~z^2> + <S~y^2>) / N - 1/2."""
    return (m.szz + m.syy) / m.n_spins - 0.5


def wineland_ratio(m: ModeMoments, phi) -> float:
    return m.n_spins * m.variance(phi) / m.sx**2


def mode_operators(positions, k, sparse=True):
    """S~z(k), S~y(k) and S_x on the spin-1/2 product space."""
    from . import spins
    n = len(positions)
    c, s = spinwave_phases(positions, k)
    sz_k = 0
    sy_k = 0
    sx = 0
    for i in range(n):
        z = spins.site_op(spins.SZ, i, n, sparse)
        y = spins.site_op(spins.SY, i, n, sparse)
        x = spins.site_op(spins.SX, i, n, sparse)
        sz_k = sz_k + 0.5 * (c[i] * z + s[i] * y)
        sy_k = sy_k + 0.5 * (c[i] * y - s[i] * z)
        sx = sx + 0.5 * x
    return sz_k, sy_k, sx


def mode_moments_from_state(state, ops, n) -> ModeMoments:
    """ops from mode_operators; state is a ket or density matrix."""
    sz_k, sy_k, sx = ops
    if np.ndim(state) == 1:
        ev = lambda a: np.vdot(state, a @ state)
    else:
        ev = lambda a: np.sum(a.T.multiply(state) if hasattr(a, "multiply") else a.T * state)
    zz = ev(sz_k @ sz_k).real
    yy = ev(sy_k @ sy_k).real
    zy = 0.5 * ev(sz_k @ sy_k + sy_k @ sz_k).real
    return ModeMoments(zz, yy, zy, ev(sx).real, n)
