"""Discrete truncated Wigner sampling for the unitary XY model.

Trajectories are processed in fixed-size chunks. Each chunk is integrated with
one adaptive step sequence and reduced to moment sums; chunks are combined in
index order, so results depend only on (seed, n_traj, chunk_size).
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .effective import XYModel
from .lindblad import propagate_ode
from .observables import ModeMoments

DEFAULT_CHUNK = 500


def trajectory_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream for one trajectory, derived from (master seed, index)."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed), spawn_key=(int(index),))))


def sample_initial(n_atoms: int, n_traj: int, seed: int, start: int = 0) -> np.ndarray:
    """Phase points for the x-polarized product state: s^x = 1, s^y, s^z = +-1.

    Returns (n_traj, n_atoms, 3) for trajectory indices start .. start + n_traj - 1.
    """
    if n_traj < 1:
        raise ValueError("n_traj must be at least 1")
    s = np.ones((n_traj, n_atoms, 3))
    for t in range(n_traj):
        bits = trajectory_rng(seed, start + t).integers(0, 2, size=(n_atoms, 2))
        s[t, :, 1:] = 2.0 * bits - 1.0
    return s


def xy_rhs(xy: XYModel):
    cx, cy = np.asarray(xy.cx), np.asarray(xy.cy)
    h = None if xy.field is None or not np.any(xy.field) else np.asarray(xy.field)

    def rhs(t, s):
        # local field B_i = 2 (sum_j Cx_ij s^x_j, sum_j Cy_ij s^y_j, 0) (+ h_i); ds/dt = 2 B x s
        b = np.zeros_like(s)
        b[..., 0] = 2 * s[..., 0] @ cx.T
        b[..., 1] = 2 * s[..., 1] @ cy.T
        if h is not None:
            b += h
        return 2 * np.cross(b, s)
    return rhs


def classical_energy(xy: XYModel, s):
    e = xy.classical_energy(s)
    if xy.field is not None and np.any(xy.field):
        e = e + np.einsum("ia,...ia->...", xy.field, s)
    return e


def evolve(s0, xy: XYModel, t_grid, rtol=1e-10, atol=1e-12):
    """Yield (t, spins) for one chunk of trajectories on t_grid."""
    yield from propagate_ode(xy_rhs(xy), np.asarray(s0, float), t_grid, rtol=rtol, atol=atol)


# ---------------------------------------------------------------- estimators

def mode_projections(s, positions, ks):
    """Per-trajectory S~z(k), S~y(k) (arrays (..., K)) and S_x."""
    pos = np.asarray(positions)
    kr = np.outer(pos[:, 0], ks[:, 0]) + np.outer(pos[:, 2], ks[:, 1])     # (N, K)
    c, sn = np.cos(kr), np.sin(kr)
    sy, sz = s[..., 1], s[..., 2]
    z = 0.5 * (sz @ c + sy @ sn)
    y = 0.5 * (sy @ c - sz @ sn)
    sx = 0.5 * s[..., 0].sum(-1)
    return z, y, sx


# moment names accumulated per (time, k); all are sums over trajectories
_MODE_KEYS = ("zz", "yy", "zy", "z4", "z3y", "z2y2", "zy3", "y4", "zzx", "yyx", "zyx")


@dataclass
class DTWAResult:
    t: np.ndarray
    ks: np.ndarray
    n_traj: int
    n_atoms: int
    sums: dict            # key -> (T, K) or (T,) arrays of trajectory sums
    mean_spin: np.ndarray  # (T, N, 3)
    max_norm_drift: float
    max_energy_drift: float

    def _m(self, key):
        return self.sums[key] / self.n_traj

    def mode_moments(self, ti, ki) -> ModeMoments:
        return ModeMoments(self._m("zz")[ti, ki], self._m("yy")[ti, ki], self._m("zy")[ti, ki],
                           self._m("sx")[ti], self.n_atoms)

    def structure_factor(self):
        """n_k(t) and its standard error, shape (T, K)."""
        n = self.n_atoms
        mean = (self._m("zz") + self._m("yy")) / n - 0.5
        # per-trajectory value (z^2 + y^2)/N; second moment from the quartic sums
        sq = (self._m("z4") + 2 * self._m("z2y2") + self._m("y4")) / n**2
        var = np.maximum(sq - (mean + 0.5) ** 2, 0)
        return mean, np.sqrt(var / self.n_traj)

    def quadrature(self, phi):
        """<S~_phi(k)^2> and standard error; phi broadcastable to (T, K)."""
        c, s = np.cos(phi), np.sin(phi)
        m = self._m
        mean = c * c * m("zz") + s * s * m("yy") - 2 * c * s * m("zy")
        # per trajectory v = (-z c + y s)^2 ; E[v^2] from fourth moments
        e2 = (c**4 * m("z4") - 4 * c**3 * s * m("z3y") + 6 * c * c * s * s * m("z2y2")
              - 4 * c * s**3 * m("zy3") + s**4 * m("y4"))
        var = np.maximum(e2 - mean**2, 0)
        return mean, np.sqrt(var / self.n_traj)

    def wineland(self, phi):
        """N <S~_phi^2> / <S_x>^2 with a delta-method standard error."""
        c, s = np.cos(phi), np.sin(phi)
        m = self._m
        v, v_se = self.quadrature(phi)
        sx = m("sx")[:, None]
        var_sx = np.maximum(m("sxsx")[:, None] - sx**2, 0)
        e_vx = c * c * m("zzx") + s * s * m("yyx") - 2 * c * s * m("zyx")
        cov = e_vx - v * sx
        n = self.n_atoms
        r = n * v / sx**2
        # d r = n/sx^2 dv - 2 n v / sx^3 dsx
        gv, gx = n / sx**2, -2 * n * v / sx**3
        var = (gv**2 * (v_se**2 * self.n_traj) + gx**2 * var_sx + 2 * gv * gx * cov) / self.n_traj
        return r, np.sqrt(np.maximum(var, 0))

    def optimal_phi(self):
        m = self._m
        b = 0.5 * (m("zz") - m("yy"))
        c = -m("zy")
        return 0.5 * np.arctan2(-c, -b)


def _chunk_sums(s0, xy, t_grid, positions, ks, rtol, atol):
    nt, nk = len(t_grid), len(ks)
    out = {k: np.zeros((nt, nk)) for k in _MODE_KEYS}
    out["sx"] = np.zeros(nt)
    out["sxsx"] = np.zeros(nt)
    mean_spin = np.zeros((nt,) + s0.shape[1:])
    e0 = classical_energy(xy, s0)
    n0 = np.linalg.norm(s0, axis=-1)
    scale = np.abs(xy.cx).sum() + np.abs(xy.cy).sum()
    if xy.field is not None:
        scale += np.abs(xy.field).sum()
    escale = np.maximum(np.abs(e0), max(scale, np.finfo(float).tiny))
    drift_n = drift_e = 0.0
    for ti, (t, s) in enumerate(evolve(s0, xy, t_grid, rtol, atol)):
        z, y, sx = mode_projections(s, positions, ks)
        z2, y2 = z * z, y * y
        zy = z * y
        sums = dict(zz=z2, yy=y2, zy=zy, z4=z2 * z2, z3y=z2 * zy, z2y2=z2 * y2,
                    zy3=zy * y2, y4=y2 * y2, zzx=z2 * sx[:, None], yyx=y2 * sx[:, None],
                    zyx=zy * sx[:, None])
        for k, v in sums.items():
            out[k][ti] = v.sum(0)
        out["sx"][ti] = sx.sum()
        out["sxsx"][ti] = (sx * sx).sum()
        mean_spin[ti] = s.sum(0)
        drift_n = max(drift_n, float(np.abs(np.linalg.norm(s, axis=-1) - n0).max()))
        drift_e = max(drift_e, float((np.abs(classical_energy(xy, s) - e0) / escale).max()))
    return out, mean_spin, drift_n, drift_e


def resolve_threads(threads=None) -> int:
    if threads is None:
        env = os.environ.get("DIPOLAR_SIM_THREADS")
        threads = int(env) if env else 1
    return max(1, int(threads))


def run_dtwa(xy: XYModel, positions, t_grid, ks, n_traj=10_000, seed=0,
             chunk_size=DEFAULT_CHUNK, threads=None, rtol=1e-10, atol=1e-12) -> DTWAResult:
    """Sample, evolve and reduce; output is independent of the thread count."""
    positions = np.asarray(positions, float)
    ks = np.atleast_2d(np.asarray(ks, float))
    t_grid = np.asarray(t_grid, float)
    n = len(positions)
    starts = list(range(0, n_traj, chunk_size))

    def work(start):
        m = min(chunk_size, n_traj - start)
        s0 = sample_initial(n, m, seed, start)
        return _chunk_sums(s0, xy, t_grid, positions, ks, rtol, atol)

    threads = resolve_threads(threads)
    if threads == 1:
        parts = [work(s) for s in starts]
    else:
        with ThreadPoolExecutor(threads) as ex:
            parts = list(ex.map(work, starts))
    sums = {k: np.zeros_like(v) for k, v in parts[0][0].items()}
    mean_spin = np.zeros_like(parts[0][1])
    dn = de = 0.0
    for p, ms, a, b in parts:               # fixed order reduction
        for k in sums:
            sums[k] += p[k]
        mean_spin += ms
        dn, de = max(dn, a), max(de, b)
    return DTWAResult(t_grid, ks, n_traj, n, sums, mean_spin / n_traj, dn, de)
