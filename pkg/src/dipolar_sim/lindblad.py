"""Dense Lindblad generators with correlated decay and an adaptive propagator.

The generator has the form

    drho/dt = -i[H(t), rho] + sum_ab R_ab (2 L_b rho L_a^+ - {L_a^+ L_b, rho})

with a Hermitian positive semidefinite rate matrix R. R is diagonalized once so
that the jump term becomes a sum over independent collective channels.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.integrate import DOP853


class NumericalError(RuntimeError):
    """Raised when an integration cannot proceed (step underflow, singular block)."""


class PositivityWarning(RuntimeWarning):
    pass


def _dense(a):
    return a.toarray() if sp.issparse(a) else np.asarray(a)


def collective_channels(jumps, rates, rtol=1e-12):
    """Diagonalize the rate matrix: returns (gammas, channel operators)."""
    rates = np.asarray(rates, complex)
    if not np.allclose(rates, rates.conj().T, atol=1e-12):
        raise ValueError("rate matrix is not Hermitian")
    w, u = np.linalg.eigh(rates)
    scale = max(np.abs(w).max(initial=0), 1e-300)
    if w.min(initial=0) < -1e-10 * scale:
        raise ValueError(f"rate matrix is not positive semidefinite (min eig {w.min():.3e})")
    keep = w > rtol * scale
    chans = []
    for k in np.nonzero(keep)[0]:
        coef = u[:, k].conj()
        op = None
        for c, l in zip(coef, jumps):
            if abs(c) < 1e-15:
                continue
            op = c * l if op is None else op + c * l
        if op is not None:
            chans.append(sp.csr_matrix(op) if sp.issparse(op) else op)
    return w[keep][:len(chans)], chans


@dataclass
class LindbladGenerator:
    """H(t) = static + envelope(t) * driven; dissipator from collective channels."""
    static: np.ndarray
    driven: np.ndarray | None
    gammas: np.ndarray
    channels: list
    envelope: object = None        # callable t -> factor, or None for always on
    switch_times: tuple = ()
    gate_all: bool = False         # envelope multiplies the whole generator

    @classmethod
    def build(cls, static, jumps, rates, driven=None, envelope=None, switch_times=()):
        g, ch = collective_channels(jumps, rates)
        dim = static.shape[0]
        sparse_ok = dim > 128
        conv = (lambda a: sp.csr_matrix(a)) if sparse_ok else _dense
        ch = [conv(c) for c in ch]
        return cls(_dense(static).astype(complex),
                   None if driven is None else _dense(driven).astype(complex),
                   np.asarray(g, float), ch, envelope, tuple(switch_times))

    @property
    def dim(self) -> int:
        return self.static.shape[0]

    def hamiltonian(self, t) -> np.ndarray:
        if self.driven is None:
            return self.static
        f = 1.0 if self.envelope is None else float(self.envelope(t))
        return self.static + f * self.driven if f else self.static

    def factor_at(self, t) -> float:
        if self.envelope is None or (self.driven is None and not self.gate_all):
            return 1.0
        return float(self.envelope(t))

    def _effective(self, t):
        return self._effective_factor(self.factor_at(t))

    def _effective_factor(self, f):
        # -iH - K with K = sum_k g_k J_k^+ J_k; cached per envelope value
        cache = getattr(self, "_eff_cache", None)
        if cache is not None and cache[0] == f:
            return cache[1]
        k = np.zeros_like(self.static)
        for g, j in zip(self.gammas, self.channels):
            jd = _dense(j)
            k += g * (jd.conj().T @ jd)
        h = self.static if self.driven is None else self.static + f * self.driven
        m = -1j * h - k
        self._eff_cache = (f, m)
        return m

    def rhs(self, t, rho, factor=None):
        f = self.factor_at(t) if factor is None else factor
        scale = 1.0
        if self.gate_all:
            if f == 0:
                return np.zeros_like(rho)
            scale, f = f, 1.0
        m = self._effective_factor(f)
        # the two-sided shortcut below is only valid on Hermitian input; projecting first
        # keeps rounding-level anti-Hermitian parts from feeding unstable directions
        rho = 0.5 * (rho + rho.conj().T)
        out = m @ rho
        out = out + out.conj().T
        out += self._jump_term(rho)
        return out if scale == 1.0 else scale * out

    def _stacks(self):
        st = getattr(self, "_stack_cache", None)
        if st is None:
            amps = [np.sqrt(2 * g) * j for g, j in zip(self.gammas, self.channels)]
            if not amps:
                st = ("none", None, None)
            elif sp.issparse(amps[0]):
                rows = np.unique(np.concatenate([a.tocoo().row for a in amps]))
                cols = np.unique(np.concatenate([a.tocoo().col for a in amps]))
                if len(amps) * len(rows) * len(cols) <= 4_000_000:
                    # dense blocks on the support of the channels: batched BLAS is far
                    # faster than sparse-dense products at these sizes
                    blk = np.stack([a[rows][:, cols].toarray() for a in amps])
                    st = ("block", blk, (rows, cols))
                else:
                    st = ("sparse", sp.vstack(amps, format="csr"), sp.hstack(amps, format="csr"))
            else:
                st = ("dense", np.stack([_dense(a) for a in amps]), None)
            self._stack_cache = st
        return st

    def _jump_term(self, rho):
        # sum_k A_k rho A_k^+ with A_k = sqrt(2 g_k) J_k; uses A_k rho A_k^+ = A_k (A_k rho)^+
        kind, a, b = self._stacks()
        d = rho.shape[0]
        if kind == "none":
            return 0.0
        if kind == "dense":
            y = a @ rho
            return (a @ y.conj().transpose(0, 2, 1)).sum(0)
        if kind == "block":
            rows, cols = b
            y = a @ rho[np.ix_(cols, cols)]                          # (K, R, C)
            blk = np.tensordot(a, y.conj(), axes=([0, 2], [0, 2]))   # (R, R)
            out = np.zeros_like(rho)
            out[np.ix_(rows, rows)] = blk
            return out
        y = a @ rho                                   # (K d, d)
        k = y.shape[0] // d
        yh = y.reshape(k, d, d).conj().transpose(0, 2, 1).reshape(k * d, d)
        return b @ yh

    def check_trace_preserving(self, n_probe=3, seed=0) -> float:
        """max |tr L(rho)| over random Hermitian probes."""
        rng = np.random.default_rng(seed)
        worst = 0.0
        for _ in range(n_probe):
            a = rng.normal(size=(self.dim, self.dim)) + 1j * rng.normal(size=(self.dim, self.dim))
            rho = a @ a.conj().T
            rho /= np.trace(rho)
            worst = max(worst, abs(np.trace(self.rhs(0.0, rho))))
        return worst


def _segments(t_grid, switch_times):
    t0, t1 = t_grid[0], t_grid[-1]
    cuts = [t0] + [s for s in sorted(switch_times) if t0 < s < t1] + [t1]
    return list(zip(cuts[:-1], cuts[1:]))


def propagate_ode(fun, y0, t_grid, switch_times=(), rtol=1e-8, atol=1e-10, shape=None,
                  segment_fun=None):
    """Adaptive DOP853 integration of dy/dt = fun(t, y) yielding (t, y) on t_grid.

    Integration restarts at every switch time so that no step straddles a
    discontinuity of the right-hand side. Memory stays at one state.
    segment_fun(a, b), if given, returns the right-hand side to use on [a, b].
    """
    t_grid = np.asarray(t_grid, float)
    if t_grid.ndim != 1 or len(t_grid) == 0:
        raise ValueError("t_grid must be a non-empty 1D array")
    if np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_grid must be strictly increasing")
    shape = np.shape(y0) if shape is None else shape
    y = np.asarray(y0).reshape(-1).copy()
    is_complex = np.iscomplexobj(y)
    yield t_grid[0], y.reshape(shape).copy()
    gi = 1
    for a, b in _segments(t_grid, switch_times):
        if gi >= len(t_grid):
            break
        if b <= a:
            continue
        f = fun if segment_fun is None else segment_fun(a, b)
        flat = lambda t, v, f=f: np.asarray(f(t, v.reshape(shape))).reshape(-1)
        solver = DOP853(flat, a, y.astype(complex) if is_complex else y, b,
                        rtol=rtol, atol=atol)
        while gi < len(t_grid) and t_grid[gi] <= a:
            gi += 1
        while solver.status == "running":
            msg = solver.step()
            if solver.status == "failed":
                raise NumericalError(f"integration failed at t={solver.t:.6g}: {msg}")
            if gi < len(t_grid) and t_grid[gi] <= solver.t:
                dense = solver.dense_output()
                while gi < len(t_grid) and t_grid[gi] <= solver.t:
                    tg = t_grid[gi]
                    v = solver.y if tg == solver.t else dense(tg)
                    yield tg, np.asarray(v).reshape(shape).copy()
                    gi += 1
        y = solver.y


def propagate(rho0, gen: LindbladGenerator, t_grid, rtol=1e-8, atol=1e-10,
              n_checkpoints=20, positivity_tol=1e-7):
    """Yield (t, rho) on t_grid. Positivity is checked (warn only) at ~n_checkpoints points."""
    t_grid = np.asarray(t_grid, float)
    check_at = set(np.unique(np.linspace(0, len(t_grid) - 1, min(n_checkpoints, len(t_grid))).astype(int)))
    # the envelope is constant inside each segment; read it at the segment midpoint
    def segment_fun(a, b):
        f = gen.factor_at(0.5 * (a + b))
        return lambda t, rho: gen.rhs(t, rho, f)
    for n, (t, rho) in enumerate(propagate_ode(None, np.asarray(rho0, complex), t_grid,
                                               gen.switch_times, rtol, atol,
                                               segment_fun=segment_fun)):
        if n in check_at:
            lam = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min()
            if lam < -positivity_tol:
                warnings.warn(f"density matrix eigenvalue {lam:.3e} at t={t:.4g}",
                              PositivityWarning, stacklevel=2)
        yield t, rho
