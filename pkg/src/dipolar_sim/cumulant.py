"""Second-order cumulant equations for the dissipative XY spin model.

The Heisenberg-picture derivatives of <sigma^a_i> and <sigma^a_i sigma^b_j> are
built once, symbolically on Pauli strings, from the Hamiltonian and the
correlated jump terms. Strings of weight three are closed with
<ABC> = <A><B><C> + <AB>_c<C> + <AC>_c<B> + <BC>_c<A>.
"""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from .effective import XYModel
from .lindblad import propagate_ode
from .observables import ModeMoments, SpinMoments

# single-site Pauli products: _MUL[p][q] = (phase, r), 0 = identity, 1..3 = x, y, z
_MUL = [[None] * 4 for _ in range(4)]
for _p in range(4):
    _MUL[0][_p] = (1, _p)
    _MUL[_p][0] = (1, _p)
for _a in range(1, 4):
    for _b in range(1, 4):
        if _a == _b:
            _MUL[_a][_b] = (1, 0)
        else:
            _c = 6 - _a - _b
            sign = 1 if (_a, _b) in ((1, 2), (2, 3), (3, 1)) else -1
            _MUL[_a][_b] = (1j * sign, _c)


def _mul_strings(s1, s2):
    """Product of two Pauli strings (tuples of (site, p) sorted by site)."""
    d = dict(s1)
    phase = 1
    for site, q in s2:
        p = d.get(site, 0)
        ph, r = _MUL[p][q]
        phase *= ph
        if r:
            d[site] = r
        else:
            d.pop(site, None)
    return phase, tuple(sorted(d.items()))


def _mul(a: dict, b: dict) -> dict:
    out = defaultdict(complex)
    for s1, c1 in a.items():
        for s2, c2 in b.items():
            ph, s = _mul_strings(s1, s2)
            out[s] += c1 * c2 * ph
    return out


def _dag(a: dict) -> dict:
    return {s: np.conj(c) for s, c in a.items()}


def _add(acc, a: dict, scale=1.0):
    for s, c in a.items():
        acc[s] += scale * c


def _site_op(site, coeffs):
    """sum_p coeffs[p] sigma^p on one site; coeffs indexed 0..3."""
    return {(((site, p),) if p else ()): c for p, c in enumerate(coeffs) if c}


def _lowering(site):
    return _site_op(site, (0, 0.5, -0.5j, 0))


def _raising(site):
    return _site_op(site, (0, 0.5, 0.5j, 0))


@dataclass(frozen=True)
class CumulantState:
    means: np.ndarray     # (N, 3) <sigma^a_i>
    corr: np.ndarray      # (N, N, 3, 3) connected <sigma^a_i sigma^b_j>, zero for i = j

    @property
    def n_atoms(self):
        return self.means.shape[0]

    @classmethod
    def product(cls, local_means):
        m = np.array(local_means, float)
        n = len(m)
        return cls(m, np.zeros((n, n, 3, 3)))

    @classmethod
    def polarized_x(cls, n):
        return cls.product(np.tile([1.0, 0, 0], (n, 1)))

    def full_correlator(self):
        """<sigma^a_i sigma^b_j> for i != j, zero on the diagonal."""
        k = self.corr + np.einsum("ia,jb->ijab", self.means, self.means)
        idx = np.arange(self.n_atoms)
        k[idx, idx] = 0
        return k

    def pair_moment(self, u, v):
        """<{A, B}>/2 for A = sum_i u_i . sigma_i / 2, B likewise with v; u, v of shape (N, 3)."""
        k = self.full_correlator()
        return 0.25 * (np.einsum("ia,ia->", u, v) + np.einsum("ia,ijab,jb->", u, k, v))

    def spin_moments(self) -> SpinMoments:
        n = self.n_atoms
        e = np.eye(3)
        mean = 0.5 * self.means.sum(0)
        sec = np.zeros((3, 3))
        for a in range(3):
            for b in range(3):
                sec[a, b] = self.pair_moment(np.tile(e[a], (n, 1)), np.tile(e[b], (n, 1)))
        return SpinMoments(mean, 0.5 * (sec + sec.T), n)

    def mode_moments(self, positions, k) -> ModeMoments:
        pos = np.asarray(positions, float)
        kr = pos[:, 0] * k[0] + pos[:, 2] * k[1]
        c, s = np.cos(kr), np.sin(kr)
        z = np.zeros_like(c)
        uz = np.stack([z, s, c], 1)      # S~z = sum (c sigma^z + s sigma^y)/2
        uy = np.stack([z, c, -s], 1)     # S~y = sum (c sigma^y - s sigma^z)/2
        n = self.n_atoms
        return ModeMoments(self.pair_moment(uz, uz), self.pair_moment(uy, uy),
                           self.pair_moment(uz, uy), 0.5 * self.means[:, 0].sum(), n)


class CumulantModel:
    """Precompiled cumulant right-hand side for one XYModel."""

    def __init__(self, xy: XYModel, drop_tol=1e-15):
        self.n = n = xy.n_atoms
        self.pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
        self._pair_index = {p: k for k, p in enumerate(self.pairs)}
        self._build(xy, drop_tol)

    # -- symbolic construction
    def _terms(self, xy: XYModel):
        n = self.n
        w = xy.cx + xy.cx.T, xy.cy + xy.cy.T          # unordered-pair weights
        ham = defaultdict(list)                         # site -> list of (coef, string)
        for i in range(n):
            for j in range(i + 1, n):
                for p, mat in ((1, w[0]), (2, w[1])):
                    if mat[i, j]:
                        s = ((i, p), (j, p))
                        ham[i].append((mat[i, j], s))
                        ham[j].append((mat[i, j], s))
        if xy.field is not None:
            for i in range(n):
                for a in range(3):
                    if xy.field[i, a]:
                        ham[i].append((xy.field[i, a], ((i, a + 1),)))
        jumps = []
        for i in range(n):
            jumps.append((i, {s: xy.jump_amp * c for s, c in _lowering(i).items()}))
            jumps.append((i, {s: xy.jump_amp * c for s, c in _raising(i).items()}))
        # dissipator convention: sum_ab 2 R_ab (L_b rho L_a^+ - {L_a^+ L_b, rho}/2)
        rates = 2 * np.asarray(xy.rates)
        return ham, jumps, rates

    def _derivative(self, obs: tuple, ham, jumps, rates):
        """Adjoint master-equation generator applied to one Pauli string."""
        out = defaultdict(complex)
        o = {obs: 1.0}
        supp = {s for s, _ in obs}
        seen = set()
        for site in supp:
            for coef, hs in ham[site]:
                if hs in seen:
                    continue
                seen.add(hs)
                h = {hs: coef}
                _add(out, _mul(h, o), 1j)
                _add(out, _mul(o, h), -1j)
        if np.any(rates):
            for a, (sa, la) in enumerate(jumps):
                lad = _dag(la)
                for b, (sb, lb) in enumerate(jumps):
                    r = rates[a, b]
                    if abs(r) == 0 or (sa not in supp and sb not in supp):
                        continue
                    # L_a^+ O L_b - (L_a^+ L_b O + O L_a^+ L_b)/2
                    lab = _mul(lad, lb)
                    _add(out, _mul(_mul(lad, o), lb), r)
                    _add(out, _mul(lab, o), -0.5 * r)
                    _add(out, _mul(o, lab), -0.5 * r)
        return out

    def _build(self, xy, drop_tol):
        ham, jumps, rates = self._terms(xy)
        n = self.n
        n1 = 3 * n
        targets = [((i, a + 1),) for i in range(n) for a in range(3)]
        targets += [((i, a + 1), (j, b + 1)) for (i, j) in self.pairs for a in range(3) for b in range(3)]
        rows = {0: [], 1: [], 2: [], 3: []}
        for t, obs in enumerate(targets):
            for s, c in self._derivative(obs, ham, jumps, rates).items():
                if abs(c) <= drop_tol:
                    continue
                if len(s) > 3:
                    raise RuntimeError("unexpected weight-4 string in cumulant hierarchy")
                rows[len(s)].append((t, c, s))
        self.n_targets = len(targets)
        self.n1 = n1

        def pack(rs, w):
            if not rs:
                return None
            tgt = np.array([r[0] for r in rs])
            coef = np.array([r[1] for r in rs])
            sites = np.array([[x[0] for x in r[2]] for r in rs]).reshape(len(rs), w)
            paulis = np.array([[x[1] - 1 for x in r[2]] for r in rs]).reshape(len(rs), w)
            return tgt, coef, sites, paulis
        self._w = {w: pack(rows[w], w) for w in range(4)}

    # -- numeric evaluation
    def unpack(self, y):
        n = self.n
        m = y[: self.n1].reshape(n, 3)
        c = np.zeros((n, n, 3, 3))
        if self.pairs:
            blocks = y[self.n1:].reshape(len(self.pairs), 3, 3)
            ii, jj = np.array(self.pairs).T
            c[ii, jj] = blocks
            c[jj, ii] = blocks.transpose(0, 2, 1)
        return m, c

    def pack(self, state: CumulantState):
        if self.pairs:
            ii, jj = np.array(self.pairs).T
            c = 0.5 * (state.corr[ii, jj] + state.corr[jj, ii].transpose(0, 2, 1))
            return np.concatenate([state.means.ravel(), c.ravel()])
        return state.means.ravel().copy()

    def rhs(self, t, y):
        m, c = self.unpack(y)
        d = np.zeros(self.n_targets, complex)
        for w, packed in self._w.items():
            if packed is None:
                continue
            tgt, coef, s, p = packed
            if w == 0:
                val = np.ones(len(tgt))
            elif w == 1:
                val = m[s[:, 0], p[:, 0]]
            elif w == 2:
                mi, mj = m[s[:, 0], p[:, 0]], m[s[:, 1], p[:, 1]]
                val = mi * mj + c[s[:, 0], s[:, 1], p[:, 0], p[:, 1]]
            else:
                m0, m1, m2 = (m[s[:, k], p[:, k]] for k in range(3))
                c01 = c[s[:, 0], s[:, 1], p[:, 0], p[:, 1]]
                c02 = c[s[:, 0], s[:, 2], p[:, 0], p[:, 2]]
                c12 = c[s[:, 1], s[:, 2], p[:, 1], p[:, 2]]
                val = m0 * m1 * m2 + c01 * m2 + c02 * m1 + c12 * m0
            d += np.bincount(tgt, weights=(coef * val).real, minlength=self.n_targets)
            d += 1j * np.bincount(tgt, weights=(coef * val).imag, minlength=self.n_targets)
        d = d.real
        dm = d[: self.n1].reshape(self.n, 3)
        if not self.pairs:
            return dm.ravel()
        ii, jj = np.array(self.pairs).T
        dk = d[self.n1:].reshape(len(self.pairs), 3, 3)
        # connected part: d(<ab> - <a><b>)
        dc = dk - np.einsum("pa,pb->pab", dm[ii], m[jj]) - np.einsum("pa,pb->pab", m[ii], dm[jj])
        return np.concatenate([dm.ravel(), dc.ravel()])


def cumulant_rhs(state: CumulantState, xy: XYModel) -> CumulantState:
    """Time derivative of a cumulant state (convenience wrapper, rebuilds the model)."""
    model = CumulantModel(xy)
    m, c = model.unpack(model.rhs(0.0, model.pack(state)))
    return CumulantState(m, c)


def evolve_cumulant(xy: XYModel, state: CumulantState, t_grid, rtol=1e-10, atol=1e-12):
    """Yield (t, CumulantState) on t_grid."""
    model = CumulantModel(xy)
    for t, y in propagate_ode(model.rhs, model.pack(state), np.asarray(t_grid, float),
                              rtol=rtol, atol=atol):
        m, c = model.unpack(y)
        yield t, CumulantState(m, c)
