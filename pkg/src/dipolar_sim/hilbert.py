"""Many-atom product bases with an optional cap on the number of excited atoms.

States are ordered lexicographically in the local level labels, so with no cap
the basis coincides with the usual Kronecker-product ordering.
"""
from __future__ import annotations

from functools import cached_property
from itertools import product

import numpy as np
import scipy.sparse as sp

from .lattice import LevelScheme


class ProductBasis:
    def __init__(self, n_atoms: int, local_dim: int, n_ground: int,
                 max_excited: int | None = None, exact_excited: int | None = None):
        self.n_atoms = n_atoms
        self.local_dim = local_dim
        self.n_ground = n_ground
        self.max_excited = n_atoms if max_excited is None else max_excited
        self.exact_excited = exact_excited
        labels = np.array(list(product(range(local_dim), repeat=n_atoms)), dtype=np.int64)
        labels = labels.reshape(-1, n_atoms)
        n_exc = (labels >= n_ground).sum(1)
        keep = n_exc <= self.max_excited
        if exact_excited is not None:
            keep &= n_exc == exact_excited
        self.labels = labels[keep]
        self.n_exc = n_exc[keep]
        self._weights = local_dim ** np.arange(n_atoms - 1, -1, -1, dtype=np.int64)
        self.codes = self.labels @ self._weights

    @classmethod
    def for_scheme(cls, scheme: LevelScheme, n_atoms: int, **kw):
        return cls(n_atoms, scheme.local_dim, scheme.n_ground, **kw)

    @classmethod
    def ground_manifold(cls, scheme: LevelScheme, n_atoms: int):
        return cls(n_atoms, scheme.local_dim, scheme.n_ground, exact_excited=0)

    @property
    def dim(self) -> int:
        return len(self.codes)

    @property
    def is_full(self) -> bool:
        return self.exact_excited is None and self.max_excited >= self.n_atoms

    def index_of(self, labels) -> np.ndarray:
        """Indices of label rows (-1 where not in the basis)."""
        codes = np.atleast_2d(labels) @ self._weights
        return self._lookup(codes)

    def _lookup(self, codes):
        pos = np.searchsorted(self.codes, codes)
        pos = np.clip(pos, 0, self.dim - 1)
        return np.where(self.codes[pos] == codes, pos, -1)

    def site_operator(self, op, site: int, target: "ProductBasis | None" = None) -> sp.csr_matrix:
        """Local operator op (local_dim x local_dim) acting on one site, as a sparse map
        self -> target (defaults to self); components leaving the target are dropped."""
        target = self if target is None else target
        op = np.asarray(op)
        rows, cols, vals = [], [], []
        w = self._weights[site]
        for a, b in zip(*np.nonzero(op)):
            src = np.nonzero(self.labels[:, site] == b)[0]
            dst = target._lookup(self.codes[src] + (a - b) * w)
            ok = dst >= 0
            rows.append(dst[ok])
            cols.append(src[ok])
            vals.append(np.full(ok.sum(), op[a, b], dtype=complex))
        if not rows:
            return sp.csr_matrix((target.dim, self.dim), dtype=complex)
        r, c, v = map(np.concatenate, (rows, cols, vals))
        return sp.csr_matrix((v, (r, c)), shape=(target.dim, self.dim))

    @cached_property
    def full_indices(self) -> np.ndarray:
        """Position of each basis state inside the uncapped Kronecker basis."""
        return self.codes

    def embed(self, rho: np.ndarray) -> np.ndarray:
        """Matrix on this basis -> matrix on the uncapped tensor-product space."""
        full = self.local_dim ** self.n_atoms
        out = np.zeros((full, full), dtype=rho.dtype)
        idx = self.full_indices
        out[np.ix_(idx, idx)] = rho
        return out

    def product_state(self, local_states) -> np.ndarray:
        """Ket for a product of local kets (list of local_dim vectors), restricted to the basis."""
        amp = np.ones(self.dim, complex)
        for site, psi in enumerate(local_states):
            amp = amp * np.asarray(psi, complex)[self.labels[:, site]]
        return amp
