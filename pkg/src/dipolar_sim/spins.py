"""Spin-1/2 operators on the two ground sublevels.

Local ordering is (g_-, g_+) = (index 0, index 1); sigma^+ = |g_+><g_-| and
sigma^z = |g_+><g_+| - |g_-><g_-|.
"""
from __future__ import annotations

from functools import reduce

import numpy as np
import scipy.sparse as sp

SP = np.array([[0, 0], [1, 0]], complex)    # |g+><g-|
SM = SP.T.copy()
SX = SP + SM
SY = -1j * SP + 1j * SM
SZ = np.diag([-1.0, 1.0]).astype(complex)
ID2 = np.eye(2, dtype=complex)
PAULI = (SX, SY, SZ)

# state polarized along +x: (|g-> + |g+>)/sqrt(2)
PLUS_X = np.array([1, 1], complex) / np.sqrt(2)


def site_op(op, site, n, sparse=False):
    """op acting on `site` of n spins (site 0 is the most significant factor)."""
    if sparse:
        left = sp.identity(2 ** site, format="csr", dtype=complex)
        right = sp.identity(2 ** (n - site - 1), format="csr", dtype=complex)
        return sp.kron(sp.kron(left, sp.csr_matrix(op)), right, format="csr")
    mats = [ID2] * n
    mats[site] = op
    return reduce(np.kron, mats)


def pair_op(op_a, i, op_b, j, n, sparse=False):
    a = site_op(op_a, i, n, sparse)
    b = site_op(op_b, j, n, sparse)
    return a @ b


def product_ket(local, n=None):
    if n is not None:
        local = [local] * n
    return reduce(np.kron, [np.asarray(v, complex) for v in local])


def collective(n, sparse=True):
    """Collective operators S_alpha = sum_i sigma^alpha_i / 2."""
    return [sum(site_op(p, i, n, sparse) for i in range(n)) * 0.5 for p in PAULI]
