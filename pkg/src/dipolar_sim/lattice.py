"""Array geometries, level schemes, polarization basis, drive and pulse envelopes.

Units: Gamma = 1, hbar = 1, lengths in units of the transition wavelength.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import factorial, sqrt

import numpy as np

Q_VALUES = (-1, 0, 1)  # photon polarizations; array index is q + 1


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


# ---------------------------------------------------------------- geometry

@dataclass(frozen=True)
class ArrayGeometry:
    positions: np.ndarray          # (N, 3), units of lambda
    lattice_constant: float
    dim: int                       # 1 or 2; 0 for free-form position lists
    n_per_side: int

    def __post_init__(self):
        pos = _frozen(self.positions)
        if pos.ndim != 2 or pos.shape[1] != 3:
            raise ValueError("positions must have shape (N, 3)")
        object.__setattr__(self, "positions", pos)
        if len(pos) > 1:
            d = np.linalg.norm(pos[:, None] - pos[None], axis=-1)
            d[np.diag_indices(len(pos))] = np.inf
            if d.min() <= 0:
                raise ValueError("coincident atoms in geometry")

    @property
    def n_atoms(self) -> int:
        return len(self.positions)

    @classmethod
    def from_positions(cls, positions, lattice_constant=0.0):
        return cls(np.asarray(positions, float), float(lattice_constant), 0, 0)

    def middle_site(self) -> int:
        """Site closest to the centre of mass (lowest index on ties)."""
        c = self.positions.mean(0)
        return int(np.argmin(np.linalg.norm(self.positions - c, axis=1)))


def build_lattice(dim: int, n_per_side: int, a: float) -> ArrayGeometry:
    """1D chain along X, or square lattice in the X-Z plane with row index along Z."""
    if dim not in (1, 2):
        raise ValueError(f"dim must be 1 or 2, got {dim}")
    if int(n_per_side) != n_per_side or n_per_side < 1:
        raise ValueError(f"n_per_side must be a positive integer, got {n_per_side}")
    if not a > 0:
        raise ValueError(f"lattice constant must be positive, got {a}")
    n_per_side = int(n_per_side)
    n = n_per_side ** dim
    idx = np.arange(n)
    pos = np.zeros((n, 3))
    if dim == 1:
        pos[:, 0] = idx * a
    else:
        pos[:, 0] = (idx % n_per_side) * a
        pos[:, 2] = (idx // n_per_side) * a
    return ArrayGeometry(pos, float(a), dim, n_per_side)


# ---------------------------------------------------------------- Clebsch-Gordan

def _as_half(x) -> Fraction:
    f = Fraction(x).limit_denominator(2)
    if f.denominator not in (1, 2) or abs(float(f) - float(x)) > 1e-12:
        raise ValueError(f"{x} is not an integer or half-integer")
    return f


def clebsch_gordan(j1, m1, j2, m2, j, m) -> float:
    """<j1 m1; j2 m2 | j m> via the Racah closed form (Condon-Shortley phases)."""
    j1, m1, j2, m2, j, m = map(_as_half, (j1, m1, j2, m2, j, m))
    if m1 + m2 != m or abs(m1) > j1 or abs(m2) > j2 or abs(m) > j:
        return 0.0
    if not (abs(j1 - j2) <= j <= j1 + j2):
        return 0.0
    ints = [j1 + j2 - j, j1 - j2 + j, -j1 + j2 + j, j1 + j2 + j + 1,
            j1 + m1, j1 - m1, j2 + m2, j2 - m2, j + m, j - m]
    if any(x.denominator != 1 for x in ints):
        return 0.0
    f = lambda x: factorial(int(x))
    pref = Fraction((2 * j + 1) * f(j1 + j2 - j) * f(j1 - j2 + j) * f(-j1 + j2 + j),
                    f(j1 + j2 + j + 1))
    pref *= f(j1 + m1) * f(j1 - m1) * f(j2 + m2) * f(j2 - m2) * f(j + m) * f(j - m)
    total = Fraction(0)
    for k in range(0, int(j1 + j2 - j) + 1):
        d = [k, j1 + j2 - j - k, j1 - m1 - k, j2 + m2 - k, j - j2 + m1 + k, j - j1 - m2 + k]
        if any(x < 0 for x in d):
            continue
        den = 1
        for x in d:
            den *= f(x)
        total += Fraction((-1) ** k, den)
    return float(np.sign(total)) * sqrt(pref * total * total)


@dataclass(frozen=True)
class LevelScheme:
    """Ground/excited sublevels of one atom and the dipole weights between them.

    Local basis ordering: ground sublevels (ascending m) then excited sublevels.
    cg[n, e, q+1] is the weight of the transition ground n -> excited e with
    polarization q (zero unless m_e = m_n + q).
    """
    f_g: float
    f_e: float
    ground_m: tuple
    excited_m: tuple
    cg: np.ndarray = field(repr=False)
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "cg", _frozen(self.cg))

    @property
    def n_ground(self) -> int:
        return len(self.ground_m)

    @property
    def n_excited(self) -> int:
        return len(self.excited_m)

    @property
    def local_dim(self) -> int:
        return self.n_ground + self.n_excited

    def lowering(self, q: int) -> np.ndarray:
        """Single-atom D^-_q = sum_n C |g_n><e_{n+q}| on the local space."""
        d, ng = self.local_dim, self.n_ground
        op = np.zeros((d, d))
        op[:ng, ng:] = self.cg[:, :, q + 1]
        return op

    def raising(self, q: int) -> np.ndarray:
        return self.lowering(q).T.copy()

    def active_q(self) -> tuple:
        return tuple(q for q in Q_VALUES if np.any(self.cg[:, :, q + 1] != 0))


def cg_table(f_g, f_e, ground_m=None, excited_m=None) -> LevelScheme:
    """Level scheme with CG weights C_n^q = <F_g n; 1 q | F_e n+q>.

    F_g = F_e = 0 is treated as a two-level atom with a single pi transition and
    C = 1. Optional ground_m/excited_m restrict the sublevels that are kept.
    """
    fg, fe = _as_half(f_g), _as_half(f_e)
    if fg < 0 or fe < 0:
        raise ValueError("angular momenta must be non-negative")
    if abs(fg - fe) > 1:
        raise ValueError(f"dipole-forbidden transition F_g={f_g} -> F_e={f_e}")
    two_level = fg == 0 and fe == 0
    all_g = [-fg + i for i in range(int(2 * fg) + 1)]
    all_e = [-fe + i for i in range(int(2 * fe) + 1)]
    gm = all_g if ground_m is None else [_as_half(m) for m in ground_m]
    em = all_e if excited_m is None else [_as_half(m) for m in excited_m]
    for m in gm:
        if m not in all_g:
            raise ValueError(f"ground sublevel {m} outside F_g={f_g}")
    for m in em:
        if m not in all_e:
            raise ValueError(f"excited sublevel {m} outside F_e={f_e}")
    gm, em = sorted(gm), sorted(em)
    cg = np.zeros((len(gm), len(em), 3))
    for a, mg in enumerate(gm):
        for b, me in enumerate(em):
            q = me - mg
            if abs(q) > 1:
                continue
            if two_level:
                cg[a, b, 1] = 1.0
            else:
                cg[a, b, int(q) + 1] = clebsch_gordan(fg, mg, 1, q, fe, me)
    name = "two-level" if two_level else f"{fg}->{fe}"
    return LevelScheme(float(fg), float(fe), tuple(float(m) for m in gm),
                       tuple(float(m) for m in em), cg, name)


def two_level() -> LevelScheme:
    return cg_table(0, 0)


def four_level() -> LevelScheme:
    return cg_table(0.5, 0.5)


def sr88_subset() -> LevelScheme:
    """J=2 -> J=3 restricted to ground m in {1, 2} and excited m in {2, 3}."""
    return cg_table(2, 3, ground_m=(1, 2), excited_m=(2, 3))


# ---------------------------------------------------------------- polarization

@dataclass(frozen=True)
class PolarizationBasis:
    """Spherical basis e_{-1}, e_0, e_{+1} (rows in q+1 order), optionally tilted by theta about Y."""
    theta: float = 0.0

    @property
    def vectors(self) -> np.ndarray:
        c, s = np.cos(self.theta), np.sin(self.theta)
        x = np.array([c, 0.0, -s])       # rotated X
        y = np.array([0.0, 1.0, 0.0])
        z = np.array([s, 0.0, c])        # rotated Z, the quantization axis
        e_p = -(x + 1j * y) / np.sqrt(2)
        e_m = (x - 1j * y) / np.sqrt(2)
        return np.array([e_m, z.astype(complex), e_p])

    def e(self, q: int) -> np.ndarray:
        return self.vectors[q + 1]


# ---------------------------------------------------------------- drive

def pulse_envelope(shape: int, t_off, t):
    """Square pulse: 1 while on, 0 after t_off. Shape 1 never switches off."""
    t = np.asarray(t, float)
    if shape == 1:
        return np.ones_like(t) if t.ndim else 1.0
    if shape not in (2, 3):
        raise ValueError(f"pulse shape must be 1, 2 or 3, got {shape}")
    if t_off is None or not t_off > 0:
        raise ValueError("pulse shapes 2 and 3 need t_off > 0")
    out = (t < t_off).astype(float)
    return out if t.ndim else float(out)


@dataclass(frozen=True)
class DriveField:
    rabi: float
    detuning: float
    polarization: tuple = (0.0, 0.0, 1.0)     # e_L in Cartesian components
    k_hat: tuple = (0.0, 1.0, 0.0)            # perpendicular to the array plane
    shape: int = 1
    t_off: float | None = None

    def __post_init__(self):
        pol = np.asarray(self.polarization, complex)
        nrm = np.vdot(pol, pol).real
        if abs(nrm - 1) > 1e-10:
            raise ValueError(f"drive polarization must be normalized, |e_L|^2 = {nrm}")
        k = np.asarray(self.k_hat, float)
        if abs(np.linalg.norm(k) - 1) > 1e-10:
            raise ValueError("k_hat must be a unit vector")
        pulse_envelope(self.shape, self.t_off if self.shape != 1 else 1.0, 0.0)
        object.__setattr__(self, "polarization", tuple(pol))
        object.__setattr__(self, "k_hat", tuple(k))

    def envelope(self, t):
        return pulse_envelope(self.shape, self.t_off, t)

    def switch_times(self) -> tuple:
        return () if self.shape == 1 else (float(self.t_off),)

    def with_rabi(self, rabi):
        return DriveField(rabi, self.detuning, self.polarization, self.k_hat, self.shape, self.t_off)

    def site_amplitudes(self, geom: ArrayGeometry, basis: PolarizationBasis) -> np.ndarray:
        """Omega (e_L . e_q^*) exp(i k.r_i), shape (N, 3) in q+1 order."""
        pol = np.asarray(self.polarization)
        overlap = basis.vectors.conj() @ pol
        phase = np.exp(2j * np.pi * geom.positions @ np.asarray(self.k_hat))
        return self.rabi * phase[:, None] * overlap[None, :]
