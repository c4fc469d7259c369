"""Solver dispatch: RunConfig -> long-format result rows."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import spinwave as sw
from .config import ConfigError, RunConfig
from .cumulant import CumulantState, evolve_cumulant
from .dtwa import run_dtwa
from .effective import gsm_model, xy_model
from .hilbert import ProductBasis
from .lattice import DriveField, PolarizationBasis, build_lattice, four_level, sr88_subset, two_level
from .lindblad import propagate
from .master import default_ground_state, ed_generator, product_density
from .observables import (Bipartition, log_negativity, mode_moments_from_state, mode_operators,
                          moments_from_density, renyi2, structure_factor, toth_squeezing)
from . import spins

COLUMNS = ("series", "time_gamma", "time_tau", "observable", "k_x", "k_z", "value", "error")


@dataclass
class ResultTable:
    name: str
    tau: float | None
    rows: list = field(default_factory=list)

    def add(self, series, t, observable, value, error=None, k=None):
        tt = None if self.tau is None else t / self.tau
        kx, kz = (None, None) if k is None else (float(k[0]), float(k[1]))
        self.rows.append((series, float(t), tt, observable, kx, kz, float(value),
                          None if error is None else float(error)))


# ---------------------------------------------------------------- builders

def scheme_of(cfg: RunConfig):
    return {"two-level": two_level, "four-level": four_level, "sr88": sr88_subset}[cfg.levels.scheme]()


def geometry_of(cfg: RunConfig):
    g = cfg.geometry
    return build_lattice(g.dim, g.n_per_side, g.spacing)


def polarization_of(cfg: RunConfig) -> PolarizationBasis:
    return PolarizationBasis(cfg.drive.theta)


def drive_of(cfg: RunConfig, detuning=None) -> DriveField:
    pol = polarization_of(cfg)
    q = {"pi": 0, "sigma+": 1, "sigma-": -1}[cfg.drive.polarization]
    return DriveField(cfg.drive.rabi, cfg.drive.detuning if detuning is None else detuning,
                      polarization=tuple(pol.e(q)), k_hat=cfg.drive.k_hat)


def time_grid(cfg: RunConfig, scale=1.0) -> np.ndarray:
    """Sample times in 1/Gamma (scale multiplies the configured window)."""
    tg = cfg.time
    unit = cfg.tau() if tg.unit == "tau" else 1.0
    if tg.spacing == "log":
        t = np.concatenate([[0.0], np.logspace(np.log10(tg.t_min), np.log10(tg.t_max), tg.n_steps - 1)])
    else:
        t = np.linspace(0.0, tg.t_max, tg.n_steps)
    return t * unit * scale


def _subsystem(cfg: RunConfig, n):
    sub = cfg.ed.subsystem
    return Bipartition(sub, n) if sub else Bipartition.middle(n)


def _branches(t_grid, gen_on, gen_off, rho0, switch_off):
    """Yield (series, t, rho): the always-on run plus one drive-off branch per switch time.

    gen_off None means the state is frozen after switch-off.
    """
    saved = {}
    marks = sorted(set(float(s) for s in switch_off))
    grid = np.unique(np.concatenate([t_grid, marks])) if marks else t_grid
    on_times = set(np.round(t_grid, 12))
    for t, rho in propagate(rho0, gen_on, grid):
        if any(abs(t - m) < 1e-12 for m in marks):
            saved[min(marks, key=lambda m: abs(t - m))] = rho.copy()
        if round(t, 12) in on_times:
            yield "on", t, rho
    for m in marks:
        label = f"off@{m:g}"
        later = t_grid[t_grid > m]
        rho_m = saved[m]
        yield label, m, rho_m                 # branch starts at the switch-off instant
        if gen_off is None:
            for t in later:
                yield label, t, rho_m
        else:
            seg = np.concatenate([[m], later])
            for t, rho in propagate(rho_m, gen_off, seg):
                if t > m:
                    yield label, t, rho


def _density_observables(table, cfg, series, t, rho, basis: ProductBasis, scheme, ground_only):
    n = basis.n_atoms
    part = _subsystem(cfg, n)
    local = basis.n_ground if ground_only else basis.local_dim
    obs = cfg.observables
    diag = np.real(np.diag(rho))
    if "populations" in obs:
        names = ([f"g{m:g}" for m in scheme.ground_m]
                 + ([] if ground_only else [f"e{m:g}" for m in scheme.excited_m]))
        for i in range(n):
            for lev in range(local):
                table.add(series, t, f"pop[{i}][{names[lev]}]", diag[basis.labels[:, i] == lev].sum())
    if "excited_population" in obs:
        exc = 0.0 if ground_only else float((diag[:, None] * (basis.labels >= basis.n_ground)).sum())
        table.add(series, t, "excited_population", exc)
    need_full = {"negativity", "renyi2", "toth"} & set(obs)
    if need_full:
        # ground-manifold labels are already in Kronecker order over the ground levels
        full = rho if (basis.is_full or ground_only) else basis.embed(rho)
        dims = [local] * n
        if "negativity" in obs:
            table.add(series, t, "negativity", log_negativity(full, dims, part))
        if "renyi2" in obs:
            table.add(series, t, "renyi2", renyi2(full, dims, part))
        if "toth" in obs:
            if local != 2:
                raise ConfigError(["observables: toth needs two-level sites (ground manifold of size 2)"])
            table.add(series, t, "toth", toth_squeezing(moments_from_density(full, n)))


# ---------------------------------------------------------------- solvers

def run_ed(cfg: RunConfig, table: ResultTable, drive=None, series_prefix=""):
    scheme, geom = scheme_of(cfg), geometry_of(cfg)
    drive = drive or drive_of(cfg)
    pol = polarization_of(cfg)
    gen, basis = ed_generator(scheme, geom, drive, pol, max_excited=cfg.ed.max_excited)
    off = None
    if cfg.drive.switch_off:
        off, _ = ed_generator(scheme, geom, drive.with_rabi(0.0), pol, max_excited=cfg.ed.max_excited)
    rho0 = product_density(basis, default_ground_state(scheme))
    for series, t, rho in _branches(time_grid(cfg), gen, off, rho0, cfg.drive.switch_off):
        _density_observables(table, cfg, series_prefix + series, t, rho, basis, scheme, False)


def run_gsm(cfg: RunConfig, table: ResultTable, drive=None, series_prefix=""):
    scheme, geom = scheme_of(cfg), geometry_of(cfg)
    drive = drive or drive_of(cfg)
    model = gsm_model(scheme, geom, drive, polarization_of(cfg))
    gen = model.generator(keep_hamiltonian=cfg.gsm.keep_hamiltonian,
                          keep_dissipation=cfg.gsm.keep_dissipation)
    local = default_ground_state(scheme)[: scheme.n_ground]
    rho0 = product_density(model.ground, local)
    # every GSM term scales with Omega^2: after switch-off the ground state is frozen
    for series, t, rho in _branches(time_grid(cfg), gen, None, rho0, cfg.drive.switch_off):
        _density_observables(table, cfg, series_prefix + series, t, rho, model.ground, scheme, True)


def _xy(cfg: RunConfig, dissipation: bool):
    geom, drive = geometry_of(cfg), drive_of(cfg)
    if cfg.geometry.periodic:
        xy = sw.periodic_xy_model(geom, drive, polarization_of(cfg))
    else:
        xy = xy_model(geom, drive, polarization_of(cfg))
    return geom, (xy if dissipation else xy.without_dissipation())


def _modes(cfg, geom):
    ks = sw.reciprocal_grid(geom)
    if cfg.dtwa.modes == "kz_2pi" and geom.dim == 2:
        kz = 2 * np.pi / geom.lattice_constant
        ks = ks[np.isclose(ks[:, 1], kz)]
    return ks


def run_xy(cfg: RunConfig, table: ResultTable):
    geom, xy = _xy(cfg, cfg.xy.dissipation)
    n = xy.n_atoms
    if n > 12:
        raise ConfigError([f"geometry: xy exact dynamics limited to 12 spins, got {n}"])
    gen = xy.generator()
    psi = spins.product_ket(spins.PLUS_X, n)
    rho0 = np.outer(psi, psi.conj())
    part = _subsystem(cfg, n)
    ks = sw.reciprocal_grid(geom) if geom.dim in (1, 2) else np.zeros((0, 2))
    ops = [mode_operators(geom.positions, k) for k in ks] if "n_k" in cfg.observables else []
    for t, rho in propagate(rho0, gen, time_grid(cfg)):
        if "toth" in cfg.observables:
            table.add("xy", t, "toth", toth_squeezing(moments_from_density(rho, n)))
        if "negativity" in cfg.observables:
            table.add("xy", t, "negativity", log_negativity(rho, [2] * n, part))
        if "renyi2" in cfg.observables:
            table.add("xy", t, "renyi2", renyi2(rho, [2] * n, part))
        if "spin_means" in cfg.observables:
            s = spins.collective(n)
            for a, lab in enumerate("xyz"):
                table.add("xy", t, f"mean_sigma_{lab}", 2 * np.trace(s[a] @ rho).real / n)
        for k, op in zip(ks, ops):
            table.add("xy", t, "n_k", structure_factor(mode_moments_from_state(rho, op, n)), k=k)


def run_cumulant(cfg: RunConfig, table: ResultTable):
    geom, xy = _xy(cfg, cfg.cumulant.dissipation)
    n = xy.n_atoms
    ks = sw.reciprocal_grid(geom) if "n_k" in cfg.observables else []
    for t, st in evolve_cumulant(xy, CumulantState.polarized_x(n), time_grid(cfg)):
        if "toth" in cfg.observables:
            table.add("cumulant", t, "toth", toth_squeezing(st.spin_moments()))
        if "spin_means" in cfg.observables:
            for a, lab in enumerate("xyz"):
                table.add("cumulant", t, f"mean_sigma_{lab}", st.means[:, a].mean())
        for k in ks:
            table.add("cumulant", t, "n_k", structure_factor(st.mode_moments(geom.positions, k)), k=k)


def run_swa(cfg: RunConfig, table: ResultTable):
    geom = geometry_of(cfg)
    drive = drive_of(cfg)
    for th in cfg.swa.thetas:
        if not 0 <= th <= np.pi / 2 + 1e-12:
            raise ConfigError([f"swa.thetas: {th} outside [0, pi/2]"])
        xy = sw.periodic_xy_model(geom, drive, PolarizationBasis(th))
        spec = sw.spinwave_spectrum(xy, geom)
        label = f"theta={th:.6g}"
        for i, k in enumerate(spec.ks):
            table.add(label, 0.0, "xi2", spec.xi2[i], k=k)
        for t in time_grid(cfg):
            for i, k in enumerate(spec.ks):
                table.add(label, t, "n_k", sw.mode_occupation(spec, i, t), k=k)
                if "quadratures" in cfg.observables:
                    phi = float(sw.optimal_angle(spec, i, t)) if spec.f[i] and t > 0 else 0.0
                    table.add(label, t, "Q2_opt", sw.quadrature_variance(spec, i, t, phi), k=k)
                    table.add(label, t, "Q2_orth", sw.quadrature_variance(spec, i, t, phi + np.pi / 2), k=k)
                    table.add(label, t, "P2", sw.quadrature_variance(spec, i, t, np.pi / 2), k=k)


def run_dtwa_job(cfg: RunConfig, table: ResultTable):
    geom, xy = _xy(cfg, False)
    ks = _modes(cfg, geom)
    res = run_dtwa(xy, geom.positions, time_grid(cfg), ks, n_traj=cfg.dtwa.n_traj, seed=cfg.seed,
                   chunk_size=cfg.dtwa.chunk_size, threads=cfg.threads)
    n = xy.n_atoms
    nk, nk_se = res.structure_factor()
    p2, p2_se = res.quadrature(np.pi / 2)
    phi = res.optimal_phi()
    w, w_se = res.wineland(phi)
    wo, wo_se = res.wineland(phi + np.pi / 2)
    for ti, t in enumerate(res.t):
        for ki, k in enumerate(ks):
            table.add("dtwa", t, "n_k", nk[ti, ki], nk_se[ti, ki], k=k)
            table.add("dtwa", t, "P2", 2 * p2[ti, ki] / n, 2 * p2_se[ti, ki] / n, k=k)
            table.add("dtwa", t, "wineland_opt", w[ti, ki], w_se[ti, ki], k=k)
            table.add("dtwa", t, "wineland_orth", wo[ti, ki], wo_se[ti, ki], k=k)
    table.add("dtwa", res.t[-1], "max_norm_drift", res.max_norm_drift)
    table.add("dtwa", res.t[-1], "max_energy_drift", res.max_energy_drift)


SOLVER_FUNCS = {"ed": run_ed, "gsm": run_gsm, "xy": run_xy, "swa": run_swa,
                "dtwa": run_dtwa_job, "cumulant": run_cumulant}


def run_config(cfg: RunConfig) -> ResultTable:
    table = ResultTable(cfg.label, cfg.tau())
    func = SOLVER_FUNCS[cfg.solver]
    if cfg.drive.detuning_scan:
        if cfg.solver not in ("ed", "gsm"):
            raise ConfigError(["drive.detuning_scan: only supported for ed and gsm"])
        for det in cfg.drive.detuning_scan:
            table.tau = 0.04 * det**2 / cfg.drive.rabi**2 if det and cfg.drive.rabi else None
            func(cfg, table, drive=drive_of(cfg, det), series_prefix=f"detuning={det:g}/")
    else:
        func(cfg, table)
    return table
