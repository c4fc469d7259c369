"""Frozen experiment presets. Each preset is a tuple of complete RunConfig jobs."""
from __future__ import annotations

from types import MappingProxyType

import numpy as np

from .config import RunConfig

FIG1D_DETUNINGS = tuple(float(d) for d in np.linspace(-10.0, 10.0, 41))

# regime-I and regime-II switch-off times for the four-level chain (Omega = 0.1, 1/Gamma units)
FIG2_SWITCH_OFF = (2.0, 150.0)

_CHAIN5 = {"dim": 1, "n_per_side": 5, "spacing": 0.1}
_FIG2_DRIVE = {"rabi": 0.1, "detuning": -3.0}
_FIG2_TIME = {"t_max": 300.0, "n_steps": 61, "spacing": "log", "t_min": 0.1}

_RAW = {
    "fig2": (
        {"name": "fig2_two_level", "solver": "ed", "geometry": _CHAIN5, "levels": {"scheme": "two-level"},
         "drive": _FIG2_DRIVE, "time": _FIG2_TIME,
         "observables": ["excited_population", "negativity"]},
        {"name": "fig2_four_level", "solver": "ed", "geometry": _CHAIN5, "levels": {"scheme": "four-level"},
         "drive": {**_FIG2_DRIVE, "switch_off": FIG2_SWITCH_OFF}, "time": _FIG2_TIME,
         "ed": {"max_excited": 1},
         "observables": ["excited_population", "negativity"]},
        {"name": "fig2_four_level_gsm", "solver": "gsm", "geometry": _CHAIN5,
         "levels": {"scheme": "four-level"}, "drive": _FIG2_DRIVE,
         "time": {"t_max": 1e5, "n_steps": 81, "spacing": "log", "t_min": 0.1},
         "observables": ["negativity"]},
    ),
    "fig1d": (
        {"name": "fig1d", "solver": "gsm", "geometry": {"dim": 2, "n_per_side": 2, "spacing": 0.1},
         "levels": {"scheme": "four-level"},
         "drive": {"rabi": 0.1, "detuning": 0.0, "detuning_scan": FIG1D_DETUNINGS},
         "time": {"t_max": 1e5, "n_steps": 61, "spacing": "log", "t_min": 1.0},
         "observables": ["negativity"]},
    ),
    "fig3": (
        {"name": "fig3", "solver": "dtwa",
         "geometry": {"dim": 2, "n_per_side": 10, "spacing": 0.1, "periodic": True},
         "drive": {"rabi": 0.1, "detuning": 100.0},
         "time": {"t_max": 1.0, "n_steps": 21, "unit": "tau"},
         "dtwa": {"n_traj": 10_000, "chunk_size": 500, "modes": "all"},
         "observables": ["n_k", "quadratures"], "seed": 20240601},
    ),
    "sr88": (
        {"name": "sr88", "solver": "gsm", "geometry": {"dim": 1, "n_per_side": 2, "spacing": 0.067},
         "levels": {"scheme": "sr88"},
         "drive": {"rabi": 0.1, "detuning": 27.0, "polarization": "sigma+", "k_hat": (0.0, 0.0, 1.0)},
         "time": {"t_max": 1e7, "n_steps": 81, "spacing": "log", "t_min": 1.0},
         "observables": ["negativity", "toth"]},
    ),
    "figS1": (
        {"name": "figS1_ed", "solver": "ed", "geometry": {"dim": 1, "n_per_side": 2, "spacing": 0.1},
         "levels": {"scheme": "four-level"}, "drive": {"rabi": 0.1, "detuning": -3.0},
         "time": {"t_max": 2000.0, "n_steps": 201}, "observables": ["populations", "negativity"]},
        {"name": "figS1_gsm", "solver": "gsm", "geometry": {"dim": 1, "n_per_side": 2, "spacing": 0.1},
         "levels": {"scheme": "four-level"}, "drive": {"rabi": 0.1, "detuning": -3.0},
         "time": {"t_max": 2000.0, "n_steps": 201}, "observables": ["populations", "negativity"]},
    ),
}

PRESETS = MappingProxyType({name: tuple(RunConfig.model_validate(j) for j in jobs)
                            for name, jobs in _RAW.items()})


class UnknownPreset(KeyError):
    pass


def preset_jobs(name: str) -> tuple:
    try:
        return PRESETS[name]
    except KeyError:
        raise UnknownPreset(f"unknown preset {name!r}; available: {sorted(PRESETS)}") from None
