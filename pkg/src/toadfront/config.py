"""TOML run configurations.

A run file has the sections ``tradeoff``, ``grid``, ``sim``, ``spectral``,
``fronts``, ``action``, ``budget``, ``compare`` and ``output``.  Missing
sections and keys take the defaults below.  Numbers may be written as
fraction strings such as ``"1/3"``.
"""
from __future__ import annotations

import copy
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .errors import ConfigError, DomainError
from .io import canonical_hash
from .model import TradeoffSpec
from .pde import GridSpec, SimConfig

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

DEFAULTS = {
    "name": "run",
    "tradeoff": {"kind": "power", "C": 1.0, "p": 1.0, "theta_min": 1.0},
    "grid": {"x_min": -20.0, "x_max": 200.0, "theta_max": 40.0, "nx": 1101, "ntheta": 160},
    "sim": {"dt": 0.04, "t_final": 60.0, "snapshot_every": 10, "linearized": False,
            "C0": 1.0, "field_times": [10, 20, 30, 40, 50, 60], "rho_max_estimate": 2.0,
            "implicit_weight": 1.0},
    "spectral": {"b": None, "N": 4096, "tol": 1e-9, "n_scan": 64},
    "fronts": {"threshold": 1e-2, "window": None, "window_fractions": [0.2, 1.0],
               "trait_source": "self"},
    "action": {"M": 200, "restarts": 2, "t": 20.0, "x": None, "theta": None,
               "a_bar": 0.5, "C_fit": 0.5, "seed": 0},
    "budget": {"T": 200.0, "Lambda1": 0.1, "H": 0.5},
    "compare": {"linearized": False},
    "output": {"directory": "out", "plots": False},
}

_SECTIONS = [k for k, v in DEFAULTS.items() if isinstance(v, dict)]


def _number(v):
    if isinstance(v, str):
        try:
            return float(Fraction(v.strip()))
        except ValueError as exc:
            raise ConfigError(f"cannot read {v!r} as a number") from exc
    return v


def _merge(raw):
    cfg = copy.deepcopy(DEFAULTS)
    unknown = set(raw) - set(DEFAULTS)
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    for key, val in raw.items():
        if key in _SECTIONS:
            if not isinstance(val, dict):
                raise ConfigError(f"section [{key}] must be a table")
            if key == "tradeoff":
                cfg[key] = {}  # tagged record: no cross-kind defaults
            cfg[key].update(val)
        else:
            cfg[key] = val
    for sec in ("tradeoff", "grid", "sim", "action", "budget"):
        for k, v in cfg[sec].items():
            if k not in ("kind", "knots", "sub"):
                cfg[sec][k] = _number(v)
    return cfg


@dataclass
class RunConfig:
    name: str
    tradeoff: TradeoffSpec
    sim: SimConfig
    spectral: dict
    fronts: dict
    action: dict
    budget: dict
    compare: dict
    output: dict
    raw: dict = field(default_factory=dict)
    source: str | None = None

    @property
    def hash(self):
        return canonical_hash(self.raw)

    @property
    def grid(self):
        return self.sim.grid

    def with_sim(self, **changes):
        """Copy with selected simulation fields replaced (e.g. ``linearized=True``)."""
        raw = copy.deepcopy(self.raw)
        raw["sim"].update(changes)
        return from_dict(raw, self.source)


def from_dict(raw, source=None):
    cfg = _merge(raw)
    try:
        spec = TradeoffSpec.from_dict(cfg["tradeoff"])
        g = dict(cfg["grid"])
        g.setdefault("theta_min", spec.theta_min)
        grid = GridSpec(**{k: (int(v) if k in ("nx", "ntheta") else float(v))
                           for k, v in g.items()})
        s = dict(cfg["sim"])
        sim = SimConfig(grid, spec, dt=float(s["dt"]), t_final=float(s["t_final"]),
                        linearized=bool(s["linearized"]),
                        snapshot_every=int(s["snapshot_every"]), C0=float(s["C0"]),
                        field_times=tuple(float(t) for t in s["field_times"]),
                        rho_max_estimate=float(s["rho_max_estimate"]),
                        implicit_weight=float(s["implicit_weight"]),
                        front_threshold=float(cfg["fronts"]["threshold"]))
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"incomplete configuration: {exc}") from exc
    except DomainError as exc:
        raise ConfigError(str(exc)) from exc
    return RunConfig(str(cfg["name"]), spec, sim, cfg["spectral"], cfg["fronts"], cfg["action"],
                     cfg["budget"], cfg["compare"], cfg["output"], raw=cfg, source=source)


def load(path):
    path = Path(path)
    try:
        raw = tomllib.loads(path.read_text())
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    raw.setdefault("name", path.stem)
    return from_dict(raw, str(path))
