"""Run configuration: a YAML document with the keys below, all optional.

grid:      {dim: 1, M: 32, L: 6.283185307179586}
potential: {kind: gaussian | mollified_coulomb | zero, strength: 0.05, width: 1.0, cutoff: null}
initial:   {kind: gaussian | plane_wave | file, width: 1.0, center: null, momentum: 0, mode: 1, path: null}
time:      {dt: 0.001, T: 1.0}
picard:    {tol: 1.0e-10, max_iter: 40}
N: 1.0
oracle:    {enabled: false, n_max: 10, headroom: 10, stride: 25}
output_dir: out
seed: 0
constants: null      # path to an error-constants file; null means the packaged one
"""
from __future__ import annotations

import copy
from dataclasses import asdict, dataclass, field
from pathlib import Path

import yaml

from .errors import ConfigurationError
from .fock import MAX_DIM, fock_dimension

DEFAULTS = {
    "grid": {"dim": 1, "M": 32, "L": 6.283185307179586},
    "potential": {"kind": "gaussian", "strength": 0.05, "width": 1.0, "cutoff": None},
    "initial": {"kind": "gaussian", "width": 1.0, "center": None, "momentum": 0, "mode": 1, "path": None},
    "time": {"dt": 1e-3, "T": 1.0},
    "picard": {"tol": 1e-10, "max_iter": 40},
    "oracle": {"enabled": False, "n_max": 10, "headroom": 10, "stride": 25},
}


def _merge(base, over, where=""):
    out = copy.deepcopy(base)
    for key, val in (over or {}).items():
        if key not in base:
            raise ConfigurationError(f"unknown config key {where}{key!r}")
        out[key] = val
    return out


@dataclass
class RunConfig:
    grid: dict = field(default_factory=lambda: dict(DEFAULTS["grid"]))
    potential: dict = field(default_factory=lambda: dict(DEFAULTS["potential"]))
    initial: dict = field(default_factory=lambda: dict(DEFAULTS["initial"]))
    time: dict = field(default_factory=lambda: dict(DEFAULTS["time"]))
    picard: dict = field(default_factory=lambda: dict(DEFAULTS["picard"]))
    N: float = 1.0
    oracle: dict = field(default_factory=lambda: dict(DEFAULTS["oracle"]))
    output_dir: str = "out"
    seed: int = 0
    constants: str | None = None

    @classmethod
    def from_dict(cls, data):
        data = dict(data or {})
        top = {"N", "output_dir", "seed", "constants", *DEFAULTS}
        unknown = set(data) - top
        if unknown:
            raise ConfigurationError(f"unknown config keys {sorted(unknown)}")
        kw = {sec: _merge(DEFAULTS[sec], data.get(sec), f"{sec}.") for sec in DEFAULTS}
        cfg = cls(
            **kw,
            N=float(data.get("N", 1.0)),
            output_dir=str(data.get("output_dir", "out")),
            seed=int(data.get("seed", 0)),
            constants=data.get("constants"),
        )
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path):
        try:
            with open(path) as fh:
                data = yaml.safe_load(fh)
        except OSError as exc:
            raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(data)

    def to_dict(self):
        return asdict(self)

    def dump(self):
        return yaml.safe_dump(self.to_dict(), sort_keys=True, default_flow_style=False)

    @property
    def n_steps(self):
        return int(round(self.time["T"] / self.time["dt"]))

    def validate(self):
        g = self.grid
        if g["dim"] not in (1, 2, 3):
            raise ConfigurationError("grid.dim must be 1, 2 or 3")
        if int(g["M"]) < 2 or g["L"] <= 0:
            raise ConfigurationError("grid.M must be >= 2 and grid.L > 0")
        dt, T = self.time["dt"], self.time["T"]
        if not (dt > 0 and T > 0):
            raise ConfigurationError("time.dt and time.T must be positive")
        if abs(T / dt - round(T / dt)) > 1e-9 * T / dt:
            raise ConfigurationError("time.T must be an integer multiple of time.dt")
        if self.n_steps < 4:
            raise ConfigurationError("need at least 4 time steps")
        if self.N < 1:
            raise ConfigurationError("N must be >= 1")
        if not self.picard["tol"] > 0 or int(self.picard["max_iter"]) < 1:
            raise ConfigurationError("picard.tol must be positive and picard.max_iter >= 1")
        o = self.oracle
        if o["enabled"]:
            if g["dim"] != 1:
                raise ConfigurationError("the Fock oracle runs on one-dimensional lattices only")
            if int(o["n_max"]) < 2 or int(o["headroom"]) < 0 or int(o["stride"]) < 1:
                raise ConfigurationError("oracle.n_max >= 2, oracle.headroom >= 0, oracle.stride >= 1")
            dim = fock_dimension(int(g["M"]), int(o["n_max"]) + int(o["headroom"]))
            if dim > MAX_DIM:
                raise ConfigurationError(f"oracle Fock dimension {dim} exceeds {MAX_DIM}; use a smaller grid.M")

    def resolve_output(self, cli_out=None, env=None):
        """--out beats BOSEPAIR_OUT, which beats output_dir from the file."""
        if cli_out:
            return Path(cli_out)
        if env:
            return Path(env)
        return Path(self.output_dir)
