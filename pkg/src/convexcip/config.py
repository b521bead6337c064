"""Run configuration: defaults, YAML/JSON loading, dotted overrides and validation."""
import copy
from pathlib import Path

import numpy as np
import yaml

from .forward import SourceSpec
from .grid import FrequencyGrid, Grid3, GridError
from .inversion import CarlemanParams, InverseConfig
from .shapes import ShapeError, check_inside, shape_from_dict

DEFAULTS = {
    "geometry": {"R": 5.0, "b": 2.0, "D": 14.0, "source": [0.1, 0.0, -9.0]},
    "grid": {"Nx": 51, "Ny": 51, "Nz": 21, "forward_refine": 2},
    "frequency": {
        "window": [6.72, 9.45],
        "Nk": 31,
        "auto": False,
        "band": None,
        "samples": None,
        "window_len": 2.73,
        "weights": [1.0, 1.0],
    },
    "basis": {"N": 6},
    "medium": {"shapes": []},
    "simulate": {"noise_pct": 0.0, "workers": 1, "far_half_width": None},
    "propagation": {"pad": 2},
    "preprocess": {"fraction": 0.4, "sigma": 2.0},
    "inversion": {
        "lam": 1.1,
        "r": 5.5,
        "eps": 1e-9,
        "eta0": 0.1,
        "eta_min": 1e-9,
        "step_tol": 1e-10,
        "max_iters": 2000,
        "M": None,
        "cg_tol": 1e-8,
    },
    "probes": {
        "R": 1.0,
        "b": 1.0,
        "n": 11,
        "N": 3,
        "Nk": 11,
        "lams": [0.1, 1.1, 3.0],
        "pairs": 200,
        "radius": 1.0,
        # desk-scale counterpart of the cube test object; [] gives zero boundary data
        "shapes": [{"type": "box", "center": [0.0, 0.0, -0.4], "size": [0.4, 0.4, 0.4], "c": 5.0}],
    },
    "output_dir": "run",
    "seed": 0,
}


class ConfigError(ValueError):
    pass


def _merge(base, extra, path=""):
    for key, val in extra.items():
        where = path + key
        if key not in base:
            raise ConfigError("unknown configuration key %r" % where)
        if isinstance(base[key], dict) and not isinstance(val, dict):
            raise ConfigError("%r must be a mapping" % where)
        if isinstance(base[key], dict):
            _merge(base[key], val, where + ".")
        else:
            base[key] = val


def parse_override(text):
    if "=" not in text:
        raise ConfigError("override %r is not KEY=VALUE" % text)
    key, raw = text.split("=", 1)
    value = yaml.safe_load(raw)
    out = {}
    cur = out
    parts = key.strip().split(".")
    for p in parts[:-1]:
        cur = cur.setdefault(p, {})
    cur[parts[-1]] = value
    return out


class RunConfig:
    """Validated, merged configuration with helpers that build the numeric objects."""

    def __init__(self, data=None, overrides=()):
        self.data = copy.deepcopy(DEFAULTS)
        if data:
            if not isinstance(data, dict):
                raise ConfigError("configuration must be a mapping")
            _merge(self.data, data)
        for o in overrides:
            _merge(self.data, parse_override(o))
        self._validate()

    @classmethod
    def load(cls, path=None, overrides=()):
        data = None
        if path is not None:
            p = Path(path)
            if not p.exists():
                raise ConfigError("config file %s not found" % p)
            try:
                data = yaml.safe_load(p.read_text())
            except yaml.YAMLError as exc:
                raise ConfigError("cannot parse %s: %s" % (p, exc)) from None
        return cls(data, overrides)

    def __getitem__(self, key):
        return self.data[key]

    def snapshot(self):
        return copy.deepcopy(self.data)

    # builders ---------------------------------------------------------------
    def grid(self):
        g, geo = self.data["grid"], self.data["geometry"]
        return Grid3(float(geo["R"]), float(geo["b"]), int(g["Nx"]), int(g["Ny"]), int(g["Nz"]))

    def forward_grid(self):
        return self.grid().refined(int(self.data["grid"]["forward_refine"]))

    def source(self):
        return SourceSpec(tuple(float(v) for v in self.data["geometry"]["source"]))

    def shapes(self):
        return [shape_from_dict(s) for s in self.data["medium"]["shapes"]]

    def probe_shapes(self):
        return [shape_from_dict(s) for s in self.data["probes"]["shapes"]]

    def data_kgrid(self):
        """Wavenumbers at which data are simulated."""
        f = self.data["frequency"]
        if f["auto"]:
            lo, hi = f["band"]
            n = int(f["samples"])
            nodes = np.linspace(lo, hi, n)
            w = np.full(n, (hi - lo) / (n - 1))
            return FrequencyGrid(nodes, w)
        return FrequencyGrid.simpson(float(f["window"][0]), float(f["window"][1]), int(f["Nk"]))

    def carleman(self):
        inv = self.data["inversion"]
        return CarlemanParams(float(inv["lam"]), float(inv["r"]))

    def inverse(self):
        inv = self.data["inversion"]
        return InverseConfig(
            eps=float(inv["eps"]),
            eta0=float(inv["eta0"]),
            eta_min=float(inv["eta_min"]),
            step_tol=float(inv["step_tol"]),
            max_iters=int(inv["max_iters"]),
            M=None if inv["M"] is None else float(inv["M"]),
            cg_tol=float(inv["cg_tol"]),
        )

    def _validate(self):
        try:
            grid = self.grid()
            self.forward_grid()
            src = self.source()
            geo = self.data["geometry"]
            if float(geo["D"]) <= grid.b:
                raise ConfigError("geometry.D must exceed geometry.b")
            x, y, z = src.position
            if abs(x) <= grid.R and abs(y) <= grid.R and abs(z) <= grid.b:
                raise ConfigError("source lies inside the domain")
            for s in self.shapes():
                check_inside(s, grid, grid.h)
            self.probe_shapes()
            f = self.data["frequency"]
            if f["auto"]:
                if not f["band"] or f["samples"] is None:
                    raise ConfigError("automatic window selection needs frequency.band and frequency.samples")
                if not 0 < float(f["window_len"]) < f["band"][1] - f["band"][0]:
                    raise ConfigError("frequency.window_len must be shorter than the band")
            self.data_kgrid()
            if int(self.data["basis"]["N"]) < 1:
                raise ConfigError("basis.N must be positive")
            p = self.data["preprocess"]
            if not 0 < float(p["fraction"]) < 1 or float(p["sigma"]) <= 0:
                raise ConfigError("preprocess.fraction must lie in (0, 1) and sigma be positive")
            params = self.carleman()
            if params.r <= grid.b:
                raise ConfigError("inversion.r must exceed b")
            self.inverse()
            hw = self.data["simulate"]["far_half_width"]
            if hw is not None and float(hw) < grid.R:
                raise ConfigError("simulate.far_half_width must be at least R")
        except (GridError, ShapeError, TypeError, KeyError) as exc:
            raise ConfigError(str(exc)) from None
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from None
