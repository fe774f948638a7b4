"""Run configuration: TOML or JSON files with a fixed schema, plus builders for the objects they name."""

from __future__ import annotations

import copy
import hashlib
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .fibermodel import (
    FiberModel,
    FiberModelSpec,
    ProjectiveValue,
    flat_constant_c_base,
    flat_variable_c_base,
    round_base,
)
from .profiles import builtin_profile
from .scalarfun import Interval, from_monomials


class ConfigError(ValueError):
    def __init__(self, section: str, key: str, message: str):
        self.section, self.key = section, key
        super().__init__(f"[{section}].{key}: {message}")


DEFAULTS: dict = {
    "interval": {"tau_min": 0.0, "tau_max": 1.0},
    "profile": {"name": "quadratic", "a": 1.0, "bump": 0.0, "coeffs": [], "epsilon": None},
    "base": {"kind": "flat-const", "c": [-1.0, 1.0], "c0": -1.0, "amplitude": 0.2, "curvature": 1.0,
             "half_width": None},
    "change": {"mode": "SH", "preset": "skrp", "S": [0.0, 0.0, 1.0], "H": [], "psi": [],
               "curvature": False},
    "family": {"lambda": 1.0, "c": 0.0, "a": 2.0},
    "obstruction": {"H_prime": [-5.0 / 9.0, 1.0], "c": [-1.0, 1.0], "T": None, "n": 4001},
    "u2": {"profile": "quartic", "a": 1.5, "bump": 1.0, "coeffs": [], "tau_min": 0.5, "tau_max": 2.0,
           "c": [-1.0, 1.0], "c_hat": [-0.5, 1.0], "tol": 1e-8},
    "verify": {"seed": 0, "points": 100, "tol_scale": 1.0},
    "output": {"dir": "kahlerlab-out", "formats": ["json", "csv"]},
}

BASE_KINDS = ("flat-const", "flat-var", "flat-infinite", "round")
CHANGE_MODES = ("SH", "theta-from-H", "psi")
PRESETS = ("ke", "soliton", "confeinstein", "skrp", "legendre3", "none")


@dataclass
class RunConfig:
    data: dict = field(default_factory=lambda: copy.deepcopy(DEFAULTS))
    source: str = "<defaults>"

    def __getitem__(self, section: str) -> dict:
        return self.data[section]

    @property
    def config_hash(self) -> str:
        """Hash of everything that affects the numbers; [output] is excluded."""
        numeric = {k: v for k, v in self.data.items() if k != "output"}
        text = json.dumps(numeric, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    def run_id(self, seed: int, subcommand: str) -> str:
        return hashlib.sha256(f"{self.config_hash}:{seed}:{subcommand}".encode()).hexdigest()[:12]

    # builders -------------------------------------------------------------
    def interval(self) -> Interval:
        iv = self["interval"]
        return Interval(iv["tau_min"], iv["tau_max"])

    def profile(self):
        p = self["profile"]
        params = {"bump": p["bump"], "coeffs": p["coeffs"]}
        return builtin_profile(p["name"], self.interval(), p["a"], params)

    def model(self) -> FiberModel:
        P = self.profile()
        b = self["base"]
        a, ts = P.a, P.tau_star
        hw = b["half_width"]
        kind = b["kind"]
        if kind == "flat-const":
            base = flat_constant_c_base(a, ts, parse_projective(b["c"], "base", "c"), hw or 1.0)
        elif kind == "flat-infinite":
            base = flat_constant_c_base(a, ts, ProjectiveValue.infinity(), hw or 1.0)
        elif kind == "flat-var":
            base = flat_variable_c_base(a, ts, b["c0"], b["amplitude"], hw or 1.0)
        else:
            base = round_base(a, ts, b["curvature"], parse_projective(b["c"], "base", "c"), hw or 0.5)
        return FiberModel(FiberModelSpec(P, base, self["profile"]["epsilon"]))

    def coefficients(self, section: str, key: str):
        return from_monomials(self[section][key], self.interval())


def parse_projective(value, section: str, key: str) -> ProjectiveValue:
    """``[p, q]`` for p/q, a number for a finite value, or ``"inf"``."""
    if isinstance(value, str):
        if value.lower() in ("inf", "infinity", "oo"):
            return ProjectiveValue.infinity()
        raise ConfigError(section, key, f"unrecognised value {value!r}")
    if isinstance(value, (int, float)):
        return ProjectiveValue.finite(float(value))
    if isinstance(value, (list, tuple)) and len(value) == 2:
        try:
            return ProjectiveValue(float(value[0]), float(value[1]))
        except ValueError as exc:
            raise ConfigError(section, key, str(exc)) from None
    raise ConfigError(section, key, "expected [p, q], a number or 'inf'")


def _merge(defaults: dict, given: dict, path: str = "") -> dict:
    out = copy.deepcopy(defaults)
    for section, values in given.items():
        if section not in defaults:
            raise ConfigError(section, "*", "unknown section")
        if not isinstance(values, dict):
            raise ConfigError(section, "*", "expected a table")
        for key, val in values.items():
            if key not in defaults[section]:
                raise ConfigError(section, key, "unknown key")
            out[section][key] = val
    return out


def _positive(cfg: dict, section: str, key: str):
    val = cfg[section][key]
    if not isinstance(val, (int, float)) or isinstance(val, bool) or not val > 0:
        raise ConfigError(section, key, f"must be a positive number, got {val!r}")


def validate(data: dict) -> None:
    iv = data["interval"]
    if not iv["tau_min"] < iv["tau_max"]:
        raise ConfigError("interval", "tau_max", "must exceed tau_min")
    _positive(data, "profile", "a")
    if data["profile"]["name"] not in ("quadratic", "quartic", "custom-coeffs"):
        raise ConfigError("profile", "name", f"unknown profile {data['profile']['name']!r}")
    if data["base"]["kind"] not in BASE_KINDS:
        raise ConfigError("base", "kind", f"expected one of {BASE_KINDS}")
    parse_projective(data["base"]["c"], "base", "c")
    if data["change"]["mode"] not in CHANGE_MODES:
        raise ConfigError("change", "mode", f"expected one of {CHANGE_MODES}")
    if data["change"]["preset"] not in PRESETS:
        raise ConfigError("change", "preset", f"unknown preset {data['change']['preset']!r}")
    parse_projective(data["obstruction"]["c"], "obstruction", "c")
    if data["obstruction"]["T"] is not None:
        _positive(data, "obstruction", "T")
    _positive(data, "u2", "a")
    _positive(data, "verify", "points")
    _positive(data, "verify", "tol_scale")
    seed = data["verify"]["seed"]
    if not isinstance(seed, int) or isinstance(seed, bool) or not 0 <= seed < 2**64:
        raise ConfigError("verify", "seed", f"must be a 64-bit non-negative integer, got {seed!r}")
    for fmt in data["output"]["formats"]:
        if fmt not in ("json", "csv"):
            raise ConfigError("output", "formats", f"unknown format {fmt!r}")


def load_config(path: str | Path | None = None) -> RunConfig:
    if path is None:
        data = copy.deepcopy(DEFAULTS)
        validate(data)
        return RunConfig(data)
    path = Path(path)
    text = path.read_bytes()
    if path.suffix.lower() == ".json":
        given = json.loads(text)
    else:
        given = tomllib.loads(text.decode())
    data = _merge(DEFAULTS, given)
    validate(data)
    return RunConfig(data, str(path))
