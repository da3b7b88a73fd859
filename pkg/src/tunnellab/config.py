"""Run configuration: JSON loading, schema validation, typed accessors."""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from .potential import BarrierSpec, UnitSystem
from .scattering import EnergyGrid

DEFAULT_TOLERANCES = {
    "unitarity": 1e-8,
    "phase": 1e-8,
    "delay": 1e-6,
    "quadrature": 1e-10,
    "packet": 0.05,
    "probability": 0.01,
    "norm": 1e-10,
    "saturation": 1e-4,
    "hartman_ratio": 0.02,
    "oracle": 1e-8,
}

SUBCOMMANDS = ("amplitudes", "delays", "hartman", "classical", "semiclassical", "wavepacket", "verify")

# blocks each subcommand cannot run without
REQUIRED_BLOCKS = {
    "amplitudes": ("barrier", "energies"),
    "delays": ("barrier", "energies"),
    "hartman": ("barrier", "hartman"),
    "classical": ("barrier", "energies"),
    "semiclassical": ("barrier", "semiclassical"),
    "wavepacket": ("barrier", "packet", "grid"),
    "verify": ("barrier",),
}


class ConfigError(ValueError):
    """Configuration does not parse or does not match the schema."""


def load_schema() -> dict:
    return json.loads(resources.files("tunnellab").joinpath("data/config.schema.json").read_text())


def bundled_config_path(subcommand: str) -> Path:
    return Path(str(resources.files("tunnellab").joinpath(f"data/configs/{subcommand}.json")))


def _format_error(err: jsonschema.ValidationError) -> str:
    where = "/".join(str(p) for p in err.absolute_path) or "<root>"
    return f"{where}: {err.message}"


def validate(data: dict, subcommand: str | None = None) -> None:
    validator = jsonschema.Draft202012Validator(load_schema())
    errors = sorted(validator.iter_errors(data), key=lambda e: list(e.absolute_path))
    if errors:
        raise ConfigError("invalid configuration:\n  " + "\n  ".join(_format_error(e) for e in errors))
    e = data.get("energies", {})
    if "min" in e and "max" in e and not e["min"] < e["max"] and e.get("n", 1) > 1:
        raise ConfigError("invalid configuration:\n  energies: min must be below max")
    g = data.get("grid", {})
    if "xmin" in g and "xmax" in g and not g["xmin"] < g["xmax"]:
        raise ConfigError("invalid configuration:\n  grid: xmin must be below xmax")
    if subcommand is not None:
        missing = [k for k in REQUIRED_BLOCKS[subcommand] if k not in data]
        if missing:
            raise ConfigError(f"{subcommand} needs config block(s): {', '.join(missing)}")


@dataclass(frozen=True)
class RunConfig:
    """Validated configuration; ``raw`` is echoed into the run report."""

    raw: dict
    source: str = ""

    @classmethod
    def from_dict(cls, data: dict, subcommand: str | None = None, source: str = "") -> "RunConfig":
        validate(data, subcommand)
        return cls(copy.deepcopy(data), source)

    @classmethod
    def load(cls, path: str | Path, subcommand: str | None = None) -> "RunConfig":
        path = Path(path)
        try:
            data = json.loads(path.read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(data, subcommand, str(path))

    def block(self, name: str, default=None):
        return self.raw.get(name, default)

    @property
    def barrier(self) -> BarrierSpec:
        return BarrierSpec.from_dict(self.raw["barrier"])

    @property
    def units(self) -> UnitSystem:
        u = self.raw.get("units", {})
        return UnitSystem(hbar=float(u.get("hbar", 1.0)), mass=float(u.get("mass", 1.0)))

    @property
    def tolerances(self) -> dict:
        return {**DEFAULT_TOLERANCES, **self.raw.get("tolerances", {})}

    @property
    def energies(self) -> EnergyGrid:
        e = self.raw["energies"]
        if "values" in e:
            return EnergyGrid(tuple(np.unique(np.asarray(e["values"], dtype=float))))
        return EnergyGrid.linspace(float(e["min"]), float(e["max"]), int(e["n"]))

    @property
    def figures(self) -> bool:
        return bool(self.raw.get("output", {}).get("figures", True))

    @property
    def out_dir(self) -> str | None:
        return self.raw.get("output", {}).get("dir")
