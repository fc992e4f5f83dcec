"""Experiment configuration: JSON files merged over the shipped defaults."""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

from .corpus import FAMILIES
from .errors import ConfigError, MoHardyError
from .grid import Grid
from .growth import GrowthFunction, from_descriptor
from .maximal import MaximalParams

__all__ = ["ExperimentConfig", "default_config_dict", "load_config"]


def default_config_dict() -> dict:
    text = resources.files("mohardy").joinpath("data/default_config.json").read_text()
    return json.loads(text)


def _merge(base: dict, over: Mapping, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        where = f"{path}.{k}" if path else k
        if k not in base:
            raise ConfigError(f"unknown field {where!r}")
        if isinstance(base[k], dict) and isinstance(v, Mapping) and k not in ("growth", "corpus"):
            out[k] = _merge(base[k], v, where)
        else:
            out[k] = copy.deepcopy(v)
    return out


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated configuration.  ``raw`` is the merged JSON document."""

    raw: dict

    @classmethod
    def from_dict(cls, data: Mapping[str, Any] | None = None) -> "ExperimentConfig":
        raw = _merge(default_config_dict(), data or {})
        cfg = cls(raw)
        cfg.validate()
        return cfg

    # accessors

    @property
    def seed(self) -> int:
        return int(self.raw["seed"])

    @property
    def grid(self) -> Grid:
        g = self.raw["grid"]
        return Grid.box(float(g["lo"]), float(g["hi"]), int(g["points"]), int(g["dimension"]))

    @property
    def growth(self) -> GrowthFunction:
        return from_descriptor(self.raw["growth"])

    @property
    def families(self) -> list[GrowthFunction]:
        return [from_descriptor(d) for d in self.raw["families"]]

    @property
    def corpus_spec(self) -> dict:
        return copy.deepcopy(self.raw["corpus"])

    @property
    def maximal(self) -> MaximalParams:
        return MaximalParams(**self.raw["maximal"])

    def section(self, name: str) -> dict:
        return copy.deepcopy(self.raw[name])

    @property
    def output(self) -> Path:
        return Path(self.raw["output"])

    def digest(self) -> str:
        blob = json.dumps(self.raw, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()

    # validation

    def validate(self) -> None:
        def fail(field, exc):
            raise ConfigError(f"field {field!r}: {exc}") from exc

        if not isinstance(self.raw["seed"], int) or self.raw["seed"] < 0:
            raise ConfigError("field 'seed': must be a nonnegative integer")
        try:
            self.grid
        except (MoHardyError, TypeError, KeyError, ValueError) as exc:
            fail("grid", exc)
        try:
            self.growth
        except (MoHardyError, TypeError, KeyError, ValueError) as exc:
            fail("growth", exc)
        for i, d in enumerate(self.raw["families"]):
            try:
                from_descriptor(d)
            except (MoHardyError, TypeError, KeyError, ValueError) as exc:
                fail(f"families[{i}]", exc)
        for k in self.raw["corpus"]:
            if k.replace("-", "_") not in FAMILIES:
                raise ConfigError(f"field 'corpus.{k}': unknown corpus family")
        try:
            self.maximal
        except (MoHardyError, TypeError, ValueError) as exc:
            fail("maximal", exc)
        czd = self.raw["czd"]
        if int(czd["levels"]) < 1:
            raise ConfigError("field 'czd.levels': must be positive")
        if self.grid.points_per_axis % int(czd["min_cells"]):
            raise ConfigError("field 'czd.min_cells': must divide grid.points")
        if int(self.raw["whitney"]["sets"]) < 1:
            raise ConfigError("field 'whitney.sets': must be positive")
        j = int(self.raw["operators"]["direction"])
        if not 1 <= j <= self.grid.dimension:
            raise ConfigError("field 'operators.direction': out of range")


def load_config(path: str | Path | None) -> ExperimentConfig:
    """Read a JSON config; parse errors report line and column."""
    if path is None:
        return ExperimentConfig.from_dict({})
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {p}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{p}: top level must be an object")
    return ExperimentConfig.from_dict(data)
