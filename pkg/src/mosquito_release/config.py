"""Scenario configuration: JSON files with strict key checking, dotted
``key=value`` overrides, and resolution into model objects."""

from __future__ import annotations

import copy
import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .control import TimeGrid
from .model import DEFAULT_F_TARGET, SitParams, WolParams, derive_carrying_capacity


class ConfigError(ValueError):
    pass


PARAM_TYPES = {"sit": SitParams, "wolbachia": WolParams}

OPTIMIZER_DEFAULTS = {"max_iter": 500, "tol": 1e-6, "starts": 4, "seed": 0}

TOP_KEYS = {"model", "params", "calibration", "T", "C", "Ubar", "N", "optimizer",
            "control", "initial_state", "output"}
REQUIRED = ("model", "T", "C", "Ubar")


def _param_names(model: str) -> set[str]:
    return {f.name for f in dataclasses.fields(PARAM_TYPES[model])} - {"K"}


@dataclass
class ScenarioConfig:
    model: str
    T: float
    C: float
    Ubar: float
    N: int | None = None
    params: dict = field(default_factory=dict)
    calibration: dict = field(default_factory=lambda: {"F_target": DEFAULT_F_TARGET})
    optimizer: dict = field(default_factory=lambda: dict(OPTIMIZER_DEFAULTS))
    control: dict | None = None
    initial_state: list | None = None
    output: str = "out"

    # -- construction ------------------------------------------------------

    @classmethod
    def from_dict(cls, raw: dict) -> "ScenarioConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        unknown = set(raw) - TOP_KEYS
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        missing = [k for k in REQUIRED if k not in raw]
        if missing:
            raise ConfigError(f"missing required keys: {missing}")
        model = raw["model"]
        if model not in PARAM_TYPES:
            raise ConfigError(f"model must be one of {sorted(PARAM_TYPES)}, got {model!r}")

        params = dict(raw.get("params") or {})
        bad = set(params) - _param_names(model)
        if bad:
            raise ConfigError(f"unknown {model} parameters: {sorted(bad)}")

        calib = dict(raw.get("calibration") or {"F_target": DEFAULT_F_TARGET})
        if set(calib) - {"F_target", "K"} or len(calib) != 1:
            raise ConfigError("calibration must hold exactly one of F_target or K")

        opt = dict(OPTIMIZER_DEFAULTS)
        given = dict(raw.get("optimizer") or {})
        bad = set(given) - set(OPTIMIZER_DEFAULTS)
        if bad:
            raise ConfigError(f"unknown optimizer options: {sorted(bad)}")
        opt.update(given)

        control = raw.get("control")
        if control is not None:
            if not isinstance(control, dict) or len(control) != 1 or \
                    set(control) - {"constant", "schedule", "csv"}:
                raise ConfigError(
                    "control must be one of {constant: v}, {schedule: [[t, v], ...]}, "
                    "{csv: path}")

        try:
            cfg = cls(model=model, T=float(raw["T"]), C=float(raw["C"]),
                      Ubar=float(raw["Ubar"]),
                      N=None if raw.get("N") is None else int(raw["N"]),
                      params=params, calibration=calib, optimizer=opt, control=control,
                      initial_state=raw.get("initial_state"),
                      output=str(raw.get("output", "out")))
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path, overrides=()) -> "ScenarioConfig":
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        return cls.from_dict(apply_overrides(raw, overrides))

    def validate(self) -> None:
        if not (self.T > 0 and math.isfinite(self.T)):
            raise ConfigError(f"T must be a positive number, got {self.T}")
        if self.C < 0 or self.Ubar < 0:
            raise ConfigError("C and Ubar must be nonnegative")
        if self.N is not None and self.N < 1:
            raise ConfigError(f"N must be >= 1, got {self.N}")
        o = self.optimizer
        if int(o["starts"]) < 1 or int(o["max_iter"]) < 0 or not float(o["tol"]) > 0:
            raise ConfigError(f"invalid optimizer options {o}")
        if self.initial_state is not None:
            n = 3 if self.model == "sit" else 4
            if len(self.initial_state) != n:
                raise ConfigError(f"initial_state needs {n} components")
        try:
            self.build_params()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    # -- resolution --------------------------------------------------------

    def build_params(self):
        cls = PARAM_TYPES[self.model]
        if "K" in self.calibration:
            return cls(**self.params, K=float(self.calibration["K"]))
        base = cls(**self.params, K=1.0)
        K = derive_carrying_capacity(float(self.calibration["F_target"]), base)
        return cls(**self.params, K=K)

    @property
    def grid(self) -> TimeGrid:
        return TimeGrid.default(self.T) if self.N is None else TimeGrid(self.T, self.N)

    def resolved(self) -> dict:
        """Full config with defaults filled in; re-parses to the same run."""
        p = self.build_params().as_dict()
        p.pop("K")
        out = {
            "model": self.model,
            "params": p,
            "calibration": dict(self.calibration),
            "T": self.T,
            "C": self.C,
            "Ubar": self.Ubar,
            "N": self.grid.N,
            "optimizer": dict(self.optimizer),
            "output": self.output,
        }
        if self.control is not None:
            out["control"] = copy.deepcopy(self.control)
        if self.initial_state is not None:
            out["initial_state"] = list(self.initial_state)
        return out


def _coerce(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(raw: dict, overrides) -> dict:
    """Apply ``a.b=value`` strings; values are parsed as JSON when possible."""
    out = copy.deepcopy(raw)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override must look like key=value, got {item!r}")
        key, text = item.split("=", 1)
        parts = key.strip().split(".")
        node = out
        for part in parts[:-1]:
            nxt = node.get(part)
            if nxt is None:
                nxt = node[part] = {}
            if not isinstance(nxt, dict):
                raise ConfigError(f"cannot descend into {part!r} in override {item!r}")
            node = nxt
        node[parts[-1]] = _coerce(text)
    return out
