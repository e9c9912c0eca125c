"""INI-style run and grid configuration.

A run config names one model; a grid config lists values per hyperparameter
and expands to their Cartesian product. Unknown sections or keys are errors.

Example run config::

    [model]
    architecture = frame
    alpha = 1.0

    [optimizer]
    learning_rate = 0.0001

    [early_stop]
    patience = 10
"""
from __future__ import annotations

import configparser
import itertools
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Union

from .models import (BATCH_SIZE_GRID, BATCHNORM_GRID, DROPOUT_GRID, FILTERS_GRID, L2_GRID,
                     FrameModelConfig, LowCapacityCNNConfig)
from .nn import EarlyStopConfig, OptimizerConfig


class ConfigError(ValueError):
    pass


ModelConfig = Union[LowCapacityCNNConfig, FrameModelConfig]


@dataclass(frozen=True)
class RunConfig:
    architecture: str = "frame"
    model: ModelConfig = field(default_factory=FrameModelConfig)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    early_stop: EarlyStopConfig = field(default_factory=EarlyStopConfig)
    scale_min: float = 1.0
    scale_max: float = 10.0


_BOOLS = {"true": True, "yes": True, "on": True, "1": True,
          "false": False, "no": False, "off": False, "0": False}


def _field_type(f):
    t = f.type if isinstance(f.type, str) else getattr(f.type, "__name__", str(f.type))
    return t.replace("Optional[", "").rstrip("]")


def _convert(raw: str, typ: str, where: str):
    raw = raw.strip()
    try:
        if typ == "bool":
            return _BOOLS[raw.lower()]
        if typ == "int":
            return int(raw)
        if typ == "float":
            return None if raw.lower() in ("", "none") else float(raw)
        return raw
    except (KeyError, ValueError):
        raise ConfigError(f"{where}: cannot parse {raw!r} as {typ}") from None


def _build(cls, section, where, list_values=False):
    known = {f.name: _field_type(f) for f in fields(cls)}
    out = {}
    for key, raw in section.items():
        if key not in known:
            raise ConfigError(f"{where}: unknown key {key!r}")
        if list_values:
            out[key] = [_convert(v, known[key], f"{where}.{key}") for v in raw.split(",")]
        else:
            out[key] = _convert(raw, known[key], f"{where}.{key}")
    return out


def _read(path) -> configparser.ConfigParser:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        with open(path, encoding="utf-8") as fh:
            cp.read_file(fh)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return cp


def _common(cp, path, allowed):
    extra = set(cp.sections()) - allowed
    if extra:
        raise ConfigError(f"{path}: unknown section(s) {', '.join(sorted(extra))}")
    try:
        opt = OptimizerConfig(**_build(OptimizerConfig, cp["optimizer"], "optimizer")) \
            if cp.has_section("optimizer") else OptimizerConfig()
        stop = EarlyStopConfig(**_build(EarlyStopConfig, cp["early_stop"], "early_stop")) \
            if cp.has_section("early_stop") else EarlyStopConfig()
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from None
    scale = dict(cp["scale"]) if cp.has_section("scale") else {}
    unknown = set(scale) - {"min", "max"}
    if unknown:
        raise ConfigError(f"{path}: scale: unknown key(s) {', '.join(sorted(unknown))}")
    lo = _convert(scale.get("min", "1"), "float", "scale.min")
    hi = _convert(scale.get("max", "10"), "float", "scale.max")
    if not lo < hi:
        raise ConfigError(f"{path}: scale.min must be below scale.max")
    return opt, stop, lo, hi


def load_run_config(path) -> RunConfig:
    cp = _read(path)
    opt, stop, lo, hi = _common(cp, path, {"model", "optimizer", "early_stop", "scale"})
    model = dict(cp["model"]) if cp.has_section("model") else {}
    arch = model.pop("architecture", "frame").strip()
    classes = {"frame": FrameModelConfig, "low_capacity": LowCapacityCNNConfig}
    if arch not in classes:
        raise ConfigError(f"{path}: model.architecture must be frame or low_capacity, not {arch!r}")
    cls = classes[arch]
    try:
        cfg = cls(**_build(cls, model, "model"))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return RunConfig(arch, cfg, opt, stop, lo, hi)


@dataclass(frozen=True)
class GridConfig:
    configs: list
    optimizer: OptimizerConfig
    early_stop: EarlyStopConfig
    scale_min: float = 1.0
    scale_max: float = 10.0


GRID_DEFAULTS = {
    "input_batchnorm": list(BATCHNORM_GRID),
    "l2": list(L2_GRID),
    "dropout_rate": list(DROPOUT_GRID),
    "filters": list(FILTERS_GRID),
    "batch_size": list(BATCH_SIZE_GRID),
}


def load_grid_config(path) -> GridConfig:
    """``[grid]`` holds comma-separated value lists; unlisted keys use the published ranges.

    ``[model]`` may fix any other low-capacity hyperparameter (seed, normalize,
    learning_rate, ...) for every grid point.
    """
    cp = _read(path)
    opt, stop, lo, hi = _common(cp, path, {"grid", "model", "optimizer", "early_stop", "scale"})
    base = _build(LowCapacityCNNConfig, cp["model"], "model") if cp.has_section("model") else {}
    axes = dict(GRID_DEFAULTS)
    if cp.has_section("grid"):
        axes.update(_build(LowCapacityCNNConfig, cp["grid"], "grid", list_values=True))
    for key in list(axes):
        if key in base and key in GRID_DEFAULTS and not (cp.has_section("grid") and key in cp["grid"]):
            del axes[key]
    names = list(axes)
    configs = []
    try:
        template = LowCapacityCNNConfig(**base)
        for combo in itertools.product(*(axes[n] for n in names)):
            configs.append(replace(template, **dict(zip(names, combo))))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return GridConfig(configs, opt, stop, lo, hi)


def write_default_grid(path) -> None:
    lines = ["[grid]"]
    for k, v in GRID_DEFAULTS.items():
        lines.append(f"{k} = {', '.join(str(x).lower() if isinstance(x, bool) else str(x) for x in v)}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
