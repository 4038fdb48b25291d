"""Flat ``key=value`` experiment configs and the named experiment presets.

Keys are ``section.field`` with sections ``timeline``, ``protocol``, ``hco``,
``honest``, ``adversary``, ``election`` and ``run``. A bare field name is
accepted when it is unique across sections, and a few short aliases
(``lambda``, ``theta``, ``tau_h``) map onto protocol fields. Lines starting
with ``#`` are comments.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

from .adversary import AdversaryConfig
from .hco import HcoParams
from .simulator import ElectionConfig, ExperimentConfig, HonestConfig
from .state import ProtocolParams
from .timeline import Timeline


class ConfigError(ValueError):
    pass


SECTIONS = {
    "timeline": Timeline,
    "protocol": ProtocolParams,
    "hco": HcoParams,
    "honest": HonestConfig,
    "adversary": AdversaryConfig,
    "election": ElectionConfig,
}
RUN_FIELDS = ("seed", "bft", "rho", "freeze_epoch_state", "retain_scores")
ALIASES = {
    "lambda": "protocol.decay_rate",
    "theta": "protocol.leader_scale",
    "tau_h": "protocol.human_solve_cap",
}


def _all_keys() -> dict[str, object]:
    """Full key -> default value, in serialization order."""
    out: dict[str, object] = {}
    for section, cls in SECTIONS.items():
        for f in dataclasses.fields(cls):
            out[f"{section}.{f.name}"] = getattr(cls(), f.name)
    base = ExperimentConfig()
    for name in RUN_FIELDS:
        out[f"run.{name}"] = getattr(base, name)
    return out


DEFAULTS = _all_keys()


def _bare_names() -> dict[str, str]:
    seen: dict[str, list[str]] = {}
    for key in DEFAULTS:
        seen.setdefault(key.split(".", 1)[1], []).append(key)
    names = {bare: keys[0] for bare, keys in seen.items() if len(keys) == 1}
    names.update(ALIASES)
    for alias, target in ALIASES.items():
        names[f"{target.split('.')[0]}.{alias}"] = target
    return names


BARE = _bare_names()


def canonical_key(key: str) -> str:
    key = key.strip()
    if key in DEFAULTS:
        return key
    if key in BARE:
        return BARE[key]
    raise ConfigError(f"{key}: unknown config key")


def _parse_value(key: str, text: str) -> object:
    default = DEFAULTS[key]
    text = text.strip()
    try:
        if isinstance(default, bool):
            low = text.lower()
            if low in ("true", "1", "yes"):
                return True
            if low in ("false", "0", "no"):
                return False
            raise ValueError(f"not a boolean: {text!r}")
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
        if isinstance(default, tuple):
            return tuple(int(x) for x in text.split(",") if x.strip())
        return text
    except ValueError as exc:
        raise ConfigError(f"{key}: {exc}") from None


def _format_value(value: object) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return "inf" if math.isinf(value) else repr(value)
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    return str(value)


def parse_lines(lines: Iterable[str], source: str = "<config>") -> dict[str, str]:
    """``key=value`` lines -> {canonical key: raw value}; later lines win."""
    out: dict[str, str] = {}
    for n, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"{source}:{n}: expected key=value, got {raw.strip()!r}")
        try:
            out[canonical_key(key)] = value.strip()
        except ConfigError as exc:
            raise ConfigError(f"{source}:{n}: {exc}") from None
    return out


def build_config(settings: Mapping[str, str]) -> ExperimentConfig:
    """Defaults overlaid with ``settings`` (canonical keys, raw string values)."""
    values: dict[str, dict[str, object]] = {s: {} for s in (*SECTIONS, "run")}
    for key, raw in settings.items():
        key = canonical_key(key)
        section, name = key.split(".", 1)
        values[section][name] = _parse_value(key, raw)
    parts = {}
    for section, cls in SECTIONS.items():
        try:
            parts[section] = cls(**values[section])
        except (TypeError, ValueError) as exc:
            keys = ", ".join(f"{section}.{k}" for k in values[section]) or section
            raise ConfigError(f"{keys}: {exc}") from None
    try:
        return ExperimentConfig(**parts, **values["run"])
    except (TypeError, ValueError) as exc:
        keys = ", ".join(f"run.{k}" for k in values["run"]) or "run"
        raise ConfigError(f"{keys}: {exc}") from None


def serialize(config: ExperimentConfig) -> str:
    lines = []
    for key in DEFAULTS:
        lines.append(f"{key}={_format_value(get_value(config, key))}")
    return "\n".join(lines) + "\n"


def get_value(config: ExperimentConfig, key: str) -> object:
    section, name = canonical_key(key).split(".", 1)
    return getattr(config if section == "run" else getattr(config, section), name)


def parse_overrides(items: Iterable[str]) -> dict[str, str]:
    return parse_lines(items, source="--set")


# -- presets ---------------------------------------------------------------

@dataclass(frozen=True)
class Preset:
    """A named experiment: settings over the defaults, an optional swept
    key with its values, and the number of seeds per sweep point."""

    name: str
    settings: tuple[tuple[str, str], ...] = ()
    sweep_key: str | None = None
    sweep_values: tuple[str, ...] = ()
    seeds: int = 10
    label: str = ""

    def points(self) -> list[dict[str, str]]:
        base = {canonical_key(k): v for k, v in self.settings}
        if self.sweep_key is None:
            return [base]
        key = canonical_key(self.sweep_key)
        return [{**base, key: v} for v in self.sweep_values]


PRESETS = {p.name: p for p in (
    Preset("drift", (("adversary_humans", "10"),), seeds=10),
    Preset("capacity-sweep", (), "adversary_humans",
           tuple(str(m) for m in range(0, 51, 5)), seeds=20, label="m"),
    Preset("fairness", (("adversary_humans", "10"), ("retain_scores", "true")), seeds=20),
    Preset("decay-ablation", (("online_policy", "rotate:0.5"), ("adversary_humans", "10")),
           "decay_rate", ("0.01", "0.05", "0.2"), seeds=10, label="lambda"),
    Preset("common-prefix", (("private_fork", "true"), ("adversary_humans", "0")), seeds=200),
    Preset("bft-safety", (("bft", "true"), ("equivocate", "true"), ("sybil_count", "20"),
                          ("adversary_humans", "5"), ("horizon_epochs", "1000")), seeds=50),
)}


def load_config(source: str, overrides: Iterable[str] | Mapping[str, str] = ()
                ) -> list[ExperimentConfig]:
    """Configs for a preset name or a config file path, overrides applied last.

    A preset gives one config per sweep value; a file gives one config.
    """
    if isinstance(overrides, Mapping):
        extra = {canonical_key(k): str(v) for k, v in overrides.items()}
    else:
        extra = parse_overrides(overrides)
    if source in PRESETS:
        points = PRESETS[source].points()
    else:
        path = Path(source)
        if not path.is_file():
            raise ConfigError(f"{source}: not a preset name ({', '.join(PRESETS)}) or a file")
        points = [parse_lines(path.read_text().splitlines(), source=str(path))]
    configs: list[ExperimentConfig] = []
    for point in points:
        cfg = build_config({**point, **extra})
        if cfg not in configs:
            configs.append(cfg)
    return configs


def point_label(preset: Preset | None, config: ExperimentConfig) -> str:
    """Short file-name tag for a sweep point, e.g. ``m10`` or ``lambda0.05``."""
    if preset is None or preset.sweep_key is None:
        return "base"
    return f"{preset.label}{_format_value(get_value(config, preset.sweep_key))}"
