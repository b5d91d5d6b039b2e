"""Scenario and analysis-design configuration files.

INI-style grammar read with :mod:`configparser`::

    # comment
    [defaults]                 ; optional, applies to every scenario section
    reps = 100000

    [scenario.<id>]            ; one simulation scenario
    k = 2
    deltas = 0, 0.5

    [analysis.<id>]            ; design used to analyse a real dataset
    k = 2
    plan.1 = 20, 20, 20        ; auxiliary block counts of arm 1
    plan.2 = 20, 20, 20

Keys are case-insensitive, lists are comma separated, unknown keys are errors.
See the README for every key and its default.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass
from pathlib import Path

from .core import AuxiliaryArmPlan
from .engine import METHOD_NAMES, Scenario


class ConfigError(ValueError):
    """Invalid configuration; message names the offending line or field."""


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in _items(text))


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in _items(text))


def _items(text: str) -> list[str]:
    items = [x.strip() for x in text.split(",")]
    if any(not x for x in items):
        raise ValueError("empty list entry")
    return items


def _bool(text: str) -> bool:
    value = text.strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _seed(text: str) -> int:
    return int(text, 0)


SCENARIO_KEYS = {
    "k": ("K", int),
    "deltas": ("deltas", _floats),
    "scheme": ("scheme", str.strip),
    "exp_block_size": ("exp_block_size", int),
    "ctrl_block_sizes": ("ctrl_block_sizes", _ints),
    "runin_per_arm": ("runin_per_arm", int),
    "mu0": ("mu0", float),
    "sigma": ("sigma", float),
    "alpha": ("alpha", float),
    "gamma": ("gamma", float),
    "prior_mean": ("prior_mean", float),
    "prior_var": ("prior_var", float),
    "threshold": ("threshold", float),
    "crossing_mode": ("crossing_mode", str.strip),
    "inflator_statistic": ("inflator_statistic", str.strip),
    "methods": ("methods", lambda t: tuple(_items(t))),
    "two_sided": ("two_sided", _bool),
    "reps": ("reps", int),
    "seed": ("seed", _seed),
}
# handled separately: "blocks" (consistency check), "spending" (list or "bonferroni")
REQUIRED = ("k", "deltas")


@dataclass(frozen=True)
class AnalysisDesign:
    """Design information needed to analyse one observed trial."""

    name: str
    K: int
    plans: tuple[AuxiliaryArmPlan, ...]
    ctrl_block_sizes: tuple[int, ...]
    runin_per_arm: int = 5
    sigma: float = 1.0
    alpha: float = 0.05
    two_sided: bool = False

    @property
    def b(self) -> int:
        return len(self.ctrl_block_sizes)


def _read(text: str, source: str) -> configparser.ConfigParser:
    parser = configparser.ConfigParser(
        default_section="\0none", interpolation=None, strict=True,
        inline_comment_prefixes=(";", "#"),
    )
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        line = getattr(exc, "lineno", None)
        if line is None and getattr(exc, "errors", None):
            line = exc.errors[0][0]
        where = f"{source}, line {line}" if line is not None else source
        raise ConfigError(f"{where}: {exc.message.splitlines()[0]}") from None
    return parser


def _convert(section: str, key: str, raw: str, fn):
    try:
        return fn(raw)
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key}: cannot parse {raw!r} ({exc})") from None


def _scenario(section: str, values: dict[str, str]) -> Scenario:
    for key in REQUIRED:
        if key not in values:
            raise ConfigError(f"[{section}] missing required key {key!r}")
    unknown = set(values) - set(SCENARIO_KEYS) - {"blocks", "spending"}
    if unknown:
        raise ConfigError(f"[{section}] unknown key(s): {', '.join(sorted(unknown))}")
    kwargs = {"name": section.split(".", 1)[1]}
    for key, raw in values.items():
        if key in SCENARIO_KEYS:
            field_name, fn = SCENARIO_KEYS[key]
            kwargs[field_name] = _convert(section, key, raw, fn)
    b = len(kwargs.get("ctrl_block_sizes", Scenario.__dataclass_fields__["ctrl_block_sizes"].default))
    if "blocks" in values and _convert(section, "blocks", values["blocks"], int) != b:
        raise ConfigError(f"[{section}] blocks: does not match the length of ctrl_block_sizes ({b})")
    if "spending" in values:
        raw = values["spending"].strip()
        if raw.lower() == "bonferroni":
            alpha = kwargs.get("alpha", 0.05)
            kwargs["spending"] = (alpha / b,) * b
        else:
            kwargs["spending"] = _convert(section, "spending", raw, _floats)
    try:
        return Scenario(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"[{section}] {exc}") from None


def _analysis(section: str, values: dict[str, str]) -> AnalysisDesign:
    allowed = {"k", "runin_per_arm", "ctrl_block_sizes", "sigma", "alpha", "two_sided"}
    if "k" not in values:
        raise ConfigError(f"[{section}] missing required key 'k'")
    K = _convert(section, "k", values["k"], int)
    if K < 1:
        raise ConfigError(f"[{section}] k: must be >= 1")
    plan_keys = {f"plan.{j}" for j in range(1, K + 1)}
    unknown = set(values) - allowed - plan_keys
    if unknown:
        raise ConfigError(f"[{section}] unknown key(s): {', '.join(sorted(unknown))}")
    missing = sorted(plan_keys - set(values))
    if missing:
        raise ConfigError(f"[{section}] missing required key(s): {', '.join(missing)}")
    runin = _convert(section, "runin_per_arm", values.get("runin_per_arm", "5"), int)
    try:
        plans = tuple(
            AuxiliaryArmPlan(runin, _convert(section, f"plan.{j}", values[f"plan.{j}"], _ints))
            for j in range(1, K + 1)
        )
    except ValueError as exc:
        raise ConfigError(f"[{section}] plan: {exc}") from None
    ctrl = _convert(section, "ctrl_block_sizes", values.get("ctrl_block_sizes", "20, 20, 20"), _ints)
    if any(p.b != len(ctrl) for p in plans):
        raise ConfigError(f"[{section}] plan: every arm needs {len(ctrl)} block counts")
    design = AnalysisDesign(
        section.split(".", 1)[1], K, plans, ctrl, runin,
        _convert(section, "sigma", values.get("sigma", "1"), float),
        _convert(section, "alpha", values.get("alpha", "0.05"), float),
        _convert(section, "two_sided", values.get("two_sided", "false"), _bool),
    )
    if design.sigma <= 0:
        raise ConfigError(f"[{section}] sigma: must be positive")
    if not 0 < design.alpha < 1:
        raise ConfigError(f"[{section}] alpha: must be in (0, 1)")
    return design


def _sections(text: str, source: str):
    parser = _read(text, source)
    defaults: dict[str, str] = {}
    scenarios, analyses = [], []
    for name in parser.sections():
        values = dict(parser.items(name))
        if name == "defaults":
            defaults = values
        elif name.startswith("scenario.") and len(name) > len("scenario."):
            scenarios.append((name, values))
        elif name.startswith("analysis.") and len(name) > len("analysis."):
            analyses.append((name, values))
        else:
            raise ConfigError(f"{source}: unknown section [{name}]")
    return defaults, scenarios, analyses


def parse_config_text(text: str, source: str = "<config>") -> list[Scenario]:
    defaults, scenarios, _ = _sections(text, source)
    unknown = set(defaults) - set(SCENARIO_KEYS) - {"blocks", "spending"}
    if unknown:
        raise ConfigError(f"[defaults] unknown key(s): {', '.join(sorted(unknown))}")
    return [_scenario(name, {**defaults, **values}) for name, values in scenarios]


def parse_config(path) -> list[Scenario]:
    path = Path(path)
    return parse_config_text(path.read_text(), str(path))


def parse_analysis_text(text: str, source: str = "<config>") -> list[AnalysisDesign]:
    _, _, analyses = _sections(text, source)
    return [_analysis(name, values) for name, values in analyses]


def parse_analysis_config(path) -> list[AnalysisDesign]:
    path = Path(path)
    return parse_analysis_text(path.read_text(), str(path))


__all__ = [
    "AnalysisDesign",
    "ConfigError",
    "METHOD_NAMES",
    "parse_analysis_config",
    "parse_analysis_text",
    "parse_config",
    "parse_config_text",
]
