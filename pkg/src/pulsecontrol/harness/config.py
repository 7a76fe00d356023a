"""Experiment configuration: a flat dotted-key text format.

Grammar (a subset of TOML): one ``key = value`` per line, where ``key`` is
either a top-level name (``kind``, ``seed``, ``trajectories``, ``out``) or
``section.name``.  Values are numbers, double-quoted strings, ``true`` /
``false``, or bracketed lists of these.  ``#`` starts a comment.  Omitted keys
take their defaults; unknown keys are errors.  Example::

    kind = "scaling_sweep"
    seed = 1
    noise.sigma = 0.02
    sweep.ratios = [0.02, 0.04, 0.08]

``sequence.pulses`` is ``"level1"``, ``"level2"``, ``"free"`` or an explicit
axis list such as ``"I,Y,I,Y"``.
"""

from __future__ import annotations

import json
import math
import sys
import typing
from dataclasses import MISSING, dataclass, field, fields, replace
from typing import Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

KINDS = ("memory", "gate", "scaling_sweep", "tradeoff", "sequence_info")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class NoiseConfig:
    kind: str = "ou"
    sigma: float = 0.02
    t_c: float = 1.0
    axes: str = "z"
    n_qubits: int = 1
    mixing: Optional[tuple] = None


@dataclass(frozen=True)
class SequenceConfig:
    pulses: str = "level1"
    t_delta: float = 0.05
    pulse_error_p0: float = 0.0
    error_model: str = "random_pauli_kick"


@dataclass(frozen=True)
class GridConfig:
    steps_per_period: int = 8
    dt: Optional[float] = None
    t_total: Optional[float] = None
    control_periods: Optional[int] = None


@dataclass(frozen=True)
class InputConfig:
    state: str = "+"


@dataclass(frozen=True)
class GateConfig:
    g: float = math.pi / 8
    t_g: float = 1.0


@dataclass(frozen=True)
class BudgetConfig:
    p0: float = 0.0
    n: int = 1
    p_g: Optional[float] = None
    t_c: Optional[float] = None
    t_dec: Optional[float] = None


@dataclass(frozen=True)
class SweepConfig:
    ratios: tuple = (0.02, 0.028, 0.04, 0.057, 0.08, 0.11, 0.16, 0.2)
    control_periods: int = 40
    families: tuple = ("level1",)
    bootstrap: int = 500
    t_delta: Optional[tuple] = None


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str = "memory"
    seed: int = 0
    trajectories: int = 20_000
    out: str = "results"
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    sequence: SequenceConfig = field(default_factory=SequenceConfig)
    grid: GridConfig = field(default_factory=GridConfig)
    input: InputConfig = field(default_factory=InputConfig)
    gate: GateConfig = field(default_factory=GateConfig)
    budget: BudgetConfig = field(default_factory=BudgetConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)

    def set(self, key: str, value) -> "ExperimentConfig":
        """Copy with one dotted key replaced (value coerced to the field type)."""
        return _apply(self, {key: value})


SECTIONS = {f.name: f.default_factory for f in fields(ExperimentConfig) if f.default_factory is not MISSING}


def _base(tp):
    """Strip ``Optional[...]``."""
    args = [a for a in typing.get_args(tp) if a is not type(None)]
    return args[0] if typing.get_origin(tp) is typing.Union else tp


def _coerce(key: str, tp, value):
    tp = _base(tp)
    try:
        if tp is float:
            if isinstance(value, bool):
                raise TypeError
            return float(value)
        if tp is int:
            if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
                raise TypeError
            return int(value)
        if tp is str:
            if not isinstance(value, str):
                raise TypeError
            return value
        if tp is tuple:
            if isinstance(value, str):
                value = [value]
            if not isinstance(value, (list, tuple)):
                raise TypeError
            return tuple(tuple(float(v) for v in row) if isinstance(row, (list, tuple))
                         else (row if isinstance(row, str) else float(row)) for row in value)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: bad value {value!r}") from None
    raise ConfigError(f"{key}: unsupported type")


def _hints(cls):
    return typing.get_type_hints(cls)


def _apply(config: ExperimentConfig, flat: dict) -> ExperimentConfig:
    top, nested = {}, {}
    top_hints = _hints(ExperimentConfig)
    for key, value in flat.items():
        if "." in key:
            section, name = key.split(".", 1)
            if section not in SECTIONS:
                raise ConfigError(f"unknown section {section!r}")
            hints = _hints(type(getattr(config, section)))
            if name not in hints:
                raise ConfigError(f"unknown key {key!r}")
            nested.setdefault(section, {})[name] = _coerce(key, hints[name], value)
        else:
            if key not in top_hints or key in SECTIONS:
                raise ConfigError(f"unknown key {key!r}")
            top[key] = _coerce(key, top_hints[key], value)
    for section, values in nested.items():
        top[section] = replace(getattr(config, section), **values)
    return replace(config, **top)


def _flatten(d: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        else:
            out[key] = v
    return out


def parse(text: str) -> ExperimentConfig:
    """Parse configuration text; raises :class:`ConfigError` on any problem."""
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"syntax error: {exc}") from None
    flat = _flatten(data)
    if any(k.count(".") > 1 for k in flat):
        raise ConfigError("keys nest at most one level")
    return validate(_apply(ExperimentConfig(), flat))


def load(path) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            return parse(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None


def _render_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    return "[" + ", ".join(_render_value(x) for x in v) + "]"


def render(config: ExperimentConfig) -> str:
    """Render every set field as ``key = value``; ``parse(render(c)) == c``."""
    lines = []
    for f in fields(config):
        v = getattr(config, f.name)
        if f.name in SECTIONS:
            for g in fields(v):
                w = getattr(v, g.name)
                if w is not None:
                    lines.append(f"{f.name}.{g.name} = {_render_value(w)}")
        elif v is not None:
            lines.append(f"{f.name} = {_render_value(v)}")
    return "\n".join(lines) + "\n"


def validate(config: ExperimentConfig) -> ExperimentConfig:
    """Check the cross-field constraints and that the noise, sequence and gate settings build."""
    from ..gates import GateError, exchange_hamiltonian
    from ..noise import NoiseError
    from ..sequences import SequenceError, named_sequence
    from . import experiments

    if config.kind not in KINDS:
        raise ConfigError(f"kind must be one of {', '.join(KINDS)}")
    if not 0 <= config.seed < 2**64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    if config.trajectories < 2:
        raise ConfigError("trajectories must be at least 2")
    if config.sweep.bootstrap < 1 or config.sweep.control_periods < 1:
        raise ConfigError("sweep.bootstrap and sweep.control_periods must be positive")
    if config.grid.steps_per_period < 1:
        raise ConfigError("grid.steps_per_period must be positive")
    try:
        experiments.noise_process(config)
        named_sequence(config.sequence.pulses, config.sequence.t_delta, config.sequence.pulse_error_p0,
                       config.sequence.error_model)
        for fam in config.sweep.families:
            named_sequence(fam)
        if config.kind in ("gate", "tradeoff"):
            exchange_hamiltonian(config.gate.g, config.noise.n_qubits)
            if not config.gate.t_g > 0:
                raise ConfigError("gate.t_g must be positive")
        if config.kind == "tradeoff":
            experiments.budget(config, p_g=0.5)
    except (NoiseError, SequenceError, GateError) as exc:
        raise ConfigError(str(exc)) from None
    if config.kind == "scaling_sweep" and len(config.sweep.ratios) < 5:
        raise ConfigError("a scaling sweep needs at least 5 ratios")
    if any(not r > 0 for r in config.sweep.ratios):
        raise ConfigError("sweep.ratios must be positive")
    return config


PRESETS = {
    "memory": {},
    "gate": {"noise.n_qubits": 2, "noise.sigma": 0.1, "sequence.t_delta": 0.0625, "trajectories": 4000},
    "scaling_sweep": {},
    "tradeoff": {"noise.n_qubits": 2, "noise.sigma": 0.1, "budget.p0": 4.3e-7,
                 "sequence.error_model": "rotation_angle_jitter", "grid.steps_per_period": 4,
                 "trajectories": 4000},
    "sequence_info": {},
}


def default_config(kind: str) -> ExperimentConfig:
    """Defaults for one experiment kind (desk-scale parameters)."""
    if kind not in KINDS:
        raise ConfigError(f"unknown kind {kind!r}")
    return validate(_apply(ExperimentConfig(kind=kind), PRESETS[kind]))
