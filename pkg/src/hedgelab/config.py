"""Experiment configuration: a flat ``section.key = value`` text format.

Sections map onto the config dataclasses::

    run.*        mode, seed, eval_episodes, out
    market.*     MarketConfig (asset 1 in portfolio runs)
    market2.*    MarketConfig for asset 2
    flow.*       FlowConfig (asset 1 in portfolio runs)
    flow2.*      FlowConfig for asset 2
    env.*        EnvConfig scalars
    portfolio.*  PortfolioConfig scalars
    sac.*        SacHyper

Lines starting with ``#`` and blank lines are ignored. Unknown keys are
errors. Environment variables ``HEDGELAB_<SECTION>__<KEY>`` (for example
``HEDGELAB_MARKET__SIGMA=0.03``) override the file; explicit overrides passed
to :func:`load_config` win over both.
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping

from .env import EnvConfig
from .errors import ConfigError
from .flow import FlowConfig
from .market import MarketConfig
from .portfolio import PortfolioConfig
from .sac.agent import SacHyper

RUN_MODES = ("single", "skew", "price_of_risk", "portfolio", "dummy", "random")
ENV_PREFIX = "HEDGELAB_"

# Fields owned by another section or forced by the environment config.
_SKIP = {
    "env": {"mode", "market", "flow"},
    "portfolio": {"market1", "market2", "flow1", "flow2"},
    "flow": {"max_hedge_size"},
    "flow2": {"max_hedge_size"},
}


@dataclass(frozen=True)
class RunSettings:
    mode: str = "single"
    seed: int = 0
    eval_episodes: int = 50
    out: str = "runs"

    def __post_init__(self):
        if self.mode not in RUN_MODES:
            raise ConfigError(f"unknown mode {self.mode!r}; expected one of {RUN_MODES}")
        if self.eval_episodes < 0:
            raise ConfigError("eval_episodes must be non-negative")


@dataclass(frozen=True)
class ExperimentConfig:
    run: RunSettings = field(default_factory=RunSettings)
    market: MarketConfig = field(default_factory=MarketConfig)
    market2: MarketConfig = field(default_factory=MarketConfig)
    flow: FlowConfig = field(default_factory=FlowConfig)
    flow2: FlowConfig = field(default_factory=FlowConfig)
    env: EnvConfig = field(default_factory=EnvConfig)
    portfolio: PortfolioConfig = field(default_factory=PortfolioConfig)
    # Desk rewards run to thousands per episode; stored rewards are scaled down.
    sac: SacHyper = field(default_factory=lambda: SacHyper(reward_scale=0.01))

    @property
    def mode(self) -> str:
        return self.run.mode

    @property
    def env_mode(self) -> str:
        """Environment family behind the run mode."""
        return "single" if self.mode in ("dummy", "random") else self.mode

    def env_config(self) -> EnvConfig:
        return replace(self.env, mode=self.env_mode, market=self.market, flow=self.flow)

    def portfolio_config(self) -> PortfolioConfig:
        return replace(self.portfolio, market1=self.market, market2=self.market2,
                       flow1=self.flow, flow2=self.flow2)

    def to_flat(self) -> dict[str, str]:
        out = {}
        for section in _section_names():
            obj = getattr(self, section)
            for f in _fields(section, obj):
                out[f"{section}.{f.name}"] = _format(getattr(obj, f.name))
        return out

    def dumps(self) -> str:
        return "".join(f"{k} = {v}\n" for k, v in self.to_flat().items())

    @classmethod
    def from_flat(cls, flat: Mapping[str, str]) -> "ExperimentConfig":
        grouped: dict[str, dict[str, str]] = {s: {} for s in _section_names()}
        for key, value in flat.items():
            section, _, name = key.partition(".")
            if section not in grouped or not name:
                raise ConfigError(f"unknown config key {key!r}")
            grouped[section][name] = value
        base = cls()
        parts = {}
        for section, values in grouped.items():
            obj = getattr(base, section)
            known = {f.name: f for f in _fields(section, obj)}
            kwargs = {}
            for name, raw in values.items():
                if name not in known:
                    raise ConfigError(f"unknown config key {section}.{name}")
                kwargs[name] = _parse(raw, known[name].type, f"{section}.{name}")
            try:
                parts[section] = replace(obj, **kwargs)
            except (TypeError, ValueError) as err:
                raise ConfigError(f"[{section}] {err}") from err
        return cls(**parts)


def _section_names() -> list[str]:
    return [f.name for f in dataclasses.fields(ExperimentConfig)]


def _fields(section: str, obj) -> list[dataclasses.Field]:
    skip = _SKIP.get(section, set())
    return [f for f in dataclasses.fields(obj) if f.name not in skip]


def _format(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse(raw: str, annotation: str, key: str):
    text = raw.strip()
    kind = str(annotation)
    if "None" in kind and text.lower() == "none":
        return None
    try:
        if kind.startswith("tuple"):
            return tuple(int(x) for x in text.split(",") if x.strip())
        if kind.startswith("bool"):
            if text.lower() not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(text)
            return text.lower() in ("true", "1", "yes")
        if kind.startswith("int"):
            return int(text)
        if kind.startswith("float"):
            return float(text)
        return text
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r} as {kind}") from None


def parse_lines(text: str, origin: str = "<config>") -> dict[str, str]:
    flat = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"{origin}:{lineno}: expected key = value")
        flat[key.strip()] = value.strip()
    return flat


def env_overrides(environ: Mapping[str, str] | None = None) -> dict[str, str]:
    environ = os.environ if environ is None else environ
    out = {}
    for name, value in environ.items():
        if not name.startswith(ENV_PREFIX):
            continue
        section, sep, key = name[len(ENV_PREFIX):].partition("__")
        if not sep:
            raise ConfigError(f"environment override {name} lacks a SECTION__KEY part")
        out[f"{section.lower()}.{key.lower()}"] = value
    return out


def load_config(path: str | Path | None = None, overrides: Mapping[str, str] | None = None,
                environ: Mapping[str, str] | None = None) -> ExperimentConfig:
    """Defaults, then the file, then environment variables, then ``overrides``."""
    flat: dict[str, str] = {}
    if path is not None:
        flat.update(parse_lines(Path(path).read_text(), str(path)))
    flat.update(env_overrides(environ))
    flat.update(overrides or {})
    return ExperimentConfig.from_flat(flat)


def parse_assignments(items) -> dict[str, str]:
    """``["a.b=1", ...]`` to a dict."""
    out = {}
    for item in items or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"override {item!r} is not key=value")
        out[key.strip()] = value.strip()
    return out
