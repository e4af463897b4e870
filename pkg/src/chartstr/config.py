"""YAML configuration for the command-line tool.

Every key is optional; unknown keys are rejected.  Example::

    output_root: sim_out          # simulate: --out wins over this
    max_retries: 3                # script attempts per seed (and label attempts)
    concurrency: 4                # simulation jobs in flight
    require_plot_call: false      # reject scripts without a plotting call
    llm:
      provider: http              # http | mock
      endpoint: https://api.example.com/v1/chat/completions
      model: gpt-4
      temperature: null           # omitted from requests when null
      timeout: 120
      api_key_env: CHARTSTR_API_KEY
    sandbox:
      interpreter: [python3]
      timeout: 30
      image_extensions: [png, jpg, svg, pdf]
      block_network: true
    eval:
      tolerances: [strict, slight, high]
      mode: matched               # matched | paper-literal
      thresholds: [0.5, 0.75, 0.95, 1.0]
      strategy: joined            # joined | per-entity
      workers: 1

``CHARTSTR_LLM_ENDPOINT`` and ``CHARTSTR_LLM_MODEL`` override the endpoint
and model.  The API key is read only from the environment variable named by
``api_key_env``.
"""

from __future__ import annotations

import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import yaml

from .scrm import TOLERANCES

__all__ = ["ConfigError", "CliConfig", "LlmSettings", "SandboxSettings", "EvalSettings", "load_config"]


class ConfigError(ValueError):
    pass


@dataclass
class LlmSettings:
    provider: str = "http"
    endpoint: Optional[str] = None
    model: Optional[str] = None
    temperature: Optional[float] = None
    timeout: float = 120.0
    api_key_env: str = "CHARTSTR_API_KEY"


@dataclass
class SandboxSettings:
    interpreter: list[str] = field(default_factory=lambda: [sys.executable])
    timeout: float = 30.0
    image_extensions: list[str] = field(default_factory=lambda: ["png", "jpg", "svg", "pdf"])
    block_network: bool = True


@dataclass
class EvalSettings:
    tolerances: list[str] = field(default_factory=lambda: ["strict", "slight", "high"])
    mode: str = "matched"
    thresholds: list[float] = field(default_factory=lambda: [0.5, 0.75, 0.95, 1.0])
    strategy: str = "joined"
    workers: int = 1


@dataclass
class CliConfig:
    output_root: Optional[str] = None
    max_retries: int = 3
    concurrency: int = 4
    require_plot_call: bool = False
    llm: LlmSettings = field(default_factory=LlmSettings)
    sandbox: SandboxSettings = field(default_factory=SandboxSettings)
    eval: EvalSettings = field(default_factory=EvalSettings)


def _check_type(where: str, value: Any, types: tuple, allow_none: bool = False) -> Any:
    if value is None and allow_none:
        return value
    if isinstance(value, bool) and bool not in types:
        raise ConfigError(f"{where}: expected {'/'.join(t.__name__ for t in types)}, got bool")
    if not isinstance(value, types):
        raise ConfigError(f"{where}: expected {'/'.join(t.__name__ for t in types)}, got {type(value).__name__}")
    return value


_SCHEMA: dict[str, dict[str, tuple]] = {
    "": {
        "output_root": ((str,), True),
        "max_retries": ((int,), False),
        "concurrency": ((int,), False),
        "require_plot_call": ((bool,), False),
    },
    "llm": {
        "provider": ((str,), False),
        "endpoint": ((str,), True),
        "model": ((str,), True),
        "temperature": ((int, float), True),
        "timeout": ((int, float), False),
        "api_key_env": ((str,), False),
    },
    "sandbox": {
        "interpreter": ((list, str), False),
        "timeout": ((int, float), False),
        "image_extensions": ((list,), False),
        "block_network": ((bool,), False),
    },
    "eval": {
        "tolerances": ((list, str), False),
        "mode": ((str,), False),
        "thresholds": ((list,), False),
        "strategy": ((str,), False),
        "workers": ((int,), False),
    },
}


def _apply(section: str, raw: dict, target: Any) -> None:
    schema = _SCHEMA[section]
    for key, value in raw.items():
        where = f"{section + '.' if section else ''}{key}"
        if section == "llm" and key == "api_key":
            raise ConfigError("llm.api_key is not allowed in config files; set it in the environment")
        if key not in schema:
            raise ConfigError(f"unknown config key {where!r}")
        types, nullable = schema[key]
        _check_type(where, value, types, nullable)
        setattr(target, key, value)


def _validate(cfg: CliConfig) -> None:
    if cfg.max_retries < 1:
        raise ConfigError("max_retries must be >= 1")
    if cfg.concurrency < 1:
        raise ConfigError("concurrency must be >= 1")
    if cfg.llm.provider not in ("http", "mock"):
        raise ConfigError(f"llm.provider must be 'http' or 'mock', got {cfg.llm.provider!r}")
    if cfg.llm.timeout <= 0:
        raise ConfigError("llm.timeout must be positive")
    if isinstance(cfg.sandbox.interpreter, str):
        cfg.sandbox.interpreter = cfg.sandbox.interpreter.split()
    if not cfg.sandbox.interpreter or not all(isinstance(x, str) for x in cfg.sandbox.interpreter):
        raise ConfigError("sandbox.interpreter must be a non-empty list of strings")
    if cfg.sandbox.timeout <= 0:
        raise ConfigError("sandbox.timeout must be positive")
    if not cfg.sandbox.image_extensions:
        raise ConfigError("sandbox.image_extensions must not be empty")
    if isinstance(cfg.eval.tolerances, str):
        cfg.eval.tolerances = [t.strip() for t in cfg.eval.tolerances.split(",") if t.strip()]
    for t in cfg.eval.tolerances:
        if t not in TOLERANCES:
            raise ConfigError(f"eval.tolerances: unknown level {t!r}")
    if cfg.eval.mode not in ("matched", "paper-literal", "paper_literal"):
        raise ConfigError(f"eval.mode must be matched or paper-literal, got {cfg.eval.mode!r}")
    if cfg.eval.strategy not in ("joined", "per-entity", "per_entity"):
        raise ConfigError(f"eval.strategy must be joined or per-entity, got {cfg.eval.strategy!r}")
    for x in cfg.eval.thresholds:
        if isinstance(x, bool) or not isinstance(x, (int, float)) or not 0 <= x <= 1:
            raise ConfigError(f"eval.thresholds: {x!r} is not a number in [0, 1]")
    if cfg.eval.workers < 1:
        raise ConfigError("eval.workers must be >= 1")


def load_config(path: Optional[Path] = None, environ: Optional[dict] = None) -> CliConfig:
    """Read and validate a config file; ``None`` gives the defaults."""
    env = os.environ if environ is None else environ
    cfg = CliConfig()
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError(f"config {path} is not valid YAML: {exc}") from exc
        if data is None:
            data = {}
        if not isinstance(data, dict):
            raise ConfigError("config root must be a mapping")
        top = {k: v for k, v in data.items() if k not in ("llm", "sandbox", "eval")}
        _apply("", top, cfg)
        for name in ("llm", "sandbox", "eval"):
            if name in data:
                section = data[name] or {}
                if not isinstance(section, dict):
                    raise ConfigError(f"{name} must be a mapping")
                _apply(name, section, getattr(cfg, name))
    if env.get("CHARTSTR_LLM_ENDPOINT"):
        cfg.llm.endpoint = env["CHARTSTR_LLM_ENDPOINT"]
    if env.get("CHARTSTR_LLM_MODEL"):
        cfg.llm.model = env["CHARTSTR_LLM_MODEL"]
    _validate(cfg)
    return cfg
