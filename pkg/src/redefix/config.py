"""Run configuration: defaults, YAML file loading, env-var secrets.

Secrets (Stack Exchange and LLM API keys) never live in the config file;
they come from ``REDEFIX_SO_API_KEY`` and ``REDEFIX_LLM_API_KEY`` at the
point of use. ``webdriver_endpoint`` accepts a URL or the literal
``devbrowser`` to spawn the embedded offline renderer in-process.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from pathlib import Path

import yaml

from .errors import ConfigError
from .llm import LlmConfig
from .retriever import EnsembleWeights


@dataclass
class SweepConfig:
    min_width: int = 320
    max_width: int = 1400
    step: int = 10

    def __post_init__(self):
        if self.min_width >= self.max_width:
            raise ConfigError("sweep min must be below max")
        if self.step < 1:
            raise ConfigError("sweep step must be >= 1")

    def widths(self) -> list[int]:
        out = list(range(self.min_width, self.max_width + 1, self.step))
        if out[-1] != self.max_width:
            out.append(self.max_width)
        return out


@dataclass
class RunConfig:
    sweep: SweepConfig = field(default_factory=SweepConfig)
    kb_path: str = "kb"
    weights: EnsembleWeights = field(default_factory=EnsembleWeights)
    top_k: int = 5
    max_iterations: int = 5
    n_majority: int = 5
    small_range_threshold: int = 5
    completion_reserve_tokens: int = 4096
    region_padding: int = 40
    image_token_cost: int = 1600
    llm: LlmConfig = field(default_factory=LlmConfig)
    webdriver_endpoint: str = "devbrowser"
    settle_delay: float = 0.2  # zeroed automatically for the offline renderer
    output_dir: str = "redefix-out"
    jobs: int = 1

    def __post_init__(self):
        if self.top_k < 1:
            raise ConfigError("top_k must be >= 1")
        if self.max_iterations < 1:
            raise ConfigError("max_iterations must be >= 1")
        if self.n_majority < 1:
            raise ConfigError("n_majority must be >= 1")

    @property
    def prompt_budget(self) -> int:
        return self.llm.max_context_tokens - self.completion_reserve_tokens


def load_config(path: str | Path | None) -> RunConfig:
    """Build a RunConfig from a YAML file; missing file means defaults."""
    if path is None:
        return RunConfig()
    raw = yaml.safe_load(Path(path).read_text()) or {}
    if not isinstance(raw, dict):
        raise ConfigError(f"config root must be a mapping: {path}")
    return config_from_dict(raw)


def config_from_dict(raw: dict) -> RunConfig:
    kwargs = {}
    known = {f.name for f in fields(RunConfig)}
    for key, value in raw.items():
        if key not in known:
            raise ConfigError(f"unknown config key: {key}")
        if key == "sweep":
            kwargs[key] = SweepConfig(**value)
        elif key == "weights":
            kwargs[key] = EnsembleWeights(**value)
        elif key == "llm":
            kwargs[key] = LlmConfig(**value)
        else:
            kwargs[key] = value
    return RunConfig(**kwargs)
