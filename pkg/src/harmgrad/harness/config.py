"""JSON experiment configs.

A config names an experiment, carries a mandatory integer seed and a
parameter table; an optional ``cases`` list of parameter overrides fans out
into one report per case.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import jsonschema

from ..errors import ConfigError

CONFIG_SCHEMA = {
    "type": "object",
    "required": ["experiment", "seed"],
    "additionalProperties": False,
    "properties": {
        "experiment": {"type": "string"},
        "seed": {"type": "integer"},
        "params": {"type": "object"},
        "cases": {"type": "array", "items": {"type": "object"}},
    },
}


@dataclass
class ExperimentConfig:
    experiment: str
    seed: int
    params: dict = field(default_factory=dict)
    cases: list = field(default_factory=list)

    def expanded(self):
        """One parameter table per case (the base table if there are no cases)."""
        if not self.cases:
            return [dict(self.params)]
        return [{**self.params, **c} for c in self.cases]


def parse_config(obj) -> ExperimentConfig:
    try:
        jsonschema.validate(obj, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"malformed config: {exc.message}") from None
    return ExperimentConfig(obj["experiment"], obj["seed"], obj.get("params", {}), obj.get("cases", []))


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            obj = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    return parse_config(obj)
