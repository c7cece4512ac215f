"""Experiment reports: parameters, toleranced metrics, CSV tables."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import jsonschema

REPORT_SCHEMA = {
    "type": "object",
    "required": ["experiment", "params", "metrics", "artifacts", "seed"],
    "properties": {
        "experiment": {"type": "string"},
        "params": {"type": "object"},
        "metrics": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["name", "value", "tol", "pass"],
                "properties": {
                    "name": {"type": "string"},
                    "value": {"type": ["number", "null"]},
                    "tol": {"type": ["number", "string"]},
                    "pass": {"type": "boolean"},
                },
            },
        },
        "artifacts": {"type": "array", "items": {"type": "string"}},
        "seed": {"type": ["integer", "null"]},
        "pass": {"type": "boolean"},
    },
}


@dataclass
class Metric:
    name: str
    value: float
    tol: float | str
    passed: bool

    def to_dict(self):
        v = float(self.value)
        return {
            "name": self.name,
            "value": v if math.isfinite(v) else None,
            "tol": self.tol,
            "pass": bool(self.passed),
        }


@dataclass
class ExperimentReport:
    experiment: str
    params: dict = field(default_factory=dict)
    metrics: list = field(default_factory=list)
    artifacts: list = field(default_factory=list)
    seed: int | None = None
    tables: dict = field(default_factory=dict)
    timestamp: str | None = None

    def add(self, name, value, tol, passed):
        self.metrics.append(Metric(name, float(value), tol, bool(passed)))
        return self

    def check_le(self, name, value, bound):
        """Record ``value <= bound``."""
        return self.add(name, value, bound, value <= bound)

    def check_close(self, name, value, target, tol):
        """Record ``|value - target| <= tol``."""
        return self.add(name, value, f"{target} +/- {tol}", abs(value - target) <= tol)

    def metric(self, name):
        for m in self.metrics:
            if m.name == name:
                return m
        raise KeyError(name)

    def add_table(self, name, columns, rows):
        self.tables[name] = (list(columns), [list(r) for r in rows])

    @property
    def passed(self):
        return bool(self.metrics) and all(m.passed for m in self.metrics)

    def to_dict(self):
        d = {
            "experiment": self.experiment,
            "params": _jsonable(self.params),
            "metrics": [m.to_dict() for m in self.metrics],
            "artifacts": list(self.artifacts),
            "seed": self.seed,
            "pass": self.passed,
        }
        jsonschema.validate(d, REPORT_SCHEMA)
        return d

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    if hasattr(obj, "item"):  # numpy scalars
        return _jsonable(obj.item())
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    if obj is None or isinstance(obj, (bool, int, float, str)):
        return obj
    return str(obj)
