"""Versioned JSON run reports written by the command-line tool."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from importlib import resources

import jsonschema

from .errors import ParseError

SCHEMA_VERSION = 1


def load_schema():
    text = resources.files("calibgraph").joinpath("schemas/run_report.schema.json").read_text("utf-8")
    return json.loads(text)


@dataclass
class RunReport:
    command: str
    inputs: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)
    metrics: dict = field(default_factory=dict)
    timing: dict = field(default_factory=lambda: {"seconds": 0.0})
    messages: list = field(default_factory=list)
    exit_status: int = 0
    schema_version: int = SCHEMA_VERSION

    def as_dict(self):
        return asdict(self)

    def to_json(self, indent=2):
        data = self.as_dict()
        validate_report(data)
        return json.dumps(data, indent=indent, sort_keys=True, allow_nan=False)

    @classmethod
    def from_json(cls, text):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc.msg}", exc.lineno) from None
        validate_report(data)
        return cls(**data)


def validate_report(data):
    try:
        jsonschema.validate(data, load_schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ParseError(f"report does not match schema at {where}: {exc.message}") from None
