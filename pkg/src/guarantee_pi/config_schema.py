"""JSON schema for simulation config documents."""

from __future__ import annotations

import jsonschema

from .exceptions import DataError

_POSITIVE_INT = {"type": "integer", "minimum": 1}
_LEVEL = {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1}
_VECTOR = {"type": "array", "items": {"type": "number"}, "minItems": 1}
_SEED = {"type": "integer", "minimum": 0, "maximum": 2**64 - 1}

SIM_CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "SimConfig",
    "type": "object",
    "additionalProperties": False,
    "required": ["n", "error"],
    "properties": {
        "n": {"type": "integer", "minimum": 2},
        "beta": _VECTOR,
        "xf": _VECTOR,
        "design": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["standard_normal", "file"]},
                "seed": _SEED,
                "intercept_column": {"type": "boolean"},
                "path": {"type": "string"},
            },
            "if": {"properties": {"kind": {"const": "file"}}, "required": ["kind"]},
            "then": {"required": ["path"]},
        },
        "error": {
            "type": "object",
            "required": ["kind"],
            "oneOf": [
                {
                    "additionalProperties": False,
                    "properties": {
                        "kind": {"const": "normal"},
                        "sigma": {"type": "number", "exclusiveMinimum": 0},
                    },
                },
                {
                    "additionalProperties": False,
                    "properties": {
                        "kind": {"const": "laplace"},
                        "scale": {"type": "number", "exclusiveMinimum": 0},
                    },
                },
            ],
        },
        "methods": {
            "type": "array",
            "items": {"enum": ["RB", "MFMB", "RBUG", "PRBUG"]},
            "minItems": 1,
            "uniqueItems": True,
        },
        "alpha": _LEVEL,
        "gamma": _LEVEL,
        "replications": _POSITIVE_INT,
        "bootstrap": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "b_roots": {"type": "integer", "minimum": 100},
                "b_adjust": {"type": "integer", "minimum": 100},
                "b_mc": {"type": "integer", "minimum": 100},
            },
        },
        "coverage_quantile_probs": {"type": "array", "items": _LEVEL, "minItems": 1},
        "master_seed": _SEED,
        "histogram_bin_width": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
    },
}


def validate_sim_config(doc) -> None:
    try:
        jsonschema.validate(doc, SIM_CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise DataError(f"invalid simulation config at {path}: {exc.message}") from exc
