"""JSON run configuration: strict schema, unit conversion, experiment specs.

Units at this surface: times in microseconds, frequencies in MHz, angles in
units of pi. Everything is converted to SI before reaching the simulator.
"""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from pathlib import Path

import jsonschema
import numpy as np

from .errors import ConfigError
from .experiments import REGISTRY, ExperimentSpec
from .gates import DEFAULT_FREQUENCIES_HZ, DeviceModel
from .noise import NoiseModel, NoiseParams, ReadoutModel, ResetModel, calibrate_noise

QUBITS = ("Q1", "Q2", "Q3", "Q4")

DEFAULT_COHERENCE_US = {
    "Q1": {"t2_star_us": 0.28, "t2_hahn_us": 2.72},
    "Q2": None,
    "Q3": None,
    "Q4": {"t2_star_us": 0.23, "t2_hahn_us": 3.26},
}

# options given in units of pi / microseconds at the config surface
ANGLE_OPTIONS = {"phase"}
TIME_OPTIONS = {"wait"}

_qubit = {"enum": list(QUBITS)}
_coherence = {
    "oneOf": [
        {"type": "null"},
        {
            "type": "object",
            "properties": {
                "t2_star_us": {"type": "number", "exclusiveMinimum": 0},
                "t2_hahn_us": {"type": "number", "exclusiveMinimum": 0},
            },
            "required": ["t2_star_us", "t2_hahn_us"],
            "additionalProperties": False,
        },
    ]
}
_sweep = {
    "oneOf": [
        {
            "type": "object",
            "properties": {"values": {"type": "array", "items": {"type": "number"}, "minItems": 1}},
            "required": ["values"],
            "additionalProperties": False,
        },
        {
            "type": "object",
            "properties": {
                "start": {"type": "number"},
                "stop": {"type": "number"},
                "num": {"type": "integer", "minimum": 1},
            },
            "required": ["start", "stop", "num"],
            "additionalProperties": False,
        },
    ]
}
_fidelity = {
    "f_even": {"type": "number", "minimum": 0.5, "maximum": 1},
    "f_odd": {"type": "number", "minimum": 0.5, "maximum": 1},
}
_OPTION_SCHEMAS = {
    "qubit": _qubit,
    "control": _qubit,
    "target": _qubit,
    "source": _qubit,
    "destination": _qubit,
    "data": _qubit,
    "ancilla": _qubit,
    "swept_control": {"oneOf": [_qubit, {"type": "null"}]},
    "controls": {"type": "array", "items": _qubit, "minItems": 2, "maxItems": 2},
    "ancillas": {"type": "array", "items": _qubit, "minItems": 2, "maxItems": 2},
    "subsets": {"type": "array", "items": {"type": "array", "items": _qubit, "uniqueItems": True}},
    "gate": {"enum": ["CZ", "CS_inv", "custom"]},
    "phase": {"type": "number"},
    "echo": {"enum": ["none", "ancilla_Y2"]},
    "input": {"enum": ["down", "up", "x", "-x", "y", "-y"]},
    "wait": {"type": "number", "minimum": 0},
    "echo_axis": {"enum": ["X", "Y"]},
}


def _experiment_schema() -> dict:
    kinds = sorted(REGISTRY)
    per_kind = [
        {
            "if": {"properties": {"kind": {"const": k}}},
            "then": {
                "properties": {
                    "options": {
                        "type": "object",
                        "properties": {o: _OPTION_SCHEMAS[o] for o in REGISTRY[k].options},
                        "additionalProperties": False,
                    }
                }
            },
        }
        for k in kinds
    ]
    return {
        "type": "object",
        "properties": {
            "name": {"type": "string", "pattern": "^[A-Za-z0-9_.-]+$"},
            "kind": {"enum": kinds},
            "sweep": _sweep,
            "shots_per_point": {"type": "integer", "minimum": 1},
            "exact": {"type": "boolean"},
            "options": {"type": "object"},
        },
        "required": ["name", "kind", "sweep"],
        "additionalProperties": False,
        "allOf": per_kind,
    }


SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "properties": {
        "master_seed": {"type": "integer", "minimum": 0},
        "output_dir": {"type": "string"},
        "device": {
            "type": "object",
            "properties": {
                "frequencies_mhz": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 4, "maxItems": 4},
                "rabi_mhz": {
                    "oneOf": [
                        {"type": "number", "exclusiveMinimum": 0},
                        {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 4, "maxItems": 4},
                    ]
                },
                "edges": {"type": "array", "items": {"type": "array", "items": _qubit, "minItems": 2, "maxItems": 2}},
                "readout_pairs": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "properties": {
                            "pair": {"type": "array", "items": _qubit, "minItems": 2, "maxItems": 2},
                            "sensor": {"type": "string"},
                        },
                        "required": ["pair", "sensor"],
                        "additionalProperties": False,
                    },
                },
                "exchange_mhz": {"type": "number", "exclusiveMinimum": 0},
                "tukey_alpha": {"type": "number", "minimum": 0, "maximum": 1},
            },
            "additionalProperties": False,
        },
        "noise": {
            "type": "object",
            "properties": {
                "qubits": {
                    "type": "object",
                    "properties": {q: _coherence for q in QUBITS},
                    "additionalProperties": False,
                },
                "residual_exchange_mhz": {
                    "type": "object",
                    "patternProperties": {"^Q[1-4]-Q[1-4]$": {"type": "number"}},
                    "additionalProperties": False,
                },
                "dephase_during_gates": {"type": "boolean"},
            },
            "additionalProperties": False,
        },
        "readout": {
            "type": "object",
            "properties": dict(
                _fidelity,
                per_sensor={
                    "type": "object",
                    "additionalProperties": {"type": "object", "properties": _fidelity, "additionalProperties": False},
                },
            ),
            "additionalProperties": False,
        },
        "reset": {
            "type": "object",
            "properties": {"retain_probability": {"type": "number", "minimum": 0, "maximum": 1}},
            "additionalProperties": False,
        },
        "experiments": {"type": "array", "items": _experiment_schema(), "minItems": 1},
    },
    "required": ["experiments"],
    "additionalProperties": False,
}


def _path(parts) -> str:
    return "/".join(str(p) for p in parts) or "<root>"


def validate(raw: dict) -> None:
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(raw), key=lambda e: (len(e.absolute_path), list(map(str, e.absolute_path))))
    if errors:
        err = max(errors, key=lambda e: len(e.absolute_path))
        path = _path(err.absolute_path)
        if err.validator == "additionalProperties" and isinstance(err.instance, dict):
            allowed = set(err.schema.get("properties", {}))
            extra = sorted(k for k in err.instance if k not in allowed)
            if extra:
                path = _path(list(err.absolute_path) + [extra[0]])
        raise ConfigError(err.message, path)
    names = [e["name"] for e in raw["experiments"]]
    dup = {n for n in names if names.count(n) > 1}
    if dup:
        raise ConfigError(f"duplicate experiment names: {sorted(dup)}", "experiments")


def apply_overrides(raw: dict, overrides) -> dict:
    """``key.sub.0=value`` assignments; values parse as JSON, else stay strings."""
    raw = copy.deepcopy(raw)
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value", item)
        key, text = item.split("=", 1)
        try:
            value = json.loads(text)
        except json.JSONDecodeError:
            value = text
        parts = key.split(".")
        node = raw
        for i, part in enumerate(parts[:-1]):
            if isinstance(node, list):
                node = node[_list_index(node, part, parts[: i + 1])]
            else:
                node = node.setdefault(part, {})
        last = parts[-1]
        if isinstance(node, list):
            node[_list_index(node, last, parts)] = value
        elif isinstance(node, dict):
            node[last] = value
        else:
            raise ConfigError(f"cannot set {key}", ".".join(parts))
    return raw


def _list_index(node: list, part: str, parts) -> int:
    try:
        idx = int(part)
        node[idx]
        return idx
    except (ValueError, IndexError):
        raise ConfigError(f"bad list index in override {'.'.join(parts)}", "/".join(parts)) from None


@dataclass
class RunConfig:
    raw: dict
    master_seed: int
    output_dir: str
    specs: list[tuple[str, ExperimentSpec]]


def _sweep_values(sweep: dict) -> np.ndarray:
    if "values" in sweep:
        return np.asarray(sweep["values"], dtype=float)
    return np.linspace(sweep["start"], sweep["stop"], sweep["num"])


def _to_si(kind: str, values: np.ndarray) -> np.ndarray:
    unit = REGISTRY[kind].sweep
    if unit == "us":
        return values * 1e-6
    if unit == "pi":
        return values * np.pi
    return values


def _options(opts: dict) -> dict:
    out = {}
    for k, v in opts.items():
        if k in ANGLE_OPTIONS:
            v = float(v) * np.pi
        elif k in TIME_OPTIONS:
            v = float(v) * 1e-6
        elif isinstance(v, list):
            v = tuple(tuple(x) if isinstance(x, list) else x for x in v)
        out[k] = v
    return out


def build(raw: dict) -> RunConfig:
    """Validate and convert to simulator objects; all problems raise ConfigError."""
    validate(raw)
    dev_raw = raw.get("device", {})
    freqs = tuple(f * 1e6 for f in dev_raw.get("frequencies_mhz", [f / 1e6 for f in DEFAULT_FREQUENCIES_HZ]))
    rabi = dev_raw.get("rabi_mhz", 5.0)
    rabi = [rabi] * 4 if isinstance(rabi, (int, float)) else rabi
    extra = {}
    if "edges" in dev_raw:
        extra["connectivity_edges"] = frozenset(tuple(QUBITS.index(q) for q in e) for e in dev_raw["edges"])
    if "readout_pairs" in dev_raw:
        extra["readout_pairs"] = tuple(
            (tuple(QUBITS.index(q) for q in rp["pair"]), rp["sensor"]) for rp in dev_raw["readout_pairs"]
        )
    try:
        device = DeviceModel(
            qubit_frequencies=freqs,
            rabi_rates=tuple(r * 1e6 for r in rabi),
            exchange_hz=dev_raw.get("exchange_mhz", 10.0) * 1e6,
            tukey_alpha=dev_raw.get("tukey_alpha", 0.5),
            **extra,
        )
        noise_raw = raw.get("noise", {})
        coherence = dict(DEFAULT_COHERENCE_US)
        coherence.update(noise_raw.get("qubits", {}))
        params = []
        for q in QUBITS:
            c = coherence[q]
            params.append(NoiseParams() if c is None else calibrate_noise(c["t2_star_us"] * 1e-6, c["t2_hahn_us"] * 1e-6))
        residual = {}
        for key, mhz in noise_raw.get("residual_exchange_mhz", {}).items():
            a, b = (device.index(q) for q in key.split("-"))
            device.require_edge(a, b)
            residual[(a, b)] = mhz * 1e6
        noise = NoiseModel(tuple(params), residual, noise_raw.get("dephase_during_gates", False))
        ro = raw.get("readout", {})
        sensors = {label: pair for pair, label in device.readout_pairs}
        unknown = set(ro.get("per_sensor", {})) - set(sensors)
        if unknown:
            raise ConfigError(f"no readout pair with sensor {sorted(unknown)[0]!r}", "readout/per_sensor")
        readout = {}
        for label, pair in sensors.items():
            f = dict({"f_even": ro.get("f_even", 0.95), "f_odd": ro.get("f_odd", 0.85)}, **ro.get("per_sensor", {}).get(label, {}))
            readout[pair] = ReadoutModel(f["f_even"], f["f_odd"])
        reset = ResetModel(raw.get("reset", {}).get("retain_probability", 0.1))
    except ConfigError:
        raise
    except Exception as exc:  # device or noise rejected the values
        raise ConfigError(f"{type(exc).__name__}: {exc}", "device/noise") from exc
    seed = int(raw.get("master_seed", 0))
    specs = []
    for i, exp in enumerate(raw["experiments"]):
        try:
            spec = ExperimentSpec(
                kind=exp["kind"],
                sweep=tuple(_to_si(exp["kind"], _sweep_values(exp["sweep"]))),
                device=device,
                noise=noise,
                readout=readout,
                reset=reset,
                shots_per_point=exp.get("shots_per_point", 10_000),
                master_seed=seed,
                options=_options(exp.get("options", {})),
                exact=exp.get("exact", False),
                seed_key=(i,),
            )
        except Exception as exc:
            raise ConfigError(str(exc), f"experiments/{i}") from exc
        specs.append((exp["name"], spec))
    return RunConfig(raw, seed, raw.get("output_dir", "out"), specs)


def load(path, overrides=()) -> RunConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", str(path)) from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}", str(path)) from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object", "<root>")
    return build(apply_overrides(raw, overrides))
