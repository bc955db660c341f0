"""JSON run configurations: schema, validation and object construction."""
import json
import math
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import geometry
from .experiments import ConvergenceStudy, Physics
from .noise import SigmaSpec

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_NONNEG = {"type": "number", "minimum": 0}


def _kinded(kinds, params=None):
    return {
        "type": "object",
        "required": ["kind"],
        "properties": {
            "kind": {"enum": list(kinds)},
            "params": params or {"type": "object"},
        },
        "additionalProperties": False,
    }


SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "stochcurve run configuration",
    "type": "object",
    "required": ["curve", "physics", "initial", "noise", "grid"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "description": {"type": "string"},
        "curve": _kinded(["StationaryCircle", "ShrinkingCircle", "Flower"]),
        "physics": {
            "type": "object",
            "required": ["D"],
            "additionalProperties": False,
            "properties": {
                "D": _NONNEG,
                "reaction": {"oneOf": [{"type": "null"}, _kinded(["none", "cubic", "linear"])]},
                "advection": {"oneOf": [{"type": "null"}, _kinded(["constant", "sine"])]},
            },
        },
        "initial": _kinded(["gaussian", "cosine", "constant", "zero"]),
        "noise": {
            "type": "object",
            "required": ["b1", "rbar", "sigma"],
            "additionalProperties": False,
            "properties": {
                "b1": _NONNEG,
                "rbar": _POS,
                "sigma": {
                    "type": "object",
                    "required": ["kind", "sigma_bar"],
                    "additionalProperties": False,
                    "properties": {
                        "kind": {"enum": ["Constant", "LogisticClip", "LinearClamp"]},
                        "sigma_bar": _NONNEG,
                        "cap": _POS,
                    },
                },
                "L": {"oneOf": [{"const": "auto"}, {"type": "integer", "minimum": 1}]},
            },
        },
        "grid": {
            "type": "object",
            "required": ["N", "dt", "T"],
            "additionalProperties": False,
            "properties": {"N": {"type": "integer", "minimum": 3}, "dt": _POS, "T": _POS},
        },
        "sampling": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "S": {"type": "integer", "minimum": 1},
                "master_seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
                "path": {"type": "integer", "minimum": 0},
                "workers": {"type": "integer", "minimum": 1},
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "dir": {"type": "string"},
                "snapshots": {"type": "array", "items": _NONNEG},
            },
        },
        "study": {
            "type": "object",
            "required": ["ladder"],
            "additionalProperties": False,
            "properties": {
                "mode": {"enum": ["temporal", "spacetime"]},
                "ladder": {"type": "array", "items": {"type": "integer", "minimum": 1},
                           "minItems": 1},
            },
        },
        "vanish": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"threshold": _POS},
        },
    },
}


class ConfigError(ValueError):
    pass


def validate(doc):
    try:
        jsonschema.validate(doc, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{where}: {exc.message}") from None
    return doc


def load(path):
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return validate(doc)


def preset_names():
    files = resources.files("stochcurve") / "presets"
    return sorted(p.name[:-5] for p in files.iterdir() if p.name.endswith(".json"))


def load_preset(name):
    text = (resources.files("stochcurve") / "presets" / f"{name}.json").read_text()
    return validate(json.loads(text))


def build_curve(spec):
    params = spec.get("params", {})
    kind = spec["kind"]
    if kind == "StationaryCircle":
        return geometry.stationary_circle(**params)
    if kind == "ShrinkingCircle":
        return geometry.shrinking_circle(**params)
    return geometry.flower(**params)


def build_reaction(spec):
    if spec is None or spec["kind"] == "none":
        return None
    params = spec.get("params", {})
    if spec["kind"] == "linear":
        rate = params.get("rate", 1.0)
        return lambda c: rate * c
    scale, root = params.get("scale", 1.0), params.get("root", 0.0)
    return lambda c: scale * c * (1.0 - c) * (c - root)


def build_advection(spec):
    """Tangential advection ``w_T(t, x)``.

    Only the skew term ``-<c w_T, phi_x>`` is discretised; a ``c d_x w_T``
    contribution must be folded into the reaction by the user.
    """
    if spec is None:
        return None
    params = spec.get("params", {})
    if spec["kind"] == "constant":
        value = params.get("value", 1.0)
        return lambda t, x: np.full_like(x, value)
    amp, freq = params.get("amplitude", 1.0), params.get("frequency", 1)
    return lambda t, x: amp * np.sin(freq * x)


def build_initial(spec):
    params = spec.get("params", {})
    kind = spec["kind"]
    if kind == "zero":
        return lambda x: np.zeros_like(x)
    if kind == "constant":
        value = params.get("value", 1.0)
        return lambda x: np.full_like(x, value)
    if kind == "cosine":
        amp, freq = params.get("amplitude", 1.0), params.get("frequency", 1)
        return lambda x: amp * np.cos(freq * x)
    amp = params.get("amplitude", 1.0)
    # exp(-concentration/(4 pi^2) (x - center)^2)
    k = params.get("concentration", 1000.0) / (4.0 * math.pi**2)
    center = params.get("center", math.pi)
    return lambda x: amp * np.exp(-k * (x - center) ** 2)


def build_sigma(spec):
    kw = {"cap": spec["cap"]} if "cap" in spec else {}
    return SigmaSpec(spec["kind"], spec["sigma_bar"], **kw)


def build_physics(doc):
    ph, nz = doc["physics"], doc["noise"]
    return Physics(
        curve=build_curve(doc["curve"]),
        D=ph["D"],
        reaction=build_reaction(ph.get("reaction")),
        advection=build_advection(ph.get("advection")),
        initial=build_initial(doc["initial"]),
        b1=nz["b1"],
        rbar=nz["rbar"],
        sigma=build_sigma(nz["sigma"]),
    )


def resolve_L(doc):
    L = doc["noise"].get("L", "auto")
    return 2 * doc["grid"]["N"] + 1 if L == "auto" else int(L)


def sampling(doc):
    s = doc.get("sampling", {})
    return s.get("S", 1), s.get("master_seed", 0), s.get("path", 0), s.get("workers", 1)


def build_study(doc, mode=None):
    """Convergence study with the grid section as the reference resolution."""
    study = doc.get("study")
    if study is None:
        raise ConfigError("study: section required for convergence runs")
    mode = (mode or study.get("mode", "temporal")).lower()
    S, seed, _, workers = sampling(doc)
    grid = doc["grid"]
    try:
        return ConvergenceStudy(
            physics=build_physics(doc),
            N_ref=grid["N"],
            dt_ref=grid["dt"],
            T=grid["T"],
            S=S,
            ladder=tuple(study["ladder"]),
            mode="Temporal" if mode == "temporal" else "SpaceTime",
            master_seed=seed,
            L=resolve_L(doc),
            workers=workers,
        )
    except ValueError as exc:
        raise ConfigError(f"study: {exc}") from None
