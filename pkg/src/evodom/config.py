"""JSON run configuration: schema, validation, defaults, and model (de)serialization.

A config is one JSON object::

    {
      "preset": "example5_1",                   optional; replaces "model"
      "model": {
        "d1": 0.2, "d2": 0.1,                   positive numbers
        "a1": 1.2, ..., "c2": 0.012,            number or function spec
        "law": {"rho": <function spec>, "n": 1, "period": 2.0},
        "interval": [0.0, 1.0]
      },
      "grid": {"N": 199},
      "stepper": {"dt": 0.001, "t_end": 60, "scheme": "imex_be", "record_every": 100},
      "ic": {"kind": "sine_bump", "amplitude": 5},
      "quadrature": {"nodes": 4096},
      "monotone": {"tol": 1e-6, "max_iter": 1000},
      "periodic": {"tol": 1e-6, "max_periods": 500},
      "output": {"dir": "out"}
    }

Function specs are ``{"kind": "constant", "value": v}``,
``{"kind": "affine_sin", "c0", "c1", "omega", "phase"}``,
``{"kind": "affine_abs_sin", "c0", "c1", "omega"}`` or
``{"kind": "sampled", "table": [[t, value], ...]}``; a bare number is a constant.
Every coefficient shares the period of the evolution law.

A ``meta.json`` written by any subcommand is itself accepted as a config.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from pathlib import Path

import jsonschema

from .core import EvolutionLaw, ModelParams, PeriodicFn
from .dynamics import IC_KINDS, SCHEMES, InitialCondition, StepperConfig
from .errors import ConfigError, EvodomError
from .presets import PRESETS, preset
from .quadrature import DEFAULT_NODES

META_FORMAT = "evodom-meta/1"

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}

_FN_SPEC = {
    "oneOf": [
        {"type": "number"},
        {
            "type": "object",
            "properties": {"kind": {"const": "constant"}, "value": _NUM},
            "required": ["kind", "value"],
            "additionalProperties": False,
        },
        {
            "type": "object",
            "properties": {"kind": {"const": "affine_sin"}, "c0": _NUM, "c1": _NUM, "omega": _NUM, "phase": _NUM},
            "required": ["kind", "c0", "c1", "omega"],
            "additionalProperties": False,
        },
        {
            "type": "object",
            "properties": {"kind": {"const": "affine_abs_sin"}, "c0": _NUM, "c1": _NUM, "omega": _NUM},
            "required": ["kind", "c0", "c1"],
            "additionalProperties": False,
        },
        {
            "type": "object",
            "properties": {
                "kind": {"const": "sampled"},
                "table": {
                    "type": "array",
                    "minItems": 2,
                    "items": {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2},
                },
            },
            "required": ["kind", "table"],
            "additionalProperties": False,
        },
    ]
}


def _coef(minimum_key: str) -> dict:
    # numeric shortcut gets its sign constraint here; function specs are checked on construction
    return {"oneOf": [{"type": "number", minimum_key: 0}, *_FN_SPEC["oneOf"][1:]]}


def _block(props: dict, required=()) -> dict:
    return {"type": "object", "properties": props, "required": list(required), "additionalProperties": False}


MODEL_SCHEMA = _block(
    {
        "d1": _POS,
        "d2": _POS,
        "a1": _coef("exclusiveMinimum"),
        "a2": _coef("exclusiveMinimum"),
        "b1": _coef("minimum"),
        "b2": _coef("minimum"),
        "c1": _coef("exclusiveMinimum"),
        "c2": _coef("exclusiveMinimum"),
        "law": _block(
            {"rho": _FN_SPEC, "n": {"type": "integer", "minimum": 1}, "period": _POS},
            required=("rho", "period"),
        ),
        "interval": {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2},
    },
    required=("d1", "d2", "a1", "a2", "b1", "b2", "c1", "c2", "law"),
)

SCHEMA = _block(
    {
        "preset": {"enum": list(PRESETS)},
        "model": {"type": "object"},
        "grid": _block({"N": {"type": "integer", "minimum": 3}}),
        "stepper": _block(
            {
                "dt": _POS,
                "t_end": _POS,
                "scheme": {"enum": list(SCHEMES)},
                "record_every": {"type": "integer", "minimum": 1},
            }
        ),
        "ic": _block(
            {
                "kind": {"enum": list(IC_KINDS)},
                "amplitude": {"type": "number", "minimum": 0},
                "value": {"type": "number", "minimum": 0},
                "v1": {"type": "array", "items": {"type": "number", "minimum": 0}},
                "v2": {"type": "array", "items": {"type": "number", "minimum": 0}},
            }
        ),
        "quadrature": _block({"nodes": {"type": "integer", "minimum": 2, "multipleOf": 2}}),
        "monotone": _block({"tol": _POS, "max_iter": {"type": "integer", "minimum": 1}}),
        "periodic": _block({"tol": _POS, "max_periods": {"type": "integer", "minimum": 1}}),
        "output": _block({"dir": {"type": "string", "minLength": 1}}),
    }
)

DEFAULTS = {
    "grid": {"N": 199},
    "stepper": {"dt": 1e-3, "t_end": 60.0, "scheme": "imex_be", "record_every": 100},
    "ic": {"kind": "sine_bump", "amplitude": 5.0},
    "quadrature": {"nodes": DEFAULT_NODES},
    "monotone": {"tol": 1e-6, "max_iter": 1000},
    "periodic": {"tol": 1e-6, "max_periods": 500},
    "output": {"dir": "out"},
}


@dataclass(frozen=True)
class RunConfig:
    params: ModelParams
    N: int
    stepper: StepperConfig
    ic: InitialCondition
    nodes: int
    mono_tol: float
    mono_max_iter: int
    periodic_tol: float
    periodic_max_periods: int
    out_dir: Path
    preset: str | None
    resolved: dict


def model_to_spec(params: ModelParams) -> dict:
    """Config ``model`` block that rebuilds ``params`` exactly."""
    law = params.law
    out = {"d1": params.d1, "d2": params.d2}
    for name in ("a1", "a2", "b1", "b2", "c1", "c2"):
        fn = getattr(params, name)
        out[name] = fn.c0 if fn.kind == "constant" else fn.to_spec()
    out["law"] = {"rho": law.rho.to_spec(), "n": law.n, "period": law.period}
    out["interval"] = list(params.interval)
    return out


def model_from_spec(spec: dict) -> ModelParams:
    law_spec = spec["law"]
    T = float(law_spec["period"])
    law = EvolutionLaw(PeriodicFn.from_spec(law_spec["rho"], T), int(law_spec.get("n", 1)))
    fns = {name: PeriodicFn.from_spec(spec[name], T) for name in ("a1", "a2", "b1", "b2", "c1", "c2")}
    interval = tuple(float(v) for v in spec.get("interval", (0.0, 1.0)))
    return ModelParams(d1=float(spec["d1"]), d2=float(spec["d2"]), law=law, interval=interval, **fns)


def _line_of(text: str, path) -> int | None:
    """Line of the innermost key along ``path`` in the raw JSON text (best effort)."""
    pos, found = 0, None
    for key in path:
        if not isinstance(key, str):
            continue
        hit = text.find(json.dumps(key), pos)
        if hit < 0:
            break
        pos = found = hit
    return None if found is None else text.count("\n", 0, found) + 1


def _fail(source: str, text: str, path, message: str):
    line = _line_of(text, path)
    where = f"{source}:{line}" if line else source
    raise ConfigError(f"{where}: {message}")


def _branch_error(err):
    """For a failed ``oneOf`` pick the branch the user evidently meant."""
    inst = err.instance
    for sub in err.context:
        branch = sub.schema_path[0] if sub.schema_path else None
        schema = err.schema["oneOf"][branch] if branch is not None else {}
        if isinstance(inst, (int, float)) and schema.get("type") == "number":
            return sub
        kind = schema.get("properties", {}).get("kind", {}).get("const")
        if isinstance(inst, dict) and kind is not None and inst.get("kind") == kind:
            return sub
    return err


def _validate(schema: dict, doc, text: str, source: str, prefix=()):
    validator = jsonschema.Draft202012Validator(schema)
    # unknown keys first: they usually explain any missing ones
    errors = sorted(validator.iter_errors(doc),
                    key=lambda e: (e.validator != "additionalProperties", list(map(str, e.absolute_path)), e.message))
    if not errors:
        return
    err = errors[0]
    path = [*prefix, *err.absolute_path]
    label = ".".join(map(str, path)) or "config"
    if err.validator == "additionalProperties":
        allowed = set(err.schema.get("properties", {}))
        extra = sorted(k for k in err.instance if k not in allowed)
        _fail(source, text, [*path, extra[0]], f"unknown key {extra[0]!r} in {label}")
    if err.validator == "oneOf":
        sub = _branch_error(err)
        if sub is not err:
            _fail(source, text, [*path, *sub.absolute_path], f"{label}: {sub.message}")
        _fail(source, text, path, f"{label}: expected a number or a function spec")
    _fail(source, text, path, f"{label}: {err.message}")


def _merged(doc: dict) -> dict:
    out = copy.deepcopy(DEFAULTS)
    for key, block in doc.items():
        if isinstance(block, dict) and key in out:
            out[key].update(copy.deepcopy(block))
        else:
            out[key] = copy.deepcopy(block)
    return out


def load_document(text: str, source: str = "<config>") -> tuple[dict, str]:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}:{exc.lineno}: invalid JSON: {exc.msg}") from None
    if isinstance(doc, dict) and doc.get("format") == META_FORMAT:
        doc = doc.get("config")
        text = json.dumps(doc, indent=2)
    if not isinstance(doc, dict):
        raise ConfigError(f"{source}:1: config must be a JSON object")
    return doc, text


def config_from_document(doc: dict, text: str = "", source: str = "<config>",
                         preset_name: str | None = None, out_dir: str | None = None) -> RunConfig:
    """Validate, apply defaults and overrides, and build every runtime object."""
    _validate(SCHEMA, doc, text, source)
    doc = _merged(doc)
    if preset_name is not None:
        if preset_name not in PRESETS:
            raise ConfigError(f"unknown preset {preset_name!r}; expected one of {PRESETS}")
        doc["preset"] = preset_name
    if out_dir is not None:
        doc["output"]["dir"] = out_dir

    name = doc.get("preset")
    if name is not None:
        params = preset(name)
    else:
        if "model" not in doc:
            _fail(source, text, [], "config needs a 'model' block or a 'preset'")
        _validate(MODEL_SCHEMA, doc["model"], text, source, prefix=("model",))
        try:
            params = model_from_spec(doc["model"])
        except EvodomError as exc:
            _fail(source, text, ["model"], f"model: {exc}")
    doc["model"] = model_to_spec(params)

    try:
        stepper = StepperConfig(**doc["stepper"])
    except EvodomError as exc:
        _fail(source, text, ["stepper"], f"stepper: {exc}")
    ic_spec = dict(doc["ic"])
    for key in ("v1", "v2"):
        if key in ic_spec:
            ic_spec[key] = tuple(ic_spec[key])
    try:
        ic = InitialCondition(**ic_spec)
    except EvodomError as exc:
        _fail(source, text, ["ic"], f"ic: {exc}")
    if ic.kind == "sampled" and len(ic.v1) != doc["grid"]["N"]:
        _fail(source, text, ["ic", "v1"], f"sampled initial data must have N = {doc['grid']['N']} values")

    resolved = {key: doc[key] for key in ("preset", "model", "grid", "stepper", "ic",
                                          "quadrature", "monotone", "periodic", "output") if key in doc}
    return RunConfig(
        params=params,
        N=int(doc["grid"]["N"]),
        stepper=stepper,
        ic=ic,
        nodes=int(doc["quadrature"]["nodes"]),
        mono_tol=float(doc["monotone"]["tol"]),
        mono_max_iter=int(doc["monotone"]["max_iter"]),
        periodic_tol=float(doc["periodic"]["tol"]),
        periodic_max_periods=int(doc["periodic"]["max_periods"]),
        out_dir=Path(doc["output"]["dir"]),
        preset=name,
        resolved=resolved,
    )


def parse_config(path: str | Path | None, preset_name: str | None = None, out_dir: str | None = None) -> RunConfig:
    """Read and validate a JSON config file (or ``meta.json``).

    ``path`` may be None when ``preset_name`` is given. Any problem raises
    :class:`ConfigError` whose message starts with ``file:line``.
    """
    if path is None:
        if preset_name is None:
            raise ConfigError("either a config file or a preset is required")
        return config_from_document({}, "", "<preset>", preset_name, out_dir)
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config: {exc.strerror}") from None
    doc, text = load_document(text, str(path))
    return config_from_document(doc, text, str(path), preset_name, out_dir)
