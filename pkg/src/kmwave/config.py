"""Experiment configuration: JSON schema, defaults and semantic validation.

Every rejection raises :class:`~kmwave.errors.ConfigError` with one of the
kinds

``parse``             the file is not valid JSON
``schema``            wrong type, missing or unknown field
``range``             a value outside its admissible range
``commensurability``  ``dt`` does not divide ``tau`` and ``T``, or ``tau / T``
                      is not a ratio of small integers
``domain``            bad grid, or the seed bump leaves the domain
``sweep``             empty or reversed sweep range
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import jsonschema

from .coefficients import ModelParams
from .errors import ConfigError
from .io import params_from_dict
from .pde import Seed

_number = {"type": "number"}
_positive = {"type": "number", "exclusiveMinimum": 0}
_nonneg = {"type": "number", "minimum": 0}

_coefficient = {
    "oneOf": [
        {"type": "number", "minimum": 0},
        {"type": "object", "additionalProperties": False, "required": ["kind", "value"],
         "properties": {"kind": {"const": "constant"}, "value": _nonneg}},
        {"type": "object", "additionalProperties": False, "required": ["kind", "mean"],
         "properties": {"kind": {"const": "cosine"}, "mean": _nonneg,
                        "amplitude": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
                        "phase": _number}},
        {"type": "object", "additionalProperties": False, "required": ["kind", "samples"],
         "properties": {"kind": {"const": "tabulated"},
                        "samples": {"type": "array", "minItems": 2, "items": _nonneg},
                        "phase": _number}},
    ]
}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "kmwave experiment",
    "type": "object",
    "additionalProperties": False,
    "required": ["model"],
    "properties": {
        "model": {
            "type": "object", "additionalProperties": False,
            "required": ["d1", "d2", "dL", "tau", "S0", "beta", "gamma", "gammaL"],
            "properties": {"d1": _nonneg, "d2": _nonneg, "dL": _positive, "tau": _positive,
                           "S0": _positive, "period": _positive, "beta": _coefficient,
                           "gamma": _coefficient, "gammaL": _coefficient},
        },
        "domain": {
            "type": "object", "additionalProperties": False,
            "properties": {"x_min": _number, "x_max": _number, "dx": _positive},
        },
        "seed": {
            "type": "object", "additionalProperties": False,
            "properties": {"center": _number, "width": _positive, "amplitude": _nonneg},
        },
        "run": {
            "type": "object", "additionalProperties": False,
            "properties": {"horizon": _positive, "dt": _positive, "sample_every": _positive,
                           "snapshot_every": _positive, "threshold": _positive},
        },
        "numerics": {
            "type": "object", "additionalProperties": False,
            "properties": {"n_per_delay": {"type": "integer", "minimum": 8},
                           "mu_range": {"type": "array", "minItems": 2, "maxItems": 2,
                                        "items": _positive},
                           "n_grid": {"type": "integer", "minimum": 3}},
        },
        "proof": {
            "type": "object", "additionalProperties": False,
            "properties": {"c_fraction": {"type": "number", "exclusiveMinimum": 0,
                                          "exclusiveMaximum": 1},
                           "varrho": {"type": "number", "exclusiveMinimum": 0,
                                      "exclusiveMaximum": 1},
                           "variant": {"enum": ["squared", "literal"]},
                           "grid": {"type": "array", "minItems": 2, "maxItems": 2,
                                    "items": {"type": "integer", "minimum": 4}}},
        },
        "sweep": {
            "type": "object", "additionalProperties": False,
            "properties": {"parameter": {"enum": ["amplitude", "tau", "dL"]},
                           "range": {"type": "array", "minItems": 2, "maxItems": 2,
                                     "items": _number},
                           "count": {"type": "integer"},
                           "measure_speed": {"type": "boolean"}},
        },
        "output": {"type": "string"},
    },
}

DEFAULTS = {
    "model": {"d1": 1.0, "d2": 1.0, "dL": 1.0, "tau": 1.0, "S0": 1.0, "period": 1.0,
              "beta": {"kind": "cosine", "mean": 2.0, "amplitude": 0.2},
              "gamma": 1.0, "gammaL": 0.1},
    "domain": {"x_min": -200.0, "x_max": 200.0, "dx": 0.1},
    "seed": {"center": 0.0, "width": 2.0, "amplitude": 0.1},
    "run": {"horizon": 120.0, "dt": 1.0 / 256, "sample_every": 0.25, "snapshot_every": 10.0,
            "threshold": 1e-3},
    "numerics": {"n_per_delay": 64, "mu_range": [1e-3, 1e2], "n_grid": 32},
    "proof": {"c_fraction": 0.5, "varrho": 0.05, "variant": "squared", "grid": [64, 64]},
    "sweep": {"parameter": "amplitude", "range": [0.0, 0.4], "count": 3, "measure_speed": False},
    "output": "kmwave_out",
}

_RANGE_VALIDATORS = {"minimum", "exclusiveMinimum", "maximum", "exclusiveMaximum"}


def default_config():
    return copy.deepcopy(DEFAULTS)


@dataclass(frozen=True)
class ExperimentConfig:
    params: ModelParams
    domain: tuple
    seed: Seed
    horizon: float
    dt: float
    sample_every: float
    snapshot_every: float
    threshold: float
    n_per_delay: int
    mu_range: tuple
    n_grid: int
    c_fraction: float
    varrho: float
    variant: str
    proof_grid: tuple
    sweep_parameter: str
    sweep_range: tuple
    sweep_count: int
    measure_speed: bool
    output: str
    raw: dict


def _merge(base, override):
    out = copy.deepcopy(base)
    for key, val in override.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict) and key != "model":
            out[key] = _merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def _schema_error(err: jsonschema.ValidationError):
    # For oneOf failures report the most relevant branch.
    best = jsonschema.exceptions.best_match([err]) if err.context else err
    where = "/".join(str(k) for k in best.absolute_path) or "<root>"
    kind = "range" if best.validator in _RANGE_VALIDATORS else "schema"
    if err.validator == "oneOf" and err.context:
        ranged = [e for e in err.context if e.validator in _RANGE_VALIDATORS]
        typed = [e for e in err.context if e.validator in ("type", "const")]
        if ranged and len(ranged) + len(typed) == len(err.context):
            kind, best = "range", ranged[0]
    return ConfigError(kind, f"{where}: {best.message}")


def _multiple(num, den, tol=1e-9):
    k = round(num / den)
    return k >= 1 and abs(k * den - num) <= tol * max(num, den)


def validate(raw) -> ExperimentConfig:
    """Validate a raw mapping (user fields over defaults) into a config."""
    if not isinstance(raw, dict):
        raise ConfigError("schema", "configuration must be a JSON object")
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(raw), key=lambda e: [str(k) for k in e.absolute_path])
    if errors:
        raise _schema_error(errors[0])
    cfg = _merge(DEFAULTS, raw)
    errors = sorted(validator.iter_errors(cfg), key=lambda e: [str(k) for k in e.absolute_path])
    if errors:
        raise _schema_error(errors[0])

    m = cfg["model"]
    m.setdefault("period", 1.0)
    params = params_from_dict(m)
    if params.beta.minimum() <= 0 or params.gamma.minimum() <= 0:
        raise ConfigError("range", "beta and gamma must be strictly positive")
    tau, T = params.tau, params.period
    ratio = Fraction(tau / T).limit_denominator(1000)
    if abs(float(ratio) * T - tau) > 1e-9 * tau:
        raise ConfigError("commensurability",
                          f"tau / T = {tau / T!r} is not a ratio of integers below 1000")

    run = cfg["run"]
    dt = run["dt"]
    for name, val in (("tau", tau), ("period", T)):
        if not _multiple(val, dt):
            raise ConfigError("commensurability", f"dt = {dt} does not divide {name} = {val}")
    if tau / dt < 2 - 1e-9:
        raise ConfigError("commensurability", "dt must be at most tau / 2")
    for name in ("horizon", "sample_every", "snapshot_every"):
        if not _multiple(run[name], dt):
            raise ConfigError("commensurability", f"run.{name} is not a multiple of dt")
    if not _multiple(run["snapshot_every"], run["sample_every"]):
        raise ConfigError("commensurability", "run.snapshot_every must be a multiple of sample_every")

    d = cfg["domain"]
    if not d["x_max"] > d["x_min"]:
        raise ConfigError("domain", "domain.x_max must exceed domain.x_min")
    if not _multiple(d["x_max"] - d["x_min"], d["dx"]):
        raise ConfigError("domain", "domain.dx does not divide the domain length")
    if (d["x_max"] - d["x_min"]) / d["dx"] < 8:
        raise ConfigError("domain", "domain needs at least 9 grid nodes")
    s = cfg["seed"]
    if not (d["x_min"] <= s["center"] - s["width"] and s["center"] + s["width"] <= d["x_max"]):
        raise ConfigError("domain", "seed bump must lie inside the domain")

    mu_lo, mu_hi = cfg["numerics"]["mu_range"]
    if not mu_lo < mu_hi:
        raise ConfigError("range", "numerics.mu_range must be increasing")

    sw = cfg["sweep"]
    lo, hi = sw["range"]
    if sw["count"] < 1 or hi < lo or (sw["count"] > 1 and hi == lo):
        raise ConfigError("sweep", "sweep needs count >= 1 and range[0] < range[1]")
    if sw["parameter"] == "amplitude" and not (0 <= lo and hi < 1):
        raise ConfigError("sweep", "amplitude sweep must stay in [0, 1)")
    if sw["parameter"] in ("tau", "dL") and not lo > 0:
        raise ConfigError("sweep", f"{sw['parameter']} sweep must stay positive")

    pr = cfg["proof"]
    return ExperimentConfig(
        params=params, domain=(d["x_min"], d["x_max"], d["dx"]),
        seed=Seed(center=s["center"], width=s["width"], amplitude=s["amplitude"]),
        horizon=run["horizon"], dt=dt, sample_every=run["sample_every"],
        snapshot_every=run["snapshot_every"], threshold=run["threshold"],
        n_per_delay=cfg["numerics"]["n_per_delay"], mu_range=(mu_lo, mu_hi),
        n_grid=cfg["numerics"]["n_grid"], c_fraction=pr["c_fraction"], varrho=pr["varrho"],
        variant=pr["variant"], proof_grid=tuple(pr["grid"]), sweep_parameter=sw["parameter"],
        sweep_range=(lo, hi), sweep_count=sw["count"], measure_speed=sw["measure_speed"],
        output=cfg["output"], raw=cfg)


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError("parse", f"cannot read {path}: {exc.strerror}") from exc
    try:
        raw = json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise ConfigError("parse", f"{path}: {exc}") from exc
    return validate(raw)


def _reject_constant(name):
    raise ConfigError("parse", f"non-standard JSON constant {name}")


def sweep_values(cfg: ExperimentConfig):
    lo, hi = cfg.sweep_range
    n = cfg.sweep_count
    if n == 1:
        return [lo]
    return [lo + (hi - lo) * k / (n - 1) for k in range(n)]


def with_parameter(p: ModelParams, name, value):
    """Copy of ``p`` with the seasonal amplitude of beta, tau or dL replaced."""
    if name == "amplitude":
        b = p.beta
        if b.kind == "constant":
            beta = type(b).cosine(b.c0, value, b.period)
        elif b.kind == "cosine":
            beta = type(b).cosine(b.c0, value, b.period, b.phase)
        else:
            raise ConfigError("sweep", "amplitude sweeps need a constant or cosine beta")
        return p.replace(beta=beta)
    if name in ("tau", "dL"):
        return p.replace(**{name: value})
    raise ConfigError("sweep", f"unknown sweep parameter {name!r}")


def describe_schema():
    return json.dumps(SCHEMA, indent=2)


__all__ = ["SCHEMA", "DEFAULTS", "ExperimentConfig", "default_config", "validate", "load_config",
           "sweep_values", "with_parameter", "describe_schema"]
