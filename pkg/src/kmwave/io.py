"""Serialisation: parameter records, CSV tables, run manifests and checkpoints.

Checkpoint layout (all integers and floats little-endian)::

    bytes 0-7    magic b"KMWAVE01"
    bytes 8-11   uint32 header length H
    next H bytes UTF-8 JSON header: t, t0, step_index, dt, dx, x_min, n, depth,
                 head (always 0 on disk), history_start, warm, kernel_ell,
                 convolution, clamp_count, params (the parameter record) and
                 params_sha256 (digest of its canonical JSON)
    then         S (n doubles), I (n doubles), ring (depth * n doubles, oldest
                 entry first), each as '<f8'
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .coefficients import ModelParams, PeriodicFn
from .errors import ArgumentError, ConfigError

MAGIC = b"KMWAVE01"


# ---------------------------------------------------------------------------
# parameter records
# ---------------------------------------------------------------------------

def coefficient_to_dict(f: PeriodicFn):
    if f.kind == "constant":
        return {"kind": "constant", "value": f.c0}
    if f.kind == "cosine":
        return {"kind": "cosine", "mean": f.c0, "amplitude": f.amplitude, "phase": f.phase}
    return {"kind": "tabulated", "samples": list(f.samples), "phase": f.phase}


def coefficient_from_spec(spec, period, name="coefficient"):
    """Build a :class:`PeriodicFn` from a number or a ``{"kind": ...}`` mapping."""
    if isinstance(spec, bool):
        raise ConfigError("schema", f"{name}: expected a number or an object")
    if isinstance(spec, (int, float)):
        return PeriodicFn.constant(spec, period)
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError("schema", f"{name}: expected a number or an object with 'kind'")
    kind = spec["kind"]
    phase = spec.get("phase", 0.0)
    try:
        if kind == "constant":
            return PeriodicFn.constant(spec["value"], period)
        if kind == "cosine":
            return PeriodicFn.cosine(spec["mean"], spec.get("amplitude", 0.0), period, phase)
        if kind == "tabulated":
            return PeriodicFn.tabulated(spec["samples"], period, phase)
    except KeyError as exc:
        raise ConfigError("schema", f"{name}: missing field {exc}") from exc
    except ArgumentError as exc:
        raise ConfigError("range", f"{name}: {exc}") from exc
    raise ConfigError("schema", f"{name}: unknown kind {kind!r}")


def params_to_dict(p: ModelParams):
    return {"d1": p.d1, "d2": p.d2, "dL": p.dL, "tau": p.tau, "S0": p.S0, "period": p.period,
            "beta": coefficient_to_dict(p.beta), "gamma": coefficient_to_dict(p.gamma),
            "gammaL": coefficient_to_dict(p.gammaL)}


def params_from_dict(d):
    period = d.get("period", 1.0)
    coefs = {k: coefficient_from_spec(d[k], period, k) for k in ("beta", "gamma", "gammaL")}
    try:
        return ModelParams(d1=d["d1"], d2=d["d2"], dL=d["dL"], tau=d["tau"], S0=d["S0"], **coefs)
    except ArgumentError as exc:
        raise ConfigError("range", str(exc)) from exc


def canonical_json(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def params_digest(p: ModelParams):
    return hashlib.sha256(canonical_json(params_to_dict(p)).encode()).hexdigest()


# ---------------------------------------------------------------------------
# atomic files
# ---------------------------------------------------------------------------

def atomic_write_bytes(path, data: bytes):
    """Write ``data`` to ``path`` via a temporary file and rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def format_value(v):
    """Round-trip representation: integers as such, floats with 17 digits."""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    return "%.17g" % float(v)


def csv_text(header, rows):
    lines = [",".join(header)]
    lines += [",".join(format_value(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def write_csv(path, header, rows):
    return atomic_write_bytes(path, csv_text(header, rows).encode())


def read_csv(path):
    """Return ``(header, rows)`` with numeric cells parsed as floats."""
    lines = Path(path).read_text().splitlines()
    header = lines[0].split(",")

    def parse(cell):
        try:
            return float(cell)
        except ValueError:
            return cell

    return header, [[parse(c) for c in line.split(",")] for line in lines[1:]]


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serialisable: {type(obj).__name__}")


def to_json(obj, indent=2):
    def clean(o):
        if isinstance(o, float) and not math.isfinite(o):
            return None if math.isnan(o) else ("inf" if o > 0 else "-inf")
        if isinstance(o, dict):
            return {k: clean(v) for k, v in o.items()}
        if isinstance(o, (list, tuple)):
            return [clean(v) for v in o]
        return o

    return json.dumps(clean(json.loads(json.dumps(obj, default=_json_default))),
                      indent=indent, sort_keys=True)


def write_json(path, obj):
    return atomic_write_bytes(path, (to_json(obj) + "\n").encode())


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------

def save_checkpoint(path, state, p: ModelParams):
    header = {
        "t": state.t, "t0": state.t0, "step_index": state.step_index, "dt": state.dt,
        "dx": state.dx, "x_min": float(state.x[0]), "n": int(state.n), "depth": int(state.depth),
        "head": 0, "history_start": None if math.isinf(state.history_start) else state.history_start,
        "warm": state.warm, "kernel_ell": state.kernel_ell, "convolution": state.convolution,
        "clamp_count": state.clamp_count, "params": params_to_dict(p),
        "params_sha256": params_digest(p),
    }
    hb = canonical_json(header).encode()
    body = b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes()
                    for a in (state.S, state.I, state.history()))
    return atomic_write_bytes(path, MAGIC + struct.pack("<I", len(hb)) + hb + body)


def load_checkpoint(path, p: ModelParams | None = None):
    """Return ``(state, params)``; if ``p`` is given its digest must match."""
    from .pde import FieldState, make_grid

    data = Path(path).read_bytes()
    if data[:8] != MAGIC:
        raise ArgumentError(f"{path}: not a checkpoint (bad magic)")
    (hlen,) = struct.unpack("<I", data[8:12])
    header = json.loads(data[12:12 + hlen])
    stored = params_from_dict(header["params"])
    if params_digest(stored) != header["params_sha256"]:
        raise ArgumentError(f"{path}: parameter digest mismatch (corrupt header)")
    if p is not None and params_digest(p) != header["params_sha256"]:
        raise ArgumentError(f"{path}: checkpoint was written for different parameters")
    n, depth = header["n"], header["depth"]
    arr = np.frombuffer(data, dtype="<f8", offset=12 + hlen)
    if arr.size != (2 + depth) * n:
        raise ArgumentError(f"{path}: truncated checkpoint body")
    x = make_grid(header["x_min"], header["x_min"] + header["dx"] * (n - 1), header["dx"])
    hs = header["history_start"]
    state = FieldState(
        t=header["t"], step_index=header["step_index"], x=x, dx=header["dx"], dt=header["dt"],
        S=arr[:n].astype(float), I=arr[n:2 * n].astype(float),
        ring=arr[2 * n:].reshape(depth, n).astype(float), head=0,
        history_start=-math.inf if hs is None else hs, warm=header["warm"],
        kernel_ell=header["kernel_ell"], convolution=header["convolution"],
        clamp_count=header["clamp_count"], t0=header["t0"])
    return state, stored
