import json
import math
import struct

import numpy as np
import pytest

from conftest import make_params
from kmwave.coefficients import ModelParams, PeriodicFn
from kmwave.errors import ArgumentError, ConfigError
from kmwave.io import (MAGIC, atomic_write_bytes, coefficient_from_spec, csv_text,
                       load_checkpoint, params_digest, params_from_dict, params_to_dict,
                       read_csv, save_checkpoint, to_json, write_csv)
from kmwave.pde import Seed, init_state, simulate, step


def test_parameter_record_round_trip():
    p = ModelParams(1.0, 0.5, 0.7, 1.5, 1.2, PeriodicFn.cosine(2.0, 0.3, 3.0, 0.1),
                    PeriodicFn.tabulated([1.0, 1.2, 0.9, 1.1], 3.0),
                    PeriodicFn.constant(0.1, 3.0))
    q = params_from_dict(json.loads(json.dumps(params_to_dict(p))))
    assert params_to_dict(q) == params_to_dict(p)
    assert params_digest(q) == params_digest(p)
    assert params_digest(make_params(amplitude=0.2)) != params_digest(make_params(amplitude=0.3))


@pytest.mark.parametrize("spec,kind", [(True, "schema"), ("2", "schema"), ({"value": 1}, "schema"),
                                       ({"kind": "cosine"}, "schema"),
                                       ({"kind": "wavelet"}, "schema"),
                                       ({"kind": "cosine", "mean": 1, "amplitude": 1.5}, "range")])
def test_coefficient_spec_errors(spec, kind):
    with pytest.raises(ConfigError) as info:
        coefficient_from_spec(spec, 1.0)
    assert info.value.kind == kind


def test_csv_round_trip_is_exact(tmp_path):
    rows = [(0.1, 1 / 3, None), (2, math.pi, 1e-300)]
    path = write_csv(tmp_path / "t.csv", ("a", "b", "c"), rows)
    header, back = read_csv(path)
    assert header == ["a", "b", "c"]
    assert back[0][1] == 1 / 3 and back[1][1] == math.pi and back[1][2] == 1e-300
    assert csv_text(("a",), [(2,)]) == "a\n2\n"


def test_atomic_write_leaves_no_temporaries(tmp_path):
    atomic_write_bytes(tmp_path / "sub" / "f.bin", b"abc")
    atomic_write_bytes(tmp_path / "sub" / "f.bin", b"xyz")
    assert [p.name for p in (tmp_path / "sub").iterdir()] == ["f.bin"]
    assert (tmp_path / "sub" / "f.bin").read_bytes() == b"xyz"


def test_json_sanitises_non_finite_values():
    out = json.loads(to_json({"a": math.inf, "b": math.nan, "c": np.float64(1.5), "d": np.arange(2)}))
    assert out == {"a": "inf", "b": None, "c": 1.5, "d": [0, 1]}


def _warm_state(p):
    sn = simulate(p, (-20, 20, 0.2), Seed(), horizon=2.0, snapshot_every=1.0, dt=1 / 32)
    return sn.meta["state"]


def test_checkpoint_restart_is_bit_exact(tmp_path):
    p = make_params(amplitude=0.2)
    st = _warm_state(p)
    save_checkpoint(tmp_path / "a.ckpt", st, p)
    back, q = load_checkpoint(tmp_path / "a.ckpt", p)
    assert params_digest(q) == params_digest(p)
    np.testing.assert_array_equal(back.history(), st.history())
    for _ in range(40):
        step(st, p)
        step(back, p)
    np.testing.assert_array_equal(back.I, st.I)
    np.testing.assert_array_equal(back.S, st.S)
    assert back.t == st.t
    save_checkpoint(tmp_path / "b.ckpt", back, p)
    save_checkpoint(tmp_path / "c.ckpt", st, p)
    assert (tmp_path / "b.ckpt").read_bytes() == (tmp_path / "c.ckpt").read_bytes()


def test_checkpoint_layout(tmp_path):
    p = make_params()
    st = init_state(p, (-5, 5, 0.5), Seed(width=1), dt=0.25)
    data = save_checkpoint(tmp_path / "s.ckpt", st, p).read_bytes()
    assert data[:8] == MAGIC
    (hlen,) = struct.unpack("<I", data[8:12])
    header = json.loads(data[12:12 + hlen])
    n, depth = header["n"], header["depth"]
    body = np.frombuffer(data, "<f8", offset=12 + hlen)
    assert body.size == (2 + depth) * n
    np.testing.assert_array_equal(body[n:2 * n], st.I)


def test_checkpoint_rejections(tmp_path):
    p = make_params()
    st = init_state(p, (-5, 5, 0.5), Seed(width=1), dt=0.25)
    path = save_checkpoint(tmp_path / "s.ckpt", st, p)
    with pytest.raises(ArgumentError):
        load_checkpoint(path, make_params(beta=3.0))
    data = path.read_bytes()
    (tmp_path / "bad.ckpt").write_bytes(b"NOTACKPT" + data[8:])
    with pytest.raises(ArgumentError):
        load_checkpoint(tmp_path / "bad.ckpt")
    (tmp_path / "short.ckpt").write_bytes(data[:-8])
    with pytest.raises(ArgumentError):
        load_checkpoint(tmp_path / "short.ckpt")
