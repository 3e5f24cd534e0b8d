import json

import jsonschema
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import array_shapes, arrays

from vpl_limit.hermite_macro import TrajectoryFrame
from vpl_limit.serialization import (
    MAGIC,
    load_schema,
    output_name,
    read_csv,
    read_snapshot,
    read_trajectory,
    to_jsonable,
    validate_json,
    write_csv,
    write_json,
    write_snapshot,
    write_trajectory,
)

SCHEMAS = ["run_summary", "sweep_report", "pp_report", "kernel_bounds", "boltzmann_slopes",
           "macro_summary", "nondim"]


def test_output_name():
    assert output_name("pp-solve", 7) == "pp_solve_7"
    assert output_name("simulate", 0, "diagnostics", "csv") == "simulate_0_diagnostics.csv"


class TestSnapshot:
    @given(arrays(np.float64, array_shapes(max_dims=4, max_side=5),
                  elements=st.floats(allow_nan=False, width=64)))
    def test_roundtrip(self, a):
        import tempfile
        from pathlib import Path

        with tempfile.TemporaryDirectory() as d:
            p = Path(d) / "x.snap"
            write_snapshot(p, {"a": a, "b": np.arange(3.0)}, {"k": 1})
            fields, meta = read_snapshot(p)
        np.testing.assert_array_equal(fields["a"], a)
        assert meta == {"k": 1}

    def test_magic(self, tmp_path):
        p = write_snapshot(tmp_path / "s.snap", {"a": np.ones(2)})
        assert p.read_bytes()[:8] == MAGIC
        bad = tmp_path / "bad.snap"
        bad.write_bytes(b"nonsense" * 4)
        with pytest.raises(ValueError):
            read_snapshot(bad)

    def test_trajectory(self, tmp_path):
        rng = np.random.default_rng(0)
        frames = [TrajectoryFrame(0.1 * k, rng.random((4, 8, 8, 8)), rng.random(4), 1.0 + k,
                                  rng.random(4), rng.random((4, 8, 8, 8)) if k else None)
                  for k in range(3)]
        write_trajectory(tmp_path / "t.snap", frames, {"eps": 0.1})
        back, meta = read_trajectory(tmp_path / "t.snap")
        assert meta["eps"] == 0.1 and len(back) == 3
        assert back[0].F_plus is None
        np.testing.assert_array_equal(back[2].F_plus, frames[2].F_plus)
        assert back[1].gamma == 2.0

    def test_unwritable(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("x")
        with pytest.raises(OSError, match="file"):
            write_snapshot(blocker / "sub" / "s.snap", {"a": np.ones(1)})


class TestCSV:
    def test_format(self, tmp_path):
        p = write_csv(tmp_path / "a.csv", ["t", "x", "n"], [(0.1, 1 / 3, 2), {"t": 0.2, "x": True, "n": 3}])
        lines = p.read_text().split("\n")
        assert lines[0] == "t,x,n"
        assert lines[1] == "0.10000000000000001,0.33333333333333331,2"
        assert lines[2] == "0.20000000000000001,1,3"
        assert b"\r" not in p.read_bytes()

    def test_row_length(self, tmp_path):
        with pytest.raises(ValueError):
            write_csv(tmp_path / "a.csv", ["a", "b"], [(1,)])

    @given(st.lists(st.floats(allow_nan=False, allow_infinity=False), min_size=1, max_size=20))
    def test_lossless(self, xs):
        import tempfile
        from pathlib import Path

        with tempfile.TemporaryDirectory() as d:
            cols, data = read_csv(write_csv(Path(d) / "f.csv", ["x"], [(x,) for x in xs]))
        assert cols == ["x"]
        np.testing.assert_array_equal(data[:, 0], np.array(xs))


class TestJSON:
    def test_to_jsonable(self):
        out = to_jsonable({"a": np.float64(np.nan), "b": np.arange(2), "c": (np.int64(3), True)})
        assert out == {"a": None, "b": [0, 1], "c": [3, True]}
        with pytest.raises(TypeError):
            to_jsonable({"x": object()})

    @pytest.mark.parametrize("name", SCHEMAS)
    def test_schemas_are_valid(self, name):
        schema = load_schema(name)
        jsonschema.Draft202012Validator.check_schema(schema)

    def test_write_validates(self, tmp_path):
        with pytest.raises(jsonschema.ValidationError):
            write_json(tmp_path / "x.json", {"nonsense": 1}, "nondim")
        assert not (tmp_path / "x.json").exists()

    def test_sorted_output(self, tmp_path):
        p = write_json(tmp_path / "x.json", {"b": 1, "a": float("inf")})
        assert p.read_text() == '{\n  "a": null,\n  "b": 1\n}\n'
        assert json.loads(p.read_text()) == {"a": None, "b": 1}

