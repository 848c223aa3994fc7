import json

import numpy as np
import pytest

from carleman_qr.errors import FieldError
from carleman_qr.grid import build_grid
from carleman_qr.io import read_field_csv, write_field_csv, write_json, write_rows_csv


def test_field_roundtrip_is_exact(tmp_path, rng):
    g = build_grid(13)
    u = rng.normal(size=g.shape) * 10.0 ** rng.integers(-12, 12, size=g.shape)
    write_field_csv(tmp_path / "u.csv", g, u)
    g2, u2 = read_field_csv(tmp_path / "u.csv")
    assert g2.shape == g.shape
    np.testing.assert_array_equal(u2, u)
    np.testing.assert_allclose(g2.x, g.x, atol=1e-15)


def test_field_csv_layout(tmp_path):
    g = build_grid(3)
    write_field_csv(tmp_path / "u.csv", g, np.arange(9.0).reshape(3, 3))
    lines = (tmp_path / "u.csv").read_text().splitlines()
    assert lines[0] == "x,y,value"
    assert lines[1] == "-1.0,-1.0,0.0"
    assert lines[2] == "-1.0,0.0,1.0"


def test_non_tensor_csv_rejected(tmp_path):
    (tmp_path / "bad.csv").write_text("x,y,value\n0,0,1\n1,0,2\n1,1,3\n")
    with pytest.raises(FieldError, match="tensor grid"):
        read_field_csv(tmp_path / "bad.csv")


def test_rows_and_json(tmp_path):
    write_rows_csv(tmp_path / "h.csv", ["n", "inc"], [(0, None), (1, 0.5)])
    assert (tmp_path / "h.csv").read_text().splitlines() == ["n,inc", "0,", "1,0.5"]
    write_json(tmp_path / "a.json", {"b": np.float64(1.5), "a": np.arange(2)})
    text = (tmp_path / "a.json").read_text()
    assert json.loads(text) == {"a": [0, 1], "b": 1.5}
    assert text.index('"a"') < text.index('"b"')
