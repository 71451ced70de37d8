import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from dgblock.io import (FormatError, atomic_write, csv_text, decode_matrices, encode_matrices,
                        fcidump_text, fmt, json_text, parse_fcidump, read_csv, read_matrices,
                        sha256, write_matrices)


def test_dgb1_layout():
    m = np.array([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]])
    data = encode_matrices([m])
    assert data[:4] == b"DGB1"
    assert struct.unpack("<ii", data[4:12]) == (2, 3)
    assert len(data) == 16 + 6 * 8
    assert np.frombuffer(data[16:], "<f8").tolist() == [1, 2, 3, 4, 5, 6]


def test_dgb1_errors():
    data = encode_matrices([np.eye(2)])
    with pytest.raises(FormatError):
        decode_matrices(b"XGB1" + data[4:])
    with pytest.raises(FormatError):
        decode_matrices(data[:-1])
    with pytest.raises(FormatError):
        decode_matrices(data[:10])
    with pytest.raises(FormatError):
        encode_matrices([np.zeros((2, 2, 2))])


def test_dgb1_file_round_trip(tmp_path):
    mats = [np.arange(6.0).reshape(2, 3), np.zeros((0, 4)), np.array([[np.pi]])]
    write_matrices(tmp_path / "x.dgb1", mats)
    back = read_matrices(tmp_path / "x.dgb1")
    assert [b.shape for b in back] == [(2, 3), (0, 4), (1, 1)]
    for a, b in zip(mats, back):
        np.testing.assert_array_equal(a, b)
    assert len(sha256(tmp_path / "x.dgb1")) == 64


@settings(max_examples=40, deadline=None)
@given(st.lists(arrays(np.float64, st.tuples(st.integers(0, 5), st.integers(0, 5)),
                       elements=st.floats(allow_nan=False)), max_size=4))
def test_dgb1_round_trip_property(mats):
    back = decode_matrices(encode_matrices(mats))
    assert len(back) == len(mats)
    for a, b in zip(mats, back):
        np.testing.assert_array_equal(a, b)


def physical_tensor(rng, n):
    """(ps|qr)-type tensor with the full 8-fold symmetry."""
    chem = rng.standard_normal((n, n, n, n))
    chem = chem + chem.transpose(1, 0, 2, 3)
    chem = chem + chem.transpose(0, 1, 3, 2)
    chem = chem + chem.transpose(2, 3, 0, 1)
    return chem.transpose(0, 2, 3, 1)


def test_fcidump_round_trip():
    rng = np.random.default_rng(0)
    n = 4
    a = rng.standard_normal((n, n))
    h = a + a.T
    v = physical_tensor(rng, n)
    text = fcidump_text(h, v, 0.75, 4)
    assert text.startswith(" &FCI NORB=4,NELEC=4,MS2=0,")
    d = parse_fcidump(text)
    np.testing.assert_allclose(d["h"], h, atol=1e-15)
    np.testing.assert_allclose(d["v"], v, atol=1e-15)
    assert d["core"] == 0.75 and d["nelec"] == 4 and d["norb"] == 4


def test_fcidump_chemist_convention():
    v = np.zeros((2, 2, 2, 2))
    v[0, 1, 1, 0] = v[1, 0, 0, 1] = 0.3  # (00|11)
    lines = fcidump_text(np.zeros((2, 2)), v, 0.0, 2).splitlines()
    body = {tuple(l.split()[1:]): float(l.split()[0]) for l in lines[4:]}
    assert body[("2", "2", "1", "1")] == 0.3
    assert len(body) == 2  # the integral and the core line


def test_fcidump_missing_end():
    with pytest.raises(FormatError):
        parse_fcidump(" &FCI NORB=1,\n")


def test_atomic_write_replaces(tmp_path):
    p = tmp_path / "sub" / "f.txt"
    atomic_write(p, "one")
    atomic_write(p, b"two")
    assert p.read_text() == "two"
    assert [x.name for x in p.parent.iterdir()] == ["f.txt"]


def test_csv_note_and_read(tmp_path):
    text = csv_text(["N", "x"], [[1, fmt(0.5)], [2, fmt(1.25)]], "x in hartree")
    assert text.splitlines()[0] == "# x in hartree"
    atomic_write(tmp_path / "t.csv", text)
    rows = read_csv(tmp_path / "t.csv")
    assert rows == [{"N": "1", "x": "5.0000000000e-01"}, {"N": "2", "x": "1.2500000000e+00"}]


def test_json_sorted():
    assert json_text({"b": 1, "a": [1, 2]}) == '{\n "a": [\n  1,\n  2\n ],\n "b": 1\n}\n'
