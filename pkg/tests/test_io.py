import numpy as np
import pytest

from misscausal import io
from misscausal.imputer import init_imnet, imnet_forward
from misscausal.numcore import Tensor


def test_adjacency_round_trip(tmp_path):
    A = np.array([[0, 1, 0], [0, 0, 1], [0, 0, 0]])
    p = tmp_path / "g.csv"
    io.write_adjacency(p, A)
    assert p.read_text() == "0,1,0\n0,0,1\n0,0,0\n"
    assert np.array_equal(io.read_adjacency(p), A)


def test_adjacency_accepts_float_zero_one(tmp_path):
    p = tmp_path / "g.csv"
    p.write_text("0.0,1.0\n0,0\n")
    assert io.read_adjacency(p).tolist() == [[0, 1], [0, 0]]


@pytest.mark.parametrize("text, match", [
    ("", "empty"),
    ("0,1\n0\n", "square"),
    ("0,2\n0,0\n", "row 1, column 2"),
    ("0,x\n0,0\n", "not 0/1"),
])
def test_adjacency_errors(tmp_path, text, match):
    p = tmp_path / "bad.csv"
    p.write_text(text)
    with pytest.raises(io.FormatError, match=match):
        io.read_adjacency(p)


def test_matrix_round_trip_is_exact(tmp_path):
    X = np.random.default_rng(0).normal(size=(5, 3)) * 1e-7
    p = tmp_path / "m.csv"
    io.write_matrix(p, X)
    assert np.array_equal(io.read_matrix(p), X)
    io.write_matrix(p, X, header=["a", "b", "c"])
    assert p.read_text().startswith("a,b,c\n")


def test_checkpoint_round_trip(tmp_path, rng):
    groups = {"g": {"w": Tensor(rng.normal(size=(3, 2))), "b": np.arange(4.0)}}
    p = tmp_path / "c.json"
    io.save_checkpoint(p, groups, {"epoch": 3})
    back, meta = io.load_checkpoint(p)
    assert meta == {"epoch": 3}
    assert np.array_equal(back["g"]["w"], groups["g"]["w"].data)
    assert back["g"]["b"].shape == (4,)


def test_checkpoint_rejects_foreign_files(tmp_path):
    p = tmp_path / "c.json"
    p.write_text("not json")
    with pytest.raises(io.FormatError, match="JSON"):
        io.load_checkpoint(p)
    p.write_text('{"format": "other", "version": 1}')
    with pytest.raises(io.FormatError, match="format"):
        io.load_checkpoint(p)
    p.write_text('{"format": "misscausal-checkpoint", "version": 99}')
    with pytest.raises(io.FormatError, match="version"):
        io.load_checkpoint(p)


def test_imnet_round_trip(tmp_path, rng):
    params = init_imnet(3, rng, -np.ones(3), 2 * np.ones(3))
    p = tmp_path / "imnet.json"
    io.save_imnet(p, params)
    back = io.load_imnet(p)
    X = rng.normal(size=(4, 3))
    M = np.ones((4, 3))
    M[0, 0] = 0
    assert np.array_equal(imnet_forward(X, M, back).data, imnet_forward(X, M, params).data)
    io.save_checkpoint(p, {"other": {}})
    with pytest.raises(io.FormatError, match="ImNet"):
        io.load_imnet(p)


def test_trace_columns(tmp_path):
    row = {c: 0.5 for c in io.TRACE_COLUMNS}
    row.update(epoch=0, is_dag=True, edges=2)
    p = tmp_path / "t.csv"
    io.write_trace(p, [row])
    header, line = p.read_text().splitlines()
    assert header.split(",") == list(io.TRACE_COLUMNS)
    cells = dict(zip(io.TRACE_COLUMNS, line.split(",")))
    assert (cells["epoch"], cells["is_dag"], cells["edges"]) == ("0", "1", "2")
    assert float(cells["reward"]) == 0.5
