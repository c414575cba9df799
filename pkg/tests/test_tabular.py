import numpy as np

from swarmtrack.tabular import fmt, write_csv, write_matrix_csv


def test_fmt_round_trips_doubles():
    rng = np.random.default_rng(8)
    for _ in range(500):
        value = float(rng.standard_normal() * 10.0 ** rng.integers(-12, 12))
        assert float(fmt(value)) == value


def test_fmt_integers_and_bools():
    assert fmt(3) == "3"
    assert fmt(np.int64(7)) == "7"
    assert fmt(True) == "1"
    assert fmt(np.bool_(False)) == "0"
    assert fmt(60.0) == "60"
    assert fmt(np.float64(0.2)) == "0.20000000000000001"
    assert float("0.20000000000000001") == 0.2


def test_write_csv_layout(tmp_path):
    path = tmp_path / "t.csv"
    write_csv(path, ("a", "b"), [(1, 0.5), (2, 1.0 / 3.0)])
    lines = path.read_text().splitlines()
    assert lines[0] == "a,b"
    assert lines[1] == "1,0.5"
    assert float(lines[2].split(",")[1]) == 1.0 / 3.0


def test_write_matrix_csv(tmp_path):
    path = tmp_path / "m.csv"
    write_matrix_csv(path, np.array([[1, 0], [0, 1]], dtype=np.int8))
    assert path.read_text() == "1,0\n0,1\n"
