import numpy as np
import pytest

from parity.data import DataError, DataMatrix, ingest_csv, log_returns

WELL_FORMED = """date,A,B
2020-01-01,0.01,0.02
2020-01-02,-0.01,0.00
2020-01-03,0.03,-0.02
2020-01-06,0.00,0.01
2020-01-07,0.02,0.02
"""


def write(tmp_path, text, name="in.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_well_formed_csv(tmp_path):
    d = ingest_csv(write(tmp_path, WELL_FORMED), min_rows=1)
    assert (d.n, d.t) == (2, 5)
    assert d.labels == ("A", "B")
    assert d.dates[0] == "2020-01-01"
    assert d.dropped_rows == 0


def test_empty_cell_row_dropped(tmp_path):
    text = WELL_FORMED.replace("-0.01,0.00", "-0.01,")
    d = ingest_csv(write(tmp_path, text), min_rows=1)
    assert d.t == 4 and d.dropped_rows == 1


def test_unparseable_cell_reports_position(tmp_path):
    text = WELL_FORMED.replace("0.03,-0.02", "0.03,abc")
    with pytest.raises(DataError, match=r"row 4, column 'B'"):
        ingest_csv(write(tmp_path, text), min_rows=1)


def test_too_few_rows(tmp_path):
    with pytest.raises(DataError, match="usable rows"):
        ingest_csv(write(tmp_path, WELL_FORMED))


def test_prices_reduce_length_by_one(tmp_path):
    text = "date,P\n" + "\n".join(f"2020-01-{i + 1:02d},{100 + i}" for i in range(6)) + "\n"
    d = ingest_csv(write(tmp_path, text), prices=True, min_rows=1)
    assert d.t == 5
    assert d.values[0, 0] == pytest.approx(np.log(101 / 100))


def test_missing_column(tmp_path):
    with pytest.raises(DataError, match="not found"):
        ingest_csv(write(tmp_path, WELL_FORMED), columns=["A", "Z"], min_rows=1)


def test_validate_rules():
    with pytest.raises(DataError, match="more observations"):
        DataMatrix(np.ones((3, 3)), ["a", "b", "c"]).validate()
    v = np.random.default_rng(0).standard_normal((2, 10))
    v[1] = 1.0
    with pytest.raises(DataError, match="'b'"):
        DataMatrix(v, ["a", "b"]).validate()


def test_log_returns_need_positive_prices():
    with pytest.raises(DataError):
        log_returns(DataMatrix(np.array([[1.0, 0.0, 2.0]]), ["p"]))
