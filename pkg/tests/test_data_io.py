import json

import numpy as np
import pandas as pd
import pytest

from data_io import (BackgroundSpec, ColumnSpec, EncodingReport, aggregate_groups, decode_row, load_csv,
                     load_points_csv, load_queries, load_schema, quantile_edges, select_background)
from errors import DimensionMismatchError, SchemaError


@pytest.fixture
def dataset(data_dir):
    return load_csv(data_dir / "dataset.csv", data_dir / "schema.json")


def write_csv(path, text):
    path.write_text(text)
    return path


def test_fixture_encoding(dataset):
    assert dataset.rows == 120
    assert dataset.n == 1 + 14 + 4
    device = dataset.report.columns[1]
    assert device.levels[:4] == ["d00", "d05", "d10", "d01"]
    assert dataset.report.columns[2].edges == [1.5, 2.5, 3.5]
    # one hot bit per categorical and continuous group
    assert np.all(dataset.points[:, 1:15].sum(axis=1) == 1)
    assert np.all(dataset.points[:, 15:].sum(axis=1) == 1)
    assert not dataset.points.flags.writeable


def test_decode_first_rows(dataset):
    assert dataset.decode(0) == {"turbo": "1", "device": "d00", "load": 0}
    assert dataset.decode(2) == {"turbo": "0", "device": "d10", "load": 3}


def test_encoded_names(dataset):
    names = dataset.report.encoded_names()
    assert names[0] == "turbo"
    assert names[1] == "device=d00"
    assert names[-1] == "load[bin 3]"


@pytest.mark.parametrize("values,bins,expected", [
    ([1.0, 2.0, 3.0, 4.0], 2, [3.0]),
    ([5.0, 5.0, 5.0], 4, []),
    ([1.0, 1.0, 1.0, 2.0], 4, [2.0]),
    ([0.0, 1.0], 1, []),
])
def test_quantile_edges(values, bins, expected):
    assert quantile_edges(np.array(values), bins) == expected


def test_queries_use_stored_encoding(dataset, data_dir):
    queries = load_queries(data_dir / "queries.csv", dataset)
    assert queries.shape == (5, dataset.n)
    assert decode_row(queries[0], dataset.report) == {"turbo": "1", "device": "d03", "load": 0}
    assert decode_row(queries[2], dataset.report)["load"] == 3


def test_unknown_level_appends_column(dataset, tmp_path, caplog):
    path = write_csv(tmp_path / "q.csv", "turbo,device,load\n1,d99,2.0\n0,d00,0.5\n")
    points, report = dataset.encode(pd.read_csv(path, dtype=str), str(path))
    assert report.width == dataset.n + 1
    assert points[0, dataset.n] == 1
    assert points[1, dataset.n] == 0
    assert "unknown level" in caplog.text
    assert dataset.report.width == dataset.n


def test_malformed_numeric_reports_line(tmp_path, data_dir):
    path = write_csv(tmp_path / "bad.csv", "turbo,device,load\n1,a,0.5\n0,b,heavy\n")
    with pytest.raises(SchemaError) as info:
        load_csv(path, data_dir / "schema.json")
    assert info.value.line == 3
    assert info.value.exit_code == 2


def test_bad_binary_cell(tmp_path, data_dir):
    path = write_csv(tmp_path / "bad.csv", "turbo,device,load\n2,a,0.5\n")
    with pytest.raises(SchemaError) as info:
        load_csv(path, data_dir / "schema.json")
    assert info.value.line == 2


def test_column_mismatch(tmp_path, data_dir):
    path = write_csv(tmp_path / "bad.csv", "turbo,device\n1,a\n")
    with pytest.raises(SchemaError):
        load_csv(path, data_dir / "schema.json")


@pytest.mark.parametrize("payload,pointer", [
    ([], "/"),
    ([{"name": "", "kind": "binary"}], "/0/name"),
    ([{"name": "a", "kind": "ordinal"}], "/0/kind"),
    ([{"name": "a", "kind": "continuous", "bins": 0}], "/0/bins"),
    ([{"name": "a", "kind": "binary"}, {"name": "a", "kind": "binary"}], "/1/name"),
])
def test_schema_errors(tmp_path, payload, pointer):
    path = tmp_path / "schema.json"
    path.write_text(json.dumps(payload))
    with pytest.raises(SchemaError) as info:
        load_schema(path)
    assert info.value.path == pointer


def test_schema_defaults(data_dir):
    schema = load_schema(data_dir / "schema.json")
    assert schema[0] == ColumnSpec("turbo", "binary")
    assert schema[2].bins == 4


def test_report_round_trip(dataset, tmp_path):
    path = tmp_path / "encoding_report.json"
    dataset.report.save(path)
    assert EncodingReport.load(path) == dataset.report


def test_background_first_rows(dataset):
    background = select_background(dataset, BackgroundSpec(size=10))
    assert background.labels == list(range(10))
    np.testing.assert_array_equal(background.points, dataset.points[:10])


def test_background_random_is_seeded(dataset):
    a = select_background(dataset, BackgroundSpec("random", 10, seed=1))
    b = select_background(dataset, BackgroundSpec("random", 10, seed=1))
    c = select_background(dataset, BackgroundSpec("random", 10, seed=2))
    assert a.labels == b.labels
    assert a.labels != c.labels
    assert len(set(a.labels)) == 10


def test_background_too_large(dataset):
    with pytest.raises(ValueError):
        select_background(dataset, BackgroundSpec(size=121))
    with pytest.raises(ValueError):
        BackgroundSpec(strategy="kmeans")


def test_load_points_csv(tmp_path):
    path = write_csv(tmp_path / "pts.csv", "x0,x1,x2\n1,0,1\n0,0,0\n")
    np.testing.assert_array_equal(load_points_csv(path, 3), [[1, 0, 1], [0, 0, 0]])
    with pytest.raises(DimensionMismatchError):
        load_points_csv(path, 4)
    assert load_points_csv(write_csv(tmp_path / "empty.csv", "x0,x1\n")).shape == (0, 2)
    with pytest.raises(SchemaError) as info:
        load_points_csv(write_csv(tmp_path / "bad.csv", "x0,x1\n0,1\n1,7\n"))
    assert info.value.line == 3


def test_aggregate_groups(dataset):
    phi = np.arange(2 * dataset.n, dtype=float).reshape(2, dataset.n)
    frame = aggregate_groups(phi, dataset.report)
    assert list(frame.columns) == ["query_id", "column", "phi"]
    assert len(frame) == 6
    first = frame[frame.query_id == 0].set_index("column")["phi"]
    assert first["turbo"] == 0.0
    assert first["device"] == sum(range(1, 15))
    assert first["load"] == sum(range(15, 19))
    assert np.isclose(frame[frame.query_id == 1].phi.sum(), phi[1].sum())
    with pytest.raises(DimensionMismatchError):
        aggregate_groups(np.zeros(3), dataset.report)
