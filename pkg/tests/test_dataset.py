import numpy as np
import pytest

from featloop.dataset import (BadFoldCount, ColumnKind, DuplicateColumnName,
                              EmptyDataset, IngestOptions, LengthMismatch,
                              MissingLabelColumn, NonFiniteExtra,
                              UnparseableLabelValue, encode_matrix, ingest_csv,
                              make_folds, MISSING_CATEGORY)


def write_csv(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


BASIC = "x,A,B\n1.5,1,0\n2.0,0,1\n3.5,1,1\n4.0,0,0\n"


def test_ingest_basic(tmp_path):
    ds = ingest_csv(write_csv(tmp_path, BASIC), ["A", "B"])
    assert ds.n == 4
    assert ds.feature_names == ("x",)
    assert ds.labels.label_names == ("A", "B")
    assert ds.columns[0].kind is ColumnKind.NUMERIC
    assert np.array_equal(ds.labels.y, [[1, 0], [0, 1], [1, 1], [0, 0]])


def test_mixed_tokens_column_is_categorical(tmp_path):
    ds = ingest_csv(write_csv(tmp_path, "x,A,B\n1,1,0\n2,0,1\noops,1,1\n"), ["A", "B"])
    assert ds.columns[0].kind is ColumnKind.CATEGORICAL
    assert ds.columns[0].values == ("1", "2", "oops")


def test_label_synonyms(tmp_path):
    text = "x,A,B\n1,true,NO\n2,False,yes\n"
    ds = ingest_csv(write_csv(tmp_path, text), ["A", "B"])
    assert np.array_equal(ds.labels.y, [[1, 0], [0, 1]])


def test_unparseable_label_value(tmp_path):
    with pytest.raises(UnparseableLabelValue) as exc:
        ingest_csv(write_csv(tmp_path, "x,A,B\n1,2,0\n2,1,1\n"), ["A", "B"])
    assert exc.value.row == 0
    assert exc.value.column == "A"


def test_missing_label_column(tmp_path):
    with pytest.raises(MissingLabelColumn):
        ingest_csv(write_csv(tmp_path, BASIC), ["A", "Z"])


def test_duplicate_headers(tmp_path):
    with pytest.raises(DuplicateColumnName):
        ingest_csv(write_csv(tmp_path, "x,x,A,B\n1,2,1,0\n"), ["A", "B"])


def test_empty_file(tmp_path):
    with pytest.raises(EmptyDataset):
        ingest_csv(write_csv(tmp_path, "x,A,B\n"), ["A", "B"])


def test_median_imputation_and_missing_counts(tmp_path):
    text = "x,f,A,B\n1.0,LE3,1,0\n,GT3,0,1\n3.0,,1,1\n5.0,GT3,0,0\n"
    ds = ingest_csv(write_csv(tmp_path, text), ["A", "B"])
    x = ds.column("x")
    assert x.kind is ColumnKind.NUMERIC
    assert x.values[1] == 3.0  # median of {1, 3, 5}
    f = ds.column("f")
    assert f.values[2] == MISSING_CATEGORY
    assert ds.raw_missing_counts == {"x": 1, "f": 1}
    assert ds.n == 4  # imputation never drops rows


def test_na_token_option(tmp_path):
    text = "x;A;B\n1;1;0\nNA;0;1\n3;1;1\n"
    ds = ingest_csv(write_csv(tmp_path, text),
                    ["A", "B"], IngestOptions(delimiter=";", na_token="NA"))
    assert ds.column("x").kind is ColumnKind.NUMERIC
    assert ds.column("x").values[1] == 2.0


def test_ingest_idempotent(tmp_path):
    p = write_csv(tmp_path, BASIC)
    a = ingest_csv(p, ["A", "B"])
    b = ingest_csv(p, ["A", "B"])
    assert a.feature_names == b.feature_names
    assert all(ca.values == cb.values and ca.kind == cb.kind
               for ca, cb in zip(a.columns, b.columns))
    assert np.array_equal(a.labels.y, b.labels.y)


def test_sample_rows_keep_raw_tokens(tmp_path):
    ds = ingest_csv(write_csv(tmp_path, BASIC), ["A", "B"])
    assert ds.sample_header == ("x", "A", "B")
    assert ds.sample_rows[0] == ("1.5", "1", "0")
    assert len(ds.sample_rows) == 4


# --------------------------------------------------------------------- folds

def make_ds(tmp_path, n):
    rows = "".join(f"{i},{i % 2},{(i + 1) % 2}\n" for i in range(n))
    return ingest_csv(write_csv(tmp_path, "x,A,B\n" + rows), ["A", "B"])


def test_folds_deterministic(tmp_path):
    ds = make_ds(tmp_path, 6)
    p1 = make_folds(ds, 3, 7)
    p2 = make_folds(ds, 3, 7)
    assert p1.assignments == p2.assignments


def test_folds_round_robin_sizes(tmp_path):
    ds = make_ds(tmp_path, 6)
    for seed in (0, 1, 99):
        plan = make_folds(ds, 3, seed)
        counts = np.bincount(plan.assignments, minlength=3)
        assert list(counts) == [2, 2, 2]


def test_folds_partition(tmp_path):
    ds = make_ds(tmp_path, 11)
    plan = make_folds(ds, 4, 3)
    seen = np.concatenate([plan.fold_indices(f) for f in range(4)])
    assert sorted(seen) == list(range(11))


def test_bad_fold_count(tmp_path):
    ds = make_ds(tmp_path, 3)
    with pytest.raises(BadFoldCount):
        make_folds(ds, 5, 0)
    with pytest.raises(BadFoldCount):
        make_folds(ds, 1, 0)


# ------------------------------------------------------------- encode_matrix

def test_first_appearance_codes(tmp_path):
    text = "f,A,B\na,1,0\nb,0,1\na,1,1\nc,0,0\n"
    ds = ingest_csv(write_csv(tmp_path, text), ["A", "B"])
    m = encode_matrix(ds)
    assert list(m[:, 0]) == [0.0, 1.0, 0.0, 2.0]


def test_encode_width_and_extras(tmp_path):
    ds = ingest_csv(write_csv(tmp_path, BASIC), ["A", "B"])
    assert encode_matrix(ds).shape == (4, 1)
    m = encode_matrix(ds, [np.ones(4)])
    assert m.shape == (4, 2)
    assert np.isfinite(m).all()


def test_encode_errors(tmp_path):
    ds = ingest_csv(write_csv(tmp_path, BASIC), ["A", "B"])
    with pytest.raises(LengthMismatch):
        encode_matrix(ds, [np.ones(3)])
    with pytest.raises(NonFiniteExtra):
        encode_matrix(ds, [np.array([1.0, np.nan, 0.0, 2.0])])
