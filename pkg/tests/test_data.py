import numpy as np
import pytest

from shapbench.data import (
    CONTINUOUS,
    ORDINAL,
    DataFormatError,
    Dataset,
    Standardizer,
    SyntheticSpec,
    load_csv,
    load_dataset,
    load_monks,
    load_wbc,
    make_synthetic,
    save_dataset,
    split,
)


def _write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_csv_relabels_strings(tmp_path):
    ds = load_csv(_write(tmp_path, "f1,f2,label\n1,2,a\n3,4,b\n5,6,a\n"), "label")
    np.testing.assert_array_equal(ds.y, [0, 1, 0])
    assert ds.n_classes == 2 and ds.label_mapping == ["a", "b"]
    assert ds.feature_names == ["f1", "f2"]


def test_csv_drops_missing_rows(tmp_path):
    ds = load_csv(_write(tmp_path, "f1,f2,y\n1,2,0\n?,4,1\n5,6,1\n7,,0\n"), "y")
    assert ds.n_dropped == 2 and ds.n_samples == 2


def test_csv_single_missing_cell(tmp_path):
    ds = load_csv(_write(tmp_path, "f1,f2,y\n1,2,0\n?,4,1\n5,6,1\n"), "y")
    assert ds.n_dropped == 1


def test_csv_reports_bad_cell(tmp_path):
    with pytest.raises(DataFormatError, match="row 3, column 'f2'"):
        load_csv(_write(tmp_path, "f1,f2,y\n1,2,0\n3,abc,1\n"), "y")


def test_csv_ragged_row(tmp_path):
    with pytest.raises(DataFormatError, match="row 2"):
        load_csv(_write(tmp_path, "f1,f2,y\n1,0\n3,4,1\n"), "y")


def test_csv_single_class_rejected(tmp_path):
    with pytest.raises(DataFormatError):
        load_csv(_write(tmp_path, "f1,y\n1,0\n2,0\n"), "y")


def test_csv_delimiter_and_ordinal(tmp_path):
    ds = load_csv(_write(tmp_path, "a;b;y\n1;2;x\n3;4;z\n"), "y", delimiter=";", ordinal_columns=["a"])
    assert ds.feature_kinds == [ORDINAL, CONTINUOUS]


def test_monks_line_mapping(tmp_path):
    p = _write(tmp_path, " 1 1 1 1 1 3 1 data_1\n 0 1 1 1 1 3 2 data_2\n", "m.data")
    ds = load_monks(p)
    assert ds.n_features == 6
    np.testing.assert_array_equal(ds.X[0], [1, 1, 1, 1, 3, 1])
    assert ds.label_mapping[ds.y[0]] == "1"


def test_monks_bundled_fixture():
    ds = load_monks()
    assert ds.n_features == 6 and ds.n_samples == 432
    assert all(k == ORDINAL for k in ds.feature_kinds)


def test_monks_split_matches_reference_counts():
    sp = split(load_monks(), 0.3, seed=0)
    assert (sp.train.n_samples, sp.val.n_samples) == (302, 130)


def test_monks_bad_line(tmp_path):
    with pytest.raises(DataFormatError):
        load_monks(_write(tmp_path, "1 1 1\n", "bad.data"))


def test_wbc_fixture_split():
    ds = load_wbc()
    assert ds.n_features == 9 and ds.n_samples == 546 and ds.n_dropped == 3
    sp = split(ds, 0.2, seed=0)
    assert (sp.train.n_samples, sp.val.n_samples) == (436, 110)


def test_split_stratified_and_deterministic():
    y = np.array([0] * 50 + [1] * 50)
    ds = Dataset("bal", np.arange(100, dtype=float)[:, None], y, ["f"], 2)
    a = split(ds, 0.3, seed=4)
    b = split(ds, 0.3, seed=4)
    assert (a.train.n_samples, a.val.n_samples) == (70, 30)
    counts = np.bincount(a.val.y)
    assert abs(counts[0] - 15) <= 1 and abs(counts[1] - 15) <= 1
    np.testing.assert_array_equal(a.val_rows, b.val_rows)
    assert not set(a.val_rows) & set(a.train_rows)


def test_standardizer_fit_on_train_only():
    sp = split(load_wbc(), 0.2, seed=1)
    np.testing.assert_allclose(sp.train.X.mean(axis=0), 0, atol=1e-12)
    back = Standardizer.from_dict(sp.standardizer.to_dict())
    np.testing.assert_array_equal(back.transform(sp.val.X), sp.standardizer.transform(sp.val.X))


def test_standardizer_constant_column():
    ds = Dataset("c", np.array([[1.0, 2.0], [1.0, 4.0], [1.0, 6.0]]), np.array([0, 1, 0]), ["a", "b"], 2)
    st = Standardizer.fit(ds)
    assert np.all(np.isfinite(st.transform(ds.X)))


def test_synthetic_deterministic_bytes():
    a, wa = make_synthetic(SyntheticSpec(4, 200, "linear", seed=3))
    b, wb = make_synthetic(SyntheticSpec(4, 200, "linear", seed=3))
    assert a.X.tobytes() == b.X.tobytes() and a.y.tobytes() == b.y.tobytes()
    np.testing.assert_array_equal(wa, wb)


def test_synthetic_generators():
    for gen in ("xor-like", "gaussian-mixture"):
        ds, w = make_synthetic(SyntheticSpec(3, 100, gen, seed=0))
        assert w is None and set(np.unique(ds.y)) == {0, 1}
    with pytest.raises(ValueError):
        make_synthetic(SyntheticSpec(30, 10, "linear"))
    ds, w = make_synthetic(SyntheticSpec(30, 10, "linear", with_oracle=False))
    assert ds.n_features == 30


def test_synthetic_true_weights():
    ds, w = make_synthetic(SyntheticSpec(2, 50, "linear", seed=0, true_weights=np.array([2.0, 3.0])))
    np.testing.assert_array_equal(w, [2.0, 3.0])


def test_dataset_save_load_round_trip(tmp_path):
    ds = load_wbc()
    back = load_dataset(save_dataset(ds, tmp_path / "wbc"))
    assert back.X.tobytes() == ds.X.tobytes()
    assert back.content_hash() == ds.content_hash()
