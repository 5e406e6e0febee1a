import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linprog

from rankadmm.data_io import (
    RawDataset,
    SyntheticSpec,
    generate_synthetic,
    load_csv,
    load_libsvm,
    save_libsvm,
    split,
    standardize,
)
from rankadmm.errors import DataFormatError, InvalidParameterError


def test_libsvm_parse_example(tmp_path):
    path = tmp_path / "data.txt"
    path.write_text("+1 1:2 3:-1\n-1 2:5\n")
    ds = load_libsvm(path)
    assert ds.X.shape == (2, 3)
    assert ds.X.toarray() == pytest.approx(np.array([[2.0, 0, -1], [0, 5, 0]]))
    assert ds.y == pytest.approx([1, -1])


def test_libsvm_zero_one_labels(tmp_path):
    path = tmp_path / "data.txt"
    path.write_text("1 1:1\n0 1:-1\n")
    assert load_libsvm(path).y == pytest.approx([1, -1])


def test_libsvm_empty_file_errors(tmp_path):
    path = tmp_path / "empty.txt"
    path.write_text("")
    with pytest.raises(DataFormatError):
        load_libsvm(path)


def test_libsvm_malformed_reports_line(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("+1 1:2\n-1 oops\n")
    with pytest.raises(DataFormatError, match="line 2"):
        load_libsvm(path)
    path.write_text("+1 0:2\n")
    with pytest.raises(DataFormatError, match="line 1"):
        load_libsvm(path)


def test_libsvm_roundtrip(tmp_path, rng):
    X = rng.standard_normal((7, 5))
    X[rng.random((7, 5)) < 0.6] = 0.0
    X[0, -1] = 1.25  # pin the last column so the width survives
    y = rng.choice([-1.0, 1.0], size=7)
    ds = RawDataset(sp.csr_matrix(X), y)
    path = tmp_path / "round.txt"
    save_libsvm(ds, path)
    back = load_libsvm(path)
    assert back.X.shape == (7, 5)
    assert back.X.toarray() == pytest.approx(X, abs=0.0)
    assert np.array_equal(back.y, y)


@given(st.text(alphabet="01:+-. abc\n", max_size=200))
@settings(max_examples=120, deadline=None)
def test_libsvm_never_crashes_unstructured(tmp_path_factory, text):
    path = tmp_path_factory.mktemp("fuzz") / "f.txt"
    path.write_text(text)
    try:
        ds = load_libsvm(path)
        assert set(np.unique(ds.y)) <= {-1.0, 1.0}
    except DataFormatError:
        pass


def test_csv_loader(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("y,f1,f2\n1,0.5,-1\n-1,2,3\n")
    ds = load_csv(path)
    assert ds.X == pytest.approx(np.array([[0.5, -1], [2, 3]]))
    assert ds.y == pytest.approx([1, -1])
    path.write_text("y,f1\n")
    with pytest.raises(DataFormatError):
        load_csv(path)


def test_synthetic_separable_when_clean():
    ds = generate_synthetic(SyntheticSpec(n=100, d=20, class_sep=10.0,
                                          flip_fraction=0.0, seed=0))
    # feasibility program: margins y x.w >= 1 has a solution
    A = -(ds.y[:, None] * ds.X)
    res = linprog(c=np.zeros(20), A_ub=A, b_ub=-np.ones(100),
                  bounds=[(None, None)] * 20, method="highs")
    assert res.success


def test_synthetic_deterministic():
    spec = SyntheticSpec(n=50, d=6, seed=123)
    a = generate_synthetic(spec)
    b = generate_synthetic(spec)
    assert np.array_equal(a.X, b.X)
    assert np.array_equal(a.y, b.y)


def test_synthetic_label_balance():
    ds = generate_synthetic(SyntheticSpec(n=2000, d=3, seed=7))
    positives = int(np.sum(ds.y > 0))
    half_width = 2.576 * np.sqrt(2000 * 0.25)  # 99% binomial interval
    assert abs(positives - 1000) <= half_width


def test_synthetic_validation():
    with pytest.raises(InvalidParameterError):
        SyntheticSpec(n=0, d=3)
    with pytest.raises(InvalidParameterError):
        SyntheticSpec(n=3, d=3, flip_fraction=0.5)


def test_split_all_train():
    ds = generate_synthetic(SyntheticSpec(n=10, d=2, seed=1))
    (train,) = split(ds, (1.0,), seed=0)
    assert train.sample_count == 10


def test_split_deterministic_partition():
    ds = generate_synthetic(SyntheticSpec(n=10, d=2, seed=1))
    train, test = split(ds, (0.6, 0.4), seed=5)
    train2, test2 = split(ds, (0.6, 0.4), seed=5)
    assert train.sample_count == 6 and test.sample_count == 4
    assert np.array_equal(train.X, train2.X)
    assert np.array_equal(test.X, test2.X)


def test_split_union_disjoint():
    ds = generate_synthetic(SyntheticSpec(n=37, d=2, seed=2))
    parts = split(ds, (0.5, 0.25, 0.25), seed=3)
    rows = np.vstack([p.X for p in parts])
    assert rows.shape[0] == 37
    # every original row appears exactly once
    original = {tuple(row) for row in ds.X}
    recovered = [tuple(row) for row in rows]
    assert len(recovered) == len(set(recovered))
    assert set(recovered) == original


def test_split_fraction_validation():
    ds = generate_synthetic(SyntheticSpec(n=10, d=2, seed=1))
    with pytest.raises(InvalidParameterError):
        split(ds, (0.6, 0.3), seed=0)


def test_standardize_constant_feature():
    X = np.array([[1.0, 2.0], [1.0, 4.0], [1.0, 6.0]])
    ds = RawDataset(X, np.array([1.0, -1.0, 1.0]))
    (out,) = standardize(ds)
    assert out.X[:, 0] == pytest.approx([0.0, 0.0, 0.0])
    assert out.X[:, 1].mean() == pytest.approx(0.0, abs=1e-12)
    assert out.X[:, 1].std() == pytest.approx(1.0)


def test_standardize_uses_train_statistics():
    train = RawDataset(np.array([[0.0], [2.0]]), np.array([1.0, -1.0]))
    test = RawDataset(np.array([[4.0]]), np.array([1.0]))
    tr, te = standardize(train, test)
    # train mean 1, std 1: test row maps to (4 - 1) / 1 = 3
    assert te.X == pytest.approx(np.array([[3.0]]))
    assert abs(tr.X.mean()) <= 1e-12
