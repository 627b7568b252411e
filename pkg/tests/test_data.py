import numpy as np
import pytest

import shapkit as sk
from shapkit.data import PATTERNS
from shapkit.errors import DataError


def test_paper_instance():
    np.testing.assert_array_equal(sk.paper_instance(), [0.25] * 5)


@pytest.mark.parametrize("name", PATTERNS)
def test_synthetic_patterns(name):
    d = sk.generate_synthetic(name, 2000, seed=4)
    assert d.X.shape == (2000, 5)
    assert d.provenance == f"synthetic:{name}"
    assert np.all(np.abs(d.X) <= 1)
    assert set(np.unique(d.y)) <= {0.0, 1.0}
    # every pattern yields both classes in usable proportions
    assert 0.2 < d.y.mean() < 0.8
    # labels depend on the first two features only
    Z = d.X.copy()
    Z[:, 2:] = 0
    np.testing.assert_array_equal(sk.SyntheticPattern(name).label(Z), d.y)


def test_synthetic_reproducible():
    a = sk.generate_synthetic("saw", 50, seed=3)
    b = sk.generate_synthetic("saw", 50, seed=3)
    np.testing.assert_array_equal(a.X, b.X)


def test_pattern_params():
    p = sk.SyntheticPattern("stripe", {"width": 0.1})
    assert list(p.label(np.array([[0, 0.05], [0, 0.2]]))) == [1.0, 0.0]
    with pytest.raises(DataError):
        sk.SyntheticPattern("spiral")
    with pytest.raises(DataError):
        sk.SyntheticPattern("stripe", {"teeth": 3})


def test_checkerboard_cells():
    p = sk.SyntheticPattern("checkerboard", {"cells": 2})
    lab = p.label(np.array([[-0.5, -0.5], [0.5, -0.5], [0.5, 0.5]]))
    assert lab[0] == lab[2] != lab[1]


def test_dataset_validation():
    with pytest.raises(DataError):
        sk.Dataset(np.zeros((3, 2)), ("a", "a"))
    with pytest.raises(DataError):
        sk.Dataset(np.zeros((3, 2)), ("a", "b"), y=np.zeros(2))
    d = sk.Dataset(np.zeros((3, 2)))
    assert d.names == ("x1", "x2")
    assert not d.X.flags.writeable


def test_shuffle_split():
    d = sk.generate_synthetic("linear", 100, seed=0)
    train, test = d.shuffle_split(0.25, seed=1)
    assert (train.n, test.n) == (75, 25)
    rows = {tuple(r) for r in np.vstack([train.X, test.X])}
    assert rows == {tuple(r) for r in d.X}


def test_csv_round_trip(tmp_path):
    d = sk.generate_synthetic("wedge", 30, seed=2)
    d = sk.Dataset(d.X, d.names, d.y, "label")
    path = tmp_path / "d.csv"
    sk.save_csv(d, path)
    back = sk.load_csv(path, "label")
    np.testing.assert_array_equal(back.X, d.X)
    np.testing.assert_array_equal(back.y, d.y)
    assert back.names == d.names


def test_csv_bad_cell(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a,b\n1,2\n3,oops\n")
    with pytest.raises(DataError, match="row 2, column b"):
        sk.load_csv(path)


@pytest.mark.parametrize("text, label", [
    ("a,b\n1,2\n3\n", None),
    ("", None),
    ("a,b\n1,2\n", "y"),
])
def test_csv_malformed(tmp_path, text, label):
    path = tmp_path / "bad.csv"
    path.write_text(text)
    with pytest.raises(DataError):
        sk.load_csv(path, label)


def test_background_means():
    d = sk.Dataset(np.array([[1.0, 2.0], [3.0, 6.0]]))
    np.testing.assert_array_equal(sk.background_means(d), [2.0, 4.0])


def test_neighbors():
    x = np.array([0.1, 0.2, 0.3])
    H = sk.generate_neighbors(x, 5000, 0.1, 7)
    assert H.shape == (5000, 3)
    np.testing.assert_allclose(H.mean(0), x, atol=0.01)
    np.testing.assert_allclose(H.std(0), 0.1, rtol=0.05)
    np.testing.assert_array_equal(sk.generate_neighbors(x, 3, 0.0, 1), np.tile(x, (3, 1)))
