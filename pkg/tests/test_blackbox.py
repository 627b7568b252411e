import threading

import numpy as np
import pytest

import shapkit as sk
from shapkit.blackbox import model_from_dict, rbf_kernel
from shapkit.errors import ConfigError, DataError, DimensionError


def test_linear_model():
    m = sk.LinearModel([1.0, -2.0], intercept=0.5)
    np.testing.assert_array_equal(m.predict([[1, 1], [0, 0]]), [-0.5, 0.5])
    assert m.predict(np.zeros((0, 2))).shape == (0,)


def test_dimension_errors():
    m = sk.LinearModel([1.0, 2.0])
    with pytest.raises(DimensionError, match="3"):
        m.predict([[1, 2, 3]])
    with pytest.raises(DimensionError):
        m.predict([1, 2])


def test_function_model_output_length():
    bad = sk.FunctionModel(lambda X: np.zeros(1), 2)
    with pytest.raises(DimensionError):
        bad.predict(np.zeros((3, 2)))


def test_counting_model_thread_safe():
    c = sk.CountingModel(sk.LinearModel([1.0]))

    def work():
        for _ in range(100):
            c.predict(np.zeros((3, 1)))

    threads = [threading.Thread(target=work) for _ in range(4)]
    for th in threads:
        th.start()
    for th in threads:
        th.join()
    assert (c.rows, c.calls) == (1200, 400)
    c.reset()
    assert c.rows == 0


def test_rbf_kernel_values():
    K = rbf_kernel(np.array([[0.0, 0.0]]), np.array([[1.0, 1.0], [0.0, 0.0]]), 0.5)
    np.testing.assert_allclose(K, [[np.exp(-1.0), 1.0]])


def test_rbf_classifier_separates(linear_data):
    model = sk.train_rbf_classifier(linear_data, gamma=2.0, lam=1e-3)
    acc = np.mean((model.predict(linear_data.X) > 0.5) == linear_data.y)
    assert acc > 0.97
    cls = sk.train_rbf_classifier(linear_data, gamma=2.0, lam=1e-3, output="class")
    assert set(np.unique(cls.predict(linear_data.X))) <= {0.0, 1.0}


def test_rbf_constant_labels():
    d = sk.Dataset(np.random.default_rng(0).normal(size=(5, 2)), y=np.ones(5))
    model = sk.train_rbf_classifier(d, 1.0, 1e-3)
    np.testing.assert_array_equal(model.predict(np.zeros((2, 2))), [1.0, 1.0])


@pytest.mark.parametrize("gamma, lam", [(0.0, 1.0), (1.0, 0.0)])
def test_rbf_bad_hyperparameters(gamma, lam):
    d = sk.generate_synthetic("linear", 10, seed=0)
    with pytest.raises(ConfigError):
        sk.train_rbf_classifier(d, gamma, lam)


def test_rbf_rejects_non_binary_labels():
    d = sk.Dataset(np.zeros((3, 1)), y=[0, 1, 2])
    with pytest.raises((ConfigError, DataError)):
        sk.train_rbf_classifier(d, 1.0, 1.0)


def test_save_load_round_trip(tmp_path, linear_data, rbf_model):
    forest = sk.fit_forest(linear_data, sk.ForestConfig(n_trees=3))
    for model in (sk.LinearModel([1.0, 2.0, 0, 0, 3.0], 1.0), rbf_model, forest):
        path = tmp_path / "model.json"
        sk.save_model(model, path)
        back = sk.load_model(path)
        np.testing.assert_array_equal(back.predict(linear_data.X), model.predict(linear_data.X))


def test_unknown_model_kind():
    with pytest.raises(ValueError):
        model_from_dict({"kind": "svm"})
