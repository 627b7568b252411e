import logging

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import shapkit as sk
from shapkit.errors import ConfigError, DimensionError
from shapkit.metrics import CSV_HEADER, concordance_counts

from oracles import euclid_oracle, pair_counts

vectors = st.integers(2, 10).flatmap(
    lambda m: st.tuples(
        st.lists(st.integers(-3, 3).map(float), min_size=m, max_size=m),
        st.lists(st.floats(-5, 5, allow_nan=False), min_size=m, max_size=m),
    )
)


def test_identical_vectors():
    v = [0.3, -1.0, 2.0]
    assert sk.concordance_index(v, v) == 1.0
    assert sk.normalized_euclidean(v, v) == 0.0


def test_reversed_order():
    assert sk.concordance_index([1, 2, 3], [3, 2, 1]) == 0.0


def test_scale_invariance():
    a = np.array([0.1, -0.4, 0.9, 0.2])
    assert sk.normalized_euclidean(a, 7 * a + 3) == pytest.approx(0.0, abs=1e-15)
    assert sk.concordance_index(a, 7 * a + 3) == 1.0


def test_ties_get_half_credit():
    assert concordance_counts([1, 1, 2], [1, 2, 3]) == (2, 0, 1)
    assert sk.concordance_index([1, 1, 2], [1, 2, 3]) == pytest.approx(2.5 / 3)


def test_constant_vector_warns(caplog):
    with caplog.at_level(logging.WARNING):
        e = sk.normalized_euclidean([1, 1, 1], [0, 0.5, 1])
    assert "constant" in caplog.text
    assert e == pytest.approx(np.sqrt(0.5 / 3))


def test_length_mismatch():
    with pytest.raises(DimensionError):
        sk.concordance_index([1, 2], [1, 2, 3])
    with pytest.raises(DimensionError):
        sk.concordance_index([1], [1])


@settings(max_examples=200)
@given(vectors)
def test_matches_oracle(pair):
    a, b = pair
    assert concordance_counts(a, b) == pair_counts(a, b)
    assert abs(sk.normalized_euclidean(a, b) - euclid_oracle(a, b)) <= 1e-12


@given(vectors)
def test_bounds(pair):
    a, b = pair
    assert 0.0 <= sk.concordance_index(a, b) <= 1.0
    assert 0.0 <= sk.normalized_euclidean(a, b) <= 1.0 + 1e-15


def test_compare_and_cost(linear_ctx):
    ref = sk.exact_shapley(linear_ctx)
    cand = sk.er_shap(linear_ctx, sk.ExplainerConfig(n=3, t=1))
    res = sk.compare(ref, cand)
    assert res.call_ratio == cand.model_calls / ref.model_calls
    assert len(res.csv_row()) == len(CSV_HEADER)


def test_cost_ratio_zero_reference():
    class R:
        model_calls = 0
        wall_time_ms = 1.0
    with pytest.raises(ConfigError):
        sk.cost_ratio(R(), R())
