"""Exact Shapley values by coalition enumeration, plus two sampling baselines.

Removed features are replaced by background means. A coalition over an
active index set ``J`` is a bitmask: bit ``b`` set means feature ``J[b]``
keeps its value from the explained instance.
"""
from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .blackbox import BlackBoxModel
from .errors import ConfigError, DegenerateDesignError, DimensionError, EnumerationLimitError

log = logging.getLogger(__name__)

ENUMERATION_CAP = 20
# rows per model call when evaluating hybrids
PREDICT_CHUNK = 1 << 16


@dataclass(frozen=True)
class ValueFunctionContext:
    model: BlackBoxModel
    x: np.ndarray
    background: np.ndarray
    feature_names: Optional[tuple] = None

    def __post_init__(self):
        m = self.model.feature_count
        x = np.array(self.x, dtype=float).reshape(-1)
        bg = np.array(self.background, dtype=float).reshape(-1)
        if x.shape[0] != m or bg.shape[0] != m:
            raise DimensionError(
                f"model takes {m} features; x has {x.shape[0]}, background {bg.shape[0]}"
            )
        x.setflags(write=False)
        bg.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "background", bg)
        names = self.feature_names
        if names is None:
            names = tuple(f"x{i + 1}" for i in range(m))
        elif len(names) != m:
            raise DimensionError(f"{len(names)} feature names for {m} features")
        object.__setattr__(self, "feature_names", tuple(names))

    @property
    def m(self) -> int:
        return self.x.shape[0]

    def recentered(self, h) -> "ValueFunctionContext":
        """Same model and background, explaining ``h`` instead of ``x``."""
        return ValueFunctionContext(self.model, h, self.background, self.feature_names)


@dataclass(frozen=True)
class CoalitionSpec:
    active: tuple
    subset: tuple

    def __post_init__(self):
        active = tuple(sorted(int(i) for i in self.active))
        subset = tuple(sorted(int(i) for i in self.subset))
        if len(set(active)) != len(active) or len(set(subset)) != len(subset):
            raise ConfigError("coalition indices must be unique")
        if not set(subset) <= set(active):
            raise ConfigError("subset must be contained in the active set")
        object.__setattr__(self, "active", active)
        object.__setattr__(self, "subset", subset)


@dataclass
class ShapleyResult:
    indices: np.ndarray
    values: np.ndarray
    base: float
    model_calls: int
    wall_time_ms: float = 0.0
    method: str = "exact"
    feature_names: Optional[tuple] = None
    feature_count: Optional[int] = None

    def full(self, m: Optional[int] = None) -> np.ndarray:
        """Length-``m`` vector, zeros for features outside the active set."""
        m = m or self.feature_count
        out = np.zeros(m)
        out[self.indices] = self.values
        return out

    @property
    def phi(self) -> np.ndarray:
        return self.full()

    def to_dict(self) -> dict:
        names = self.feature_names
        return {
            "base": self.base,
            "features": [
                {"index": int(i), "name": names[i] if names else f"x{i + 1}", "phi": float(v)}
                for i, v in zip(self.indices, self.values)
            ],
            "model_calls": int(self.model_calls),
            "method": self.method,
            "wall_time_ms": self.wall_time_ms,
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def shapley_coefficient(s_size: int, n_size: int) -> float:
    """``|S|! (|N|-|S|-1)! / |N|!`` via log-gamma; exact enough for any size."""
    if n_size < 1 or not 0 <= s_size <= n_size - 1:
        raise ConfigError(f"need 0 <= s_size < n_size, got ({s_size}, {n_size})")
    return math.exp(
        math.lgamma(s_size + 1) + math.lgamma(n_size - s_size) - math.lgamma(n_size + 1)
    )


def _coefficients(n: int) -> np.ndarray:
    # 1 / (n * C(n-1, s)), exact integer binomials
    return np.array([1.0 / (n * math.comb(n - 1, s)) for s in range(n)])


def _check_active(ctx, J) -> np.ndarray:
    J = np.array(sorted(int(j) for j in J), dtype=np.intp)
    if J.size == 0:
        raise ConfigError("active set is empty")
    if len(set(J.tolist())) != J.size or J[0] < 0 or J[-1] >= ctx.m:
        raise ConfigError(f"active indices must be unique and in [0, {ctx.m})")
    return J


def hybrid_matrix(ctx: ValueFunctionContext, J, masks) -> np.ndarray:
    """Rows are ``background`` with the coalition's features copied from ``x``."""
    J = np.asarray(J, dtype=np.intp)
    masks = np.asarray(masks, dtype=np.int64)
    H = np.tile(ctx.background, (masks.shape[0], 1))
    keep = ((masks[:, None] >> np.arange(J.size, dtype=np.int64)) & 1).astype(bool)
    H[:, J] = np.where(keep, ctx.x[J], ctx.background[J])
    return H


def predict_rows(model: BlackBoxModel, H: np.ndarray) -> np.ndarray:
    if H.shape[0] <= PREDICT_CHUNK:
        return model.predict(H)
    return np.concatenate(
        [model.predict(H[i:i + PREDICT_CHUNK]) for i in range(0, H.shape[0], PREDICT_CHUNK)]
    )


def value_function(ctx: ValueFunctionContext, spec: CoalitionSpec) -> float:
    """Model output with features in ``spec.subset`` from ``x``, all others at the mean."""
    h = ctx.background.copy()
    idx = list(spec.subset)
    h[idx] = ctx.x[idx]
    return float(ctx.model.predict(h[None, :])[0])


def shapley_from_values(v: np.ndarray, t: int) -> np.ndarray:
    """Shapley values from a full table ``v[mask]`` of ``2**t`` coalition values."""
    masks = np.arange(1 << t, dtype=np.int64)
    sizes = np.zeros(masks.shape[0], dtype=np.intp)
    for b in range(t):
        sizes += (masks >> b) & 1
    w = _coefficients(t)[np.minimum(sizes, t - 1)]
    phi = np.empty(t)
    for b in range(t):
        bit = np.int64(1) << b
        without = masks[(masks & bit) == 0]
        phi[b] = np.dot(w[without], v[without | bit] - v[without])
    return phi


def exact_shapley(ctx: ValueFunctionContext, J=None, cap: int = ENUMERATION_CAP) -> ShapleyResult:
    """Exact Shapley values over the active features ``J`` (default: all).

    All ``2**|J|`` hybrids are built once and predicted in one batch; each
    feature's value then reads from that table.
    """
    start = time.perf_counter()
    J = _check_active(ctx, range(ctx.m) if J is None else J)
    t = J.size
    if t > cap:
        raise EnumerationLimitError(
            f"{t} active features means 2^{t} model calls (cap is 2^{cap}); "
            "use kernel_shap_baseline, permutation_shapley or an ensemble explainer"
        )
    masks = np.arange(1 << t, dtype=np.int64)
    v = predict_rows(ctx.model, hybrid_matrix(ctx, J, masks))
    phi = shapley_from_values(v, t)
    return ShapleyResult(
        J, phi, float(v[0]), int(masks.shape[0]),
        (time.perf_counter() - start) * 1e3, "exact", ctx.feature_names, ctx.m,
    )


def _evaluate_unique(ctx, J, masks):
    uniq, inverse = np.unique(masks, return_inverse=True)
    v = predict_rows(ctx.model, hybrid_matrix(ctx, J, uniq))
    return v[inverse.reshape(-1)], uniq.shape[0]


def permutation_shapley(ctx: ValueFunctionContext, J=None, permutation_count: int = 100,
                        seed: int = 0) -> ShapleyResult:
    """Monte Carlo over uniformly random orderings of ``J``.

    Coalition values are memoised per explanation, so ``model_calls`` counts
    distinct coalitions and never exceeds ``permutation_count * (|J| + 1)``.
    """
    if permutation_count < 1:
        raise ConfigError("permutation_count must be >= 1")
    start = time.perf_counter()
    J = _check_active(ctx, range(ctx.m) if J is None else J)
    t = J.size
    if t > 62:
        raise EnumerationLimitError("bitmask coalitions support at most 62 active features")
    rng = np.random.default_rng(seed)
    orders = np.stack([rng.permutation(t) for _ in range(permutation_count)])
    bits = np.int64(1) << orders.astype(np.int64)
    prefix = np.concatenate(
        [np.zeros((permutation_count, 1), dtype=np.int64), np.cumsum(bits, axis=1)], axis=1
    )
    v, calls = _evaluate_unique(ctx, J, prefix.reshape(-1))
    v = v.reshape(prefix.shape)
    marginal = np.diff(v, axis=1)
    totals = np.zeros(t)
    np.add.at(totals, orders.reshape(-1), marginal.reshape(-1))
    phi = totals / permutation_count
    return ShapleyResult(
        J, phi, float(v[0, 0]), int(calls), (time.perf_counter() - start) * 1e3,
        "permutation", ctx.feature_names, ctx.m,
    )


def kernel_shap_baseline(ctx: ValueFunctionContext, J=None, sample_count: int = 2048,
                         seed: int = 0) -> ShapleyResult:
    """Kernel SHAP: Shapley-kernel weighted least squares with the efficiency constraint.

    When the budget covers every non-trivial coalition they are all used with
    their exact kernel weights, and the result is exact. Otherwise coalition
    sizes are drawn in proportion to their total kernel weight, members
    uniformly within the size, each paired with its complement.
    """
    start = time.perf_counter()
    J = _check_active(ctx, range(ctx.m) if J is None else J)
    t = J.size
    if sample_count < t + 2:
        raise ConfigError(f"sample_count must be >= |J| + 2 = {t + 2}")
    if t > 62:
        raise EnumerationLimitError("bitmask coalitions support at most 62 active features")
    full = (np.int64(1) << t) - 1

    if t == 1:
        v = predict_rows(ctx.model, hybrid_matrix(ctx, J, np.array([0, 1])))
        return ShapleyResult(J, np.array([v[1] - v[0]]), float(v[0]), 2,
                             (time.perf_counter() - start) * 1e3, "kernel",
                             ctx.feature_names, ctx.m)

    if t < 62 and sample_count >= (1 << t) - 2:
        masks = np.arange(1, int(full), dtype=np.int64)
        sizes = _popcount(masks, t)
        weights = (t - 1) / (np.array([math.comb(t, int(s)) for s in sizes]) * sizes * (t - sizes))
    else:
        rng = np.random.default_rng(seed)
        s_vals = np.arange(1, t)
        size_p = (t - 1) / (s_vals * (t - s_vals))
        size_p = size_p / size_p.sum()
        drawn = []
        for _ in range((sample_count + 1) // 2):
            s = int(rng.choice(s_vals, p=size_p))
            members = rng.choice(t, size=s, replace=False)
            mask = int(np.sum(np.int64(1) << members.astype(np.int64)))
            drawn.extend((mask, int(full) ^ mask))
        masks, weights = np.unique(np.array(drawn[:sample_count], dtype=np.int64),
                                   return_counts=True)
        weights = weights.astype(float)

    ends = predict_rows(ctx.model, hybrid_matrix(ctx, J, np.array([0, int(full)])))
    v_empty, v_full = float(ends[0]), float(ends[1])
    v = predict_rows(ctx.model, hybrid_matrix(ctx, J, masks))
    Z = ((masks[:, None] >> np.arange(t, dtype=np.int64)) & 1).astype(float)

    # eliminate the last coefficient with sum(phi) = v_full - v_empty
    delta = v_full - v_empty
    y = (v - v_empty) - Z[:, -1] * delta
    A = Z[:, :-1] - Z[:, [-1]]
    sw = np.sqrt(weights)
    Aw = A * sw[:, None]
    if np.linalg.matrix_rank(Aw) < t - 1:
        raise DegenerateDesignError(
            f"sampled coalitions do not identify all {t} values; increase sample_count"
        )
    head, *_ = np.linalg.lstsq(Aw, y * sw, rcond=None)
    phi = np.append(head, delta - head.sum())
    return ShapleyResult(J, phi, v_empty, int(masks.shape[0] + 2),
                         (time.perf_counter() - start) * 1e3, "kernel",
                         ctx.feature_names, ctx.m)


def _popcount(masks, t):
    out = np.zeros(masks.shape[0], dtype=np.int64)
    for b in range(t):
        out += (masks >> b) & 1
    return out
