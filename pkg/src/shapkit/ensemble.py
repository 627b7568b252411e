"""Ensembles of small exact SHAPs over random feature subsets.

Three explainers share one engine: pick ``t`` of the ``m`` features per
member, enumerate the ``2**t`` coalitions of that subset exactly (everything
else held at the background mean) and combine the per-member values.

* ``er_shap``: uniform subsets, plain averaging over the members that
  selected each feature.
* ``erw_shap``: each member explains a Gaussian neighbour ``h_k`` of ``x``,
  weighted by ``exp(-||h_k - x||^2)``.
* ``er_shap_rf``: subsets drawn from a feature distribution obtained from a
  random forest fitted to model-labelled neighbours of ``x``.
"""
from __future__ import annotations

import dataclasses
import json
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ._seeding import derive_seed, rng_for
from .data import Dataset, generate_neighbors
from .errors import ConfigError
from .forest import ForestConfig, fit_forest, impurity_importance, temperature_scale
from .shapley import (
    ValueFunctionContext,
    hybrid_matrix,
    predict_rows,
    shapley_from_values,
)

log = logging.getLogger(__name__)

COMBINERS = ("mean", "weighted-mean", "max", "min")
# temperature applied when the forest leaves fewer than t features selectable
FALLBACK_TEMPERATURE = 0.5


@dataclass(frozen=True)
class ExplainerConfig:
    n: int = 50
    t: Optional[int] = None  # None -> ceil(sqrt(m))
    combiner: Optional[str] = None  # None -> the method's own rule
    sigma: float = 0.01  # ERW neighbour noise
    rf_sigma: float = 0.1  # ER-SHAP-RF neighbour noise
    temperature: Optional[float] = None
    neighbors: int = 200
    seed: int = 0
    forest: ForestConfig = field(default_factory=ForestConfig)
    keep_members: bool = True

    def __post_init__(self):
        if self.n < 1:
            raise ConfigError("n (ensemble size) must be >= 1")
        if self.t is not None and self.t < 1:
            raise ConfigError("t must be >= 1")
        if self.combiner is not None and self.combiner not in COMBINERS:
            raise ConfigError(f"unknown combiner {self.combiner!r}; choose from {COMBINERS}")
        if self.sigma < 0 or self.rf_sigma < 0:
            raise ConfigError("noise standard deviations must be >= 0")
        if self.temperature is not None and not self.temperature > 0:
            raise ConfigError("temperature must be > 0")
        if self.neighbors < 1:
            raise ConfigError("neighbors must be >= 1")

    def features_per_member(self, m: int) -> int:
        t = self.t if self.t is not None else math.ceil(math.sqrt(m))
        if t > m:
            raise ConfigError(f"t={t} exceeds the number of features m={m}")
        return t


@dataclass
class MemberRecord:
    index: int
    active: tuple
    phi: np.ndarray
    point: Optional[np.ndarray] = None
    weight: float = 1.0

    def to_dict(self):
        d = {"index": self.index, "active": list(self.active),
             "phi": [float(v) for v in self.phi], "weight": self.weight}
        if self.point is not None:
            d["point"] = [float(v) for v in self.point]
        return d


@dataclass
class EnsembleReport:
    phi: np.ndarray
    base: float
    selection_counts: np.ndarray
    weight_sums: np.ndarray
    unobserved: np.ndarray
    model_calls: int
    wall_time_ms: float
    method: str
    feature_names: tuple
    members: Optional[list] = None
    feature_distribution: Optional[np.ndarray] = None

    def full(self, m=None) -> np.ndarray:
        return self.phi

    def to_dict(self) -> dict:
        d = {
            "base": self.base,
            "features": [
                {"index": i, "name": self.feature_names[i], "phi": float(v)}
                for i, v in enumerate(self.phi)
            ],
            "model_calls": int(self.model_calls),
            "method": self.method,
            "selection_counts": [int(c) for c in self.selection_counts],
            "unobserved": [int(i) for i in np.nonzero(self.unobserved)[0]],
            "wall_time_ms": self.wall_time_ms,
        }
        if self.feature_distribution is not None:
            d["feature_distribution"] = [float(p) for p in self.feature_distribution]
        if self.members is not None:
            d["members"] = [rec.to_dict() for rec in self.members]
        return d

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def selection_counts(members: Sequence[MemberRecord], m: int):
    """Per-feature selection counts ``N_i`` and weight sums ``W_i``."""
    counts = np.zeros(m, dtype=np.int64)
    weights = [[] for _ in range(m)]
    for rec in members:
        for i in rec.active:
            counts[i] += 1
            weights[i].append(rec.weight)
    return counts, np.array([math.fsum(w) for w in weights])


def combine(members: Sequence[MemberRecord], rule: str = "mean", m: Optional[int] = None) -> np.ndarray:
    """Fold member values into one length-``m`` vector.

    Unselected features get 0. Sums are exactly rounded (``math.fsum``) over
    members sorted by index, so the result does not depend on list order.
    """
    if not members:
        raise ConfigError("combine needs at least one member")
    if rule not in COMBINERS:
        raise ConfigError(f"unknown combiner {rule!r}")
    if m is None:
        m = max(max(rec.active) for rec in members) + 1
    per_feature = [[] for _ in range(m)]
    for rec in sorted(members, key=lambda r: r.index):
        for i, v in zip(rec.active, rec.phi):
            per_feature[i].append((float(v), rec.weight))
    phi = np.zeros(m)
    for i, items in enumerate(per_feature):
        if not items:
            continue
        vals = [v for v, _ in items]
        if rule == "mean":
            phi[i] = math.fsum(vals) / len(vals)
        elif rule == "weighted-mean":
            phi[i] = math.fsum(v * w for v, w in items) / math.fsum(w for _, w in items)
        elif rule == "max":
            phi[i] = max(vals)
        else:
            phi[i] = min(vals)
    return phi


def _uniform_subset(rng, m, t):
    return tuple(sorted(int(i) for i in rng.choice(m, size=t, replace=False)))


def _weighted_subset(rng, p, t):
    """``t`` distinct indices by successive draws, renormalising after each."""
    p = np.array(p, dtype=float)
    chosen = []
    for _ in range(t):
        cdf = np.cumsum(p)
        u = rng.random() * cdf[-1]
        i = int(np.searchsorted(cdf, u, side="right"))
        i = min(i, p.shape[0] - 1)
        while p[i] == 0.0:  # u landed on a boundary of a zero-mass cell
            i -= 1
        chosen.append(i)
        p[i] = 0.0
    return tuple(sorted(chosen))


def _run_members(contexts, subsets, weights, points, m):
    """Evaluate all members' hybrids in one batched pass and solve each."""
    blocks = []
    for ctx, J in zip(contexts, subsets):
        masks = np.arange(1 << len(J), dtype=np.int64)
        blocks.append(hybrid_matrix(ctx, np.array(J), masks))
    v_all = predict_rows(contexts[0].model, np.vstack(blocks))
    members = []
    base = None
    offset = 0
    for k, (J, block) in enumerate(zip(subsets, blocks)):
        v = v_all[offset:offset + block.shape[0]]
        offset += block.shape[0]
        if base is None:
            base = float(v[0])
        members.append(MemberRecord(k, J, shapley_from_values(v, len(J)),
                                    points[k], weights[k]))
    return members, base, int(v_all.shape[0])


def _report(method, ctx, members, base, calls, rule, start, keep, distribution=None):
    m = ctx.m
    counts, wsums = selection_counts(members, m)
    phi = combine(members, rule, m)
    return EnsembleReport(
        phi=phi,
        base=base,
        selection_counts=counts,
        weight_sums=wsums,
        unobserved=counts == 0,
        model_calls=calls,
        wall_time_ms=(time.perf_counter() - start) * 1e3,
        method=method,
        feature_names=ctx.feature_names,
        members=members if keep else None,
        feature_distribution=distribution,
    )


def er_shap(ctx: ValueFunctionContext, config: ExplainerConfig = ExplainerConfig()) -> EnsembleReport:
    """Average of ``n`` exact SHAPs over uniformly random ``t``-feature subsets."""
    start = time.perf_counter()
    m = ctx.m
    t = config.features_per_member(m)
    subsets = [_uniform_subset(rng_for(config.seed, "subset", k), m, t) for k in range(config.n)]
    members, base, calls = _run_members(
        [ctx] * config.n, subsets, [1.0] * config.n, [None] * config.n, m
    )
    return _report("er-shap", ctx, members, base, calls, config.combiner or "mean",
                   start, config.keep_members)


def neighbor_weight(h, x) -> float:
    d = np.asarray(h, dtype=float) - np.asarray(x, dtype=float)
    return math.exp(-math.fsum(d * d))


def erw_shap(ctx: ValueFunctionContext, config: ExplainerConfig = ExplainerConfig()) -> EnsembleReport:
    """Like ``er_shap`` but member ``k`` explains a noisy neighbour ``h_k``.

    Subsets come from the same RNG streams as ``er_shap``, so with
    ``sigma=0`` the two agree bit for bit.
    """
    start = time.perf_counter()
    m = ctx.m
    t = config.features_per_member(m)
    subsets, points, weights, contexts = [], [], [], []
    for k in range(config.n):
        subsets.append(_uniform_subset(rng_for(config.seed, "subset", k), m, t))
        h = generate_neighbors(ctx.x, 1, config.sigma, rng_for(config.seed, "neighbor", k))[0]
        points.append(h)
        weights.append(neighbor_weight(h, ctx.x))
        contexts.append(ctx.recentered(h))
    members, base, calls = _run_members(contexts, subsets, weights, points, m)
    return _report("erw-shap", ctx, members, base, calls, config.combiner or "weighted-mean",
                   start, config.keep_members)


def rf_feature_distribution(ctx: ValueFunctionContext, config: ExplainerConfig):
    """Fit a forest on model-labelled neighbours of ``x``.

    Returns the (optionally temperature-scaled) feature distribution, the
    fitted forest and the number of model calls spent labelling.
    """
    m = ctx.m
    H = generate_neighbors(ctx.x, config.neighbors, config.rf_sigma,
                           rng_for(config.seed, "rf-neighbors"))
    y = ctx.model.predict(H)
    forest_cfg = dataclasses.replace(config.forest, seed=derive_seed(config.seed, "rf-forest"))
    forest = fit_forest(Dataset(H, ctx.feature_names, y), forest_cfg)
    p = impurity_importance(forest)
    if config.temperature is not None:
        p = temperature_scale(p, config.temperature)
    return p, forest, H.shape[0]


def er_shap_rf(ctx: ValueFunctionContext, config: ExplainerConfig = ExplainerConfig(),
               data: Optional[Dataset] = None) -> EnsembleReport:
    """ER-SHAP with subsets drawn from a forest-derived feature distribution.

    ``data`` is accepted for interface symmetry; background statistics come
    from ``ctx``. The forest is trained on ``config.neighbors`` Gaussian
    neighbours of ``x`` (std ``config.rf_sigma``) labelled by the model.
    """
    start = time.perf_counter()
    m = ctx.m
    t = config.features_per_member(m)
    p, _, label_calls = rf_feature_distribution(ctx, config)
    if np.count_nonzero(p) < t:
        log.warning(
            "feature distribution has %d non-zero entries but t=%d; "
            "smoothing with temperature %s", np.count_nonzero(p), t, FALLBACK_TEMPERATURE,
        )
        p = temperature_scale(p, FALLBACK_TEMPERATURE)
    subsets = [_weighted_subset(rng_for(config.seed, "subset", k), p, t) for k in range(config.n)]
    members, base, calls = _run_members(
        [ctx] * config.n, subsets, [1.0] * config.n, [None] * config.n, m
    )
    return _report("er-shap-rf", ctx, members, base, calls + label_calls,
                   config.combiner or "mean", start, config.keep_members, p)
