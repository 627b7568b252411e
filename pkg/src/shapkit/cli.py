"""Command-line front end: ``shapkit {explain,compare,sweep,bench}``."""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import shlex
import statistics
import sys
import tempfile
import time
from pathlib import Path

import numpy as np

from ._seeding import derive_seed
from .blackbox import ExternalModel, load_model, train_rbf_classifier
from .data import (
    PATTERNS,
    generate_synthetic,
    load_csv,
    paper_instance,
    background_means,
)
from .ensemble import COMBINERS, ExplainerConfig, er_shap, er_shap_rf, erw_shap
from .errors import ConfigError, ShapkitError
from .forest import ForestConfig, fit_forest
from .metrics import CSV_HEADER, compare
from .shapley import (
    ENUMERATION_CAP,
    ValueFunctionContext,
    exact_shapley,
    kernel_shap_baseline,
    permutation_shapley,
)

log = logging.getLogger("shapkit")

EXPLAINERS = ("exact", "kernel", "perm", "er-shap", "erw-shap", "er-shap-rf")


def _int_list(text):
    try:
        vals = [int(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not vals:
        raise argparse.ArgumentTypeError("list is empty")
    return vals


def _optional_int(text):
    return None if str(text).lower() in ("none", "") else int(text)


def _common(p):
    g = p.add_argument_group("data and model")
    g.add_argument("--data", default="synthetic:linear",
                   help="synthetic:<pattern> (one of %s), csv:<path> or a .csv path" % ", ".join(PATTERNS))
    g.add_argument("--label", default=None, help="label column of a CSV dataset")
    g.add_argument("--rows", type=int, default=400, help="size of a synthetic dataset")
    g.add_argument("--model", default="rbf", choices=("rbf", "forest"),
                   help="built-in model trained on the dataset")
    g.add_argument("--model-file", default=None, help="JSON dump of a built-in model")
    g.add_argument("--model-cmd", default=None,
                   help="command line of an external model speaking the wire protocol")
    g.add_argument("--model-timeout", type=float, default=30.0)
    g.add_argument("--gamma", type=float, default=2.0, help="RBF bandwidth")
    g.add_argument("--lam", type=float, default=1e-3, help="RBF ridge regularisation")
    g.add_argument("--rbf-output", default="score", choices=("score", "class"))
    g.add_argument("--trees", type=int, default=10)
    g.add_argument("--depth", type=_optional_int, default=None)

    g = p.add_argument_group("explainer")
    g.add_argument("--explainer", default="er-shap", choices=EXPLAINERS)
    g.add_argument("--n", type=int, default=50, help="ensemble size N")
    g.add_argument("--t", type=int, default=None, help="features per member (default ceil(sqrt(m)))")
    g.add_argument("--combiner", default=None, choices=COMBINERS)
    g.add_argument("--sigma", type=float, default=0.01, help="ERW-SHAP neighbour noise")
    g.add_argument("--rf-sigma", type=float, default=0.1, help="ER-SHAP-RF neighbour noise")
    g.add_argument("--temperature", type=float, default=None)
    g.add_argument("--neighbors", type=int, default=200, help="ER-SHAP-RF neighbour count M")
    g.add_argument("--samples", type=int, default=2048, help="kernel SHAP coalition budget")
    g.add_argument("--permutations", type=int, default=2000)
    g.add_argument("--no-members", action="store_true", help="omit member records from JSON")

    g = p.add_argument_group("run")
    g.add_argument("--instance", default=None,
                   help="paper-default (all 0.25), row:<k> or comma-separated values")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", default=None, help="output file (default stdout)")
    g.add_argument("--format", default=None, choices=("json", "csv"))
    g.add_argument("--spec", default=None, help="JSON file of flag defaults")


def build_parser():
    parser = argparse.ArgumentParser(prog="shapkit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("explain", help="explain one instance")
    _common(p)

    p = sub.add_parser("compare", help="score an explainer against a baseline")
    _common(p)
    p.add_argument("--baseline", default=None, choices=("exact", "kernel", "perm"),
                   help="default: exact when m <= %d, else kernel" % ENUMERATION_CAP)
    p.add_argument("--panel", type=int, default=20, help="instances drawn from the dataset")

    p = sub.add_parser("sweep", help="N x t grid of mean agreement")
    _common(p)
    p.add_argument("--baseline", default=None, choices=("exact", "kernel", "perm"))
    p.add_argument("--panel", type=int, default=20)
    p.add_argument("--n-list", type=_int_list, default=[5, 10, 25, 50, 100])
    p.add_argument("--t-list", type=_int_list, default=[2, 3, 4])

    p = sub.add_parser("bench", help="wall time and model calls per explainer")
    _common(p)
    p.add_argument("--explainers", default="exact,er-shap",
                   help="comma-separated explainer names")
    p.add_argument("--repeats", type=int, default=5)
    return parser


# ---------------------------------------------------------------------------

class Session:
    """Dataset, model and background shared by every explanation in a run."""

    def __init__(self, args):
        self.args = args
        self.data = self._load_data()
        self.model = self._load_model()
        if self.model.feature_count != self.data.m:
            raise ConfigError(
                f"model takes {self.model.feature_count} features, dataset has {self.data.m}"
            )
        self.background = background_means(self.data)

    def _load_data(self):
        a = self.args
        src = a.data
        if src.startswith("synthetic:"):
            return generate_synthetic(src.split(":", 1)[1], a.rows, derive_seed(a.seed, "data"))
        path = src[4:] if src.startswith("csv:") else src
        return load_csv(path, a.label)

    def _load_model(self):
        a = self.args
        if a.model_cmd:
            self._external = ExternalModel(shlex.split(a.model_cmd), a.model_timeout)
            return self._external
        if a.model_file:
            return load_model(a.model_file)
        if self.data.y is None:
            raise ConfigError("training a built-in model needs labels (--label)")
        if a.model == "rbf":
            return train_rbf_classifier(self.data, a.gamma, a.lam, a.rbf_output)
        cfg = ForestConfig(n_trees=a.trees, max_depth=a.depth, seed=derive_seed(a.seed, "model"))
        return fit_forest(self.data, cfg)

    def close(self):
        ext = getattr(self, "_external", None)
        if ext is not None:
            ext.close()

    def context(self, x) -> ValueFunctionContext:
        return ValueFunctionContext(self.model, x, self.background, self.data.names)

    def instance(self, spec):
        if spec is None:
            spec = "paper-default" if self.data.provenance.startswith("synthetic") else "row:0"
        if spec == "paper-default":
            return paper_instance(self.data.m)
        if spec.startswith("row:"):
            k = int(spec[4:])
            if not 0 <= k < self.data.n:
                raise ConfigError(f"row {k} out of range [0, {self.data.n})")
            return self.data.X[k]
        vals = np.array([float(v) for v in spec.split(",")])
        if vals.shape[0] != self.data.m:
            raise ConfigError(f"instance has {vals.shape[0]} values, dataset has {self.data.m}")
        return vals

    def panel(self, size):
        """Rows shared by compare and sweep; ``--instance`` pins a single one."""
        if self.args.instance is not None:
            return [self.instance(self.args.instance)]
        rng = np.random.default_rng(derive_seed(self.args.seed, "panel"))
        rows = rng.choice(self.data.n, size=min(size, self.data.n), replace=False)
        return [self.data.X[r] for r in rows]


def explainer_config(args, seed, **override) -> ExplainerConfig:
    kw = dict(
        n=args.n, t=args.t, combiner=args.combiner, sigma=args.sigma,
        rf_sigma=args.rf_sigma, temperature=args.temperature, neighbors=args.neighbors,
        seed=seed, keep_members=not args.no_members,
    )
    kw.update(override)
    return ExplainerConfig(**kw)


def run_explainer(name, ctx, args, seed, **override):
    if name == "exact":
        return exact_shapley(ctx)
    if name == "kernel":
        return kernel_shap_baseline(ctx, sample_count=args.samples, seed=seed)
    if name == "perm":
        return permutation_shapley(ctx, permutation_count=args.permutations, seed=seed)
    cfg = explainer_config(args, seed, **override)
    cfg.features_per_member(ctx.m)  # validate before any work
    if name == "er-shap":
        return er_shap(ctx, cfg)
    if name == "erw-shap":
        return erw_shap(ctx, cfg)
    if name == "er-shap-rf":
        return er_shap_rf(ctx, cfg)
    raise ConfigError(f"unknown explainer {name!r}")


def _baseline_name(args, m):
    if args.baseline:
        if args.baseline == "exact" and m > ENUMERATION_CAP:
            raise ConfigError(f"m={m} exceeds the exact cap {ENUMERATION_CAP}; use --baseline kernel or perm")
        return args.baseline
    if m > ENUMERATION_CAP:
        log.warning("m=%d exceeds the exact cap; comparing against kernel SHAP", m)
        return "kernel"
    return "exact"


def _instance_seed(args, i):
    return derive_seed(args.seed, "explain", i)


# ---------------------------------------------------------------------------
# Subcommands. Each returns (text, format).

def cmd_explain(args, session):
    ctx = session.context(session.instance(args.instance))
    report = run_explainer(args.explainer, ctx, args, _instance_seed(args, 0))
    fmt = args.format or "json"
    if fmt == "json":
        return json.dumps(report.to_dict(), indent=2) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    phi = report.full(ctx.m)
    counts = getattr(report, "selection_counts", None)
    w.writerow(["index", "name", "phi", "selection_count", "unobserved"])
    for i, name in enumerate(ctx.feature_names):
        c = int(counts[i]) if counts is not None else ""
        w.writerow([i, name, repr(float(phi[i])), c, int(counts is not None and counts[i] == 0)])
    return buf.getvalue()


def _compare_panel(args, session, panel, baselines=None, **override):
    """One ComparisonResult per panel instance; baselines may be reused."""
    base_name = _baseline_name(args, session.data.m)
    if args.explainer == base_name:
        raise ConfigError("candidate explainer must differ from the baseline")
    rows, computed = [], []
    for i, x in enumerate(panel):
        ctx = session.context(x)
        seed = _instance_seed(args, i)
        ref = baselines[i] if baselines else run_explainer(base_name, ctx, args, seed)
        computed.append(ref)
        cand = run_explainer(args.explainer, ctx, args, seed, **override)
        rows.append(compare(ref, cand))
    return rows, computed


def cmd_compare(args, session):
    rows, _ = _compare_panel(args, session, session.panel(args.panel))
    fmt = args.format or "csv"
    if fmt == "json":
        return json.dumps([r.__dict__ for r in rows], indent=2) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        w.writerow(r.csv_row())
    return buf.getvalue()


def sweep_grids(args, session):
    panel = session.panel(args.panel)
    grids = {k: np.zeros((len(args.n_list), len(args.t_list))) for k in ("C", "E", "time_ratio")}
    baselines = None
    for a, n in enumerate(args.n_list):
        for b, t in enumerate(args.t_list):
            rows, baselines = _compare_panel(args, session, panel, baselines, n=n, t=t)
            grids["C"][a, b] = math.fsum(r.C for r in rows) / len(rows)
            grids["E"][a, b] = math.fsum(r.E for r in rows) / len(rows)
            grids["time_ratio"][a, b] = math.fsum(r.time_ratio for r in rows) / len(rows)
    return grids


def _grid_csv(grid, n_list, t_list):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["N"] + [f"t={t}" for t in t_list])
    for n, row in zip(n_list, grid):
        w.writerow([n] + [repr(float(v)) for v in row])
    return buf.getvalue()


def cmd_sweep(args, session):
    grids = sweep_grids(args, session)
    fmt = args.format or "csv"
    if fmt == "json":
        return json.dumps({"N": args.n_list, "t": args.t_list,
                           **{k: g.tolist() for k, g in grids.items()}}, indent=2) + "\n"
    if args.out:
        stem = Path(args.out)
        for key in ("E", "time_ratio"):
            _atomic_write(stem.with_name(f"{stem.stem}.{key}{stem.suffix or '.csv'}"),
                          _grid_csv(grids[key], args.n_list, args.t_list))
    return _grid_csv(grids["C"], args.n_list, args.t_list)


def cmd_bench(args, session):
    if args.repeats < 1:
        raise ConfigError("--repeats must be >= 1")
    names = [s.strip() for s in args.explainers.split(",") if s.strip()]
    for name in names:
        if name not in EXPLAINERS:
            raise ConfigError(f"unknown explainer {name!r}")
    ctx = session.context(session.instance(args.instance))
    seed = _instance_seed(args, 0)
    rows = []
    for name in names:
        times, calls = [], set()
        for _ in range(args.repeats):
            report = run_explainer(name, ctx, args, seed)
            times.append(report.wall_time_ms)
            calls.add(report.model_calls)
        rows.append({
            "explainer": name,
            "median_ms": statistics.median(times),
            "min_ms": min(times),
            "max_ms": max(times),
            "model_calls": calls.pop() if len(calls) == 1 else sorted(calls),
            "repeats": args.repeats,
        })
    fmt = args.format or "csv"
    if fmt == "json":
        return json.dumps(rows, indent=2) + "\n"
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


COMMANDS = {"explain": cmd_explain, "compare": cmd_compare, "sweep": cmd_sweep, "bench": cmd_bench}


def _atomic_write(path, text):
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def parse_args(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.spec:
        with open(args.spec, encoding="utf-8") as fh:
            spec = json.load(fh)
        if not isinstance(spec, dict):
            raise ConfigError("--spec file must hold a JSON object")
        known = vars(args)
        unknown = sorted(set(spec) - set(known) - {"command"})
        if unknown:
            raise ConfigError(f"unknown keys in spec file: {unknown}")
        # explicit flags win over the spec file
        sub = parser._subparsers._group_actions[0].choices[args.command]
        sub.set_defaults(**{k: v for k, v in spec.items() if k != "command"})
        args = parser.parse_args(argv)
    return args


def main(argv=None) -> int:
    logging.basicConfig(
        stream=sys.stderr,
        level=os.environ.get("SHAPKIT_LOG", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    session = None
    try:
        args = parse_args(argv)
        session = Session(args)
        text = COMMANDS[args.command](args, session)
        if args.out:
            _atomic_write(args.out, text)
        else:
            sys.stdout.write(text)
            sys.stdout.flush()
        return 0
    except (ShapkitError, ValueError, OSError) as exc:
        sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc)}) + "\n")
        return 2
    finally:
        if session is not None:
            session.close()


if __name__ == "__main__":
    sys.exit(main())
