"""Black-box model abstraction.

Every model maps a ``(n, m)`` batch of full-length feature vectors to ``n``
scalar predictions. Classification models report the class-1 score, so the
explainers never need to know what kind of model they are looking at.
"""
from __future__ import annotations

import json
import logging
import queue
import subprocess
import sys
import threading
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError, DimensionError, ProtocolError, TransportError

log = logging.getLogger(__name__)


class BlackBoxModel:
    """Base class. Subclasses implement ``_predict`` on a validated 2-D array."""

    feature_count: int

    def predict(self, batch) -> np.ndarray:
        X = as_batch(batch, self.feature_count)
        if X.shape[0] == 0:
            return np.empty(0, dtype=float)
        out = np.asarray(self._predict(X), dtype=float).reshape(-1)
        if out.shape[0] != X.shape[0]:
            raise DimensionError(
                f"model returned {out.shape[0]} predictions for {X.shape[0]} rows"
            )
        return out

    def _predict(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError(f"{type(self).__name__} cannot be serialized")


def as_batch(batch, feature_count: int) -> np.ndarray:
    X = np.asarray(batch, dtype=float)
    if X.ndim == 1 and X.size == 0:
        X = X.reshape(0, feature_count)
    if X.ndim != 2:
        raise DimensionError(f"expected a 2-D batch, got array with ndim={X.ndim}")
    if X.shape[1] != feature_count:
        raise DimensionError(
            f"expected rows of {feature_count} features, got {X.shape[1]}"
        )
    return X


def predict_batch(model: BlackBoxModel, batch) -> np.ndarray:
    """Predict every row of ``batch``; element ``i`` is the output for row ``i``."""
    return model.predict(batch)


class FunctionModel(BlackBoxModel):
    """Wraps a vectorised callable ``fn(X) -> (n,)``."""

    def __init__(self, fn: Callable[[np.ndarray], np.ndarray], feature_count: int):
        self.fn = fn
        self.feature_count = int(feature_count)

    def _predict(self, X):
        return self.fn(X)


class LinearModel(BlackBoxModel):
    def __init__(self, coefficients: Sequence[float], intercept: float = 0.0):
        self.coefficients = np.asarray(coefficients, dtype=float)
        self.intercept = float(intercept)
        self.feature_count = self.coefficients.shape[0]

    def _predict(self, X):
        return self.intercept + X @ self.coefficients

    def to_dict(self):
        return {
            "kind": "linear",
            "coefficients": self.coefficients.tolist(),
            "intercept": self.intercept,
        }


class CountingModel(BlackBoxModel):
    """Pass-through wrapper that counts predicted rows and predict calls."""

    def __init__(self, inner: BlackBoxModel):
        self.inner = inner
        self.feature_count = inner.feature_count
        self.rows = 0
        self.calls = 0
        self._lock = threading.Lock()

    def _predict(self, X):
        with self._lock:
            self.rows += X.shape[0]
            self.calls += 1
        return self.inner.predict(X)

    def reset(self):
        self.rows = 0
        self.calls = 0


# ---------------------------------------------------------------------------
# RBF kernel ridge classifier
# ---------------------------------------------------------------------------

def rbf_kernel(A: np.ndarray, B: np.ndarray, gamma: float) -> np.ndarray:
    sq = (
        np.sum(A * A, axis=1)[:, None]
        + np.sum(B * B, axis=1)[None, :]
        - 2.0 * (A @ B.T)
    )
    np.maximum(sq, 0.0, out=sq)
    return np.exp(-gamma * sq)


class RbfKernelClassifier(BlackBoxModel):
    """Kernel ridge regression on 0/1 labels with an RBF kernel.

    ``output="score"`` returns the real-valued class-1 score,
    ``output="class"`` thresholds it at 0.5.
    """

    def __init__(self, support, dual_weights, gamma, lam, offset=0.0, output="score"):
        if output not in ("score", "class"):
            raise ConfigError(f"unknown output mode {output!r}")
        self.support = np.asarray(support, dtype=float)
        self.dual_weights = np.asarray(dual_weights, dtype=float)
        self.gamma = float(gamma)
        self.lam = float(lam)
        self.offset = float(offset)
        self.output = output
        self.feature_count = self.support.shape[1]

    def decision_function(self, X) -> np.ndarray:
        X = as_batch(X, self.feature_count)
        if not self.dual_weights.any():
            return np.full(X.shape[0], self.offset)
        return self.offset + rbf_kernel(X, self.support, self.gamma) @ self.dual_weights

    def _predict(self, X):
        score = self.decision_function(X)
        if self.output == "class":
            return (score >= 0.5).astype(float)
        return score

    def to_dict(self):
        return {
            "kind": "rbf",
            "support": self.support.tolist(),
            "dual_weights": self.dual_weights.tolist(),
            "gamma": self.gamma,
            "lam": self.lam,
            "offset": self.offset,
            "output": self.output,
        }


def train_rbf_classifier(data, gamma: float, lam: float, output: str = "score"):
    """Fit an RBF kernel ridge classifier on a labelled dataset.

    Solves ``(K + lam*I) alpha = y - mean(y)``; the label mean is kept as the
    offset. If every label is equal the result is a constant predictor.
    """
    X = np.asarray(data.X, dtype=float)
    if data.y is None:
        raise ConfigError("train_rbf_classifier needs a labelled dataset")
    y = np.asarray(data.y, dtype=float)
    if X.shape[0] < 2:
        raise ConfigError("need at least 2 instances to train")
    if not np.all(np.isin(y, (0.0, 1.0))):
        raise ConfigError("labels must be 0 or 1")
    if gamma <= 0:
        raise ConfigError("gamma must be > 0")
    if lam <= 0:
        raise ConfigError("lam must be > 0; the kernel system is singular otherwise")

    offset = float(y.mean())
    if np.all(y == y[0]):
        log.info("all labels equal %s, fitting a constant predictor", y[0])
        return RbfKernelClassifier(X, np.zeros(len(y)), gamma, lam, offset, output)
    K = rbf_kernel(X, X, gamma)
    K[np.diag_indices_from(K)] += lam
    alpha = np.linalg.solve(K, y - offset)
    return RbfKernelClassifier(X, alpha, gamma, lam, offset, output)


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def model_from_dict(d: dict) -> BlackBoxModel:
    kind = d.get("kind")
    if kind == "linear":
        return LinearModel(d["coefficients"], d.get("intercept", 0.0))
    if kind == "rbf":
        return RbfKernelClassifier(
            d["support"], d["dual_weights"], d["gamma"], d["lam"],
            d.get("offset", 0.0), d.get("output", "score"),
        )
    if kind == "forest":
        from .forest import RandomForest

        return RandomForest.from_dict(d)
    raise ConfigError(f"unknown model kind {kind!r}")


def save_model(model: BlackBoxModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model.to_dict(), fh)


def load_model(path) -> BlackBoxModel:
    with open(path, encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))


# ---------------------------------------------------------------------------
# External models: newline-delimited JSON over a child's stdin/stdout
# ---------------------------------------------------------------------------

_EOF = object()


def _excerpt(text: str, limit: int = 200) -> str:
    text = text.rstrip("\n")
    return text if len(text) <= limit else text[:limit] + "..."


class ExternalModel(BlackBoxModel):
    """A model living in a child process that speaks the wire protocol.

    Requests are serialized over the single pipe; each carries an id that the
    response must echo. A dead child or a timeout raises ``TransportError``;
    anything unparsable raises ``ProtocolError``.
    """

    def __init__(self, command: Sequence[str], timeout: float = 30.0):
        self.command = list(command)
        self.timeout = float(timeout)
        self._lock = threading.Lock()
        self._next_id = 0
        try:
            self._proc = subprocess.Popen(
                self.command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                encoding="utf-8",
                bufsize=1,
            )
        except OSError as exc:
            raise TransportError(f"cannot start {self.command!r}: {exc}") from exc
        self._lines: queue.Queue = queue.Queue()
        self._reader = threading.Thread(target=self._read_loop, daemon=True)
        self._reader.start()
        try:
            reply = self._request({"op": "meta"})
            fc = reply.get("feature_count")
            if not isinstance(fc, int) or isinstance(fc, bool) or fc < 1:
                raise ProtocolError(f"bad meta response: {_excerpt(json.dumps(reply))}")
            self.feature_count = fc
        except Exception:
            self.close()
            raise

    def _read_loop(self):
        for line in self._proc.stdout:
            self._lines.put(line)
        self._lines.put(_EOF)

    def _request(self, payload: dict) -> dict:
        with self._lock:
            rid = self._next_id
            self._next_id += 1
            msg = json.dumps({"id": rid, **payload}, allow_nan=False)
            try:
                self._proc.stdin.write(msg + "\n")
                self._proc.stdin.flush()
            except (BrokenPipeError, OSError, ValueError) as exc:
                raise TransportError(f"write to model process failed: {exc}") from exc
            try:
                line = self._lines.get(timeout=self.timeout)
            except queue.Empty:
                raise TransportError(
                    f"no response to request {rid} within {self.timeout}s"
                ) from None
            if line is _EOF:
                self._lines.put(_EOF)
                raise TransportError(
                    f"model process exited (code {self._proc.poll()}) during request {rid}"
                )
            try:
                reply = json.loads(line)
            except json.JSONDecodeError:
                raise ProtocolError(f"malformed response: {_excerpt(line)!r}") from None
            if not isinstance(reply, dict) or reply.get("id") != rid:
                raise ProtocolError(
                    f"response id mismatch (expected {rid}): {_excerpt(line)!r}"
                )
            if "error" in reply:
                raise ProtocolError(f"model process reported: {_excerpt(str(reply['error']))}")
            return reply

    def _predict(self, X):
        reply = self._request({"op": "predict", "instances": X.tolist()})
        preds = reply.get("predictions")
        if not isinstance(preds, list) or len(preds) != X.shape[0]:
            raise ProtocolError(
                f"expected {X.shape[0]} predictions: {_excerpt(json.dumps(reply))!r}"
            )
        try:
            return np.array(preds, dtype=float)
        except (TypeError, ValueError):
            raise ProtocolError(f"non-numeric predictions: {_excerpt(json.dumps(reply))!r}") from None

    def close(self):
        proc = self._proc
        if proc.poll() is None:
            try:
                proc.stdin.close()
            except OSError:
                pass
            try:
                proc.wait(timeout=2)
            except subprocess.TimeoutExpired:
                proc.kill()
                proc.wait()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def serve(model: BlackBoxModel, stdin=None, stdout=None) -> None:
    """Answer wire-protocol requests for ``model`` until stdin closes."""
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    for line in stdin:
        if not line.strip():
            continue
        rid = None
        try:
            req = json.loads(line)
            rid = req["id"]
            op = req["op"]
            if op == "meta":
                reply = {"id": rid, "feature_count": model.feature_count}
            elif op == "predict":
                preds = model.predict(req["instances"])
                reply = {"id": rid, "predictions": preds.tolist()}
            else:
                reply = {"id": rid, "error": f"unknown op {op!r}"}
        except Exception as exc:  # report, keep serving
            reply = {"id": rid, "error": f"{type(exc).__name__}: {exc}"}
        stdout.write(json.dumps(reply) + "\n")
        stdout.flush()
