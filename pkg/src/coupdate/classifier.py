"""Multi-class linear classifier trained by plain stochastic gradient descent.

Supports a full batch fit plus incremental partial fits over the model's
lifetime.  The default multinomial logistic loss yields proper softmax
probabilities; a one-vs-all hinge variant (probabilities taken as the
softmax of the decision values) is available via ``loss="hinge"``.

The step size follows the inverse scaling schedule
``eta_t = eta0 / (1 + decay * eta0 * t)`` where ``t`` counts every sample
update since the model was created.  Each pass shuffles with a generator
seeded from (model seed, pass counter), so identical inputs give
bit-identical parameter trajectories and serialized models resume exactly.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ._util import read_json, write_json
from .types import Prediction

LOSSES = ("log", "hinge")


@dataclass(frozen=True)
class SGDHyperparams:
    eta0: float = 0.1
    decay: float = 1e-4
    reg: float = 1e-4
    epochs: int = 50
    partial_passes: int = 5
    loss: str = "log"

    def __post_init__(self):
        if self.eta0 <= 0.0 or self.decay < 0.0 or self.reg < 0.0:
            raise ValueError("eta0 must be positive; decay and reg non-negative")
        if self.epochs < 1 or self.partial_passes < 1:
            raise ValueError("epochs and partial_passes must be >= 1")
        if self.loss not in LOSSES:
            raise ValueError(f"loss must be one of {LOSSES}")


def softmax(scores: np.ndarray) -> np.ndarray:
    z = np.asarray(scores, dtype=np.float64)
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def _check_data(samples, labels) -> tuple[np.ndarray, np.ndarray]:
    try:
        X = np.asarray(samples, dtype=np.float64)
    except ValueError as exc:
        raise ValueError(f"samples have mismatched dimensions: {exc}") from exc
    if X.ndim != 2:
        raise ValueError(f"samples must form an (n, d) matrix, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("samples contain non-finite values")
    y = np.asarray(labels, dtype=np.int64)
    if y.ndim != 1 or y.shape[0] != X.shape[0]:
        raise ValueError("labels must be a flat list matching the sample count")
    if y.size and y.min() < 0:
        raise ValueError("labels must be non-negative class ids")
    return X, y


class LinearSGDClassifier:
    """Linear model with one weight row and one bias per class.

    ``predict_proba`` is pure and safe to call concurrently on a shared
    model; ``fit``/``partial_fit`` mutate the model in place (and return it)
    so they need exclusive access.
    """

    def __init__(self, n_classes: int, n_features: int, hyper: SGDHyperparams | None = None, seed: int = 0):
        if n_classes < 2:
            raise ValueError("need at least 2 classes")
        if n_features < 1:
            raise ValueError("need at least 1 feature")
        self.n_classes = int(n_classes)
        self.n_features = int(n_features)
        self.hyper = hyper if hyper is not None else SGDHyperparams()
        self.seed = int(seed)
        self.weights = np.zeros((self.n_classes, self.n_features))
        self.bias = np.zeros(self.n_classes)
        self.step_count = 0
        self.pass_count = 0
        self.fitted = False

    @classmethod
    def fit(cls, samples, labels, n_classes: int | None = None,
            hyper: SGDHyperparams | None = None, seed: int = 0) -> "LinearSGDClassifier":
        """Train a fresh model; every class in [0, n_classes) must appear."""
        X, y = _check_data(samples, labels)
        if X.shape[0] == 0:
            raise ValueError("cannot fit on an empty sample set")
        present = np.unique(y)
        if n_classes is None:
            n_classes = int(y.max()) + 1
        if present.size < 2:
            raise ValueError("training data must contain at least 2 classes")
        if present.size != n_classes or present[0] != 0 or present[-1] != n_classes - 1:
            raise ValueError(f"every class in [0, {n_classes}) must be represented")
        model = cls(n_classes, X.shape[1], hyper=hyper, seed=seed)
        model._run_passes(X, y, model.hyper.epochs)
        model.fitted = True
        return model

    def partial_fit(self, samples, labels) -> "LinearSGDClassifier":
        """Incremental update; an empty batch leaves the model untouched."""
        if not self.fitted:
            raise ValueError("partial_fit requires a fitted model")
        if len(samples) != len(labels):
            raise ValueError("samples and labels differ in length")
        if len(samples) == 0:
            return self
        X, y = _check_data(samples, labels)
        if X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {X.shape[1]}")
        if int(y.max()) >= self.n_classes:
            raise ValueError(f"label {int(y.max())} outside [0, {self.n_classes})")
        self._run_passes(X, y, self.hyper.partial_passes)
        return self

    def _run_passes(self, X: np.ndarray, y: np.ndarray, n_passes: int) -> None:
        W, b = self.weights, self.bias
        eta0, decay, reg = self.hyper.eta0, self.hyper.decay, self.hyper.reg
        log_loss = self.hyper.loss == "log"
        n = X.shape[0]
        step = self.step_count
        for _ in range(n_passes):
            order = np.random.default_rng([self.seed, self.pass_count]).permutation(n)
            for i in order:
                x = X[i]
                eta = eta0 / (1.0 + decay * eta0 * step)
                z = W @ x + b
                if log_loss:
                    g = softmax(z)
                    g[y[i]] -= 1.0
                else:
                    targets = np.full(self.n_classes, -1.0)
                    targets[y[i]] = 1.0
                    g = np.where(targets * z < 1.0, -targets, 0.0)
                W *= 1.0 - eta * reg
                W -= np.outer(eta * g, x)
                b -= eta * g
                step += 1
            self.pass_count += 1
        self.step_count = step

    def decision_function(self, features) -> np.ndarray:
        X = np.asarray(features, dtype=np.float64)
        single = X.ndim == 1
        rows = X[None, :] if single else X
        if rows.ndim != 2 or rows.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got shape {X.shape}")
        scores = rows @ self.weights.T + self.bias
        return scores[0] if single else scores

    def predict_proba(self, features) -> Prediction:
        """Distribution over classes for one feature vector (pure)."""
        if not self.fitted:
            raise ValueError("model is not fitted")
        x = np.asarray(features, dtype=np.float64)
        if x.ndim != 1 or x.shape[0] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got shape {x.shape}")
        if not np.all(np.isfinite(x)):
            raise ValueError("non-finite input")
        return Prediction.from_probs(softmax(self.weights @ x + self.bias))

    def predict_proba_batch(self, features) -> np.ndarray:
        if not self.fitted:
            raise ValueError("model is not fitted")
        X = np.asarray(features, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ValueError(f"expected (n, {self.n_features}) features, got shape {X.shape}")
        return softmax(X @ self.weights.T + self.bias)

    def predict_batch(self, features) -> np.ndarray:
        """Top class per row; ties resolve to the lower class id."""
        return np.argmax(self.predict_proba_batch(features), axis=1)

    def loss_and_gradient(self, samples, labels) -> tuple[float, np.ndarray, np.ndarray]:
        """Average training loss and its exact analytic gradient.

        Same objective the SGD steps descend: the data term plus
        (reg/2)*||W||^2, bias unregularized.
        """
        X, y = _check_data(samples, labels)
        n = X.shape[0]
        Z = X @ self.weights.T + self.bias
        if self.hyper.loss == "log":
            shifted = Z - Z.max(axis=1, keepdims=True)
            log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
            data_loss = -float(log_probs[np.arange(n), y].mean())
            G = softmax(Z)
            G[np.arange(n), y] -= 1.0
            G /= n
        else:
            T = np.full_like(Z, -1.0)
            T[np.arange(n), y] = 1.0
            margins = 1.0 - T * Z
            data_loss = float(np.maximum(margins, 0.0).sum(axis=1).mean())
            G = np.where(margins > 0.0, -T, 0.0) / n
        dW = G.T @ X + self.hyper.reg * self.weights
        db = G.sum(axis=0)
        loss = data_loss + 0.5 * self.hyper.reg * float((self.weights**2).sum())
        return loss, dW, db

    def to_dict(self) -> dict:
        return {
            "n_classes": self.n_classes,
            "n_features": self.n_features,
            "hyper": asdict(self.hyper),
            "seed": self.seed,
            "step_count": self.step_count,
            "pass_count": self.pass_count,
            "fitted": self.fitted,
            "weights": self.weights.tolist(),
            "bias": self.bias.tolist(),
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "LinearSGDClassifier":
        model = cls(
            n_classes=int(payload["n_classes"]),
            n_features=int(payload["n_features"]),
            hyper=SGDHyperparams(**payload["hyper"]),
            seed=int(payload["seed"]),
        )
        weights = np.asarray(payload["weights"], dtype=np.float64)
        bias = np.asarray(payload["bias"], dtype=np.float64)
        if weights.shape != model.weights.shape or bias.shape != model.bias.shape:
            raise ValueError("serialized parameter shapes do not match the header")
        model.weights = weights
        model.bias = bias
        model.step_count = int(payload["step_count"])
        model.pass_count = int(payload["pass_count"])
        model.fitted = bool(payload["fitted"])
        return model

    def save(self, path) -> None:
        write_json(self.to_dict(), path)

    @classmethod
    def load(cls, path) -> "LinearSGDClassifier":
        return cls.from_dict(read_json(path))


def models_equal(a: LinearSGDClassifier, b: LinearSGDClassifier) -> bool:
    """Bit-exact equality of parameters, counters and hyperparameters."""
    return a.to_dict() == b.to_dict()
