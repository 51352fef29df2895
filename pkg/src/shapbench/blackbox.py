"""The default black-box classifier: input -> 64 -> 64 -> K MLP with dropout and softmax."""

from __future__ import annotations

import hashlib
import threading
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from shapbench import numkit
from shapbench.data import SplitDataset, Standardizer
from shapbench.numkit import DenseNet, Layer, TrainingDiverged
from shapbench.rng import make_rng
from shapbench.serialize import dumps, read_json

SCHEMA_VERSION = 1


class ModelFormatError(ValueError):
    pass


@dataclass(eq=False)
class Model:
    """A trained network plus the metadata explainers need.

    Explainers only touch ``predict_proba`` and ``input_gradient``; ``rows_evaluated``
    counts every input row pushed through either, for deterministic cost accounting.
    """

    net: DenseNet
    n_classes: int
    standardizer: Standardizer
    feature_names: list[str]
    training_meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self._lock = threading.Lock()
        self.rows_evaluated = 0

    @property
    def input_dim(self) -> int:
        return self.net.input_dim

    def _count(self, n: int) -> None:
        with self._lock:
            self.rows_evaluated += n

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        out = numkit.predict(self.net, X)
        self._count(X.shape[0])
        return out

    def input_gradient(self, X: np.ndarray, class_index: int) -> np.ndarray:
        """d output[class_index] / d input, row by row. A 1-D ``X`` gives a 1-D result."""
        if not 0 <= class_index < self.net.output_dim:
            raise IndexError(f"class index {class_index} out of range for {self.net.output_dim} outputs")
        X = np.asarray(X, dtype=np.float64)
        single = X.ndim == 1
        X2 = X[None, :] if single else X
        out, cache = numkit.forward(self.net, X2, "infer")
        seed = np.zeros_like(out)
        seed[:, class_index] = 1.0
        grad = numkit.backward(self.net, cache, seed).inputs
        self._count(X2.shape[0])
        return grad[0] if single else grad

    def content_hash(self) -> str:
        return hashlib.sha256(dumps(self.net.to_dict(), indent=None).encode()).hexdigest()[:16]

    @classmethod
    def from_net(cls, net: DenseNet, feature_names: list[str] | None = None) -> "Model":
        names = feature_names or [f"x{j}" for j in range(net.input_dim)]
        return cls(net, net.output_dim, Standardizer.identity(net.input_dim), names)


def linear_model(weights, bias: float = 0.0) -> Model:
    """Single-output identity model ``f(x) = w.x + b``; handy as an analytic oracle."""
    w = np.asarray(weights, dtype=np.float64).reshape(-1, 1)
    return Model.from_net(DenseNet([Layer(w, [bias], "identity")]))


@dataclass
class TrainConfig:
    epochs: int = 200
    batch_size: int = 64
    lr: float = 1e-3
    dropout: float = 0.2
    seed: int = 0
    patience: int = 20
    hidden: tuple[int, ...] = (64, 64)


def _cross_entropy(probs: np.ndarray, y: np.ndarray) -> float:
    picked = probs[np.arange(y.shape[0]), y]
    return float(-np.mean(np.log(np.clip(picked, 1e-300, None))))


def _accuracy(probs: np.ndarray, y: np.ndarray) -> float:
    return float(np.mean(np.argmax(probs, axis=1) == y)) if y.size else 0.0


def train_default_mlp(split: SplitDataset, config: TrainConfig | None = None) -> Model:
    """Cross-entropy training with Adam and early stopping on validation loss.

    The weights with the lowest validation loss are kept.
    """
    config = config or TrainConfig()
    if config.epochs < 0 or config.batch_size < 1 or config.lr <= 0:
        raise ValueError(f"invalid training config {config}")
    train, val = split.train, split.val
    if train.n_samples == 0:
        raise ValueError("empty training set")
    k = train.n_classes
    sizes = [train.n_features, *config.hidden, k]
    rng = make_rng(config.seed, "blackbox", train.name)
    net = numkit.dense_net(sizes, "relu", "softmax", config.dropout, rng=rng)
    opt = numkit.Adam(net, lr=config.lr)
    onehot = np.eye(k)[train.y]

    def val_stats(n: DenseNet) -> tuple[float, float]:
        if val.n_samples == 0:
            return 0.0, 0.0
        p = numkit.predict(n, val.X)
        return _cross_entropy(p, val.y), _accuracy(p, val.y)

    best_loss, best_acc = val_stats(net)
    best_net, best_epoch, epochs_run, stale = net.copy(), 0, 0, 0
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(train.n_samples)
        for start in range(0, train.n_samples, config.batch_size):
            idx = order[start:start + config.batch_size]
            probs, cache = numkit.forward(net, train.X[idx], "train", rng)
            loss = _cross_entropy(probs, train.y[idx])
            if not np.isfinite(loss):
                raise TrainingDiverged(f"non-finite training loss at epoch {epoch}")
            grads = numkit.backward(net, cache, (probs - onehot[idx]) / idx.shape[0], from_logits=True)
            opt.step(net, grads)
        epochs_run = epoch
        loss, acc = val_stats(net)
        if not np.isfinite(loss):
            raise TrainingDiverged(f"non-finite validation loss at epoch {epoch}")
        if loss < best_loss:
            best_loss, best_acc, best_net, best_epoch, stale = loss, acc, net.copy(), epoch, 0
        else:
            stale += 1
            if stale >= config.patience:
                break
    meta = {
        "epochs": config.epochs,
        "epochs_run": epochs_run,
        "best_epoch": best_epoch,
        "batch_size": config.batch_size,
        "lr": config.lr,
        "dropout": config.dropout,
        "patience": config.patience,
        "seed": config.seed,
        "val_loss": best_loss,
        "val_accuracy": best_acc,
    }
    return Model(best_net, k, split.standardizer, list(train.feature_names), meta)


def predict_proba(model: Model, X: np.ndarray) -> np.ndarray:
    return model.predict_proba(X)


def input_gradient(model: Model, x: np.ndarray, class_index: int) -> np.ndarray:
    return model.input_gradient(x, class_index)


def model_to_dict(model: Model) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "input_dim": model.input_dim,
        "n_classes": model.n_classes,
        "feature_names": list(model.feature_names),
        "standardizer": model.standardizer.to_dict(),
        "training_meta": dict(model.training_meta),
        "net": model.net.to_dict(),
    }


def save_model(model: Model, path: str | Path) -> None:
    Path(path).write_text(dumps(model_to_dict(model)) + "\n", encoding="utf-8")


def load_model(path: str | Path) -> Model:
    try:
        doc = read_json(path)
    except ValueError as exc:
        raise ModelFormatError(f"{path}: not valid JSON ({exc})") from None
    if not isinstance(doc, dict) or "schema_version" not in doc:
        raise ModelFormatError(f"{path}: missing schema_version")
    if doc["schema_version"] != SCHEMA_VERSION:
        raise ModelFormatError(
            f"{path}: schema version {doc['schema_version']} is not supported (expected {SCHEMA_VERSION})"
        )
    try:
        net = DenseNet.from_dict(doc["net"])
        model = Model(
            net,
            int(doc["n_classes"]),
            Standardizer.from_dict(doc["standardizer"]),
            list(doc["feature_names"]),
            dict(doc.get("training_meta", {})),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"{path}: corrupt model file ({exc})") from None
    if model.input_dim != doc["input_dim"] or net.output_dim != model.n_classes:
        raise ModelFormatError(f"{path}: header dimensions disagree with the stored network")
    return model
