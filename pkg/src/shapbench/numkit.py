"""Small dense feed-forward networks with hand-written reverse mode.

Weights are stored input-major: a layer maps a batch ``X`` of shape
``(n, n_in)`` to ``act(X @ W + b)`` with ``W`` of shape ``(n_in, n_out)``.
Everything is float64.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

ACTIVATIONS = ("relu", "identity", "softmax")

_net_ids = itertools.count()


class ShapeError(ValueError):
    pass


class StaleCacheError(RuntimeError):
    pass


class TrainingDiverged(FloatingPointError):
    pass


@dataclass(eq=False)
class Layer:
    weight: np.ndarray
    bias: np.ndarray
    activation: str = "identity"

    def __post_init__(self):
        self.weight = np.array(self.weight, dtype=np.float64, ndmin=2)
        self.bias = np.array(self.bias, dtype=np.float64).reshape(-1)
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.bias.shape[0] != self.weight.shape[1]:
            raise ShapeError(
                f"bias length {self.bias.shape[0]} does not match layer width {self.weight.shape[1]}"
            )


@dataclass(eq=False)
class DenseNet:
    layers: list[Layer]
    dropout: list[float] = field(default_factory=list)

    def __post_init__(self):
        if not self.layers:
            raise ValueError("a network needs at least one layer")
        if not self.dropout:
            self.dropout = [0.0] * len(self.layers)
        self.dropout = [float(p) for p in self.dropout]
        if len(self.dropout) != len(self.layers):
            raise ValueError("one dropout rate per layer is required")
        for p in self.dropout:
            if not 0.0 <= p < 1.0:
                raise ValueError(f"dropout rate {p} outside [0, 1)")
        for k, (a, b) in enumerate(zip(self.layers, self.layers[1:])):
            if a.weight.shape[1] != b.weight.shape[0]:
                raise ShapeError(
                    f"layer {k} outputs {a.weight.shape[1]} values but layer {k + 1} "
                    f"expects {b.weight.shape[0]}"
                )
        for layer in self.layers[:-1]:
            if layer.activation == "softmax":
                raise ValueError("softmax is only allowed as the terminal activation")
        self.uid = next(_net_ids)
        self.version = 0

    @property
    def input_dim(self) -> int:
        return self.layers[0].weight.shape[0]

    @property
    def output_dim(self) -> int:
        return self.layers[-1].weight.shape[1]

    def params(self) -> list[np.ndarray]:
        out = []
        for layer in self.layers:
            out.extend([layer.weight, layer.bias])
        return out

    def copy(self) -> "DenseNet":
        return DenseNet(
            [Layer(l.weight.copy(), l.bias.copy(), l.activation) for l in self.layers],
            list(self.dropout),
        )

    def touch(self) -> None:
        """Mark parameters as modified; invalidates outstanding forward caches."""
        self.version += 1

    def to_dict(self) -> dict:
        return {
            "layers": [
                {
                    "rows": int(l.weight.shape[0]),
                    "cols": int(l.weight.shape[1]),
                    "weights": l.weight.ravel().tolist(),
                    "bias": l.bias.tolist(),
                    "activation": l.activation,
                }
                for l in self.layers
            ],
            "dropout": list(self.dropout),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "DenseNet":
        layers = []
        for k, entry in enumerate(doc["layers"]):
            rows, cols = int(entry["rows"]), int(entry["cols"])
            weights = np.asarray(entry["weights"], dtype=np.float64)
            if weights.size != rows * cols:
                raise ShapeError(f"layer {k}: {weights.size} weights for a {rows}x{cols} matrix")
            layers.append(Layer(weights.reshape(rows, cols), entry["bias"], entry["activation"]))
        return cls(layers, list(doc.get("dropout", [])))


def dense_net(
    sizes: list[int],
    hidden_activation: str = "relu",
    output_activation: str = "identity",
    dropout: float = 0.0,
    rng: np.random.Generator | None = None,
) -> DenseNet:
    """He-uniform initialised stack; dropout follows every hidden layer."""
    if rng is None:
        rng = np.random.default_rng(0)
    layers = []
    n_layers = len(sizes) - 1
    for k in range(n_layers):
        fan_in, fan_out = sizes[k], sizes[k + 1]
        limit = np.sqrt(6.0 / fan_in)
        w = rng.uniform(-limit, limit, size=(fan_in, fan_out))
        act = output_activation if k == n_layers - 1 else hidden_activation
        layers.append(Layer(w, np.zeros(fan_out), act))
    rates = [dropout] * (n_layers - 1) + [0.0]
    return DenseNet(layers, rates)


def softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _relu_grad(z: np.ndarray) -> np.ndarray:
    return (z > 0).astype(np.float64)


def _activate(z: np.ndarray, activation: str) -> np.ndarray:
    if activation == "relu":
        return np.maximum(z, 0.0)
    if activation == "softmax":
        return softmax(z)
    return z


@dataclass
class ForwardCache:
    net_uid: int
    net_version: int
    inputs: list[np.ndarray]
    preacts: list[np.ndarray]
    outputs: list[np.ndarray]
    masks: list[np.ndarray | None]


@dataclass
class Gradients:
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    inputs: np.ndarray

    def flat(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend([w, b])
        return out

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(g)) for g in self.flat()) and bool(
            np.all(np.isfinite(self.inputs))
        )


def forward(
    net: DenseNet,
    batch: np.ndarray,
    mode: str = "infer",
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, ForwardCache]:
    x = np.asarray(batch, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.shape[1] != net.input_dim:
        raise ShapeError(f"batch has {x.shape[1]} columns but the network expects {net.input_dim}")
    if mode not in ("train", "infer"):
        raise ValueError(f"mode must be 'train' or 'infer', got {mode!r}")
    training = mode == "train"
    if training and rng is None and any(p > 0 for p in net.dropout):
        raise ValueError("training-mode forward with dropout needs an rng")
    inputs, preacts, outputs, masks = [], [], [], []
    a = x
    for layer, p in zip(net.layers, net.dropout):
        inputs.append(a)
        z = a @ layer.weight + layer.bias
        h = _activate(z, layer.activation)
        preacts.append(z)
        outputs.append(h)
        mask = None
        if training and p > 0:
            mask = (rng.random(h.shape) >= p) / (1.0 - p)
            h = h * mask
        masks.append(mask)
        a = h
    return a, ForwardCache(net.uid, net.version, inputs, preacts, outputs, masks)


def predict(net: DenseNet, batch: np.ndarray) -> np.ndarray:
    return forward(net, batch, "infer")[0]


def backward(
    net: DenseNet,
    cache: ForwardCache,
    loss_grad: np.ndarray,
    from_logits: bool = False,
) -> Gradients:
    """Gradients of ``sum(loss_grad * output)`` w.r.t. every parameter and the input.

    With ``from_logits=True``, ``loss_grad`` is taken w.r.t. the terminal
    pre-activation instead of the activated output (skips the softmax Jacobian,
    which is what a fused softmax-cross-entropy needs).
    """
    if cache.net_uid != net.uid or cache.net_version != net.version:
        raise StaleCacheError("forward cache does not belong to the current network state")
    g = np.asarray(loss_grad, dtype=np.float64)
    if g.ndim == 1:
        g = g[None, :]
    if g.shape != cache.outputs[-1].shape:
        raise ShapeError(f"loss gradient shape {g.shape} != output shape {cache.outputs[-1].shape}")
    n_layers = len(net.layers)
    grad_w: list[np.ndarray] = [None] * n_layers  # type: ignore[list-item]
    grad_b: list[np.ndarray] = [None] * n_layers  # type: ignore[list-item]
    for k in reversed(range(n_layers)):
        layer = net.layers[k]
        if cache.masks[k] is not None:
            g = g * cache.masks[k]
        if k == n_layers - 1 and from_logits:
            dz = g
        elif layer.activation == "relu":
            dz = g * _relu_grad(cache.preacts[k])
        elif layer.activation == "softmax":
            p = cache.outputs[k]
            dz = p * (g - np.sum(g * p, axis=1, keepdims=True))
        else:
            dz = g
        grad_w[k] = cache.inputs[k].T @ dz
        grad_b[k] = dz.sum(axis=0)
        g = dz @ layer.weight.T
    return Gradients(grad_w, grad_b, g)


class Adam:
    """Adam with bias correction. State is per-parameter first/second moments."""

    def __init__(self, net: DenseNet, lr: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        if lr <= 0:
            raise ValueError("learning rate must be positive")
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in net.params()]
        self.v = [np.zeros_like(p) for p in net.params()]
        self.t = 0

    def step(self, net: DenseNet, grads: Gradients) -> DenseNet:
        flat = grads.flat()
        for g in flat:
            if not np.all(np.isfinite(g)):
                raise TrainingDiverged(f"non-finite gradient at optimizer step {self.t + 1}")
        params = net.params()
        if len(flat) != len(params):
            raise ShapeError("gradient list does not match network parameters")
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(params, flat, self.m, self.v):
            if p.shape != g.shape:
                raise ShapeError(f"gradient shape {g.shape} != parameter shape {p.shape}")
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
        net.touch()
        return net


@dataclass
class GradCheckReport:
    weight_errors: list[float]
    bias_errors: list[float]
    input_error: float

    @property
    def max_error(self) -> float:
        return max([*self.weight_errors, *self.bias_errors, self.input_error])

    def passed(self, tolerance: float = 1e-4) -> bool:
        return self.max_error < tolerance


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-6) -> float:
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
    return float(np.max(np.abs(a - n) / denom)) if a.size else 0.0


def _nudge_off_kinks(net: DenseNet, x: np.ndarray, rng: np.random.Generator,
                     margin: float = 1e-3, tries: int = 50) -> np.ndarray:
    for _ in range(tries):
        _, cache = forward(net, x, "infer")
        near = any(
            layer.activation == "relu" and np.any(np.abs(z) < margin)
            for layer, z in zip(net.layers, cache.preacts)
        )
        if not near:
            return x
        x = x + rng.normal(scale=1e-2, size=x.shape)
    return x


def grad_check(
    net: DenseNet,
    x: np.ndarray,
    tolerance: float = 1e-4,
    eps: float = 1e-5,
    rng: np.random.Generator | None = None,
) -> GradCheckReport:
    """Compare backward() against central differences of a random linear readout.

    Inputs sitting on ReLU kinks are nudged away first. ``tolerance`` only
    feeds ``report.passed()``; the report itself always carries raw errors.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    x = np.array(x, dtype=np.float64, ndmin=2)
    x = _nudge_off_kinks(net, x, rng)
    probe = rng.normal(size=(x.shape[0], net.output_dim))

    def loss(inp: np.ndarray) -> float:
        return float(np.sum(predict(net, inp) * probe))

    _, cache = forward(net, x, "infer")
    grads = backward(net, cache, probe)

    def numeric(arr: np.ndarray, f) -> np.ndarray:
        out = np.zeros_like(arr)
        it = np.nditer(arr, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            orig = arr[idx]
            arr[idx] = orig + eps
            up = f()
            arr[idx] = orig - eps
            down = f()
            arr[idx] = orig
            out[idx] = (up - down) / (2 * eps)
        return out

    weight_errors, bias_errors = [], []
    for k, layer in enumerate(net.layers):
        weight_errors.append(relative_error(grads.weights[k], numeric(layer.weight, lambda: loss(x))))
        bias_errors.append(relative_error(grads.biases[k], numeric(layer.bias, lambda: loss(x))))
    x_work = x.copy()
    input_error = relative_error(grads.inputs, numeric(x_work, lambda: loss(x_work)))
    return GradCheckReport(weight_errors, bias_errors, input_error)
