"""Small dense networks on numpy with hand-written backprop.

Weights are stored (out, in) so a layer computes x @ W.T + b.  Gradients
come from explicit chain-rule passes, not autodiff, which keeps every
training step reproducible from a seed and easy to check against finite
differences.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import UsageError

ACTIVATIONS = ("relu", "linear")


@dataclass
class DenseLayer:
    W: np.ndarray
    b: np.ndarray
    activation: str = "relu"

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise UsageError(f"unknown activation {self.activation!r}")
        self.W = np.asarray(self.W, dtype=np.float64)
        self.b = np.asarray(self.b, dtype=np.float64)
        if self.W.ndim != 2 or self.b.shape != (self.W.shape[0],):
            raise UsageError("layer shapes are inconsistent")

    @property
    def fan_in(self) -> int:
        return self.W.shape[1]

    @property
    def fan_out(self) -> int:
        return self.W.shape[0]


@dataclass
class DenseNet:
    layers: list[DenseLayer]

    @property
    def in_dim(self) -> int:
        return self.layers[0].fan_in

    @property
    def out_dim(self) -> int:
        return self.layers[-1].fan_out

    def parameters(self) -> list[np.ndarray]:
        out = []
        for layer in self.layers:
            out.extend((layer.W, layer.b))
        return out


def init_layer(rng: np.random.Generator, fan_in: int, fan_out: int, activation: str) -> DenseLayer:
    # He-style uniform: limit sqrt(6 / fan_in), biases start at zero.
    limit = np.sqrt(6.0 / fan_in)
    W = rng.uniform(-limit, limit, size=(fan_out, fan_in))
    return DenseLayer(W=W, b=np.zeros(fan_out), activation=activation)


def build_net(sizes: list[int], rng: np.random.Generator, out_activation: str = "linear") -> DenseNet:
    """Stack relu layers over the given sizes; the last layer is `out_activation`."""
    if len(sizes) < 2:
        raise UsageError("need at least an input and an output size")
    if any(s < 1 for s in sizes):
        raise UsageError("layer sizes must be positive")
    layers = []
    for i in range(len(sizes) - 1):
        act = out_activation if i == len(sizes) - 2 else "relu"
        layers.append(init_layer(rng, sizes[i], sizes[i + 1], act))
    return DenseNet(layers)


def _activate(a: np.ndarray, kind: str) -> np.ndarray:
    return np.maximum(a, 0.0) if kind == "relu" else a


def forward(net: DenseNet, X: np.ndarray) -> np.ndarray:
    h = np.asarray(X, dtype=np.float64)
    for layer in net.layers:
        h = _activate(h @ layer.W.T + layer.b, layer.activation)
    return h


def forward_cache(net: DenseNet, X: np.ndarray):
    """Forward pass that keeps (input, pre-activation) per layer for backward."""
    h = np.asarray(X, dtype=np.float64)
    caches = []
    for layer in net.layers:
        a = h @ layer.W.T + layer.b
        caches.append((h, a))
        h = _activate(a, layer.activation)
    return h, caches


def backward(net: DenseNet, caches, g_out: np.ndarray):
    """Chain g_out back through the net.

    Returns (grads, g_in): grads matches net.parameters() order, g_in is
    the gradient w.r.t. the network input.
    """
    g = np.asarray(g_out, dtype=np.float64)
    grads: list[np.ndarray] = []
    for layer, (h_in, a) in zip(reversed(net.layers), reversed(caches)):
        if layer.activation == "relu":
            g = g * (a > 0.0)
        gW = g.T @ h_in
        gb = g.sum(axis=0)
        grads.append(gb)
        grads.append(gW)
        g = g @ layer.W
    grads.reverse()
    return grads, g


def softmax(logits: np.ndarray) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def one_hot(labels: np.ndarray, n_classes: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    if labels.min() < 0 or labels.max() >= n_classes:
        raise UsageError("label out of range for the declared class count")
    Y = np.zeros((labels.size, n_classes), dtype=np.float64)
    Y[np.arange(labels.size), labels] = 1.0
    return Y


def softmax_cross_entropy(logits: np.ndarray, labels: np.ndarray):
    """Mean cross-entropy and its gradient w.r.t. the logits.

    grad = (softmax(logits) - onehot(labels)) / n.
    """
    logits = np.asarray(logits, dtype=np.float64)
    n = logits.shape[0]
    logp = log_softmax(logits)
    labels = np.asarray(labels, dtype=np.int64)
    loss = float(-logp[np.arange(n), labels].mean())
    grad = (softmax(logits) - one_hot(labels, logits.shape[1])) / n
    return loss, grad


def count_parameters(net: DenseNet) -> int:
    """Total trainable scalars: sum over layers of out*in + out."""
    return sum(layer.W.size + layer.b.size for layer in net.layers)


class Sgd:
    def __init__(self, lr: float):
        self.lr = lr

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        for p, g in zip(params, grads):
            p -= self.lr * g


class Adam:
    def __init__(self, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m: list[np.ndarray] | None = None
        self.v: list[np.ndarray] | None = None

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        if self.m is None:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]
        self.t += 1
        b1t = 1.0 - self.beta1**self.t
        b2t = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / b1t) / (np.sqrt(v / b2t) + self.eps)


def make_optimizer(name: str, lr: float):
    if name == "adam":
        return Adam(lr)
    if name == "sgd":
        return Sgd(lr)
    raise UsageError(f"unknown optimizer {name!r}")


def net_to_dict(net: DenseNet) -> dict:
    return {
        "layers": [
            {"W": layer.W.tolist(), "b": layer.b.tolist(), "activation": layer.activation}
            for layer in net.layers
        ]
    }


def net_from_dict(d: dict) -> DenseNet:
    return DenseNet(
        [
            DenseLayer(
                W=np.array(e["W"], dtype=np.float64),
                b=np.array(e["b"], dtype=np.float64),
                activation=e["activation"],
            )
            for e in d["layers"]
        ]
    )
