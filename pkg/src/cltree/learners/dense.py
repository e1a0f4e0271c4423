"""Feedforward classifier with hand-derived gradients.

Layer ``l`` maps ``h -> h @ W[l].T + b[l]`` with ``W[l]`` of shape (out, in);
hidden layers apply the activation, the last layer emits raw logits.
Parameter arrays may be shared between networks (multi-head models share
their trunk this way), and :func:`sgd_step` updates them in place.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ACTIVATIONS = ("tanh", "relu")


@dataclass
class DenseNet:
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    activation: str = "tanh"

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {ACTIVATIONS}")
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ValueError("need one bias per weight matrix")
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.shape != (w.shape[0],):
                raise ValueError(f"layer {l}: weight {w.shape} and bias {b.shape} do not match")
            if l and w.shape[1] != self.weights[l - 1].shape[0]:
                raise ValueError(f"layer {l}: input size {w.shape[1]} does not chain")

    @classmethod
    def init(cls, sizes, rng: np.random.Generator, activation: str = "tanh") -> "DenseNet":
        """Weights and biases uniform in +-1/sqrt(fan_in)."""
        ws, bs = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            bound = 1.0 / np.sqrt(fan_in)
            ws.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
            bs.append(rng.uniform(-bound, bound, size=fan_out))
        return cls(ws, bs, activation)

    @classmethod
    def zeros(cls, sizes, activation: str = "tanh") -> "DenseNet":
        return cls([np.zeros((o, i)) for i, o in zip(sizes[:-1], sizes[1:])],
                   [np.zeros(o) for o in sizes[1:]], activation)

    @property
    def sizes(self) -> list[int]:
        return [self.weights[0].shape[1]] + [w.shape[0] for w in self.weights]

    def parameters(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def copy(self) -> "DenseNet":
        return DenseNet([w.copy() for w in self.weights], [b.copy() for b in self.biases],
                        self.activation)


@dataclass
class GradientBundle:
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def parameters(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def scale(self, c: float) -> "GradientBundle":
        return GradientBundle([c * w for w in self.weights], [c * b for b in self.biases])


def _act(z, kind):
    return np.tanh(z) if kind == "tanh" else np.maximum(z, 0.0)


def _act_grad(z, a, kind):
    return 1.0 - a * a if kind == "tanh" else (z > 0).astype(z.dtype)


def _as_batch(net, x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != net.sizes[0]:
        raise ValueError(f"input has shape {x.shape}, network expects (*, {net.sizes[0]})")
    return x


def forward_cache(net: DenseNet, x):
    x = _as_batch(net, x)
    inputs, pre = [], []
    h = x
    last = len(net.weights) - 1
    for l, (w, b) in enumerate(zip(net.weights, net.biases)):
        inputs.append(h)
        z = h @ w.T + b
        pre.append(z)
        h = z if l == last else _act(z, net.activation)
    return h, (inputs, pre)


def forward(net: DenseNet, x) -> np.ndarray:
    return forward_cache(net, x)[0]


def backward(net: DenseNet, cache, dlogits: np.ndarray) -> tuple[GradientBundle, np.ndarray]:
    """Gradients of ``sum(dlogits * logits)`` w.r.t. parameters and input."""
    inputs, pre = cache
    gw = [None] * len(net.weights)
    gb = [None] * len(net.weights)
    delta = dlogits
    for l in range(len(net.weights) - 1, -1, -1):
        gw[l] = delta.T @ inputs[l]
        gb[l] = delta.sum(axis=0)
        delta = delta @ net.weights[l]
        if l:
            delta = delta * _act_grad(pre[l - 1], inputs[l], net.activation)
    return GradientBundle(gw, gb), delta


def log_softmax(logits: np.ndarray) -> np.ndarray:
    m = logits.max(axis=-1, keepdims=True)
    shifted = logits - m
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def softmax(logits: np.ndarray) -> np.ndarray:
    return np.exp(log_softmax(logits))


def _restrict(logits, allowed):
    if allowed is None:
        return logits
    masked = np.full_like(logits, -np.inf)
    masked[:, allowed] = logits[:, allowed]
    return masked


def backward_ce(net: DenseNet, x, labels, allowed=None, weight: float = 1.0):
    """Mean softmax cross-entropy and its analytic gradient.

    ``allowed`` restricts the softmax to a subset of output units (a task's
    class block); labels must then fall inside it. ``weight`` scales both
    loss and gradient, for combining sub-batches.
    """
    logits, cache = forward_cache(net, x)
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    n_out = logits.shape[1]
    if labels.shape[0] != logits.shape[0]:
        raise ValueError("one label per input row required")
    valid = np.arange(n_out) if allowed is None else np.asarray(allowed)
    if labels.size and (labels.min() < 0 or labels.max() >= n_out
                        or not np.isin(labels, valid).all()):
        raise ValueError("label outside the (masked) output head")
    logp = log_softmax(_restrict(logits, allowed))
    n = labels.shape[0]
    loss = -logp[np.arange(n), labels].mean()
    d = np.exp(logp)
    d[np.arange(n), labels] -= 1.0
    d *= weight / n
    grads, _ = backward(net, cache, d)
    return weight * float(loss), grads


def sgd_step(net: DenseNet, grads: GradientBundle, lr: float) -> DenseNet:
    """``theta <- theta - lr * g`` in place (shared arrays see the update)."""
    if lr < 0:
        raise ValueError("learning rate must be non-negative")
    for g in grads.parameters():
        if not np.all(np.isfinite(g)):
            raise FloatingPointError("non-finite gradient")
    for p, g in zip(net.parameters(), grads.parameters()):
        p -= lr * g
    return net


def fisher_diagonal(net: DenseNet, x, allowed=None) -> GradientBundle:
    """Mean squared per-sample gradient of ``log p(argmax | x)``.

    For a layer with input ``a`` and back-propagated signal ``delta``, the
    per-sample weight gradient is the outer product ``delta a^T``, so its
    elementwise square is ``delta^2 (a^2)^T`` and the batch mean needs no
    per-sample loop.
    """
    logits, (inputs, pre) = forward_cache(net, x)
    n = logits.shape[0]
    if n == 0:
        raise ValueError("Fisher estimate needs at least one sample")
    logp = log_softmax(_restrict(logits, allowed))
    yhat = logp.argmax(axis=1)
    delta = np.exp(logp)
    delta[np.arange(n), yhat] -= 1.0
    fw = [None] * len(net.weights)
    fb = [None] * len(net.weights)
    for l in range(len(net.weights) - 1, -1, -1):
        fw[l] = (delta * delta).T @ (inputs[l] * inputs[l]) / n
        fb[l] = (delta * delta).mean(axis=0)
        delta = delta @ net.weights[l]
        if l:
            delta = delta * _act_grad(pre[l - 1], inputs[l], net.activation)
    return GradientBundle(fw, fb)


def to_named_tensors(net: DenseNet, prefix: str = "") -> dict:
    out = {}
    for l, (w, b) in enumerate(zip(net.weights, net.biases)):
        out[f"{prefix}layer{l}.weight"] = {"shape": list(w.shape), "values": w.ravel().tolist()}
        out[f"{prefix}layer{l}.bias"] = {"shape": list(b.shape), "values": b.ravel().tolist()}
    return out


def from_named_tensors(d: dict, activation: str = "tanh", prefix: str = "") -> DenseNet:
    ws, bs = [], []
    l = 0
    while f"{prefix}layer{l}.weight" in d:
        w, b = d[f"{prefix}layer{l}.weight"], d[f"{prefix}layer{l}.bias"]
        ws.append(np.asarray(w["values"], dtype=np.float64).reshape(w["shape"]))
        bs.append(np.asarray(b["values"], dtype=np.float64).reshape(b["shape"]))
        l += 1
    if not ws:
        raise ValueError("no layers found")
    return DenseNet(ws, bs, activation)
