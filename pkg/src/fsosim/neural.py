"""Self-contained feed-forward network engine.

Dense layers with a catalog of activations, softmax cross-entropy, exact
reverse-mode gradients, SGD and Adam updates, and a finite-difference
gradient oracle. Everything runs in double precision on numpy arrays;
batches are row-major (one sample per row).

Crelu is the one activation that changes shape: it emits
[max(0, x), max(0, -x)], so a layer declared with `out` units produces
2*out values and the next layer's fan-in doubles. `init_mlp` handles the
chaining automatically.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SELU_LAMBDA = 1.0507
SELU_ALPHA = 1.6733


@dataclass(frozen=True)
class ActivationKind:
    """Activation selector; `param` is the LeakyRelu slope or Elu scale."""

    name: str
    param: float = 0.0

    def __post_init__(self):
        if self.name not in _ACTIVATIONS:
            raise ValueError(f"unknown activation {self.name!r}")
        if not np.isfinite(self.param):
            raise ValueError("activation parameter must be finite")

    @property
    def doubles_width(self) -> bool:
        return self.name == "crelu"


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


# name -> (value fn, derivative fn applied to pre-activation x)
_ACTIVATIONS = {
    "relu": (
        lambda x, p: np.maximum(0.0, x),
        lambda x, p: (x > 0).astype(float),
    ),
    "leaky_relu": (
        lambda x, p: np.where(x > 0, x, p * x),
        lambda x, p: np.where(x > 0, 1.0, p),
    ),
    "elu": (
        lambda x, p: np.where(x > 0, x, p * np.expm1(np.minimum(x, 0.0))),
        lambda x, p: np.where(x > 0, 1.0, p * np.exp(np.minimum(x, 0.0))),
    ),
    "selu": (
        lambda x, p: SELU_LAMBDA * np.where(x > 0, x, SELU_ALPHA * np.expm1(np.minimum(x, 0.0))),
        lambda x, p: SELU_LAMBDA * np.where(x > 0, 1.0, SELU_ALPHA * np.exp(np.minimum(x, 0.0))),
    ),
    "relu6": (
        lambda x, p: np.clip(x, 0.0, 6.0),
        lambda x, p: ((x > 0) & (x < 6)).astype(float),
    ),
    "tanh": (
        lambda x, p: np.tanh(x),
        lambda x, p: 1.0 - np.tanh(x) ** 2,
    ),
    "sigmoid": (
        lambda x, p: _sigmoid(x),
        lambda x, p: _sigmoid(x) * (1.0 - _sigmoid(x)),
    ),
    "softsign": (
        lambda x, p: x / (1.0 + np.abs(x)),
        lambda x, p: 1.0 / (1.0 + np.abs(x)) ** 2,
    ),
    "softplus": (
        lambda x, p: np.logaddexp(0.0, x),
        lambda x, p: _sigmoid(x),
    ),
    "identity": (
        lambda x, p: x,
        lambda x, p: np.ones_like(x),
    ),
    "crelu": (None, None),  # handled out of band: output is a concatenation
}

RELU = ActivationKind("relu")
CRELU = ActivationKind("crelu")
SELU = ActivationKind("selu")
RELU6 = ActivationKind("relu6")
TANH = ActivationKind("tanh")
SIGMOID = ActivationKind("sigmoid")
SOFTSIGN = ActivationKind("softsign")
SOFTPLUS = ActivationKind("softplus")
IDENTITY = ActivationKind("identity")


def leaky_relu(slope: float = 0.2) -> ActivationKind:
    return ActivationKind("leaky_relu", slope)


def elu(a: float = 1.0) -> ActivationKind:
    return ActivationKind("elu", a)


def activation_from_name(name: str, param: float | None = None) -> ActivationKind:
    """Parse an activation name as used in config files and checkpoints."""
    name = name.strip().lower()
    if name == "leaky_relu":
        return leaky_relu(0.2 if param is None else param)
    if name == "elu":
        return elu(1.0 if param is None else param)
    return ActivationKind(name, 0.0 if param is None else param)


def activate(kind: ActivationKind, x: np.ndarray) -> np.ndarray:
    """Apply an activation; Crelu concatenates [relu(x), relu(-x)] along the last axis."""
    x = np.asarray(x, dtype=float)
    if kind.name == "crelu":
        return np.concatenate([np.maximum(0.0, x), np.maximum(0.0, -x)], axis=-1)
    fn, _ = _ACTIVATIONS[kind.name]
    return fn(x, kind.param)


def _activation_backward(kind: ActivationKind, x: np.ndarray, upstream: np.ndarray) -> np.ndarray:
    """Gradient of the loss wrt pre-activation x given the post-activation gradient."""
    if kind.name == "crelu":
        half = x.shape[-1]
        up_pos, up_neg = upstream[..., :half], upstream[..., half:]
        return up_pos * (x > 0) - up_neg * (x < 0)
    _, dfn = _ACTIVATIONS[kind.name]
    return upstream * dfn(x, kind.param)


@dataclass
class DenseLayer:
    """Affine map plus activation: activate(x @ W.T + b)."""

    weights: np.ndarray  # (out, in)
    biases: np.ndarray  # (out,)
    activation: ActivationKind

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        self.biases = np.asarray(self.biases, dtype=float)
        if self.weights.ndim != 2 or self.biases.shape != (self.weights.shape[0],):
            raise ValueError("weights must be (out, in) with matching bias length")
        if not (np.isfinite(self.weights).all() and np.isfinite(self.biases).all()):
            raise ValueError("layer parameters must be finite")

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]

    @property
    def out_dim(self) -> int:
        width = self.weights.shape[0]
        return 2 * width if self.activation.doubles_width else width


@dataclass
class Mlp:
    """Stack of dense layers; dimensions chain through any Crelu doubling."""

    layers: list[DenseLayer]

    def __post_init__(self):
        if not self.layers:
            raise ValueError("network needs at least one layer")
        for prev, nxt in zip(self.layers, self.layers[1:]):
            if prev.out_dim != nxt.in_dim:
                raise ValueError(
                    f"layer dimension mismatch: {prev.out_dim} -> {nxt.in_dim}"
                )

    @property
    def input_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def output_dim(self) -> int:
        return self.layers[-1].out_dim

    def parameter_count(self) -> int:
        return sum(layer.weights.size + layer.biases.size for layer in self.layers)


@dataclass
class GradientSet:
    """Per-layer (dW, db) pairs, shapes mirroring the network."""

    weight_grads: list[np.ndarray]
    bias_grads: list[np.ndarray]

    @classmethod
    def zeros_like(cls, net: Mlp) -> "GradientSet":
        return cls(
            weight_grads=[np.zeros_like(l.weights) for l in net.layers],
            bias_grads=[np.zeros_like(l.biases) for l in net.layers],
        )

    def add(self, other: "GradientSet") -> None:
        for gw, ow in zip(self.weight_grads, other.weight_grads):
            gw += ow
        for gb, ob in zip(self.bias_grads, other.bias_grads):
            gb += ob


def init_mlp(layer_sizes: list[int], activation: ActivationKind, rng: np.random.Generator) -> Mlp:
    """Build a network with the given hidden activation and an identity output layer.

    `layer_sizes` lists the input width followed by each layer's declared
    output width. Weights are uniform in +-sqrt(6 / (fan_in + fan_out)),
    biases zero. When the hidden activation is Crelu the fan-in of each
    subsequent layer doubles automatically.
    """
    if len(layer_sizes) < 2 or any(s < 1 for s in layer_sizes):
        raise ValueError("layer_sizes needs >= 2 entries, all positive")
    layers = []
    in_dim = layer_sizes[0]
    last = len(layer_sizes) - 2
    for i, out_dim in enumerate(layer_sizes[1:]):
        act = IDENTITY if i == last else activation
        bound = np.sqrt(6.0 / (in_dim + out_dim))
        weights = rng.uniform(-bound, bound, size=(out_dim, in_dim))
        layers.append(DenseLayer(weights=weights, biases=np.zeros(out_dim), activation=act))
        in_dim = layers[-1].out_dim
    return Mlp(layers=layers)


def forward(net: Mlp, batch: np.ndarray) -> tuple[np.ndarray, list[tuple[np.ndarray, np.ndarray]]]:
    """Run a batch (rows = samples) through the network.

    Returns the outputs and a cache of (layer input, pre-activation) pairs
    sufficient for `backward`.
    """
    x = np.asarray(batch, dtype=float)
    if x.ndim != 2 or x.shape[1] != net.input_dim:
        raise ValueError(f"batch must be (n, {net.input_dim}), got {x.shape}")
    cache = []
    for layer in net.layers:
        z = x @ layer.weights.T + layer.biases
        cache.append((x, z))
        x = activate(layer.activation, z)
    return x, cache


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    ez = np.exp(z)
    return ez / ez.sum(axis=1, keepdims=True)


def softmax_cross_entropy(logits: np.ndarray, targets: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean cross-entropy of softmax(logits) against one-hot targets.

    Returns (loss, gradient wrt logits); the gradient is (softmax - target)
    divided by the batch size, so `backward` receives the mean-loss gradient.
    """
    logits = np.asarray(logits, dtype=float)
    targets = np.asarray(targets, dtype=float)
    if logits.shape != targets.shape:
        raise ValueError("logits and targets must have identical shapes")
    is_one_hot = np.all((targets == 0.0) | (targets == 1.0)) and np.all(targets.sum(axis=1) == 1.0)
    if not is_one_hot:
        raise ValueError("each target row must be one-hot")
    k = logits.shape[0]
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    log_probs = shifted - log_norm[:, None]
    loss = float(-np.sum(log_probs * targets) / k)
    grad = (np.exp(log_probs) - targets) / k
    return loss, grad


def backward(net: Mlp, cache: list[tuple[np.ndarray, np.ndarray]], loss_grad: np.ndarray) -> GradientSet:
    """Exact reverse-mode gradients of the scalar loss wrt every parameter.

    `loss_grad` is the gradient wrt the network outputs, shaped like them.
    Also usable to chain into an upstream network via the returned input
    gradient path (see `backward_with_input_grad`).
    """
    grads, _ = backward_with_input_grad(net, cache, loss_grad)
    return grads


def backward_with_input_grad(
    net: Mlp, cache: list[tuple[np.ndarray, np.ndarray]], loss_grad: np.ndarray
) -> tuple[GradientSet, np.ndarray]:
    if len(cache) != len(net.layers):
        raise ValueError("cache does not match network depth")
    upstream = np.asarray(loss_grad, dtype=float)
    if upstream.shape[1] != net.output_dim:
        raise ValueError("loss gradient width does not match network output")
    weight_grads = [None] * len(net.layers)
    bias_grads = [None] * len(net.layers)
    for i in reversed(range(len(net.layers))):
        layer = net.layers[i]
        x, z = cache[i]
        dz = _activation_backward(layer.activation, z, upstream)
        weight_grads[i] = dz.T @ x
        bias_grads[i] = dz.sum(axis=0)
        upstream = dz @ layer.weights
    return GradientSet(weight_grads=weight_grads, bias_grads=bias_grads), upstream


def sgd_step(net: Mlp, grads: GradientSet, learning_rate: float) -> Mlp:
    """Plain gradient step theta <- theta - lr * grad, in place."""
    if learning_rate <= 0:
        raise ValueError("learning_rate must be positive")
    for layer, gw, gb in zip(net.layers, grads.weight_grads, grads.bias_grads):
        layer.weights -= learning_rate * gw
        layer.biases -= learning_rate * gb
    return net


@dataclass
class AdamState:
    """First/second moment accumulators and hyperparameters for Adam."""

    learning_rate: float = 0.005
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m_weights: list[np.ndarray] = field(default_factory=list)
    v_weights: list[np.ndarray] = field(default_factory=list)
    m_biases: list[np.ndarray] = field(default_factory=list)
    v_biases: list[np.ndarray] = field(default_factory=list)

    @classmethod
    def for_net(cls, net: Mlp, learning_rate: float = 0.005) -> "AdamState":
        return cls(
            learning_rate=learning_rate,
            m_weights=[np.zeros_like(l.weights) for l in net.layers],
            v_weights=[np.zeros_like(l.weights) for l in net.layers],
            m_biases=[np.zeros_like(l.biases) for l in net.layers],
            v_biases=[np.zeros_like(l.biases) for l in net.layers],
        )


def adam_step(state: AdamState, net: Mlp, grads: GradientSet) -> tuple[AdamState, Mlp]:
    """One Adam update over all parameters, in place; returns (state, net)."""
    state.t += 1
    corr1 = 1.0 - state.beta1 ** state.t
    corr2 = 1.0 - state.beta2 ** state.t

    def update(param, grad, m, v):
        m *= state.beta1
        m += (1.0 - state.beta1) * grad
        v *= state.beta2
        v += (1.0 - state.beta2) * grad ** 2
        param -= state.learning_rate * (m / corr1) / (np.sqrt(v / corr2) + state.eps)

    for i, layer in enumerate(net.layers):
        update(layer.weights, grads.weight_grads[i], state.m_weights[i], state.v_weights[i])
        update(layer.biases, grads.bias_grads[i], state.m_biases[i], state.v_biases[i])
    return state, net


def gradcheck(net: Mlp, batch: np.ndarray, targets: np.ndarray, step: float = 1e-5) -> float:
    """Max relative error between `backward` and central finite differences.

    Perturbs every parameter by +-step and compares the two-sided slope of
    the softmax cross-entropy loss against the analytic gradient. Intended
    for small nets (<= 1e4 parameters).
    """
    if net.parameter_count() > 10_000:
        raise ValueError("gradcheck is for small networks (<= 1e4 parameters)")

    def loss_only():
        out, _ = forward(net, batch)
        loss, _ = softmax_cross_entropy(out, targets)
        return loss

    out, cache = forward(net, batch)
    _, loss_grad = softmax_cross_entropy(out, targets)
    grads = backward(net, cache, loss_grad)

    worst = 0.0
    for layer, gw, gb in zip(net.layers, grads.weight_grads, grads.bias_grads):
        for param, grad in ((layer.weights, gw), (layer.biases, gb)):
            flat = param.reshape(-1)
            gflat = grad.reshape(-1)
            for j in range(flat.size):
                orig = flat[j]
                flat[j] = orig + step
                hi = loss_only()
                flat[j] = orig - step
                lo = loss_only()
                flat[j] = orig
                numeric = (hi - lo) / (2.0 * step)
                denom = max(abs(gflat[j]), abs(numeric), 1e-8)
                worst = max(worst, abs(gflat[j] - numeric) / denom)
    return worst


_KINK_LOCATIONS = {
    "relu": (0.0,),
    "leaky_relu": (0.0,),
    "crelu": (0.0,),
    "elu": (0.0,),
    "selu": (0.0,),
    "relu6": (0.0, 6.0),
}


def min_kink_margin(net: Mlp, batch: np.ndarray) -> float:
    """Smallest |pre-activation - kink| across the whole forward pass.

    Finite-difference gradient checks on piecewise activations are only
    trustworthy when every pre-activation keeps a healthy margin from the
    kinks; smooth activations report +inf.
    """
    _, cache = forward(net, batch)
    margin = np.inf
    for layer, (_, z) in zip(net.layers, cache):
        for kink in _KINK_LOCATIONS.get(layer.activation.name, ()):
            margin = min(margin, float(np.abs(z - kink).min()))
    return margin


def save_mlp(net: Mlp, path) -> None:
    """Checkpoint a network to a textual format with exact float round-trip.

    Layout: a header naming layer shapes and activations, then per layer a
    row-major weight block and a bias line, all floats written with repr.
    """
    with open(path, "w") as fh:
        fh.write("mlp-checkpoint 1\n")
        fh.write(f"layers {len(net.layers)}\n")
        for layer in net.layers:
            out_w, in_w = layer.weights.shape
            act = layer.activation
            fh.write(f"layer {in_w} {out_w} {act.name} {act.param!r}\n")
        for layer in net.layers:
            for row in layer.weights:
                fh.write(" ".join(repr(float(v)) for v in row) + "\n")
            fh.write(" ".join(repr(float(v)) for v in layer.biases) + "\n")


def load_mlp(path) -> Mlp:
    """Load a checkpoint written by `save_mlp`."""
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    if not lines or lines[0] != "mlp-checkpoint 1":
        raise ValueError(f"{path}: not an mlp checkpoint")
    n_layers = int(lines[1].split()[1])
    specs = []
    for i in range(n_layers):
        _, in_w, out_w, name, param = lines[2 + i].split()
        specs.append((int(in_w), int(out_w), ActivationKind(name, float(param))))
    layers = []
    cursor = 2 + n_layers
    for in_w, out_w, act in specs:
        rows = [np.array(lines[cursor + r].split(), dtype=float) for r in range(out_w)]
        weights = np.vstack(rows)
        biases = np.array(lines[cursor + out_w].split(), dtype=float)
        cursor += out_w + 1
        layers.append(DenseLayer(weights=weights, biases=biases, activation=act))
    return Mlp(layers=layers)
