"""The four transceiver variants and their training and evaluation loops.

Variants:

* ``QAM_ML``      - fixed Gray QAM, coherent maximum-likelihood detection.
* ``QAM_DNN``     - fixed Gray QAM, learned MLP detector.
* ``DNN_ML``      - learned constellation, maximum-likelihood detection.
* ``END_TO_END``  - learned constellation and learned detector, trained jointly.

Learned parts train on softmax cross-entropy through the simulated channel:
per iteration a fresh batch of symbols, intensities, and noise is drawn, and
gradients flow back through the combiner and the transmit-power
normalization with the sampled intensities and noise held constant. The
constellation-with-ML variant trains the full pair and then discards the
learned detector, which is the only differentiable route to a trained
transmitter.

Receivers see the combined observation as a (re, im) pair, either raw or
divided by the effective gain (``CsiMode.EQUALIZED``, the default, which
makes parity with coherent ML attainable under per-symbol fading).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .mimo import (
    CombinedObservation,
    CombinerKind,
    LinkConfig,
    combine_block,
    complex_noise,
    ml_detect,
    ml_detect_block,
    noise_variance_from_esn0,
    propagate_block,
    sample_rowsums_block,
)
from .modem import (
    Constellation,
    min_pairwise_distance,
    normalize_power,
    one_hot_batch,
    qam_constellation,
)
from .neural import (
    CRELU,
    RELU,
    ActivationKind,
    AdamState,
    GradientSet,
    Mlp,
    adam_step,
    backward,
    backward_with_input_grad,
    forward,
    init_mlp,
    load_mlp,
    save_mlp,
    sgd_step,
    softmax_cross_entropy,
)


class TrainingDiverged(RuntimeError):
    """Raised when the training loss leaves the finite range."""


class DegenerateConstellation(RuntimeError):
    """Raised when a learned constellation collapses onto itself."""


class TransceiverKind(enum.Enum):
    QAM_ML = "qam-ml"
    QAM_DNN = "qam-dnn"
    DNN_ML = "dnn-ml"
    END_TO_END = "end-to-end"

    @property
    def trains(self) -> bool:
        return self is not TransceiverKind.QAM_ML

    @property
    def learned_transmitter(self) -> bool:
        return self in (TransceiverKind.DNN_ML, TransceiverKind.END_TO_END)

    @property
    def learned_receiver(self) -> bool:
        return self in (TransceiverKind.QAM_DNN, TransceiverKind.END_TO_END)


class CsiMode(enum.Enum):
    RAW = "raw"
    EQUALIZED = "equalized"


@dataclass
class LearnedTransmitter:
    """Constellation-shaping network: M one-hot inputs to 2 coordinates."""

    net: Mlp


@dataclass
class LearnedReceiver:
    """Detection network: (re, im) input to M logits; output layer is identity."""

    net: Mlp
    csi_mode: CsiMode = CsiMode.EQUALIZED

    def __post_init__(self):
        if self.net.layers[-1].activation.name != "identity":
            raise ValueError("receiver output layer must be identity (logits)")


@dataclass(frozen=True)
class TrainConfig:
    """Training hyperparameters; the defaults are the tuned values.

    ``activation=None`` picks Relu for single-aperture links and Crelu
    otherwise. ``train_esn0_db=None`` is filled in by the sweep driver with
    the Es/N0 of the point being produced.
    """

    hidden_layers: int = 4
    neurons_per_layer: int = 40
    activation: ActivationKind | None = None
    batch_size: int = 4096
    iterations: int = 1000
    learning_rate: float = 0.005
    optimizer: str = "adam"
    train_esn0_db: float | None = None
    seed: int | None = None

    def __post_init__(self):
        if min(self.hidden_layers, self.neurons_per_layer, self.batch_size, self.iterations) < 1:
            raise ValueError("all structural counts must be positive")
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")

    def resolve_activation(self, link: LinkConfig) -> ActivationKind:
        if self.activation is not None:
            return self.activation
        return RELU if link.n_t * link.n_r == 1 else CRELU


@dataclass
class Transceiver:
    """A ready-to-evaluate transmitter/receiver pair."""

    kind: TransceiverKind
    constellation: Constellation
    link: LinkConfig
    csi_mode: CsiMode = CsiMode.EQUALIZED
    transmitter: LearnedTransmitter | None = None
    receiver: LearnedReceiver | None = None

    def __post_init__(self):
        if self.kind.learned_receiver and self.receiver is None:
            raise ValueError(f"{self.kind.value} needs a trained receiver")
        if not self.kind.learned_receiver and self.receiver is not None:
            raise ValueError(f"{self.kind.value} detects with ML, not a receiver net")

    @property
    def order(self) -> int:
        return self.constellation.order


@dataclass(frozen=True)
class SerEstimate:
    """Monte Carlo symbol-error-rate with a Wilson 95% interval."""

    ser: float
    ci_low: float
    ci_high: float
    n_symbols: int
    n_errors: int


def qam_ml_transceiver(order: int, link: LinkConfig) -> Transceiver:
    """The untrained baseline: Gray QAM with coherent ML detection."""
    return Transceiver(
        kind=TransceiverKind.QAM_ML,
        constellation=qam_constellation(order),
        link=link,
    )


def transmitter_constellation(tx: LearnedTransmitter) -> Constellation:
    """Read the constellation out of a shaping network and normalize its power."""
    order = tx.net.input_dim
    raw, _ = forward(tx.net, np.eye(order))
    points = raw[:, 0] + 1j * raw[:, 1]
    energy = float(np.mean(np.abs(points) ** 2))
    if energy == 0.0:
        raise DegenerateConstellation("transmitter maps every symbol to the origin")
    normalized = points / math.sqrt(energy)
    if min_pairwise_distance(normalized) < 1e-6:
        raise DegenerateConstellation(
            "learned constellation collapsed (min pairwise distance < 1e-6)"
        )
    return normalize_power(points)


def _receiver_input(y: np.ndarray, g: np.ndarray, csi_mode: CsiMode) -> np.ndarray:
    u = y / g if csi_mode is CsiMode.EQUALIZED else y
    return np.column_stack([u.real, u.imag])


def _training_step(
    tx_net: Mlp | None,
    fixed_points: np.ndarray | None,
    rx_net: Mlp,
    labels: np.ndarray,
    rowsums: np.ndarray,
    noise: np.ndarray,
    link: LinkConfig,
    combiner: CombinerKind,
    csi_mode: CsiMode,
    order: int,
) -> tuple[float, GradientSet | None, GradientSet]:
    """Loss and gradients for one batch with the channel draw held fixed.

    The sampled intensities (via `rowsums`) and `noise` enter as constants,
    so the returned gradients are the exact pathwise derivatives of the
    batch loss. Split out from `train` so the finite-difference tests can
    replay a step with identical randomness.
    """
    if tx_net is not None:
        raw, tx_cache = forward(tx_net, np.eye(order))
        energy = float(np.mean(raw ** 2) * 2.0)  # mean over M of |point|^2
        if energy <= 0.0:
            raise DegenerateConstellation("transmitter collapsed to the origin mid-training")
        scale = energy ** -0.5
        points = scale * (raw[:, 0] + 1j * raw[:, 1])
    else:
        points = fixed_points

    x = points[labels]
    branch_obs = propagate_block(x, rowsums, link, noise_var=0.0)
    branch_obs = branch_obs + link.eta * noise
    y, g, a = combine_block(rowsums, branch_obs, link, combiner)

    rx_in = _receiver_input(y, g, csi_mode)
    logits, rx_cache = forward(rx_net, rx_in)
    loss, dlogits = softmax_cross_entropy(logits, one_hot_batch(labels, order))
    rx_grads, d_rx_in = backward_with_input_grad(rx_net, rx_cache, dlogits)

    if tx_net is None:
        return loss, None, rx_grads

    dy = d_rx_in / g[:, None] if csi_mode is CsiMode.EQUALIZED else d_rx_in
    dx = a[:, None] * dy  # y = a * x + const, per real coordinate
    d_points = np.zeros((order, 2))
    np.add.at(d_points, labels, dx)

    # points = scale * raw with scale = (mean |raw|^2)^(-1/2); the second
    # term is the gradient through the shared power normalization.
    inner = float(np.sum(d_points * raw))
    d_raw = scale * d_points - (scale ** 3 / order) * inner * raw
    tx_grads = backward(tx_net, tx_cache, d_raw)
    return loss, tx_grads, rx_grads


def train(
    kind: TransceiverKind,
    order: int,
    link: LinkConfig,
    combiner: CombinerKind,
    cfg: TrainConfig,
    rng: np.random.Generator | None = None,
    csi_mode: CsiMode = CsiMode.EQUALIZED,
) -> tuple[Transceiver, np.ndarray]:
    """Train one transceiver; returns it with the per-iteration loss history.

    Every iteration draws a fresh batch of uniform symbols, channel
    realizations, and noise at ``cfg.train_esn0_db``, then takes one
    optimizer step on all trainable parameters jointly. The receiver (the
    surrogate one included, for the constellation-with-ML variant) sees
    inputs in `csi_mode` during training and evaluation alike.
    """
    if not kind.trains:
        raise ValueError("the QAM-ML baseline has nothing to train")
    if cfg.train_esn0_db is None:
        raise ValueError("train_esn0_db must be set before training")
    if rng is None:
        rng = np.random.default_rng(cfg.seed)

    activation = cfg.resolve_activation(link)
    hidden = [cfg.neurons_per_layer] * cfg.hidden_layers
    tx_net = init_mlp([order, *hidden, 2], activation, rng) if kind.learned_transmitter else None
    rx_net = init_mlp([2, *hidden, order], activation, rng)
    fixed_points = None if kind.learned_transmitter else qam_constellation(order).points

    if cfg.optimizer == "adam":
        tx_state = AdamState.for_net(tx_net, cfg.learning_rate) if tx_net else None
        rx_state = AdamState.for_net(rx_net, cfg.learning_rate)
    sigma2 = noise_variance_from_esn0(cfg.train_esn0_db)
    history = np.empty(cfg.iterations)

    for it in range(cfg.iterations):
        labels = rng.integers(0, order, size=cfg.batch_size)
        rowsums = sample_rowsums_block(link, cfg.batch_size, rng)
        noise = complex_noise(rng, sigma2, size=(cfg.batch_size, link.n_r))
        loss, tx_grads, rx_grads = _training_step(
            tx_net, fixed_points, rx_net, labels, rowsums, noise,
            link, combiner, csi_mode, order,
        )
        if not math.isfinite(loss):
            raise TrainingDiverged(f"non-finite loss at iteration {it}")
        history[it] = loss
        if cfg.optimizer == "adam":
            if tx_net is not None:
                adam_step(tx_state, tx_net, tx_grads)
            adam_step(rx_state, rx_net, rx_grads)
        else:
            if tx_net is not None:
                sgd_step(tx_net, tx_grads, cfg.learning_rate)
            sgd_step(rx_net, rx_grads, cfg.learning_rate)

    if kind.learned_transmitter:
        transmitter = LearnedTransmitter(net=tx_net)
        constellation = transmitter_constellation(transmitter)
    else:
        transmitter = None
        constellation = qam_constellation(order)
    receiver = LearnedReceiver(net=rx_net, csi_mode=csi_mode) if kind.learned_receiver else None

    return (
        Transceiver(
            kind=kind,
            constellation=constellation,
            link=link,
            csi_mode=csi_mode,
            transmitter=transmitter,
            receiver=receiver,
        ),
        history,
    )


def detect(tr: Transceiver, co: CombinedObservation) -> int:
    """Recover one symbol index from a combined observation."""
    if tr.receiver is None:
        return ml_detect(co, tr.constellation)
    rx_in = _receiver_input(np.array([co.y]), np.array([co.g]), tr.receiver.csi_mode)
    logits, _ = forward(tr.receiver.net, rx_in)
    return int(np.argmax(logits[0]))


def detect_block(tr: Transceiver, y: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Vectorized `detect` over a block of combined observations."""
    if tr.receiver is None:
        return ml_detect_block(y, g, tr.constellation)
    logits, _ = forward(tr.receiver.net, _receiver_input(y, g, tr.receiver.csi_mode))
    return np.argmax(logits, axis=1)


def wilson_interval(n_errors: int, n: int, z: float = 1.959963984540054) -> tuple[float, float]:
    """Wilson score 95% interval for a binomial proportion."""
    if n < 1:
        raise ValueError("need at least one trial")
    phat = n_errors / n
    denom = 1.0 + z ** 2 / n
    center = (phat + z ** 2 / (2 * n)) / denom
    half = (z / denom) * math.sqrt(phat * (1 - phat) / n + z ** 2 / (4 * n ** 2))
    # at the boundaries the exact interval edge coincides with phat; avoid
    # leaving cancellation residue above/below it
    low = 0.0 if n_errors == 0 else max(0.0, center - half)
    high = 1.0 if n_errors == n else min(1.0, center + half)
    return low, high


def evaluate_ser(
    tr: Transceiver,
    link: LinkConfig,
    combiner: CombinerKind,
    esn0_db: float,
    n_symbols: int,
    rng: np.random.Generator,
    block_size: int = 1 << 16,
) -> SerEstimate:
    """Monte Carlo SER with a fresh channel and noise draw for every symbol."""
    if n_symbols < 1:
        raise ValueError("n_symbols must be >= 1")
    sigma2 = noise_variance_from_esn0(esn0_db)
    errors = 0
    remaining = n_symbols
    while remaining > 0:
        block = min(block_size, remaining)
        labels = rng.integers(0, tr.order, size=block)
        x = tr.constellation.points[labels]
        rowsums = sample_rowsums_block(link, block, rng)
        branch_obs = propagate_block(x, rowsums, link, sigma2, rng)
        y, g, _ = combine_block(rowsums, branch_obs, link, combiner)
        decisions = detect_block(tr, y, g)
        errors += int((decisions != labels).sum())
        remaining -= block
    low, high = wilson_interval(errors, n_symbols)
    return SerEstimate(
        ser=errors / n_symbols,
        ci_low=low,
        ci_high=high,
        n_symbols=n_symbols,
        n_errors=errors,
    )


# --- persistence ---


def save_transceiver(tr: Transceiver, stem) -> list[Path]:
    """Write constellation CSV, network checkpoints, and a metadata file.

    Files share the `stem` prefix; returns the paths written.
    """
    stem = Path(stem)
    stem.parent.mkdir(parents=True, exist_ok=True)
    written = []

    const_path = stem.with_name(stem.name + "_constellation.csv")
    tr.constellation.to_csv(const_path)
    written.append(const_path)

    if tr.transmitter is not None:
        p = stem.with_name(stem.name + "_tx.mlp")
        save_mlp(tr.transmitter.net, p)
        written.append(p)
    if tr.receiver is not None:
        p = stem.with_name(stem.name + "_rx.mlp")
        save_mlp(tr.receiver.net, p)
        written.append(p)

    meta = stem.with_name(stem.name + "_meta.txt")
    with open(meta, "w") as fh:
        fh.write(f"kind = {tr.kind.value}\n")
        fh.write(f"order = {tr.order}\n")
        fh.write(f"csi_mode = {tr.csi_mode.value}\n")
        fh.write(f"n_t = {tr.link.n_t}\n")
        fh.write(f"n_r = {tr.link.n_r}\n")
        fh.write(f"eta = {tr.link.eta!r}\n")
        fh.write(f"normalize_tx_power = {str(tr.link.normalize_tx_power).lower()}\n")
        if tr.link.turbulence is None:
            fh.write("turbulence = none\n")
        else:
            fh.write(f"alpha = {tr.link.turbulence.alpha!r}\n")
            fh.write(f"beta = {tr.link.turbulence.beta!r}\n")
    written.append(meta)
    return written


def load_transceiver(stem) -> Transceiver:
    """Rebuild a transceiver saved by `save_transceiver`."""
    import csv as _csv

    from .turbulence import GammaGammaParams

    stem = Path(stem)
    meta = {}
    with open(stem.with_name(stem.name + "_meta.txt")) as fh:
        for line in fh:
            key, _, value = line.partition("=")
            meta[key.strip()] = value.strip()

    if meta.get("turbulence") == "none":
        turbulence = None
    else:
        turbulence = GammaGammaParams(alpha=float(meta["alpha"]), beta=float(meta["beta"]))
    link = LinkConfig(
        n_t=int(meta["n_t"]),
        n_r=int(meta["n_r"]),
        eta=float(meta["eta"]),
        turbulence=turbulence,
        normalize_tx_power=meta["normalize_tx_power"] == "true",
    )
    kind = TransceiverKind(meta["kind"])
    csi_mode = CsiMode(meta["csi_mode"])

    with open(stem.with_name(stem.name + "_constellation.csv")) as fh:
        rows = list(_csv.reader(fh))
    points = np.array([float(r[1]) + 1j * float(r[2]) for r in rows[1:]])
    constellation = Constellation(points=points)

    transmitter = None
    tx_path = stem.with_name(stem.name + "_tx.mlp")
    if tx_path.exists():
        transmitter = LearnedTransmitter(net=load_mlp(tx_path))
    receiver = None
    rx_path = stem.with_name(stem.name + "_rx.mlp")
    if rx_path.exists():
        receiver = LearnedReceiver(net=load_mlp(rx_path), csi_mode=csi_mode)

    return Transceiver(
        kind=kind,
        constellation=constellation,
        link=link,
        csi_mode=csi_mode,
        transmitter=transmitter,
        receiver=receiver,
    )
