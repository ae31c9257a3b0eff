"""Minimal feed-forward network engine on numpy.

Configurable MLPs with ReLU hidden layers and a sigmoid or linear
output, exact analytic backpropagation for BCE/MSE, Adam updates, and a
deterministic mini-batch training loop with a held-out validation
split. Everything is a pure function of its inputs and seed; training
never mutates your data.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError, NumericalError

HIDDEN_ACTIVATIONS = ("relu",)
OUTPUT_ACTIVATIONS = ("sigmoid", "linear")

# Clamp for BCE so log(0) can never occur.
BCE_CLAMP = 1e-12

# Adam defaults; the learning rate follows the training setup, the
# moment decays and epsilon are the optimizer's canonical constants.
ADAM_LR = 0.001
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass(frozen=True)
class MlpConfig:
    """Network shape: layer widths from input to output, activations,
    and which layer is the encoder output (latent)."""

    layer_widths: tuple[int, ...]
    output_activation: str
    latent_index: int
    hidden_activation: str = "relu"

    def __post_init__(self):
        object.__setattr__(self, "layer_widths", tuple(int(w) for w in self.layer_widths))
        if len(self.layer_widths) < 3:
            raise ConfigError("an MLP needs at least input, one hidden, and output layers")
        if any(w < 1 for w in self.layer_widths):
            raise ConfigError(f"layer widths must be >= 1, got {self.layer_widths}")
        if not 0 < self.latent_index < len(self.layer_widths) - 1:
            raise ConfigError(
                f"latent_index {self.latent_index} must name a hidden layer "
                f"(1..{len(self.layer_widths) - 2})"
            )
        if self.hidden_activation not in HIDDEN_ACTIVATIONS:
            raise ConfigError(f"unknown hidden activation {self.hidden_activation!r}")
        if self.output_activation not in OUTPUT_ACTIVATIONS:
            raise ConfigError(f"unknown output activation {self.output_activation!r}")

    @property
    def n_layers(self) -> int:
        """Number of weight layers (connections), not counting the input."""
        return len(self.layer_widths) - 1

    def loss_kind(self) -> str:
        """The loss paired with the output activation: sigmoid <-> bce,
        linear <-> mse."""
        return "bce" if self.output_activation == "sigmoid" else "mse"


@dataclass
class MlpParams:
    """Per-layer weight matrices (in x out) and bias vectors."""

    config: MlpConfig
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def copy(self) -> "MlpParams":
        return MlpParams(
            config=self.config,
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
        )


@dataclass
class Gradients:
    weights: list[np.ndarray]
    biases: list[np.ndarray]


@dataclass
class AdamState:
    """Per-parameter first/second moment accumulators and step count."""

    m_weights: list[np.ndarray]
    v_weights: list[np.ndarray]
    m_biases: list[np.ndarray]
    v_biases: list[np.ndarray]
    t: int = 0
    lr: float = ADAM_LR
    beta1: float = ADAM_BETA1
    beta2: float = ADAM_BETA2
    eps: float = ADAM_EPS

    @classmethod
    def for_params(cls, params: MlpParams, lr: float = ADAM_LR) -> "AdamState":
        return cls(
            m_weights=[np.zeros_like(w) for w in params.weights],
            v_weights=[np.zeros_like(w) for w in params.weights],
            m_biases=[np.zeros_like(b) for b in params.biases],
            v_biases=[np.zeros_like(b) for b in params.biases],
            lr=lr,
        )


@dataclass
class ForwardCache:
    """Pre-activations z[l] and post-activations a[l] per layer;
    activations[0] is the input batch."""

    pre: list[np.ndarray]
    activations: list[np.ndarray]

    @property
    def output(self) -> np.ndarray:
        return self.activations[-1]


@dataclass
class TrainHistory:
    """Per-epoch training and validation losses. val_loss is empty when
    no validation rows were held out."""

    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("epoch,train_loss,val_loss\n")
            for i, tr in enumerate(self.train_loss):
                val = f"{self.val_loss[i]:.17g}" if i < len(self.val_loss) else ""
                fh.write(f"{i + 1},{tr:.17g},{val}\n")


def init_params(config: MlpConfig, seed: int) -> MlpParams:
    """Glorot-uniform weights in +-sqrt(6/(fan_in+fan_out)), zero biases."""
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(config.layer_widths[:-1], config.layer_widths[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MlpParams(config=config, weights=weights, biases=biases)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    # Split by sign to avoid overflow in exp.
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def forward(params: MlpParams, X) -> ForwardCache:
    """Run the network on a batch, keeping every layer's values for
    backpropagation."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ConfigError("X must be 2-D (batch x features)")
    if not np.isfinite(X).all():
        raise DataError("network input contains non-finite values")
    cfg = params.config
    if X.shape[1] != cfg.layer_widths[0]:
        raise ConfigError(
            f"input width {X.shape[1]} != network input width {cfg.layer_widths[0]}"
        )
    pre, acts = [], [X]
    a = X
    last = cfg.n_layers - 1
    for l, (W, b) in enumerate(zip(params.weights, params.biases)):
        z = a @ W + b
        pre.append(z)
        if l < last:
            a = np.maximum(z, 0.0)
        elif cfg.output_activation == "sigmoid":
            a = _sigmoid(z)
        else:
            a = z
        acts.append(a)
    return ForwardCache(pre=pre, activations=acts)


def _check_shapes(pred: np.ndarray, target: np.ndarray) -> None:
    if pred.shape != target.shape:
        raise ConfigError(f"shape mismatch: pred {pred.shape} vs target {target.shape}")


def bce_loss(pred, target) -> float:
    """Mean binary cross-entropy over all entries, with predictions
    clamped to [BCE_CLAMP, 1 - BCE_CLAMP]."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    _check_shapes(pred, target)
    p = np.clip(pred, BCE_CLAMP, 1.0 - BCE_CLAMP)
    return float(-np.mean(target * np.log(p) + (1.0 - target) * np.log1p(-p)))


def mse_loss(pred, target) -> float:
    """Mean squared error over all entries."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    _check_shapes(pred, target)
    return float(np.mean((pred - target) ** 2))


def backward(params: MlpParams, cache: ForwardCache, target, loss_kind: str) -> Gradients:
    """Exact gradients of the scalar loss w.r.t. every weight and bias.

    loss_kind must match the output activation: 'bce' with sigmoid,
    'mse' with linear.
    """
    cfg = params.config
    if loss_kind != cfg.loss_kind():
        raise ConfigError(
            f"loss {loss_kind!r} does not match output activation "
            f"{cfg.output_activation!r}"
        )
    target = np.asarray(target, dtype=np.float64)
    out = cache.output
    _check_shapes(out, target)
    batch, out_dim = out.shape
    scale = 1.0 / (batch * out_dim)
    # For both sigmoid+BCE and linear+MSE the output-layer delta
    # collapses to (prediction - target) times the mean-loss scale
    # (MSE carries its factor 2).
    if loss_kind == "bce":
        delta = (out - target) * scale
    else:
        delta = 2.0 * (out - target) * scale

    grads_w = [np.empty(0)] * cfg.n_layers
    grads_b = [np.empty(0)] * cfg.n_layers
    for l in range(cfg.n_layers - 1, -1, -1):
        grads_w[l] = cache.activations[l].T @ delta
        grads_b[l] = delta.sum(axis=0)
        if l > 0:
            delta = (delta @ params.weights[l].T) * (cache.pre[l - 1] > 0)
    return Gradients(weights=grads_w, biases=grads_b)


def adam_step(params: MlpParams, grads: Gradients, state: AdamState):
    """One Adam update with bias correction. Parameters and state are
    updated in place and returned."""
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**state.t
    c2 = 1.0 - b2**state.t
    for i in range(len(params.weights)):
        for p, g, m, v in (
            (params.weights[i], grads.weights[i], state.m_weights[i], state.v_weights[i]),
            (params.biases[i], grads.biases[i], state.m_biases[i], state.v_biases[i]),
        ):
            if p.shape != g.shape:
                raise ConfigError("gradient shape does not match parameter shape")
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return params, state


def train(
    config: MlpConfig,
    X,
    Y,
    *,
    epochs: int,
    batch_size: int,
    val_fraction: float,
    seed: int,
    lr: float = ADAM_LR,
) -> tuple[MlpParams, TrainHistory]:
    """Mini-batch Adam training with a validation split held out before
    any training step.

    The epoch training loss is the row-weighted mean of the mini-batch
    losses (equals the loss over all training rows visited that epoch);
    the validation loss is evaluated on frozen parameters at each epoch
    end. Deterministic given the seed. A non-finite loss aborts with a
    diagnostic instead of propagating NaNs.
    """
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if X.ndim != 2 or Y.ndim != 2 or X.shape[0] != Y.shape[0]:
        raise ConfigError("X and Y must be 2-D with equal row counts")
    if not 0.0 <= val_fraction < 1.0:
        raise ConfigError(f"val_fraction must be in [0, 1), got {val_fraction}")
    if epochs < 0 or batch_size < 1:
        raise ConfigError("epochs must be >= 0 and batch_size >= 1")
    n = X.shape[0]
    loss_fn = bce_loss if config.loss_kind() == "bce" else mse_loss

    params = init_params(config, seed)
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    n_val = int(round(val_fraction * n))
    val_idx, train_idx = perm[:n_val], perm[n_val:]
    if batch_size > train_idx.size:
        raise ConfigError(
            f"batch_size {batch_size} exceeds the {train_idx.size} training rows"
        )
    X_val, Y_val = X[val_idx], Y[val_idx]

    history = TrainHistory()
    state = AdamState.for_params(params, lr=lr)
    for epoch in range(epochs):
        order = train_idx[rng.permutation(train_idx.size)]
        total, seen = 0.0, 0
        for lo in range(0, order.size, batch_size):
            batch = order[lo : lo + batch_size]
            cache = forward(params, X[batch])
            loss = loss_fn(cache.output, Y[batch])
            if not np.isfinite(loss):
                raise NumericalError(
                    f"training diverged: non-finite loss at epoch {epoch + 1}, "
                    f"batch starting at row {lo}"
                )
            total += loss * batch.size
            seen += batch.size
            grads = backward(params, cache, Y[batch], config.loss_kind())
            adam_step(params, grads, state)
        history.train_loss.append(total / seen)
        if n_val > 0:
            val = loss_fn(forward(params, X_val).output, Y_val)
            if not np.isfinite(val):
                raise NumericalError(
                    f"training diverged: non-finite validation loss at epoch {epoch + 1}"
                )
            history.val_loss.append(val)
    return params, history


MODEL_FORMAT = "tabfair-mlp 1"


def save_mlp(path, params: MlpParams) -> None:
    """Persist a network as text (17 significant digits, exact round-trip)."""
    cfg = params.config
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(MODEL_FORMAT + "\n")
        fh.write("widths " + " ".join(str(w) for w in cfg.layer_widths) + "\n")
        fh.write(f"hidden_activation {cfg.hidden_activation}\n")
        fh.write(f"output_activation {cfg.output_activation}\n")
        fh.write(f"latent_index {cfg.latent_index}\n")
        for l, (W, b) in enumerate(zip(params.weights, params.biases)):
            fh.write(f"layer {l} weight {W.shape[0]} {W.shape[1]}\n")
            for row in W:
                fh.write(" ".join(f"{v:.17g}" for v in row) + "\n")
            fh.write(f"layer {l} bias {b.shape[0]}\n")
            fh.write(" ".join(f"{v:.17g}" for v in b) + "\n")


def load_mlp(path) -> MlpParams:
    """Load a network written by save_mlp()."""
    path = Path(path)
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != MODEL_FORMAT:
        raise DataError(f"{path}: not a {MODEL_FORMAT!r} file")

    def fields(i: int, key: str) -> list[str]:
        parts = lines[i].split()
        if not parts or parts[0] != key:
            raise DataError(f"{path}: line {i + 1}: expected {key!r}")
        return parts[1:]

    widths = tuple(int(w) for w in fields(1, "widths"))
    hidden = fields(2, "hidden_activation")[0]
    output = fields(3, "output_activation")[0]
    latent = int(fields(4, "latent_index")[0])
    config = MlpConfig(
        layer_widths=widths,
        output_activation=output,
        latent_index=latent,
        hidden_activation=hidden,
    )
    weights, biases = [], []
    i = 5
    for l in range(config.n_layers):
        r, c = (int(v) for v in fields(i, "layer")[2:])
        i += 1
        W = np.array([[float(v) for v in lines[i + r_].split()] for r_ in range(r)])
        if W.shape != (r, c):
            raise DataError(f"{path}: layer {l} weight block malformed")
        i += r
        nb = int(fields(i, "layer")[2])
        i += 1
        b = np.array([float(v) for v in lines[i].split()])
        if b.shape != (nb,):
            raise DataError(f"{path}: layer {l} bias block malformed")
        i += 1
        weights.append(W)
        biases.append(b)
    return MlpParams(config=config, weights=weights, biases=biases)
