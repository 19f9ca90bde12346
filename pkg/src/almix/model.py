"""Feed-forward classifier with explicit layer boundaries so intermediate
features can be extracted and re-injected at a mix point, plus soft-label
cross-entropy, analytic backprop (single-input and two-branch merged), and an
SGD-momentum trainer with a one-step learning-rate drop."""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .core import Matrix, RngStream, as_matrix, ensure_finite

ACTIVATIONS = ("relu", "identity")

_CKPT_MAGIC = b"MLPB"
_CKPT_VERSION = 1


@dataclass
class Layer:
    weights: Matrix  # (fan_in, fan_out)
    bias: np.ndarray  # (fan_out,)
    activation: str


@dataclass
class FeatureBatch:
    """Activations captured at a mix point: point I is the output of layer I,
    point 0 the raw input."""

    values: Matrix
    mix_point: int


@dataclass
class TrainConfig:
    epochs: int = 100
    batch_size: int = 32
    learning_rate: float = 0.1
    momentum: float = 0.9
    weight_decay: float = 5e-4
    lr_drop_fraction: float = 0.8
    lr_drop_factor: float = 0.1

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")
        if not self.learning_rate > 0.0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.momentum < 0.0 or self.weight_decay < 0.0:
            raise ValueError("momentum and weight_decay must be non-negative")
        if not 0.0 < self.lr_drop_fraction <= 1.0:
            raise ValueError(f"lr_drop_fraction must be in (0, 1], got {self.lr_drop_fraction}")
        if not 0.0 < self.lr_drop_factor <= 1.0:
            raise ValueError(f"lr_drop_factor must be in (0, 1], got {self.lr_drop_factor}")


@dataclass
class MlpModel:
    layers: list[Layer]

    def __post_init__(self):
        if len(self.layers) < 2:
            raise ValueError("model needs at least one hidden layer plus the classifier head")
        for k, layer in enumerate(self.layers):
            if layer.activation not in ACTIVATIONS:
                raise ValueError(f"layer {k}: unknown activation {layer.activation!r}")
            if layer.weights.shape[1] != layer.bias.shape[0]:
                raise ValueError(f"layer {k}: bias width does not match weight fan-out")
            if k > 0 and self.layers[k - 1].weights.shape[1] != layer.weights.shape[0]:
                raise ValueError(
                    f"layer {k}: fan-in {layer.weights.shape[0]} does not chain from "
                    f"previous fan-out {self.layers[k - 1].weights.shape[1]}"
                )

    @property
    def num_layers(self) -> int:
        return len(self.layers)

    @property
    def widths(self) -> list[int]:
        """[input_width, layer-1 output, ..., num_classes]; widths[I] is the
        feature width at mix point I."""
        return [self.layers[0].weights.shape[0]] + [
            layer.weights.shape[1] for layer in self.layers
        ]

    @property
    def num_classes(self) -> int:
        return self.layers[-1].weights.shape[1]

    def width_at(self, mix_point: int) -> int:
        if not 0 <= mix_point < self.num_layers:
            raise ValueError(
                f"mix point {mix_point} out of range [0, {self.num_layers})"
            )
        return self.widths[mix_point]


def init_model(layer_widths, num_classes: int, rng: RngStream) -> MlpModel:
    """Build an MLP from [input_width, hidden...] plus a num_classes head.

    Weights are fan-in-scaled uniform draws from the given stream, biases zero,
    relu on hidden layers and identity on the head.
    """
    widths = [int(w) for w in layer_widths]
    if len(widths) < 2:
        raise ValueError("layer_widths needs the input width plus at least one hidden width")
    if any(w < 1 for w in widths) or num_classes < 2:
        raise ValueError(f"widths must be positive and num_classes >= 2, got {widths}, {num_classes}")
    widths = widths + [int(num_classes)]
    layers = []
    for k in range(len(widths) - 1):
        fan_in, fan_out = widths[k], widths[k + 1]
        bound = 1.0 / np.sqrt(fan_in)
        weights = rng.gen.uniform(-bound, bound, size=(fan_in, fan_out))
        bias = np.zeros(fan_out, dtype=np.float64)
        activation = "identity" if k == len(widths) - 2 else "relu"
        layers.append(Layer(weights, bias, activation))
    return MlpModel(layers)


def _forward_cached(layers, h):
    """Run h through the layers, returning (output, per-layer (input, preact) caches)."""
    caches = []
    for layer in layers:
        s = h @ layer.weights + layer.bias
        caches.append((h, s))
        h = np.maximum(s, 0.0) if layer.activation == "relu" else s
    return h, caches


def _backprop(layers, caches, grad_out, grads, offset):
    """Backprop grad_out through the cached slice, accumulating into grads
    starting at layer index `offset`. Returns the gradient at the slice input."""
    g = grad_out
    for k in range(len(layers) - 1, -1, -1):
        layer = layers[k]
        h, s = caches[k]
        ds = np.where(s > 0.0, g, 0.0) if layer.activation == "relu" else g
        dw, db = grads[offset + k]
        dw += h.T @ ds
        db += ds.sum(axis=0)
        g = ds @ layer.weights.T
    return g


def zero_grads(model: MlpModel) -> list[tuple[np.ndarray, np.ndarray]]:
    return [
        (np.zeros_like(layer.weights), np.zeros_like(layer.bias))
        for layer in model.layers
    ]


def forward_to(model: MlpModel, x: Matrix, mix_point: int) -> FeatureBatch:
    """Activations at the mix point: the first mix_point layers applied to x."""
    x = as_matrix(x, "forward_to input")
    width = model.width_at(mix_point)
    if x.shape[1] != model.widths[0]:
        raise ValueError(
            f"input width {x.shape[1]} does not match model input width {model.widths[0]}"
        )
    h = x
    for layer in model.layers[:mix_point]:
        s = h @ layer.weights + layer.bias
        h = np.maximum(s, 0.0) if layer.activation == "relu" else s
    assert h.shape[1] == width
    return FeatureBatch(values=h, mix_point=mix_point)


def forward_from(model: MlpModel, features: FeatureBatch) -> Matrix:
    """Logits from the remaining layers applied to features at their mix point."""
    h = as_matrix(features.values, "forward_from features")
    width = model.width_at(features.mix_point)
    if h.shape[1] != width:
        raise ValueError(
            f"feature width {h.shape[1]} does not match width {width} "
            f"at mix point {features.mix_point}"
        )
    for layer in model.layers[features.mix_point:]:
        s = h @ layer.weights + layer.bias
        h = np.maximum(s, 0.0) if layer.activation == "relu" else s
    return ensure_finite(h, "logits")


def _log_softmax(logits: Matrix) -> Matrix:
    z = logits - logits.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def softmax_xent(logits: Matrix, soft_targets: Matrix) -> tuple[float, Matrix]:
    """Mean soft-label cross-entropy and its logit gradient (p - t) / batch."""
    logits = as_matrix(logits, "logits")
    targets = as_matrix(soft_targets, "soft targets")
    if logits.shape != targets.shape:
        raise ValueError(f"shape mismatch: logits {logits.shape} vs targets {targets.shape}")
    row_sums = targets.sum(axis=1)
    worst = float(np.abs(row_sums - 1.0).max())
    if worst > 1e-9:
        raise ValueError(f"target rows must sum to 1 (worst deviation {worst:.3e})")
    logp = _log_softmax(logits)
    loss = float(-(targets * logp).sum(axis=1).mean())
    dlogits = (np.exp(logp) - targets) / logits.shape[0]
    return loss, dlogits


def backward(model: MlpModel, x: Matrix, soft_targets: Matrix):
    """Full-pass loss and per-parameter gradients for a single input batch."""
    x = as_matrix(x, "backward input")
    logits, caches = _forward_cached(model.layers, x)
    loss, dlogits = softmax_xent(logits, soft_targets)
    grads = zero_grads(model)
    _backprop(model.layers, caches, dlogits, grads, offset=0)
    return loss, grads


def backward_mixed(
    model: MlpModel,
    x1: Matrix,
    x2: Matrix,
    lambda2: float,
    mix_point: int,
    soft_targets: Matrix,
):
    """Loss and gradients for the branch-and-merge pass.

    Forward: both inputs run separately up to the mix point, their features are
    convex-combined with lambda2, and the blend runs through the remaining
    layers once. Backward: the gradient arriving at the blend splits as
    lambda2 into branch 1 and (1 - lambda2) into branch 2, so parameters at or
    below the mix point accumulate contributions from both branches while the
    shared layers above it see the blended path once.
    """
    x1 = as_matrix(x1, "backward_mixed x1")
    x2 = as_matrix(x2, "backward_mixed x2")
    if x1.shape != x2.shape:
        raise ValueError(f"shape mismatch: x1 {x1.shape} vs x2 {x2.shape}")
    if not 0.0 <= lambda2 <= 1.0:
        raise ValueError(f"lambda2 must be in [0, 1], got {lambda2}")
    model.width_at(mix_point)
    if x1.shape[1] != model.widths[0]:
        raise ValueError(
            f"input width {x1.shape[1]} does not match model input width {model.widths[0]}"
        )

    branch_layers = model.layers[:mix_point]
    shared_layers = model.layers[mix_point:]
    a1, caches1 = _forward_cached(branch_layers, x1)
    a2, caches2 = _forward_cached(branch_layers, x2)
    blended = lambda2 * a1 + (1.0 - lambda2) * a2
    logits, shared_caches = _forward_cached(shared_layers, blended)
    loss, dlogits = softmax_xent(logits, soft_targets)

    grads = zero_grads(model)
    g = _backprop(shared_layers, shared_caches, dlogits, grads, offset=mix_point)
    _backprop(branch_layers, caches1, lambda2 * g, grads, offset=0)
    _backprop(branch_layers, caches2, (1.0 - lambda2) * g, grads, offset=0)
    for dw, db in grads:
        ensure_finite(dw, "gradient")
        ensure_finite(db, "gradient")
    return loss, grads


def predict_proba(model: MlpModel, x: Matrix) -> Matrix:
    """Posterior probabilities, one simplex row per input row."""
    logits = forward_from(model, forward_to(model, x, 0))
    return np.exp(_log_softmax(logits))


def init_velocity(model: MlpModel) -> list[tuple[np.ndarray, np.ndarray]]:
    return zero_grads(model)


def learning_rate_at(config: TrainConfig, epoch: int) -> float:
    """Step-decay schedule: one drop by lr_drop_factor once the epoch index
    reaches lr_drop_fraction of the epoch budget."""
    if epoch >= config.lr_drop_fraction * config.epochs:
        return config.learning_rate * config.lr_drop_factor
    return config.learning_rate


def sgd_step(model: MlpModel, grads, config: TrainConfig, velocity, epoch: int):
    """Heavy-ball SGD update in place: v <- m*v + (g + wd*theta); theta -= lr*v."""
    if len(grads) != model.num_layers or len(velocity) != model.num_layers:
        raise ValueError("gradient/velocity structure does not match the model")
    lr = learning_rate_at(config, epoch)
    for layer, (dw, db), (vw, vb) in zip(model.layers, grads, velocity):
        if dw.shape != layer.weights.shape or db.shape != layer.bias.shape:
            raise ValueError("gradient shapes do not match parameters")
        vw *= config.momentum
        vw += dw + config.weight_decay * layer.weights
        layer.weights -= lr * vw
        vb *= config.momentum
        vb += db + config.weight_decay * layer.bias
        layer.bias -= lr * vb
    return model, velocity


def save_checkpoint(model: MlpModel, path) -> None:
    """Write a checkpoint: versioned header, layer widths, then row-major
    little-endian float64 parameter blocks (weights then bias per layer)."""
    widths = model.widths
    with open(path, "wb") as fh:
        fh.write(struct.pack("<4sII", _CKPT_MAGIC, _CKPT_VERSION, len(widths)))
        fh.write(struct.pack(f"<{len(widths)}I", *widths))
        for layer in model.layers:
            fh.write(np.ascontiguousarray(layer.weights, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(layer.bias, dtype="<f8").tobytes())


def load_checkpoint(path) -> MlpModel:
    with open(path, "rb") as fh:
        head = fh.read(12)
        if len(head) != 12:
            raise ValueError(f"{path}: truncated checkpoint header")
        magic, version, n_widths = struct.unpack("<4sII", head)
        if magic != _CKPT_MAGIC:
            raise ValueError(f"{path}: not a model checkpoint")
        if version != _CKPT_VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version {version}")
        widths = struct.unpack(f"<{n_widths}I", fh.read(4 * n_widths))
        layers = []
        for k in range(len(widths) - 1):
            fan_in, fan_out = widths[k], widths[k + 1]
            wbytes = fh.read(8 * fan_in * fan_out)
            bbytes = fh.read(8 * fan_out)
            if len(wbytes) != 8 * fan_in * fan_out or len(bbytes) != 8 * fan_out:
                raise ValueError(f"{path}: truncated parameter block for layer {k}")
            weights = np.frombuffer(wbytes, dtype="<f8").reshape(fan_in, fan_out).copy()
            bias = np.frombuffer(bbytes, dtype="<f8").copy()
            activation = "identity" if k == len(widths) - 2 else "relu"
            layers.append(Layer(weights, bias, activation))
        if fh.read(1):
            raise ValueError(f"{path}: trailing bytes after parameter blocks")
    return MlpModel(layers)
