"""Cross-mix augmentation: mirrored input-pair mixing, a second feature-space
blend at a chosen layer, composed soft labels, and the training epochs built on
them (classic single-interpolation mixup included as the baseline)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Matrix, RngStream, as_matrix, sample_beta, shuffled_pairs
from .data import Dataset, PoolState, one_hot
from .model import (
    MlpModel,
    TrainConfig,
    backward,
    backward_mixed,
    init_velocity,
    sgd_step,
)


def _check_unit(name: str, value: float) -> float:
    value = float(value)
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{name} must be in [0, 1], got {value}")
    return value


@dataclass(frozen=True)
class MixCoefficients:
    """Label weights composed from the two interpolation draws:
    a = 1 - l1 - l2 + 2*l1*l2 on the first label, b = l1 + l2 - 2*l1*l2 on the
    second."""

    lambda1: float
    lambda2: float
    a: float
    b: float

    @classmethod
    def from_lambdas(cls, lambda1: float, lambda2: float) -> "MixCoefficients":
        lambda1 = _check_unit("lambda1", lambda1)
        lambda2 = _check_unit("lambda2", lambda2)
        # centered product form of the composed weights: keeps a + b glued to 1
        # and collapses to an exact 0.5/0.5 blend when either draw is 0.5
        half_spread = 0.5 * (2.0 * lambda1 - 1.0) * (2.0 * lambda2 - 1.0)
        return cls(lambda1, lambda2, 0.5 + half_spread, 0.5 - half_spread)


def mix_inputs(x1: Matrix, x2: Matrix, lambda1: float) -> tuple[Matrix, Matrix]:
    """The mirrored cross: (l1*x1 + (1-l1)*x2, (1-l1)*x1 + l1*x2)."""
    x1 = as_matrix(x1, "mix_inputs x1")
    x2 = as_matrix(x2, "mix_inputs x2")
    if x1.shape != x2.shape:
        raise ValueError(f"shape mismatch: x1 {x1.shape} vs x2 {x2.shape}")
    lambda1 = _check_unit("lambda1", lambda1)
    xdot1 = lambda1 * x1 + (1.0 - lambda1) * x2
    xdot2 = (1.0 - lambda1) * x1 + lambda1 * x2
    return xdot1, xdot2


def mix_labels(y1, y2, coeffs: MixCoefficients) -> np.ndarray:
    """Composed soft labels a*y1 + b*y2; accepts vectors or row-stacked matrices."""
    y1 = np.asarray(y1, dtype=np.float64)
    y2 = np.asarray(y2, dtype=np.float64)
    if y1.shape != y2.shape:
        raise ValueError(f"shape mismatch: y1 {y1.shape} vs y2 {y2.shape}")
    return coeffs.a * y1 + coeffs.b * y2


def mixup_pair(x1: Matrix, x2: Matrix, y1, y2, lam: float):
    """Classic single-interpolation mixup of an input pair and its labels."""
    x1 = as_matrix(x1, "mixup x1")
    x2 = as_matrix(x2, "mixup x2")
    if x1.shape != x2.shape:
        raise ValueError(f"shape mismatch: x1 {x1.shape} vs x2 {x2.shape}")
    lam = _check_unit("lambda", lam)
    y1 = np.asarray(y1, dtype=np.float64)
    y2 = np.asarray(y2, dtype=np.float64)
    if y1.shape != y2.shape:
        raise ValueError(f"shape mismatch: y1 {y1.shape} vs y2 {y2.shape}")
    return lam * x1 + (1.0 - lam) * x2, lam * y1 + (1.0 - lam) * y2


def train_epoch_cmam(
    model: MlpModel,
    dataset: Dataset,
    pool: PoolState,
    mix_point: int,
    alpha: float,
    config: TrainConfig,
    epoch: int,
    shuffle_rng: RngStream,
    beta_rng: RngStream,
    velocity=None,
) -> tuple[MlpModel, float]:
    """One cross-mix training epoch over the labeled pool.

    Labeled samples are paired by a seeded shuffle (an odd leftover is dropped
    for the epoch). Each minibatch of batch_size pairs draws a fresh
    (lambda1, lambda2) from Beta(alpha, alpha), builds the mirrored input
    cross, blends the two branches at the mix point, trains against the
    composed soft labels, and takes one SGD step. Returns the model and the
    mean per-pair loss.
    """
    if len(pool.labeled) < 2:
        raise ValueError(f"cross-mix training needs at least 2 labeled samples, got {len(pool.labeled)}")
    if not alpha > 0.0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    model.width_at(mix_point)
    if velocity is None:
        velocity = init_velocity(model)

    order = list(pool.labeled)
    pairs = shuffled_pairs(len(order), shuffle_rng)
    features = dataset.features
    targets = one_hot(dataset.labels, dataset.num_classes)

    total_loss = 0.0
    total_pairs = 0
    for start in range(0, len(pairs), config.batch_size):
        batch = pairs[start : start + config.batch_size]
        idx1 = [order[i] for i, _ in batch]
        idx2 = [order[j] for _, j in batch]
        lambda1 = sample_beta(alpha, alpha, beta_rng)
        lambda2 = sample_beta(alpha, alpha, beta_rng)
        xdot1, xdot2 = mix_inputs(features[idx1], features[idx2], lambda1)
        coeffs = MixCoefficients.from_lambdas(lambda1, lambda2)
        soft = mix_labels(targets[idx1], targets[idx2], coeffs)
        loss, grads = backward_mixed(model, xdot1, xdot2, lambda2, mix_point, soft)
        sgd_step(model, grads, config, velocity, epoch)
        total_loss += loss * len(batch)
        total_pairs += len(batch)
    return model, total_loss / total_pairs


def train_epoch_plain(
    model: MlpModel,
    dataset: Dataset,
    pool: PoolState,
    config: TrainConfig,
    epoch: int,
    shuffle_rng: RngStream,
    velocity=None,
) -> tuple[MlpModel, float]:
    """One conventional epoch: one-hot cross-entropy SGD over shuffled minibatches."""
    if len(pool.labeled) < 1:
        raise ValueError("plain training needs at least 1 labeled sample")
    if velocity is None:
        velocity = init_velocity(model)

    order = list(pool.labeled)
    perm = shuffle_rng.gen.permutation(len(order))
    features = dataset.features
    targets = one_hot(dataset.labels, dataset.num_classes)

    total_loss = 0.0
    total_rows = 0
    for start in range(0, len(perm), config.batch_size):
        idx = [order[int(k)] for k in perm[start : start + config.batch_size]]
        loss, grads = backward(model, features[idx], targets[idx])
        sgd_step(model, grads, config, velocity, epoch)
        total_loss += loss * len(idx)
        total_rows += len(idx)
    return model, total_loss / total_rows


def fit(
    model: MlpModel,
    dataset: Dataset,
    pool: PoolState,
    config: TrainConfig,
    shuffle_rng: RngStream,
    *,
    use_cmam: bool,
    mix_point: int = 1,
    alpha: float = 0.4,
    beta_rng: RngStream | None = None,
) -> float:
    """Train for config.epochs with persistent momentum; returns the final
    epoch's mean loss."""
    if use_cmam and beta_rng is None:
        raise ValueError("cross-mix training requires a beta stream")
    velocity = init_velocity(model)
    loss = float("nan")
    for epoch in range(config.epochs):
        if use_cmam:
            _, loss = train_epoch_cmam(
                model, dataset, pool, mix_point, alpha, config, epoch,
                shuffle_rng, beta_rng, velocity,
            )
        else:
            _, loss = train_epoch_plain(
                model, dataset, pool, config, epoch, shuffle_rng, velocity,
            )
    return loss
