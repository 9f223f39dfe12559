"""Built-in trainable classifier: softmax regression with Adam.

The training loop follows the experiment protocol: per epoch, shuffle
the training indices with a keyed stream, augment on the fly, take
minibatch Adam steps on the categorical cross-entropy, then score the
unaugmented validation set; the returned weights are those of the epoch
with the minimum validation loss (earliest epoch wins ties).
"""

import math
from dataclasses import dataclass

import numpy as np

from .augmentation import AugmentParams, apply_affine, sample_augment
from .dataset import ClassLabel, SplitAssignment
from .errors import ConfigError
from .imaging import GrayImage
from .seeding import STREAM_EPOCH_SHUFFLE, keyed_rng

N_CLASSES = len(ClassLabel)
PROB_FLOOR = 1e-12


@dataclass(frozen=True, eq=False)
class FeatureVector:
    """Mean-pooled intensities, row-major over the pooling grid."""

    values: np.ndarray


@dataclass(eq=False)
class SoftmaxModel:
    """Linear logits over features: weights (4, F) and bias (4,)."""

    weights: np.ndarray
    bias: np.ndarray

    @classmethod
    def zeros(cls, n_features: int) -> "SoftmaxModel":
        return cls(
            weights=np.zeros((N_CLASSES, n_features), dtype=np.float64),
            bias=np.zeros(N_CLASSES, dtype=np.float64),
        )


@dataclass(frozen=True)
class AdamState:
    """Adaptive-moment accumulators shaped like the parameter list."""

    m: tuple[np.ndarray, ...]
    v: tuple[np.ndarray, ...]
    t: int
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def fresh(cls, params: tuple[np.ndarray, ...], lr: float, **kwargs) -> "AdamState":
        return cls(
            m=tuple(np.zeros_like(p) for p in params),
            v=tuple(np.zeros_like(p) for p in params),
            t=0,
            lr=lr,
            **kwargs,
        )


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    batch_size: int = 32
    lr: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1 or self.lr <= 0:
            raise ConfigError("epochs and batch_size must be >= 1 and lr > 0")


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    train_loss: float
    val_loss: float
    val_accuracy: float


@dataclass(frozen=True)
class TrainResult:
    model: SoftmaxModel
    best_epoch: int
    log: tuple[EpochStats, ...]


def extract_features(img: GrayImage, grid: int = 32) -> FeatureVector:
    """Mean-pool the image over a grid x grid partition."""
    if img.height % grid or img.width % grid:
        raise ConfigError(
            f"image {img.width}x{img.height} not divisible by feature grid {grid}"
        )
    bh, bw = img.height // grid, img.width // grid
    pooled = img.pixels.reshape(grid, bh, grid, bw).mean(axis=(1, 3))
    return FeatureVector(pooled.ravel())


def _softmax_rows(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=-1, keepdims=True)


def predict_proba(model: SoftmaxModel, x: FeatureVector) -> np.ndarray:
    """Softmax of Wx + b, stabilized by max-logit subtraction."""
    logits = model.weights @ x.values + model.bias
    return _softmax_rows(logits)


def cross_entropy(probs: np.ndarray, label: ClassLabel | int) -> float:
    """Negative log-probability of the true class, floored at 1e-12."""
    return float(-math.log(max(float(probs[int(label)]), PROB_FLOOR)))


def _gradient_arrays(model, features: np.ndarray, labels: np.ndarray):
    probs = _softmax_rows(features @ model.weights.T + model.bias)
    delta = probs.copy()
    delta[np.arange(len(labels)), labels] -= 1.0
    grad_w = delta.T @ features / len(labels)
    grad_b = delta.mean(axis=0)
    return grad_w, grad_b


def gradient(model: SoftmaxModel, batch) -> tuple[np.ndarray, np.ndarray]:
    """Mean cross-entropy gradient over a batch of (FeatureVector, label)."""
    if not batch:
        raise ConfigError("gradient requires a non-empty batch")
    features = np.stack([fv.values for fv, _ in batch])
    labels = np.array([int(lab) for _, lab in batch])
    return _gradient_arrays(model, features, labels)


def adam_step(state: AdamState, params: tuple[np.ndarray, ...], grads: tuple[np.ndarray, ...]):
    """One Adam update; returns the new (state, params) without mutation."""
    t = state.t + 1
    m = tuple(state.beta1 * m_i + (1 - state.beta1) * g for m_i, g in zip(state.m, grads))
    v = tuple(state.beta2 * v_i + (1 - state.beta2) * (g * g) for v_i, g in zip(state.v, grads))
    bc1 = 1.0 - state.beta1**t
    bc2 = 1.0 - state.beta2**t
    new_params = tuple(
        p - state.lr * (m_i / bc1) / (np.sqrt(v_i / bc2) + state.epsilon)
        for p, m_i, v_i in zip(params, m, v)
    )
    new_state = AdamState(
        m=m, v=v, t=t, lr=state.lr, beta1=state.beta1, beta2=state.beta2, epsilon=state.epsilon
    )
    return new_state, new_params


def _batch_losses(model, features: np.ndarray, labels: np.ndarray) -> np.ndarray:
    probs = _softmax_rows(features @ model.weights.T + model.bias)
    picked = probs[np.arange(len(labels)), labels]
    return -np.log(np.maximum(picked, PROB_FLOOR))


def train(
    splits: SplitAssignment,
    store,
    config: TrainConfig,
    augment_params: AugmentParams,
    feature_grid: int = 32,
) -> TrainResult:
    """Train the built-in model on one fold's split.

    `store` maps sample index to its preprocessed image and label
    (`store.image(i)`, `store.label(i)`).  Augmentation is applied only
    on the training path; validation features are extracted once from
    the untouched cache images before the epoch loop, so the validation
    loss can never see an augmented pixel.
    """
    if not splits.train or not splits.validation:
        raise ConfigError("train and validation sets must be non-empty")

    val_features = np.stack(
        [extract_features(store.image(i), feature_grid).values for i in splits.validation]
    )
    val_labels = np.array([int(store.label(i)) for i in splits.validation])

    n_features = val_features.shape[1]
    weights = np.zeros((N_CLASSES, n_features), dtype=np.float64)
    bias = np.zeros(N_CLASSES, dtype=np.float64)
    state = AdamState.fresh((weights, bias), lr=config.lr)

    best_loss = math.inf
    best_epoch = 0
    best_params = (weights.copy(), bias.copy())
    log = []
    train_indices = np.asarray(splits.train)

    for epoch in range(1, config.epochs + 1):
        rng = keyed_rng(STREAM_EPOCH_SHUFFLE, config.seed, splits.fold_index, epoch)
        order = train_indices[rng.permutation(len(train_indices))]

        loss_sum = 0.0
        for start in range(0, len(order), config.batch_size):
            batch = order[start : start + config.batch_size]
            feats = []
            for i in batch:
                spec = sample_augment(
                    augment_params, (config.seed, splits.fold_index, epoch, int(i))
                )
                augmented = apply_affine(store.image(int(i)), spec)
                feats.append(extract_features(augmented, feature_grid).values)
            features = np.stack(feats)
            labels = np.array([int(store.label(int(i))) for i in batch])

            model = SoftmaxModel(weights, bias)
            loss_sum += _batch_losses(model, features, labels).sum()
            grads = _gradient_arrays(model, features, labels)
            state, (weights, bias) = adam_step(state, (weights, bias), grads)

        model = SoftmaxModel(weights, bias)
        val_losses = _batch_losses(model, val_features, val_labels)
        val_pred = _softmax_rows(val_features @ weights.T + bias).argmax(axis=1)
        stats = EpochStats(
            epoch=epoch,
            train_loss=float(loss_sum / len(order)),
            val_loss=float(val_losses.mean()),
            val_accuracy=float((val_pred == val_labels).mean()),
        )
        log.append(stats)
        if stats.val_loss < best_loss:
            best_loss = stats.val_loss
            best_epoch = epoch
            best_params = (weights.copy(), bias.copy())

    return TrainResult(
        model=SoftmaxModel(*best_params), best_epoch=best_epoch, log=tuple(log)
    )


def predict_proba_batch(model: SoftmaxModel, images, feature_grid: int = 32) -> np.ndarray:
    """Probability rows for a sequence of preprocessed images."""
    features = np.stack(
        [extract_features(img, feature_grid).values for img in images]
    )
    return _softmax_rows(features @ model.weights.T + model.bias)
