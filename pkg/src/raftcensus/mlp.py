"""Small multilayer perceptron, written out in full.

One hidden layer, logistic sigmoid on hidden and output units, trained
by full-batch gradient descent with momentum on mean squared error.
The platform classifier uses layers [10, 2, 1]; the water classifier
defaults to [10, 8, 3] with the water class last.

Models are value objects: training copies parameters and never mutates
its input model.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .bandstack import FEATURE_ORDER, BandId
from .errors import ModelFormatError, TrainingError

__all__ = [
    "MlpModel",
    "TrainConfig",
    "ConfusionMatrix",
    "init_model",
    "forward",
    "forward_batch",
    "loss_and_gradient",
    "train",
    "evaluate_confusion",
    "save_model",
    "load_model",
]

PLATFORM_LAYERS = (10, 2, 1)
WATER_LAYERS = (10, 8, 3)
WATER_CLASS_INDEX = 3  # 1-based output index of the water class


def _sigmoid(z: np.ndarray) -> np.ndarray:
    # Split by sign to avoid overflow in exp for large |z|.
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass(frozen=True)
class MlpModel:
    """Parameters of a one-hidden-layer sigmoid network."""

    layer_sizes: tuple[int, int, int]
    weights: tuple[np.ndarray, np.ndarray]  # per layer, (n_out, n_in)
    biases: tuple[np.ndarray, np.ndarray]  # per layer, (n_out,)
    feature_order: tuple[BandId, ...] = FEATURE_ORDER

    def __post_init__(self):
        n_in, n_hid, n_out = self.layer_sizes
        shapes = [(n_hid, n_in), (n_out, n_hid)]
        for i, (w, b, shape) in enumerate(zip(self.weights, self.biases, shapes)):
            if w.shape != shape or b.shape != (shape[0],):
                raise ModelFormatError(
                    f"layer {i} parameter shapes {w.shape}/{b.shape} do not "
                    f"match layer sizes {self.layer_sizes}"
                )
            if not (np.isfinite(w).all() and np.isfinite(b).all()):
                raise ModelFormatError(f"layer {i} has non-finite parameters")

    @property
    def n_in(self) -> int:
        return self.layer_sizes[0]

    @property
    def n_out(self) -> int:
        return self.layer_sizes[2]

    def params_equal(self, other: "MlpModel") -> bool:
        return (
            self.layer_sizes == other.layer_sizes
            and self.feature_order == other.feature_order
            and all(np.array_equal(a, b) for a, b in zip(self.weights, other.weights))
            and all(np.array_equal(a, b) for a, b in zip(self.biases, other.biases))
        )


@dataclass(frozen=True)
class TrainConfig:
    """Full-batch gradient-descent settings.

    Validation and test sizes are floor(n * fraction), so very small
    datasets keep all samples in the training split. With an empty
    validation split the training loss drives early stopping and
    best-model tracking.
    """

    max_epochs: int = 2000
    target_loss: float = 1e-3
    learning_rate: float = 2.0
    momentum: float = 0.9
    seed: int = 0
    split: tuple[float, float, float] = (0.70, 0.15, 0.15)

    def __post_init__(self):
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")
        if not all(f > 0 for f in self.split):
            raise ValueError("split fractions must be positive")
        if abs(sum(self.split) - 1.0) > 1e-9:
            raise ValueError("split fractions must sum to 1")


@dataclass(frozen=True)
class ConfusionMatrix:
    """counts[i, j] = samples of true class i predicted as class j."""

    counts: np.ndarray
    class_names: tuple[str, ...] = ()

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def error_rate(self) -> float:
        return 1.0 - float(np.trace(self.counts)) / self.total


def init_model(
    layer_sizes: tuple[int, int, int] = PLATFORM_LAYERS,
    seed: int = 0,
    feature_order: tuple[BandId, ...] = FEATURE_ORDER,
) -> MlpModel:
    """Seeded random model with weights and biases uniform in [-0.5, 0.5]."""
    rng = np.random.default_rng(seed)
    n_in, n_hid, n_out = layer_sizes
    w1 = rng.uniform(-0.5, 0.5, size=(n_hid, n_in))
    b1 = rng.uniform(-0.5, 0.5, size=n_hid)
    w2 = rng.uniform(-0.5, 0.5, size=(n_out, n_hid))
    b2 = rng.uniform(-0.5, 0.5, size=n_out)
    return MlpModel(tuple(layer_sizes), (w1, w2), (b1, b2), tuple(feature_order))


def forward_batch(m: MlpModel, x: np.ndarray) -> np.ndarray:
    """Network outputs for an (n, n_in) batch; returns (n, n_out) in (0, 1)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != m.n_in:
        raise ValueError(f"expected (n, {m.n_in}) inputs, got shape {x.shape}")
    if not np.isfinite(x).all():
        raise ValueError("inputs must be finite")
    h = _sigmoid(x @ m.weights[0].T + m.biases[0])
    return _sigmoid(h @ m.weights[1].T + m.biases[1])


def forward(m: MlpModel, x) -> np.ndarray:
    """Outputs for a single feature vector: sigma(W2 sigma(W1 x + b1) + b2)."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (m.n_in,):
        raise ValueError(f"expected a {m.n_in}-vector, got shape {x.shape}")
    return forward_batch(m, x[None, :])[0]


def _targets(labels: np.ndarray, n_out: int) -> np.ndarray:
    """Label vector to target matrix: 0/1 column for binary, one-hot else."""
    labels = np.asarray(labels)
    if n_out == 1:
        return labels.astype(np.float64)[:, None]
    t = np.zeros((len(labels), n_out))
    t[np.arange(len(labels)), labels] = 1.0
    return t


def loss_and_gradient(
    m: MlpModel, x: np.ndarray, targets: np.ndarray
) -> tuple[float, tuple[tuple[np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray]]]:
    """Mean squared error and its exact analytic gradient.

    The loss is the mean of (y - t)^2 over samples and output units.
    Returns (mse, ((dW1, db1), (dW2, db2))).
    """
    x = np.asarray(x, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError("batch must be a non-empty (n, n_in) array")
    if targets.shape != (x.shape[0], m.n_out):
        raise ValueError(
            f"targets shape {targets.shape} does not match "
            f"({x.shape[0]}, {m.n_out})"
        )
    if (targets < 0).any() or (targets > 1).any():
        raise ValueError("targets must lie in [0, 1]")
    return _loss_grads_raw(m.weights, m.biases, x, targets)


def _loss_grads_raw(weights, biases, x, targets):
    w1, w2 = weights
    b1, b2 = biases
    h = _sigmoid(x @ w1.T + b1)
    y = _sigmoid(h @ w2.T + b2)

    n, k = y.shape
    diff = y - targets
    mse = float(np.mean(diff * diff))

    # d mse / d y = 2 diff / (n k); chain through the sigmoids.
    dz2 = (2.0 / (n * k)) * diff * y * (1.0 - y)
    dw2 = dz2.T @ h
    db2 = dz2.sum(axis=0)
    dh = dz2 @ w2
    dz1 = dh * h * (1.0 - h)
    dw1 = dz1.T @ x
    db1 = dz1.sum(axis=0)
    return mse, ((dw1, db1), (dw2, db2))


def _mse_raw(weights, biases, x, targets) -> float:
    h = _sigmoid(x @ weights[0].T + biases[0])
    y = _sigmoid(h @ weights[1].T + biases[1])
    return float(np.mean((y - targets) ** 2))


def _split_indices(n: int, split: tuple[float, float, float], seed: int):
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    n_val = int(n * split[1])
    n_test = int(n * split[2])
    n_train = n - n_val - n_test
    return perm[:n_train], perm[n_train : n_train + n_val], perm[n_train + n_val :]


def train(
    m: MlpModel, x: np.ndarray, labels: np.ndarray, cfg: TrainConfig
) -> tuple[MlpModel, list[float]]:
    """Train a copy of ``m`` by full-batch gradient descent with momentum.

    Data is shuffled with cfg.seed, then split train/val/test; the test
    split is never touched here and is recoverable via ``split_data``.
    Stops when validation loss reaches cfg.target_loss or after
    cfg.max_epochs, and returns the parameters from the epoch with the
    best validation loss together with the per-epoch training losses.

    Raises TrainingError if fewer than two classes are present or the
    loss stops being finite (the error carries the epoch index).
    """
    x = np.asarray(x, dtype=np.float64)
    labels = np.asarray(labels)
    if x.ndim != 2 or x.shape[1] != m.n_in:
        raise ValueError(f"expected (n, {m.n_in}) features, got shape {x.shape}")
    if len(labels) != len(x):
        raise ValueError("features and labels disagree in length")
    if len(np.unique(labels)) < 2:
        raise TrainingError("training data must contain at least two classes")

    idx_train, idx_val, _ = _split_indices(len(x), cfg.split, cfg.seed)
    x_train = x[idx_train]
    t_train = _targets(labels[idx_train], m.n_out)
    x_val = x[idx_val]
    t_val = _targets(labels[idx_val], m.n_out) if len(idx_val) else None

    weights = [w.copy() for w in m.weights]
    biases = [b.copy() for b in m.biases]
    vel_w = [np.zeros_like(w) for w in weights]
    vel_b = [np.zeros_like(b) for b in biases]

    def snapshot() -> MlpModel:
        return MlpModel(
            m.layer_sizes,
            (weights[0].copy(), weights[1].copy()),
            (biases[0].copy(), biases[1].copy()),
            m.feature_order,
        )

    def monitored_loss() -> float:
        if t_val is None:
            return _mse_raw(weights, biases, x_train, t_train)
        return _mse_raw(weights, biases, x_val, t_val)

    def diverged(epoch: int):
        raise TrainingError(f"loss diverged at epoch {epoch}", epoch=epoch)

    history: list[float] = []
    best = snapshot()
    best_val = monitored_loss()
    for epoch in range(cfg.max_epochs):
        loss, grads = _loss_grads_raw(weights, biases, x_train, t_train)
        if not np.isfinite(loss):
            diverged(epoch)
        history.append(loss)
        for layer in range(2):
            dw, db = grads[layer]
            vel_w[layer] = cfg.momentum * vel_w[layer] - cfg.learning_rate * dw
            vel_b[layer] = cfg.momentum * vel_b[layer] - cfg.learning_rate * db
            weights[layer] += vel_w[layer]
            biases[layer] += vel_b[layer]
        if not all(np.isfinite(a).all() for a in weights + biases):
            diverged(epoch)
        val = monitored_loss()
        if not np.isfinite(val):
            diverged(epoch)
        if val < best_val:
            best_val = val
            best = snapshot()
        if val <= cfg.target_loss:
            break
    return best, history


def split_data(
    x: np.ndarray, labels: np.ndarray, cfg: TrainConfig
) -> tuple[tuple[np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray]]:
    """The (train, val, test) partition that ``train`` uses for this config."""
    x = np.asarray(x)
    labels = np.asarray(labels)
    parts = _split_indices(len(x), cfg.split, cfg.seed)
    return tuple((x[idx], labels[idx]) for idx in parts)


def evaluate_confusion(
    m: MlpModel,
    x: np.ndarray,
    labels: np.ndarray,
    thr: float = 0.5,
    class_names: tuple[str, ...] = (),
) -> ConfusionMatrix:
    """Confusion matrix: threshold at ``thr`` for binary nets, argmax else."""
    x = np.asarray(x, dtype=np.float64)
    labels = np.asarray(labels)
    if len(x) == 0:
        raise ValueError("evaluation set must be non-empty")
    y = forward_batch(m, x)
    if m.n_out == 1:
        pred = (y[:, 0] >= thr).astype(int)
        k = 2
    else:
        pred = np.argmax(y, axis=1)
        k = m.n_out
    counts = np.zeros((k, k), dtype=np.int64)
    np.add.at(counts, (labels.astype(int), pred), 1)
    return ConfusionMatrix(counts=counts, class_names=tuple(class_names))


def save_model(m: MlpModel, path) -> None:
    """Write the line-oriented MLPv1 text format.

    Parameters are written with 17 significant digits, which round-trips
    IEEE doubles exactly.
    """
    lines = ["MLPv1"]
    lines.append("layers " + " ".join(str(s) for s in m.layer_sizes))
    lines.append("features " + " ".join(b.value for b in m.feature_order))
    lines.append("activation sigmoid")
    for w, b in zip(m.weights, m.biases):
        lines.append("w " + " ".join(format(v, ".17g") for v in w.ravel()))
        lines.append("b " + " ".join(format(v, ".17g") for v in b))
    Path(path).write_text("\n".join(lines) + "\n")


def load_model(path) -> MlpModel:
    """Read a model written by ``save_model``; the round trip is exact."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ModelFormatError(f"cannot read model file {path}: {exc}") from exc
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0].strip() != "MLPv1":
        raise ModelFormatError(f"{path}: not an MLPv1 model file")

    def field_line(i: int, tag: str) -> list[str]:
        if i >= len(lines):
            raise ModelFormatError(f"{path}: truncated (expected '{tag}' line)")
        parts = lines[i].split()
        if not parts or parts[0] != tag:
            raise ModelFormatError(f"{path}: expected '{tag}' line, got {lines[i]!r}")
        return parts[1:]

    try:
        sizes = tuple(int(v) for v in field_line(1, "layers"))
    except ValueError as exc:
        raise ModelFormatError(f"{path}: bad layer sizes") from exc
    if len(sizes) != 3 or any(s < 1 for s in sizes):
        raise ModelFormatError(f"{path}: layer sizes must be three positive ints")

    feat_tokens = field_line(2, "features")
    try:
        feature_order = tuple(BandId(t) for t in feat_tokens)
    except ValueError as exc:
        raise ModelFormatError(f"{path}: bad feature order: {exc}") from exc
    if len(feature_order) != len(BandId) or len(set(feature_order)) != len(BandId):
        raise ModelFormatError(
            f"{path}: bad feature order (need all ten bands exactly once)"
        )

    activation = field_line(3, "activation")
    if activation != ["sigmoid"]:
        raise ModelFormatError(f"{path}: unknown activation tag {activation}")

    shapes = [(sizes[1], sizes[0]), (sizes[2], sizes[1])]
    weights = []
    biases = []
    line_no = 4
    for shape in shapes:
        try:
            wvals = [float(v) for v in field_line(line_no, "w")]
            bvals = [float(v) for v in field_line(line_no + 1, "b")]
        except ValueError as exc:
            raise ModelFormatError(f"{path}: bad parameter value") from exc
        if len(wvals) != shape[0] * shape[1] or len(bvals) != shape[0]:
            raise ModelFormatError(
                f"{path}: parameter count mismatch for layer of shape {shape}"
            )
        weights.append(np.array(wvals).reshape(shape))
        biases.append(np.array(bvals))
        line_no += 2
    if line_no != len(lines):
        raise ModelFormatError(f"{path}: trailing content after parameters")
    return MlpModel(sizes, tuple(weights), tuple(biases), feature_order)
