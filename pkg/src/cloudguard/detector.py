"""Convolutional-recurrent traffic classifier with confidence gating.

The model stacks four 1-D convolutions (two pooling stages) over a sequence
of per-window feature vectors, reduces time with an LSTM's last hidden
state, and classifies through three fully connected layers ending in
softmax. A verdict is only *confident* when the max class probability
reaches the decision threshold (default 0.75); everything below routes to
an "unknown" bucket that evaluation counts separately instead of forcing
into a class.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimensionError, InputError, TrainingDivergedError
from .features import FeatureLayout, NormStats, extract_features, fit_normalizer, normalize
from .nn import Adam, Conv1dLayer, DenseLayer, LstmLayer, MaxPool1dLayer, ModelGraph, Sgd
from .nn import layers as nnl
from .nn.checkpoint import load_params, restore_into, save_params
from .telemetry import LABELS

DEFAULT_THRESHOLD = 0.75


@dataclass(frozen=True)
class ArchConfig:
    """Network shape. Defaults give 4 conv, 2 pool, and 3 dense layers."""

    feature_dim: int = 428
    seq_len: int = 16
    conv_filters: tuple[int, ...] = (64, 64, 128, 128)
    kernel_size: int = 3
    pool_size: int = 2
    pool_after: tuple[int, ...] = (2, 4)  # 1-based conv indices
    lstm_hidden: int = 256
    fc_widths: tuple[int, ...] = (128, 64)
    num_classes: int = 6

    def __post_init__(self):
        object.__setattr__(self, "conv_filters", tuple(self.conv_filters))
        object.__setattr__(self, "pool_after", tuple(self.pool_after))
        object.__setattr__(self, "fc_widths", tuple(self.fc_widths))
        if self.num_classes < 2:
            raise ConfigError("need at least two classes")
        if not self.conv_filters or min(self.conv_filters) < 1:
            raise ConfigError("conv_filters must be positive")
        if self.lstm_hidden < 1 or self.feature_dim < 1 or self.seq_len < 1:
            raise ConfigError("sizes must be positive")
        if any(i < 1 or i > len(self.conv_filters) for i in self.pool_after):
            raise ConfigError("pool_after indices must reference conv layers")
        self.timeline()  # raises if the shape chain collapses

    def timeline(self) -> list[int]:
        """Sequence length after each conv/pool stage; validates the chain."""
        t = self.seq_len
        chain = [t]
        for i in range(1, len(self.conv_filters) + 1):
            t = t - self.kernel_size + 1
            if t < 1:
                raise ConfigError(
                    f"sequence collapses at conv {i}: length {t} after kernel "
                    f"{self.kernel_size}"
                )
            chain.append(t)
            if i in self.pool_after:
                if t % self.pool_size != 0:
                    raise ConfigError(
                        f"pool after conv {i} needs length divisible by "
                        f"{self.pool_size}, got {t}"
                    )
                t //= self.pool_size
                chain.append(t)
        return chain

    def to_dict(self) -> dict:
        return {
            "feature_dim": self.feature_dim,
            "seq_len": self.seq_len,
            "conv_filters": list(self.conv_filters),
            "kernel_size": self.kernel_size,
            "pool_size": self.pool_size,
            "pool_after": list(self.pool_after),
            "lstm_hidden": self.lstm_hidden,
            "fc_widths": list(self.fc_widths),
            "num_classes": self.num_classes,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ArchConfig":
        try:
            return cls(
                feature_dim=d["feature_dim"],
                seq_len=d["seq_len"],
                conv_filters=tuple(d["conv_filters"]),
                kernel_size=d["kernel_size"],
                pool_size=d["pool_size"],
                pool_after=tuple(d["pool_after"]),
                lstm_hidden=d["lstm_hidden"],
                fc_widths=tuple(d["fc_widths"]),
                num_classes=d["num_classes"],
            )
        except KeyError as exc:
            raise ConfigError(f"arch config missing field {exc}") from exc


def build_model(arch: ArchConfig, seed: int = 0) -> ModelGraph:
    """Assemble the seeded layer stack described by ``arch``."""
    rng = np.random.default_rng(seed)
    layer_list = []
    channels = arch.feature_dim
    for i, filters in enumerate(arch.conv_filters, start=1):
        layer_list.append(Conv1dLayer(channels, filters, arch.kernel_size, rng=rng))
        channels = filters
        if i in arch.pool_after:
            layer_list.append(MaxPool1dLayer(arch.pool_size))
    layer_list.append(LstmLayer(channels, arch.lstm_hidden,
                                return_sequences=False, rng=rng))
    width = arch.lstm_hidden
    for fc in arch.fc_widths:
        layer_list.append(DenseLayer(width, fc, activation="relu", rng=rng))
        width = fc
    layer_list.append(DenseLayer(width, arch.num_classes, activation="softmax",
                                 rng=rng))
    return ModelGraph(layer_list)


def build_sequences(vectors: np.ndarray, labels: np.ndarray,
                    seq_len: int) -> tuple[np.ndarray, np.ndarray]:
    """Sliding sequences of consecutive window vectors, stride 1.

    Each sequence's label is its most recent window's label: the verdict
    answers "what is happening now", with the earlier windows as context.
    Returns (sequences [M, T, D] as a zero-copy view, labels [M]).
    """
    vectors = np.ascontiguousarray(vectors, dtype=np.float64)
    if vectors.ndim != 2:
        raise DimensionError("vectors must be [N, D]")
    n = vectors.shape[0]
    if n < seq_len:
        raise InputError(f"need at least {seq_len} windows, got {n}")
    seqs = np.lib.stride_tricks.sliding_window_view(vectors, seq_len, axis=0)
    seqs = seqs.transpose(0, 2, 1)  # [M, T, D]
    return seqs, np.asarray(labels)[seq_len - 1:]


def prepare_dataset(stream, layout: FeatureLayout, seq_len: int,
                    stats: NormStats | None = None):
    """Featurize a labeled stream into normalized training sequences.

    Fits the normalizer on the stream itself when ``stats`` is None (pass the
    training stream's stats when preparing evaluation data). Returns
    ``(sequences, int labels, stats)``.
    """
    raw = np.array([extract_features(w, layout) for w in stream.windows])
    if stats is None:
        stats = fit_normalizer(raw)
    normed = normalize(raw, stats)
    label_ids = np.array([LABELS.index(w.label or "benign") for w in stream.windows])
    x, y = build_sequences(normed, label_ids, seq_len)
    return x, y, stats


@dataclass(frozen=True)
class ThreatVerdict:
    """Classification outcome for one sequence."""

    probabilities: np.ndarray
    predicted: int
    max_probability: float
    confident: bool

    @property
    def label(self) -> str | None:
        """Class name when the verdict indexes the canonical label set."""
        return LABELS[self.predicted] if self.predicted < len(LABELS) else None


def classify(model: ModelGraph, sequence: np.ndarray,
             threshold: float = DEFAULT_THRESHOLD) -> ThreatVerdict:
    """Classify one ``[T, D]`` sequence with confidence gating."""
    sequence = np.asarray(sequence, dtype=np.float64)
    if sequence.ndim != 2:
        raise DimensionError(f"sequence must be [T, D], got shape {sequence.shape}")
    probs = model.forward(sequence[None])[0]
    predicted = int(np.argmax(probs))  # lowest index wins ties
    max_prob = float(probs[predicted])
    return ThreatVerdict(probabilities=probs, predicted=predicted,
                         max_probability=max_prob,
                         confident=max_prob >= threshold)


def predict_probs(model: ModelGraph, x: np.ndarray, chunk: int = 256) -> np.ndarray:
    """Forward pass over ``[M, T, D]`` in bounded-memory chunks."""
    outs = [model.forward(x[i:i + chunk]) for i in range(0, len(x), chunk)]
    return np.concatenate(outs, axis=0)


@dataclass
class TrainConfig:
    epochs: int = 30
    batch_size: int = 32
    lr: float = 1e-3
    seed: int = 0
    val_fraction: float = 0.15
    optimizer: str = "adam"  # or "sgd"
    class_weighting: bool = True


def _class_weights(y: np.ndarray, num_classes: int) -> np.ndarray:
    """Inverse-frequency weight per class; absent classes weigh 0."""
    counts = np.bincount(y, minlength=num_classes).astype(np.float64)
    present = counts > 0
    weights = np.zeros(num_classes)
    weights[present] = counts[present].sum() / (present.sum() * counts[present])
    return weights


def train(model: ModelGraph, x: np.ndarray, y: np.ndarray,
          cfg: TrainConfig) -> tuple[ModelGraph, list[dict]]:
    """Mini-batch training with a held-out slice driving best-epoch selection.

    Deterministic for a fixed config: shuffling, the validation split, and
    initialization (the caller seeds build_model) all derive from cfg.seed.
    Returns the model restored to its best validation-accuracy epoch and the
    per-epoch history (training loss/accuracy in canonical data order plus
    validation accuracy).
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y)
    if len(x) == 0:
        raise InputError("training dataset is empty")
    if len(x) != len(y):
        raise InputError("sequences and labels disagree in length")
    num_classes = model.forward(x[:1]).shape[1]
    if y.min() < 0 or y.max() >= num_classes:
        raise InputError(f"labels must lie in [0, {num_classes})")
    rng = np.random.default_rng(cfg.seed)
    perm = rng.permutation(len(x))
    n_val = int(round(cfg.val_fraction * len(x)))
    if 0 < n_val < len(x):
        val_idx, train_idx = np.sort(perm[:n_val]), np.sort(perm[n_val:])
    else:
        # too small to hold anything out; validate on the training data
        val_idx = train_idx = np.arange(len(x))
    weights = _class_weights(y[train_idx], num_classes) if cfg.class_weighting \
        else np.ones(num_classes)
    if cfg.optimizer == "adam":
        optimizer = Adam(lr=cfg.lr)
    elif cfg.optimizer == "sgd":
        optimizer = Sgd(lr=cfg.lr)
    else:
        raise ConfigError(f"unknown optimizer {cfg.optimizer!r}")
    history: list[dict] = []
    best: tuple[float, dict] | None = None
    params = model.parameters()
    for epoch in range(cfg.epochs):
        order = rng.permutation(train_idx)
        for lo in range(0, len(order), cfg.batch_size):
            batch = order[lo:lo + cfg.batch_size]
            try:
                loss, grads = model.loss_and_gradients(
                    x[batch], y[batch], sample_weights=weights[y[batch]])
                if not np.isfinite(loss):
                    raise TrainingDivergedError(f"loss became {loss}")
                optimizer.step(params, grads)
            except TrainingDivergedError as exc:
                raise TrainingDivergedError(f"epoch {epoch}: {exc}") from exc
        # canonical-order evaluation keeps history reproducible bit for bit
        train_probs = predict_probs(model, x[train_idx])
        train_loss = nnl.cross_entropy_batch(train_probs, y[train_idx],
                                             weights[y[train_idx]])
        train_acc = float((train_probs.argmax(axis=1) == y[train_idx]).mean())
        val_probs = predict_probs(model, x[val_idx])
        val_acc = float((val_probs.argmax(axis=1) == y[val_idx]).mean())
        history.append({
            "epoch": epoch,
            "loss": train_loss,
            "train_accuracy": train_acc,
            "val_accuracy": val_acc,
        })
        if best is None or val_acc > best[0]:
            best = (val_acc, {k: v.copy() for k, v in params.items()})
    model.set_parameters(best[1])
    return model, history


@dataclass
class DetectionMetrics:
    """Evaluation summary over a labeled sequence set.

    The confusion matrix covers confident verdicts only; sequences below
    the threshold land in the unknown bucket and are reported through
    unknown_rate. The false-positive rate is the share of truly benign
    sequences that received a confident non-benign verdict, over all truly
    benign sequences.
    """

    classes: tuple[str, ...]
    confusion: np.ndarray  # [K, K], rows = truth, cols = prediction
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    support: np.ndarray  # confident sequences per true class (row sums)
    accuracy: float
    false_positive_rate: float
    unknown_rate: float
    total: int

    def to_dict(self) -> dict:
        return {
            "classes": list(self.classes),
            "confusion": self.confusion.astype(int).tolist(),
            "per_class": {
                name: {
                    "precision": float(self.precision[i]),
                    "recall": float(self.recall[i]),
                    "f1": float(self.f1[i]),
                    "support": int(self.support[i]),
                }
                for i, name in enumerate(self.classes)
            },
            "accuracy": self.accuracy,
            "false_positive_rate": self.false_positive_rate,
            "unknown_rate": self.unknown_rate,
            "total": self.total,
        }


def confusion_metrics(confusion: np.ndarray):
    """Precision/recall/F1 per class from a confusion matrix."""
    confusion = np.asarray(confusion, dtype=np.float64)
    tp = np.diag(confusion)
    col = confusion.sum(axis=0)
    row = confusion.sum(axis=1)
    precision = np.divide(tp, col, out=np.zeros_like(tp), where=col > 0)
    recall = np.divide(tp, row, out=np.zeros_like(tp), where=row > 0)
    pr = precision + recall
    f1 = np.divide(2 * precision * recall, pr, out=np.zeros_like(tp), where=pr > 0)
    return precision, recall, f1


def evaluate(model: ModelGraph, x: np.ndarray, y: np.ndarray,
             threshold: float = DEFAULT_THRESHOLD,
             classes: tuple[str, ...] = LABELS,
             benign_index: int = 0) -> DetectionMetrics:
    """Score a model on labeled sequences with confidence gating."""
    if len(x) == 0:
        raise InputError("evaluation set is empty")
    y = np.asarray(y)
    k = len(classes)
    probs = predict_probs(model, np.asarray(x, dtype=np.float64))
    pred = probs.argmax(axis=1)
    confident = probs.max(axis=1) >= threshold
    confusion = np.zeros((k, k), dtype=np.int64)
    np.add.at(confusion, (y[confident], pred[confident]), 1)
    precision, recall, f1 = confusion_metrics(confusion)
    n_confident = int(confident.sum())
    accuracy = float(np.trace(confusion) / n_confident) if n_confident else 0.0
    benign_mask = y == benign_index
    n_benign = int(benign_mask.sum())
    false_alarms = int((benign_mask & confident & (pred != benign_index)).sum())
    return DetectionMetrics(
        classes=tuple(classes),
        confusion=confusion,
        precision=precision,
        recall=recall,
        f1=f1,
        support=confusion.sum(axis=1),
        accuracy=accuracy,
        false_positive_rate=false_alarms / n_benign if n_benign else 0.0,
        unknown_rate=1.0 - n_confident / len(y),
        total=int(len(y)),
    )


def save_detector(path: str, model: ModelGraph, arch: ArchConfig,
                  stats: NormStats, layout: FeatureLayout,
                  classes: tuple[str, ...] = LABELS) -> None:
    """Bundle parameters, normalizer, and layout into one npz checkpoint."""
    params = dict(model.parameters())
    params["norm.mean"] = stats.mean
    params["norm.std"] = stats.std
    meta = {
        "kind": "detector",
        "arch": arch.to_dict(),
        "classes": list(classes),
        "layout": layout.to_dict(),
    }
    save_params(path, params, meta)


def load_detector(path: str):
    """Rebuild ``(model, arch, stats, layout, classes)`` from a bundle."""
    params, meta = load_params(path)
    from .errors import CheckpointError

    if meta.get("kind") != "detector":
        raise CheckpointError(f"{path}: not a detector checkpoint")
    arch = ArchConfig.from_dict(meta["arch"])
    layout = FeatureLayout.from_dict(meta["layout"])
    classes = tuple(meta["classes"])
    for key in ("norm.mean", "norm.std"):
        if key not in params:
            raise CheckpointError(f"{path}: missing parameter {key!r}")
    stats = NormStats(mean=params.pop("norm.mean"), std=params.pop("norm.std"))
    if stats.mean.shape != (arch.feature_dim,):
        raise CheckpointError(
            f"{path}: parameter 'norm.mean' shape {stats.mean.shape} != "
            f"({arch.feature_dim},)"
        )
    model = build_model(arch, seed=0)
    restore_into(model, params, path)
    return model, arch, stats, layout, classes
