"""Binary claim-document match scorer: a 20-relu-10-relu MLP over cosine
features, trained with Adam and inverse-frequency class weighting.

The training objective is the weighted binary cross-entropy SUM over
examples (not the mean), so duplicating a class k times while dividing its
weight by k leaves the objective value unchanged. All arithmetic is
float64 and seeded, so identical configs reproduce bitwise-identical
parameter trajectories.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .corpus import InputClaim, PairSet, VerifiedClaimStore
from .embed import EmbeddingStore, hash_embed, sentence_score_matrix

MODEL_FORMAT = "claimrank-mlp"
MODEL_VERSION = 1

_ADAM_BETA1 = 0.9
_ADAM_BETA2 = 0.999
_ADAM_EPS = 1e-8
_HIDDEN_SIZES = (20, 10)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 15
    batch_size: int = 2048
    learning_rate: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")


class MlpModel:
    """Feed-forward net [input_dim, 20, 10, 1]: ReLU hidden, sigmoid output."""

    def __init__(self, weights: Sequence[np.ndarray], biases: Sequence[np.ndarray]):
        self.weights = [np.asarray(w, dtype=np.float64) for w in weights]
        self.biases = [np.asarray(b, dtype=np.float64) for b in biases]
        for w, b in zip(self.weights, self.biases):
            if w.ndim != 2 or b.shape != (w.shape[0],):
                raise ValueError("inconsistent layer shapes")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ValueError("non-finite parameter")
        for prev, nxt in zip(self.weights, self.weights[1:]):
            if nxt.shape[1] != prev.shape[0]:
                raise ValueError("inconsistent layer shapes")

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[1]

    @property
    def layer_sizes(self) -> list[int]:
        return [self.input_dim] + [w.shape[0] for w in self.weights]

    def _forward(self, X: np.ndarray):
        acts = [X]
        z_list = []
        h = X
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ w.T + b
            z_list.append(z)
            h = np.maximum(z, 0.0) if i < len(self.weights) - 1 else z
            acts.append(h)
        return z_list, acts

    def logits(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        squeeze = X.ndim == 1
        if squeeze:
            X = X[None, :]
        if X.shape[1] != self.input_dim:
            raise ValueError(f"feature length {X.shape[1]} != input dim {self.input_dim}")
        z = self._forward(X)[0][-1][:, 0]
        return z[0] if squeeze else z

    def predict(self, X) -> np.ndarray:
        z = self.logits(X)
        p = _sigmoid(np.atleast_1d(np.asarray(z, dtype=np.float64)))
        return p if np.ndim(z) else p[0]


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def mlp_score(model: MlpModel, features) -> float:
    """Match probability for one feature vector, clipped into the open (0, 1)."""
    p = float(model.predict(np.asarray(features, dtype=np.float64)))
    return float(np.clip(p, 1e-15, 1.0 - 1e-15))


def init_mlp(input_dim: int, seed: int = 0) -> MlpModel:
    """He-uniform init for the ReLU layers, Xavier-uniform for the output."""
    if input_dim < 1:
        raise ValueError(f"input_dim must be >= 1, got {input_dim}")
    rng = np.random.default_rng(seed)
    sizes = [input_dim, *_HIDDEN_SIZES, 1]
    weights, biases = [], []
    for i, (fan_in, fan_out) in enumerate(zip(sizes, sizes[1:])):
        if i < len(sizes) - 2:
            limit = np.sqrt(6.0 / fan_in)
        else:
            limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return MlpModel(weights, biases)


def class_weights(y: np.ndarray) -> tuple[float, float]:
    """Inverse-frequency weights (w_neg, w_pos): total / (2 * class count)."""
    y = np.asarray(y)
    n_pos = int(np.sum(y == 1))
    n_neg = int(np.sum(y == 0))
    if n_pos == 0 or n_neg == 0:
        raise ValueError("training data must contain both classes")
    total = n_pos + n_neg
    return total / (2.0 * n_neg), total / (2.0 * n_pos)


def weighted_bce_loss(model: MlpModel, X, y, sample_weights) -> float:
    """Sum over examples of w * BCE, computed stably from logits."""
    z = np.asarray(model.logits(X))
    y = np.asarray(y, dtype=np.float64)
    w = np.asarray(sample_weights, dtype=np.float64)
    # softplus(z) - y*z == -[y ln p + (1-y) ln(1-p)]
    return float(np.sum(w * (np.logaddexp(0.0, z) - y * z)))


def _backprop(model: MlpModel, X, y, w):
    """Gradient of the weighted BCE sum w.r.t. every parameter."""
    z_list, acts = model._forward(X)
    z_out = z_list[-1][:, 0]
    p = _sigmoid(z_out)
    delta = (w * (p - y))[:, None]
    grads_w = [None] * len(model.weights)
    grads_b = [None] * len(model.biases)
    for layer in reversed(range(len(model.weights))):
        grads_w[layer] = delta.T @ acts[layer]
        grads_b[layer] = delta.sum(axis=0)
        if layer > 0:
            delta = (delta @ model.weights[layer]) * (z_list[layer - 1] > 0.0)
    return grads_w, grads_b


@dataclass
class TrainLogRow:
    epoch: int
    loss: float
    accuracy: float


@dataclass
class TrainResult:
    model: MlpModel
    log: list[TrainLogRow] = field(default_factory=list)


def train_mlp(X, y, config: TrainConfig = TrainConfig()) -> TrainResult:
    """Minimize the class-weighted BCE with Adam for a fixed epoch count.

    No early stopping and no validation split; shuffling and init come
    from the configured seed only. The per-epoch log rows hold the full
    training-set weighted loss (sum) and plain accuracy at threshold 0.5.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ValueError("X must be [n, d] with one label per row")
    w_neg, w_pos = class_weights(y)
    sample_w = np.where(y == 1, w_pos, w_neg)

    model = init_mlp(X.shape[1], seed=config.seed)
    rng = np.random.default_rng(config.seed + 1)

    params = model.weights + model.biases
    m_state = [np.zeros_like(p) for p in params]
    v_state = [np.zeros_like(p) for p in params]
    step = 0
    n = X.shape[0]
    log: list[TrainLogRow] = []

    for epoch in range(1, config.epochs + 1):
        perm = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            batch = perm[start : start + config.batch_size]
            grads_w, grads_b = _backprop(model, X[batch], y[batch], sample_w[batch])
            grads = grads_w + grads_b
            step += 1
            for p, g, m, v in zip(params, grads, m_state, v_state):
                m *= _ADAM_BETA1
                m += (1 - _ADAM_BETA1) * g
                v *= _ADAM_BETA2
                v += (1 - _ADAM_BETA2) * g * g
                m_hat = m / (1 - _ADAM_BETA1**step)
                v_hat = v / (1 - _ADAM_BETA2**step)
                p -= config.learning_rate * m_hat / (np.sqrt(v_hat) + _ADAM_EPS)

        loss = weighted_bce_loss(model, X, y, sample_w)
        if not np.isfinite(loss):
            raise RuntimeError(
                f"non-finite training loss at epoch {epoch} "
                f"(lr={config.learning_rate}, batch_size={config.batch_size})"
            )
        acc = float(np.mean((model.predict(X) >= 0.5) == (y == 1)))
        log.append(TrainLogRow(epoch=epoch, loss=loss, accuracy=acc))
    return TrainResult(model=model, log=log)


def write_train_log(log: Sequence[TrainLogRow], path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write("epoch,weighted_loss,accuracy\n")
        for row in log:
            f.write(f"{row.epoch},{row.loss:.10g},{row.accuracy:.6f}\n")


def mlp_gradient_check(model: MlpModel, X, y, sample_weights=None, h: float = 1e-5) -> float:
    """Max relative error of analytic vs central-difference gradients.

    The relative-error denominator is guarded below by 1e-5 so dead ReLU
    units and saturated sigmoids (both gradients ~ 0) compare cleanly.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.atleast_1d(np.asarray(y, dtype=np.float64))
    if sample_weights is None:
        sample_weights = np.ones_like(y)
    w = np.atleast_1d(np.asarray(sample_weights, dtype=np.float64))

    grads_w, grads_b = _backprop(model, X, y, w)
    analytic = grads_w + grads_b
    params = model.weights + model.biases

    worst = 0.0
    for p, g in zip(params, analytic):
        flat_p = p.ravel()
        flat_g = g.ravel()
        for i in range(flat_p.size):
            orig = flat_p[i]
            flat_p[i] = orig + h
            up = weighted_bce_loss(model, X, y, w)
            flat_p[i] = orig - h
            down = weighted_bce_loss(model, X, y, w)
            flat_p[i] = orig
            numeric = (up - down) / (2.0 * h)
            a = flat_g[i]
            rel = abs(a - numeric) / max(abs(a) + abs(numeric), 1e-5)
            worst = max(worst, rel)
    return worst


def generate_training_pairs(
    train_inputs: Sequence[InputClaim],
    claims: VerifiedClaimStore,
    store: EmbeddingStore,
    gold: PairSet,
    n: int = 4,
    query_vec_fn: Callable | None = None,
    negative_sample_rate: float | None = None,
    seed: int = 0,
):
    """Cross product of train inputs x verified claims as labeled features.

    Feature rows are [cos_verclaim, cos_title, body_top 1..n]; the label is
    1 iff the pair is in the gold set. A claim without ver_claim/title
    vectors is a hard error, even when only gold pairs reference it.
    negative_sample_rate (0, 1] keeps that fraction of negatives for
    desk-scale runs; positives are always kept.

    Returns (X, y, keys) with keys as (input_id, doc_id) row labels.
    """
    if negative_sample_rate is not None and not 0.0 < negative_sample_rate <= 1.0:
        raise ValueError(f"negative_sample_rate must be in (0, 1], got {negative_sample_rate}")
    if query_vec_fn is None:
        query_vec_fn = lambda inp: hash_embed(inp.text, store.dim)  # noqa: E731
    gold_links = gold.qrels()
    rng = np.random.default_rng(seed)

    blocks: list[np.ndarray] = []
    labels: list[np.ndarray] = []
    keys: list[tuple[str, str]] = []
    for inp in train_inputs:
        doc_ids, features = sentence_score_matrix(query_vec_fn(inp), store, n)
        if len(doc_ids) != len(claims):
            missing = sorted(set(claims.ids()) - set(doc_ids))
            raise KeyError(f"claims missing embedding vectors, e.g. {missing[:3]}")
        relevant = gold_links.get(inp.id, set())
        y = np.array([1 if d in relevant else 0 for d in doc_ids], dtype=np.int8)
        if negative_sample_rate is not None and negative_sample_rate < 1.0:
            keep = (y == 1) | (rng.random(len(y)) < negative_sample_rate)
            features, y = features[keep], y[keep]
            doc_ids = [d for d, k in zip(doc_ids, keep) if k]
        blocks.append(features)
        labels.append(y)
        keys.extend((inp.id, d) for d in doc_ids)
    if not blocks:
        raise ValueError("no training inputs")
    return np.vstack(blocks), np.concatenate(labels), keys


def save_mlp(model: MlpModel, path, config: TrainConfig | None = None) -> None:
    payload = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "layer_sizes": model.layer_sizes,
        "weights": [w.tolist() for w in model.weights],
        "biases": [b.tolist() for b in model.biases],
    }
    if config is not None:
        payload["config"] = {
            "epochs": config.epochs,
            "batch_size": config.batch_size,
            "learning_rate": config.learning_rate,
            "seed": config.seed,
        }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, sort_keys=True)


def load_mlp(path) -> MlpModel:
    with open(path, "r", encoding="utf-8") as f:
        payload = json.load(f)
    if payload.get("format") != MODEL_FORMAT:
        raise ValueError(f"{path}: not a {MODEL_FORMAT} file")
    if payload.get("version") != MODEL_VERSION:
        raise ValueError(f"{path}: unsupported model version {payload.get('version')!r}")
    return MlpModel(
        [np.array(w, dtype=np.float64) for w in payload["weights"]],
        [np.array(b, dtype=np.float64) for b in payload["biases"]],
    )
