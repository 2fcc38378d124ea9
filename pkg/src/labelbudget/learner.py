"""Hashed-feature multinomial linear classifier with weighted cross-entropy.

The per-example weights come straight from the supervision set, so the
training loss is the weighted sum of both label sources' losses (normalized
by total weight per batch). Training is plain mini-batch gradient descent,
single-threaded and bit-deterministic for a given seed. Updates touch only
the hash columns active in a batch.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np
from scipy import sparse

from .errors import DivergenceError
from .pool import Pool, UnlabeledExample
from .supervision import SupervisionSet


@dataclass(frozen=True)
class HashedFeatureSpec:
    dimension: int = 2**18
    ngram_orders: tuple[int, ...] = (1, 2)
    hash_seed: int = 0

    def __post_init__(self) -> None:
        if self.dimension < 2 or self.dimension & (self.dimension - 1):
            raise ValueError("dimension must be a power of two >= 2")
        if not self.ngram_orders or any(n < 1 for n in self.ngram_orders):
            raise ValueError("ngram_orders must be non-empty positive counts")
        object.__setattr__(self, "ngram_orders", tuple(sorted(set(self.ngram_orders))))


def _hash_index(gram: str, seed: int, dimension: int) -> int:
    digest = hashlib.blake2b(
        gram.encode("utf-8"), key=seed.to_bytes(8, "big", signed=True), digest_size=8
    ).digest()
    return int.from_bytes(digest, "big") & (dimension - 1)


def featurize(text: str, spec: HashedFeatureSpec) -> dict[int, int]:
    """Counts of hashed word n-grams. Tokens never contain whitespace, so
    joining grams with spaces is injective across orders."""
    tokens = text.split()
    counts: dict[int, int] = {}
    for order in spec.ngram_orders:
        for i in range(len(tokens) - order + 1):
            gram = " ".join(tokens[i : i + order])
            idx = _hash_index(gram, spec.hash_seed, spec.dimension)
            counts[idx] = counts.get(idx, 0) + 1
    return counts


def featurize_many(texts: Sequence[str], spec: HashedFeatureSpec) -> sparse.csr_matrix:
    indptr = [0]
    indices: list[int] = []
    data: list[float] = []
    for text in texts:
        counts = featurize(text, spec)
        for idx in sorted(counts):
            indices.append(idx)
            data.append(float(counts[idx]))
        indptr.append(len(indices))
    return sparse.csr_matrix(
        (np.array(data), np.array(indices, dtype=np.int64), np.array(indptr, dtype=np.int64)),
        shape=(len(texts), spec.dimension),
    )


@dataclass(frozen=True)
class TrainParams:
    learning_rate: float = 0.5
    epochs: int = 10
    batch_size: int = 32

    def __post_init__(self) -> None:
        if self.learning_rate <= 0 or self.epochs < 1 or self.batch_size < 1:
            raise ValueError("invalid training hyperparameters")


@dataclass
class LinearModel:
    weights: np.ndarray  # [num_classes, dimension]
    class_order: tuple[str, ...]
    spec: HashedFeatureSpec
    training_meta: dict

    def __post_init__(self) -> None:
        if not np.all(np.isfinite(self.weights)):
            raise ValueError("model weights must be finite")


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


def ce_loss_grad(
    weights: np.ndarray, x: np.ndarray, y: np.ndarray, example_weights: np.ndarray
) -> tuple[float, np.ndarray]:
    """Weight-normalized cross-entropy over a batch and its gradient.

    L = sum_i w_i * nll_i / sum_i w_i, dL/dW = (P - Y)^T diag(w) X / sum w.
    A zero weight sum yields zero loss and gradient.
    """
    wsum = example_weights.sum()
    if wsum == 0:
        return 0.0, np.zeros_like(weights)
    probs = softmax(x @ weights.T)
    n = x.shape[0]
    nll = -np.log(np.clip(probs[np.arange(n), y], 1e-300, None))
    loss = float(example_weights @ nll / wsum)
    delta = probs
    delta[np.arange(n), y] -= 1.0
    grad = (delta * example_weights[:, None]).T @ x / wsum
    return loss, grad


def train(
    sset: SupervisionSet,
    texts: Mapping[str, str],
    spec: HashedFeatureSpec,
    params: TrainParams,
    seed: int,
    label_vocabulary: Optional[Iterable[str]] = None,
    dev_fraction: float = 0.0,
) -> LinearModel:
    """Fit the classifier by mini-batch descent on the weighted loss.

    With dev_fraction > 0 a seeded slice is held out and the epoch checkpoint
    with the best held-out accuracy is returned; otherwise the final epoch.
    """
    if len(sset) == 0:
        raise ValueError("cannot train on an empty supervision set")
    if label_vocabulary is not None:
        class_order = tuple(sorted(label_vocabulary))
    else:
        class_order = tuple(sorted({rec.label for rec, _ in sset.records}))
    class_index = {label: i for i, label in enumerate(class_order)}
    for record, _ in sset.records:
        if record.label not in class_index:
            raise ValueError(f"label {record.label!r} outside the vocabulary")

    x_all = featurize_many([texts[rec.id] for rec, _ in sset.records], spec)
    y_all = np.array([class_index[rec.label] for rec, _ in sset.records], dtype=np.int64)
    w_all = np.array([weight for _, weight in sset.records], dtype=np.float64)

    rng = np.random.default_rng(seed)
    n = x_all.shape[0]
    dev_rows = np.array([], dtype=np.int64)
    train_rows = np.arange(n)
    if dev_fraction > 0 and n >= 2:
        order = rng.permutation(n)
        n_dev = max(1, int(n * dev_fraction))
        dev_rows, train_rows = order[:n_dev], order[n_dev:]

    weights = np.zeros((len(class_order), spec.dimension), dtype=np.float64)
    best: tuple[float, np.ndarray] | None = None
    step = 0
    for _ in range(params.epochs):
        order = rng.permutation(len(train_rows))
        for start in range(0, len(train_rows), params.batch_size):
            rows = train_rows[order[start : start + params.batch_size]]
            batch = x_all[rows]
            active = np.unique(batch.indices)
            if active.size == 0:
                step += 1
                continue
            x_sub = np.asarray(batch[:, active].todense())
            loss, grad = ce_loss_grad(weights[:, active], x_sub, y_all[rows], w_all[rows])
            if not np.isfinite(loss):
                raise DivergenceError(step)
            weights[:, active] -= params.learning_rate * grad
            if not np.all(np.isfinite(weights[:, active])):
                raise DivergenceError(step)
            step += 1
        if dev_rows.size:
            dev_pred = np.asarray((x_all[dev_rows] @ weights.T)).argmax(axis=1)
            dev_acc = float((dev_pred == y_all[dev_rows]).mean())
            if best is None or dev_acc > best[0]:
                best = (dev_acc, weights.copy())
    if best is not None:
        weights = best[1]
    if not np.all(np.isfinite(weights)):
        raise DivergenceError(step)
    return LinearModel(
        weights=weights,
        class_order=class_order,
        spec=spec,
        training_meta={
            "learning_rate": params.learning_rate,
            "epochs": params.epochs,
            "batch_size": params.batch_size,
            "alpha": sset.alpha,
            "seed": seed,
        },
    )


def predict_many(model: LinearModel, texts: Sequence[str]) -> list[str]:
    """Argmax class per text; exact ties go to the lexicographically first
    label because class_order is sorted."""
    x = featurize_many(texts, model.spec)
    scores = np.asarray(x @ model.weights.T)
    return [model.class_order[i] for i in scores.argmax(axis=1)]


def predict(model: LinearModel, text: str) -> str:
    return predict_many(model, [text])[0]


def accuracy(model: LinearModel, eval_examples: Pool | Sequence[UnlabeledExample]) -> float:
    examples = list(eval_examples)
    if not examples:
        raise ValueError("accuracy over an empty evaluation pool is undefined")
    gold = [ex.gold_label for ex in examples]
    if any(g is None for g in gold):
        raise ValueError("every evaluation example needs a gold label")
    if isinstance(eval_examples, Pool) and eval_examples.label_vocabulary is not None:
        if set(eval_examples.label_vocabulary) != set(model.class_order):
            raise ValueError("model classes do not match the pool vocabulary")
    predictions = predict_many(model, [ex.text for ex in examples])
    return sum(p == g for p, g in zip(predictions, gold)) / len(examples)


MODEL_FORMAT_VERSION = 1


def save_model(model: LinearModel, path) -> None:
    """Flat binary format: one JSON header line, then row-major float64."""
    header = {
        "version": MODEL_FORMAT_VERSION,
        "class_order": list(model.class_order),
        "dimension": model.spec.dimension,
        "ngram_orders": list(model.spec.ngram_orders),
        "hash_seed": model.spec.hash_seed,
        "dtype": "float64",
        "training_meta": model.training_meta,
    }
    with open(path, "wb") as sink:
        sink.write(json.dumps(header, sort_keys=True).encode("utf-8") + b"\n")
        sink.write(np.ascontiguousarray(model.weights, dtype=np.float64).tobytes())


def load_model(path) -> LinearModel:
    with open(path, "rb") as source:
        header = json.loads(source.readline().decode("utf-8"))
        if header.get("version") != MODEL_FORMAT_VERSION:
            raise ValueError(f"unsupported model format version {header.get('version')}")
        spec = HashedFeatureSpec(
            dimension=header["dimension"],
            ngram_orders=tuple(header["ngram_orders"]),
            hash_seed=header["hash_seed"],
        )
        class_order = tuple(header["class_order"])
        raw = source.read()
    weights = np.frombuffer(raw, dtype=np.float64).reshape(
        len(class_order), spec.dimension
    ).copy()
    return LinearModel(
        weights=weights,
        class_order=class_order,
        spec=spec,
        training_meta=header.get("training_meta", {}),
    )
