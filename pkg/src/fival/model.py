"""Attention-over-embeddings text classifier, trained with plain numpy.

The model pools word + learned position embeddings with a single
attention query and feeds the pooled vector to a linear head, so word
order information enters only through the position embeddings. That
makes it the smallest architecture whose order sensitivity can be
switched off (zero the position table) and measured.

Reductions over sequence positions always run in a canonical order
(positions stably sorted by token id), so with the position table zeroed
the logits are bit-identical under any permutation of the input tokens.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from .records import Record, component_order
from .rng import SplitMix64, derive_seed
from .scoring import PredictionRecord

PAD, UNK, SEP = 0, 1, 2
_RESERVED = ("<pad>", "<unk>", "<sep>")

CHECKPOINT_MAGIC = b"FIVA"
CHECKPOINT_VERSION = 1

PARAM_NAMES = ("word_emb", "pos_emb", "query", "out_w", "out_b")


class ShapeError(ValueError):
    """Batch contents do not fit the parameter shapes."""


class Divergence(RuntimeError):
    """Training loss became non-finite."""


class VocabMismatch(ValueError):
    """Checkpoint tensors and vocabulary disagree."""


@dataclass(frozen=True)
class ModelConfig:
    embed_dim: int = 64
    max_len: int = 64
    learning_rate: float = 1e-3
    batch_size: int = 32
    max_epochs: int = 20
    patience: int = 3
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    init_scale: float = 0.02
    vocab_size: int | None = None
    n_classes: int | None = None


@dataclass
class TrainReport:
    train_loss: list[float] = field(default_factory=list)
    dev_accuracy: list[float] = field(default_factory=list)
    stopped_epoch: int = 0
    best_epoch: int = 0
    best_checkpoint_id: str = ""


@dataclass
class ModelBundle:
    """Everything needed to run the model: weights, vocab, label names."""

    config: ModelConfig
    params: dict[str, np.ndarray]
    vocab: dict[str, int]
    labels: list[str]


def build_vocab(texts: Iterable[Sequence[str]]) -> dict[str, int]:
    """Token -> id over the training split; most frequent tokens first."""
    counts: dict[str, int] = {}
    for components in texts:
        for component in components:
            for token in component.split():
                counts[token] = counts.get(token, 0) + 1
    vocab = {tok: i for i, tok in enumerate(_RESERVED)}
    for token in sorted(counts, key=lambda t: (-counts[t], t)):
        vocab[token] = len(vocab)
    return vocab


def encode_components(
    components: Sequence[str], vocab: dict[str, int], max_len: int
) -> list[int]:
    """Token ids with a separator between components, at most max_len long.

    When over budget, tokens are dropped from the tail of the last
    component first, then the one before it, and so on. A sequence that
    truncates to nothing becomes a lone separator.
    """
    parts = [[vocab.get(tok, UNK) for tok in comp.split()]
             for comp in components]
    n_sep = len(parts) - 1
    while sum(len(p) for p in parts) + n_sep > max_len:
        for part in reversed(parts):
            if part:
                part.pop()
                break
        else:
            break
    ids: list[int] = []
    for i, part in enumerate(parts):
        if i:
            ids.append(SEP)
        ids.extend(part)
    ids = ids[:max_len]
    return ids or [SEP]


def encode(record: Record, vocab: dict[str, int], max_len: int) -> list[int]:
    names = component_order(record)
    return encode_components([record.components[n] for n in names],
                             vocab, max_len)


def _pad_batch(sequences: Sequence[Sequence[int]]) -> np.ndarray:
    width = max(len(s) for s in sequences)
    out = np.full((len(sequences), width), PAD, dtype=np.int64)
    for i, seq in enumerate(sequences):
        out[i, : len(seq)] = seq
    return out


def init_params(
    vocab_size: int, n_classes: int, config: ModelConfig
) -> dict[str, np.ndarray]:
    gen = np.random.Generator(np.random.PCG64(config.seed))
    d = config.embed_dim
    scale = config.init_scale
    return {
        "word_emb": gen.standard_normal((vocab_size, d)) * scale,
        "pos_emb": gen.standard_normal((config.max_len, d)) * scale,
        "query": gen.standard_normal(d) * scale,
        "out_w": np.zeros((d, n_classes)),
        "out_b": np.zeros(n_classes),
    }


def _canonical_order(ids: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Stably sort each row's positions by token id.

    Returns (sorted ids, original positions in sorted order, mask). All
    position-wise reductions run over this ordering so results cannot
    depend on where equal tokens sat in the input row.
    """
    order = np.argsort(ids, axis=1, kind="stable")
    ids_s = np.take_along_axis(ids, order, axis=1)
    return ids_s, order, ids_s != PAD


def _attend(params: dict[str, np.ndarray], ids: np.ndarray):
    """Shared forward pass up to the pooled vector."""
    word_emb = params["word_emb"]
    pos_emb = params["pos_emb"]
    if ids.ndim != 2:
        raise ShapeError(f"ids must be (batch, length); got {ids.shape}")
    if ids.max(initial=0) >= word_emb.shape[0]:
        raise ShapeError(
            f"token id {int(ids.max())} out of range for vocab of "
            f"{word_emb.shape[0]}"
        )
    if ids.shape[1] > pos_emb.shape[0]:
        raise ShapeError(
            f"sequence length {ids.shape[1]} exceeds max_len "
            f"{pos_emb.shape[0]}"
        )
    ids_s, pos_s, mask = _canonical_order(ids)
    if not mask.any(axis=1).all():
        raise ShapeError("every row needs at least one non-padding token")
    h = word_emb[ids_s] + pos_emb[pos_s]
    scale = 1.0 / math.sqrt(word_emb.shape[1])
    scores = np.where(mask, (h @ params["query"]) * scale, -np.inf)
    m = scores.max(axis=1, keepdims=True)
    e = np.exp(scores - m)
    z = e.sum(axis=1, keepdims=True)
    a = e / z
    pooled = np.einsum("bl,bld->bd", a, h)
    return ids_s, pos_s, mask, h, a, pooled


def forward(params: dict[str, np.ndarray], ids: np.ndarray) -> np.ndarray:
    """Logits of shape (batch, n_classes)."""
    _, _, _, _, _, pooled = _attend(params, ids)
    return pooled @ params["out_w"] + params["out_b"]


def attention_weights(params: dict[str, np.ndarray], ids: np.ndarray
                      ) -> np.ndarray:
    """Softmax weights in canonical order (padding positions are zero)."""
    _, _, _, _, a, _ = _attend(params, ids)
    return a


def loss_and_grads(
    params: dict[str, np.ndarray], ids: np.ndarray, labels: np.ndarray
) -> tuple[float, dict[str, np.ndarray]]:
    """Mean cross-entropy and analytic gradients for every parameter."""
    ids_s, pos_s, _, h, a, pooled = _attend(params, ids)
    logits = pooled @ params["out_w"] + params["out_b"]
    batch = ids.shape[0]

    zmax = logits.max(axis=1, keepdims=True)
    ez = np.exp(logits - zmax)
    log_probs = logits - zmax - np.log(ez.sum(axis=1, keepdims=True))
    loss = float(-log_probs[np.arange(batch), labels].mean())

    dlogits = np.exp(log_probs)
    dlogits[np.arange(batch), labels] -= 1.0
    dlogits /= batch

    grads = {
        "out_w": pooled.T @ dlogits,
        "out_b": dlogits.sum(axis=0),
    }
    dpooled = dlogits @ params["out_w"].T
    da = np.einsum("bld,bd->bl", h, dpooled)
    dh = a[:, :, None] * dpooled[:, None, :]
    ds = a * (da - (a * da).sum(axis=1, keepdims=True))
    scale = 1.0 / math.sqrt(params["word_emb"].shape[1])
    grads["query"] = np.einsum("bl,bld->d", ds, h) * scale
    dh += ds[:, :, None] * (params["query"] * scale)[None, None, :]

    dword = np.zeros_like(params["word_emb"])
    np.add.at(dword, ids_s.ravel(), dh.reshape(-1, dh.shape[-1]))
    grads["word_emb"] = dword
    dpos = np.zeros_like(params["pos_emb"])
    np.add.at(dpos, pos_s.ravel(), dh.reshape(-1, dh.shape[-1]))
    grads["pos_emb"] = dpos
    return loss, grads


class _Adam:
    """Adaptive-moment gradient descent over a parameter dict."""

    def __init__(self, params: dict[str, np.ndarray], config: ModelConfig):
        self.config = config
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params: dict[str, np.ndarray],
             grads: dict[str, np.ndarray]) -> None:
        cfg = self.config
        self.t += 1
        bias1 = 1.0 - cfg.beta1 ** self.t
        bias2 = 1.0 - cfg.beta2 ** self.t
        for key, grad in grads.items():
            self.m[key] = cfg.beta1 * self.m[key] + (1 - cfg.beta1) * grad
            self.v[key] = cfg.beta2 * self.v[key] + (1 - cfg.beta2) * grad**2
            m_hat = self.m[key] / bias1
            v_hat = self.v[key] / bias2
            params[key] -= cfg.learning_rate * m_hat / (np.sqrt(v_hat)
                                                        + cfg.eps)


def _accuracy(params: dict[str, np.ndarray], ids: np.ndarray,
              labels: np.ndarray, batch_size: int) -> float:
    hits = 0
    for start in range(0, len(ids), batch_size):
        logits = forward(params, ids[start : start + batch_size])
        hits += int((logits.argmax(axis=1)
                     == labels[start : start + batch_size]).sum())
    return hits / len(ids)


def train_arrays(
    config: ModelConfig,
    train_ids: np.ndarray,
    train_labels: np.ndarray,
    dev_ids: np.ndarray,
    dev_labels: np.ndarray,
    n_classes: int,
    vocab_size: int,
) -> tuple[dict[str, np.ndarray], TrainReport]:
    """Adam training with early stopping on dev accuracy."""
    params = init_params(vocab_size, n_classes, config)
    optimizer = _Adam(params, config)
    report = TrainReport()
    rng = SplitMix64(derive_seed(config.seed, "train", "epoch-order"))
    best_params = {k: v.copy() for k, v in params.items()}
    best_acc = -1.0
    bad_epochs = 0

    for epoch in range(1, config.max_epochs + 1):
        order = list(range(len(train_ids)))
        rng.shuffle(order)
        order = np.array(order)
        losses = []
        for start in range(0, len(order), config.batch_size):
            batch = order[start : start + config.batch_size]
            loss, grads = loss_and_grads(params, train_ids[batch],
                                         train_labels[batch])
            if not math.isfinite(loss):
                raise Divergence(f"loss became {loss} at epoch {epoch}")
            losses.append(loss * len(batch))
            optimizer.step(params, grads)
        report.train_loss.append(math.fsum(losses) / len(order))
        dev_acc = _accuracy(params, dev_ids, dev_labels, config.batch_size)
        report.dev_accuracy.append(dev_acc)
        report.stopped_epoch = epoch
        if dev_acc > best_acc:
            best_acc = dev_acc
            best_params = {k: v.copy() for k, v in params.items()}
            report.best_epoch = epoch
            bad_epochs = 0
        else:
            bad_epochs += 1
            if bad_epochs >= config.patience:
                break
    report.best_checkpoint_id = f"epoch-{report.best_epoch}"
    return best_params, report


def records_to_xy(records: Sequence[Record]) -> tuple[list[tuple[str, ...]],
                                                      list[str]]:
    """Component tuples and class-label strings for classifier training."""
    xs, ys = [], []
    for record in records:
        if record.gold.kind != "class":
            raise ValueError(
                f"record {record.id!r} has a {record.gold.kind} gold label; "
                f"the toy classifier handles class labels only"
            )
        xs.append(tuple(record.components[n]
                        for n in component_order(record)))
        ys.append(record.gold.value)
    return xs, ys


def train(
    config: ModelConfig,
    train_records: Sequence[Record],
    dev_records: Sequence[Record],
    label_space: Sequence[str] | None = None,
) -> tuple[ModelBundle, TrainReport]:
    """Train on records; dev drives early stopping and checkpoint choice."""
    train_x, train_y = records_to_xy(train_records)
    dev_x, dev_y = records_to_xy(dev_records)
    labels = (list(label_space) if label_space is not None
              else sorted(set(train_y)))
    missing = set(train_y + dev_y) - set(labels)
    if missing:
        raise ValueError(f"labels {sorted(missing)} missing from label "
                         f"space {labels}")
    vocab = build_vocab(train_x)
    label_ids = {name: i for i, name in enumerate(labels)}

    def prepare(xs, ys):
        ids = _pad_batch([encode_components(x, vocab, config.max_len)
                          for x in xs])
        return ids, np.array([label_ids[y] for y in ys], dtype=np.int64)

    train_ids, train_labels = prepare(train_x, train_y)
    dev_ids, dev_labels = prepare(dev_x, dev_y)
    params, report = train_arrays(config, train_ids, train_labels, dev_ids,
                                  dev_labels, len(labels), len(vocab))
    bundle = ModelBundle(
        config=replace(config, vocab_size=len(vocab), n_classes=len(labels)),
        params=params,
        vocab=vocab,
        labels=list(labels),
    )
    return bundle, report


def predict(bundle: ModelBundle, records: Sequence[Record]
            ) -> list[PredictionRecord]:
    """Argmax label per record (ties break to the lowest class index)."""
    if len(bundle.vocab) != bundle.params["word_emb"].shape[0]:
        raise VocabMismatch(
            f"vocab has {len(bundle.vocab)} entries but the embedding "
            f"table has {bundle.params['word_emb'].shape[0]} rows"
        )
    out = []
    config = bundle.config
    xs = [tuple(r.components[n] for n in component_order(r))
          for r in records]
    encoded = [encode_components(x, bundle.vocab, config.max_len)
               for x in xs]
    for start in range(0, len(encoded), config.batch_size):
        chunk = encoded[start : start + config.batch_size]
        ids = _pad_batch(chunk)
        logits = forward(bundle.params, ids)
        probs = _softmax(logits)
        for row, record in enumerate(records[start : start + len(chunk)]):
            cls = int(logits[row].argmax())
            out.append(PredictionRecord(
                id=record.id,
                predicted=bundle.labels[cls],
                confidence=float(probs[row, cls]),
            ))
    return out


def _softmax(logits: np.ndarray) -> np.ndarray:
    e = np.exp(logits - logits.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


# ---------------------------------------------------------------------------
# gradient checking


def grad_check(config: ModelConfig | None = None, grads_fn=loss_and_grads,
               step: float = 1e-5) -> float:
    """Max relative error of analytic vs central-difference gradients.

    Runs a tiny 64-bit model (vocab 20, dim 8, length 6). ``grads_fn``
    is injectable so the checker itself can be validated against a
    deliberately corrupted gradient function.
    """
    config = config or ModelConfig(embed_dim=8, max_len=6, seed=13)
    vocab_size, n_classes, batch = 20, 3, 4
    gen = np.random.Generator(np.random.PCG64(config.seed))
    params = {
        "word_emb": gen.standard_normal((vocab_size, config.embed_dim)) * 0.5,
        "pos_emb": gen.standard_normal((config.max_len, config.embed_dim))
        * 0.5,
        "query": gen.standard_normal(config.embed_dim) * 0.5,
        "out_w": gen.standard_normal((config.embed_dim, n_classes)) * 0.5,
        "out_b": gen.standard_normal(n_classes) * 0.5,
    }
    ids = gen.integers(1, vocab_size, size=(batch, config.max_len))
    ids[0, 4:] = PAD
    ids[1, 2:] = PAD
    labels = gen.integers(0, n_classes, size=batch)

    _, analytic = grads_fn(params, ids, labels)
    worst = 0.0
    for name in PARAM_NAMES:
        tensor = params[name]
        grad = analytic[name]
        it = np.nditer(tensor, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            saved = tensor[idx]
            tensor[idx] = saved + step
            up, _ = loss_and_grads(params, ids, labels)
            tensor[idx] = saved - step
            down, _ = loss_and_grads(params, ids, labels)
            tensor[idx] = saved
            numeric = (up - down) / (2 * step)
            denom = max(abs(grad[idx]), abs(numeric), 1e-6)
            worst = max(worst, abs(grad[idx] - numeric) / denom)
    return worst


# ---------------------------------------------------------------------------
# checkpoints


def save_checkpoint(bundle: ModelBundle, path) -> None:
    """Self-describing container: JSON header + raw little-endian tensors."""
    id_to_token = sorted(bundle.vocab, key=bundle.vocab.get)
    tensors = [(name, np.ascontiguousarray(bundle.params[name],
                                           dtype="<f8"))
               for name in PARAM_NAMES]
    header = {
        "config": asdict(bundle.config),
        "labels": bundle.labels,
        "vocab": id_to_token,
        "tensors": [{"name": name, "shape": list(arr.shape), "dtype": "<f8"}
                    for name, arr in tensors],
    }
    blob = json.dumps(header, ensure_ascii=False).encode("utf-8")
    with open(path, "wb") as handle:
        handle.write(CHECKPOINT_MAGIC)
        handle.write(bytes([CHECKPOINT_VERSION]))
        handle.write(len(blob).to_bytes(4, "little"))
        handle.write(blob)
        for _, arr in tensors:
            handle.write(arr.tobytes())


def load_checkpoint(path) -> ModelBundle:
    with open(path, "rb") as handle:
        magic = handle.read(4)
        if magic != CHECKPOINT_MAGIC:
            raise ValueError(f"not a fival checkpoint: magic {magic!r}")
        version = handle.read(1)[0]
        if version > CHECKPOINT_VERSION:
            raise ValueError(f"checkpoint version {version} is newer than "
                             f"supported {CHECKPOINT_VERSION}")
        header_len = int.from_bytes(handle.read(4), "little")
        header = json.loads(handle.read(header_len).decode("utf-8"))
        params = {}
        for meta in header["tensors"]:
            shape = tuple(meta["shape"])
            count = int(np.prod(shape)) if shape else 1
            raw = handle.read(count * 8)
            params[meta["name"]] = np.frombuffer(
                raw, dtype=meta["dtype"]
            ).reshape(shape).copy()
    vocab = {token: i for i, token in enumerate(header["vocab"])}
    if len(vocab) != params["word_emb"].shape[0]:
        raise VocabMismatch(
            f"checkpoint vocab has {len(vocab)} tokens but word_emb has "
            f"{params['word_emb'].shape[0]} rows"
        )
    return ModelBundle(
        config=ModelConfig(**header["config"]),
        params=params,
        vocab=vocab,
        labels=list(header["labels"]),
    )


# ---------------------------------------------------------------------------
# sklearn-facing wrapper


class AttentionClassifier(ClassifierMixin, BaseEstimator):
    """Scikit-learn estimator facade over the attention pooling model.

    ``X`` is a sequence of strings or of per-component string tuples.
    When no explicit dev split is passed to :meth:`fit`, ``dev_fraction``
    of the training data is carved off (seeded) for early stopping.
    """

    def __init__(self, embed_dim: int = 64, max_len: int = 64,
                 learning_rate: float = 1e-3, batch_size: int = 32,
                 max_epochs: int = 20, patience: int = 3, seed: int = 0,
                 dev_fraction: float = 0.1):
        self.embed_dim = embed_dim
        self.max_len = max_len
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.max_epochs = max_epochs
        self.patience = patience
        self.seed = seed
        self.dev_fraction = dev_fraction

    def _config(self) -> ModelConfig:
        return ModelConfig(
            embed_dim=self.embed_dim, max_len=self.max_len,
            learning_rate=self.learning_rate, batch_size=self.batch_size,
            max_epochs=self.max_epochs, patience=self.patience,
            seed=self.seed,
        )

    @staticmethod
    def _as_tuples(X) -> list[tuple[str, ...]]:
        return [(x,) if isinstance(x, str) else tuple(x) for x in X]

    def fit(self, X, y, X_dev=None, y_dev=None):
        xs = self._as_tuples(X)
        ys = [str(label) for label in y]
        if len(xs) != len(ys):
            raise ValueError(f"X has {len(xs)} rows but y has {len(ys)}")
        if X_dev is not None:
            dev_x = self._as_tuples(X_dev)
            dev_y = [str(label) for label in y_dev]
        else:
            order = list(range(len(xs)))
            SplitMix64(derive_seed(self.seed, "fit", "dev-split")
                       ).shuffle(order)
            n_dev = max(1, int(len(xs) * self.dev_fraction))
            dev_idx = set(order[:n_dev]) if len(xs) > 1 else set()
            dev_x = [xs[i] for i in sorted(dev_idx)] or xs
            dev_y = [ys[i] for i in sorted(dev_idx)] or ys
            xs = [x for i, x in enumerate(xs) if i not in dev_idx]
            ys = [label for i, label in enumerate(ys) if i not in dev_idx]

        config = self._config()
        labels = sorted(set(ys) | set(dev_y))
        vocab = build_vocab(xs)
        label_ids = {name: i for i, name in enumerate(labels)}
        train_ids = _pad_batch([encode_components(x, vocab, config.max_len)
                                for x in xs])
        train_labels = np.array([label_ids[lab] for lab in ys], dtype=np.int64)
        dev_ids = _pad_batch([encode_components(x, vocab, config.max_len)
                              for x in dev_x])
        dev_labels = np.array([label_ids[lab] for lab in dev_y], dtype=np.int64)
        params, report = train_arrays(config, train_ids, train_labels,
                                      dev_ids, dev_labels, len(labels),
                                      len(vocab))
        self.bundle_ = ModelBundle(
            config=replace(config, vocab_size=len(vocab),
                           n_classes=len(labels)),
            params=params, vocab=vocab, labels=labels,
        )
        self.report_ = report
        self.classes_ = np.array(labels)
        return self

    def decision_function(self, X) -> np.ndarray:
        xs = self._as_tuples(X)
        bundle = self.bundle_
        encoded = [encode_components(x, bundle.vocab, bundle.config.max_len)
                   for x in xs]
        chunks = []
        for start in range(0, len(encoded), bundle.config.batch_size):
            ids = _pad_batch(encoded[start : start + bundle.config.batch_size])
            chunks.append(forward(bundle.params, ids))
        return np.vstack(chunks)

    def predict_proba(self, X) -> np.ndarray:
        return _softmax(self.decision_function(X))

    def predict(self, X) -> np.ndarray:
        logits = self.decision_function(X)
        return self.classes_[logits.argmax(axis=1)]
