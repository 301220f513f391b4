"""Trainable bidirectional recurrent sequence tagger.

Minimal network exposing exactly what the selection strategies consume:
per-token class probabilities, penultimate hidden states, MC-dropout
forward passes, and retrain-from-scratch training.  The recurrent cell
is a bidirectional tanh (Elman) cell; gradients come from exact
hand-derived backpropagation in 64-bit numpy, so every parameter is
finite-difference checkable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

PARAM_FIELDS = (
    "embeddings",
    "fwd_in", "fwd_rec", "fwd_bias",
    "bwd_in", "bwd_rec", "bwd_bias",
    "out_weight", "out_bias",
)


@dataclass(frozen=True)
class TaggerConfig:
    """Architecture and optimization settings (desk-scale defaults)."""

    n_labels: int
    vocab_size: int
    embed_dim: int = 16
    hidden_dim: int = 32
    dropout_rate: float = 0.5
    learning_rate: float = 0.001
    epochs: int = 25
    batch_size: int = 16

    def __post_init__(self):
        for name in ("n_labels", "vocab_size", "embed_dim", "hidden_dim",
                     "epochs", "batch_size"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must be in [0, 1)")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")

    @property
    def penultimate_dim(self) -> int:
        return 2 * self.hidden_dim


@dataclass
class TaggerParams:
    """All learnable parameters plus the config they were shaped by."""

    config: TaggerConfig
    embeddings: np.ndarray   # (vocab_size, embed_dim)
    fwd_in: np.ndarray       # (hidden_dim, embed_dim)
    fwd_rec: np.ndarray      # (hidden_dim, hidden_dim)
    fwd_bias: np.ndarray     # (hidden_dim,)
    bwd_in: np.ndarray
    bwd_rec: np.ndarray
    bwd_bias: np.ndarray
    out_weight: np.ndarray   # (n_labels, 2 * hidden_dim)
    out_bias: np.ndarray     # (n_labels,)

    def arrays(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in PARAM_FIELDS}

    def copy(self) -> "TaggerParams":
        return TaggerParams(
            self.config, **{k: v.copy() for k, v in self.arrays().items()}
        )


@dataclass
class ForwardResult:
    """Per-token probabilities and pre-dropout hidden states."""

    probs: np.ndarray    # (n, n_labels)
    hiddens: np.ndarray  # (n, 2 * hidden_dim)
    loss: float | None = None


def init_params(config: TaggerConfig, seed: int) -> TaggerParams:
    """Weights i.i.d. uniform on [-0.1, 0.1], biases zero, seeded."""
    rng = np.random.default_rng(seed)
    h, e = config.hidden_dim, config.embed_dim

    def w(*shape):
        return rng.uniform(-0.1, 0.1, size=shape)

    return TaggerParams(
        config=config,
        embeddings=w(config.vocab_size, e),
        fwd_in=w(h, e), fwd_rec=w(h, h), fwd_bias=np.zeros(h),
        bwd_in=w(h, e), bwd_rec=w(h, h), bwd_bias=np.zeros(h),
        out_weight=w(config.n_labels, 2 * h),
        out_bias=np.zeros(config.n_labels),
    )


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=-1, keepdims=True)


def draw_dropout_masks(
    rng: np.random.Generator, shape: tuple[int, ...], dropout_rate: float
) -> np.ndarray:
    """Inverted-dropout masks: Bernoulli(keep) scaled by 1/keep."""
    keep = 1.0 - dropout_rate
    return (rng.random(shape) < keep).astype(np.float64) / keep


@dataclass
class BatchCache:
    """Everything the exact backward pass needs from a forward pass."""

    token_ids: np.ndarray     # (B, L) padded with 0
    lengths: np.ndarray       # (B,)
    token_mask: np.ndarray    # (B, L) bool, True on real tokens
    embedded: np.ndarray      # (B, L, E)
    fwd_states: np.ndarray    # (B, L, H)
    bwd_states: np.ndarray    # (B, L, H)
    hiddens: np.ndarray       # (B, L, 2H) pre-dropout
    dropped: np.ndarray       # (B, L, 2H) post-dropout (== hiddens if off)
    masks: np.ndarray | None  # (B, L, 2H) or None
    probs: np.ndarray         # (B, L, K)


def _pad_batch(sequences: Sequence[Sequence[int]]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    lengths = np.array([len(s) for s in sequences], dtype=np.int64)
    max_len = int(lengths.max())
    token_ids = np.zeros((len(sequences), max_len), dtype=np.int64)
    for i, seq in enumerate(sequences):
        token_ids[i, : len(seq)] = seq
    token_mask = np.arange(max_len)[None, :] < lengths[:, None]
    return token_ids, lengths, token_mask


def batch_forward(
    params: TaggerParams,
    sequences: Sequence[Sequence[int]],
    dropout_masks: np.ndarray | None = None,
) -> BatchCache:
    """Run the network over a padded batch of token-index sequences.

    Padding never leaks into real positions: the forward cell only
    carries state left to right, and the backward cell's carry is zeroed
    at each sequence's right edge.
    """
    cfg = params.config
    token_ids, lengths, token_mask = _pad_batch(sequences)
    if token_ids.max() >= cfg.vocab_size:
        raise IndexError(
            f"token index {int(token_ids.max())} out of range "
            f"for vocabulary of size {cfg.vocab_size}"
        )
    n_batch, max_len = token_ids.shape
    h = cfg.hidden_dim

    embedded = params.embeddings[token_ids]  # (B, L, E)

    fwd_states = np.empty((n_batch, max_len, h))
    state = np.zeros((n_batch, h))
    for t in range(max_len):
        state = np.tanh(
            embedded[:, t] @ params.fwd_in.T
            + state @ params.fwd_rec.T
            + params.fwd_bias
        )
        fwd_states[:, t] = state

    bwd_states = np.empty((n_batch, max_len, h))
    state = np.zeros((n_batch, h))
    for t in range(max_len - 1, -1, -1):
        carry = state * (t + 1 < lengths)[:, None]
        state = np.tanh(
            embedded[:, t] @ params.bwd_in.T
            + carry @ params.bwd_rec.T
            + params.bwd_bias
        )
        bwd_states[:, t] = state

    hiddens = np.concatenate([fwd_states, bwd_states], axis=2)
    dropped = hiddens if dropout_masks is None else hiddens * dropout_masks
    logits = dropped @ params.out_weight.T + params.out_bias
    return BatchCache(
        token_ids=token_ids, lengths=lengths, token_mask=token_mask,
        embedded=embedded, fwd_states=fwd_states, bwd_states=bwd_states,
        hiddens=hiddens, dropped=dropped, masks=dropout_masks,
        probs=_softmax(logits),
    )


def batch_nll(cache: BatchCache, labels: Sequence[Sequence[int]]) -> float:
    """Summed negative log-likelihood over all real tokens in the batch."""
    total = 0.0
    for i, labs in enumerate(labels):
        rows = cache.probs[i, : len(labs)]
        total -= float(np.log(rows[np.arange(len(labs)), labs]).sum())
    return total


def batch_backward(
    params: TaggerParams,
    cache: BatchCache,
    labels: Sequence[Sequence[int]],
) -> dict[str, np.ndarray]:
    """Exact gradients of the summed NLL for every parameter array."""
    cfg = params.config
    n_batch, max_len = cache.token_ids.shape
    h = cfg.hidden_dim

    gold = np.zeros((n_batch, max_len), dtype=np.int64)
    for i, labs in enumerate(labels):
        gold[i, : len(labs)] = labs

    d_logits = cache.probs.copy()
    rows, cols = np.nonzero(cache.token_mask)
    d_logits[rows, cols, gold[rows, cols]] -= 1.0
    d_logits *= cache.token_mask[:, :, None]

    grads = {
        "out_weight": np.einsum("blk,blh->kh", d_logits, cache.dropped),
        "out_bias": d_logits.sum(axis=(0, 1)),
    }
    d_hidden = d_logits @ params.out_weight
    if cache.masks is not None:
        d_hidden = d_hidden * cache.masks
    d_fwd = d_hidden[:, :, :h]
    d_bwd = d_hidden[:, :, h:]

    d_embedded = np.zeros_like(cache.embedded)

    d_in = np.zeros_like(params.fwd_in)
    d_rec = np.zeros_like(params.fwd_rec)
    d_bias = np.zeros_like(params.fwd_bias)
    carry = np.zeros((n_batch, h))
    for t in range(max_len - 1, -1, -1):
        d_pre = (d_fwd[:, t] + carry) * (1.0 - cache.fwd_states[:, t] ** 2)
        d_in += d_pre.T @ cache.embedded[:, t]
        prev = cache.fwd_states[:, t - 1] if t > 0 else np.zeros((n_batch, h))
        d_rec += d_pre.T @ prev
        d_bias += d_pre.sum(axis=0)
        d_embedded[:, t] += d_pre @ params.fwd_in
        carry = d_pre @ params.fwd_rec
    grads["fwd_in"], grads["fwd_rec"], grads["fwd_bias"] = d_in, d_rec, d_bias

    d_in = np.zeros_like(params.bwd_in)
    d_rec = np.zeros_like(params.bwd_rec)
    d_bias = np.zeros_like(params.bwd_bias)
    carry = np.zeros((n_batch, h))
    for t in range(max_len):
        d_pre = (d_bwd[:, t] + carry) * (1.0 - cache.bwd_states[:, t] ** 2)
        d_in += d_pre.T @ cache.embedded[:, t]
        if t + 1 < max_len:
            nxt = cache.bwd_states[:, t + 1] * (t + 1 < cache.lengths)[:, None]
        else:
            nxt = np.zeros((n_batch, h))
        d_rec += d_pre.T @ nxt
        d_bias += d_pre.sum(axis=0)
        d_embedded[:, t] += d_pre @ params.bwd_in
        if t + 1 < max_len:
            carry = (d_pre @ params.bwd_rec) * (t + 1 < cache.lengths)[:, None]
    grads["bwd_in"], grads["bwd_rec"], grads["bwd_bias"] = d_in, d_rec, d_bias

    d_embeddings = np.zeros_like(params.embeddings)
    np.add.at(
        d_embeddings,
        cache.token_ids[cache.token_mask],
        d_embedded[cache.token_mask],
    )
    grads["embeddings"] = d_embeddings
    return grads


# ---------------------------------------------------------------------------
# Public single-sequence operations

def forward(
    params: TaggerParams,
    sequence: Sequence[int],
    dropout_seed: int | None = None,
) -> ForwardResult:
    """One sequence through the network; dropout off unless seeded.

    With ``dropout_seed`` given, an inverted-dropout mask drawn from
    that seed is applied to the hidden states before the output head.
    """
    masks = None
    if dropout_seed is not None:
        rng = np.random.default_rng(dropout_seed)
        masks = draw_dropout_masks(
            rng, (1, len(sequence), params.config.penultimate_dim),
            params.config.dropout_rate,
        )
    cache = batch_forward(params, [sequence], masks)
    return ForwardResult(probs=cache.probs[0], hiddens=cache.hiddens[0])


def loss_nll(result: ForwardResult, labels: Sequence[int]) -> float:
    """Negative log-likelihood of the labels under the result's probs."""
    n = result.probs.shape[0]
    if len(labels) != n:
        raise ValueError(f"{n} probability rows but {len(labels)} labels")
    return -float(np.log(result.probs[np.arange(n), labels]).sum())


def mc_forward(
    params: TaggerParams,
    sequence: Sequence[int],
    n_passes: int,
    seed: int,
) -> list[list[int]]:
    """Greedy predictions from ``n_passes`` dropout forward passes.

    Masks come from one seeded stream; argmax ties break toward the
    lowest label index.
    """
    if n_passes < 1:
        raise ValueError("n_passes must be at least 1")
    rng = np.random.default_rng(seed)
    n = len(sequence)
    masks = draw_dropout_masks(
        rng, (n_passes, n, params.config.penultimate_dim),
        params.config.dropout_rate,
    )
    cache = batch_forward(params, [sequence] * n_passes, masks)
    preds = cache.probs.argmax(axis=2)  # (T, n)
    return [list(map(int, row)) for row in preds]


# ---------------------------------------------------------------------------
# Training

class _Adam:
    def __init__(self, params: TaggerParams, learning_rate: float):
        self.lr = learning_rate
        self.step_count = 0
        self.m = {k: np.zeros_like(v) for k, v in params.arrays().items()}
        self.v = {k: np.zeros_like(v) for k, v in params.arrays().items()}

    def step(self, params: TaggerParams, grads: dict[str, np.ndarray]) -> None:
        self.step_count += 1
        bias1 = 1.0 - ADAM_BETA1 ** self.step_count
        bias2 = 1.0 - ADAM_BETA2 ** self.step_count
        for name, grad in grads.items():
            m = self.m[name]
            v = self.v[name]
            m *= ADAM_BETA1
            m += (1.0 - ADAM_BETA1) * grad
            v *= ADAM_BETA2
            v += (1.0 - ADAM_BETA2) * grad * grad
            update = (m / bias1) / (np.sqrt(v / bias2) + ADAM_EPS)
            getattr(params, name)[...] -= self.lr * update


def train(
    config: TaggerConfig,
    labeled: Sequence[tuple[Sequence[int], Sequence[int]]],
    seed: int,
) -> TaggerParams:
    """Train from scratch on (token-index, label-index) pairs.

    Minibatch Adam on the mean per-token NLL, dropout on, epoch-wise
    reshuffling; deterministic given (config, labeled, seed).
    """
    if not labeled:
        raise ValueError("cannot train on an empty labeled set")
    params = init_params(config, seed)
    rng = np.random.default_rng([seed, 1])  # distinct stream from init
    optimizer = _Adam(params, config.learning_rate)

    for _ in range(config.epochs):
        order = rng.permutation(len(labeled))
        for start in range(0, len(labeled), config.batch_size):
            batch = [labeled[i] for i in order[start : start + config.batch_size]]
            tokens = [b[0] for b in batch]
            labels = [b[1] for b in batch]
            max_len = max(len(t) for t in tokens)
            masks = draw_dropout_masks(
                rng, (len(batch), max_len, config.penultimate_dim),
                config.dropout_rate,
            )
            cache = batch_forward(params, tokens, masks)
            grads = batch_backward(params, cache, labels)
            n_tokens = sum(len(t) for t in tokens)
            for g in grads.values():
                g /= n_tokens
            optimizer.step(params, grads)
    return params


def predict(
    params: TaggerParams, sequences: Sequence[Sequence[int]]
) -> list[list[int]]:
    """Dropout-off argmax labels for a batch of sequences."""
    if not sequences:
        return []
    cache = batch_forward(params, sequences)
    out = []
    for i, seq in enumerate(sequences):
        out.append([int(x) for x in cache.probs[i, : len(seq)].argmax(axis=1)])
    return out


# ---------------------------------------------------------------------------
# Checkpoints

CHECKPOINT_VERSION = 1


def params_to_json(params: TaggerParams) -> str:
    """Versioned JSON checkpoint; float64 values round-trip exactly."""
    doc = {
        "version": CHECKPOINT_VERSION,
        "config": {
            "n_labels": params.config.n_labels,
            "vocab_size": params.config.vocab_size,
            "embed_dim": params.config.embed_dim,
            "hidden_dim": params.config.hidden_dim,
            "dropout_rate": params.config.dropout_rate,
            "learning_rate": params.config.learning_rate,
            "epochs": params.config.epochs,
            "batch_size": params.config.batch_size,
        },
        "arrays": {k: v.tolist() for k, v in params.arrays().items()},
    }
    return json.dumps(doc)


def params_from_json(text: str) -> TaggerParams:
    doc = json.loads(text)
    if doc.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version: {doc.get('version')}")
    config = TaggerConfig(**doc["config"])
    arrays = {k: np.asarray(v, dtype=np.float64) for k, v in doc["arrays"].items()}
    return TaggerParams(config=config, **arrays)
