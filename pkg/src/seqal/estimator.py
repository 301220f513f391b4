"""Scikit-learn style wrapper around the sequence tagger.

Inputs are ragged: X is a list of token-index sequences and y a list of
equally long label-index sequences, so the stock array validators do not
apply and the usual get_params/set_params contract is kept instead.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator

from .corpus import chunk_f1, LabelSet
from .tagger import TaggerConfig, batch_forward, predict, train


def _check_ragged(name: str, value) -> list[list[int]]:
    if not isinstance(value, (list, tuple)):
        raise ValueError(f"{name} must be a list of sequences")
    out = []
    for i, seq in enumerate(value):
        arr = np.asarray(seq)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError(f"{name}[{i}] must be a nonempty 1-d sequence")
        if not np.issubdtype(arr.dtype, np.integer):
            raise ValueError(f"{name}[{i}] must contain integer indices")
        if (arr < 0).any():
            raise ValueError(f"{name}[{i}] contains negative indices")
        out.append([int(v) for v in arr])
    return out


class SequenceTagger(BaseEstimator):
    """Bidirectional recurrent token tagger with a softmax head.

    Parameters mirror the trainer configuration; ``vocab_size`` and
    ``n_labels`` may be left at None to be inferred from the data as
    max index + 1.

    >>> model = SequenceTagger(epochs=5, random_state=0)
    >>> model.fit([[1, 2], [3, 4, 5]], [[0, 1], [0, 0, 1]])  # doctest: +SKIP
    """

    def __init__(
        self,
        vocab_size: int | None = None,
        n_labels: int | None = None,
        embed_dim: int = 16,
        hidden_dim: int = 32,
        dropout_rate: float = 0.5,
        learning_rate: float = 0.001,
        epochs: int = 25,
        batch_size: int = 16,
        random_state: int = 0,
    ):
        self.vocab_size = vocab_size
        self.n_labels = n_labels
        self.embed_dim = embed_dim
        self.hidden_dim = hidden_dim
        self.dropout_rate = dropout_rate
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.batch_size = batch_size
        self.random_state = random_state

    def fit(self, X, y):
        X = _check_ragged("X", X)
        y = _check_ragged("y", y)
        if len(X) != len(y):
            raise ValueError(f"X and y lengths differ: {len(X)} != {len(y)}")
        for i, (tokens, labels) in enumerate(zip(X, y)):
            if len(tokens) != len(labels):
                raise ValueError(
                    f"sequence {i}: {len(tokens)} tokens but {len(labels)} labels"
                )
        vocab_size = self.vocab_size
        if vocab_size is None:
            vocab_size = 1 + max(max(seq) for seq in X)
        n_labels = self.n_labels
        if n_labels is None:
            n_labels = 1 + max(max(seq) for seq in y)
        self.config_ = TaggerConfig(
            n_labels=n_labels,
            vocab_size=vocab_size,
            embed_dim=self.embed_dim,
            hidden_dim=self.hidden_dim,
            dropout_rate=self.dropout_rate,
            learning_rate=self.learning_rate,
            epochs=self.epochs,
            batch_size=self.batch_size,
        )
        self.params_ = train(self.config_, list(zip(X, y)), self.random_state)
        self.n_features_in_ = vocab_size
        return self

    def _check_fitted(self):
        if not hasattr(self, "params_"):
            raise ValueError("SequenceTagger is not fitted; call fit first")

    def predict(self, X) -> list[list[int]]:
        self._check_fitted()
        return predict(self.params_, _check_ragged("X", X))

    def predict_proba(self, X) -> list[np.ndarray]:
        """Per-sequence (length, n_labels) label probabilities, dropout off."""
        self._check_fitted()
        X = _check_ragged("X", X)
        out = []
        for start in range(0, len(X), 64):
            chunk = X[start:start + 64]
            result = batch_forward(self.params_, chunk)
            for row, seq in enumerate(chunk):
                out.append(result.probs[row, : len(seq)].copy())
        return out

    def score(self, X, y, label_set: LabelSet | None = None) -> float:
        """Chunk F1 when a label set is given, else token accuracy."""
        self._check_fitted()
        y = _check_ragged("y", y)
        predicted = self.predict(X)
        if label_set is None:
            hits = sum(
                int(a == b) for gold, pred in zip(y, predicted)
                for a, b in zip(gold, pred)
            )
            total = sum(len(seq) for seq in y)
            return hits / total if total else 0.0
        names = label_set.labels
        gold = [[names[i] for i in seq] for seq in y]
        pred = [[names[i] for i in seq] for seq in predicted]
        return chunk_f1(gold, pred)[2]

    def _more_tags(self):
        return {"X_types": ["ragged"], "no_validation": True}
