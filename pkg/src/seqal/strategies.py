"""Query-selection strategies for pool-based active learning.

Uncertainty scores (MNLP, BALD), diversity selection (core-set
furthest-first), last-layer gradient embeddings, and (weighted)
k-means++ batch sampling, unified behind :func:`select_batch`.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .corpus import Dataset, Pool
from .tagger import TaggerParams, batch_forward, mc_forward
from .validation import check_matrix, check_probability_matrix

STRATEGIES = ("random", "mnlp", "bald", "coreset", "badge", "wbadge")
DEFAULT_MC_PASSES = 100

WORDS = "words"
SENTENCES = "sentences"


@dataclass(frozen=True)
class Budget:
    """Per-round annotation quota, in words or sentences."""

    unit: str
    amount: int

    def __post_init__(self):
        if self.unit not in (WORDS, SENTENCES):
            raise ValueError(f"budget unit must be 'words' or 'sentences', got {self.unit!r}")
        if self.amount < 1:
            raise ValueError("budget amount must be positive")


@dataclass(frozen=True)
class QueryBatch:
    """An ordered selection of unlabeled sequence ids."""

    selected_ids: tuple[int, ...]
    total_words: int
    strategy: str
    round_index: int = 0

    def __post_init__(self):
        if len(set(self.selected_ids)) != len(self.selected_ids):
            raise ValueError("duplicate ids in query batch")


@dataclass(frozen=True)
class GradientEmbedding:
    """Flattened last-layer loss gradient for one unlabeled sequence.

    ``values`` holds one contiguous block per label, each of the
    penultimate dimension.
    """

    values: np.ndarray
    source_id: int
    length: int


def _check_budget(budget: Budget, lengths: Sequence[int]) -> None:
    if budget.unit == SENTENCES:
        if budget.amount > len(lengths):
            raise ValueError(
                f"budget of {budget.amount} sentences exceeds the "
                f"{len(lengths)} available"
            )
    elif budget.amount > sum(lengths):
        raise ValueError(
            f"budget of {budget.amount} words exceeds the "
            f"{sum(lengths)} available"
        )


def _budget_met(budget: Budget, n_selected: int, words_selected: int) -> bool:
    if budget.unit == SENTENCES:
        return n_selected >= budget.amount
    return words_selected >= budget.amount


def _take_until_budget(
    ordered_ids: Sequence[int],
    lengths_by_id: Mapping[int, int],
    budget: Budget,
) -> list[int]:
    taken: list[int] = []
    words = 0
    for seq_id in ordered_ids:
        if _budget_met(budget, len(taken), words):
            break
        taken.append(seq_id)
        words += lengths_by_id[seq_id]
    if not _budget_met(budget, len(taken), words):
        raise ValueError("candidate list exhausted before the budget was met")
    return taken


# ---------------------------------------------------------------------------
# Scores

def mnlp_score(probs) -> float:
    """Mean over tokens of the log of the most likely label's probability.

    Lower means less confident; length-normalized so long sequences are
    not preferentially selected.
    """
    arr = check_probability_matrix("probs", probs)
    return float(np.log(arr.max(axis=1)).mean())


def bald_disagreement(predictions: Sequence[Sequence[int]]) -> float:
    """Fraction of MC-dropout passes that disagree with the modal prediction.

    Whole label sequences are compared for equality; higher means more
    uncertain.
    """
    if not predictions:
        raise ValueError("need at least one prediction")
    n = len(predictions[0])
    counts: dict[tuple[int, ...], int] = {}
    for pred in predictions:
        if len(pred) != n:
            raise ValueError("predictions must all have the same length")
        key = tuple(pred)
        counts[key] = counts.get(key, 0) + 1
    return 1.0 - max(counts.values()) / len(predictions)


def gradient_embedding(probs, hiddens, source_id: int = 0) -> GradientEmbedding:
    """Last-layer NLL gradient at the model's own argmax labeling.

    Block ``i`` is ``sum_t (probs[t, i] - [i == argmax_t]) * hiddens[t]``,
    which equals the exact gradient of the negative log-likelihood with
    respect to row ``i`` of the output weight matrix.
    """
    p = check_probability_matrix("probs", probs)
    h = check_matrix("hiddens", hiddens)
    if p.shape[0] != h.shape[0]:
        raise ValueError("probs and hiddens must cover the same tokens")
    hypothesis = p.argmax(axis=1)
    coeff = p.copy()
    coeff[np.arange(len(hypothesis)), hypothesis] -= 1.0
    return GradientEmbedding(
        values=(coeff.T @ h).ravel(),
        source_id=source_id,
        length=p.shape[0],
    )


def sequence_embedding(hiddens) -> np.ndarray:
    """Mean over time of the penultimate hidden states."""
    h = check_matrix("hiddens", hiddens)
    if h.shape[0] < 1:
        raise ValueError("need at least one hidden state")
    return h.mean(axis=0)


def length_weights(lengths: Sequence[int]) -> np.ndarray:
    """Normalized squared-length weights: w_j proportional to length_j**2."""
    if len(lengths) == 0:
        raise ValueError("empty length list")
    arr = np.asarray(lengths, dtype=np.float64)
    if (arr <= 0).any():
        raise ValueError("lengths must be positive")
    sq = arr * arr
    return sq / sq.sum()


# ---------------------------------------------------------------------------
# Samplers

def kmeanspp_select(
    embeddings: Sequence[GradientEmbedding],
    weights: Sequence[float] | None,
    budget: Budget,
    rng_seed: int,
    strategy_name: str = "badge",
) -> QueryBatch:
    """Sequential k-means++ center sampling over gradient embeddings.

    The first center is drawn with probability proportional to the
    weights (uniform when unweighted); each later center is drawn among
    unselected points with probability proportional to
    ``w(x) * d(x)**2``, ``d`` being the Euclidean distance to the
    nearest selected center.  If every remaining candidate sits exactly
    on a center, sampling falls back to the weights alone.
    """
    if not embeddings:
        raise ValueError("no embeddings to select from")
    vectors = np.stack([np.asarray(e.values, dtype=np.float64) for e in embeddings])
    ids = [e.source_id for e in embeddings]
    lengths = [e.length for e in embeddings]
    n = len(ids)
    if weights is None:
        w = np.ones(n)
    else:
        w = np.asarray(weights, dtype=np.float64)
        if w.shape != (n,):
            raise ValueError("weights must align one-to-one with embeddings")
        if (w < 0).any():
            raise ValueError("weights must be nonnegative")
        if abs(w.sum() - 1.0) > 1e-9:
            raise ValueError("weights must sum to 1")
    _check_budget(budget, lengths)

    rng = np.random.default_rng(rng_seed)
    first = int(rng.choice(n, p=w / w.sum()))
    selected = [first]
    remaining = np.ones(n, dtype=bool)
    remaining[first] = False
    dist_sq = ((vectors - vectors[first]) ** 2).sum(axis=1)
    words = lengths[first]

    while not _budget_met(budget, len(selected), words) and remaining.any():
        scores = w * dist_sq * remaining
        total = scores.sum()
        if total > 0.0:
            p = scores / total
        else:
            masked = w * remaining
            p = masked / masked.sum()
        pick = int(rng.choice(n, p=p))
        selected.append(pick)
        remaining[pick] = False
        words += lengths[pick]
        dist_sq = np.minimum(dist_sq, ((vectors - vectors[pick]) ** 2).sum(axis=1))

    if not _budget_met(budget, len(selected), words):
        raise ValueError("candidate list exhausted before the budget was met")
    return QueryBatch(
        selected_ids=tuple(ids[i] for i in selected),
        total_words=words,
        strategy=strategy_name,
    )


def coreset_select(
    unlabeled_embeddings: Sequence[tuple[int, np.ndarray]],
    labeled_embeddings: Sequence[np.ndarray],
    budget: Budget,
    lengths_by_id: Mapping[int, int],
) -> QueryBatch:
    """Greedy furthest-first traversal conditioned on the labeled set.

    Repeatedly selects the unlabeled point with the largest Euclidean
    distance to the union of labeled embeddings and prior selections.
    With no labeled embeddings, the first pick is the point furthest
    from the centroid of all candidates.  Ties break toward the lowest
    id; fully deterministic.
    """
    if not unlabeled_embeddings:
        raise ValueError("no candidates to select from")
    order = sorted(range(len(unlabeled_embeddings)),
                   key=lambda i: unlabeled_embeddings[i][0])
    ids = [unlabeled_embeddings[i][0] for i in order]
    vectors = np.stack([
        np.asarray(unlabeled_embeddings[i][1], dtype=np.float64) for i in order
    ])
    lengths = [lengths_by_id[i] for i in ids]
    _check_budget(budget, lengths)

    selected: list[int] = []
    words = 0
    available = np.ones(len(ids), dtype=bool)
    if len(labeled_embeddings) == 0:
        # the centroid only seeds the first pick; it is not a center,
        # so it must not cap min-distances on later iterations
        centroid = vectors.mean(axis=0)
        first = int(np.linalg.norm(vectors - centroid, axis=1).argmax())
        selected.append(first)
        available[first] = False
        words = lengths[first]
        min_dist = np.linalg.norm(vectors - vectors[first], axis=1)
    else:
        anchor = np.stack([np.asarray(v, dtype=np.float64) for v in labeled_embeddings])
        diffs = vectors[:, None, :] - anchor[None, :, :]
        min_dist = np.sqrt((diffs ** 2).sum(axis=2)).min(axis=1)
    while not _budget_met(budget, len(selected), words) and available.any():
        masked = np.where(available, min_dist, -np.inf)
        pick = int(masked.argmax())  # first occurrence = lowest id
        selected.append(pick)
        available[pick] = False
        words += lengths[pick]
        min_dist = np.minimum(
            min_dist, np.linalg.norm(vectors - vectors[pick], axis=1)
        )

    if not _budget_met(budget, len(selected), words):
        raise ValueError("candidate list exhausted before the budget was met")
    return QueryBatch(
        selected_ids=tuple(ids[i] for i in selected),
        total_words=words,
        strategy="coreset",
    )


# ---------------------------------------------------------------------------
# Unified entry point

def _mc_seed(seed: int, sequence_id: int) -> int:
    return int(np.random.SeedSequence([seed, sequence_id]).generate_state(1)[0])


def select_batch(
    strategy: str,
    params: TaggerParams,
    pool: Pool,
    dataset: Dataset,
    budget: Budget,
    seed: int,
    mc_passes: int = DEFAULT_MC_PASSES,
) -> QueryBatch:
    """Select one batch of unlabeled train sequences under a budget.

    All scoring and embedding passes run with dropout off except BALD,
    which averages ``mc_passes`` dropout passes per candidate.  Score
    ties break toward the lowest sequence id.
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}")
    if not pool.unlabeled_ids:
        raise ValueError("unlabeled pool is empty")
    candidate_ids = sorted(pool.unlabeled_ids)
    candidates = [dataset.train_by_id(i) for i in candidate_ids]
    lengths_by_id = {s.id: len(s) for s in candidates}
    _check_budget(budget, [len(s) for s in candidates])
    encoded = [dataset.encode(s.tokens) for s in candidates]

    if strategy == "random":
        rng = np.random.default_rng(seed)
        ordered = [candidate_ids[i] for i in rng.permutation(len(candidate_ids))]
        chosen = _take_until_budget(ordered, lengths_by_id, budget)
        batch = QueryBatch(
            tuple(chosen),
            sum(lengths_by_id[i] for i in chosen),
            strategy,
        )
    elif strategy == "mnlp":
        cache = batch_forward(params, encoded)
        scores = [
            mnlp_score(cache.probs[i, : len(encoded[i])])
            for i in range(len(encoded))
        ]
        ordered = [
            sid for _, sid in sorted(zip(scores, candidate_ids))
        ]
        chosen = _take_until_budget(ordered, lengths_by_id, budget)
        batch = QueryBatch(
            tuple(chosen),
            sum(lengths_by_id[i] for i in chosen),
            strategy,
        )
    elif strategy == "bald":
        scores = []
        for sid, seq in zip(candidate_ids, encoded):
            preds = mc_forward(params, seq, mc_passes, _mc_seed(seed, sid))
            scores.append(bald_disagreement(preds))
        ordered = [
            sid for _, sid in sorted(zip([-s for s in scores], candidate_ids))
        ]
        chosen = _take_until_budget(ordered, lengths_by_id, budget)
        batch = QueryBatch(
            tuple(chosen),
            sum(lengths_by_id[i] for i in chosen),
            strategy,
        )
    elif strategy == "coreset":
        cache = batch_forward(params, encoded)
        unlabeled = [
            (sid, sequence_embedding(cache.hiddens[i, : len(encoded[i])]))
            for i, sid in enumerate(candidate_ids)
        ]
        labeled_ids = sorted(pool.labeled_ids)
        labeled_vecs: list[np.ndarray] = []
        if labeled_ids:
            labeled_enc = [
                dataset.encode(dataset.train_by_id(i).tokens) for i in labeled_ids
            ]
            lcache = batch_forward(params, labeled_enc)
            labeled_vecs = [
                sequence_embedding(lcache.hiddens[i, : len(labeled_enc[i])])
                for i in range(len(labeled_enc))
            ]
        batch = coreset_select(unlabeled, labeled_vecs, budget, lengths_by_id)
    else:  # badge / wbadge
        cache = batch_forward(params, encoded)
        embeddings = [
            gradient_embedding(
                cache.probs[i, : len(encoded[i])],
                cache.hiddens[i, : len(encoded[i])],
                source_id=sid,
            )
            for i, sid in enumerate(candidate_ids)
        ]
        weights = None
        if strategy == "wbadge":
            weights = length_weights([lengths_by_id[i] for i in candidate_ids])
        batch = kmeanspp_select(embeddings, weights, budget, seed)

    return dataclasses.replace(batch, strategy=strategy)


# ---------------------------------------------------------------------------
# Embedding export

def embeddings_to_csv(rows: Iterable[tuple[int, int, np.ndarray]]) -> str:
    """Dump (id, length, vector) rows as CSV for external selection tools."""
    lines = []
    for seq_id, length, vector in rows:
        values = ",".join(repr(float(v)) for v in np.asarray(vector).ravel())
        lines.append(f"{seq_id},{length},{values}")
    return "\n".join(lines) + ("\n" if lines else "")
