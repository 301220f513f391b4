"""Datasets for token-level sequence labeling.

Covers the CoNLL column format, BIO chunk extraction, chunk-level F1
scoring, and a synthetic corpus generator small enough for desk-scale
experiments.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

UNK_TOKEN = "<unk>"
DOCSTART = "-DOCSTART-"
OUTSIDE = "O"


class ConllParseError(ValueError):
    """Raised for malformed CoNLL input; carries the 1-based line number."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


def _check_bio_label(label: str) -> None:
    if label == OUTSIDE:
        return
    if len(label) > 2 and label[1] == "-" and label[0] in ("B", "I"):
        return
    raise ValueError(f"not a BIO label: {label!r}")


@dataclass(frozen=True)
class LabelSet:
    """Ordered, immutable set of BIO labels including the outside label."""

    labels: tuple[str, ...]

    def __post_init__(self):
        if OUTSIDE not in self.labels:
            raise ValueError("label set must contain the outside label 'O'")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("duplicate labels")
        for label in self.labels:
            _check_bio_label(label)

    @property
    def n_labels(self) -> int:
        return len(self.labels)

    def index(self, label: str) -> int:
        return self.labels.index(label)

    def __contains__(self, label: str) -> bool:
        return label in self.labels

    def __iter__(self):
        return iter(self.labels)


@dataclass(frozen=True)
class LabeledSequence:
    """A token sequence with one gold label index per token."""

    id: int
    tokens: tuple[str, ...]
    labels: tuple[int, ...]

    def __post_init__(self):
        if not self.tokens:
            raise ValueError("empty token sequence")
        if len(self.tokens) != len(self.labels):
            raise ValueError(
                f"sequence {self.id}: {len(self.tokens)} tokens but "
                f"{len(self.labels)} labels"
            )

    def __len__(self) -> int:
        return len(self.tokens)

    def label_strings(self, label_set: LabelSet) -> list[str]:
        return [label_set.labels[i] for i in self.labels]


@dataclass(frozen=True)
class Chunk:
    """A labeled span, both endpoints inclusive."""

    entity_type: str
    start: int
    end: int

    def __post_init__(self):
        if self.start > self.end:
            raise ValueError(f"chunk start {self.start} > end {self.end}")


@dataclass
class Dataset:
    """Label set, vocabulary and the three standard splits.

    Treated as immutable once constructed.  The vocabulary always holds
    the reserved unknown-word entry at index 0; tokens absent from it
    encode to that index.
    """

    label_set: LabelSet
    vocabulary: tuple[str, ...]
    train: list[LabeledSequence]
    validation: list[LabeledSequence]
    test: list[LabeledSequence]

    def __post_init__(self):
        if not self.vocabulary or self.vocabulary[0] != UNK_TOKEN:
            raise ValueError(f"vocabulary[0] must be {UNK_TOKEN!r}")
        self._word_index = {w: i for i, w in enumerate(self.vocabulary)}
        self._train_index = {s.id: s for s in self.train}
        for split_name in ("train", "validation", "test"):
            split = getattr(self, split_name)
            if len({s.id for s in split}) != len(split):
                raise ValueError(f"duplicate sequence ids in {split_name} split")

    @property
    def vocab_size(self) -> int:
        return len(self.vocabulary)

    def encode(self, tokens: Iterable[str]) -> list[int]:
        """Map tokens to vocabulary indices; unknown words map to index 0."""
        return [self._word_index.get(t, 0) for t in tokens]

    def train_by_id(self, seq_id: int) -> LabeledSequence:
        try:
            return self._train_index[seq_id]
        except KeyError:
            raise KeyError(f"no train sequence with id {seq_id}") from None


@dataclass(frozen=True)
class Pool:
    """Partition of the train split into labeled and unlabeled ids."""

    labeled_ids: frozenset[int]
    unlabeled_ids: frozenset[int]
    words_labeled: int

    @classmethod
    def initial(cls, dataset: Dataset, labeled_ids: Iterable[int]) -> "Pool":
        labeled = frozenset(labeled_ids)
        all_ids = frozenset(s.id for s in dataset.train)
        if not labeled <= all_ids:
            raise ValueError("labeled ids not a subset of the train split")
        words = sum(len(dataset.train_by_id(i)) for i in labeled)
        return cls(labeled, all_ids - labeled, words)

    def annotate(self, dataset: Dataset, ids: Iterable[int]) -> "Pool":
        """Move ids from the unlabeled to the labeled side."""
        moved = frozenset(ids)
        if not moved <= self.unlabeled_ids:
            bad = sorted(moved - self.unlabeled_ids)
            raise ValueError(f"ids not in the unlabeled pool: {bad}")
        words = self.words_labeled + sum(len(dataset.train_by_id(i)) for i in moved)
        return Pool(self.labeled_ids | moved, self.unlabeled_ids - moved, words)


# ---------------------------------------------------------------------------
# CoNLL parsing and serialization

def parse_conll(
    text: str,
    token_column: int = 0,
    label_column: int | None = None,
) -> tuple[list[LabeledSequence], LabelSet]:
    """Parse CoNLL-style column text into sequences and a label set.

    One token per line, whitespace-separated columns, blank line(s)
    between sentences.  Lines whose first column is ``-DOCSTART-`` are
    document markers and are dropped.  ``label_column=None`` selects the
    last column of each line.  The label set is collected in first-seen
    order; the outside label is always present.

    Raises:
        ConllParseError: on a line with too few columns or a label that
            is not a valid BIO string.
    """
    sentences: list[tuple[tuple[str, ...], tuple[str, ...]]] = []
    seen_labels: list[str] = []
    tokens: list[str] = []
    labels: list[str] = []

    def flush():
        if tokens:
            sentences.append((tuple(tokens), tuple(labels)))
            tokens.clear()
            labels.clear()

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            flush()
            continue
        cols = line.split()
        if cols[0] == DOCSTART:
            flush()
            continue
        col = label_column if label_column is not None else len(cols) - 1
        if len(cols) <= max(token_column, col):
            raise ConllParseError(
                lineno, f"expected at least {max(token_column, col) + 1} "
                f"columns, got {len(cols)}"
            )
        label = cols[col]
        try:
            _check_bio_label(label)
        except ValueError as exc:
            raise ConllParseError(lineno, str(exc)) from None
        if label not in seen_labels:
            seen_labels.append(label)
        tokens.append(cols[token_column])
        labels.append(label)
    flush()

    if OUTSIDE not in seen_labels:
        seen_labels.insert(0, OUTSIDE)
    # indices are assigned only now, once the label set is final
    index = {lab: i for i, lab in enumerate(seen_labels)}
    sequences = [
        LabeledSequence(i, toks, tuple(index[lab] for lab in labs))
        for i, (toks, labs) in enumerate(sentences)
    ]
    return sequences, LabelSet(tuple(seen_labels))


def to_conll(sequences: Iterable[LabeledSequence], label_set: LabelSet) -> str:
    """Serialize sequences as two-column CoNLL text (token, label)."""
    blocks = []
    for seq in sequences:
        lines = [
            f"{tok} {label_set.labels[lab]}"
            for tok, lab in zip(seq.tokens, seq.labels)
        ]
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + ("\n" if blocks else "")


# ---------------------------------------------------------------------------
# Chunk extraction and F1

def extract_chunks(labels: Sequence[str]) -> set[Chunk]:
    """Decode a BIO label string sequence into maximal typed spans.

    Lenient repair: an ``I-T`` not preceded by a chunk of type ``T``
    starts a new chunk, mirroring conlleval behavior on imperfect model
    output.
    """
    chunks: set[Chunk] = set()
    current: tuple[str, int] | None = None  # (type, start)

    def close(end: int):
        nonlocal current
        if current is not None:
            chunks.add(Chunk(current[0], current[1], end))
            current = None

    for i, label in enumerate(labels):
        _check_bio_label(label)
        if label == OUTSIDE:
            close(i - 1)
        else:
            prefix, entity_type = label[0], label[2:]
            if prefix == "B" or current is None or current[0] != entity_type:
                close(i - 1)
                current = (entity_type, i)
    close(len(labels) - 1)
    return chunks


def chunk_f1(
    gold: Sequence[Sequence[str]],
    pred: Sequence[Sequence[str]],
) -> tuple[float, float, float]:
    """Exact-match chunk precision, recall and F1 over label strings.

    A match is an identical (type, start, end) triple within the same
    sequence.  Empty denominators yield 0 for that quantity; if both
    chunk sets are empty the F1 is 1.
    """
    if len(gold) != len(pred):
        raise ValueError(f"{len(gold)} gold sequences vs {len(pred)} predicted")
    n_gold = n_pred = n_match = 0
    for i, (g, p) in enumerate(zip(gold, pred)):
        if len(g) != len(p):
            raise ValueError(f"sequence {i}: length {len(g)} vs {len(p)}")
        gc = extract_chunks(g)
        pc = extract_chunks(p)
        n_gold += len(gc)
        n_pred += len(pc)
        n_match += len(gc & pc)
    precision = n_match / n_pred if n_pred else 0.0
    recall = n_match / n_gold if n_gold else 0.0
    if n_gold == 0 and n_pred == 0:
        return 0.0, 0.0, 1.0
    if precision + recall == 0.0:
        return precision, recall, 0.0
    return precision, recall, 2 * precision * recall / (precision + recall)


# ---------------------------------------------------------------------------
# Synthetic corpus

@dataclass(frozen=True)
class GenConfig:
    """Knobs for the synthetic corpus generator (desk-scale defaults)."""

    n_train: int = 2000
    n_val: int = 200
    n_test: int = 400
    vocab_size: int = 120
    n_entity_types: int = 5
    min_len: int = 4
    max_len: int = 12

    def __post_init__(self):
        if self.vocab_size < 2 * self.n_entity_types + 10:
            raise ValueError(
                "vocab_size must be at least 2 * n_entity_types + 10"
            )
        if self.min_len < 1 or self.min_len > self.max_len:
            raise ValueError("need 1 <= min_len <= max_len")


# Emission constants, frozen after calibrating against the reference
# tagger (full-data F1 and active-learning curve separation).
_ENTITY_START_PROB = 0.4
_ENTITY_CONTINUE_PROB = 0.45
_MAX_ENTITY_LEN = 3
_TYPE_SKEW_EXP = 1.4
_WORD_ZIPF_EXP = 1.6


def _zipf_probs(n: int, exponent: float) -> np.ndarray:
    ranks = np.arange(1, n + 1, dtype=np.float64)
    p = ranks ** -exponent
    return p / p.sum()


def generate_synthetic(config: GenConfig, seed: int) -> Dataset:
    """Generate a dataset whose word-to-entity mapping is recoverable.

    Each entity type owns a disjoint slice of the vocabulary; the rest
    of the words only ever carry the outside label.  Types and words
    are sampled with skewed (Zipf-like) frequencies so that the tail is
    rare enough for selection strategies to matter.  Deterministic for
    a given seed.
    """
    rng = np.random.default_rng(seed)
    k = config.n_entity_types
    words = tuple(f"w{i:03d}" for i in range(1, config.vocab_size + 1))
    vocabulary = (UNK_TOKEN,) + words

    per_type = (config.vocab_size // 2) // k
    type_slices = [range(i * per_type, (i + 1) * per_type) for i in range(k)]
    outside_slice = range(k * per_type, config.vocab_size)

    labels = [OUTSIDE]
    for t in range(k):
        labels += [f"B-ent{t}", f"I-ent{t}"]
    label_set = LabelSet(tuple(labels))

    type_probs = _zipf_probs(k, _TYPE_SKEW_EXP)
    slice_probs = _zipf_probs(per_type, _WORD_ZIPF_EXP)
    outside_probs = _zipf_probs(len(outside_slice), _WORD_ZIPF_EXP)

    def sample_sentence() -> tuple[tuple[str, ...], tuple[int, ...]]:
        length = int(rng.integers(config.min_len, config.max_len + 1))
        toks: list[str] = []
        labs: list[int] = []
        while len(toks) < length:
            remaining = length - len(toks)
            if rng.random() < _ENTITY_START_PROB:
                t = int(rng.choice(k, p=type_probs))
                span = 1
                while (
                    span < min(_MAX_ENTITY_LEN, remaining)
                    and rng.random() < _ENTITY_CONTINUE_PROB
                ):
                    span += 1
                for j in range(span):
                    w = type_slices[t][int(rng.choice(per_type, p=slice_probs))]
                    toks.append(words[w])
                    labs.append(label_set.index(f"B-ent{t}" if j == 0 else f"I-ent{t}"))
                # entities are always separated by at least one outside
                # word, so span boundaries stay recoverable from text
                if len(toks) < length:
                    w = outside_slice[int(rng.choice(len(outside_slice), p=outside_probs))]
                    toks.append(words[w])
                    labs.append(0)
            else:
                w = outside_slice[int(rng.choice(len(outside_slice), p=outside_probs))]
                toks.append(words[w])
                labs.append(0)
        return tuple(toks), tuple(labs)

    def sample_split(n: int) -> list[LabeledSequence]:
        return [LabeledSequence(i, *sample_sentence()) for i in range(n)]

    return Dataset(
        label_set=label_set,
        vocabulary=vocabulary,
        train=sample_split(config.n_train),
        validation=sample_split(config.n_val),
        test=sample_split(config.n_test),
    )


# ---------------------------------------------------------------------------
# JSON document form

def dataset_to_json(dataset: Dataset) -> str:
    """Dump a dataset as a JSON document with a stable byte layout."""

    def split_doc(split: list[LabeledSequence]):
        return [
            {"id": s.id, "tokens": list(s.tokens), "labels": list(s.labels)}
            for s in split
        ]

    doc = {
        "label_set": list(dataset.label_set.labels),
        "vocabulary": list(dataset.vocabulary),
        "splits": {
            "train": split_doc(dataset.train),
            "validation": split_doc(dataset.validation),
            "test": split_doc(dataset.test),
        },
    }
    return json.dumps(doc, indent=1)


def dataset_from_json(text: str) -> Dataset:
    doc = json.loads(text)

    def split(name: str) -> list[LabeledSequence]:
        return [
            LabeledSequence(s["id"], tuple(s["tokens"]), tuple(s["labels"]))
            for s in doc["splits"][name]
        ]

    return Dataset(
        label_set=LabelSet(tuple(doc["label_set"])),
        vocabulary=tuple(doc["vocabulary"]),
        train=split("train"),
        validation=split("validation"),
        test=split("test"),
    )


def dataset_from_conll(
    train_text: str,
    validation_text: str = "",
    test_text: str = "",
    token_column: int = 0,
    label_column: int | None = None,
) -> Dataset:
    """Build a dataset from CoNLL text, one string per split.

    The vocabulary is collected from the train split in first-seen
    order; validation/test tokens outside it encode to the unknown
    entry.  Label sets of all splits are merged in first-seen order.
    """
    parsed = [
        parse_conll(t, token_column, label_column)
        for t in (train_text, validation_text, test_text)
    ]
    merged: list[str] = []
    for _, ls in parsed:
        for label in ls.labels:
            if label not in merged:
                merged.append(label)
    label_set = LabelSet(tuple(merged))

    def reindex(seqs: list[LabeledSequence], ls: LabelSet) -> list[LabeledSequence]:
        return [
            LabeledSequence(
                s.id,
                s.tokens,
                tuple(label_set.index(ls.labels[i]) for i in s.labels),
            )
            for s in seqs
        ]

    train = reindex(parsed[0][0], parsed[0][1])
    vocab: list[str] = [UNK_TOKEN]
    seen = {UNK_TOKEN}
    for seq in train:
        for tok in seq.tokens:
            if tok not in seen:
                seen.add(tok)
                vocab.append(tok)
    return Dataset(
        label_set=label_set,
        vocabulary=tuple(vocab),
        train=train,
        validation=reindex(parsed[1][0], parsed[1][1]),
        test=reindex(parsed[2][0], parsed[2][1]),
    )


def total_words(sequences: Iterable[LabeledSequence]) -> int:
    return sum(len(s) for s in sequences)
