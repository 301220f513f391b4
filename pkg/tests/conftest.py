import numpy as np
import pytest

from seqal.corpus import Dataset, GenConfig, LabeledSequence, LabelSet, generate_synthetic
from seqal.tagger import TaggerConfig, train


@pytest.fixture(scope="session")
def small_dataset() -> Dataset:
    """A 120-sentence synthetic corpus shared across strategy/loop tests."""
    return generate_synthetic(
        GenConfig(n_train=120, n_val=30, n_test=40, vocab_size=60, n_entity_types=3),
        seed=42,
    )


@pytest.fixture(scope="session")
def small_params(small_dataset):
    """A quickly trained tagger over the first 30 train sentences."""
    config = TaggerConfig(
        n_labels=small_dataset.label_set.n_labels,
        vocab_size=small_dataset.vocab_size,
        embed_dim=8,
        hidden_dim=12,
        epochs=3,
    )
    pairs = [
        (small_dataset.encode(s.tokens), list(s.labels))
        for s in small_dataset.train[:30]
    ]
    return train(config, pairs, seed=5)


def tiny_dataset(n_train: int = 8) -> Dataset:
    """A fully hand-built dataset for exact-control tests."""
    label_set = LabelSet(("O", "B-x", "I-x"))
    words = ("<unk>", "a", "b", "c", "d")
    train = []
    rng = np.random.default_rng(0)
    for i in range(n_train):
        n = int(rng.integers(2, 5))
        tokens = tuple(words[1 + int(rng.integers(0, 4))] for _ in range(n))
        labels = [0] * n
        labels[0] = 1
        if n > 1 and rng.random() < 0.5:
            labels[1] = 2
        train.append(LabeledSequence(id=i, tokens=tokens, labels=tuple(labels)))
    held = [
        LabeledSequence(id=100, tokens=("a", "b"), labels=(1, 2)),
        LabeledSequence(id=101, tokens=("c",), labels=(0,)),
    ]
    return Dataset(
        label_set=label_set,
        vocabulary=words,
        train=tuple(train),
        validation=(held[1],),
        test=tuple(held),
    )


@pytest.fixture()
def handmade_dataset() -> Dataset:
    return tiny_dataset()
