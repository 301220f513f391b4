"""Round-based active-learning experiments.

Seed pool, query, annotate, retrain from scratch, evaluate, record;
plus multi-seed aggregation and the CSV/JSON learning-curve formats
used by the CLI and the annotation service.
"""

from __future__ import annotations

import dataclasses
import json
import math
import time
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .corpus import (
    Dataset,
    GenConfig,
    Pool,
    chunk_f1,
    dataset_from_conll,
    dataset_from_json,
    generate_synthetic,
)
from .strategies import STRATEGIES, Budget, QueryBatch, select_batch
from .tagger import TaggerConfig, TaggerParams, predict, train

SIMULATED = "simulated"
HUMAN = "human"

CURVE_CSV_HEADER = "round,words,sentences,precision,recall,f1"
AGGREGATE_CSV_HEADER = "round,words_mean,f1_mean,f1_std"


class ConfigError(ValueError):
    """Invalid experiment config; carries per-field messages."""

    def __init__(self, errors: dict[str, str]):
        super().__init__("; ".join(f"{k}: {v}" for k, v in sorted(errors.items())))
        self.errors = errors


@dataclass(frozen=True)
class DatasetSource:
    """Where the dataset comes from: a JSON file, CoNLL files, or the
    synthetic generator."""

    path: str | None = None
    conll: Mapping[str, object] | None = None
    synthetic: GenConfig | None = None
    synthetic_seed: int = 0

    def __post_init__(self):
        given = sum(x is not None for x in (self.path, self.conll, self.synthetic))
        if given != 1:
            raise ValueError(
                "exactly one of path, conll or synthetic must be given"
            )


def load_dataset(source: DatasetSource) -> Dataset:
    if source.path is not None:
        with open(source.path, encoding="utf-8") as fh:
            return dataset_from_json(fh.read())
    if source.conll is not None:
        def read(key: str) -> str:
            p = source.conll.get(key)
            if p is None:
                return ""
            with open(p, encoding="utf-8") as fh:
                return fh.read()

        return dataset_from_conll(
            read("train"), read("validation"), read("test"),
            token_column=int(source.conll.get("token_column", 0)),
            label_column=source.conll.get("label_column"),
        )
    return generate_synthetic(source.synthetic, source.synthetic_seed)


@dataclass(frozen=True)
class ExperimentConfig:
    dataset_source: DatasetSource
    strategy: str
    budget: Budget
    initial_fraction: float = 0.02
    n_rounds: int = 8
    n_repeats: int = 5
    base_seed: int = 0
    oracle: str = SIMULATED
    mc_passes: int = 100
    tagger_overrides: Mapping[str, object] = field(default_factory=dict)
    async_training: bool = False

    def __post_init__(self):
        errors: dict[str, str] = {}
        if self.strategy not in STRATEGIES:
            errors["strategy"] = f"must be one of {', '.join(STRATEGIES)}"
        if not 0.0 < self.initial_fraction <= 1.0:
            errors["initial_fraction"] = "must be in (0, 1]"
        if self.n_rounds < 0:
            errors["n_rounds"] = "must be nonnegative"
        if self.n_repeats < 1:
            errors["n_repeats"] = "must be positive"
        if self.oracle not in (SIMULATED, HUMAN):
            errors["oracle"] = f"must be '{SIMULATED}' or '{HUMAN}'"
        if self.mc_passes < 1:
            errors["mc_passes"] = "must be positive"
        if errors:
            raise ConfigError(errors)

    def tagger_config(self, dataset: Dataset) -> TaggerConfig:
        return TaggerConfig(
            n_labels=dataset.label_set.n_labels,
            vocab_size=dataset.vocab_size,
            **dict(self.tagger_overrides),
        )


@dataclass(frozen=True)
class RoundRecord:
    round_index: int
    words_labeled: int
    sentences_labeled: int
    test_precision: float
    test_recall: float
    test_f1: float
    val_f1: float
    selected_ids: tuple[int, ...]
    seconds: float
    error: str | None = None


@dataclass(frozen=True)
class LearningCurve:
    config: ExperimentConfig
    records: tuple[RoundRecord, ...]
    truncated: bool = False


def simulated_oracle(dataset: Dataset, ids: Iterable[int]) -> dict[int, tuple[int, ...]]:
    """Gold train labels, verbatim, for the requested ids."""
    return {i: dataset.train_by_id(i).labels for i in ids}


def encoded_pairs(
    dataset: Dataset,
    ids: Iterable[int],
    annotations: Mapping[int, Sequence[int]],
) -> list[tuple[list[int], list[int]]]:
    """(token-index, label-index) training pairs in ascending id order."""
    return [
        (dataset.encode(dataset.train_by_id(i).tokens), list(annotations[i]))
        for i in sorted(ids)
    ]


def evaluate_split(
    params: TaggerParams, dataset: Dataset, split: Sequence
) -> tuple[float, float, float]:
    """Chunk precision/recall/F1 of dropout-off predictions on a split."""
    if not split:
        return 0.0, 0.0, 1.0
    encoded = [dataset.encode(s.tokens) for s in split]
    predicted = predict(params, encoded)
    labels = dataset.label_set.labels
    gold = [[labels[i] for i in s.labels] for s in split]
    pred = [[labels[i] for i in p] for p in predicted]
    return chunk_f1(gold, pred)


def draw_seed_pool(dataset: Dataset, initial_fraction: float, seed: int) -> Pool:
    """Uniform sample of ceil(fraction * train size) sentences."""
    train_ids = sorted(s.id for s in dataset.train)
    n_seed = math.ceil(initial_fraction * len(train_ids))
    rng = np.random.default_rng(seed)
    picked = rng.choice(len(train_ids), size=n_seed, replace=False)
    return Pool.initial(dataset, [train_ids[i] for i in picked])


def budget_feasible(budget: Budget, pool: Pool, dataset: Dataset) -> bool:
    """Whether the unlabeled pool can still cover one round's budget."""
    if budget.unit == "sentences":
        return len(pool.unlabeled_ids) >= budget.amount
    words = sum(len(dataset.train_by_id(i)) for i in pool.unlabeled_ids)
    return words >= budget.amount


def run_experiment(config: ExperimentConfig, dataset: Dataset | None = None) -> LearningCurve:
    """One full experiment: seed, then query/annotate/retrain per round.

    Deterministic with the simulated oracle: the pool draw and round-0
    training use ``base_seed``; round ``r`` uses ``base_seed XOR r`` for
    both selection and retraining.  If the unlabeled pool cannot cover
    the budget mid-run, the curve is cut short and flagged truncated.
    """
    if config.oracle != SIMULATED:
        raise ValueError("run_experiment drives the simulated oracle only; "
                         "human sessions go through the annotation service")
    if dataset is None:
        dataset = load_dataset(config.dataset_source)
    if not dataset.train:
        raise ValueError("empty train split")
    tagger_config = config.tagger_config(dataset)

    pool = draw_seed_pool(dataset, config.initial_fraction, config.base_seed)
    annotations = dict(simulated_oracle(dataset, pool.labeled_ids))
    records = []

    def train_and_record(round_index, seed, batch: QueryBatch | None, started):
        params = train(tagger_config, encoded_pairs(dataset, pool.labeled_ids, annotations), seed)
        test_p, test_r, test_f = evaluate_split(params, dataset, dataset.test)
        _, _, val_f = evaluate_split(params, dataset, dataset.validation)
        records.append(RoundRecord(
            round_index=round_index,
            words_labeled=pool.words_labeled,
            sentences_labeled=len(pool.labeled_ids),
            test_precision=test_p, test_recall=test_r, test_f1=test_f,
            val_f1=val_f,
            selected_ids=batch.selected_ids if batch else (),
            seconds=time.perf_counter() - started,
        ))
        return params

    started = time.perf_counter()
    params = train_and_record(0, config.base_seed, None, started)

    truncated = False
    for r in range(1, config.n_rounds + 1):
        if not budget_feasible(config.budget, pool, dataset):
            truncated = True
            break
        started = time.perf_counter()
        round_seed = config.base_seed ^ r
        batch = select_batch(
            config.strategy, params, pool, dataset, config.budget,
            round_seed, mc_passes=config.mc_passes,
        )
        batch = dataclasses.replace(batch, round_index=r)
        annotations.update(simulated_oracle(dataset, batch.selected_ids))
        pool = pool.annotate(dataset, batch.selected_ids)
        params = train_and_record(r, round_seed, batch, started)

    return LearningCurve(config, tuple(records), truncated)


def run_repeats(config: ExperimentConfig, dataset: Dataset | None = None) -> list[LearningCurve]:
    """The n_repeats independent runs; repeat i shifts base_seed by i."""
    if dataset is None:
        dataset = load_dataset(config.dataset_source)
    return [
        run_experiment(dataclasses.replace(config, base_seed=config.base_seed + i), dataset)
        for i in range(config.n_repeats)
    ]


# ---------------------------------------------------------------------------
# Aggregation

@dataclass(frozen=True)
class AggregatePoint:
    round_index: int
    words_mean: float
    f1_mean: float
    f1_std: float


def aggregate_runs(curves: Sequence[LearningCurve]) -> list[AggregatePoint]:
    """Per-round mean and sample standard deviation of test F1.

    Curves are aligned by round index; word budgets may overshoot
    differently per run, so the mean words annotated is reported.
    """
    if not curves:
        raise ValueError("no curves to aggregate")
    n_records = len(curves[0].records)
    if any(len(c.records) != n_records for c in curves):
        raise ValueError("curves have mismatched lengths")
    points = []
    for r in range(n_records):
        f1s = np.array([c.records[r].test_f1 for c in curves])
        words = np.array([c.records[r].words_labeled for c in curves], dtype=np.float64)
        std = float(f1s.std(ddof=1)) if len(f1s) > 1 else 0.0
        points.append(AggregatePoint(
            round_index=curves[0].records[r].round_index,
            words_mean=float(words.mean()),
            f1_mean=float(f1s.mean()),
            f1_std=std,
        ))
    return points


# ---------------------------------------------------------------------------
# Serialization

def _fmt(x: float) -> str:
    return repr(float(x))


def curve_to_csv(curve: LearningCurve) -> str:
    lines = [CURVE_CSV_HEADER]
    for rec in curve.records:
        lines.append(
            f"{rec.round_index},{rec.words_labeled},{rec.sentences_labeled},"
            f"{_fmt(rec.test_precision)},{_fmt(rec.test_recall)},{_fmt(rec.test_f1)}"
        )
    return "\n".join(lines) + "\n"


def aggregate_to_csv(points: Sequence[AggregatePoint]) -> str:
    lines = [AGGREGATE_CSV_HEADER]
    for p in points:
        lines.append(
            f"{p.round_index},{_fmt(p.words_mean)},{_fmt(p.f1_mean)},{_fmt(p.f1_std)}"
        )
    return "\n".join(lines) + "\n"


def config_to_dict(config: ExperimentConfig) -> dict:
    src = config.dataset_source
    if src.path is not None:
        dataset: dict[str, object] = {"path": src.path}
    elif src.conll is not None:
        dataset = {"conll": dict(src.conll)}
    else:
        dataset = {
            "synthetic": dataclasses.asdict(src.synthetic),
            "seed": src.synthetic_seed,
        }
    return {
        "dataset": dataset,
        "strategy": config.strategy,
        "budget": {"unit": config.budget.unit, "amount": config.budget.amount},
        "initial_fraction": config.initial_fraction,
        "n_rounds": config.n_rounds,
        "n_repeats": config.n_repeats,
        "base_seed": config.base_seed,
        "oracle": config.oracle,
        "mc_passes": config.mc_passes,
        "tagger": dict(config.tagger_overrides),
        "async_training": config.async_training,
    }


def config_from_dict(doc: Mapping[str, object]) -> ExperimentConfig:
    """Parse and validate the published JSON config document."""
    errors: dict[str, str] = {}

    def need(key: str):
        if key not in doc:
            errors[key] = "missing"
            return None
        return doc[key]

    dataset = need("dataset")
    source = None
    if isinstance(dataset, Mapping):
        try:
            if "path" in dataset:
                source = DatasetSource(path=str(dataset["path"]))
            elif "conll" in dataset:
                source = DatasetSource(conll=dict(dataset["conll"]))
            elif "synthetic" in dataset:
                source = DatasetSource(
                    synthetic=GenConfig(**dataset["synthetic"]),
                    synthetic_seed=int(dataset.get("seed", 0)),
                )
            else:
                errors["dataset"] = "needs one of path, conll, synthetic"
        except (TypeError, ValueError) as exc:
            errors["dataset"] = str(exc)
    elif dataset is not None:
        errors["dataset"] = "must be an object"

    budget_doc = need("budget")
    budget = None
    if isinstance(budget_doc, Mapping):
        try:
            budget = Budget(str(budget_doc.get("unit")), int(budget_doc.get("amount", 0)))
        except (TypeError, ValueError) as exc:
            errors["budget"] = str(exc)
    elif budget_doc is not None:
        errors["budget"] = "must be an object with unit and amount"

    strategy = need("strategy")
    if errors:
        raise ConfigError(errors)

    try:
        return ExperimentConfig(
            dataset_source=source,
            strategy=str(strategy),
            budget=budget,
            initial_fraction=float(doc.get("initial_fraction", 0.02)),
            n_rounds=int(doc.get("n_rounds", 8)),
            n_repeats=int(doc.get("n_repeats", 5)),
            base_seed=int(doc.get("base_seed", 0)),
            oracle=str(doc.get("oracle", SIMULATED)),
            mc_passes=int(doc.get("mc_passes", 100)),
            tagger_overrides=dict(doc.get("tagger", {})),
            async_training=bool(doc.get("async_training", False)),
        )
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError({"config": str(exc)}) from None


def record_to_dict(rec: RoundRecord) -> dict:
    return {
        "round": rec.round_index,
        "words": rec.words_labeled,
        "sentences": rec.sentences_labeled,
        "precision": rec.test_precision,
        "recall": rec.test_recall,
        "f1": rec.test_f1,
        "val_f1": rec.val_f1,
        "selected_ids": list(rec.selected_ids),
        "seconds": rec.seconds,
        "error": rec.error,
    }


def curve_to_json(curve: LearningCurve) -> str:
    doc = {
        "config": config_to_dict(curve.config),
        "truncated": curve.truncated,
        "records": [record_to_dict(r) for r in curve.records],
    }
    return json.dumps(doc, indent=1)


def curve_from_json(text: str) -> LearningCurve:
    doc = json.loads(text)
    records = tuple(
        RoundRecord(
            round_index=r["round"],
            words_labeled=r["words"],
            sentences_labeled=r["sentences"],
            test_precision=r["precision"],
            test_recall=r["recall"],
            test_f1=r["f1"],
            val_f1=r.get("val_f1", 0.0),
            selected_ids=tuple(r.get("selected_ids", ())),
            seconds=r.get("seconds", 0.0),
            error=r.get("error"),
        )
        for r in doc["records"]
    )
    return LearningCurve(
        config=config_from_dict(doc["config"]),
        records=records,
        truncated=doc.get("truncated", False),
    )
