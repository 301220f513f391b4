"""Human-in-the-loop annotation service.

A session wraps one active-learning run with a human oracle: query a
batch, collect token labels, retrain from scratch, report the curve.
Sessions are snapshotted to disk after every transition so an
annotation run survives process restarts.
"""

from __future__ import annotations

import dataclasses
import json
import threading
import time
import uuid
from pathlib import Path
from typing import Mapping

from fastapi import Body, FastAPI, HTTPException, Response
from fastapi.responses import HTMLResponse, JSONResponse
from fastapi.staticfiles import StaticFiles

from .corpus import Dataset, Pool
from .files import write_atomic
from .loop import (
    HUMAN,
    ConfigError,
    ExperimentConfig,
    LearningCurve,
    RoundRecord,
    budget_feasible,
    config_from_dict,
    config_to_dict,
    curve_to_csv,
    curve_to_json,
    draw_seed_pool,
    encoded_pairs,
    evaluate_split,
    load_dataset,
    record_to_dict,
    simulated_oracle,
)
from .strategies import QueryBatch, select_batch
from .tagger import TaggerParams, params_from_json, params_to_json, predict, train

SNAPSHOT_VERSION = 1

IDLE = "idle"
AWAITING = "awaiting_annotations"
TRAINING = "training"

_FALLBACK_PAGE = """<!doctype html>
<html><head><title>annotation service</title></head>
<body><h1>Annotation service is running</h1>
<p>No UI build found. Point --ui-dir at built frontend assets, or use
the JSON API under /sessions.</p></body></html>
"""


class Session:
    """Mutable per-session state plus its exclusive lock."""

    def __init__(self, session_id: str, config: ExperimentConfig, dataset: Dataset):
        self.id = session_id
        self.config = config
        self.dataset = dataset
        self.pool: Pool | None = None
        self.annotations: dict[int, tuple[int, ...]] = {}
        self.params: TaggerParams | None = None
        self.pending: QueryBatch | None = None
        self.records: list[RoundRecord] = []
        self.truncated = False
        self.state = IDLE
        self.lock = threading.Lock()

    @property
    def next_round(self) -> int:
        return len(self.records)

    def curve(self) -> LearningCurve:
        return LearningCurve(self.config, tuple(self.records), self.truncated)


def _train_record(session: Session, round_index: int, seed: int,
                  batch: QueryBatch | None, started: float) -> RoundRecord:
    """Retrain from scratch on everything annotated so far and evaluate.

    A training failure still yields a record (zero metrics, error set)
    so the submitted annotations are never lost.
    """
    dataset = session.dataset
    pool = session.pool
    try:
        params = train(
            session.config.tagger_config(dataset),
            encoded_pairs(dataset, pool.labeled_ids, session.annotations),
            seed,
        )
        test_p, test_r, test_f = evaluate_split(params, dataset, dataset.test)
        _, _, val_f = evaluate_split(params, dataset, dataset.validation)
        session.params = params
        error = None
    except Exception as exc:  # keep the session alive on any trainer error
        test_p = test_r = test_f = val_f = 0.0
        error = str(exc)
    return RoundRecord(
        round_index=round_index,
        words_labeled=pool.words_labeled,
        sentences_labeled=len(pool.labeled_ids),
        test_precision=test_p, test_recall=test_r, test_f1=test_f,
        val_f1=val_f,
        selected_ids=batch.selected_ids if batch else (),
        seconds=time.perf_counter() - started,
        error=error,
    )


# ---------------------------------------------------------------------------
# Snapshots

def snapshot_session(session: Session, state_dir: Path) -> None:
    doc = {
        "version": SNAPSHOT_VERSION,
        "id": session.id,
        "config": config_to_dict(session.config),
        "state": session.state,
        "labeled_ids": sorted(session.pool.labeled_ids),
        "annotations": {str(k): list(v) for k, v in sorted(session.annotations.items())},
        "pending": None if session.pending is None else {
            "selected_ids": list(session.pending.selected_ids),
            "total_words": session.pending.total_words,
            "strategy": session.pending.strategy,
            "round_index": session.pending.round_index,
        },
        "records": [record_to_dict(r) for r in session.records],
        "truncated": session.truncated,
        "params": None if session.params is None
        else json.loads(params_to_json(session.params)),
    }
    write_atomic(state_dir / f"{session.id}.json", json.dumps(doc, indent=1))


def restore_session(path: Path) -> Session:
    doc = json.loads(path.read_text(encoding="utf-8"))
    config = config_from_dict(doc["config"])
    dataset = load_dataset(config.dataset_source)
    session = Session(doc["id"], config, dataset)
    session.pool = Pool.initial(dataset, doc["labeled_ids"])
    session.annotations = {
        int(k): tuple(v) for k, v in doc["annotations"].items()
    }
    pending = doc.get("pending")
    if pending is not None:
        session.pending = QueryBatch(
            selected_ids=tuple(pending["selected_ids"]),
            total_words=pending["total_words"],
            strategy=pending["strategy"],
            round_index=pending["round_index"],
        )
    session.records = [
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
    ]
    session.truncated = doc.get("truncated", False)
    if doc.get("params") is not None:
        session.params = params_from_json(json.dumps(doc["params"]))
    session.state = doc["state"]
    if session.state == TRAINING:
        # the training thread died with the old process; the annotations
        # are safe in the pool, so surface the loss as a failed round
        session.records.append(RoundRecord(
            round_index=session.next_round,
            words_labeled=session.pool.words_labeled,
            sentences_labeled=len(session.pool.labeled_ids),
            test_precision=0.0, test_recall=0.0, test_f1=0.0, val_f1=0.0,
            selected_ids=(), seconds=0.0,
            error="training interrupted by restart",
        ))
        session.state = IDLE
    return session


# ---------------------------------------------------------------------------
# Request validation

def _parse_config(doc) -> ExperimentConfig:
    if not isinstance(doc, Mapping):
        raise ConfigError({"body": "must be a JSON object"})
    config = config_from_dict(doc)
    if config.oracle != HUMAN:
        raise ConfigError({"oracle": "annotation sessions require oracle='human'"})
    return config


def _validate_labels(session: Session, body) -> dict[int, tuple[int, ...]]:
    """Check a submission against the pending batch.

    Raises HTTPException 400 on id-set mismatches and 422 with
    per-sequence diagnostics on length or label errors.
    """
    if not isinstance(body, Mapping) or not isinstance(body.get("labels"), Mapping):
        raise HTTPException(400, {"errors": {"labels": "missing labels object"}})
    raw = body["labels"]
    parsed: dict[int, list] = {}
    for key, value in raw.items():
        try:
            parsed[int(key)] = value
        except (TypeError, ValueError):
            raise HTTPException(
                400, {"errors": {"labels": f"non-integer sequence id {key!r}"}}
            ) from None

    expected = set(session.pending.selected_ids)
    missing = sorted(expected - parsed.keys())
    extra = sorted(parsed.keys() - expected)
    if missing or extra:
        raise HTTPException(400, {"errors": {
            "labels": "submission must cover exactly the pending batch",
            "missing_ids": missing,
            "extra_ids": extra,
        }})

    label_index = {
        name: i for i, name in enumerate(session.dataset.label_set.labels)
    }
    errors: dict[str, str] = {}
    encoded: dict[int, tuple[int, ...]] = {}
    for seq_id in sorted(parsed):
        labels = parsed[seq_id]
        sequence = session.dataset.train_by_id(seq_id)
        if not isinstance(labels, list):
            errors[str(seq_id)] = "labels must be a list of strings"
            continue
        if len(labels) != len(sequence):
            errors[str(seq_id)] = (
                f"expected {len(sequence)} labels, got {len(labels)}"
            )
            continue
        indices = []
        for pos, name in enumerate(labels):
            idx = label_index.get(name)
            if idx is None:
                errors[str(seq_id)] = f"unknown label {name!r} at position {pos}"
                break
            indices.append(idx)
        else:
            encoded[seq_id] = tuple(indices)
    if errors:
        raise HTTPException(422, {"errors": errors})
    return encoded


# ---------------------------------------------------------------------------
# App factory

def create_app(state_dir: str | Path = "sessions", ui_dir: str | Path | None = None) -> FastAPI:
    state_dir = Path(state_dir)
    state_dir.mkdir(parents=True, exist_ok=True)
    app = FastAPI(title="sequence-labeling annotation service")
    sessions: dict[str, Session] = {}

    for snapshot in sorted(state_dir.glob("*.json")):
        try:
            session = restore_session(snapshot)
        except (ValueError, KeyError, OSError) as exc:
            print(f"skipping unreadable snapshot {snapshot.name}: {exc}")
            continue
        sessions[session.id] = session

    def get_session(session_id: str) -> Session:
        session = sessions.get(session_id)
        if session is None:
            raise HTTPException(404, {"errors": {"session": "unknown session id"}})
        return session

    def save(session: Session) -> None:
        snapshot_session(session, state_dir)

    @app.post("/sessions", status_code=201)
    def create_session(body: dict = Body(...)):
        try:
            config = _parse_config(body)
            dataset = load_dataset(config.dataset_source)
        except ConfigError as exc:
            raise HTTPException(400, {"errors": exc.errors}) from None
        except (OSError, ValueError) as exc:
            raise HTTPException(400, {"errors": {"dataset": str(exc)}}) from None

        session = Session(uuid.uuid4().hex, config, dataset)
        session.pool = draw_seed_pool(dataset, config.initial_fraction, config.base_seed)
        # seed sentences come pre-labeled from the corpus; the human
        # annotates only queried batches
        session.annotations = dict(simulated_oracle(dataset, session.pool.labeled_ids))
        started = time.perf_counter()
        session.records.append(
            _train_record(session, 0, config.base_seed, None, started)
        )
        sessions[session.id] = session
        save(session)
        return {"id": session.id, "round": 0, "state": session.state}

    @app.get("/sessions/{session_id}/state")
    def get_state(session_id: str):
        session = get_session(session_id)
        with session.lock:
            last = session.records[-1] if session.records else None
            return {
                "id": session.id,
                "state": session.state,
                "strategy": session.config.strategy,
                "budget": {
                    "unit": session.config.budget.unit,
                    "amount": session.config.budget.amount,
                },
                "round": len(session.records) - 1,
                "words_labeled": session.pool.words_labeled,
                "sentences_labeled": len(session.pool.labeled_ids),
                "label_set": list(session.dataset.label_set.labels),
                "test_f1": last.test_f1 if last else None,
                "last_error": last.error if last else None,
                "pending_ids": None if session.pending is None
                else list(session.pending.selected_ids),
                "truncated": session.truncated,
            }

    @app.post("/sessions/{session_id}/query")
    def query_batch(session_id: str):
        session = get_session(session_id)
        with session.lock:
            if session.state != IDLE:
                raise HTTPException(
                    409, {"errors": {"state": f"cannot query while {session.state}"}}
                )
            if session.params is None:
                raise HTTPException(
                    409, {"errors": {"state": "no trained model; initial training failed"}}
                )
            if not budget_feasible(session.config.budget, session.pool, session.dataset):
                session.truncated = True
                save(session)
                raise HTTPException(
                    410, {"errors": {"pool": "unlabeled pool cannot cover the budget"}}
                )
            round_index = session.next_round
            seed = session.config.base_seed ^ round_index
            batch = select_batch(
                session.config.strategy, session.params, session.pool,
                session.dataset, session.config.budget, seed,
                mc_passes=session.config.mc_passes,
            )
            session.pending = dataclasses.replace(batch, round_index=round_index)
            session.state = AWAITING
            save(session)
            return _pending_payload(session)

    @app.get("/sessions/{session_id}/batch")
    def get_pending_batch(session_id: str):
        session = get_session(session_id)
        with session.lock:
            if session.pending is None:
                raise HTTPException(404, {"errors": {"batch": "no pending batch"}})
            return _pending_payload(session)

    def _pending_payload(session: Session) -> dict:
        batch = session.pending
        encoded = [
            session.dataset.encode(session.dataset.train_by_id(i).tokens)
            for i in batch.selected_ids
        ]
        suggestions = predict(session.params, encoded)
        names = session.dataset.label_set.labels
        return {
            "round": batch.round_index,
            "strategy": batch.strategy,
            "total_words": batch.total_words,
            "sequences": [
                {
                    "id": seq_id,
                    "tokens": list(session.dataset.train_by_id(seq_id).tokens),
                    "suggested": [names[i] for i in suggestions[row]],
                }
                for row, seq_id in enumerate(batch.selected_ids)
            ],
        }

    @app.post("/sessions/{session_id}/annotations")
    def submit_annotations(session_id: str, body: dict = Body(...)):
        session = get_session(session_id)
        with session.lock:
            if session.state != AWAITING:
                raise HTTPException(
                    409, {"errors": {"state": f"cannot submit while {session.state}"}}
                )
            encoded = _validate_labels(session, body)
            batch = session.pending
            round_index = batch.round_index
            seed = session.config.base_seed ^ round_index

            # the submission is durable before training starts
            session.annotations.update(encoded)
            session.pool = session.pool.annotate(session.dataset, batch.selected_ids)
            session.pending = None
            session.state = TRAINING
            save(session)

            if session.config.async_training:
                thread = threading.Thread(
                    target=_finish_round,
                    args=(session, round_index, seed, batch, time.perf_counter()),
                    daemon=True,
                )
                thread.start()
                return JSONResponse(
                    {"round": round_index, "state": TRAINING}, status_code=202
                )
            record = _train_record(
                session, round_index, seed, batch, time.perf_counter()
            )
            session.records.append(record)
            session.state = IDLE
            save(session)
            return record_to_dict(record)

    def _finish_round(session, round_index, seed, batch, started):
        record = _train_record(session, round_index, seed, batch, started)
        with session.lock:
            session.records.append(record)
            session.state = IDLE
            save(session)

    @app.get("/sessions/{session_id}/curve")
    def get_curve(session_id: str, format: str = "json"):
        session = get_session(session_id)
        with session.lock:
            curve = session.curve()
        if format == "csv":
            return Response(curve_to_csv(curve), media_type="text/csv")
        if format != "json":
            raise HTTPException(
                400, {"errors": {"format": "must be 'json' or 'csv'"}}
            )
        return Response(curve_to_json(curve), media_type="application/json")

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")
    else:
        @app.get("/", response_class=HTMLResponse)
        def index():
            return _FALLBACK_PAGE

    return app
