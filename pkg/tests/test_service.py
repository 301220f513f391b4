"""Annotation service: session lifecycle, validation, persistence."""

import json
import time

import pytest
from fastapi.testclient import TestClient

from seqal.loop import CURVE_CSV_HEADER
from seqal.service import create_app, restore_session


def service_config(**overrides):
    doc = {
        "dataset": {
            "synthetic": {
                "n_train": 40, "n_val": 8, "n_test": 10,
                "vocab_size": 40, "n_entity_types": 2,
                "min_len": 4, "max_len": 8,
            },
            "seed": 9,
        },
        "strategy": "mnlp",
        "budget": {"unit": "sentences", "amount": 3},
        "initial_fraction": 0.05,
        "n_rounds": 4,
        "n_repeats": 1,
        "base_seed": 3,
        "oracle": "human",
        "tagger": {"epochs": 2, "embed_dim": 6, "hidden_dim": 6},
    }
    doc.update(overrides)
    return doc


@pytest.fixture()
def client(tmp_path):
    app = create_app(state_dir=tmp_path / "state")
    with TestClient(app) as c:
        yield c


def make_session(client, **overrides) -> str:
    response = client.post("/sessions", json=service_config(**overrides))
    assert response.status_code == 201, response.text
    return response.json()["id"]


class TestCreateSession:
    def test_valid_config(self, client):
        response = client.post("/sessions", json=service_config())
        assert response.status_code == 201
        body = response.json()
        assert body["round"] == 0
        state = client.get(f"/sessions/{body['id']}/state").json()
        assert state["round"] == 0
        assert state["state"] == "idle"
        assert state["test_f1"] is not None
        assert state["label_set"][0] == "O"

    def test_distinct_sessions(self, client):
        a = make_session(client)
        b = make_session(client)
        assert a != b

    def test_zero_initial_fraction_rejected(self, client):
        response = client.post(
            "/sessions", json=service_config(initial_fraction=0)
        )
        assert response.status_code == 400
        assert "initial_fraction" in response.json()["detail"]["errors"]

    def test_simulated_oracle_rejected(self, client):
        response = client.post(
            "/sessions", json=service_config(oracle="simulated")
        )
        assert response.status_code == 400
        assert "oracle" in response.json()["detail"]["errors"]

    def test_malformed_body_rejected(self, client):
        response = client.post("/sessions", json={"strategy": "mnlp"})
        assert response.status_code == 400

    def test_unknown_session_404(self, client):
        assert client.get("/sessions/nope/state").status_code == 404
        assert client.get("/sessions/nope/curve").status_code == 404
        assert client.post("/sessions/nope/query").status_code == 404


class TestQueryBatch:
    def test_returns_aligned_suggestions(self, client):
        sid = make_session(client)
        response = client.post(f"/sessions/{sid}/query")
        assert response.status_code == 200
        batch = response.json()
        assert len(batch["sequences"]) == 3
        for seq in batch["sequences"]:
            assert len(seq["tokens"]) == len(seq["suggested"])
            assert len(seq["tokens"]) > 0

    def test_second_query_conflicts(self, client):
        sid = make_session(client)
        client.post(f"/sessions/{sid}/query")
        assert client.post(f"/sessions/{sid}/query").status_code == 409

    def test_word_budget_covered(self, client):
        sid = make_session(client, budget={"unit": "words", "amount": 20})
        batch = client.post(f"/sessions/{sid}/query").json()
        total = sum(len(s["tokens"]) for s in batch["sequences"])
        assert total >= 20
        assert batch["total_words"] == total

    def test_exhausted_pool_gone(self, client):
        sid = make_session(
            client, budget={"unit": "sentences", "amount": 39},
        )
        # seed pool took 2 of 40; one batch of 39 can never fit again
        assert client.post(f"/sessions/{sid}/query").status_code == 410

    def test_pending_batch_fetchable(self, client):
        sid = make_session(client)
        queried = client.post(f"/sessions/{sid}/query").json()
        again = client.get(f"/sessions/{sid}/batch").json()
        assert again == queried

    def test_no_pending_batch_404(self, client):
        sid = make_session(client)
        assert client.get(f"/sessions/{sid}/batch").status_code == 404


def suggestions_payload(batch):
    return {
        "labels": {
            str(seq["id"]): seq["suggested"] for seq in batch["sequences"]
        }
    }


class TestSubmitAnnotations:
    def test_round_trip_with_suggestions(self, client):
        sid = make_session(client)
        batch = client.post(f"/sessions/{sid}/query").json()
        response = client.post(
            f"/sessions/{sid}/annotations", json=suggestions_payload(batch)
        )
        assert response.status_code == 200
        record = response.json()
        assert record["round"] == 1
        assert record["error"] is None
        state = client.get(f"/sessions/{sid}/state").json()
        assert state["state"] == "idle"
        assert state["round"] == 1

    def test_curve_grows_by_one(self, client):
        sid = make_session(client)
        before = json.loads(client.get(f"/sessions/{sid}/curve").text)
        batch = client.post(f"/sessions/{sid}/query").json()
        client.post(f"/sessions/{sid}/annotations", json=suggestions_payload(batch))
        after = json.loads(client.get(f"/sessions/{sid}/curve").text)
        assert len(after["records"]) == len(before["records"]) + 1

    def test_previously_annotated_never_requeried(self, client):
        sid = make_session(client)
        seen: set[int] = set()
        for _ in range(3):
            batch = client.post(f"/sessions/{sid}/query").json()
            ids = {seq["id"] for seq in batch["sequences"]}
            assert not ids & seen
            seen |= ids
            client.post(
                f"/sessions/{sid}/annotations", json=suggestions_payload(batch)
            )

    def test_submit_without_query_conflicts(self, client):
        sid = make_session(client)
        response = client.post(
            f"/sessions/{sid}/annotations", json={"labels": {}}
        )
        assert response.status_code == 409

    def test_missing_id_rejected(self, client):
        sid = make_session(client)
        batch = client.post(f"/sessions/{sid}/query").json()
        payload = suggestions_payload(batch)
        dropped = next(iter(payload["labels"]))
        del payload["labels"][dropped]
        response = client.post(f"/sessions/{sid}/annotations", json=payload)
        assert response.status_code == 400
        assert int(dropped) in response.json()["detail"]["errors"]["missing_ids"]

    def test_extra_id_rejected(self, client):
        sid = make_session(client)
        batch = client.post(f"/sessions/{sid}/query").json()
        payload = suggestions_payload(batch)
        payload["labels"]["99999"] = ["O"]
        response = client.post(f"/sessions/{sid}/annotations", json=payload)
        assert response.status_code == 400
        assert 99999 in response.json()["detail"]["errors"]["extra_ids"]

    def test_short_label_list_gets_diagnostic(self, client):
        sid = make_session(client)
        batch = client.post(f"/sessions/{sid}/query").json()
        payload = suggestions_payload(batch)
        victim = str(batch["sequences"][0]["id"])
        payload["labels"][victim] = payload["labels"][victim][:-1]
        response = client.post(f"/sessions/{sid}/annotations", json=payload)
        assert response.status_code == 422
        assert victim in response.json()["detail"]["errors"]

    def test_unknown_label_gets_diagnostic(self, client):
        sid = make_session(client)
        batch = client.post(f"/sessions/{sid}/query").json()
        payload = suggestions_payload(batch)
        victim = str(batch["sequences"][0]["id"])
        payload["labels"][victim] = ["B-nonsense"] * len(payload["labels"][victim])
        response = client.post(f"/sessions/{sid}/annotations", json=payload)
        assert response.status_code == 422
        assert "B-nonsense" in response.json()["detail"]["errors"][victim]

    def test_failed_submission_preserves_pending_state(self, client):
        sid = make_session(client)
        batch = client.post(f"/sessions/{sid}/query").json()
        payload = suggestions_payload(batch)
        victim = str(batch["sequences"][0]["id"])
        payload["labels"][victim] = payload["labels"][victim][:-1]
        client.post(f"/sessions/{sid}/annotations", json=payload)
        # the pending batch is untouched; a correct submission still works
        response = client.post(
            f"/sessions/{sid}/annotations", json=suggestions_payload(batch)
        )
        assert response.status_code == 200


class TestCurve:
    def test_csv_format_shared_with_cli(self, client):
        sid = make_session(client)
        response = client.get(f"/sessions/{sid}/curve", params={"format": "csv"})
        assert response.headers["content-type"].startswith("text/csv")
        assert response.text.startswith(CURVE_CSV_HEADER)

    def test_bad_format_rejected(self, client):
        sid = make_session(client)
        response = client.get(f"/sessions/{sid}/curve", params={"format": "xml"})
        assert response.status_code == 400


class TestPersistence:
    def test_session_survives_restart(self, tmp_path):
        state_dir = tmp_path / "state"
        with TestClient(create_app(state_dir=state_dir)) as client:
            sid = make_session(client)
            batch = client.post(f"/sessions/{sid}/query").json()

        with TestClient(create_app(state_dir=state_dir)) as client:
            state = client.get(f"/sessions/{sid}/state").json()
            assert state["state"] == "awaiting_annotations"
            restored = client.get(f"/sessions/{sid}/batch").json()
            assert restored == batch
            response = client.post(
                f"/sessions/{sid}/annotations", json=suggestions_payload(batch)
            )
            assert response.status_code == 200

    def test_interrupted_training_becomes_error_record(self, tmp_path):
        state_dir = tmp_path / "state"
        with TestClient(create_app(state_dir=state_dir)) as client:
            sid = make_session(client)
        snapshot = state_dir / f"{sid}.json"
        doc = json.loads(snapshot.read_text(encoding="utf-8"))
        doc["state"] = "training"
        snapshot.write_text(json.dumps(doc), encoding="utf-8")

        session = restore_session(snapshot)
        assert session.state == "idle"
        assert session.records[-1].error == "training interrupted by restart"

    def test_unreadable_snapshot_skipped(self, tmp_path, capsys):
        state_dir = tmp_path / "state"
        state_dir.mkdir()
        (state_dir / "junk.json").write_text("not json", encoding="utf-8")
        with TestClient(create_app(state_dir=state_dir)) as client:
            assert client.get("/sessions/junk/state").status_code == 404


class TestAsyncTraining:
    def test_submit_returns_accepted_then_idle(self, client):
        sid = make_session(client, async_training=True)
        batch = client.post(f"/sessions/{sid}/query").json()
        response = client.post(
            f"/sessions/{sid}/annotations", json=suggestions_payload(batch)
        )
        assert response.status_code == 202
        assert response.json()["state"] == "training"
        deadline = time.monotonic() + 30.0
        while time.monotonic() < deadline:
            state = client.get(f"/sessions/{sid}/state").json()
            if state["state"] == "idle":
                break
            time.sleep(0.05)
        assert state["state"] == "idle"
        assert state["round"] == 1


class TestRootPage:
    def test_fallback_page_served(self, client):
        response = client.get("/")
        assert response.status_code == 200
        assert "annotation service" in response.text.lower()

    def test_static_ui_mounted(self, tmp_path):
        ui = tmp_path / "ui"
        ui.mkdir()
        (ui / "index.html").write_text("<html><body>UI</body></html>")
        app = create_app(state_dir=tmp_path / "state", ui_dir=ui)
        with TestClient(app) as client:
            response = client.get("/")
            assert response.status_code == 200
            assert "UI" in response.text
