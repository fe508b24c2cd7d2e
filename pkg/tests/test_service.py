from __future__ import annotations

import shutil

import numpy as np
import pytest
from fastapi.testclient import TestClient

from matchflow.core import DecisionHistory, DecisionRecord
from matchflow.datastore import fixture_path, load_task_bundle, save_task_bundle, TaskBundle
from matchflow.engine import EstimatorKind, TargetSpec, ThresholdMode, process_history
from matchflow.service import create_app
from matchflow.theory import MeasureKind

EXAMPLE_DECISIONS = [
    {"row": 0, "col": 0, "confidence": 0.9},
    {"row": 1, "col": 1, "confidence": 0.15},
    {"row": 0, "col": 1, "confidence": 0.25},
    {"row": 2, "col": 3, "confidence": 1.0},
    {"row": 1, "col": 0, "confidence": 0.3},
]


@pytest.fixture(scope="module")
def task_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("tasks")
    shutil.copytree(fixture_path("purchase-order-mini"), root / "po-mini")
    # A second task without matrix or reference, for warning paths.
    mini = load_task_bundle(root / "po-mini")
    bare = TaskBundle(
        name="bare", version=1, schema_a=mini.schema_a, schema_b=mini.schema_b
    )
    save_task_bundle(bare, root / "bare")
    return root


@pytest.fixture()
def client(task_dir):
    return TestClient(create_app(task_dir))


def new_session(client, task="po-mini", measure="f", mode="dynamic", estimator="unbiased"):
    resp = client.post(
        "/sessions",
        json={"task": task, "target": {"measure": measure, "mode": mode}, "estimator": estimator},
    )
    assert resp.status_code == 201
    return resp.json()["id"]


def test_list_and_detail_tasks(client):
    tasks = client.get("/tasks").json()
    ids = {t["id"] for t in tasks}
    assert {"po-mini", "bare"} <= ids
    detail = client.get("/tasks/po-mini").json()
    assert detail["rows"] == 3 and detail["cols"] == 4
    assert detail["schema_a"]["name"] == "PO2"
    assert detail["attributes_b"][0]["name"] == "poDay"
    assert client.get("/tasks/nope").status_code == 404


def test_create_session_errors(client):
    assert (
        client.post(
            "/sessions",
            json={"task": "missing", "target": {"measure": "f"}, "estimator": "unbiased"},
        ).status_code
        == 404
    )
    resp = client.post(
        "/sessions",
        json={"task": "po-mini", "target": {"measure": "f"}, "estimator": "calibrated"},
    )
    assert resp.status_code == 409
    assert "calibrator unavailable" in resp.json()["detail"]


def test_distinct_session_ids(client):
    assert new_session(client) != new_session(client)


def test_example_flow_matches_worked_example(client):
    sid = new_session(client)
    marks, thresholds = [], []
    for body in EXAMPLE_DECISIONS:
        verdict = client.post(f"/sessions/{sid}/decisions", json=body).json()
        marks.append(verdict["accepted"])
        thresholds.append(round(verdict["threshold"], 2))
    assert marks == [True, False, True, True, False]
    assert thresholds == [0.0, 0.18, 0.18, 0.19, 0.31]

    snapshot = client.get(f"/sessions/{sid}").json()
    assert snapshot["accepted"] == [[0, 0], [0, 1], [2, 3]]
    assert len(snapshot["verdicts"]) == 5


def test_state_threshold_after_first_decision(client):
    sid = new_session(client)
    fresh = client.get(f"/sessions/{sid}").json()
    assert fresh["current_threshold"] == 0.0
    client.post(f"/sessions/{sid}/decisions", json={"row": 0, "col": 0, "confidence": 0.9})
    snap = client.get(f"/sessions/{sid}").json()
    assert snap["current_threshold"] == pytest.approx(0.18)


def test_bounds_and_closed_session_errors(client):
    sid = new_session(client)
    resp = client.post(f"/sessions/{sid}/decisions", json={"row": 9, "col": 0, "confidence": 0.5})
    assert resp.status_code == 400
    client.post(f"/sessions/{sid}/finalize", json={})
    resp = client.post(f"/sessions/{sid}/decisions", json={"row": 0, "col": 0, "confidence": 0.5})
    assert resp.status_code == 409
    assert client.post(f"/sessions/{sid}/finalize", json={}).status_code == 409
    assert client.get("/sessions/nope").status_code == 404


def test_zero_confidence_static_reject(client):
    sid = new_session(client, mode="static")
    verdict = client.post(
        f"/sessions/{sid}/decisions", json={"row": 0, "col": 0, "confidence": 0.0}
    ).json()
    assert verdict["accepted"] is False


def test_finalize_rb_exact_one(client):
    sid = new_session(client)
    for body in EXAMPLE_DECISIONS:
        client.post(f"/sessions/{sid}/decisions", json=body)
    final = client.post(
        f"/sessions/{sid}/finalize", json={"rb": {"variant": "uniform", "param": 1.0}}
    ).json()
    # The only exact-1.0 entry of the fixture matrix was human-touched.
    assert final["rb_match"] == []
    assert final["match"] == [[0, 0], [0, 1], [2, 3]]
    assert final["report"]["final"]["fmeasure"] == pytest.approx(6 / 7)
    assert final["warning"] is None


def test_finalize_rb_low_threshold_boosts_recall(client):
    sid = new_session(client)
    for body in EXAMPLE_DECISIONS:
        client.post(f"/sessions/{sid}/decisions", json=body)
    final = client.post(
        f"/sessions/{sid}/finalize", json={"rb": {"variant": "uniform", "param": 0.0}}
    ).json()
    assert len(final["rb_match"]) == 7  # every untouched cell
    assert final["report"]["final"]["recall"] >= final["report"]["hp_only"]["recall"]


def test_finalize_without_matrix_warns(client):
    sid = new_session(client, task="bare")
    client.post(f"/sessions/{sid}/decisions", json={"row": 0, "col": 0, "confidence": 0.9})
    final = client.post(f"/sessions/{sid}/finalize", json={}).json()
    assert final["warning"] is not None
    assert final["match"] == final["hp_match"]


def test_snapshot_purity(client):
    sid = new_session(client)
    client.post(f"/sessions/{sid}/decisions", json={"row": 0, "col": 0, "confidence": 0.9})
    a = client.get(f"/sessions/{sid}").json()
    b = client.get(f"/sessions/{sid}").json()
    assert a == b


def test_replay_equivalence_with_server_timestamps(client):
    rng = np.random.default_rng(0)
    sid = new_session(client, measure="p", mode="dynamic")
    sent = []
    for _ in range(12):
        body = {
            "row": int(rng.integers(0, 3)),
            "col": int(rng.integers(0, 4)),
            "confidence": float(np.round(rng.random(), 3)),
        }
        verdict = client.post(f"/sessions/{sid}/decisions", json=body).json()
        sent.append((body, verdict))
    snapshot = client.get(f"/sessions/{sid}").json()

    history = DecisionHistory.of(
        DecisionRecord(
            pair=(v["row"], v["col"]), confidence=b["confidence"], timestamp=v["timestamp"]
        )
        for b, v in sent
    )
    _, batch = process_history(
        history,
        TargetSpec(MeasureKind.PRECISION, ThresholdMode.DYNAMIC),
        EstimatorKind.UNBIASED,
        4,
    )
    for server, local in zip(snapshot["verdicts"], batch):
        assert server["accepted"] == local.accepted
        assert server["threshold"] == pytest.approx(local.threshold, abs=1e-12)
        assert server["running_match_size"] == local.running_match_size


def test_session_persistence_replay(task_dir, tmp_path):
    log_dir = tmp_path / "sessions"
    app = create_app(task_dir, session_dir=log_dir)
    first = TestClient(app)
    sid = new_session(first)
    for body in EXAMPLE_DECISIONS[:3]:
        first.post(f"/sessions/{sid}/decisions", json=body)
    before = first.get(f"/sessions/{sid}").json()

    # A fresh service over the same log directory must restore the session.
    revived = TestClient(create_app(task_dir, session_dir=log_dir))
    after = revived.get(f"/sessions/{sid}").json()
    assert after["verdicts"] == before["verdicts"]
    assert after["accepted"] == before["accepted"]
    assert after["status"] == "open"

    # New sessions keep allocating fresh ids past the restored ones.
    assert new_session(revived) != sid

    # The session remains usable after restoration.
    verdict = revived.post(
        f"/sessions/{sid}/decisions", json=EXAMPLE_DECISIONS[3]
    ).json()
    assert verdict["index"] == 3


def test_finalized_session_persists(task_dir, tmp_path):
    log_dir = tmp_path / "sessions2"
    first = TestClient(create_app(task_dir, session_dir=log_dir))
    sid = new_session(first)
    for body in EXAMPLE_DECISIONS:
        first.post(f"/sessions/{sid}/decisions", json=body)
    final = first.post(f"/sessions/{sid}/finalize", json={}).json()

    revived = TestClient(create_app(task_dir, session_dir=log_dir))
    snapshot = revived.get(f"/sessions/{sid}").json()
    assert snapshot["status"] == "finalized"
    assert snapshot["final"]["match"] == final["match"]
    assert revived.post(
        f"/sessions/{sid}/decisions", json=EXAMPLE_DECISIONS[0]
    ).status_code == 409


def test_concurrent_submits_serialize(client):
    import threading as _threading

    sid = new_session(client, measure="r")
    errors = []

    def worker(k: int) -> None:
        try:
            resp = client.post(
                f"/sessions/{sid}/decisions",
                json={"row": k % 3, "col": k % 4, "confidence": 0.5},
            )
            assert resp.status_code == 200
        except Exception as exc:  # surfaced after join
            errors.append(exc)

    threads = [_threading.Thread(target=worker, args=(k,)) for k in range(16)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert not errors
    snapshot = client.get(f"/sessions/{sid}").json()
    assert len(snapshot["verdicts"]) == 16
    stamps = [v["timestamp"] for v in snapshot["verdicts"]]
    assert stamps == sorted(stamps)
    assert len(set(stamps)) == 16  # strictly increasing, server-assigned
    assert [v["index"] for v in snapshot["verdicts"]] == list(range(16))
