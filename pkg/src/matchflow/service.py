"""HTTP session service hosting interactive matching sessions.

Each session wraps the step-wise engine: clients stream decisions and receive
live verdicts with the current dynamic threshold; finalizing runs recall
boosting over the task's algorithmic matrix and reports match quality when a
reference is available.  Timestamps are server-assigned so the decision order
is enforced centrally.
"""

from __future__ import annotations

import itertools
import json
import logging
import re
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, HTTPException

logger = logging.getLogger(__name__)
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel, Field

from . import engine
from .calibrator import CalibratorParams, FeatureContext, build_consensus
from .core import DecisionHistory, DecisionRecord, Match, prf
from .datastore import TaskBundle, load_params, load_task_bundle
from .engine import EstimatorKind, RunningState, StepVerdict, TargetSpec, ThresholdMode
from .recall_boost import RBConfig, RBVariant, finalize, partial_matrix, rb_select
from .theory import MeasureKind


class TargetBody(BaseModel):
    measure: str = Field(pattern="^[rpf]$")
    mode: str = Field(default="dynamic", pattern="^(static|dynamic)$")


class CreateSessionBody(BaseModel):
    task: str
    target: TargetBody
    estimator: str = Field(default="unbiased", pattern="^(unbiased|calibrated)$")


class DecisionBody(BaseModel):
    row: int
    col: int
    confidence: float = Field(ge=0.0, le=1.0)


class RBBody(BaseModel):
    variant: str = Field(default="uniform", pattern="^(uniform|max_delta_row|max_delta_col|dominants)$")
    param: float = Field(default=0.9, ge=0.0, le=1.0)
    epsilon: float = Field(default=1e-9, gt=0.0)


class FinalizeBody(BaseModel):
    rb: RBBody = RBBody()


def _verdict_json(v: StepVerdict, timestamp: float) -> dict:
    return {
        "index": v.index,
        "row": v.pair[0],
        "col": v.pair[1],
        "confidence_used": v.confidence_used,
        "threshold": v.threshold,
        "accepted": v.accepted,
        "running_match_size": v.running_match_size,
        "timestamp": timestamp,
    }


@dataclass
class Session:
    id: str
    task_id: str
    target: TargetSpec
    estimator: EstimatorKind
    state: RunningState
    created: float = field(default_factory=time.monotonic)
    verdicts: list[dict] = field(default_factory=list)
    records: list[DecisionRecord] = field(default_factory=list)
    status: str = "open"
    final: Optional[dict] = None
    lock: threading.Lock = field(default_factory=threading.Lock)

    def next_timestamp(self) -> float:
        t = time.monotonic() - self.created
        if self.records and t <= self.records[-1].timestamp:
            t = self.records[-1].timestamp + 1e-6
        return t


def _schema_tree_json(bundle: TaskBundle, side: str) -> dict:
    from .datastore import _attributes_to_tree

    schema = bundle.schema_a if side == "a" else bundle.schema_b
    return _attributes_to_tree(schema)


class ServiceState:
    """All mutable service state; one writer per session via its lock.

    With a session directory configured, every session appends its decisions
    to a JSONL log; on startup those logs are replayed through the engine so
    a crashed service resumes with identical verdict logs.
    """

    def __init__(
        self,
        task_dir: Path,
        model_path: Optional[Path] = None,
        session_dir: Optional[Path] = None,
    ):
        self.tasks: dict[str, TaskBundle] = {}
        for sub in sorted(Path(task_dir).iterdir()) if Path(task_dir).is_dir() else []:
            if sub.is_dir() and (sub / "meta.json").exists():
                self.tasks[sub.name] = load_task_bundle(sub)
        self.calibrator: Optional[CalibratorParams] = load_params(model_path) if model_path else None
        self.sessions: dict[str, Session] = {}
        self.session_dir = Path(session_dir) if session_dir else None
        self._counter = itertools.count(1)
        self._registry_lock = threading.Lock()
        if self.session_dir is not None:
            self.session_dir.mkdir(parents=True, exist_ok=True)
            self._restore_sessions()

    def new_session_id(self) -> str:
        return f"s{next(self._counter):06d}"

    def feature_context(self, bundle: TaskBundle) -> FeatureContext:
        if bundle.algorithmic is None:
            raise HTTPException(409, "task has no algorithmic matrix for calibrated processing")
        consensus = build_consensus(list(bundle.histories.values()), bundle.n, bundle.m)
        return FeatureContext(consensus=consensus, algorithmic=bundle.algorithmic, session_start=0.0)

    def append_log(self, session_id: str, event: dict) -> None:
        if self.session_dir is None:
            return
        with (self.session_dir / f"{session_id}.jsonl").open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(event, sort_keys=True) + "\n")

    def _restore_sessions(self) -> None:
        assert self.session_dir is not None
        top = 0
        for path in sorted(self.session_dir.glob("s*.jsonl")):
            try:
                session = self._restore_one(path)
            except Exception as exc:  # a corrupt log must not block startup
                logger.warning("skipping session log %s: %s", path.name, exc)
                continue
            if session is not None:
                self.sessions[session.id] = session
                match = re.fullmatch(r"s(\d+)", session.id)
                if match:
                    top = max(top, int(match.group(1)))
        self._counter = itertools.count(top + 1)

    def _restore_one(self, path: Path) -> Optional[Session]:
        lines = [json.loads(ln) for ln in path.read_text(encoding="utf-8").splitlines() if ln.strip()]
        if not lines or lines[0].get("event") != "create":
            raise ValueError("log does not start with a create event")
        head = lines[0]
        if head["task"] not in self.tasks:
            raise ValueError(f"unknown task {head['task']!r}")
        bundle = self.tasks[head["task"]]
        target = TargetSpec(MeasureKind(head["measure"]), ThresholdMode(head["mode"]))
        estimator = EstimatorKind(head["estimator"])
        calibrator = context = None
        if estimator is EstimatorKind.CALIBRATED:
            if self.calibrator is None:
                raise ValueError("calibrated session but no model loaded")
            calibrator = self.calibrator
            context = self.feature_context(bundle)
        session = Session(
            id=head["id"],
            task_id=head["task"],
            target=target,
            estimator=estimator,
            state=engine.start_state(target, estimator, bundle.ref_size(), calibrator, context),
        )
        for event in lines[1:]:
            if event["event"] == "decision":
                record = DecisionRecord(
                    pair=(event["row"], event["col"]),
                    confidence=event["confidence"],
                    timestamp=event["timestamp"],
                )
                session.state, verdict = engine.step(session.state, record)
                session.records.append(record)
                session.verdicts.append(_verdict_json(verdict, record.timestamp))
            elif event["event"] == "finalize":
                session.status = "finalized"
                session.final = event["final"]
        return session


def create_app(
    task_dir: str | Path,
    model_path: Optional[str | Path] = None,
    session_dir: Optional[str | Path] = None,
) -> FastAPI:
    app = FastAPI(title="matchflow session service")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    svc = ServiceState(
        Path(task_dir),
        Path(model_path) if model_path else None,
        Path(session_dir) if session_dir else None,
    )
    app.state.svc = svc

    def get_task(task_id: str) -> TaskBundle:
        if task_id not in svc.tasks:
            raise HTTPException(404, f"unknown task {task_id!r}")
        return svc.tasks[task_id]

    def get_session(session_id: str) -> Session:
        if session_id not in svc.sessions:
            raise HTTPException(404, f"unknown session {session_id!r}")
        return svc.sessions[session_id]

    @app.get("/tasks")
    def list_tasks() -> list[dict]:
        return [
            {
                "id": tid,
                "name": b.name,
                "rows": b.n,
                "cols": b.m,
                "has_reference": b.reference is not None,
                "has_algorithmic": b.algorithmic is not None,
            }
            for tid, b in svc.tasks.items()
        ]

    @app.get("/tasks/{task_id}")
    def task_detail(task_id: str) -> dict:
        bundle = get_task(task_id)
        return {
            "id": task_id,
            "name": bundle.name,
            "rows": bundle.n,
            "cols": bundle.m,
            "ref_size": bundle.ref_size(),
            "has_reference": bundle.reference is not None,
            "has_algorithmic": bundle.algorithmic is not None,
            "schema_a": _schema_tree_json(bundle, "a"),
            "schema_b": _schema_tree_json(bundle, "b"),
            "attributes_a": [
                {"id": a.id, "name": a.name, "path": list(a.path), "datatype": a.datatype,
                 "instances": list(a.instances)}
                for a in bundle.schema_a.attributes
            ],
            "attributes_b": [
                {"id": a.id, "name": a.name, "path": list(a.path), "datatype": a.datatype,
                 "instances": list(a.instances)}
                for a in bundle.schema_b.attributes
            ],
        }

    @app.post("/sessions", status_code=201)
    def create_session(body: CreateSessionBody) -> dict:
        bundle = get_task(body.task)
        target = TargetSpec(MeasureKind(body.target.measure), ThresholdMode(body.target.mode))
        estimator = EstimatorKind(body.estimator)
        calibrator = None
        context = None
        if estimator is EstimatorKind.CALIBRATED:
            if svc.calibrator is None:
                raise HTTPException(409, "calibrator unavailable: no model loaded")
            calibrator = svc.calibrator
            context = svc.feature_context(bundle)
        state = engine.start_state(target, estimator, bundle.ref_size(), calibrator, context)
        session = Session(
            id=svc.new_session_id(),
            task_id=body.task,
            target=target,
            estimator=estimator,
            state=state,
        )
        with svc._registry_lock:
            svc.sessions[session.id] = session
        svc.append_log(
            session.id,
            {
                "event": "create",
                "id": session.id,
                "task": body.task,
                "measure": body.target.measure,
                "mode": body.target.mode,
                "estimator": body.estimator,
            },
        )
        return {"id": session.id, "task": body.task, "status": session.status}

    @app.post("/sessions/{session_id}/decisions")
    def submit_decision(session_id: str, body: DecisionBody) -> dict:
        session = get_session(session_id)
        bundle = get_task(session.task_id)
        if not (0 <= body.row < bundle.n and 0 <= body.col < bundle.m):
            raise HTTPException(
                400, f"pair ({body.row}, {body.col}) out of bounds for {bundle.n}x{bundle.m} task"
            )
        with session.lock:
            if session.status != "open":
                raise HTTPException(409, "session is finalized")
            record = DecisionRecord(
                pair=(body.row, body.col),
                confidence=body.confidence,
                timestamp=session.next_timestamp(),
            )
            session.state, verdict = engine.step(session.state, record)
            session.records.append(record)
            payload = _verdict_json(verdict, record.timestamp)
            session.verdicts.append(payload)
            svc.append_log(
                session.id,
                {
                    "event": "decision",
                    "row": body.row,
                    "col": body.col,
                    "confidence": body.confidence,
                    "timestamp": record.timestamp,
                },
            )
        return payload

    @app.get("/sessions/{session_id}")
    def get_state(session_id: str) -> dict:
        session = get_session(session_id)
        with session.lock:
            p_est, f_est = engine.unbiased_estimates(session.state)
            if session.target.mode is ThresholdMode.STATIC or session.target.measure is MeasureKind.RECALL:
                threshold = engine.static_threshold(session.target.measure)
            elif session.estimator is EstimatorKind.UNBIASED:
                threshold = engine.current_threshold(session.state, p_est, f_est)
            else:
                # Calibrated dynamic thresholds depend on the next decision's
                # features; report the most recent one (0.0 on a fresh session).
                threshold = session.verdicts[-1]["threshold"] if session.verdicts else 0.0
            return {
                "id": session.id,
                "task": session.task_id,
                "status": session.status,
                "target": {"measure": session.target.measure.value, "mode": session.target.mode.value},
                "estimator": session.estimator.value,
                "verdicts": list(session.verdicts),
                "accepted": sorted(session.state.accepted_match().pairs),
                "current_threshold": threshold,
                "running_p_estimate": p_est,
                "running_f_estimate": f_est,
                "final": session.final,
            }

    @app.post("/sessions/{session_id}/finalize")
    def finalize_session(session_id: str, body: FinalizeBody = FinalizeBody()) -> dict:
        session = get_session(session_id)
        bundle = get_task(session.task_id)
        with session.lock:
            if session.status != "open":
                raise HTTPException(409, "session already finalized")
            sigma_hp = session.state.accepted_match()
            warning = None
            if bundle.algorithmic is None:
                sigma_rb = Match()
                warning = "task has no algorithmic matrix; recall boosting skipped"
            else:
                history = DecisionHistory.of(session.records)
                cfg = RBConfig(RBVariant(body.rb.variant), body.rb.param, body.rb.epsilon)
                sigma_rb = rb_select(partial_matrix(bundle.algorithmic, history), cfg, sigma_hp)
            final = finalize(sigma_hp, sigma_rb)
            report = None
            if bundle.reference is not None:
                p, r, f = prf(final, bundle.reference)
                hp_p, hp_r, hp_f = prf(sigma_hp, bundle.reference)
                report = {
                    "final": {"precision": p, "recall": r, "fmeasure": f},
                    "hp_only": {"precision": hp_p, "recall": hp_r, "fmeasure": hp_f},
                }
            session.status = "finalized"
            session.final = {
                "match": sorted(final.pairs),
                "hp_match": sorted(sigma_hp.pairs),
                "rb_match": sorted(sigma_rb.pairs),
                "warning": warning,
                "report": report,
            }
            svc.append_log(session.id, {"event": "finalize", "final": session.final})
            return session.final

    return app


def run(
    task_dir: str,
    model_path: Optional[str],
    host: str,
    port: int,
    session_dir: Optional[str] = None,
) -> None:
    import uvicorn

    uvicorn.run(
        create_app(task_dir, model_path, session_dir),
        host=host,
        port=port,
        log_level="warning",
    )
