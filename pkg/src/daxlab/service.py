"""HTTP session service: serves experiments to browsers and logs answers.

State is event-sourced.  Every session is derived from (experiment kind,
seed) plus the append-only response log, so a crashed or restarted
server reconstructs exactly where each participant was, and grading
never needs a live process.  The log is line-delimited JSON with one
event per line, written and flushed before a submission is acked.

The curriculum logic mirrors the offline driver in ``protocol``: an
instructions/practice gate first, then per-stage study quizzes (three
cycle cap) and test blocks for the staged experiment, or the flat trial
list for the others.  Test payloads carry the stage's study set because
participants keep it on screen for reference; quiz payloads cover the
queried item's output.
"""

import hashlib
import json
import os
import threading
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Optional, Sequence

from fastapi import FastAPI, Request
from fastapi.responses import HTMLResponse, JSONResponse, Response
from fastapi.staticfiles import StaticFiles

from . import jsonio, protocol
from .grammar import ColorSymbol, color_to_json
from .protocol import (
    QUIZ_MAX_CYCLES,
    ExperimentSpec,
    Item,
    ResponseRecord,
    Session,
    StageSpec,
)

FORMAT_VERSION = 1

PRACTICE_ITEM_ID = "practice-interface"

EXPERIMENT_KINDS = ("exp1", "exp2", "exp3")


class ServiceError(Exception):
    """Base for request-level failures; carries an HTTP status."""

    status = 400
    code = "ServiceError"

    def __init__(self, detail: str = ""):
        super().__init__(detail or self.code)
        self.detail = detail or self.code


class BadRequestError(ServiceError):
    status = 400
    code = "BadRequest"


class UnknownSessionError(ServiceError):
    status = 404
    code = "UnknownSession"


class OutOfOrderError(ServiceError):
    status = 409
    code = "OutOfOrder"


class NonceMismatchError(ServiceError):
    status = 409
    code = "NonceMismatch"


class CapacityExceededError(ServiceError):
    status = 503
    code = "CapacityExceeded"


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class ServerConfig:
    host: str = "127.0.0.1"
    port: int = 8000
    experiment: str = "exp1"  # default kind when a request names none
    seed_policy: str = "fresh"  # fresh: per-session seed; fixed: one seed
    seed: int = 0
    data_dir: str = "data"
    static_dir: str | None = None
    max_sessions: int = 1000

    def __post_init__(self):
        if not (0 < self.port < 65536):
            raise BadRequestError(f"port out of range: {self.port}")
        if self.experiment not in EXPERIMENT_KINDS:
            raise BadRequestError(f"unknown experiment kind: {self.experiment!r}")
        if self.seed_policy not in ("fresh", "fixed"):
            raise BadRequestError(f"seed_policy must be fresh or fixed")
        if self.max_sessions < 1:
            raise BadRequestError("max_sessions must be positive")

    def to_json(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "host": self.host,
            "port": self.port,
            "experiment": self.experiment,
            "seed_policy": self.seed_policy,
            "seed": self.seed,
            "data_dir": self.data_dir,
            "static_dir": self.static_dir,
            "max_sessions": self.max_sessions,
        }

    @staticmethod
    def from_json(obj: dict) -> "ServerConfig":
        known = {
            k: obj[k]
            for k in (
                "host",
                "port",
                "experiment",
                "seed_policy",
                "seed",
                "data_dir",
                "static_dir",
                "max_sessions",
            )
            if k in obj
        }
        return ServerConfig(**known)


def load_config(path) -> ServerConfig:
    """Read a config file; DAXLAB_DATA_DIR overrides the data directory."""
    with open(path, encoding="utf-8") as fh:
        cfg = ServerConfig.from_json(json.load(fh))
    override = os.environ.get("DAXLAB_DATA_DIR")
    if override:
        cfg = replace(cfg, data_dir=override)
    return cfg


def _derive_seed(base: int, index: int) -> int:
    # stateless per-session seeds: restart-safe and replayable
    digest = hashlib.sha256(f"{base}:{index}".encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "big")


def _derive_nonce(session_id: str, seed: int) -> str:
    # tab-collision guard, not authentication
    return hashlib.sha256(f"{session_id}:{seed}".encode("utf-8")).hexdigest()[:16]


# ---------------------------------------------------------------------------
# event log


@dataclass
class StoredSession:
    session: Session
    nonce: str
    index: int


class SessionStore:
    """Append-only JSONL event log plus the in-memory index it rebuilds.

    Each event is one line written in a single flushed call, so a crash
    can lose at most a trailing partial line, which replay skips.
    """

    def __init__(self, path):
        self._path = Path(path)
        self._lock = threading.Lock()
        self._sessions: dict[str, StoredSession] = {}
        self._order: list[str] = []
        self._replay()

    # -- reading

    def _replay(self) -> None:
        if not self._path.exists():
            return
        with open(self._path, "rb+") as fh:
            data = fh.read()
            complete = data.rfind(b"\n") + 1
            if complete < len(data):
                # torn tail from a crash; drop it so later appends
                # cannot glue onto a partial record
                fh.truncate(complete)
        for raw in data[:complete].split(b"\n")[:-1]:
            if not raw:
                continue
            self._apply(json.loads(raw.decode("utf-8")))

    def _apply(self, event: dict) -> None:
        kind = event.get("event")
        if kind == "session":
            session = Session(
                participant_id=event["participant_id"],
                experiment=event["experiment"],
                seed=event["seed"],
            )
            self._sessions[event["session_id"]] = StoredSession(
                session=session,
                nonce=event["nonce"],
                index=event["index"],
            )
            self._order.append(event["session_id"])
        elif kind == "response":
            stored = self._sessions[event["session_id"]]
            stored.session.append(
                ResponseRecord(
                    item_id=event["item_id"],
                    phase=event["phase"],
                    response=tuple(
                        ColorSymbol(c["id"], c.get("display_name", ""))
                        for c in event["response"]
                    ),
                    cycle=event["cycle"],
                    timestamp=event["timestamp"],
                )
            )
        elif kind == "meta":
            stored = self._sessions[event["session_id"]]
            stored.session.meta[event["key"]] = event["value"]
        # unknown events are ignored so old logs stay readable

    # -- writing

    def _write(self, event: dict) -> None:
        line = jsonio.dumps(event) + "\n"
        self._path.parent.mkdir(parents=True, exist_ok=True)
        with open(self._path, "a", encoding="utf-8") as fh:
            fh.write(line)
            fh.flush()
            os.fsync(fh.fileno())

    def create_session(
        self, kind: str, seed: int, participant_id: str | None = None
    ) -> str:
        with self._lock:
            index = len(self._order)
            session_id = f"s{index + 1:06d}"
            event = {
                "event": "session",
                "format_version": FORMAT_VERSION,
                "session_id": session_id,
                "index": index,
                "experiment": kind,
                "seed": seed,
                "participant_id": participant_id or session_id,
                "nonce": _derive_nonce(session_id, seed),
            }
            self._write(event)
            self._apply(event)
            return session_id

    def append_response(self, session_id: str, record: ResponseRecord) -> None:
        with self._lock:
            stored = self._get(session_id)
            event = {
                "event": "response",
                "format_version": FORMAT_VERSION,
                "session_id": session_id,
                "item_id": record.item_id,
                "phase": record.phase,
                "cycle": record.cycle,
                "timestamp": record.timestamp,
                "response": [color_to_json(c) for c in record.response],
            }
            self._write(event)
            self._apply(event)

    def set_meta(self, session_id: str, key: str, value) -> None:
        with self._lock:
            self._get(session_id)
            event = {
                "event": "meta",
                "format_version": FORMAT_VERSION,
                "session_id": session_id,
                "key": key,
                "value": value,
            }
            self._write(event)
            self._apply(event)

    # -- queries

    def _get(self, session_id: str) -> StoredSession:
        try:
            return self._sessions[session_id]
        except KeyError:
            raise UnknownSessionError(f"no such session: {session_id}") from None

    def get(self, session_id: str) -> StoredSession:
        with self._lock:
            return self._get(session_id)

    def __len__(self) -> int:
        return len(self._order)

    def sessions(self, kind: str | None = None) -> list[Session]:
        with self._lock:
            out = [self._sessions[sid].session for sid in self._order]
        if kind is not None:
            out = [s for s in out if s.experiment == kind]
        return out

    def export(self, kind: str | None = None) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "sessions": [
                protocol.session_to_json(s) for s in self.sessions(kind)
            ],
        }


# ---------------------------------------------------------------------------
# curriculum state machine (pure: spec + records -> what happens next)


@dataclass(frozen=True)
class Pending:
    phase: str  # instructions | study-quiz | test | done
    item: Item | None = None
    stage: StageSpec | None = None
    cycle: int = 0
    trial_index: int | None = None


def practice_target(spec: ExperimentSpec) -> tuple[ColorSymbol, ...]:
    """Copy task shown by the instructions gate: two symbols to reproduce."""
    pool = _practice_pool(spec)
    return (pool[0], pool[1], pool[0])


def _practice_pool(spec: ExperimentSpec) -> tuple[ColorSymbol, ...]:
    first = spec.all_items()[0]
    return first.pool


def _instructions_passed(spec: ExperimentSpec, records) -> bool:
    want = practice_target(spec)
    return any(
        r.phase == "instructions" and tuple(r.response) == want for r in records
    )


def _quiz_pending(stage: StageSpec, records) -> Pending | None:
    """Next quiz presentation for this stage, or None when the quiz is over
    (passed, or all three cycles spent)."""
    covered = stage.quiz_items()
    if not covered:
        return None
    ids = {it.item_id: it for it in covered}
    seen: dict[int, dict[str, bool]] = {}
    for r in records:
        if r.phase == "study-quiz" and r.item_id in ids:
            ok = tuple(r.response) == ids[r.item_id].target
            seen.setdefault(r.cycle, {})[r.item_id] = ok
    for cycle in range(1, QUIZ_MAX_CYCLES + 1):
        answered = seen.get(cycle, {})
        for item in covered:
            if item.item_id not in answered:
                return Pending(
                    phase="study-quiz", item=item, stage=stage, cycle=cycle
                )
        if all(answered[it.item_id] for it in covered):
            return None  # passed
    return None  # failed; tests are still served, grading excludes the stage


def pending_state(spec: ExperimentSpec, records) -> Pending:
    """Replay the record list against the curriculum and name what's next."""
    if not _instructions_passed(spec, records):
        return Pending(phase="instructions")
    answered = {r.item_id for r in records if r.phase == "test"}
    if spec.kind == "exp1":
        for stage in spec.stages:
            quiz = _quiz_pending(stage, records)
            if quiz is not None:
                return quiz
            for item in stage.test:
                if item.item_id not in answered:
                    return Pending(phase="test", item=item, stage=stage)
        return Pending(phase="done")
    if spec.kind == "exp2":
        for trial in spec.trials:
            if trial.test.item_id not in answered:
                return Pending(
                    phase="test", item=trial.test, trial_index=trial.index
                )
        return Pending(phase="done")
    for item in spec.items:
        if item.item_id not in answered:
            return Pending(phase="test", item=item)
    return Pending(phase="done")


# ---------------------------------------------------------------------------
# payload shaping


def _item_json(item: Item) -> dict:
    return {
        "item_id": item.item_id,
        "instruction": list(item.instruction),
        "pool": [color_to_json(c) for c in item.pool],
    }


def _reference_json(
    items: Iterable[Item], covered_id: str | None = None
) -> list[dict]:
    out = []
    for it in items:
        hidden = it.item_id == covered_id
        out.append(
            {
                "item_id": it.item_id,
                "instruction": list(it.instruction),
                "target": None
                if hidden or it.target is None
                else [color_to_json(c) for c in it.target],
                "covered": hidden,
            }
        )
    return out


def _progress(spec: ExperimentSpec, records) -> dict:
    answered = {r.item_id for r in records if r.phase == "test"}
    if spec.kind == "exp1":
        total_items = [it for st in spec.stages for it in st.test]
    elif spec.kind == "exp2":
        total_items = [t.test for t in spec.trials]
    else:
        total_items = list(spec.items)
    done = sum(1 for it in total_items if it.item_id in answered)
    return {"completed": done, "total": len(total_items)}


def next_payload(spec: ExperimentSpec, session: Session, session_id: str) -> dict:
    pending = pending_state(spec, session.records)
    payload = {
        "format_version": FORMAT_VERSION,
        "session_id": session_id,
        "experiment": spec.kind,
        "status": "done" if pending.phase == "done" else "item",
        "phase": pending.phase,
        "stage": pending.stage.name if pending.stage else None,
        "cycle": pending.cycle or None,
        "item": None,
        "progress": _progress(spec, session.records),
    }
    if pending.phase == "done":
        payload["survey_pending"] = "external_aid" not in session.meta
        return payload
    if pending.phase == "instructions":
        pool = _practice_pool(spec)
        payload["item"] = {
            "item_id": PRACTICE_ITEM_ID,
            "instruction": [],
            "pool": [color_to_json(c) for c in pool],
        }
        payload["practice_target"] = [
            color_to_json(c) for c in practice_target(spec)
        ]
        return payload
    payload["item"] = _item_json(pending.item)
    if spec.kind == "exp1":
        covered = pending.item.item_id if pending.phase == "study-quiz" else None
        payload["reference"] = _reference_json(pending.stage.study, covered)
    elif spec.kind == "exp2":
        trial = spec.trials[pending.trial_index]
        payload["reference"] = _reference_json(trial.study)
        payload["trial_index"] = trial.index
    else:
        payload["word_roster"] = list(spec.word_roster)
        payload["page_items"] = [_item_json(it) for it in spec.items]
    return payload


# ---------------------------------------------------------------------------
# session operations (transport-free; the app wires them to routes)


class ExperimentService:
    def __init__(self, config: ServerConfig, store: SessionStore | None = None):
        self.config = config
        data_dir = Path(config.data_dir)
        self.store = store or SessionStore(data_dir / "events.jsonl")
        self._spec_cache: dict[tuple[str, int], ExperimentSpec] = {}
        self._session_locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()

    def _lock_for(self, session_id: str) -> threading.Lock:
        with self._locks_guard:
            return self._session_locks.setdefault(session_id, threading.Lock())

    def _spec(self, kind: str, seed: int) -> ExperimentSpec:
        key = (kind, seed)
        if key not in self._spec_cache:
            self._spec_cache[key] = protocol.generate(kind, seed)
        return self._spec_cache[key]

    def _session(self, session_id: str) -> tuple[StoredSession, ExperimentSpec]:
        stored = self.store.get(session_id)
        spec = self._spec(stored.session.experiment, stored.session.seed)
        return stored, spec

    def _check_nonce(self, stored: StoredSession, nonce: str | None) -> None:
        if nonce != stored.nonce:
            raise NonceMismatchError("missing or stale session nonce")

    # -- operations

    def create_session(
        self, kind: str | None = None, participant_id: str | None = None
    ) -> dict:
        kind = kind or self.config.experiment
        if kind not in EXPERIMENT_KINDS:
            raise BadRequestError(f"unknown experiment kind: {kind!r}")
        if len(self.store) >= self.config.max_sessions:
            raise CapacityExceededError(
                f"session cap reached ({self.config.max_sessions})"
            )
        if self.config.seed_policy == "fixed":
            seed = self.config.seed
        else:
            seed = _derive_seed(self.config.seed, len(self.store))
        session_id = self.store.create_session(kind, seed, participant_id)
        stored, spec = self._session(session_id)
        return {
            "format_version": FORMAT_VERSION,
            "session_id": session_id,
            "nonce": stored.nonce,
            "experiment": kind,
            "next": next_payload(spec, stored.session, session_id),
        }

    def next_item(self, session_id: str, nonce: str | None) -> dict:
        with self._lock_for(session_id):
            stored, spec = self._session(session_id)
            self._check_nonce(stored, nonce)
            return next_payload(spec, stored.session, session_id)

    def submit_response(
        self,
        session_id: str,
        item_id: str,
        symbols: Sequence[str],
        nonce: str | None,
    ) -> dict:
        with self._lock_for(session_id):
            stored, spec = self._session(session_id)
            self._check_nonce(stored, nonce)
            session = stored.session
            pending = pending_state(spec, session.records)
            if pending.phase == "done":
                raise OutOfOrderError("session already complete")
            expected_id = (
                PRACTICE_ITEM_ID
                if pending.phase == "instructions"
                else pending.item.item_id
            )
            if item_id != expected_id:
                raise OutOfOrderError(
                    f"expected a response for {expected_id}, got {item_id}"
                )
            if pending.phase == "instructions":
                pool = _practice_pool(spec)
                target = practice_target(spec)
            else:
                pool = pending.item.pool
                target = pending.item.target
            by_id = {c.id: c for c in pool}
            if not symbols:
                raise BadRequestError("response must not be empty")
            try:
                response = tuple(by_id[s] for s in symbols)
            except KeyError as err:
                raise BadRequestError(f"symbol not in pool: {err.args[0]!r}") from None

            record = ResponseRecord(
                item_id=item_id,
                phase=pending.phase,
                response=response,
                cycle=pending.cycle,
                timestamp=len(session.records),
            )
            # persisted (flushed) before the ack is built
            self.store.append_response(session_id, record)

            ack = {
                "format_version": FORMAT_VERSION,
                "session_id": session_id,
                "accepted": True,
                "phase": pending.phase,
                "feedback": None,
            }
            if pending.phase in ("instructions", "study-quiz"):
                ack["feedback"] = {
                    "correct": response == target,
                    "expected": [color_to_json(c) for c in target],
                }
            return ack

    def submit_survey(self, session_id: str, external_aid, nonce: str | None) -> dict:
        if not isinstance(external_aid, bool):
            raise BadRequestError("external_aid must be a boolean")
        with self._lock_for(session_id):
            stored, _ = self._session(session_id)
            self._check_nonce(stored, nonce)
            if "external_aid" in stored.session.meta:
                raise OutOfOrderError("survey already submitted")
            self.store.set_meta(session_id, "external_aid", external_aid)
            return {
                "format_version": FORMAT_VERSION,
                "session_id": session_id,
                "accepted": True,
            }

    def export(self, kind: str | None = None) -> dict:
        if kind is not None and kind not in EXPERIMENT_KINDS:
            raise BadRequestError(f"unknown experiment kind: {kind!r}")
        return self.store.export(kind)


# ---------------------------------------------------------------------------
# HTTP layer


_PLACEHOLDER = """<!doctype html>
<html><head><title>daxlab</title></head>
<body><h1>daxlab experiment service</h1>
<p>No UI bundle is configured. Point static_dir at a built frontend,
or use the JSON API under /api/.</p></body></html>"""


def create_app(config: ServerConfig, store: Optional[SessionStore] = None):
    service = ExperimentService(config, store)
    app = FastAPI(title="daxlab", docs_url=None, redoc_url=None)
    app.state.service = service

    @app.exception_handler(ServiceError)
    async def _service_error(request: Request, exc: ServiceError):
        return JSONResponse(
            status_code=exc.status,
            content={"error": exc.code, "detail": exc.detail},
        )

    def _json(payload: dict) -> Response:
        # canonical encoding keeps exports byte-stable
        return Response(
            content=jsonio.dumps(payload), media_type="application/json"
        )

    @app.post("/api/session")
    async def create_session(request: Request):
        try:
            body = await request.json()
        except json.JSONDecodeError:
            raise BadRequestError("request body must be a JSON object")
        if not isinstance(body, dict):
            raise BadRequestError("request body must be a JSON object")
        kind = body.get("kind")
        if kind is not None and not isinstance(kind, str):
            raise BadRequestError("kind must be a string")
        participant = body.get("participant_id")
        if participant is not None and not isinstance(participant, str):
            raise BadRequestError("participant_id must be a string")
        return _json(service.create_session(kind, participant))

    @app.get("/api/session/{session_id}/next")
    async def next_item(session_id: str, nonce: str | None = None):
        return _json(service.next_item(session_id, nonce))

    @app.post("/api/session/{session_id}/response")
    async def submit_response(session_id: str, request: Request):
        try:
            body = await request.json()
        except json.JSONDecodeError:
            raise BadRequestError("request body must be a JSON object")
        if not isinstance(body, dict):
            raise BadRequestError("request body must be a JSON object")
        item_id = body.get("item_id")
        symbols = body.get("symbols")
        if not isinstance(item_id, str):
            raise BadRequestError("item_id must be a string")
        if not isinstance(symbols, list) or not all(
            isinstance(s, str) for s in symbols
        ):
            raise BadRequestError("symbols must be a list of symbol ids")
        return _json(
            service.submit_response(
                session_id, item_id, symbols, body.get("nonce")
            )
        )

    @app.post("/api/session/{session_id}/survey")
    async def submit_survey(session_id: str, request: Request):
        try:
            body = await request.json()
        except json.JSONDecodeError:
            raise BadRequestError("request body must be a JSON object")
        if not isinstance(body, dict):
            raise BadRequestError("request body must be a JSON object")
        return _json(
            service.submit_survey(
                session_id, body.get("external_aid"), body.get("nonce")
            )
        )

    @app.get("/api/export")
    async def export(kind: str | None = None):
        return _json(service.export(kind))

    static = config.static_dir
    if static and Path(static).is_dir():
        app.mount("/", StaticFiles(directory=static, html=True), name="ui")
    else:

        @app.get("/", response_class=HTMLResponse)
        async def index():
            return _PLACEHOLDER

    return app


def run_server(config: ServerConfig) -> None:  # pragma: no cover - wraps uvicorn
    import uvicorn

    uvicorn.run(create_app(config), host=config.host, port=config.port)
