"""HTTP API for the interactive problem editor.

Browse and edit corpus instances, execute models against a chosen solver,
and talk to a chat assistant that carries the active problem as context.
Chat credentials live in session memory only and are never written to disk.
"""

from __future__ import annotations

import os
import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

from fastapi import FastAPI, HTTPException
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from . import corpus as corpus_mod
from . import evaluator
from .corpus import Corpus, CorpusError, cross_validate
from .dzn import ArrayValue, BoolScalar, FloatScalar, IntScalar, SetOfInt, StringScalar
from .gateway import (
    AuthError,
    Gateway,
    GatewayConfig,
    LiveTransport,
    Transport,
    TransportError,
)
from .harness import SolverConfig, ToolchainMissing, solve

DEFAULT_CHAT_ENDPOINT_ENV = "ZINCBENCH_CHAT_ENDPOINT"

TransportFactory = Callable[[Optional[str]], Transport]


def _plain(value):
    """dzn Value -> JSON-friendly Python."""
    if isinstance(value, (IntScalar, FloatScalar, BoolScalar, StringScalar)):
        return value.value
    if isinstance(value, SetOfInt):
        return sorted(value.members)
    if isinstance(value, ArrayValue):
        return {
            "dims": [list(d) for d in value.dims],
            "elements": [_plain(e) for e in value.elements],
        }
    return value


def _solve_result_json(result) -> dict:
    return {
        "status": result.status.value,
        "objective": result.objective_value,
        "assignments": {k: _plain(v) for k, v in result.assignments.items()},
        "error": (
            {"category": result.error.category.value, "text": result.error.text}
            if result.error
            else None
        ),
        "wall_seconds": round(result.wall_seconds, 3),
        "stdout": result.stdout,
        "stderr": result.stderr,
    }


class ExecuteRequest(BaseModel):
    solver: str = "gecode"
    timeout: float = Field(default=60.0, ge=1.0, le=600.0)
    model: Optional[str] = None
    data: Optional[str] = None
    save: bool = False


class SessionCreate(BaseModel):
    credential: Optional[str] = None
    instance_id: Optional[str] = None


class ChatRequest(BaseModel):
    message: str
    instance_id: Optional[str] = None
    model_override: Optional[str] = None


@dataclass
class Session:
    id: str
    credential: Optional[str] = None  # memory only
    instance_id: Optional[str] = None
    history: list[dict] = field(default_factory=list)  # {"role", "content"}
    lock: threading.Lock = field(default_factory=threading.Lock)


CHAT_PREAMBLE = (
    "You are assisting with the curation of a constraint-modeling benchmark "
    "instance. Answer questions about the problem, suggest fixes to the "
    "MiniZinc model or data, and propose alternative instances when asked. "
    "Suggest text only; the human applies changes through the editor."
)


def build_chat_prompt(
    instance: Optional[corpus_mod.ProblemInstance],
    history: list[dict],
    message: str,
    model_override: Optional[str] = None,
) -> str:
    parts = [CHAT_PREAMBLE]
    if instance is not None:
        model_text = (
            model_override
            if model_override is not None
            else (instance.ground_truth_model or "")
        )
        parts.append(
            "Problem description:\n"
            + instance.input.description
            + "\n\nData:\n"
            + (instance.data_text or "(none)")
            + "\n\nModel code:\n"
            + (model_text or "(none)")
        )
    for turn in history:
        parts.append(f"{turn['role'].capitalize()}: {turn['content']}")
    parts.append(f"User: {message}")
    return "\n\n".join(parts)


def default_transport_factory(credential: Optional[str]) -> Transport:
    endpoint = os.environ.get(
        DEFAULT_CHAT_ENDPOINT_ENV, "https://api.openai.com/v1/chat/completions"
    )
    return LiveTransport(endpoint, api_key=credential)


def create_app(
    corpus_root: Path,
    solver_config: Optional[SolverConfig] = None,
    ui_dist: Optional[Path] = None,
    transport_factory: Optional[TransportFactory] = None,
    chat_config: Optional[GatewayConfig] = None,
) -> FastAPI:
    corpus = Corpus.open(Path(corpus_root))
    base_solver = solver_config or SolverConfig()
    make_transport = transport_factory or default_transport_factory
    chat_cfg = chat_config or GatewayConfig()

    app = FastAPI(title="zincbench editor service")
    sessions: dict[str, Session] = {}
    sessions_lock = threading.Lock()
    instance_locks: dict[str, threading.Lock] = {}
    instance_locks_guard = threading.Lock()

    def lock_for(instance_id: str) -> threading.Lock:
        with instance_locks_guard:
            return instance_locks.setdefault(instance_id, threading.Lock())

    def load_or_404(instance_id: str) -> corpus_mod.ProblemInstance:
        if instance_id not in corpus.ids():
            raise HTTPException(status_code=404, detail=f"no instance {instance_id!r}")
        try:
            return corpus.load(instance_id)
        except CorpusError as e:
            raise HTTPException(status_code=500, detail=str(e))

    @app.get("/health")
    def health():
        try:
            SolverConfig().resolve_executable()
            toolchain = True
        except ToolchainMissing:
            toolchain = False
        return {"status": "ok", "toolchain": toolchain, "instances": len(corpus.ids())}

    @app.get("/problems")
    def list_problems(
        source: Optional[str] = None,
        domain: Optional[str] = None,
        objective: Optional[str] = None,
    ):
        rows = []
        for instance_id in sorted(corpus.ids()):
            inst = corpus.load(instance_id)
            meta = inst.input.metadata
            if domain is not None and meta.domain != domain:
                continue
            if objective is not None and meta.objective != objective:
                continue
            if source is not None and evaluator.source_of(inst) != source:
                continue
            rows.append(
                {
                    "id": instance_id,
                    "title": meta.title,
                    "domain": meta.domain,
                    "objective": meta.objective,
                    "verified": inst.verified,
                }
            )
        return rows

    @app.get("/problems/{instance_id}")
    def get_problem(instance_id: str):
        inst = load_or_404(instance_id)
        return corpus_mod.instance_to_json(inst)

    @app.put("/problems/{instance_id}")
    def put_problem(instance_id: str, body: dict):
        try:
            inst = corpus_mod.instance_from_json(body)
        except CorpusError as e:
            raise HTTPException(status_code=422, detail=str(e))
        if inst.identifier != instance_id:
            raise HTTPException(
                status_code=422,
                detail=f"body identifier {inst.identifier!r} does not match URL",
            )
        findings = cross_validate(inst)
        blocking = [f for f in findings if f.kind != "unused-binding"]
        if blocking:
            return JSONResponse(
                status_code=422,
                content={
                    "detail": "validation failed",
                    "findings": [
                        {"kind": f.kind, "symbol": f.symbol, "detail": f.detail}
                        for f in findings
                    ],
                },
            )
        with lock_for(instance_id):
            corpus.save(inst)
        return {
            "saved": True,
            "findings": [
                {"kind": f.kind, "symbol": f.symbol, "detail": f.detail}
                for f in findings
            ],
        }

    @app.post("/problems/{instance_id}/execute")
    def execute_problem(instance_id: str, req: ExecuteRequest):
        inst = load_or_404(instance_id)
        model_text = req.model if req.model is not None else inst.ground_truth_model
        if not model_text or not model_text.strip():
            raise HTTPException(status_code=422, detail="no model text to execute")
        data_text = req.data if req.data is not None else inst.data_text
        config = SolverConfig(
            solver=req.solver,
            time_limit=req.timeout,
            executable=base_solver.executable,
        )
        try:
            result = solve(model_text, data_text, config)
        except ToolchainMissing as e:
            raise HTTPException(status_code=503, detail=str(e))
        outcome = evaluator.judge_instance(result, inst, strategy="editor", solver=config)
        if req.save and (req.model is not None or req.data is not None):
            with lock_for(instance_id):
                updated = corpus_mod.ProblemInstance(
                    input=inst.input,
                    data_text=data_text,
                    ground_truth_model=model_text,
                    expected_output=inst.expected_output,
                    verified=inst.verified,
                )
                corpus.save(updated)
        return {
            "result": _solve_result_json(result),
            "verdict": "match" if outcome.solution_correct else "mismatch",
            "executed": outcome.executed,
            "detail": {
                "kind": outcome.detail.kind,
                "expected_objective": outcome.detail.expected_objective,
                "got_objective": outcome.detail.got_objective,
                "verifier_verdict": outcome.detail.verifier_verdict,
                "note": outcome.detail.note,
            },
            "saved": bool(req.save and (req.model is not None or req.data is not None)),
        }

    @app.post("/sessions")
    def create_session(body: SessionCreate):
        session = Session(
            id=uuid.uuid4().hex,
            credential=body.credential,
            instance_id=body.instance_id,
        )
        with sessions_lock:
            sessions[session.id] = session
        return {"session_id": session.id, "instance_id": session.instance_id}

    @app.post("/sessions/{session_id}/chat")
    def chat(session_id: str, req: ChatRequest):
        with sessions_lock:
            session = sessions.get(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail="no such session")
        if not session.credential:
            raise HTTPException(
                status_code=401, detail="no credential: supply one when opening the session"
            )
        with session.lock:
            if req.instance_id is not None:
                session.instance_id = req.instance_id
            instance = None
            if session.instance_id:
                instance = load_or_404(session.instance_id)
            prompt = build_chat_prompt(
                instance, session.history, req.message, req.model_override
            )
            gateway = Gateway(make_transport(session.credential), chat_cfg)
            run = gateway.start_run(budget=1)
            try:
                record = run.complete("chat", prompt)
            except AuthError as e:
                raise HTTPException(status_code=401, detail=str(e))
            except TransportError as e:
                raise HTTPException(
                    status_code=502,
                    detail=f"assistant unavailable, try again: {e}",
                )
            session.history.append({"role": "user", "content": req.message})
            session.history.append({"role": "assistant", "content": record.response})
            return {
                "reply": record.response,
                "instance_id": session.instance_id,
                "turns": len(session.history),
            }

    if ui_dist is not None and Path(ui_dist).is_dir():
        app.mount("/", StaticFiles(directory=str(ui_dist), html=True), name="ui")

    return app
