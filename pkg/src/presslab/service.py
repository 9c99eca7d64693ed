"""HTTP facade: scene access, single-flight query runs, and SSE events.

State is plain files under a data directory: one append-only JSON-lines
event log per session plus one JSON file per finished run. Replaying a
session's log reconstructs its state, which is also what the web UI does
client-side with the same stream.
"""

from __future__ import annotations

import base64
import hashlib
import io
import json
import threading
import time
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, StreamingResponse

from .pipeline import run_query
from .scene import Scene, generate_scene, render
from .vision import GSAM_LIKE, DetectorProfile

EVENT_KINDS = (
    "scene",
    "run-accepted",
    "stage-started",
    "stage-finished",
    "object-result",
    "explanation",
    "run-finished",
)


def _digest(payload: dict) -> str:
    return hashlib.sha256(
        json.dumps(payload, sort_keys=True).encode()
    ).hexdigest()[:16]


def _scene_png_base64(scene: Scene) -> str:
    from PIL import Image

    frame = render(scene)
    buf = io.BytesIO()
    Image.fromarray(frame.color).save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode()


class Session:
    """One scene + one serialized query lane + one event log."""

    def __init__(self, name: str, data_dir: Path, seed: int):
        self.name = name
        self.seed = seed
        self.lock = threading.Lock()
        self.busy = False
        self.seq = 0
        self.events = []
        self.runs = {}
        self.run_order = []
        self.idempotency = {}
        self.randomize_count = 0
        self.scene = None
        self.dir = data_dir / "sessions" / name
        self.dir.mkdir(parents=True, exist_ok=True)
        self.log_path = self.dir / "events.jsonl"

    def append_event(self, kind: str, payload: dict) -> dict:
        with self.lock:
            self.seq += 1
            envelope = {
                "session": self.name,
                "seq": self.seq,
                "kind": kind,
                "ts": time.time(),
                "payload": payload,
                "digest": _digest(payload),
            }
            self.events.append(envelope)
            with self.log_path.open("a") as f:
                f.write(json.dumps(envelope, sort_keys=True) + "\n")
            return envelope

    def set_scene(self, scene: Scene, seed: int):
        self.scene = scene
        self.append_event("scene", {"scene": scene.to_json(), "seed": seed})

    def snapshot(self) -> dict:
        """State summary; replay_session_state must reproduce this."""
        return {
            "scene": self.scene.to_json() if self.scene else None,
            "run_ids": list(self.run_order),
            "last_seq": self.seq,
            "busy": self.busy,
        }


def replay_session_state(log_path) -> dict:
    """Rebuild a session snapshot purely from its event log."""
    scene_json = None
    run_ids = []
    last_seq = 0
    open_runs = set()
    for line in Path(log_path).read_text().splitlines():
        envelope = json.loads(line)
        if envelope["seq"] <= last_seq:
            raise ValueError("event log sequence numbers must strictly increase")
        last_seq = envelope["seq"]
        kind = envelope["kind"]
        if kind == "scene":
            scene_json = envelope["payload"]["scene"]
        elif kind == "run-accepted":
            run_ids.append(envelope["payload"]["run_id"])
            open_runs.add(envelope["payload"]["run_id"])
        elif kind == "run-finished":
            open_runs.discard(envelope["payload"]["run_id"])
    return {
        "scene": scene_json,
        "run_ids": run_ids,
        "last_seq": last_seq,
        "busy": bool(open_runs),
    }


class ServiceState:
    def __init__(self, model, t: int, profile: DetectorProfile, data_dir,
                 seed: int = 0, depth_noise_sigma: float = 2.0, run_in_thread: bool = True):
        self.model = model
        self.t = t
        self.profile = profile
        self.seed = seed
        self.depth_noise_sigma = depth_noise_sigma
        self.run_in_thread = run_in_thread
        self.data_dir = Path(data_dir)
        self.sessions = {}
        self.sessions_lock = threading.Lock()

    def session(self, name: str) -> Session:
        with self.sessions_lock:
            if name not in self.sessions:
                s = Session(name, self.data_dir, self.seed)
                self.sessions[name] = s
                s.set_scene(generate_scene(self.seed), self.seed)
            return self.sessions[name]

    def execute(self, session: Session, run_id: str, text: str):
        try:
            record = run_query(
                session.scene,
                text,
                self.model,
                self.t,
                profile=self.profile,
                seed=self.seed + len(session.run_order),
                depth_noise_sigma=self.depth_noise_sigma,
                emit=lambda e: session.append_event(e.pop("kind"), e),
            )
            session.runs[run_id] = record
            run_path = session.dir / "runs"
            run_path.mkdir(exist_ok=True)
            (run_path / f"{run_id}.json").write_text(
                json.dumps(record.to_json(), sort_keys=True)
            )
            session.append_event(
                "run-finished", {"run_id": run_id, "digest": _digest(record.to_json())}
            )
        finally:
            session.busy = False


def build_app(
    model,
    t: int = 2,
    profile: DetectorProfile = GSAM_LIKE,
    data_dir=None,
    seed: int = 0,
    depth_noise_sigma: float = 2.0,
    run_in_thread: bool = True,
) -> FastAPI:
    """Wire the service; `run_in_thread=False` executes queries inline
    (deterministic ordering for tests)."""
    if data_dir is None:
        import tempfile

        data_dir = tempfile.mkdtemp(prefix="presslab-")
    state = ServiceState(model, t, profile, data_dir, seed, depth_noise_sigma, run_in_thread)
    app = FastAPI(title="presslab", version="1")
    app.state.presslab = state

    # The web client is served from its own static origin.
    from fastapi.middleware.cors import CORSMiddleware

    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["GET", "POST"],
        allow_headers=["*"],
    )

    def _bad_request(message):
        return JSONResponse({"error": message}, status_code=400)

    async def _json_body(request: Request):
        raw = await request.body()
        if not raw:
            return {}
        try:
            payload = json.loads(raw)
        except ValueError:
            return None
        return payload if isinstance(payload, dict) else None

    @app.get("/v1/health")
    def health():
        return {"status": "ok", "profile": state.profile.name, "t": state.t}

    @app.get("/v1/scene")
    def get_scene(session: str = "default"):
        s = state.session(session)
        return {
            "session": session,
            "scene": s.scene.to_json(),
            "image_png_base64": _scene_png_base64(s.scene),
        }

    @app.post("/v1/scene/randomize")
    async def randomize_scene(request: Request, session: str = "default"):
        payload = await _json_body(request)
        if payload is None:
            return _bad_request("malformed JSON body")
        s = state.session(session)
        key = request.headers.get("Idempotency-Key")
        if key and key in s.idempotency:
            return s.idempotency[key]
        if s.busy:
            return JSONResponse(
                {"error": "a query is executing; scene is locked"}, status_code=409
            )
        if "seed" in payload:
            try:
                seed = int(payload["seed"])
            except (TypeError, ValueError):
                return _bad_request("seed must be an integer")
        else:
            seed = state.seed + 1000 * (s.randomize_count + 1)
        n = payload.get("n", "random")
        if n != "random":
            try:
                n = int(n)
            except (TypeError, ValueError):
                return _bad_request("n must be an integer")
            if not 1 <= n <= 6:
                return _bad_request("n must be in [1, 6]")
        s.randomize_count += 1
        s.set_scene(generate_scene(seed, n_objects=n), seed)
        response = {
            "session": session,
            "scene": s.scene.to_json(),
            "image_png_base64": _scene_png_base64(s.scene),
        }
        if key:
            s.idempotency[key] = response
        return response

    @app.post("/v1/query", status_code=202)
    async def post_query(request: Request, session: str = "default"):
        payload = await _json_body(request)
        if payload is None or "text" not in payload or not isinstance(payload["text"], str):
            return _bad_request("body must be JSON with a string 'text' field")
        s = state.session(session)
        key = request.headers.get("Idempotency-Key")
        with s.lock:
            if key and key in s.idempotency:
                return JSONResponse(s.idempotency[key], status_code=202)
            if s.busy:
                return JSONResponse(
                    {"error": "a query is already executing in this session"},
                    status_code=409,
                )
            s.busy = True
            run_id = f"run-{len(s.run_order) + 1:04d}"
            s.run_order.append(run_id)
        s.append_event("run-accepted", {"run_id": run_id, "text": payload["text"]})
        response = {"run_id": run_id, "session": session}
        if key:
            s.idempotency[key] = response
        if state.run_in_thread:
            threading.Thread(
                target=state.execute, args=(s, run_id, payload["text"]), daemon=True
            ).start()
        else:
            state.execute(s, run_id, payload["text"])
        return JSONResponse(response, status_code=202)

    @app.get("/v1/runs/{run_id}")
    def get_run(run_id: str, session: str = "default"):
        s = state.session(session)
        record = s.runs.get(run_id)
        if record is None:
            status = "running" if run_id in s.run_order else None
            if status == "running":
                return {"run_id": run_id, "status": "running"}
            return JSONResponse({"error": f"unknown run {run_id!r}"}, status_code=404)
        return {"run_id": run_id, "status": "finished", "record": record.to_json()}

    @app.get("/v1/events")
    async def events(
        request: Request, session: str = "default", idle_timeout_s: float = 30.0
    ):
        """SSE stream of session events from after Last-Event-ID.

        The stream closes after `idle_timeout_s` with no events and no query
        in flight; EventSource clients reconnect with Last-Event-ID and miss
        nothing. A finite default keeps abandoned connections from piling up.
        """
        s = state.session(session)
        last_id = request.headers.get("Last-Event-ID") or request.query_params.get(
            "last_event_id", "0"
        )
        try:
            start_after = int(last_id)
        except ValueError:
            start_after = 0
        idle_timeout = min(max(float(idle_timeout_s), 0.05), 3600.0)

        async def stream():
            import asyncio

            cursor = start_after
            idle = 0.0
            heartbeat = 0.0
            while True:
                batch = [e for e in s.events if e["seq"] > cursor]
                for envelope in batch:
                    cursor = envelope["seq"]
                    idle = 0.0
                    heartbeat = 0.0
                    yield (
                        f"id: {envelope['seq']}\n"
                        f"event: {envelope['kind']}\n"
                        f"data: {json.dumps(envelope, sort_keys=True)}\n\n"
                    )
                if await request.is_disconnected():
                    return
                if not batch:
                    idle += 0.05
                    heartbeat += 0.05
                    if not s.busy and idle >= idle_timeout:
                        return
                    if heartbeat >= 0.5:
                        # comment line keeps intermediaries from buffering
                        yield ": idle\n\n"
                        heartbeat = 0.0
                await asyncio.sleep(0.05)

        return StreamingResponse(stream(), media_type="text/event-stream")

    return app
