"""HTTP service exposing a campaign to rating clients.

State is event-sourced: the campaign directory holds ``events.jsonl`` plus
the clip WAVs; loading replays the ledger and every mutation appends to it.
All mutations run under one lock per campaign (single writer), reads are
lock-free snapshots, audio serving is stateless.

Worker identity is an opaque token; the session documents never reveal
which items are gold or trapping, and audio is only served to workers whose
sessions reference the clip.
"""

from __future__ import annotations

import os
import re
import threading
from pathlib import Path
from typing import Dict, Optional

from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse

from . import analysis
from .campaign import Campaign, Phase, Session
from .errors import (
    ConflictError,
    ExcludedWorkerError,
    IncompleteSubmissionError,
    InvalidArgumentError,
    NoWorkError,
    NotFoundError,
    P808Error,
)
from .eventlog import EventLog, read_events
from .localization import render_instruction

EVENTS_FILE = "events.jsonl"
CLIPS_DIR = "clips"


class CampaignStore:
    """One campaign directory: ledger, clip audio, and the live engine."""

    def __init__(self, directory, clock=None, fsync: bool = False):
        self.directory = Path(directory)
        self.events_path = self.directory / EVENTS_FILE
        if not self.events_path.exists():
            raise NotFoundError(f"no campaign ledger at {self.events_path}")
        records = read_events(self.events_path)
        self._log = EventLog(self.events_path, fsync=fsync)
        self.campaign = Campaign.from_events(records, sink=self._log.append, clock=clock)
        self.lock = threading.Lock()

    @classmethod
    def initialize(cls, directory, create_fn, clock=None, fsync: bool = False) -> "CampaignStore":
        """Create a new campaign dir; ``create_fn(sink, clock)`` builds the campaign."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        events_path = directory / EVENTS_FILE
        if events_path.exists():
            raise ConflictError(f"campaign already exists at {events_path}")
        with EventLog(events_path, fsync=fsync) as log:
            create_fn(log.append, clock)
        return cls(directory, clock=clock, fsync=fsync)

    def audio_path(self, clip_id: str) -> Path:
        clip = self.campaign.clips.get(clip_id)
        if clip is None or not clip.path:
            raise NotFoundError(f"no audio for clip {clip_id!r}")
        path = Path(clip.path)
        if not path.is_absolute():
            path = self.directory / path
        if not path.exists():
            raise NotFoundError(f"audio file missing for clip {clip_id!r}")
        return path

    def close(self) -> None:
        self._log.close()


def session_document(campaign: Campaign, session: Session) -> dict:
    """The worker-facing session payload; roles stay server-side."""
    catalog = campaign.catalog
    assert catalog is not None
    phase = session.phase
    strings: Dict[str, str] = {
        "rules": render_instruction(catalog, "session.rules"),
        "submit": render_instruction(catalog, "session.submit"),
    }
    if phase is Phase.QUALIFICATION:
        strings["intro"] = render_instruction(catalog, "qualification.intro")
        strings["hearing"] = render_instruction(catalog, "qualification.hearing.question")
        strings["attestation"] = render_instruction(catalog, "qualification.fluency.attestation")
        strings["comprehension"] = render_instruction(
            catalog, "qualification.comprehension.instructions")
        strings["bw"] = render_instruction(catalog, "qualification.bandwidth.instructions")
    elif phase is Phase.SETUP:
        strings["intro"] = render_instruction(catalog, "setup.intro")
        strings["level"] = render_instruction(catalog, "setup.level.instructions")
        strings["binaural"] = render_instruction(catalog, "setup.binaural.instructions")
        strings["comparison"] = render_instruction(catalog, "setup.comparison.instructions")
    elif phase is Phase.TRAINING:
        strings["intro"] = render_instruction(catalog, "training.intro")
        strings["question"] = render_instruction(catalog, "rating.question")
    else:
        strings["intro"] = render_instruction(catalog, "rating.intro")
        strings["question"] = render_instruction(catalog, "rating.question")
    scale = [
        {"value": label.value, "term": label.term} for label in catalog.labels()
    ]
    items = []
    for item in session.items:
        items.append({
            "index": item.position,
            "type": item.kind,
            "audio": [f"/audio/{cid}" for cid in item.clip_ids],
        })
    return {
        "kind": "session",
        "phase": phase.value,
        "session_id": session.id,
        "campaign_id": campaign.campaign_id,
        "language": catalog.language,
        "strings": strings,
        "scale": scale,
        "items": items,
        "submit_url": f"/api/session/{session.id}/answers",
    }


_RANGE_RE = re.compile(r"bytes=(\d*)-(\d*)$")


def _range_slice(header: Optional[str], size: int):
    if not header:
        return None
    match = _RANGE_RE.match(header.strip())
    if not match:
        return None
    start_text, end_text = match.groups()
    if start_text == "" and end_text == "":
        return None
    if start_text == "":
        length = int(end_text)
        start = max(0, size - length)
        end = size - 1
    else:
        start = int(start_text)
        end = int(end_text) if end_text else size - 1
    end = min(end, size - 1)
    if start > end or start >= size:
        return "unsatisfiable"
    return start, end


def create_app(store: CampaignStore, ui_dir=None) -> FastAPI:
    app = FastAPI(title="p808kit session service")
    campaign = store.campaign

    def error_response(exc: P808Error) -> JSONResponse:
        mapping = [
            (NotFoundError, 404),
            (ExcludedWorkerError, 409),
            (ConflictError, 409),
            (IncompleteSubmissionError, 422),
            (InvalidArgumentError, 422),
        ]
        status = next((code for etype, code in mapping if isinstance(exc, etype)), 400)
        return JSONResponse({"error": str(exc)}, status_code=status)

    @app.get("/api/campaign")
    def discover():
        catalog = campaign.catalog
        assert catalog is not None
        return {
            "campaign_id": campaign.campaign_id,
            "language": catalog.language,
            "strings": {
                "complete": render_instruction(catalog, "session.complete"),
                "excluded": render_instruction(catalog, "session.excluded"),
            },
        }

    @app.get("/api/campaign/{campaign_id}/next-session")
    def next_session(campaign_id: str, worker: str):
        if campaign_id != campaign.campaign_id:
            return JSONResponse({"error": "unknown campaign"}, status_code=404)
        if not worker:
            return JSONResponse({"error": "worker token required"}, status_code=422)
        with store.lock:
            try:
                session = campaign.open_session(worker)
                if session is None:
                    phase = campaign.next_phase(worker)
                    if phase is Phase.RATING:
                        session = campaign.assemble_session(worker)
                    else:
                        session = campaign.assemble_phase_session(worker, phase)
            except NoWorkError:
                return Response(status_code=204)
            except ExcludedWorkerError as exc:
                assert campaign.catalog is not None
                return JSONResponse(
                    {"error": str(exc),
                     "message": render_instruction(campaign.catalog, "session.excluded")},
                    status_code=409,
                )
            except P808Error as exc:
                return error_response(exc)
            return session_document(campaign, session)

    @app.post("/api/session/{session_id}/answers")
    async def submit_answers(session_id: str, request: Request):
        body = await request.json()
        worker = body.get("worker")
        session = campaign.sessions.get(session_id)
        if session is None:
            return JSONResponse({"error": "unknown session"}, status_code=404)
        if worker != session.worker_id:
            return JSONResponse({"error": "session belongs to another worker"},
                                status_code=403)
        raw_answers = body.get("answers")
        if not isinstance(raw_answers, list):
            return JSONResponse({"error": "answers must be a list"}, status_code=422)
        try:
            answers = {int(a["index"]): a["value"] for a in raw_answers}
        except (TypeError, KeyError, ValueError):
            return JSONResponse({"error": "each answer needs index and value"},
                                status_code=422)
        playback = body.get("playback")
        if playback is not None:
            playback = {int(k): float(v) for k, v in playback.items()}
        with store.lock:
            try:
                campaign.submit_answers(session_id, answers, playback)
            except P808Error as exc:
                return error_response(exc)
        return {"status": "submitted", "session_id": session_id,
                "telemetry": "absent" if playback is None else "present"}

    @app.get("/api/campaign/{campaign_id}/status")
    def status(campaign_id: str):
        if campaign_id != campaign.campaign_id:
            return JSONResponse({"error": "unknown campaign"}, status_code=404)
        return campaign.status()

    @app.post("/api/campaign/{campaign_id}/analyze")
    def analyze(campaign_id: str):
        if campaign_id != campaign.campaign_id:
            return JSONResponse({"error": "unknown campaign"}, status_code=404)
        with store.lock:
            decisions = analysis.run_analysis(campaign)
        return {
            "decided": len(decisions),
            "round": campaign.analysis_round,
            "decisions": [
                {"session_id": sid, "decision": "accepted" if d.accepted else "rejected",
                 "reasons": list(d.reasons)}
                for sid, d in decisions
            ],
        }

    def _authorized(clip_id: str, worker: Optional[str]) -> bool:
        if not worker:
            return False
        for session in campaign.sessions.values():
            if session.worker_id != worker:
                continue
            for item in session.items:
                if clip_id in item.clip_ids:
                    return True
        return False

    @app.api_route("/audio/{clip_id}", methods=["GET", "HEAD"])
    def audio(clip_id: str, request: Request, worker: Optional[str] = None):
        if clip_id not in campaign.clips:
            return JSONResponse({"error": "unknown clip"}, status_code=404)
        if not _authorized(clip_id, worker):
            return JSONResponse({"error": "clip not in any of your sessions"},
                                status_code=403)
        try:
            path = store.audio_path(clip_id)
        except NotFoundError as exc:
            return JSONResponse({"error": str(exc)}, status_code=404)
        size = os.path.getsize(path)
        headers = {"Accept-Ranges": "bytes", "Content-Type": "audio/wav"}
        if request.method == "HEAD":
            headers["Content-Length"] = str(size)
            return Response(status_code=200, headers=headers)
        requested = _range_slice(request.headers.get("range"), size)
        if requested == "unsatisfiable":
            headers["Content-Range"] = f"bytes */{size}"
            return Response(status_code=416, headers=headers)
        with open(path, "rb") as fh:
            if requested is None:
                data = fh.read()
                return Response(content=data, media_type="audio/wav", headers=headers)
            start, end = requested
            fh.seek(start)
            data = fh.read(end - start + 1)
        headers["Content-Range"] = f"bytes {start}-{end}/{size}"
        return Response(content=data, status_code=206, media_type="audio/wav",
                        headers=headers)

    if ui_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app


def serve(campaign_dir, host: str = "127.0.0.1", port: int = 8808, ui_dir=None) -> None:
    """Blocking entry point used by the CLI."""
    import uvicorn

    store = CampaignStore(campaign_dir)
    app = create_app(store, ui_dir=ui_dir)
    uvicorn.run(app, host=host, port=port, log_level="info")
