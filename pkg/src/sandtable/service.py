"""HTTP gateway over a run directory, for human players and spectators.

The service owns no state: every request is answered from the files the
engine reads and writes, so it can be restarted at will and any client
may bypass it and work with the files directly.  JSON in/out, UTF-8,
no authentication (a LAN tool; put it behind a proxy for anything else).
"""

from __future__ import annotations

import asyncio
import json
import logging
from pathlib import Path

from fastapi import FastAPI, HTTPException, Query
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .agents import CONTROL_AGENT_ID
from .errors import MailboxProtocolError, ValidationFailure
from .mailbox import MailboxStore
from .model import NodeKind, Operator, Scenario, load_scenario, load_transcript

logger = logging.getLogger(__name__)

LONG_POLL_SECONDS = 25.0
_POLL_INTERVAL = 0.2


class ResponseBody(BaseModel):
    seq: int
    text: str


def _load_run_scenario(run_dir: Path) -> Scenario | None:
    path = run_dir / "scenario.json"
    if not path.exists():
        return None
    return load_scenario(path)


def _human_agents(run_dir: Path) -> list[dict]:
    agents: list[dict] = []
    scenario = _load_run_scenario(run_dir)
    if scenario is not None:
        for node in scenario.roster:
            if node.kind is NodeKind.PLAYER and node.operator is Operator.HUMAN:
                agents.append({"id": node.id, "kind": "player"})
    meta_path = run_dir / "meta.json"
    if meta_path.exists():
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
        if meta.get("control_operator") == "human":
            agents.append({"id": CONTROL_AGENT_ID, "kind": "control"})
    return agents


def create_app(run_dir: str | Path, console_dir: str | Path | None = None) -> FastAPI:
    run_dir = Path(run_dir)
    mailbox = MailboxStore(run_dir / "mailbox")
    app = FastAPI(title="sandtable gateway")

    @app.get("/api/agents")
    def get_agents():
        return {"agents": _human_agents(run_dir)}

    @app.get("/api/run")
    def get_run():
        meta_path = run_dir / "meta.json"
        if not meta_path.exists():
            raise HTTPException(status_code=404, detail="run has not started")
        return json.loads(meta_path.read_text(encoding="utf-8"))

    @app.get("/api/agents/{agent_id}/prompt")
    async def get_prompt(agent_id: str, wait: float = Query(LONG_POLL_SECONDS, ge=0, le=60)):
        # Long-poll: hold the request until a prompt shows up or the
        # window closes, so clients don't busy-poll across moves.
        deadline = asyncio.get_event_loop().time() + wait
        while True:
            pending = mailbox.pending(agent_id)
            if pending is not None:
                seq, prompt = pending
                return {"seq": seq, "prompt": prompt}
            if asyncio.get_event_loop().time() >= deadline:
                raise HTTPException(status_code=404, detail="no pending prompt")
            await asyncio.sleep(_POLL_INTERVAL)

    @app.post("/api/agents/{agent_id}/response", status_code=204)
    def post_response(agent_id: str, body: ResponseBody):
        try:
            mailbox.submit_response(agent_id, body.seq, body.text)
        except MailboxProtocolError as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        except ValidationFailure as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return JSONResponse(status_code=204, content=None)

    @app.get("/api/transcript")
    def get_transcript(agent: str | None = None):
        path = run_dir / "transcript.json"
        if not path.exists():
            return {"format_version": 1, "entries": []}
        history = load_transcript(path)
        if agent is not None:
            history = history.visible_to(agent)
        return history.to_json()

    if console_dir is not None:
        app.mount("/", StaticFiles(directory=str(console_dir), html=True), name="console")

    return app


def serve(
    run_dir: str | Path,
    host: str = "127.0.0.1",
    port: int = 8470,
    console_dir: str | Path | None = None,
) -> None:
    """Run the gateway until interrupted."""
    import uvicorn

    app = create_app(run_dir, console_dir=console_dir)
    uvicorn.run(app, host=host, port=port, log_level="info")
