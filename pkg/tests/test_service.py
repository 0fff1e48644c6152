import json
import threading
import time

from fastapi.testclient import TestClient

from sandtable.mailbox import MailboxStore
from sandtable.model import (
    EntryKind,
    History,
    HistoryEntry,
    Operator,
    SYSTEM,
    Scenario,
    save_scenario,
    save_transcript,
)
from sandtable.service import create_app
from helpers import make_player


def run_dir_with(tmp_path, humans=("h1",), control_human=False):
    run_dir = tmp_path / "run"
    run_dir.mkdir()
    roster = [make_player(h, operator=Operator.HUMAN) for h in humans]
    roster.append(make_player("ai1"))
    scenario = Scenario(
        name="served",
        situation="Scene.",
        roster=tuple(roster),
        top_level_responders=tuple(n.id for n in roster),
    )
    save_scenario(scenario, run_dir / "scenario.json")
    meta = {
        "format_version": 1,
        "scenario": "served",
        "seed": 0,
        "status": "running",
        "control_operator": "human" if control_human else "ai",
    }
    (run_dir / "meta.json").write_text(json.dumps(meta))
    return run_dir


def test_agents_lists_human_operated_only(tmp_path):
    run_dir = run_dir_with(tmp_path, humans=("h1", "h2"))
    client = TestClient(create_app(run_dir))
    agents = client.get("/api/agents").json()["agents"]
    assert agents == [{"id": "h1", "kind": "player"}, {"id": "h2", "kind": "player"}]


def test_agents_includes_human_control(tmp_path):
    run_dir = run_dir_with(tmp_path, control_human=True)
    client = TestClient(create_app(run_dir))
    agents = client.get("/api/agents").json()["agents"]
    assert {"id": "control", "kind": "control"} in agents


def test_prompt_endpoint_404_when_none_pending(tmp_path):
    run_dir = run_dir_with(tmp_path)
    client = TestClient(create_app(run_dir))
    assert client.get("/api/agents/h1/prompt", params={"wait": 0}).status_code == 404


def test_prompt_endpoint_returns_pending(tmp_path):
    run_dir = run_dir_with(tmp_path)
    MailboxStore(run_dir / "mailbox").publish_prompt("h1", 0, "What do you do?")
    client = TestClient(create_app(run_dir))
    body = client.get("/api/agents/h1/prompt", params={"wait": 0}).json()
    assert body == {"seq": 0, "prompt": "What do you do?"}


def test_prompt_long_poll_catches_late_publish(tmp_path):
    run_dir = run_dir_with(tmp_path)
    mailbox = MailboxStore(run_dir / "mailbox")
    timer = threading.Timer(0.4, lambda: mailbox.publish_prompt("h1", 0, "late prompt"))
    timer.start()
    client = TestClient(create_app(run_dir))
    start = time.monotonic()
    response = client.get("/api/agents/h1/prompt", params={"wait": 5})
    elapsed = time.monotonic() - start
    timer.join()
    assert response.status_code == 200
    assert response.json()["prompt"] == "late prompt"
    assert elapsed < 5  # returned as soon as the prompt appeared


def test_submit_response_round_trip(tmp_path):
    run_dir = run_dir_with(tmp_path)
    mailbox = MailboxStore(run_dir / "mailbox")
    mailbox.publish_prompt("h1", 0, "q")
    client = TestClient(create_app(run_dir))
    response = client.post("/api/agents/h1/response", json={"seq": 0, "text": "my move"})
    assert response.status_code == 204
    assert mailbox.pending("h1") is None
    assert mailbox.response_text("h1", 0) == "my move"


def test_submit_stale_seq_is_409(tmp_path):
    run_dir = run_dir_with(tmp_path)
    mailbox = MailboxStore(run_dir / "mailbox")
    mailbox.publish_prompt("h1", 0, "q")
    mailbox.submit_response("h1", 0, "a")
    mailbox.publish_prompt("h1", 1, "q2")
    client = TestClient(create_app(run_dir))
    assert client.post("/api/agents/h1/response", json={"seq": 0, "text": "late"}).status_code == 409


def test_submit_without_pending_is_409(tmp_path):
    run_dir = run_dir_with(tmp_path)
    client = TestClient(create_app(run_dir))
    assert client.post("/api/agents/h1/response", json={"seq": 0, "text": "x"}).status_code == 409


def test_submit_empty_text_is_400(tmp_path):
    run_dir = run_dir_with(tmp_path)
    MailboxStore(run_dir / "mailbox").publish_prompt("h1", 0, "q")
    client = TestClient(create_app(run_dir))
    assert client.post("/api/agents/h1/response", json={"seq": 0, "text": "  "}).status_code == 400


def test_transcript_filtered_by_agent(tmp_path):
    run_dir = run_dir_with(tmp_path)
    history = History(
        (
            HistoryEntry(0, SYSTEM, EntryKind.SCENARIO, "Scene.", 0),
            HistoryEntry(1, "h1", EntryKind.PLAYER_RESPONSE, "h1 private", 1, frozenset({"h1"})),
            HistoryEntry(2, "ai1", EntryKind.PLAYER_RESPONSE, "ai1 private", 1, frozenset({"ai1"})),
        )
    )
    save_transcript(history, run_dir / "transcript.json")
    client = TestClient(create_app(run_dir))
    mine = client.get("/api/transcript", params={"agent": "h1"}).json()
    assert [e["text"] for e in mine["entries"]] == ["Scene.", "h1 private"]
    everything = client.get("/api/transcript").json()
    assert len(everything["entries"]) == 3


def test_transcript_empty_before_game_starts(tmp_path):
    run_dir = run_dir_with(tmp_path)
    client = TestClient(create_app(run_dir))
    assert client.get("/api/transcript").json() == {"format_version": 1, "entries": []}


def test_run_metadata_endpoint(tmp_path):
    run_dir = run_dir_with(tmp_path)
    client = TestClient(create_app(run_dir))
    assert client.get("/api/run").json()["scenario"] == "served"


def test_api_and_files_never_disagree(tmp_path):
    # A response written directly to the files is what the API reports.
    run_dir = run_dir_with(tmp_path)
    mailbox = MailboxStore(run_dir / "mailbox")
    mailbox.publish_prompt("h1", 0, "q")
    (run_dir / "mailbox" / "h1" / "response-0.txt").write_text("by hand", encoding="utf-8")
    client = TestClient(create_app(run_dir))
    assert client.get("/api/agents/h1/prompt", params={"wait": 0}).status_code == 404
    # And a prompt file created by hand is served by the API.
    (run_dir / "mailbox" / "h2").mkdir(parents=True)
    (run_dir / "mailbox" / "h2" / "prompt-0.txt").write_text("hand prompt", encoding="utf-8")
    body = client.get("/api/agents/h2/prompt", params={"wait": 0}).json()
    assert body == {"seq": 0, "prompt": "hand prompt"}


def test_static_console_served_when_configured(tmp_path):
    run_dir = run_dir_with(tmp_path)
    console = tmp_path / "console"
    console.mkdir()
    (console / "index.html").write_text("<html><body>console</body></html>")
    client = TestClient(create_app(run_dir, console_dir=console))
    response = client.get("/")
    assert response.status_code == 200
    assert "console" in response.text
