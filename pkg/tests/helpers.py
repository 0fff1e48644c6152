"""Shared test fixtures: instrumented backends, stub humans, a stub
chat-completions server, and random scenario factories."""

from __future__ import annotations

import json
import random
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from sandtable.llm import Backend, ScriptedBackend
from sandtable.mailbox import MailboxStore
from sandtable.model import NodeKind, Operator, Persona, RosterNode, Scenario


class InstrumentedBackend(Backend):
    """Wraps a backend, tracking concurrency and call wall-clock times."""

    def __init__(self, inner: Backend, delay: float = 0.0):
        self.inner = inner
        self.delay = delay
        self.calls: list[tuple[float, float]] = []  # (start, end)
        self.max_in_flight = 0
        self._in_flight = 0
        self._lock = threading.Lock()

    def _complete(self, messages, params):
        with self._lock:
            self._in_flight += 1
            self.max_in_flight = max(self.max_in_flight, self._in_flight)
        start = time.monotonic()
        try:
            if self.delay:
                time.sleep(self.delay)
            return self.inner.complete(messages, params)
        finally:
            with self._lock:
                self._in_flight -= 1
                self.calls.append((start, time.monotonic()))


def prompt_texts(backend) -> list[str]:
    """Flattened prompt text of every call a ScriptedBackend received."""
    return ["\n".join(m.content for m in messages) for messages, _ in backend.calls]


class StubHuman:
    """Background thread that answers mailbox prompts after a delay."""

    def __init__(
        self,
        mailbox: MailboxStore,
        agent_id: str,
        delay: float = 0.0,
        text: str | None = None,
        max_answers: int | None = None,
    ):
        self.mailbox = mailbox
        self.agent_id = agent_id
        self.delay = delay
        self.text = text or f"{agent_id} says: we proceed as planned."
        self.max_answers = max_answers
        self.publish_times: list[float] = []
        self._stop = threading.Event()
        self._thread = threading.Thread(target=self._run, daemon=True)

    def start(self) -> "StubHuman":
        self._thread.start()
        return self

    def stop(self) -> None:
        self._stop.set()
        self._thread.join(timeout=5)

    def _run(self) -> None:
        answered = 0
        seen: set[int] = set()
        while not self._stop.is_set():
            if self.max_answers is not None and answered >= self.max_answers:
                return
            pending = self.mailbox.pending(self.agent_id)
            if pending is not None and pending[0] not in seen:
                seq, _prompt = pending
                seen.add(seq)
                self.publish_times.append(time.monotonic())
                if self.delay:
                    time.sleep(self.delay)
                self.mailbox.submit_response(self.agent_id, seq, self.text)
                answered += 1
            else:
                time.sleep(0.02)


class _ChatHandler(BaseHTTPRequestHandler):
    def do_POST(self):
        length = int(self.headers.get("Content-Length", 0))
        body = json.loads(self.rfile.read(length)) if length else {}
        server = self.server
        server.requests.append({"body": body, "headers": dict(self.headers)})
        if server.fail_next > 0:
            server.fail_next -= 1
            self.send_response(500)
            self.end_headers()
            return
        if server.reject_next > 0:
            server.reject_next -= 1
            self.send_response(400)
            self.end_headers()
            self.wfile.write(b'{"error": "bad request"}')
            return
        if server.raw_response is not None:
            payload = server.raw_response
        else:
            text = server.reply(body)
            payload = json.dumps(
                {"choices": [{"message": {"role": "assistant", "content": text}}]}
            ).encode("utf-8")
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.end_headers()
        self.wfile.write(payload)

    def log_message(self, *args):
        pass


class ChatStubServer:
    """Local endpoint speaking the chat-completions wire format."""

    def __init__(self, reply=None):
        self.server = ThreadingHTTPServer(("127.0.0.1", 0), _ChatHandler)
        self.server.requests = []
        self.server.fail_next = 0
        self.server.reject_next = 0
        self.server.raw_response = None
        self.server.reply = reply or (lambda body: f"echo:{len(body.get('messages', []))}")
        self._thread = threading.Thread(target=self.server.serve_forever, daemon=True)

    def __enter__(self) -> "ChatStubServer":
        self._thread.start()
        return self

    def __exit__(self, *exc):
        self.server.shutdown()
        self.server.server_close()

    @property
    def url(self) -> str:
        host, port = self.server.server_address
        return f"http://{host}:{port}/v1/chat/completions"

    @property
    def requests(self) -> list:
        return self.server.requests


def make_player(pid: str, persona: str = "", operator=Operator.AI, backend=None) -> RosterNode:
    return RosterNode(
        id=pid, kind=NodeKind.PLAYER, persona=Persona(persona), operator=operator, backend=backend
    )


def make_team(tid: str, leader: str, members: list[str], backend=None) -> RosterNode:
    return RosterNode(
        id=tid, kind=NodeKind.TEAM, leader=leader, members=tuple(members), backend=backend
    )


def adversarial_scenario(
    n_players: int,
    moves: int = 1,
    asymmetric: bool = False,
    nature: bool = False,
    injects: tuple[str, ...] = (),
) -> Scenario:
    players = [make_player(f"p{i}", persona=f"Perspective {i}.", backend=f"b{i}") for i in range(n_players)]
    return Scenario(
        name=f"adversarial-{n_players}",
        situation="Two or more factions contest a disputed asset. Open positions are entrenched.",
        roster=tuple(players),
        top_level_responders=tuple(p.id for p in players),
        injects=injects,
        moves=moves,
        time_step="month",
        nature=nature,
        asymmetric=asymmetric,
    )


def random_roster(rng: random.Random, max_nodes: int = 10) -> list[RosterNode]:
    """A random membership graph; teams may reference any node, so both
    cyclic and acyclic graphs occur."""
    n = rng.randint(1, max_nodes)
    ids = [f"n{i}" for i in range(n)]
    is_team = [rng.random() < 0.5 for _ in ids]
    if all(is_team):
        is_team[0] = False
    players = [nid for nid, team in zip(ids, is_team) if not team]
    roster = []
    for nid, team in zip(ids, is_team):
        if team:
            members = rng.sample(ids, rng.randint(1, min(4, n)))
            roster.append(make_team(nid, rng.choice(players), members))
        else:
            roster.append(make_player(nid))
    return roster


def unique_plan_backends(scenario: Scenario, rng: random.Random):
    """Per-player ordered scripts with globally unique response texts.

    Returns (backends dict, expected texts dict keyed by (player, move)).
    """
    backends = {}
    texts = {}
    for node in scenario.roster:
        script = []
        for move in range(1, scenario.moves + 1):
            text = f"plan {node.id} move {move} nonce {rng.randrange(10**9)}"
            texts[(node.id, move)] = text
            script.append(text)
        backends[node.backend or "default"] = ScriptedBackend(script)
    control_script = [
        f"adjudication move {move} nonce {rng.randrange(10**9)}"
        for move in range(1, scenario.moves + 1)
    ]
    backends["control"] = ScriptedBackend(control_script)
    return backends, texts
