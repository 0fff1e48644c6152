"""Game-loop orchestration: prepare, play, adjudicate, interpret.

Scheduling contract: at most one AI completion is in flight at any time
(AI is compute-bound), while all human prompts for the current gather
step reach the mailbox immediately so humans work in parallel (humans
are I/O-bound).  The engine is the single writer of the history; every
append is persisted at once so an external gateway process can serve a
live view of the run from the files.
"""

from __future__ import annotations

import asyncio
import hashlib
import json
import logging
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path

from .agents import (
    ContextPolicy,
    ControlAgent,
    DEFAULT_CONTEXT_BUDGET,
    PLAYER_QUERY,
    TeamAgent,
    build_agents,
    trigram_overlap,
)
from .errors import ConfigurationError, GameAborted, SandtableError, ValidationFailure
from .llm import Backend, ChatMessage, SamplingParams
from .mailbox import MailboxStore
from .model import (
    AgentId,
    EntryKind,
    FORMAT_VERSION,
    History,
    HistoryEntry,
    NATURE,
    NodeKind,
    Operator,
    SYSTEM,
    Scenario,
    member_closure,
    save_scenario,
    save_transcript,
    validate_roster,
    visible_history,
)

logger = logging.getLogger(__name__)


def derive_seed(master_seed: int, counter: int | str) -> int:
    """Per-call seed from one master seed and a counter hash."""
    digest = hashlib.sha256(f"{master_seed}:{counter}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") % (2**31)


class GameStatus(str, Enum):
    PREPARING = "preparing"
    AWAITING_RESPONSES = "awaiting_responses"
    ADJUDICATING = "adjudicating"
    FINISHED = "finished"


@dataclass
class GameState:
    scenario: Scenario
    history: History
    move_index: int = 0
    status: GameStatus = GameStatus.PREPARING


@dataclass(frozen=True)
class MoveRecord:
    move_index: int
    responses: tuple[tuple[AgentId, str], ...]
    adjudication: str | None = None


@dataclass(frozen=True)
class RunResult:
    scenario_name: str
    seed: int
    status: str  # finished | aborted
    history: History
    moves: tuple[MoveRecord, ...]
    run_dir: Path
    transcript_path: Path
    error: str | None = None


@dataclass
class EngineConfig:
    """Run-time knobs; defaults suit scripted play and tests."""

    default_params: SamplingParams = field(default_factory=SamplingParams)
    control_backend: str | None = None
    control_operator: Operator = Operator.AI
    context_budget: int | None = DEFAULT_CONTEXT_BUDGET
    human_poll: float = 0.05
    human_timeout: float | None = None  # block forever by default
    on_human_timeout: str = "abort"  # abort | skip
    repetition_threshold: float = 0.9


SKIPPED_RESPONSE = "(no response received before the deadline)"


class Runtime:
    """AgentChannel implementation owning the scheduling primitives."""

    def __init__(
        self,
        backends: dict[str, Backend],
        mailbox: MailboxStore | None,
        master_seed: int,
        config: EngineConfig,
    ):
        self.backends = backends
        self.mailbox = mailbox
        self.master_seed = master_seed
        self.config = config
        self._ai_lock = asyncio.Lock()
        self._call_counter = 0
        self._agent_locks: dict[AgentId, asyncio.Lock] = {}

    def resolve(self, backend_id: str | None) -> Backend:
        name = backend_id or "default"
        try:
            return self.backends[name]
        except KeyError:
            raise ConfigurationError(f"no backend configured under id {name!r}")

    async def ai(self, backend_id: str | None, messages: list[ChatMessage]) -> str:
        backend = self.resolve(backend_id)
        async with self._ai_lock:
            seed = derive_seed(self.master_seed, self._call_counter)
            self._call_counter += 1
            params = replace(self.config.default_params, seed=seed)
            return await asyncio.to_thread(backend.complete, list(messages), params)

    async def human(self, agent_id: AgentId, prompt: str) -> str:
        if self.mailbox is None:
            raise ConfigurationError(
                f"agent {agent_id!r} is human-operated but no mailbox is wired up"
            )
        # Per-agent serialization: a player sitting on two teams answers
        # one prompt at a time (the mailbox holds one pending per agent).
        lock = self._agent_locks.setdefault(agent_id, asyncio.Lock())
        async with lock:
            seq = self.mailbox.next_seq(agent_id)
            self.mailbox.publish_prompt(agent_id, seq, prompt)
            try:
                return await self.mailbox.await_response(
                    agent_id,
                    seq,
                    poll=self.config.human_poll,
                    timeout=self.config.human_timeout,
                )
            except TimeoutError as exc:
                if self.config.on_human_timeout == "skip":
                    logger.warning("skipping %s: %s", agent_id, exc)
                    return SKIPPED_RESPONSE
                raise GameAborted(str(exc), agent_id=agent_id)


class Engine:
    """Runs one game of a scenario against a set of backends."""

    def __init__(
        self,
        scenario: Scenario,
        backends: dict[str, Backend],
        seed: int,
        run_dir: str | Path,
        config: EngineConfig | None = None,
    ):
        report = validate_roster(list(scenario.roster))
        if not report.ok:
            raise ValidationFailure(f"invalid roster: {report}")
        self.scenario = scenario
        self.seed = seed
        self.run_dir = Path(run_dir)
        self.config = config or EngineConfig()
        self.runtime = Runtime(
            backends, MailboxStore(self.run_dir / "mailbox"), seed, self.config
        )
        control_backend = self.config.control_backend or (
            "control" if "control" in backends else "default"
        )
        self.control = ControlAgent(
            self.runtime,
            backend_id=control_backend,
            time_step=scenario.time_step,
            nature=scenario.nature,
            operator=self.config.control_operator,
        )
        policy = ContextPolicy(
            budget=self.config.context_budget, summarize=self.control.summarize
        )
        self.control.policy = policy
        self.agents = build_agents(scenario, self.runtime, policy)
        self.state = GameState(scenario=scenario, history=History())
        self._started_at = _utcnow()

    # -- persistence ---------------------------------------------------

    @property
    def transcript_path(self) -> Path:
        return self.run_dir / "transcript.json"

    def _append(self, **kwargs) -> HistoryEntry:
        entry = HistoryEntry(seq=self.state.history.next_seq(), **kwargs)
        self.state.history = self.state.history.append(entry)
        save_transcript(self.state.history, self.transcript_path)
        return entry

    def _write_meta(self, status: str, error: str | None = None) -> None:
        meta = {
            "format_version": FORMAT_VERSION,
            "scenario": self.scenario.name,
            "seed": self.seed,
            "backends": sorted(self.runtime.backends),
            "control_operator": self.config.control_operator.value,
            "started_at": self._started_at,
            "finished_at": _utcnow(),
            "status": status,
        }
        if error is not None:
            meta["error"] = error
        path = self.run_dir / "meta.json"
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")

    # -- visibility ----------------------------------------------------

    def _view(self, snapshot: History):
        roster = list(self.scenario.roster)

        def view(agent_id: AgentId) -> History:
            return visible_history(snapshot, agent_id, roster)

        return view

    def _response_visibility(self, context_id: AgentId) -> frozenset[AgentId] | None:
        if not self.scenario.asymmetric:
            return None
        return member_closure(list(self.scenario.roster), context_id)

    def _subtree_has_human(self, agent_id: AgentId) -> bool:
        node = self.scenario.node(agent_id)
        if node.kind is NodeKind.PLAYER:
            return node.operator is Operator.HUMAN
        ids = set(node.members) | ({node.leader} if node.leader else set())
        return any(self._subtree_has_human(m) for m in ids)

    # -- game loop -----------------------------------------------------

    async def gather_responses(
        self,
        snapshot: History,
        responders: list[AgentId],
        question: str,
    ) -> list[tuple[AgentId, str, tuple]]:
        """One response per responder, normalized back to roster order.

        Responder subtrees containing humans start first so their prompts
        hit the mailbox before any AI completion begins; the runtime's
        lock keeps AI calls strictly sequential regardless of start order.
        """
        view = self._view(snapshot)

        async def one(rid: AgentId):
            agent = self.agents[rid]
            if isinstance(agent, TeamAgent):
                team_response = await agent.respond(view, question)
                return rid, team_response.joint, team_response.records
            text = await agent.respond(view(rid), question)
            return rid, text, ()

        ordered = sorted(
            responders, key=lambda rid: 0 if self._subtree_has_human(rid) else 1
        )
        results = await asyncio.gather(*(one(rid) for rid in ordered))
        by_id = {rid: (rid, text, records) for rid, text, records in results}
        return [by_id[rid] for rid in responders]

    def _question_for_move(self, move: int) -> str:
        questions = self.scenario.per_move_questions
        if questions and move - 1 < len(questions):
            return questions[move - 1]
        return PLAYER_QUERY

    async def _play_move(self, move: int) -> MoveRecord:
        scenario = self.scenario
        inject_index = move - 1 if scenario.adversarial else move - 2
        if 0 <= inject_index < len(scenario.injects):
            self._append(
                author=SYSTEM,
                kind=EntryKind.INJECT,
                text=scenario.injects[inject_index],
                move_index=move,
            )

        self.state.status = GameStatus.AWAITING_RESPONSES
        snapshot = self.state.history
        results = await self.gather_responses(
            snapshot, list(scenario.top_level_responders), self._question_for_move(move)
        )

        for rid, text, records in results:
            if scenario.asymmetric:
                # Team deliberations stay visible to the team only; in
                # common mode they are left out of the shared history.
                for agent_id, member_text, team_id in records:
                    kind = (
                        EntryKind.TEAM_RESPONSE
                        if scenario.node(agent_id).kind is NodeKind.TEAM
                        else EntryKind.PLAYER_RESPONSE
                    )
                    self._append(
                        author=agent_id,
                        kind=kind,
                        text=member_text,
                        move_index=move,
                        visibility=self._response_visibility(team_id),
                    )
            kind = (
                EntryKind.TEAM_RESPONSE
                if scenario.node(rid).kind is NodeKind.TEAM
                else EntryKind.PLAYER_RESPONSE
            )
            self._append(
                author=rid,
                kind=kind,
                text=text,
                move_index=move,
                visibility=self._response_visibility(rid),
            )

        adjudication: str | None = None
        if scenario.adversarial or scenario.force_adjudication:
            self.state.status = GameStatus.ADJUDICATING
            plans = [(rid, text) for rid, text, _ in results]
            previous = self.state.history.last_of_kind(EntryKind.ADJUDICATION)
            adjudication = await self.control.adjudicate(snapshot, plans)
            degraded = bool(
                previous
                and trigram_overlap(adjudication, previous.text)
                > self.config.repetition_threshold
            )
            if degraded:
                logger.warning("move %d adjudication repeats the previous move", move)
            self._append(
                author=NATURE,
                kind=EntryKind.ADJUDICATION,
                text=adjudication,
                move_index=move,
                degraded=degraded,
            )

        self.state.move_index = move
        return MoveRecord(
            move_index=move,
            responses=tuple((rid, text) for rid, text, _ in results),
            adjudication=adjudication,
        )

    async def run(self) -> RunResult:
        self.run_dir.mkdir(parents=True, exist_ok=True)
        save_scenario(self.scenario, self.run_dir / "scenario.json")
        self._write_meta("running")
        self._append(
            author=SYSTEM,
            kind=EntryKind.SCENARIO,
            text=self.scenario.situation,
            move_index=0,
        )
        moves: list[MoveRecord] = []
        try:
            for move in range(1, self.scenario.moves + 1):
                moves.append(await self._play_move(move))
        except Exception as exc:  # any unrecoverable agent error aborts the run
            error = f"{type(exc).__name__}: {exc}"
            logger.error("run aborted at move %d: %s", self.state.move_index + 1, error)
            self._write_meta("aborted", error=error)
            return RunResult(
                scenario_name=self.scenario.name,
                seed=self.seed,
                status="aborted",
                history=self.state.history,
                moves=tuple(moves),
                run_dir=self.run_dir,
                transcript_path=self.transcript_path,
                error=error,
            )
        self.state.status = GameStatus.FINISHED
        self._write_meta("finished")
        return RunResult(
            scenario_name=self.scenario.name,
            seed=self.seed,
            status="finished",
            history=self.state.history,
            moves=tuple(moves),
            run_dir=self.run_dir,
            transcript_path=self.transcript_path,
        )


def run_game(
    scenario: Scenario,
    backends: dict[str, Backend],
    seed: int,
    run_dir: str | Path,
    config: EngineConfig | None = None,
) -> RunResult:
    """Play one full game and persist transcript plus run metadata."""
    engine = Engine(scenario, backends, seed, run_dir, config)
    return asyncio.run(engine.run())


QAResult = tuple[str, str | None, str | None]  # question, answer, error


async def interpret_async(
    history: History,
    questions: list[str],
    control: ControlAgent,
    transcript_path: str | Path | None = None,
) -> tuple[History, list[QAResult]]:
    """Answer each question against the record, appending Q/A entries.

    A failed question is reported in the results and skipped in the
    transcript; the remaining questions are still asked.  Because answers
    join the history, later questions see earlier ones: a dialog.
    """
    results: list[QAResult] = []
    move_index = history.entries[-1].move_index if len(history) else 0
    for question in questions:
        try:
            answer = await control.answer_question(history, question)
        except SandtableError as exc:
            logger.warning("analysis question failed: %s", exc)
            results.append((question, None, f"{type(exc).__name__}: {exc}"))
            continue
        history = history.append(
            HistoryEntry(
                seq=history.next_seq(),
                author=SYSTEM,
                kind=EntryKind.QUESTION,
                text=question,
                move_index=move_index,
            )
        )
        history = history.append(
            HistoryEntry(
                seq=history.next_seq(),
                author=SYSTEM,
                kind=EntryKind.ANSWER,
                text=answer,
                move_index=move_index,
            )
        )
        if transcript_path is not None:
            save_transcript(history, transcript_path)
        results.append((question, answer, None))
    return history, results


def interpret(
    history: History,
    questions: list[str],
    backends: dict[str, Backend],
    backend_id: str | None = None,
    transcript_path: str | Path | None = None,
    seed: int = 0,
    config: EngineConfig | None = None,
) -> tuple[History, list[QAResult]]:
    """Synchronous analysis entry point over a finished transcript."""
    config = config or EngineConfig()
    runtime = Runtime(backends, None, seed, config)
    control = ControlAgent(
        runtime,
        backend_id=backend_id or ("control" if "control" in backends else "default"),
        operator=config.control_operator,
    )
    return asyncio.run(interpret_async(history, questions, control, transcript_path))


def _utcnow() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")
