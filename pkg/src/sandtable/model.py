"""Domain model: histories, rosters, scenarios, and their file formats.

The history is the environment of the multi-agent system: an append-only,
ordered record of game text.  Information asymmetry is modeled as a
per-entry allow-set (``visibility``) filtered at read time, rather than
divergent per-agent copies, so there is a single source of truth.

Scenario and transcript files are plain JSON documents carrying
``"format_version": 1``.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path

from .errors import OrderingError, RosterError, ValidationFailure

FORMAT_VERSION = 1

AgentId = str

# Reserved author sentinels.  Adjudication outcomes are attributed to no
# player; prewritten material (scenario, injects) and analysis Q&A belong
# to the engine itself.
NATURE: AgentId = "NATURE"
SYSTEM: AgentId = "SYSTEM"
RESERVED_IDS = frozenset({NATURE, SYSTEM})


class EntryKind(str, Enum):
    SCENARIO = "scenario"
    INJECT = "inject"
    PLAYER_RESPONSE = "player_response"
    TEAM_RESPONSE = "team_response"
    ADJUDICATION = "adjudication"
    QUESTION = "question"
    ANSWER = "answer"


class NodeKind(str, Enum):
    PLAYER = "player"
    TEAM = "team"


class Operator(str, Enum):
    AI = "ai"
    HUMAN = "human"


@dataclass(frozen=True)
class HistoryEntry:
    """One attributed line of game text.

    ``visibility`` is ``None`` for entries everyone can see, otherwise a
    non-empty set of agent ids.  ``degraded`` marks entries the repetition
    heuristic flagged as suspect model output; it never affects play.
    """

    seq: int
    author: AgentId
    kind: EntryKind
    text: str
    move_index: int
    visibility: frozenset[AgentId] | None = None
    degraded: bool = False

    def __post_init__(self):
        if self.seq < 0:
            raise ValidationFailure(f"entry seq must be >= 0, got {self.seq}")
        if not self.author:
            raise ValidationFailure("entry author must be non-empty")
        if not self.text:
            raise ValidationFailure("entry text must be non-empty")
        if self.move_index < 0:
            raise ValidationFailure(f"move_index must be >= 0, got {self.move_index}")
        if self.visibility is not None and not self.visibility:
            raise ValidationFailure("visibility must be ALL (None) or a non-empty set")

    def visible_to(self, viewer: AgentId) -> bool:
        return self.visibility is None or viewer in self.visibility

    def to_json(self) -> dict:
        doc = {
            "seq": self.seq,
            "author": self.author,
            "kind": self.kind.value,
            "text": self.text,
            "move_index": self.move_index,
            "visibility": "ALL" if self.visibility is None else sorted(self.visibility),
        }
        if self.degraded:
            doc["degraded"] = True
        return doc

    @classmethod
    def from_json(cls, doc: dict) -> "HistoryEntry":
        try:
            kind = EntryKind(doc["kind"])
        except ValueError:
            raise ValidationFailure(f"unknown entry kind: {doc.get('kind')!r}")
        except KeyError:
            raise ValidationFailure("entry missing 'kind'")
        vis = doc.get("visibility", "ALL")
        visibility = None if vis == "ALL" else frozenset(vis)
        return cls(
            seq=doc["seq"],
            author=doc["author"],
            kind=kind,
            text=doc["text"],
            move_index=doc["move_index"],
            visibility=visibility,
            degraded=bool(doc.get("degraded", False)),
        )


@dataclass(frozen=True)
class History:
    """Immutable ordered record of entries with strictly increasing seq.

    ``append`` returns a new History; existing values are never mutated,
    so snapshots can be shared freely across concurrent readers.
    """

    entries: tuple[HistoryEntry, ...] = ()

    def __post_init__(self):
        seqs = [e.seq for e in self.entries]
        if any(b <= a for a, b in zip(seqs, seqs[1:])):
            raise OrderingError(f"entry seqs not strictly increasing: {seqs}")

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def next_seq(self) -> int:
        return self.entries[-1].seq + 1 if self.entries else 0

    def append(self, entry: HistoryEntry) -> "History":
        if self.entries and entry.seq <= self.entries[-1].seq:
            raise OrderingError(
                f"seq {entry.seq} not greater than last seq {self.entries[-1].seq}"
            )
        return History(self.entries + (entry,))

    def visible_to(self, viewer: AgentId) -> "History":
        return History(tuple(e for e in self.entries if e.visible_to(viewer)))

    def last_of_kind(self, kind: EntryKind) -> HistoryEntry | None:
        for entry in reversed(self.entries):
            if entry.kind is kind:
                return entry
        return None

    def to_json(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "entries": [e.to_json() for e in self.entries],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "History":
        _check_format_version(doc)
        return cls(tuple(HistoryEntry.from_json(e) for e in doc["entries"]))


def append_entry(history: History, entry: HistoryEntry) -> History:
    """Extend a history by one entry; prior entries are untouched."""
    return history.append(entry)


def visible_history(history: History, viewer: AgentId, roster: list["RosterNode"] | None = None) -> History:
    """Exactly the entries the viewer may see, original order preserved.

    When a roster is supplied, an unknown viewer is an error rather than an
    empty view, so typos don't silently blind an agent.
    """
    if roster is not None and viewer not in {n.id for n in roster}:
        raise RosterError(f"viewer {viewer!r} is not in the roster")
    return history.visible_to(viewer)


@dataclass(frozen=True)
class Persona:
    """A written perspective description conditioning a player's responses."""

    description: str = ""

    def __bool__(self) -> bool:
        return bool(self.description)


@dataclass(frozen=True)
class RosterNode:
    """One roster slot: a player (with persona and operator) or a team.

    Teams carry a leader and members; the membership graph must be acyclic.
    ``backend`` optionally names the backend id an AI player uses, falling
    back to the run's default when absent.
    """

    id: AgentId
    kind: NodeKind
    persona: Persona = Persona()
    operator: Operator = Operator.AI
    leader: AgentId | None = None
    members: tuple[AgentId, ...] = ()
    backend: str | None = None

    def __post_init__(self):
        if not self.id:
            raise ValidationFailure("roster node id must be non-empty")

    def to_json(self) -> dict:
        doc: dict = {"id": self.id, "kind": self.kind.value}
        if self.kind is NodeKind.PLAYER:
            doc["persona"] = self.persona.description
            doc["operator"] = self.operator.value
        else:
            doc["leader"] = self.leader
            doc["members"] = list(self.members)
        if self.backend is not None:
            doc["backend"] = self.backend
        return doc

    @classmethod
    def from_json(cls, doc: dict) -> "RosterNode":
        try:
            kind = NodeKind(doc["kind"])
        except ValueError:
            raise ValidationFailure(f"unknown roster node kind: {doc.get('kind')!r}")
        except KeyError:
            raise ValidationFailure("roster node missing 'kind'")
        if kind is NodeKind.PLAYER:
            try:
                operator = Operator(doc.get("operator", "ai"))
            except ValueError:
                raise ValidationFailure(f"unknown operator: {doc.get('operator')!r}")
            return cls(
                id=doc["id"],
                kind=kind,
                persona=Persona(doc.get("persona", "")),
                operator=operator,
                backend=doc.get("backend"),
            )
        return cls(
            id=doc["id"],
            kind=kind,
            leader=doc.get("leader"),
            members=tuple(doc.get("members", ())),
            backend=doc.get("backend"),
        )


@dataclass(frozen=True)
class Violation:
    kind: str  # cycle | dangling_reference | duplicate_id | empty_team | bad_leader | reserved_id
    subject: AgentId
    detail: str

    def __str__(self) -> str:
        return f"{self.kind}({self.subject}): {self.detail}"


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __str__(self) -> str:
        if self.ok:
            return "roster ok"
        return "; ".join(str(v) for v in self.violations)


def validate_roster(roster: list[RosterNode]) -> ValidationReport:
    """Check a roster for structural violations.

    Accepts any forest/DAG over the nodes; rejects duplicate ids, reserved
    ids, dangling member/leader references, empty teams, non-player
    leaders, and any directed membership cycle.  Violations are data, not
    exceptions.
    """
    violations: list[Violation] = []
    seen: set[AgentId] = set()
    for node in roster:
        if node.id in seen:
            violations.append(Violation("duplicate_id", node.id, "id appears more than once"))
        seen.add(node.id)
        if node.id in RESERVED_IDS:
            violations.append(Violation("reserved_id", node.id, "id is a reserved author sentinel"))

    by_id = {n.id: n for n in roster}
    teams = [n for n in roster if n.kind is NodeKind.TEAM]
    for team in teams:
        if not team.members:
            violations.append(Violation("empty_team", team.id, "team has no members"))
        for member in team.members:
            if member not in by_id:
                violations.append(
                    Violation("dangling_reference", team.id, f"member {member!r} not in roster")
                )
        if team.leader is None or team.leader not in by_id:
            violations.append(
                Violation("dangling_reference", team.id, f"leader {team.leader!r} not in roster")
            )
        elif by_id[team.leader].kind is not NodeKind.PLAYER:
            violations.append(
                Violation("bad_leader", team.id, f"leader {team.leader!r} is not a player")
            )

    # Kahn's algorithm over team -> member edges; leftover teams sit on a cycle.
    indegree = {n.id: 0 for n in roster}
    for team in teams:
        for member in team.members:
            if member in indegree:
                indegree[member] += 1
    queue = deque(nid for nid, deg in indegree.items() if deg == 0)
    visited = 0
    while queue:
        nid = queue.popleft()
        visited += 1
        node = by_id[nid]
        if node.kind is NodeKind.TEAM:
            for member in node.members:
                if member in indegree:
                    indegree[member] -= 1
                    if indegree[member] == 0:
                        queue.append(member)
    if visited < len(by_id):
        stuck = sorted(nid for nid, deg in indegree.items() if deg > 0)
        violations.append(
            Violation("cycle", stuck[0], f"membership cycle involving {', '.join(stuck)}")
        )

    return ValidationReport(tuple(violations))


def member_closure(roster: list[RosterNode], root: AgentId) -> frozenset[AgentId]:
    """The root plus everything reachable through team membership."""
    by_id = {n.id: n for n in roster}
    seen: set[AgentId] = set()
    stack = [root]
    while stack:
        nid = stack.pop()
        if nid in seen or nid not in by_id:
            continue
        seen.add(nid)
        node = by_id[nid]
        if node.kind is NodeKind.TEAM:
            stack.extend(node.members)
            if node.leader:
                stack.append(node.leader)
    return frozenset(seen)


@dataclass(frozen=True)
class Scenario:
    """Everything needed to play one game.

    ``per_move_questions`` substitutes the default player query move by
    move when present.  ``force_adjudication`` turns on adjudication even
    for single-responder (tabletop) games.
    """

    name: str
    situation: str
    roster: tuple[RosterNode, ...]
    top_level_responders: tuple[AgentId, ...]
    injects: tuple[str, ...] = ()
    moves: int = 1
    time_step: str = "month"
    nature: bool = False
    asymmetric: bool = False
    per_move_questions: tuple[str, ...] | None = None
    force_adjudication: bool = False

    def __post_init__(self):
        if not self.situation:
            raise ValidationFailure("scenario situation must be non-empty")
        if self.moves < 1:
            raise ValidationFailure(f"moves must be >= 1, got {self.moves}")
        if not self.top_level_responders:
            raise ValidationFailure("top_level_responders must be non-empty")
        roster_ids = {n.id for n in self.roster}
        for responder in self.top_level_responders:
            if responder not in roster_ids:
                raise ValidationFailure(
                    f"top-level responder {responder!r} does not resolve in roster"
                )

    def node(self, agent_id: AgentId) -> RosterNode:
        for n in self.roster:
            if n.id == agent_id:
                return n
        raise RosterError(f"agent {agent_id!r} is not in the roster")

    @property
    def adversarial(self) -> bool:
        return len(self.top_level_responders) > 1

    def with_personas(self, personas: dict[AgentId, str]) -> "Scenario":
        """A copy with the given players' personas substituted."""
        unknown = set(personas) - {n.id for n in self.roster if n.kind is NodeKind.PLAYER}
        if unknown:
            raise ValidationFailure(f"persona map names unknown players: {sorted(unknown)}")
        roster = tuple(
            replace(n, persona=Persona(personas[n.id])) if n.id in personas else n
            for n in self.roster
        )
        return replace(self, roster=roster)

    def to_json(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "name": self.name,
            "situation": self.situation,
            "roster": [n.to_json() for n in self.roster],
            "top_level_responders": list(self.top_level_responders),
            "injects": list(self.injects),
            "moves": self.moves,
            "time_step": self.time_step,
            "nature": self.nature,
            "asymmetric": self.asymmetric,
            "per_move_questions": (
                list(self.per_move_questions) if self.per_move_questions is not None else None
            ),
            "force_adjudication": self.force_adjudication,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "Scenario":
        _check_format_version(doc)
        pmq = doc.get("per_move_questions")
        return cls(
            name=doc["name"],
            situation=doc["situation"],
            roster=tuple(RosterNode.from_json(n) for n in doc["roster"]),
            top_level_responders=tuple(doc["top_level_responders"]),
            injects=tuple(doc.get("injects", ())),
            moves=doc["moves"],
            time_step=doc.get("time_step", "month"),
            nature=bool(doc.get("nature", False)),
            asymmetric=bool(doc.get("asymmetric", False)),
            per_move_questions=tuple(pmq) if pmq is not None else None,
            force_adjudication=bool(doc.get("force_adjudication", False)),
        )


def _check_format_version(doc: dict) -> None:
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise ValidationFailure(
            f"unsupported format_version {version!r}, expected {FORMAT_VERSION}"
        )


def load_scenario(path: str | Path) -> Scenario:
    with open(path, encoding="utf-8") as fh:
        return Scenario.from_json(json.load(fh))


def save_scenario(scenario: Scenario, path: str | Path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(scenario.to_json(), fh, indent=2, ensure_ascii=False)
        fh.write("\n")


def load_transcript(path: str | Path) -> History:
    with open(path, encoding="utf-8") as fh:
        return History.from_json(json.load(fh))


def save_transcript(history: History, path: str | Path) -> None:
    """Atomic write so a concurrently serving gateway never reads a torn file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(history.to_json(), fh, indent=2, ensure_ascii=False)
        fh.write("\n")
    tmp.replace(path)
