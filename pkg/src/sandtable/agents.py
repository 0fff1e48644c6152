"""Agent behaviors: player response, team fan-out/synthesis, control tasks.

Agents are immutable after construction; all mutable state lives in the
engine-owned history.  Agents never talk to backends or mailboxes
directly: they go through an AgentChannel, which the engine implements
and uses to enforce call scheduling (AI one-at-a-time, humans in
parallel).

Prompt layout: the persona (players) or a moderator role statement
(control) goes in the system message; the rendered history plus the task
query goes in the user message.  Human-operated agents receive the same
text, collapsed into a single prompt, through the mailbox.
"""

from __future__ import annotations

import asyncio
import re
from dataclasses import dataclass
from typing import Awaitable, Callable, Protocol

from .errors import DegradedOutputError, ValidationFailure
from .llm import ChatMessage
from .model import (
    AgentId,
    History,
    NodeKind,
    Operator,
    RosterNode,
    Scenario,
    SYSTEM,
)

# The general-purpose player query; callers may substitute specific questions.
PLAYER_QUERY = "What action or actions do you take in response?"

NATURE_SENTENCE = "Include unexpected consequences."

MODERATOR_ROLE = (
    "You are the moderator of an open-ended wargame. You run the game "
    "impartially and keep every narrative grounded and plausible."
)

SYNTHESIS_INSTRUCTION = (
    "Combine those answers into a single joint response on behalf of the team."
)

# Mailbox identity for a human-operated moderator; not a roster id.
CONTROL_AGENT_ID = "control"

DEFAULT_CONTEXT_BUDGET = 24000
_RECENT_KEPT_VERBATIM = 2


class AgentChannel(Protocol):
    """How agents reach the outside world; implemented by the engine."""

    async def ai(self, backend_id: str | None, messages: list[ChatMessage]) -> str:
        ...

    async def human(self, agent_id: AgentId, prompt: str) -> str:
        ...


@dataclass(frozen=True)
class ContextPolicy:
    """What to do when a rendered history outgrows the prompt budget.

    Oldest non-opening entries are folded into one recap block via a
    single summarization call; the opening (scenario) entry and the most
    recent entries survive verbatim.  With no summarizer the history is
    rendered in full.
    """

    budget: int | None = DEFAULT_CONTEXT_BUDGET
    summarize: Callable[[str], Awaitable[str]] | None = None


def entry_block(author: AgentId, move_index: int, text: str) -> str:
    return f"[{author} — move {move_index}] {text}"


async def render_history(visible: History, policy: ContextPolicy | None = None) -> str:
    """History as labeled text blocks, one per entry, blank-line separated."""
    blocks = [entry_block(e.author, e.move_index, e.text) for e in visible]
    text = "\n\n".join(blocks)
    if policy is None or policy.budget is None or policy.summarize is None:
        return text
    if len(text) <= policy.budget or len(blocks) <= _RECENT_KEPT_VERBATIM + 2:
        return text
    old = blocks[1 : -_RECENT_KEPT_VERBATIM]
    recap = await policy.summarize("\n\n".join(old))
    kept = [blocks[0], entry_block(SYSTEM, visible.entries[-1].move_index, f"(recap) {recap}")]
    kept.extend(blocks[-_RECENT_KEPT_VERBATIM:])
    return "\n\n".join(kept)


def flatten_prompt(messages: list[ChatMessage]) -> str:
    """The single-text form of a chat prompt, as shown to human operators."""
    return "\n\n".join(m.content for m in messages)


@dataclass(frozen=True)
class TeamResponse:
    """A team's joint text plus every member deliberation that produced it.

    ``records`` holds (agent id, text, enclosing team id) triples in
    roster order, nested teams first expanded then reported as a single
    member record of their enclosing team.
    """

    joint: str
    records: tuple[tuple[AgentId, str, AgentId], ...]


class PlayerAgent:
    """Simulates (or relays to) one human decision-maker."""

    def __init__(self, node: RosterNode, channel: AgentChannel, policy: ContextPolicy):
        if node.kind is not NodeKind.PLAYER:
            raise ValidationFailure(f"{node.id!r} is not a player node")
        self.node = node
        self.channel = channel
        self.policy = policy

    @property
    def id(self) -> AgentId:
        return self.node.id

    async def respond(self, visible: History, question: str = PLAYER_QUERY) -> str:
        if not len(visible):
            raise ValidationFailure(f"player {self.id!r} asked to respond to an empty history")
        rendered = await render_history(visible, self.policy)
        messages = self._messages(rendered, question)
        if self.node.operator is Operator.HUMAN:
            return await self.channel.human(self.id, flatten_prompt(messages))
        return await self.channel.ai(self.node.backend, messages)

    def _messages(self, rendered: str, question: str) -> list[ChatMessage]:
        messages = []
        if self.node.persona:
            messages.append(ChatMessage("system", self.node.persona.description))
        messages.append(ChatMessage("user", f"{rendered}\n\n{question}"))
        return messages


class TeamAgent:
    """A group that must formulate one joint response.

    The team has no generative capacity of its own: every member is asked
    for a response (recursively, for teams of teams), then the designated
    leader combines the answers into a single joint text.  A leader who is
    also a member answers as an ordinary member first.
    """

    def __init__(
        self,
        node: RosterNode,
        registry: dict[AgentId, "PlayerAgent | TeamAgent"],
        channel: AgentChannel,
        policy: ContextPolicy,
    ):
        if node.kind is not NodeKind.TEAM:
            raise ValidationFailure(f"{node.id!r} is not a team node")
        self.node = node
        self.registry = registry
        self.channel = channel
        self.policy = policy

    @property
    def id(self) -> AgentId:
        return self.node.id

    async def respond(
        self,
        view: Callable[[AgentId], History],
        question: str = PLAYER_QUERY,
    ) -> TeamResponse:
        async def member_answer(member_id: AgentId):
            agent = self.registry[member_id]
            if isinstance(agent, TeamAgent):
                return await agent.respond(view, question)
            return await agent.respond(view(member_id), question)

        answers = await asyncio.gather(*(member_answer(m) for m in self.node.members))

        records: list[tuple[AgentId, str, AgentId]] = []
        member_texts: list[tuple[AgentId, str]] = []
        for member_id, answer in zip(self.node.members, answers):
            if isinstance(answer, TeamResponse):
                records.extend(answer.records)
                records.append((member_id, answer.joint, self.id))
                member_texts.append((member_id, answer.joint))
            else:
                records.append((member_id, answer, self.id))
                member_texts.append((member_id, answer))

        joint = await self._synthesize(view, question, member_texts)
        return TeamResponse(joint=joint, records=tuple(records))

    async def _synthesize(
        self,
        view: Callable[[AgentId], History],
        question: str,
        member_texts: list[tuple[AgentId, str]],
    ) -> str:
        leader_id = self.node.leader
        assert leader_id is not None  # roster validation guarantees this
        leader_node = self.registry[leader_id].node
        rendered = await render_history(view(leader_id), self.policy)
        blocks = "\n\n".join(entry_block(mid, 0, text) for mid, text in member_texts)
        body = (
            f"{rendered}\n\n"
            f"The question before team {self.id} is: {question}\n\n"
            f"The members of team {self.id} have each proposed a response:\n\n"
            f"{blocks}\n\n{SYNTHESIS_INSTRUCTION}"
        )
        if leader_node.operator is Operator.HUMAN:
            prompt = body
            if leader_node.persona:
                prompt = f"{leader_node.persona.description}\n\n{body}"
            return await self.channel.human(leader_id, prompt)
        messages = []
        if leader_node.persona:
            messages.append(ChatMessage("system", leader_node.persona.description))
        messages.append(ChatMessage("user", body))
        return await self.channel.ai(leader_node.backend, messages)


class ControlAgent:
    """The game's moderator: adjudication, content preparation, analysis."""

    def __init__(
        self,
        channel: AgentChannel,
        backend_id: str | None = None,
        time_step: str = "month",
        nature: bool = False,
        operator: Operator = Operator.AI,
        policy: ContextPolicy | None = None,
    ):
        self.channel = channel
        self.backend_id = backend_id
        self.time_step = time_step
        self.nature = nature
        self.operator = operator
        self.policy = policy or ContextPolicy(summarize=None)

    async def _ask(self, body: str) -> str:
        if self.operator is Operator.HUMAN:
            return await self.channel.human(CONTROL_AGENT_ID, f"{MODERATOR_ROLE}\n\n{body}")
        messages = [ChatMessage("system", MODERATOR_ROLE), ChatMessage("user", body)]
        return await self.channel.ai(self.backend_id, messages)

    async def summarize(self, text: str) -> str:
        return await self._ask(
            "Summarize the following wargame record into a compact recap, "
            f"preserving every decision and outcome:\n\n{text}"
        )

    async def adjudicate(
        self,
        visible: History,
        plans: list[tuple[AgentId, str]],
    ) -> str:
        """One outcome narrative for the move, woven from all plans.

        Plans arrive as parameters, never through the history, so no
        responder's same-move plan can leak into another prompt.
        """
        if not plans:
            raise ValidationFailure("adjudicate needs at least one plan")
        rendered = await render_history(visible, self.policy)
        blocks = "\n\n".join(entry_block(rid, 0, text) for rid, text in plans)
        instruction = (
            f"Weave these plans into a cohesive narrative of what happens in "
            f"the next {self.time_step}. Base the narrative only on the plans "
            f"stated above and the game record."
        )
        if self.nature:
            instruction += f" {NATURE_SENTENCE}"
        body = (
            f"{rendered}\n\n"
            f"The responders have stated the following plans for this move:\n\n"
            f"{blocks}\n\n{instruction}"
        )
        return await self._ask(body)

    async def generate_scenario(self, brief: str) -> str:
        if not brief or not brief.strip():
            raise ValidationFailure("scenario brief must be non-empty")
        return await self._ask(
            "Write the opening situation description for an open-ended wargame "
            f"based on this brief:\n\n{brief}\n\n"
            "Respond with the situation description only."
        )

    async def identify_players(self, situation: str) -> list[tuple[str, str]]:
        if not situation:
            raise ValidationFailure("situation must be non-empty")
        text = await self._ask(
            "Identify the key players (the decision-makers) in the situation "
            "below. Respond with a numbered list, one player per line, in the "
            "format '1. <player name>: <one-sentence description of their "
            f"perspective>'.\n\nSituation:\n{situation}"
        )
        items = parse_numbered_list(text)
        players = [split_name_description(item) for item in items]
        players = [p for p in players if p[0]]
        if not players:
            raise DegradedOutputError("no players could be parsed from completion", raw_text=text)
        return players

    async def generate_injects(self, situation: str, count: int) -> list[str]:
        """Exactly ``count`` pre-written plot developments.

        A completion with no numbered list counts as a single inject; one
        follow-up request is made for any shortfall before giving up.
        """
        if count < 1:
            raise ValidationFailure(f"inject count must be >= 1, got {count}")
        injects: list[str] = []
        for attempt in range(2):
            remaining = count - len(injects)
            text = await self._ask(
                f"Write {remaining} 'injects' (pre-written plot developments used "
                "to drive the game) for the situation below. Respond with a "
                "numbered list, one inject per line.\n\n"
                f"Situation:\n{situation}"
            )
            items = parse_numbered_list(text)
            if not items:
                items = [text.strip()]
            injects.extend(items[:remaining])
            if len(injects) >= count:
                return injects[:count]
        raise DegradedOutputError(
            f"backend delivered {len(injects)} of {count} injects after a retry",
            raw_text="\n".join(injects),
        )

    async def answer_question(self, visible: History, question: str) -> str:
        """Answer grounded in the rendered record; the record itself carries
        earlier question/answer entries, so a dialog accumulates naturally."""
        if not len(visible):
            raise ValidationFailure("cannot answer questions about an empty history")
        rendered = await render_history(visible, self.policy)
        body = (
            f"{rendered}\n\nQuestion: {question}\n\n"
            "Answer the question based on the game record above."
        )
        return await self._ask(body)


def build_agents(
    scenario: Scenario,
    channel: AgentChannel,
    policy: ContextPolicy,
) -> dict[AgentId, PlayerAgent | TeamAgent]:
    registry: dict[AgentId, PlayerAgent | TeamAgent] = {}
    for node in scenario.roster:
        if node.kind is NodeKind.PLAYER:
            registry[node.id] = PlayerAgent(node, channel, policy)
        else:
            registry[node.id] = TeamAgent(node, registry, channel, policy)
    return registry


_ITEM_RE = re.compile(r"^\s*\d+[.)]\s+(.*\S)\s*$")
_NAME_SPLIT_RE = re.compile(r"\s*(?:—|:|\s-\s)\s*")


def parse_numbered_list(text: str) -> list[str]:
    """Items of a numbered list, continuation lines folded into the item."""
    items: list[str] = []
    current: str | None = None
    for line in text.splitlines():
        m = _ITEM_RE.match(line)
        if m:
            if current is not None:
                items.append(current)
            current = m.group(1)
        elif current is not None and line.strip():
            current += " " + line.strip()
    if current is not None:
        items.append(current)
    return items


def split_name_description(item: str) -> tuple[str, str]:
    parts = _NAME_SPLIT_RE.split(item, maxsplit=1)
    if len(parts) == 2:
        return parts[0].strip(), parts[1].strip()
    return item.strip(), ""


_WORD_RE = re.compile(r"[a-z0-9']+")


def trigram_overlap(a: str, b: str) -> float:
    """Overlap of normalized word trigrams, 0.0 (disjoint) to 1.0.

    Used to flag adjudications that merely repeat the previous move's
    narrative, a known failure mode of small models.
    """
    wa = _WORD_RE.findall(a.lower())
    wb = _WORD_RE.findall(b.lower())
    ta = {tuple(wa[i : i + 3]) for i in range(len(wa) - 2)}
    tb = {tuple(wb[i : i + 3]) for i in range(len(wb) - 2)}
    if not ta or not tb:
        return 1.0 if wa == wb and wa else 0.0
    return len(ta & tb) / min(len(ta), len(tb))
