"""File-backed mailbox between the engine and human participants.

Every prompt sent to a human and every response received is a raw UTF-8
text file under ``<run_dir>/mailbox/<agent>/``, named ``prompt-<seq>.txt``
and ``response-<seq>.txt``.  The files ARE the state: the HTTP service,
the engine, and any third-party tool that writes the files directly all
see the same mailbox, and a process restart loses nothing.
"""

from __future__ import annotations

import asyncio
import re
import threading
from pathlib import Path

from .errors import MailboxProtocolError, ValidationFailure

_PROMPT_RE = re.compile(r"^prompt-(\d+)\.txt$")


class MailboxStore:
    """Per-agent prompt/response mailboxes rooted at one directory.

    In-process operations are serialized with a lock; cross-process safety
    comes from the protocol itself (the engine only writes prompts and
    reads responses, clients only read prompts and write responses) plus
    atomic file writes.
    """

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self._lock = threading.Lock()

    def agent_dir(self, agent: str) -> Path:
        return self.root / agent

    def agents(self) -> list[str]:
        if not self.root.is_dir():
            return []
        return sorted(p.name for p in self.root.iterdir() if p.is_dir())

    def _prompt_seqs(self, agent: str) -> list[int]:
        adir = self.agent_dir(agent)
        if not adir.is_dir():
            return []
        seqs = []
        for p in adir.iterdir():
            m = _PROMPT_RE.match(p.name)
            if m:
                seqs.append(int(m.group(1)))
        return sorted(seqs)

    def next_seq(self, agent: str) -> int:
        seqs = self._prompt_seqs(agent)
        return seqs[-1] + 1 if seqs else 0

    def pending(self, agent: str) -> tuple[int, str] | None:
        """The outstanding (seq, prompt) pair, oldest first if files were
        tampered with out of protocol."""
        adir = self.agent_dir(agent)
        for seq in self._prompt_seqs(agent):
            if not (adir / f"response-{seq}.txt").exists():
                return seq, (adir / f"prompt-{seq}.txt").read_text(encoding="utf-8")
        return None

    def response_text(self, agent: str, seq: int) -> str | None:
        path = self.agent_dir(agent) / f"response-{seq}.txt"
        if not path.exists():
            return None
        return path.read_text(encoding="utf-8")

    def answered(self, agent: str) -> list[tuple[int, str, str]]:
        adir = self.agent_dir(agent)
        out = []
        for seq in self._prompt_seqs(agent):
            response = self.response_text(agent, seq)
            if response is not None:
                prompt = (adir / f"prompt-{seq}.txt").read_text(encoding="utf-8")
                out.append((seq, prompt, response))
        return out

    def publish_prompt(self, agent: str, seq: int, prompt: str) -> None:
        if not prompt:
            raise ValidationFailure("prompt must be non-empty")
        with self._lock:
            if self.pending(agent) is not None:
                raise MailboxProtocolError(f"agent {agent!r} already has a pending prompt")
            if seq in self._prompt_seqs(agent):
                raise MailboxProtocolError(f"prompt seq {seq} already used for {agent!r}")
            self._write(self.agent_dir(agent) / f"prompt-{seq}.txt", prompt)

    def submit_response(self, agent: str, seq: int, response: str) -> None:
        if not response or not response.strip():
            raise ValidationFailure("response must be non-empty")
        with self._lock:
            pending = self.pending(agent)
            if pending is None:
                raise MailboxProtocolError(f"agent {agent!r} has no pending prompt")
            if pending[0] != seq:
                raise MailboxProtocolError(
                    f"stale seq {seq} for {agent!r}, pending is {pending[0]}"
                )
            self._write(self.agent_dir(agent) / f"response-{seq}.txt", response)

    async def await_response(
        self,
        agent: str,
        seq: int,
        poll: float = 0.05,
        timeout: float | None = None,
    ) -> str:
        """Poll for the response file; the default is to wait forever."""
        waited = 0.0
        while True:
            text = self.response_text(agent, seq)
            if text is not None:
                return text
            if timeout is not None and waited >= timeout:
                raise TimeoutError(f"no response from {agent!r} for seq {seq} after {timeout}s")
            await asyncio.sleep(poll)
            waited += poll

    def snapshot(self) -> dict:
        """Full mailbox state, derived solely from the files."""
        return {
            agent: {
                "pending": self.pending(agent),
                "answered": self.answered(agent),
            }
            for agent in self.agents()
        }

    @staticmethod
    def _write(path: Path, text: str) -> None:
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(".tmp")
        tmp.write_text(text, encoding="utf-8")
        tmp.replace(path)
