"""Command-line entry point: prepare, play, batch, analyze, serve.

Exit codes: 0 success, 1 runtime failure (partial outputs preserved),
2 usage or validation error.
"""

from __future__ import annotations

import argparse
import asyncio
import logging
import re
import sys
from dataclasses import replace
from pathlib import Path

from .agents import ControlAgent
from .engine import EngineConfig, Runtime, interpret, run_game
from .errors import DegradedOutputError, SandtableError, ValidationFailure
from .experiments import load_experiment, run_experiment
from .llm import load_backends
from .model import (
    NodeKind,
    Operator,
    Persona,
    RosterNode,
    Scenario,
    load_scenario,
    load_transcript,
    save_scenario,
    validate_roster,
)

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sandtable",
        description="Open-ended wargame simulation with LLM and human players.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="generate a scenario file from a short brief")
    p.add_argument("--brief", required=True, help="path to a text file with the brief")
    p.add_argument("--backend", required=True, help="backend config JSON")
    p.add_argument("--out", required=True, help="scenario file to write")
    p.add_argument("--name", default=None, help="scenario name (default: derived from brief)")
    p.add_argument("--injects", type=int, default=2, help="number of injects to generate")
    p.add_argument("--moves", type=int, default=3)
    p.add_argument("--time-step", default="month")
    p.add_argument("--nature", action="store_true", help="ask for unexpected consequences")
    p.add_argument("--asymmetric", action="store_true")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("play", help="play one game and write the transcript")
    p.add_argument("--scenario", required=True)
    p.add_argument("--backend", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="run directory (default runs/<name>-<seed>)")
    p.add_argument("--human-control", action="store_true", help="route moderator prompts to the mailbox")
    p.add_argument("--context-budget", type=int, default=None, help="summarize history past this many characters")

    p = sub.add_parser("batch", help="run an experiment: variants x iterations")
    p.add_argument("--experiment", required=True, help="experiment spec JSON")
    p.add_argument("--backend", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--iterations", type=int, default=None, help="override spec iterations")
    p.add_argument("--seed", type=int, default=None, help="override spec master seed")

    p = sub.add_parser("analyze", help="answer questions about a finished transcript")
    p.add_argument("--transcript", required=True)
    p.add_argument("--backend", required=True)
    p.add_argument("--questions", action="append", default=[], help="repeatable")
    p.add_argument("--dialog", action="store_true", help="interactive question loop")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("serve", help="serve the human gateway API for a run directory")
    p.add_argument("--run", required=True, help="run directory (created by play)")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8470)
    p.add_argument("--console", default=None, help="directory with the web console to serve at /")

    return parser


def cmd_prepare(args) -> int:
    brief_path = Path(args.brief)
    if not brief_path.exists():
        print(f"brief file not found: {brief_path}", file=sys.stderr)
        return 2
    brief = brief_path.read_text(encoding="utf-8").strip()
    backends = load_backends(args.backend)
    runtime = Runtime(backends, None, args.seed, EngineConfig())
    control = ControlAgent(
        runtime,
        backend_id="control" if "control" in backends else "default",
        time_step=args.time_step,
        nature=args.nature,
    )

    async def generate():
        situation = await control.generate_scenario(brief)
        players = await control.identify_players(situation)
        injects = await control.generate_injects(situation, args.injects)
        return situation, players, injects

    try:
        situation, players, injects = asyncio.run(generate())
    except DegradedOutputError as exc:
        raw_path = Path(str(args.out) + ".raw.txt")
        raw_path.parent.mkdir(parents=True, exist_ok=True)
        raw_path.write_text(exc.raw_text, encoding="utf-8")
        print(f"generation failed: {exc}; raw output saved to {raw_path}", file=sys.stderr)
        return 1

    roster = []
    seen = set()
    for name, description in players:
        pid = _slug(name)
        if pid in seen:
            continue
        seen.add(pid)
        roster.append(
            RosterNode(id=pid, kind=NodeKind.PLAYER, persona=Persona(description))
        )
    scenario = Scenario(
        name=args.name or _slug(brief[:48]),
        situation=situation,
        roster=tuple(roster),
        top_level_responders=tuple(n.id for n in roster),
        injects=tuple(injects),
        moves=args.moves,
        time_step=args.time_step,
        nature=args.nature,
        asymmetric=args.asymmetric,
    )
    report = validate_roster(list(scenario.roster))
    if not report.ok:
        print(f"generated roster is invalid: {report}", file=sys.stderr)
        return 1
    save_scenario(scenario, args.out)
    print(f"wrote scenario {scenario.name!r} with {len(roster)} players to {args.out}")
    return 0


def cmd_play(args) -> int:
    scenario = load_scenario(args.scenario)
    backends = load_backends(args.backend)
    out = Path(args.out) if args.out else Path("runs") / f"{_slug(scenario.name)}-{args.seed}"
    config = EngineConfig(
        control_operator=Operator.HUMAN if args.human_control else Operator.AI,
    )
    if args.context_budget is not None:
        config = replace(config, context_budget=args.context_budget)
    result = run_game(scenario, backends, args.seed, out, config)
    print(f"run {result.status}: transcript at {result.transcript_path}")
    if result.status != "finished":
        print(f"error: {result.error}", file=sys.stderr)
        return 1
    return 0


def cmd_batch(args) -> int:
    spec = load_experiment(args.experiment)
    if args.iterations is not None:
        spec = replace(spec, iterations=args.iterations)
    if args.seed is not None:
        spec = replace(spec, seed=args.seed)
    table, run_index = run_experiment(spec, lambda: load_backends(args.backend), args.out)
    aborted = sum(1 for rec in run_index.values() if rec["status"] != "finished")
    for row in table.rows:
        print(f"{row.label}: {row.positive} / {row.total}")
    if aborted:
        print(f"warning: {aborted} runs excluded from totals", file=sys.stderr)
    print(f"frequency table at {Path(args.out) / 'frequency.csv'}")
    return 0


def cmd_analyze(args) -> int:
    transcript_path = Path(args.transcript)
    history = load_transcript(transcript_path)
    backends = load_backends(args.backend)
    questions = list(args.questions)
    failures = 0

    def ask(batch: list[str]) -> None:
        nonlocal history, failures
        history, results = interpret(
            history, batch, backends, transcript_path=transcript_path, seed=args.seed
        )
        for question, answer, error in results:
            print(f"Q: {question}")
            if error is None:
                print(f"A: {answer}\n")
            else:
                failures += 1
                print(f"A: (failed: {error})\n")

    if questions:
        ask(questions)
    if args.dialog:
        print("dialog mode; empty line to finish")
        while True:
            try:
                question = input("question> ").strip()
            except EOFError:
                break
            if not question:
                break
            ask([question])
    return 1 if failures else 0


def cmd_serve(args) -> int:
    from .service import serve

    run_dir = Path(args.run)
    if not run_dir.exists():
        print(f"run directory not found: {run_dir}", file=sys.stderr)
        return 2
    console = Path(args.console) if args.console else None
    if console is not None and not console.is_dir():
        print(f"console directory not found: {console}", file=sys.stderr)
        return 2
    serve(run_dir, host=args.host, port=args.port, console_dir=console)
    return 0


def _slug(text: str) -> str:
    slug = re.sub(r"[^a-zA-Z0-9_-]+", "_", text.strip()).strip("_").lower()
    return slug or "scenario"


_COMMANDS = {
    "prepare": cmd_prepare,
    "play": cmd_play,
    "batch": cmd_batch,
    "analyze": cmd_analyze,
    "serve": cmd_serve,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return _COMMANDS[args.command](args)
    except ValidationFailure as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"missing file: {exc}", file=sys.stderr)
        return 2
    except SandtableError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
