#!/usr/bin/env python3
"""Run the bundled border-crisis experiment against a live model.

Plays 20 one-year games per persona pairing (dove/dove, dove/hawk,
hawk/hawk), classifies each outcome for armed conflict, and prints the
frequency table.  Expect hawks to fight more often than doves; treat the
raw probabilities with skepticism, the point is the direction.

Usage:
    python scripts/persona_effect.py --backend my_backends.json --out results/

The backend config must define "default" (players), "control"
(adjudication), and "judge" (outcome classification) ids; pointing all
three at the same http_chat endpoint is fine, e.g. a local llama.cpp or
any chat-completions server.  Tens of minutes on a consumer GPU.
"""

import argparse
import sys
from pathlib import Path

from sandtable.experiments import load_experiment, run_experiment
from sandtable.llm import load_backends

ROOT = Path(__file__).resolve().parent.parent


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--backend", required=True, help="backend config JSON")
    parser.add_argument("--out", default="results/persona_effect")
    parser.add_argument("--iterations", type=int, default=20)
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args()

    spec = load_experiment(ROOT / "scenarios" / "border_crisis_experiment.json")
    from dataclasses import replace

    spec = replace(spec, iterations=args.iterations, seed=args.seed)
    table, run_index = run_experiment(spec, lambda: load_backends(args.backend), args.out)

    print("\narmed conflict frequency:")
    for row in table.rows:
        print(f"  {row.label:10s} {row.positive:2d} / {row.total}")
    excluded = sum(1 for rec in run_index.values() if rec["status"] != "finished")
    if excluded:
        print(f"  ({excluded} runs excluded; see {args.out}/runs.json)")
    rates = {row.label: row.positive / max(row.total, 1) for row in table.rows}
    if rates.get("hawk/hawk", 0) > rates.get("dove/dove", 0):
        print("direction as expected: hawk/hawk > dove/dove")
        return 0
    print("direction NOT as expected; inspect the transcripts")
    return 1


if __name__ == "__main__":
    sys.exit(main())
