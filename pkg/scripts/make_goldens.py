#!/usr/bin/env python3
"""Regenerate the committed golden recording and transcript for the bundled
tabletop scenario.

The stand-in model is a fixed ordered script wrapped in a recorder, so the
recording replays against the exact prompts the engine builds.  Rerun this
after any change to prompt construction or the scenario fixture, and commit
the refreshed goldens.
"""

import json
import shutil
import sys
import tempfile
from pathlib import Path

from sandtable.engine import run_game
from sandtable.llm import RecordingBackend, ScriptedBackend
from sandtable.model import load_scenario

ROOT = Path(__file__).resolve().parent.parent
GOLDENS = ROOT / "tests" / "goldens"
SCENARIO = ROOT / "scenarios" / "ai_incident_ttx.json"
SEED = 11

RESPONSES = [
    (
        "Our first priority is the injured child: we cover all medical costs, "
        "apologize to the family in person, and suspend tournament play of the "
        "robot immediately. In parallel we open an engineering investigation "
        "into the gripper force limits and the move-confirmation logic, "
        "preserve all logs and video, and notify our insurer and counsel. We "
        "will publish the investigation's findings once verified."
    ),
    (
        "We acknowledge that our silence hurt our own people. We hold an "
        "all-hands meeting today to share the full incident timeline, the "
        "investigation's scope, and the interim safety measures. From now on "
        "every employee receives incident updates before external audiences, "
        "and we appoint an internal liaison to field questions and feed "
        "concerns back to the response team."
    ),
    (
        "We welcome the independent safety review and commit to implementing "
        "its recommendations before returning to competition. We meet the "
        "organizers and sponsors with our interim findings, demonstrate the "
        "revised force-limiting safeguards, and propose a third-party "
        "certification regime for all future events."
    ),
]


def main() -> int:
    GOLDENS.mkdir(parents=True, exist_ok=True)
    recording = GOLDENS / "ai_incident_recording.jsonl"
    if recording.exists():
        recording.unlink()
    scenario = load_scenario(SCENARIO)
    backend = RecordingBackend(ScriptedBackend(list(RESPONSES)), recording)
    with tempfile.TemporaryDirectory() as tmp:
        result = run_game(scenario, {"default": backend}, SEED, Path(tmp) / "run")
        if result.status != "finished":
            print(f"golden run failed: {result.error}", file=sys.stderr)
            return 1
        shutil.copy(result.transcript_path, GOLDENS / "ai_incident_transcript.json")
    (GOLDENS / "ai_incident_meta.json").write_text(
        json.dumps({"seed": SEED, "scenario": str(SCENARIO.relative_to(ROOT))}, indent=2) + "\n",
        encoding="utf-8",
    )
    print(f"wrote {recording.name}, ai_incident_transcript.json, ai_incident_meta.json")
    return 0


if __name__ == "__main__":
    sys.exit(main())
