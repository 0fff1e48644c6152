"""Batch Monte Carlo runner: repeated randomized runs -> outcome frequencies.

A single run of an open-ended game is one sample; the interesting object
is the distribution.  Each (variant, iteration) pair plays the scenario
with that variant's persona assignment and a seed derived from the
master seed, classifies the outcome, and lands in a frequency table.
"""

from __future__ import annotations

import asyncio
import csv
import json
import logging
import re
from dataclasses import dataclass
from pathlib import Path

from .agents import ControlAgent
from .engine import EngineConfig, Runtime, derive_seed, run_game
from .errors import DegradedOutputError, SandtableError, ValidationFailure
from .llm import Backend
from .model import EntryKind, History, Scenario, load_scenario

logger = logging.getLogger(__name__)

JUDGE_QUESTION = "Did armed conflict occur in this game? Answer YES or NO."

_YES_NO_RE = re.compile(r"\b(yes|no)\b", re.IGNORECASE)


@dataclass(frozen=True)
class ClassifierSpec:
    """How to turn a transcript into a boolean outcome.

    ``llm_judge`` asks the control a yes/no question; ``keyword`` is a
    deterministic substring match over adjudication entries.  Any
    probability estimate is only as good as this choice, so it stays
    pluggable.
    """

    kind: str  # llm_judge | keyword
    terms: tuple[str, ...] = ()
    question: str = JUDGE_QUESTION
    backend: str | None = None

    def __post_init__(self):
        if self.kind not in ("llm_judge", "keyword"):
            raise ValidationFailure(f"unknown classifier kind: {self.kind!r}")
        if self.kind == "keyword" and not self.terms:
            raise ValidationFailure("keyword classifier needs a non-empty term list")

    @classmethod
    def from_json(cls, doc: dict) -> "ClassifierSpec":
        return cls(
            kind=doc["kind"],
            terms=tuple(doc.get("terms", ())),
            question=doc.get("question", JUDGE_QUESTION),
            backend=doc.get("backend"),
        )

    def to_json(self) -> dict:
        doc: dict = {"kind": self.kind}
        if self.terms:
            doc["terms"] = list(self.terms)
        if self.question != JUDGE_QUESTION:
            doc["question"] = self.question
        if self.backend:
            doc["backend"] = self.backend
        return doc


@dataclass(frozen=True)
class Variant:
    label: str
    personas: dict  # player id -> persona description

    @classmethod
    def from_json(cls, doc: dict) -> "Variant":
        return cls(label=doc["label"], personas=dict(doc.get("personas", {})))

    def to_json(self) -> dict:
        return {"label": self.label, "personas": dict(self.personas)}


@dataclass(frozen=True)
class ExperimentSpec:
    scenario: Scenario
    variants: tuple[Variant, ...]
    iterations: int
    classifier: ClassifierSpec
    seed: int = 0

    def __post_init__(self):
        if self.iterations < 1:
            raise ValidationFailure(f"iterations must be >= 1, got {self.iterations}")
        for variant in self.variants:
            # Fails fast on persona maps naming unknown players.
            self.scenario.with_personas(variant.personas)

    @classmethod
    def from_json(cls, doc: dict, base_dir: Path | None = None) -> "ExperimentSpec":
        if "scenario_path" in doc:
            path = Path(doc["scenario_path"])
            if base_dir is not None and not path.is_absolute():
                path = base_dir / path
            scenario = load_scenario(path)
        else:
            scenario = Scenario.from_json(doc["scenario"])
        return cls(
            scenario=scenario,
            variants=tuple(Variant.from_json(v) for v in doc["variants"]),
            iterations=doc["iterations"],
            classifier=ClassifierSpec.from_json(doc["classifier"]),
            seed=doc.get("seed", 0),
        )


def load_experiment(path: str | Path) -> ExperimentSpec:
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        return ExperimentSpec.from_json(json.load(fh), base_dir=path.parent)


@dataclass(frozen=True)
class FrequencyRow:
    label: str
    positive: int
    total: int


@dataclass(frozen=True)
class FrequencyTable:
    rows: tuple[FrequencyRow, ...]

    def to_csv(self, path: str | Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["variant", "positive", "total"])
            for row in self.rows:
                writer.writerow([row.label, row.positive, row.total])


def classify_outcome(
    history: History,
    classifier: ClassifierSpec,
    backends: dict[str, Backend] | None = None,
    seed: int = 0,
) -> bool:
    """True when the classifier finds the outcome of interest.

    The keyword mode is a pure function of the transcript.  The judge
    mode asks once, retries once on an unparseable answer, then raises.
    """
    if classifier.kind == "keyword":
        terms = [t.lower() for t in classifier.terms]
        for entry in history:
            if entry.kind is EntryKind.ADJUDICATION:
                text = entry.text.lower()
                if any(term in text for term in terms):
                    return True
        return False

    if backends is None:
        raise ValidationFailure("llm_judge classifier needs backends")
    runtime = Runtime(backends, None, seed, EngineConfig())
    control = ControlAgent(
        runtime,
        backend_id=classifier.backend
        or ("control" if "control" in backends else "default"),
    )
    raw = ""
    for _ in range(2):
        raw = asyncio.run(control.answer_question(history, classifier.question))
        match = _YES_NO_RE.search(raw)
        if match:
            return match.group(1).lower() == "yes"
    raise DegradedOutputError("judge answer is not a YES or NO", raw_text=raw)


def run_experiment(
    spec: ExperimentSpec,
    backends_factory,
    out_dir: str | Path,
    config: EngineConfig | None = None,
) -> tuple[FrequencyTable, dict]:
    """Play variants x iterations, classify, aggregate, persist.

    ``backends_factory`` is called once per run (ordered scripts are
    consumed by play, so backends cannot be shared across runs).  Failed
    runs are recorded in the run index and excluded from the totals.
    """
    out_dir = Path(out_dir)
    rows: list[FrequencyRow] = []
    run_index: dict = {}
    for variant in spec.variants:
        scenario = spec.scenario.with_personas(variant.personas)
        positive = 0
        total = 0
        for iteration in range(spec.iterations):
            run_id = f"{_slug(variant.label)}-{iteration:03d}"
            run_dir = out_dir / "runs" / run_id
            run_seed = derive_seed(spec.seed, f"{variant.label}:{iteration}")
            backends = backends_factory()
            result = run_game(scenario, backends, run_seed, run_dir, config)
            record = {
                "path": str(result.transcript_path),
                "seed": run_seed,
                "variant": variant.label,
                "status": result.status,
            }
            if result.status != "finished":
                logger.warning("run %s aborted, excluded: %s", run_id, result.error)
                record["error"] = result.error
            else:
                try:
                    outcome = classify_outcome(
                        result.history, spec.classifier, backends, seed=run_seed
                    )
                except SandtableError as exc:
                    logger.warning("run %s unclassifiable, excluded: %s", run_id, exc)
                    record["status"] = "classification_error"
                    record["error"] = str(exc)
                else:
                    record["outcome"] = outcome
                    total += 1
                    positive += int(outcome)
            run_index[run_id] = record
        rows.append(FrequencyRow(label=variant.label, positive=positive, total=total))

    table = FrequencyTable(tuple(rows))
    table.to_csv(out_dir / "frequency.csv")
    (out_dir / "runs.json").write_text(
        json.dumps(run_index, indent=2) + "\n", encoding="utf-8"
    )
    return table, run_index


def _slug(label: str) -> str:
    return re.sub(r"[^a-zA-Z0-9_-]+", "_", label).strip("_") or "variant"
