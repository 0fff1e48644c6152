"""sandtable: open-ended wargame simulation with LLM and human players."""

from .model import (
    AgentId,
    EntryKind,
    History,
    HistoryEntry,
    NATURE,
    NodeKind,
    Operator,
    Persona,
    RosterNode,
    SYSTEM,
    Scenario,
    ValidationReport,
    append_entry,
    load_scenario,
    load_transcript,
    save_scenario,
    save_transcript,
    validate_roster,
    visible_history,
)
from .llm import (
    Backend,
    BackendConfig,
    ChatMessage,
    HttpChatBackend,
    RecordingBackend,
    ReplayBackend,
    SamplingParams,
    ScriptedBackend,
    build_backend,
    complete,
    load_backends,
    record,
)
from .agents import (
    ControlAgent,
    PLAYER_QUERY,
    PlayerAgent,
    TeamAgent,
    TeamResponse,
)
from .engine import Engine, EngineConfig, GameState, GameStatus, RunResult, interpret, run_game
from .experiments import (
    ClassifierSpec,
    ExperimentSpec,
    FrequencyTable,
    Variant,
    classify_outcome,
    load_experiment,
    run_experiment,
)
from .mailbox import MailboxStore

__version__ = "0.1.0"
