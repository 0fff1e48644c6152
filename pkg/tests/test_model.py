import json

import networkx as nx
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sandtable.errors import OrderingError, RosterError, ValidationFailure
from sandtable.model import (
    EntryKind,
    History,
    HistoryEntry,
    NATURE,
    NodeKind,
    Persona,
    RosterNode,
    Scenario,
    append_entry,
    load_scenario,
    load_transcript,
    member_closure,
    save_scenario,
    save_transcript,
    validate_roster,
    visible_history,
)
from helpers import make_player, make_team


def entry(seq, text="text", author="p1", kind=EntryKind.PLAYER_RESPONSE, move=0, vis=None):
    return HistoryEntry(seq=seq, author=author, kind=kind, text=text, move_index=move, visibility=vis)


# --- HistoryEntry / History ------------------------------------------------


def test_entry_rejects_empty_text():
    with pytest.raises(ValidationFailure):
        entry(0, text="")


def test_entry_rejects_empty_visibility_set():
    with pytest.raises(ValidationFailure):
        entry(0, vis=frozenset())


def test_entry_rejects_negative_positions():
    with pytest.raises(ValidationFailure):
        entry(-1)
    with pytest.raises(ValidationFailure):
        entry(0, move=-1)


def test_append_to_empty_history():
    h = append_entry(History(), entry(0))
    assert len(h) == 1


def test_append_keeps_order():
    h = History((entry(0), entry(1)))
    h2 = append_entry(h, entry(2))
    assert [e.seq for e in h2] == [0, 1, 2]
    assert len(h) == 2  # original untouched


def test_append_rejects_non_monotone_seq():
    h = History((entry(0), entry(1)))
    with pytest.raises(OrderingError):
        append_entry(h, entry(1))


def test_history_rejects_out_of_order_construction():
    with pytest.raises(OrderingError):
        History((entry(1), entry(0)))


def test_unknown_entry_kind_rejected_at_parse():
    doc = entry(0).to_json()
    doc["kind"] = "soliloquy"
    with pytest.raises(ValidationFailure):
        HistoryEntry.from_json(doc)


# --- visible_history -------------------------------------------------------


ROSTER = [make_player("p1"), make_player("p2")]


def test_all_visible_to_any_viewer():
    h = History((entry(0), entry(1), entry(2)))
    assert visible_history(h, "p1", ROSTER).entries == h.entries


def test_visibility_filter():
    h = History(
        (
            entry(0),
            entry(1, vis=frozenset({"p1"})),
            entry(2, vis=frozenset({"p2"})),
        )
    )
    assert [e.seq for e in visible_history(h, "p1", ROSTER)] == [0, 1]
    assert [e.seq for e in visible_history(h, "p2", ROSTER)] == [0, 2]


def test_unknown_viewer_is_roster_error():
    h = History((entry(0),))
    with pytest.raises(RosterError):
        visible_history(h, "ghost", ROSTER)


entries_strategy = st.lists(
    st.tuples(
        st.sampled_from([None, frozenset({"p1"}), frozenset({"p2"}), frozenset({"p1", "p2"})]),
        st.text(min_size=1, max_size=8),
    ),
    max_size=12,
)


@given(entries_strategy, st.sampled_from(["p1", "p2"]))
def test_visible_history_is_subsequence(specs, viewer):
    h = History(tuple(entry(i, text=t, vis=v) for i, (v, t) in enumerate(specs)))
    vis = visible_history(h, viewer, ROSTER)
    it = iter(h.entries)
    assert all(e in it for e in vis.entries)  # subsequence check


@given(entries_strategy, st.sampled_from(["p1", "p2"]))
def test_append_never_changes_existing_visibility(specs, viewer):
    h = History(tuple(entry(i, text=t, vis=v) for i, (v, t) in enumerate(specs)))
    before = visible_history(h, viewer, ROSTER).entries
    h2 = append_entry(h, entry(len(specs) + 1, text="new", vis=frozenset({viewer})))
    after = visible_history(h2, viewer, ROSTER).entries
    assert after[: len(before)] == before


# --- roster validation ------------------------------------------------------


def test_smallest_valid_team():
    roster = [make_player("P1"), make_player("P2"), make_team("T", "P1", ["P1", "P2"])]
    assert validate_roster(roster).ok


def test_two_cycle_detected():
    roster = [
        make_player("L"),
        make_team("A", "L", ["B"]),
        make_team("B", "L", ["A"]),
    ]
    report = validate_roster(roster)
    assert any(v.kind == "cycle" for v in report.violations)


def test_dangling_member_reference():
    roster = [make_player("L"), make_team("T", "L", ["P9"])]
    report = validate_roster(roster)
    assert any(v.kind == "dangling_reference" for v in report.violations)


def test_duplicate_id():
    roster = [make_player("P1"), make_player("P1")]
    assert any(v.kind == "duplicate_id" for v in validate_roster(roster).violations)


def test_empty_team():
    roster = [make_player("L"), make_team("T", "L", [])]
    assert any(v.kind == "empty_team" for v in validate_roster(roster).violations)


def test_leader_must_be_player():
    roster = [
        make_player("P1"),
        make_team("T1", "P1", ["P1"]),
        make_team("T2", "T1", ["P1", "T1"]),
    ]
    assert any(v.kind == "bad_leader" for v in validate_roster(roster).violations)


def test_reserved_ids_rejected():
    roster = [make_player(NATURE)]
    assert any(v.kind == "reserved_id" for v in validate_roster(roster).violations)


def test_team_of_teams_and_shared_player_ok():
    roster = [
        make_player("p1"),
        make_player("p2"),
        make_team("squad", "p1", ["p1", "p2"]),
        make_team("taskforce", "p2", ["squad", "p2"]),
    ]
    assert validate_roster(roster).ok


@st.composite
def random_rosters(draw):
    n = draw(st.integers(min_value=1, max_value=8))
    ids = [f"n{i}" for i in range(n)]
    kinds = [draw(st.booleans()) for _ in ids]  # True -> team
    if not any(not k for k in kinds):
        kinds[0] = False  # keep at least one player for leaders
    players = [i for i, is_team in zip(ids, kinds) if not is_team]
    roster = []
    for nid, is_team in zip(ids, kinds):
        if is_team:
            members = draw(
                st.lists(st.sampled_from(ids), min_size=1, max_size=4, unique=True)
            )
            leader = draw(st.sampled_from(players))
            roster.append(make_team(nid, leader, members))
        else:
            roster.append(make_player(nid))
    return roster


@settings(max_examples=200, deadline=None)
@given(random_rosters())
def test_cycle_detection_agrees_with_networkx(roster):
    graph = nx.DiGraph()
    graph.add_nodes_from(node.id for node in roster)
    for node in roster:
        if node.kind is NodeKind.TEAM:
            for member in node.members:
                graph.add_edge(node.id, member)
    has_cycle = not nx.is_directed_acyclic_graph(graph)
    report = validate_roster(roster)
    assert any(v.kind == "cycle" for v in report.violations) == has_cycle


def test_member_closure_nested():
    roster = [
        make_player("p1"),
        make_player("p2"),
        make_player("p3"),
        make_team("inner", "p1", ["p1", "p2"]),
        make_team("outer", "p3", ["inner", "p3"]),
    ]
    assert member_closure(roster, "outer") == {"outer", "inner", "p1", "p2", "p3"}
    assert member_closure(roster, "p2") == {"p2"}


# --- Scenario ---------------------------------------------------------------


def scenario_fixture(**overrides):
    base = dict(
        name="fixture",
        situation="A situation.",
        roster=(make_player("p1", persona="Cautious."), make_player("p2")),
        top_level_responders=("p1", "p2"),
        injects=("first inject",),
        moves=2,
        time_step="week",
        nature=True,
        asymmetric=True,
        per_move_questions=("What now?",),
    )
    base.update(overrides)
    return Scenario(**base)


def test_zero_moves_rejected():
    with pytest.raises(ValidationFailure):
        scenario_fixture(moves=0)


def test_unresolved_responder_rejected():
    with pytest.raises(ValidationFailure):
        scenario_fixture(top_level_responders=("p1", "p9"))


def test_scenario_roundtrip_identity(tmp_path):
    scenario = scenario_fixture()
    path = tmp_path / "s.json"
    save_scenario(scenario, path)
    assert load_scenario(path) == scenario


def test_scenario_with_personas():
    scenario = scenario_fixture().with_personas({"p2": "Bold."})
    assert scenario.node("p2").persona == Persona("Bold.")
    assert scenario.node("p1").persona == Persona("Cautious.")
    with pytest.raises(ValidationFailure):
        scenario_fixture().with_personas({"p9": "missing"})


def test_scenario_format_version_checked(tmp_path):
    doc = scenario_fixture().to_json()
    doc["format_version"] = 99
    path = tmp_path / "s.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(ValidationFailure):
        load_scenario(path)


def test_unknown_roster_kind_rejected(tmp_path):
    doc = scenario_fixture().to_json()
    doc["roster"][0]["kind"] = "observer"
    path = tmp_path / "s.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(ValidationFailure):
        load_scenario(path)


def test_transcript_roundtrip(tmp_path):
    h = History(
        (
            entry(0, kind=EntryKind.SCENARIO, author="SYSTEM"),
            entry(3, kind=EntryKind.ADJUDICATION, author=NATURE, vis=frozenset({"p1"})),
        )
    )
    path = tmp_path / "t.json"
    save_transcript(h, path)
    assert load_transcript(path) == h


def test_degraded_flag_survives_roundtrip(tmp_path):
    h = History((HistoryEntry(0, NATURE, EntryKind.ADJUDICATION, "same", 1, degraded=True),))
    path = tmp_path / "t.json"
    save_transcript(h, path)
    assert load_transcript(path).entries[0].degraded is True
