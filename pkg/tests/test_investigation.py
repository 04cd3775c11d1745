import pytest
from hypothesis import given, settings, strategies as st

from cogniloc.agents import AgentRole, ExplorationVerdict, ScriptedBackend
from cogniloc.code_graph import build_graph, get_segment
from cogniloc.errors import BackendUnavailable, PruneTargetAbsent, UnknownSegment
from cogniloc.front import BugReport, Hypothesis
from cogniloc.investigation import (
    CallChain,
    ChainExplorer,
    ExplorationParams,
    Scratchpad,
    SupervisorSettings,
    click2cause,
    investigate,
    scratchpad_prune,
    scratchpad_push,
)

from conftest import PLANTED, tiny_fixture
from oracles import ExploreCase, TableBackend, check_explore_invariants, click2cause_oracle, random_explore_case

REPORT = BugReport("B-1", "title", "description", "demo", "1.0")


def v(conf, *calls):
    return ExplorationVerdict(conf, tuple(calls), "")


class DictBackend:
    def __init__(self, explorer=None, supervisor=None, fail=()):
        self.explorer = explorer or {}
        self.supervisor = supervisor or []
        self.fail = set(fail)
        self.log = []

    def complete(self, request):
        self.log.append((request.role, request.focus_segment, request.context.get("phase")))
        if (request.role, request.focus_segment) in self.fail or request.role in self.fail:
            raise BackendUnavailable("down")
        if request.role is AgentRole.SUPERVISOR:
            return self.supervisor.pop(0)
        return self.explorer[request.focus_segment]


@pytest.fixture
def abcd():
    return build_graph(tiny_fixture([("A", "B"), ("B", "C"), ("A", "D"), ("D", "E")]))


def test_example_early_stop_skips_sibling(abcd):
    be = DictBackend({"B": v(0.6, "C"), "C": v(0.95), "D": v(0.3, "E")})
    explorer = ChainExplorer(REPORT, abcd, be, ExplorationParams(4, 0.9, 0.5))
    chain = explorer.run("A", ["B", "D"])
    assert chain == CallChain(("A", "B", "C"), 0.95)
    assert explorer.queried == ["B", "C"]
    assert explorer.early_stopped
    # scratchpad replay: surviving entries equal the returned chain's verdicts
    assert explorer.scratchpad.segments == ["B", "C"]


def test_pruned_node_children_never_queried(abcd):
    be = DictBackend({"B": v(0.6), "C": v(0.95), "D": v(0.3, "E"), "E": v(1.0)})
    explorer = ChainExplorer(REPORT, abcd, be, ExplorationParams(4, 0.9, 0.5))
    chain = explorer.run("A", ["D", "B"])
    assert "E" not in explorer.queried
    assert explorer.queried == ["D", "B"]
    assert chain == CallChain(("A", "B"), 0.6)
    assert "D" not in explorer.scratchpad


def test_no_seeds_returns_start(abcd):
    be = DictBackend()
    assert click2cause(REPORT, "A", [], ExplorationParams(3), abcd, be) == CallChain(("A",), 0.0)
    assert be.log == []


def test_depth_bound(abcd):
    be = DictBackend({"B": v(0.6, "C"), "C": v(0.95)})
    explorer = ChainExplorer(REPORT, abcd, be, ExplorationParams(1, 0.9, 0.5))
    assert explorer.run("A", ["B"]) == CallChain(("A", "B"), 0.6)
    assert [r.action for r in explorer.trace] == ["expand", "skip_depth"]


def test_backend_failure_prunes_and_continues(abcd):
    be = DictBackend({"D": v(0.7)}, fail=[(AgentRole.EXPLORER, "B")])
    explorer = ChainExplorer(REPORT, abcd, be, ExplorationParams(3, 0.9, 0.5))
    assert explorer.run("A", ["B", "D"]) == CallChain(("A", "D"), 0.7)


def test_unknown_segment_is_pruned(abcd):
    be = DictBackend({"B": v(0.7)})
    explorer = ChainExplorer(REPORT, abcd, be, ExplorationParams(3, 0.9, 0.0))
    assert explorer.run("A", ["ghost", "B"]) == CallChain(("A", "B"), 0.7)
    assert explorer.queried == ["B"]
    with pytest.raises(UnknownSegment):
        click2cause(REPORT, "ghost", [], ExplorationParams(3), abcd, be)


def test_non_callee_suggestions_dropped(abcd):
    be = DictBackend({"B": v(0.6, "D", "C"), "C": v(0.7), "D": v(0.99)})
    explorer = ChainExplorer(REPORT, abcd, be, ExplorationParams(3, 0.9, 0.0))
    assert explorer.run("A", ["B"]) == CallChain(("A", "B", "C"), 0.7)
    assert "D" not in explorer.queried


def test_cycle_visited_once():
    g = build_graph(tiny_fixture([("A", "B"), ("B", "C"), ("C", "B"), ("C", "A")]))
    be = DictBackend({"B": v(0.5, "C"), "C": v(0.6, "B", "A")})
    explorer = ChainExplorer(REPORT, g, be, ExplorationParams(5, 0.9, 0.0))
    assert explorer.run("A", ["B"]) == CallChain(("A", "B", "C"), 0.6)
    assert explorer.queried == ["B", "C"]
    assert [r.action for r in explorer.trace][-2:] == ["skip_visited", "skip_visited"]


def test_equal_confidence_is_not_a_prune_and_does_not_replace_best(abcd):
    be = DictBackend({"B": v(0.5, "C"), "C": v(0.5)})
    explorer = ChainExplorer(REPORT, abcd, be, ExplorationParams(3, 0.9, 0.5))
    assert explorer.run("A", ["B"]) == CallChain(("A", "B"), 0.5)
    assert explorer.queried == ["B", "C"]


def test_exploration_params_validation():
    for bad in (dict(max_depth=0), dict(max_depth=1, tau=0.0), dict(max_depth=1, c_parent=1.5)):
        with pytest.raises(ValueError):
            ExplorationParams(**bad)


def test_scratchpad_ops():
    pad = Scratchpad()
    scratchpad_push(pad, "A", v(0.1))
    scratchpad_push(pad, "B", v(0.2))
    assert scratchpad_prune(pad, "B").segments == ["A"]
    pad = Scratchpad().push("A", v(0)).push("B", v(0)).push("C", v(0))
    assert pad.prune("A").segments == []
    with pytest.raises(PruneTargetAbsent):
        pad.prune("A")
    with pytest.raises(ValueError):
        Scratchpad().push("A", v(0)).push("A", v(0))


# --------------------------------------------------------------------------
# oracle equivalence and trace invariants


def run_case(case: ExploreCase):
    graph = build_graph(case.fixture())
    backend = TableBackend(case)
    explorer = ChainExplorer(REPORT, graph, backend, ExplorationParams(case.max_depth, case.tau, case.c_parent))
    chain = explorer.run(case.start, case.seeds)
    return graph, backend, explorer, chain


@settings(max_examples=150, deadline=None)
@given(st.randoms(use_true_random=False))
def test_click2cause_matches_stack_oracle(rng):
    case = random_explore_case(rng)
    graph, backend, explorer, chain = run_case(case)
    expected = click2cause_oracle(case)
    assert chain.path == expected.path
    assert chain.confidence == expected.confidence
    assert explorer.visited == expected.visited
    assert backend.calls == expected.calls
    assert [(r.segment, r.depth, r.action) for r in explorer.trace] == expected.trace
    check_explore_invariants(case, graph, backend.calls, explorer, chain)


def test_trace_replay_scratchpad_matches_chain(abcd):
    be = DictBackend({"B": v(0.6, "C"), "C": v(0.95), "D": v(0.3, "E")})
    explorer = ChainExplorer(REPORT, abcd, be, ExplorationParams(4, 0.9, 0.5))
    chain = explorer.run("A", ["D", "B"])
    assert [explorer.verdicts[s] for s in explorer.scratchpad.segments] == [explorer.verdicts[s] for s in chain.path[1:]]


# --------------------------------------------------------------------------
# supervisor


def hyp(seg="A", score=0.6):
    return Hypothesis(seg, "guess", "medium", score)


def test_supervisor_no_exploration_accepts():
    g = build_graph(tiny_fixture([("A", "B")]))
    be = DictBackend(supervisor=[v(0.8)])
    out = investigate(REPORT, hyp(), g, be)
    assert out.chain == CallChain(("A",), 0.0)
    assert out.accepted and out.supervisor_conf == 0.8 and out.backend_calls == 1


def test_supervisor_leaf_segment():
    g = build_graph(tiny_fixture([("A", "B")]))
    be = DictBackend(supervisor=[ExplorationVerdict(0.4, ("B",), "")])
    out = investigate(REPORT, hyp("B"), g, be)
    assert out.chain.path == ("B",) and not out.accepted and out.supervisor_conf == 0.4


def test_supervisor_explores_then_assesses(abcd):
    be = DictBackend(
        {"B": v(0.7, "C"), "C": v(0.95)},
        supervisor=[ExplorationVerdict(0.5, ("B",), "", 2), v(0.9)],
    )
    out = investigate(REPORT, hyp(score=0.6), abcd, be)
    assert out.chain == CallChain(("A", "B", "C"), 0.95)
    assert out.accepted and out.rounds == 1 and out.backend_calls == 4
    assert [p for _, _, p in be.log if p] == ["review", "assess"]


def test_supervisor_depth_capped(abcd):
    be = DictBackend({"B": v(0.7, "C"), "C": v(0.95)}, supervisor=[ExplorationVerdict(0.5, ("B",), "", 9), v(0.1), v(0.1)])
    out = investigate(REPORT, hyp(score=0.6), abcd, be, SupervisorSettings(max_depth_cap=1))
    assert out.chain.path == ("A", "B")


def test_supervisor_second_round_and_limit(abcd):
    be = DictBackend(
        {"B": v(0.7), "D": v(0.8)},
        supervisor=[ExplorationVerdict(0.5, ("B",), ""), ExplorationVerdict(0.3, ("D", "B"), ""), v(0.4)],
    )
    out = investigate(REPORT, hyp(score=0.6), abcd, be)
    assert out.rounds == 2 and not out.accepted and out.supervisor_conf == 0.4
    assert out.chain == CallChain(("A", "D"), 0.8)
    explorer_calls = [f for r, f, _ in be.log if r is AgentRole.EXPLORER]
    assert explorer_calls == ["B", "D"]


def test_supervisor_failure_degrades(abcd):
    be = DictBackend(fail=[AgentRole.SUPERVISOR])
    out = investigate(REPORT, hyp(score=0.6), abcd, be)
    assert out.degraded and not out.accepted and out.supervisor_conf == pytest.approx(0.3)


def test_unknown_hypothesis_segment(abcd):
    with pytest.raises(UnknownSegment):
        investigate(REPORT, hyp("nope"), abcd, DictBackend())


def test_hbase_scripted_trace(hbase_graph, hbase_bug, fixtures_dir):
    backend = ScriptedBackend.from_file(fixtures_dir / "hbase_script.json")
    out = investigate(hbase_bug, Hypothesis(PLANTED, "s", "medium", 0.6), hbase_graph, backend)
    assert out.chain == CallChain((PLANTED, "admin.internalRestoreSnapshotAsync"), 0.95)
    assert out.accepted and out.supervisor_conf == 0.85
    (trace,) = out.traces
    assert [(r.segment, r.action) for r in trace] == [
        ("admin.deleteSnapshot", "prune"),
        ("admin.internalRestoreSnapshotAsync", "early_stop"),
    ]
    get_segment(hbase_graph, PLANTED)
