"""Independent reference implementations used as test oracles.

Kept deliberately naive: explicit stacks instead of recursion, set
intersections instead of running counters.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

from cogniloc.agents import AgentRequest, AgentRole, ExplorationVerdict
from cogniloc.errors import BackendUnavailable

CONF_GRID = [i / 10 for i in range(11)]


# --------------------------------------------------------------------------
# metrics


def ap_oracle(ranked: list[str], truth: set[str], k: int) -> float:
    total = 0.0
    for i in range(1, min(k, len(ranked)) + 1):
        if ranked[i - 1] in truth:
            precision = len(set(ranked[:i]) & truth) / i
            total += precision
    return total / len(truth)


def rr_oracle(ranked: list[str], truth: set[str], k: int) -> float:
    positions = [i + 1 for i, item in enumerate(ranked[:k]) if item in truth]
    return 1.0 / min(positions) if positions else 0.0


def hit_oracle(ranked: list[str], truth: set[str], k: int) -> float:
    return 1.0 if set(ranked[:k]) & truth else 0.0


def random_metric_case(rng: random.Random) -> tuple[list[str], set[str]]:
    universe = [f"m{i}" for i in range(rng.randint(1, 15))]
    ranked = rng.sample(universe, rng.randint(0, len(universe)))
    truth = set(rng.sample(universe, rng.randint(1, len(universe))))
    return ranked, truth


# --------------------------------------------------------------------------
# click2cause


@dataclass
class ExploreCase:
    """A fully scripted exploration problem over a small random graph."""

    callees: dict[str, list[str]]
    verdicts: dict[str, tuple[float, list[str]]]
    failing: set[str]
    start: str
    seeds: list[str]
    max_depth: int
    tau: float
    c_parent: float

    def fixture(self) -> dict:
        segments = [
            {
                "id": sid,
                "kind": "method",
                "qualified_name": f"pkg.C.{sid}",
                "signature": f"void {sid}()",
                "document_path": f"src/{sid[:2]}.java",
                "start_line": 1,
                "end_line": 1,
                "body": f"void {sid}() {{ }}",
            }
            for sid in self.callees
        ]
        edges = [
            {"from": a, "to": b, "kind": "invokes"} for a, outs in self.callees.items() for b in outs
        ]
        return {"system": "rand", "version": "1", "segments": segments, "edges": edges}


def random_explore_case(rng: random.Random, max_segments: int = 12) -> ExploreCase:
    n = rng.randint(2, max_segments)
    ids = [f"s{i}" for i in range(n)]
    cyclic = rng.random() < 0.5
    callees: dict[str, list[str]] = {}
    for i, sid in enumerate(ids):
        pool = [t for j, t in enumerate(ids) if (cyclic and j != i) or j > i]
        outs = [t for t in pool if rng.random() < 0.35]
        rng.shuffle(outs)
        callees[sid] = outs
    verdicts = {}
    for sid in ids:
        outs = callees[sid]
        calls = rng.sample(outs, rng.randint(0, len(outs)))
        verdicts[sid] = (rng.choice(CONF_GRID), calls)
    failing = {sid for sid in ids[1:] if rng.random() < 0.08}
    start = ids[0]
    seeds = rng.sample(callees[start], rng.randint(0, len(callees[start])))
    return ExploreCase(
        callees=callees,
        verdicts=verdicts,
        failing=failing,
        start=start,
        seeds=seeds,
        max_depth=rng.randint(1, 4),
        tau=rng.choice([0.7, 0.9, 1.0]),
        c_parent=rng.choice(CONF_GRID),
    )


class TableBackend:
    """Explorer backend answering from an ExploreCase; logs every call."""

    def __init__(self, case: ExploreCase):
        self.case = case
        self.calls: list[str] = []

    def complete(self, request: AgentRequest):
        assert request.role is AgentRole.EXPLORER
        seg = request.focus_segment
        self.calls.append(seg)
        if seg in self.case.failing:
            raise BackendUnavailable(f"scripted outage on {seg}")
        conf, calls = self.case.verdicts[seg]
        return ExplorationVerdict(conf, tuple(calls), f"judged {seg}")


@dataclass
class OracleResult:
    path: tuple[str, ...]
    confidence: float
    visited: set[str]
    calls: list[str]
    trace: list[tuple[str, int, str]] = field(default_factory=list)


def click2cause_oracle(case: ExploreCase) -> OracleResult:
    """Explicit-stack replay of the depth-first walk with the same skip/prune/stop rules."""
    visited = {case.start}
    calls: list[str] = []
    trace: list[tuple[str, int, str]] = []
    best_path: tuple[str, ...] = ()
    best_conf = 0.0
    # frames: (segment, parent path, depth, parent confidence)
    stack = [(s, (case.start,), 1, case.c_parent) for s in reversed(case.seeds)]
    while stack:
        seg, parent_path, depth, parent_conf = stack.pop()
        if seg in visited:
            trace.append((seg, depth, "skip_visited"))
            continue
        if depth > case.max_depth:
            trace.append((seg, depth, "skip_depth"))
            continue
        visited.add(seg)
        calls.append(seg)
        path = parent_path + (seg,)
        if seg in case.failing:
            trace.append((seg, depth, "prune"))
            continue
        conf, children = case.verdicts[seg]
        if conf < parent_conf:
            trace.append((seg, depth, "prune"))
            continue
        if conf > best_conf:
            best_path, best_conf = path, conf
        if conf >= case.tau:
            trace.append((seg, depth, "early_stop"))
            break
        trace.append((seg, depth, "expand"))
        allowed = case.callees[seg]
        kids = [c for c in dict.fromkeys(children) if c in allowed]
        stack.extend((c, path, depth + 1, conf) for c in reversed(kids))
    if not best_path:
        best_path, best_conf = (case.start,), 0.0
    return OracleResult(best_path, best_conf, visited, calls, trace)


# --------------------------------------------------------------------------
# statistics


def cliffs_oracle(a: list[float], b: list[float]) -> float:
    signs = [math.copysign(1, x - y) if x != y else 0 for x in a for y in b]
    return sum(signs) / len(signs)


# --------------------------------------------------------------------------
# ranking


@dataclass
class RankingCase:
    candidates: list
    hypotheses: list
    filtered: object
    k: int
    docs: dict[str, str]

    def fixture(self) -> dict:
        return {
            "system": "rank",
            "version": "1",
            "segments": [
                {
                    "id": sid,
                    "kind": "method",
                    "qualified_name": f"p.C.{sid}",
                    "signature": "void f()",
                    "document_path": doc,
                    "start_line": 1,
                    "end_line": 1,
                    "body": "void f() {}",
                }
                for sid, doc in self.docs.items()
            ],
            "edges": [],
        }


def random_ranking_case(rng: random.Random) -> RankingCase:
    from cogniloc.front import CandidateSet, Hypothesis
    from cogniloc.investigation import CallChain
    from cogniloc.ranking import ScoredCandidate

    pool = [f"x{i:02d}" for i in range(rng.randint(3, 20))]
    grid = [i / 20 for i in range(21)]
    hyp_segs = rng.sample(pool, rng.randint(0, min(10, len(pool))))
    hypotheses = [Hypothesis(s, "", "low", rng.choice(grid)) for s in hyp_segs]
    investigated = rng.sample(hypotheses, rng.randint(0, len(hypotheses)))
    candidates = []
    for h in investigated:
        rest = [p for p in pool if p != h.segment]
        chain = (h.segment, *rng.sample(rest, rng.randint(0, min(3, len(rest)))))
        sv, ob = rng.choice(grid), rng.choice(grid)
        candidates.append(
            ScoredCandidate(CallChain(chain, rng.choice(grid)), h, sv, ob, (sv + ob) / 2, rng.random() < 0.5)
        )
    filt_ids = rng.sample(pool, rng.randint(0, len(pool)))
    scores = sorted((rng.choice(grid) for _ in filt_ids), reverse=True)
    filtered = CandidateSet(tuple(zip(filt_ids, scores)), stage="filtered")
    docs = {p: f"src/f{rng.randint(0, 6)}.java" for p in pool}
    return RankingCase(candidates, hypotheses, filtered, rng.randint(1, 12), docs)


def rank_oracle(case: RankingCase) -> list[tuple[str, str]]:
    """Concatenate every block with duplicates, then dedupe and cut once at the end."""
    inv = {c.hypothesis.segment for c in case.candidates}
    free = [h.score for h in case.hypotheses if h.segment not in inv]
    ceiling = max(free) if free else -math.inf
    leads, demoted = [], []
    for c in case.candidates:
        (leads if c.accepted or c.final_score > ceiling else demoted).append(c)
    leads.sort(key=lambda c: (-c.final_score, -c.hypothesis.score, c.hypothesis.segment))
    flat = [(s, "investigated") for c in leads for s in c.chain.path]
    by_seg = {c.hypothesis.segment: c for c in demoted}
    rows = []
    for pos, h in enumerate(case.hypotheses):
        if h.segment in by_seg:
            rows.append((-h.score, pos, by_seg[h.segment].chain.path))
        elif h.segment not in inv:
            rows.append((-h.score, pos, (h.segment,)))
    rows.sort()
    flat += [(s, "hypothesis_backfill") for _, _, path in rows for s in path]
    flat += [(s, "filter_backfill") for s in case.filtered.ids]
    out, seen = [], set()
    for sid, prov in flat:
        if sid not in seen:
            seen.add(sid)
            out.append((sid, prov))
    return out[: case.k]


def project_oracle(methods: list[str], docs: dict[str, str], k: int) -> list[str]:
    out: list[str] = []
    for m in methods:
        if docs[m] not in out:
            out.append(docs[m])
    return out[:k]


def check_ranking_invariants(case: RankingCase, methods, documents) -> None:
    """No duplicates, dominance, completeness at k and projection consistency."""
    from cogniloc.ranking import PROVENANCES

    ids = [sid for sid, _ in methods]
    assert len(ids) == len(set(ids)), "no duplicates"
    assert len(ids) <= case.k
    tiers = [PROVENANCES.index(prov) for _, prov in methods]
    assert tiers == sorted(tiers), "investigated entries precede all backfill"

    inv = {c.hypothesis.segment for c in case.candidates}
    free = [h.score for h in case.hypotheses if h.segment not in inv]
    ceiling = max(free, default=-math.inf)
    leads = [c for c in case.candidates if c.accepted or c.final_score > ceiling]
    keys = [(-c.final_score, -c.hypothesis.score, c.hypothesis.segment) for c in leads]
    # each lead's first fresh segment appears in key order
    order, seen = [], set()
    for c in sorted(leads, key=lambda c: (-c.final_score, -c.hypothesis.score, c.hypothesis.segment)):
        fresh = [s for s in c.chain.path if s not in seen]
        seen.update(c.chain.path)
        if fresh:
            order.append(ids.index(fresh[0]) if fresh[0] in ids else len(ids))
    assert order == sorted(order), "lead candidates ordered by final score"
    lead_ids = [sid for sid, prov in methods if prov == "investigated"]
    if keys:
        assert len(lead_ids) == min(case.k, len({s for c in leads for s in c.chain.path}))

    universe = {s for c in case.candidates for s in c.chain.path}
    universe |= {h.segment for h in case.hypotheses} | set(case.filtered.ids)
    if len(universe) >= case.k:
        assert len(ids) == case.k, "completeness at k"
    else:
        assert set(ids) == universe

    assert list(documents) == project_oracle(ids, case.docs, case.k), "projection consistency"


def wilcoxon_enumeration_oracle(a: list[float], b: list[float]) -> float:
    """Two-sided exact p by flipping every sign over the observed mid-ranks."""
    import itertools

    diffs = [x - y for x, y in zip(a, b) if x != y]
    mags = sorted(abs(d) for d in diffs)
    ranks = {m: sum(i + 1 for i, v in enumerate(mags) if v == m) / mags.count(m) for m in set(mags)}
    r = [ranks[abs(d)] for d in diffs]
    w_plus = sum(x for x, d in zip(r, diffs) if d > 0)
    stat = min(w_plus, sum(r) - w_plus)
    hits = sum(1 for signs in itertools.product((0, 1), repeat=len(r)) if sum(x for x, s in zip(r, signs) if s) <= stat + 1e-9)
    return min(1.0, 2 * hits / 2 ** len(r))


def check_explore_invariants(case: ExploreCase, graph, calls: list[str], explorer, chain) -> None:
    """Trace-log invariants: visited-once, depth bound, prune blocks children, global early stop."""
    trace = explorer.trace
    assert len(calls) == len(set(calls)), "visited-once"
    judged = [r for r in trace if r.action in ("expand", "prune", "early_stop")]
    assert [r.segment for r in judged] == calls, "every backend call is a judged trace entry"
    assert all(r.depth <= case.max_depth for r in judged), "depth bound"

    # rebuild parents from the depth-first order: a depth-d entry hangs off the
    # most recent depth d-1 entry
    last_at: dict[int, object] = {}
    for rec in trace:
        if rec.depth > 1:
            parent = last_at[rec.depth - 1]
            assert parent.action == "expand", "children only below expanded nodes"
            if rec.action in ("expand", "prune", "early_stop"):
                assert rec.segment in graph_callees(graph, parent.segment), "children are callees"
        elif rec.action != "skip_visited":
            assert rec.segment in case.seeds
        last_at[rec.depth] = rec
    for rec, nxt in zip(trace, trace[1:]):
        if rec.action == "prune":
            assert nxt.depth <= rec.depth, "prune blocks children"
        assert rec.action != "early_stop", "no explorer call after the first conf >= tau"
    if any(r.action == "early_stop" for r in trace):
        assert explorer.early_stopped

    chain.validate(graph)
    assert chain.path[0] == case.start
    if len(chain.path) == 1:
        assert chain.confidence == 0.0
    else:
        assert chain.confidence == explorer.verdicts[chain.path[-1]].conf


def graph_callees(graph, sid: str) -> list[str]:
    from cogniloc.code_graph import callees_of

    return callees_of(graph, sid, "invokes")
