import gzip
import math

import pytest
from hypothesis import given, settings, strategies as st

from cogniloc.code_graph import (
    build_graph,
    callees_of,
    get_segment,
    index_filename,
    load_graph,
    save_graph,
    search,
    tokenize,
)
from cogniloc.errors import (
    CorruptIndex,
    DanglingEdge,
    DuplicateSegmentId,
    EmptyQuery,
    IoFailure,
    MalformedFixture,
    UnknownSegment,
)

from conftest import PLANTED, tiny_fixture


def test_tokenize_splits_camel_and_snake_case():
    assert tokenize("restoreSnapshot(take_fail_safe, HTTPServer)") == [
        "restore", "snapshot", "take", "fail", "safe", "http", "server",
    ]
    assert tokenize("a b c") == []


def test_build_three_segment_graph():
    g = build_graph(tiny_fixture([("A", "B"), ("B", "C")]))
    assert len(g) == 3 and len(g.edges) == 2


def test_dangling_edge_rejected():
    fx = tiny_fixture([("A", "B")])
    fx["edges"].append({"from": "A", "to": "X", "kind": "invokes"})
    with pytest.raises(DanglingEdge):
        build_graph(fx)


def test_duplicate_id_rejected():
    fx = tiny_fixture([], ids=["A"])
    fx["segments"].append(dict(fx["segments"][0]))
    with pytest.raises(DuplicateSegmentId):
        build_graph(fx)


@pytest.mark.parametrize(
    "mutate",
    [
        lambda fx: fx["segments"][0].update(extra=1),
        lambda fx: fx.update(owner="x"),
        lambda fx: fx["segments"][0].pop("body"),
        lambda fx: fx["segments"][0].update(body=""),
        lambda fx: fx["segments"][0].update(kind="field"),
        lambda fx: fx["segments"][0].update(start_line=9, end_line=2),
        lambda fx: fx["segments"][0].update(document_path=""),
        lambda fx: fx["edges"][0].update(kind="calls"),
    ],
)
def test_malformed_fixtures_rejected(mutate):
    fx = tiny_fixture([("A", "B")])
    mutate(fx)
    with pytest.raises(MalformedFixture):
        build_graph(fx)


def test_hbase_fixture_call_structure(hbase_graph):
    assert len(hbase_graph) == 25
    assert callees_of(hbase_graph, PLANTED, "invokes") == [
        "admin.internalRestoreSnapshotAsync",
        "admin.deleteSnapshot",
    ]
    body = get_segment(hbase_graph, PLANTED).body
    # two-level try/catch with the rethrow ahead of the cleanup block
    assert body.count("try {") == 3
    assert body.index("throw new RestoreSnapshotException(msg, e)") < body.index("deleteSnapshot(")


def test_callees_order_and_leaf():
    g = build_graph(tiny_fixture([("A", "B"), ("A", "C")]))
    assert callees_of(g, "A") == ["B", "C"]
    assert callees_of(g, "C") == []
    with pytest.raises(UnknownSegment):
        callees_of(g, "Z")


def test_callees_kind_filter_matches_brute_force(hbase_graph):
    for sid in hbase_graph.segments:
        for kind in ("invokes", "inherits"):
            expected = []
            for e in hbase_graph.edges:
                if e.src == sid and e.kind == kind and e.dst not in expected:
                    expected.append(e.dst)
            assert callees_of(hbase_graph, sid, kind) == expected


def test_get_segment_round_trip(hbase_graph):
    for sid in hbase_graph.segments:
        assert get_segment(hbase_graph, sid).id == sid
    with pytest.raises(UnknownSegment):
        get_segment(hbase_graph, "nope")


def test_bm25_tf_ordering_hand_values():
    g = build_graph(
        tiny_fixture([], ids=["A", "B"], bodies={"A": "snapshot snapshot snapshot", "B": "snapshot restore table"})
    )
    hits = search(g, "snapshot", 10)
    assert [h.segment for h in hits] == ["A", "B"]
    # hand evaluation: idf = ln(1.2), |d| = avgdl = 5
    assert hits[0].score == pytest.approx(0.28650530353335724, abs=1e-12)
    assert hits[1].score == pytest.approx(0.1823215567939546, abs=1e-12)


def test_bm25_length_normalisation_hand_value():
    g = build_graph(
        tiny_fixture(
            [],
            ids=["A", "B"],
            bodies={"A": "snapshot snapshot snapshot", "B": "snapshot restore table region server log entry"},
        )
    )
    (hit,) = search(g, "restore", 5)
    assert hit.segment == "B"
    assert hit.score == pytest.approx(0.6206085221292533, abs=1e-12)


def test_search_edge_cases(hbase_graph):
    assert search(hbase_graph, "zzzunmatched", 5) == []
    with pytest.raises(EmptyQuery):
        search(hbase_graph, "a ! ?", 5)
    assert len(search(hbase_graph, "snapshot", 1000)) <= 25
    with pytest.raises(ValueError):
        search(hbase_graph, "snapshot", 0)


def test_round_trip_identical(tmp_path, hbase_graph):
    path = tmp_path / index_filename("hbase", "2.4.0")
    save_graph(hbase_graph, path)
    loaded = load_graph(path)
    for sid in hbase_graph.segments:
        assert callees_of(loaded, sid) == callees_of(hbase_graph, sid)
    before = search(hbase_graph, "snapshot", 100)
    after = search(loaded, "snapshot", 100)
    assert [h.segment for h in before] == [h.segment for h in after]
    for a, b in zip(before, after):
        assert abs(a.score - b.score) <= 1e-12


def test_save_is_byte_stable(tmp_path, hbase_graph):
    save_graph(hbase_graph, tmp_path / "a.gz")
    save_graph(hbase_graph, tmp_path / "b.gz")
    assert (tmp_path / "a.gz").read_bytes() == (tmp_path / "b.gz").read_bytes()


def test_truncated_and_tampered_index(tmp_path, hbase_graph):
    path = tmp_path / "g.gz"
    save_graph(hbase_graph, path)
    raw = path.read_bytes()
    (tmp_path / "cut.gz").write_bytes(raw[: len(raw) // 2])
    with pytest.raises(CorruptIndex):
        load_graph(tmp_path / "cut.gz")
    text = gzip.decompress(raw).decode().replace("restoreSnapshot", "restoreSnapshoX", 1)
    (tmp_path / "bad.gz").write_bytes(gzip.compress(text.encode()))
    with pytest.raises(CorruptIndex):
        load_graph(tmp_path / "bad.gz")
    with pytest.raises(IoFailure):
        load_graph(tmp_path / "missing.gz")


# --------------------------------------------------------------------------
# properties

WORDS = ["snapshot", "restore", "delete", "table", "rollback", "region", "fail"]


@st.composite
def corpora(draw):
    n = draw(st.integers(1, 8))
    bodies = {f"S{i}": " ".join(draw(st.lists(st.sampled_from(WORDS), min_size=1, max_size=12))) for i in range(n)}
    return build_graph(tiny_fixture([], ids=sorted(bodies), bodies=bodies))


@settings(max_examples=60, deadline=None)
@given(corpora(), st.lists(st.sampled_from(WORDS), min_size=1, max_size=4), st.integers(1, 8))
def test_search_ordering_prefix_and_determinism(g, terms, k):
    query = " ".join(terms)
    full = search(g, query, 50)
    assert search(g, query, 50) == full
    assert search(g, query, k) == full[:k]
    for a, b in zip(full, full[1:]):
        assert a.score > b.score or (a.score == b.score and a.segment < b.segment)
    assert all(h.score > 0 for h in full)


@settings(max_examples=60, deadline=None)
@given(corpora(), st.sampled_from(WORDS))
def test_bm25_monotone_in_term_frequency(g, term):
    """Adding one more occurrence of a query term to one document never lowers its score.

    The document's other tokens are held fixed while the corpus statistics
    (|d|, avgdl) move with the extra token, as they would in practice.
    """
    target = sorted(g.segments)[0]
    fx = g.to_fixture()
    before = dict((h.segment, h.score) for h in search(g, term, 50)).get(target, 0.0)
    for seg in fx["segments"]:
        if seg["id"] == target:
            seg["body"] += " " + term
    after = dict((h.segment, h.score) for h in search(build_graph(fx), term, 50))[target]
    assert after >= before - 1e-12


def test_bm25_matches_formula_on_hbase(hbase_graph):
    """Independent re-evaluation of the scoring formula for every hit."""
    idx = hbase_graph.lexical_index
    query = "failsafe snapshot deleted after rollback"
    terms = sorted(set(tokenize(query)))
    n = len(hbase_graph)
    lengths = {sid: len(tokenize(s.body + "\n" + s.qualified_name)) for sid, s in hbase_graph.segments.items()}
    avgdl = sum(lengths.values()) / n
    for hit in search(hbase_graph, query, 100):
        toks = tokenize(hbase_graph.segments[hit.segment].body + "\n" + hbase_graph.segments[hit.segment].qualified_name)
        expected = 0.0
        for t in terms:
            tf = toks.count(t)
            if not tf:
                continue
            df = sum(1 for s in hbase_graph.segments.values() if t in tokenize(s.body + "\n" + s.qualified_name))
            idf = math.log(1 + (n - df + 0.5) / (df + 0.5))
            expected += idf * tf * 2.2 / (tf + 1.2 * (0.25 + 0.75 * lengths[hit.segment] / avgdl))
        assert hit.score == pytest.approx(expected, rel=1e-12)
    assert idx.n_docs == n
