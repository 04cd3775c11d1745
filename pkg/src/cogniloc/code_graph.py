"""Per-version code graph: segments, typed call/inheritance edges, and a BM25 index.

The graph is built once from a fixture document (see ``FIXTURE_FIELDS``) and is
read-only afterwards, so any number of threads may query it.
"""

from __future__ import annotations

import gzip
import hashlib
import json
import logging
import math
import re
import zlib
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import Any, Iterable, Mapping

from .errors import (
    CorruptIndex,
    DanglingEdge,
    DuplicateSegmentId,
    EmptyQuery,
    IoFailure,
    MalformedFixture,
    UnknownSegment,
)

logger = logging.getLogger(__name__)

SEGMENT_KINDS = frozenset({"method", "constructor"})
DEFAULT_EDGE_KINDS = frozenset({"invokes", "inherits"})

FIXTURE_FIELDS = ("system", "version", "segments", "edges")
SEGMENT_FIELDS = (
    "id",
    "kind",
    "qualified_name",
    "signature",
    "document_path",
    "start_line",
    "end_line",
    "body",
)
EDGE_FIELDS = ("from", "to", "kind")

BM25_K1 = 1.2
BM25_B = 0.75

INDEX_FORMAT = "cogniloc-graph"
INDEX_FORMAT_VERSION = 1


# --------------------------------------------------------------------------
# tokenization


_SPLIT_RE = re.compile(r"[^A-Za-z0-9]+")
_CAMEL_RE = re.compile(r"[A-Z]+(?=[A-Z][a-z])|[A-Z]?[a-z]+|[A-Z]+|[0-9]+")


def tokenize(text: str) -> list[str]:
    """Code-aware tokenizer used for both indexing and querying.

    Splits on non-alphanumerics (which covers snake_case), then splits
    camelCase / PascalCase runs, lowercases, and drops 1-character tokens.

    >>> tokenize("restoreSnapshot(tableName, take_fail_safe)")
    ['restore', 'snapshot', 'table', 'name', 'take', 'fail', 'safe']
    """
    tokens = []
    for chunk in _SPLIT_RE.split(text):
        if not chunk:
            continue
        for piece in _CAMEL_RE.findall(chunk):
            piece = piece.lower()
            if len(piece) > 1:
                tokens.append(piece)
    return tokens


# --------------------------------------------------------------------------
# domain types


@dataclass(frozen=True)
class CodeSegment:
    id: str
    kind: str
    qualified_name: str
    signature: str
    document_path: str
    start_line: int
    end_line: int
    body: str

    @property
    def name(self) -> str:
        return self.qualified_name.rsplit(".", 1)[-1]

    def to_dict(self) -> dict[str, Any]:
        return {f: getattr(self, f) for f in SEGMENT_FIELDS}


@dataclass(frozen=True)
class Edge:
    src: str
    dst: str
    kind: str = "invokes"

    def to_dict(self) -> dict[str, Any]:
        return {"from": self.src, "to": self.dst, "kind": self.kind}


@dataclass(frozen=True)
class SearchHit:
    segment: str
    score: float


class BM25Index:
    """Okapi BM25 over one concatenated field per document.

    idf(t) = ln(1 + (N - df + 0.5) / (df + 0.5)), which is strictly positive,
    so every document sharing at least one term with the query scores > 0.
    """

    def __init__(self, docs: Mapping[str, list[str]], k1: float = BM25_K1, b: float = BM25_B):
        self.k1 = k1
        self.b = b
        self.doc_ids: tuple[str, ...] = tuple(docs)
        self.doc_len: dict[str, int] = {d: len(toks) for d, toks in docs.items()}
        self.n_docs = len(self.doc_ids)
        total = sum(self.doc_len.values())
        self.avgdl = total / self.n_docs if self.n_docs else 0.0
        postings: dict[str, dict[str, int]] = defaultdict(dict)
        for doc_id, toks in docs.items():
            for tok in toks:
                postings[tok][doc_id] = postings[tok].get(doc_id, 0) + 1
        self.postings: dict[str, dict[str, int]] = dict(postings)

    def idf(self, term: str) -> float:
        df = len(self.postings.get(term, ()))
        return math.log(1.0 + (self.n_docs - df + 0.5) / (df + 0.5))

    def scores(self, terms: Iterable[str]) -> dict[str, float]:
        acc: dict[str, float] = {}
        # fixed accumulation order keeps equal documents bit-identical
        for term in sorted(set(terms)):
            posting = self.postings.get(term)
            if not posting:
                continue
            idf = self.idf(term)
            for doc_id, tf in posting.items():
                norm = self.k1 * (1.0 - self.b + self.b * self.doc_len[doc_id] / self.avgdl)
                acc[doc_id] = acc.get(doc_id, 0.0) + idf * tf * (self.k1 + 1.0) / (tf + norm)
        return acc


@dataclass(frozen=True)
class CodeGraph:
    system: str
    version: str
    segments: Mapping[str, CodeSegment]
    edges: tuple[Edge, ...]
    lexical_index: BM25Index = field(repr=False, compare=False)
    _out: Mapping[str, tuple[Edge, ...]] = field(repr=False, compare=False)

    def __contains__(self, segment_id: object) -> bool:
        return segment_id in self.segments

    def __len__(self) -> int:
        return len(self.segments)

    def to_fixture(self) -> dict[str, Any]:
        return {
            "system": self.system,
            "version": self.version,
            "segments": [s.to_dict() for s in self.segments.values()],
            "edges": [e.to_dict() for e in self.edges],
        }


# --------------------------------------------------------------------------
# building


def _check_fields(record: Any, allowed: tuple[str, ...], what: str) -> None:
    if not isinstance(record, Mapping):
        raise MalformedFixture(f"{what} must be an object, got {type(record).__name__}")
    unknown = set(record) - set(allowed)
    if unknown:
        raise MalformedFixture(f"{what} has unknown field(s): {sorted(unknown)}")
    missing = [f for f in allowed if f not in record]
    if missing:
        raise MalformedFixture(f"{what} is missing field(s): {missing}")


def _parse_segment(raw: Any, idx: int) -> CodeSegment:
    _check_fields(raw, SEGMENT_FIELDS, f"segments[{idx}]")
    for name in ("id", "kind", "qualified_name", "signature", "document_path", "body"):
        if not isinstance(raw[name], str):
            raise MalformedFixture(f"segments[{idx}].{name} must be a string")
    for name in ("start_line", "end_line"):
        if not isinstance(raw[name], int) or isinstance(raw[name], bool) or raw[name] < 1:
            raise MalformedFixture(f"segments[{idx}].{name} must be a positive integer")
    if not raw["id"]:
        raise MalformedFixture(f"segments[{idx}].id is empty")
    if raw["kind"] not in SEGMENT_KINDS:
        raise MalformedFixture(f"segments[{idx}].kind {raw['kind']!r} not in {sorted(SEGMENT_KINDS)}")
    if raw["start_line"] > raw["end_line"]:
        raise MalformedFixture(f"segments[{idx}] has start_line > end_line")
    if not raw["body"]:
        raise MalformedFixture(f"segments[{idx}].body is empty")
    if not raw["document_path"]:
        raise MalformedFixture(f"segments[{idx}].document_path is empty")
    return CodeSegment(**raw)


def build_graph(fixture: Mapping[str, Any], edge_kinds: Iterable[str] = DEFAULT_EDGE_KINDS) -> CodeGraph:
    """Validate a parsed fixture document and build an immutable graph."""
    _check_fields(fixture, FIXTURE_FIELDS, "fixture")
    system, version = fixture["system"], fixture["version"]
    if not isinstance(system, str) or not system or not isinstance(version, str) or not version:
        raise MalformedFixture("system and version must be non-empty strings")
    if not isinstance(fixture["segments"], list) or not isinstance(fixture["edges"], list):
        raise MalformedFixture("segments and edges must be lists")
    kinds = frozenset(edge_kinds)

    segments: dict[str, CodeSegment] = {}
    for idx, raw in enumerate(fixture["segments"]):
        seg = _parse_segment(raw, idx)
        if seg.id in segments:
            raise DuplicateSegmentId(seg.id)
        segments[seg.id] = seg

    edges: list[Edge] = []
    out: dict[str, list[Edge]] = {sid: [] for sid in segments}
    for idx, raw in enumerate(fixture["edges"]):
        _check_fields(raw, EDGE_FIELDS, f"edges[{idx}]")
        if not all(isinstance(raw[f], str) for f in EDGE_FIELDS):
            raise MalformedFixture(f"edges[{idx}] fields must be strings")
        if raw["kind"] not in kinds:
            raise MalformedFixture(f"edges[{idx}].kind {raw['kind']!r} not in {sorted(kinds)}")
        if raw["from"] not in segments or raw["to"] not in segments:
            raise DanglingEdge(raw["from"], raw["to"])
        edge = Edge(raw["from"], raw["to"], raw["kind"])
        edges.append(edge)
        out[edge.src].append(edge)

    index = BM25Index({sid: tokenize(s.body + "\n" + s.qualified_name) for sid, s in segments.items()})
    return CodeGraph(
        system=system,
        version=version,
        segments=MappingProxyType(segments),
        edges=tuple(edges),
        lexical_index=index,
        _out=MappingProxyType({k: tuple(v) for k, v in out.items()}),
    )


def read_fixture(path: str | Path) -> dict[str, Any]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"IoFailure: cannot read {path}: {exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedFixture(f"{path}: not valid JSON ({exc})") from exc


# --------------------------------------------------------------------------
# queries


def get_segment(graph: CodeGraph, segment_id: str) -> CodeSegment:
    try:
        return graph.segments[segment_id]
    except KeyError:
        raise UnknownSegment(segment_id) from None


def callees_of(graph: CodeGraph, segment_id: str, kind: str | None = None) -> list[str]:
    """Out-neighbours of ``segment_id`` in fixture declaration order, deduplicated."""
    if segment_id not in graph.segments:
        raise UnknownSegment(segment_id)
    seen: dict[str, None] = {}
    for edge in graph._out[segment_id]:
        if kind is None or edge.kind == kind:
            seen.setdefault(edge.dst, None)
    return list(seen)


def search(graph: CodeGraph, query: str, k: int) -> list[SearchHit]:
    """Top-``k`` segments by BM25; ties broken by segment id."""
    if k < 1:
        raise ValueError("k must be >= 1")
    terms = tokenize(query)
    if not terms:
        raise EmptyQuery(f"EmptyQuery: {query!r} has no indexable tokens")
    scores = graph.lexical_index.scores(terms)
    ranked = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))
    return [SearchHit(sid, score) for sid, score in ranked[:k] if score > 0.0]


# --------------------------------------------------------------------------
# persistence


def save_graph(graph: CodeGraph, path: str | Path) -> None:
    payload = json.dumps(graph.to_fixture(), sort_keys=True, separators=(",", ":"))
    envelope = {
        "format": INDEX_FORMAT,
        "format_version": INDEX_FORMAT_VERSION,
        "sha256": hashlib.sha256(payload.encode("utf-8")).hexdigest(),
        "graph": payload,
    }
    data = json.dumps(envelope, sort_keys=True).encode("utf-8")
    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        # mtime=0 keeps the file byte-identical across runs
        with open(path, "wb") as fh:
            fh.write(gzip.compress(data, mtime=0))
    except OSError as exc:
        raise IoFailure(f"IoFailure: cannot write {path}: {exc}") from exc


def load_graph(path: str | Path) -> CodeGraph:
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise IoFailure(f"IoFailure: cannot read {path}: {exc}") from exc
    try:
        envelope = json.loads(gzip.decompress(raw).decode("utf-8"))
    except (OSError, EOFError, zlib.error, UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptIndex(f"CorruptIndex: {path}: {exc}") from exc
    if not isinstance(envelope, dict) or envelope.get("format") != INDEX_FORMAT:
        raise CorruptIndex(f"CorruptIndex: {path} is not a graph index")
    if envelope.get("format_version") != INDEX_FORMAT_VERSION:
        raise CorruptIndex(f"CorruptIndex: unsupported format version {envelope.get('format_version')!r}")
    payload = envelope.get("graph")
    if not isinstance(payload, str) or hashlib.sha256(payload.encode("utf-8")).hexdigest() != envelope.get("sha256"):
        raise CorruptIndex(f"CorruptIndex: {path} failed checksum")
    try:
        return build_graph(json.loads(payload))
    except (MalformedFixture, DanglingEdge, DuplicateSegmentId, json.JSONDecodeError) as exc:
        raise CorruptIndex(f"CorruptIndex: {path}: {exc}") from exc


def index_filename(system: str, version: str) -> str:
    safe = re.sub(r"[^A-Za-z0-9._-]+", "_", f"{system}__{version}")
    return f"{safe}.graph.gz"
