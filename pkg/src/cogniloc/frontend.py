"""Source frontends that turn a repository checkout into a graph fixture.

The reference ingestion path is a hand-written fixture document. A frontend is
anything with an ``extract(root, system, version) -> dict`` method returning
that same schema, so ``build_graph(frontend.extract(...))`` works unchanged.

Only a small Python frontend ships here. It resolves calls by bare name within
the repository, which is far weaker than type-resolved Java parsing, but it is
enough to index real code for smoke tests.
"""

from __future__ import annotations

import ast
from pathlib import Path
from typing import Any, Protocol


class Frontend(Protocol):
    def extract(self, root: str | Path, system: str, version: str) -> dict[str, Any]: ...


class _Collector(ast.NodeVisitor):
    def __init__(self, module: str, rel_path: str, lines: list[str]):
        self.module = module
        self.rel_path = rel_path
        self.lines = lines
        self.scope: list[str] = []
        self.segments: list[dict[str, Any]] = []
        self.calls: dict[str, list[str]] = {}

    def visit_ClassDef(self, node: ast.ClassDef) -> None:
        self.scope.append(node.name)
        self.generic_visit(node)
        self.scope.pop()

    def _function(self, node: ast.FunctionDef | ast.AsyncFunctionDef) -> None:
        qual = ".".join([self.module, *self.scope, node.name])
        body = "\n".join(self.lines[node.lineno - 1 : node.end_lineno])
        args = ", ".join(a.arg for a in node.args.args)
        self.segments.append(
            {
                "id": qual,
                "kind": "constructor" if node.name == "__init__" else "method",
                "qualified_name": qual,
                "signature": f"{node.name}({args})",
                "document_path": self.rel_path,
                "start_line": node.lineno,
                "end_line": node.end_lineno or node.lineno,
                "body": body or node.name,
            }
        )
        names = []
        # ast.walk is breadth-first; sort to keep callees in source order
        found = [sub for sub in ast.walk(node) if isinstance(sub, ast.Call)]
        for sub in sorted(found, key=lambda c: (c.lineno, c.col_offset)):
            fn = sub.func
            if isinstance(fn, ast.Name):
                names.append(fn.id)
            elif isinstance(fn, ast.Attribute):
                names.append(fn.attr)
        self.calls[qual] = names
        self.scope.append(node.name)
        self.generic_visit(node)
        self.scope.pop()

    visit_FunctionDef = _function
    visit_AsyncFunctionDef = _function


class PythonFrontend:
    """Extract functions/methods and name-resolved call edges from ``*.py`` files."""

    def extract(self, root: str | Path, system: str, version: str) -> dict[str, Any]:
        root = Path(root)
        segments: list[dict[str, Any]] = []
        calls: dict[str, list[str]] = {}
        for path in sorted(root.rglob("*.py")):
            rel = path.relative_to(root).as_posix()
            source = path.read_text(encoding="utf-8", errors="replace")
            try:
                tree = ast.parse(source)
            except SyntaxError:
                continue
            module = rel[:-3].replace("/", ".")
            collector = _Collector(module, rel, source.splitlines())
            collector.visit(tree)
            segments.extend(collector.segments)
            calls.update(collector.calls)

        by_name: dict[str, list[str]] = {}
        for seg in segments:
            by_name.setdefault(seg["qualified_name"].rsplit(".", 1)[-1], []).append(seg["id"])
        edges = []
        for src, names in calls.items():
            seen = set()
            for name in names:
                for dst in by_name.get(name, ()):
                    if dst != src and dst not in seen:
                        seen.add(dst)
                        edges.append({"from": src, "to": dst, "kind": "invokes"})
        return {"system": system, "version": version, "segments": segments, "edges": edges}
