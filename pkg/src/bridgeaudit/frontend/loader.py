"""Load a codebase directory into a :class:`CanonicalAst`."""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Union

from .nodes import CanonicalAst, SourceFile
from .parser import parse_source
from .schema import ingest_ast_json

AST_SUFFIX = ".ast.json"


def _parse_file(path: Path, file_id: str) -> SourceFile:
    return parse_source(path.read_bytes(), file_id)


def load_codebase(path: Union[str, Path], workers: int = 1) -> CanonicalAst:
    """Parse every ``*.sol`` file (and ingest ``*.ast.json``) under ``path``.

    File ids are POSIX paths relative to ``path``; files are visited in
    sorted order so the result does not depend on directory listing order.
    """
    root = Path(path)
    if not root.exists():
        raise FileNotFoundError(f"no such codebase: {root}")
    if root.is_file():
        if root.name.endswith(AST_SUFFIX):
            return ingest_ast_json(json.loads(root.read_text(encoding="utf-8")))
        return CanonicalAst([_parse_file(root, root.name)])
    sol = sorted(p for p in root.rglob("*.sol") if p.is_file())
    jobs = [(p, p.relative_to(root).as_posix()) for p in sol]
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        files = list(pool.map(lambda job: _parse_file(*job), jobs))
    for doc_path in sorted(root.rglob("*" + AST_SUFFIX)):
        files.extend(ingest_ast_json(json.loads(doc_path.read_text(encoding="utf-8"))).files)
    return CanonicalAst(files)


def parse_codebase(sources: dict[str, str]) -> CanonicalAst:
    """Build a codebase from in-memory ``{file_id: source}`` pairs, sorted by id."""
    return CanonicalAst(parse_source(text, fid) for fid, text in sorted(sources.items()))
