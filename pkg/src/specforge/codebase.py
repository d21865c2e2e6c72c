"""The system under analysis: either a parsed MiniLang module or an
externally supplied call-graph manifest for codebases in other languages.

Both paths produce the same immutable :class:`Codebase`, so every downstream
stage (planning, generation, reasoning, validation) is source-agnostic.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

from . import minilang
from .errors import DuplicateFunctionError, ManifestError, UnknownFunctionError

LANG_MINILANG = "minilang"
LANG_MANIFEST = "manifest"


@dataclass(frozen=True)
class FunctionRecord:
    """One function: the unit of all per-function work.

    ``body`` is a parsed statement tuple for MiniLang input and opaque source
    text for manifest input. ``callees`` only names functions defined in the
    same codebase; unresolved targets (library calls, unresolved indirect
    calls) are flagged in ``external_callees`` and excluded from layering.
    """

    name: str
    params: tuple[tuple[str, str], ...]  # (name, scalar kind)
    body: tuple[minilang.Stmt, ...] | str
    callees: frozenset[str]
    external_callees: frozenset[str]
    is_entry: bool
    phase: str | None
    span: tuple[str, int, int]  # file, start line, end line

    @property
    def param_names(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.params)

    def body_text(self) -> str:
        """Source text of the body; MiniLang bodies are rendered back."""
        if isinstance(self.body, str):
            return self.body
        fn = minilang.FunctionDef(
            self.name, self.param_names, self.body, self.span[1], self.span[2]
        )
        return minilang.render_function(fn)


@dataclass(frozen=True)
class Codebase:
    functions: dict[str, FunctionRecord]
    language: str  # LANG_MINILANG or LANG_MANIFEST
    domain_docs: tuple[tuple[str, str], ...] = ()
    source_language: str | None = None
    source_path: str = "<source>"

    def __post_init__(self):
        for fn in self.functions.values():
            missing = fn.callees - self.functions.keys()
            if missing:
                raise ManifestError(
                    f"function '{fn.name}' references undefined callees "
                    f"{sorted(missing)} without an external flag"
                )

    def function(self, name: str) -> FunctionRecord:
        try:
            return self.functions[name]
        except KeyError:
            raise UnknownFunctionError(f"unknown function '{name}'") from None

    def sorted_names(self) -> list[str]:
        return sorted(self.functions)

    def entry_functions(self) -> list[str]:
        return sorted(n for n, f in self.functions.items() if f.is_entry)


def _compute_entries(records: dict[str, dict]) -> set[str]:
    called = set()
    for rec in records.values():
        called.update(c for c in rec["callees"] if c in records)
    return set(records) - called


def parse_minilang_module(source: str, path: str = "<source>") -> Codebase:
    """Parse MiniLang source into a Codebase.

    Callees are computed from call statements; calls to names not defined in
    the module are flagged external. ``is_entry`` holds exactly for functions
    with no in-codebase caller.
    """
    fns = minilang.parse_module(source)
    defs: dict[str, minilang.FunctionDef] = {}
    for fn in fns:
        if fn.name in defs:
            raise DuplicateFunctionError(f"duplicate function name '{fn.name}'")
        defs[fn.name] = fn

    raw: dict[str, dict] = {}
    for fn in fns:
        targets = minilang.callee_names(fn)
        raw[fn.name] = {
            "callees": {t for t in targets if t in defs},
            "external": {t for t in targets if t not in defs},
        }
    entries = _compute_entries(
        {n: {"callees": d["callees"]} for n, d in raw.items()}
    )

    records = {
        fn.name: FunctionRecord(
            name=fn.name,
            params=tuple((p, "int") for p in fn.params),
            body=fn.body,
            callees=frozenset(raw[fn.name]["callees"]),
            external_callees=frozenset(raw[fn.name]["external"]),
            is_entry=fn.name in entries,
            phase=None,
            span=(path, fn.start_line, fn.end_line),
        )
        for fn in fns
    }
    return Codebase(functions=records, language=LANG_MINILANG, source_path=path)


def load_minilang_file(path: str | Path) -> Codebase:
    p = Path(path)
    return parse_minilang_module(p.read_text(encoding="utf-8"), path=str(p))


# --------------------------------------------------------------------------
# Manifest ingestion
#
# JSON schema:
#   { "language": string,
#     "functions": [ { "name": str, "file": str, "start_line": int,
#                      "end_line": int, "body": str, "callees": [str],
#                      "external_callees": [str], "phase": str|null,
#                      "params": [[name, kind], ...]   # optional
#                    } ] }


def load_callgraph_manifest(path: str | Path) -> Codebase:
    p = Path(path)
    try:
        doc = json.loads(p.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ManifestError(f"cannot read manifest {p}: {exc}") from exc
    return parse_manifest(doc, source_path=str(p))


def parse_manifest(doc: dict, source_path: str = "<manifest>") -> Codebase:
    if not isinstance(doc, dict) or "functions" not in doc:
        raise ManifestError("manifest must be an object with a 'functions' array")
    entries = doc["functions"]
    if not isinstance(entries, list):
        raise ManifestError("'functions' must be an array")

    raw: dict[str, dict] = {}
    for rec in entries:
        name = rec.get("name")
        if not isinstance(name, str) or not name:
            raise ManifestError("every function needs a nonempty string name")
        if name in raw:
            raise DuplicateFunctionError(f"duplicate function name '{name}'")
        raw[name] = rec

    for name, rec in raw.items():
        external = set(rec.get("external_callees") or ())
        for callee in rec.get("callees") or ():
            if callee not in raw:
                raise ManifestError(
                    f"function '{name}' lists dangling callee '{callee}' "
                    "(not defined and not in external_callees)"
                )
        # names listed in both places are treated as in-codebase edges
        rec["_external"] = external - set(rec.get("callees") or ())

    entry_names = _compute_entries(
        {n: {"callees": set(r.get("callees") or ())} for n, r in raw.items()}
    )

    records = {}
    for name, rec in raw.items():
        records[name] = FunctionRecord(
            name=name,
            params=tuple((str(n), str(k)) for n, k in (rec.get("params") or ())),
            body=str(rec.get("body") or ""),
            callees=frozenset(rec.get("callees") or ()),
            external_callees=frozenset(rec["_external"]),
            is_entry=name in entry_names,
            phase=rec.get("phase") or None,
            span=(
                str(rec.get("file") or source_path),
                int(rec.get("start_line") or 0),
                int(rec.get("end_line") or 0),
            ),
        )
    return Codebase(
        functions=records,
        language=LANG_MANIFEST,
        source_language=doc.get("language"),
        source_path=source_path,
    )


def codebase_to_manifest(cb: Codebase) -> dict:
    """Serialize any Codebase into the manifest schema (edge-preserving)."""
    functions = []
    for name in cb.sorted_names():
        fn = cb.functions[name]
        functions.append(
            {
                "name": fn.name,
                "file": fn.span[0],
                "start_line": fn.span[1],
                "end_line": fn.span[2],
                "body": fn.body_text(),
                "callees": sorted(fn.callees),
                "external_callees": sorted(fn.external_callees),
                "phase": fn.phase,
                "params": [list(p) for p in fn.params],
            }
        )
    return {
        "language": cb.source_language or cb.language,
        "functions": functions,
    }


def save_callgraph_manifest(cb: Codebase, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(codebase_to_manifest(cb), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )


def callees_of(cb: Codebase, name: str) -> frozenset[str]:
    """In-codebase callees of ``name``; raises UnknownFunctionError otherwise."""
    return cb.function(name).callees
