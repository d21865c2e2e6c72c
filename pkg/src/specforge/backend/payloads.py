"""Builders for the JSON payloads that travel through the backend envelope.

Keeping these in one place guarantees the oracle backend, the remote
backend, and the replay cache all see byte-identical request shapes.
"""

from __future__ import annotations

from .. import minilang
from ..codebase import FunctionRecord


def function_payload(fn: FunctionRecord) -> dict:
    doc = {
        "name": fn.name,
        "params": [list(p) for p in fn.params],
        "body": fn.body_text(),
        "phase": fn.phase,
        "is_entry": fn.is_entry,
        "callees": sorted(fn.callees),
        "external_callees": sorted(fn.external_callees),
        "call_sites": [],
    }
    if not isinstance(fn.body, str):
        doc["call_sites"] = [
            {
                "callee": st.callee,
                "call_site": idx,
                "target": st.target,
                "args": [minilang.render_expr(a) for a in st.args],
            }
            for idx, st in minilang.call_sites(
                minilang.FunctionDef(fn.name, fn.param_names, fn.body, 0, 0)
            )
        ]
    else:
        # opaque bodies: call sites are unknown; list callees positionally
        doc["call_sites"] = [
            {"callee": c, "call_site": i, "target": None, "args": []}
            for i, c in enumerate(sorted(fn.callees))
        ]
    return doc
