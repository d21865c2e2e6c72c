"""Top-down specification generation.

Phases advance in lockstep rounds over one shared worker pool; within a
round, every ready layer's batches are dispatched concurrently and the
coordinator alone mutates shared state, in sorted order, so two runs over
the same input write byte-identical artifacts. Functions sharing a
nontrivial SCC are generated together in one combined request; a function
whose generation fails poisons nothing - its callees simply proceed without
that caller's expectations.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import minilang
from .backend.base import ReasoningBackend, ReasoningRequest, RequestKind
from .backend.payloads import function_payload
from .codebase import Codebase, FunctionRecord
from .errors import SpecGenerationError, SpecforgeError
from .oracle import strongest_post, cond_to_formula
from . import formula as F
from .planner import LayerPlan
from .specmodel import (
    Condition,
    DomainKnowledge,
    ExpectedSpecification,
    PROVENANCE_CYCLE,
    PROVENANCE_ENTRY,
    SpecFile,
    Specification,
    render_spec_file,
    parse_spec_file,
    route_domain_knowledge,
)

STATE_FILE = "_state.json"
EVENTS_FILE = "_events.log"


@dataclass
class GenerationState:
    """Coordinator-owned progress record. A function's spec appears only
    after all its non-SCC callers have completed (or failed); expectations
    are indexed by callee."""

    specs: dict[str, Specification] = field(default_factory=dict)
    expectations: dict[str, list[ExpectedSpecification]] = field(default_factory=dict)
    completed_layers: int = 0
    failures: dict[str, str] = field(default_factory=dict)

    def add_expectation(self, exp: ExpectedSpecification) -> None:
        bucket = self.expectations.setdefault(exp.callee, [])
        if not any(
            e.caller == exp.caller and e.call_site == exp.call_site for e in bucket
        ):
            bucket.append(exp)
            bucket.sort(key=lambda e: (e.caller, e.call_site))

    def expectations_for(self, name: str) -> list[ExpectedSpecification]:
        return list(self.expectations.get(name, []))

    def to_json(self) -> dict:
        return {
            "specs": {n: s.to_json() for n, s in sorted(self.specs.items())},
            "expectations": {
                callee: [e.to_json() for e in exps]
                for callee, exps in sorted(self.expectations.items())
            },
            "completed_layers": self.completed_layers,
            "failures": dict(sorted(self.failures.items())),
        }

    @classmethod
    def from_json(cls, doc: dict) -> "GenerationState":
        state = cls()
        state.specs = {
            n: Specification.from_json(d) for n, d in doc.get("specs", {}).items()
        }
        state.expectations = {
            callee: [ExpectedSpecification.from_json(d) for d in exps]
            for callee, exps in doc.get("expectations", {}).items()
        }
        state.completed_layers = int(doc.get("completed_layers", 0))
        state.failures = dict(doc.get("failures", {}))
        return state


class EventLog:
    """Append-only ordered record of generation events; the order itself is
    the auditable artifact for the top-down discipline."""

    def __init__(self, path: Path):
        self.path = path
        self.seq = 0
        if path.exists():
            lines = [l for l in path.read_text(encoding="utf-8").splitlines() if l]
            self.seq = len(lines)

    def append(self, event: str, **fields) -> None:
        doc = {"seq": self.seq, "event": event}
        doc.update(fields)
        with self.path.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(doc, sort_keys=True) + "\n")
        self.seq += 1

    @staticmethod
    def read(path: Path) -> list[dict]:
        if not path.exists():
            return []
        return [
            json.loads(line)
            for line in path.read_text(encoding="utf-8").splitlines()
            if line
        ]


# --------------------------------------------------------------------------
# Per-function generation


def _parse_response_spec(name: str, resp_result: dict | None) -> tuple[Specification, list[ExpectedSpecification]]:
    if not isinstance(resp_result, dict):
        raise SpecGenerationError(f"no usable response for '{name}'")
    spec_doc = (resp_result.get("specs") or {}).get(name)
    if not spec_doc:
        raise SpecGenerationError(f"response carries no spec for '{name}'")
    try:
        spec = Specification.from_json(spec_doc)
        exps = [
            ExpectedSpecification.from_json(d)
            for d in resp_result.get("expectations", [])
            if d.get("caller") == name
        ]
    except (KeyError, TypeError, ValueError, SpecforgeError) as exc:
        raise SpecGenerationError(f"malformed spec payload for '{name}': {exc}") from exc
    return spec, exps


def generate_entry_spec(
    fn: FunctionRecord, dk_text: str, backend: ReasoningBackend
) -> tuple[Specification, list[ExpectedSpecification]]:
    """Entry functions have no callers: the spec comes from domain knowledge
    and the implementation, plus one expectation per distinct call site."""
    if not fn.is_entry:
        raise SpecGenerationError(f"'{fn.name}' is not an entry function")
    resp = backend.submit(
        ReasoningRequest(
            RequestKind.GENERATE_ENTRY_SPEC,
            {"function": function_payload(fn), "dk_text": dk_text},
        )
    )
    spec, exps = _parse_response_spec(fn.name, resp.result)
    spec = Specification(fn.name, spec.pre, spec.post, PROVENANCE_ENTRY)
    return spec, exps


def generate_internal_spec(
    fn: FunctionRecord,
    expectations: list[ExpectedSpecification],
    dk_text: str,
    cycle_callers: list[FunctionRecord],
    backend: ReasoningBackend,
) -> tuple[Specification, list[ExpectedSpecification]]:
    """Internal functions combine caller expectations with implementation and
    domain text; with no expectations the cycle route reads the callers'
    implementations instead."""
    if not expectations and not cycle_callers:
        raise SpecGenerationError(
            f"'{fn.name}' has neither expectations nor cycle callers; planner bug"
        )
    group = _group_request([fn], {fn.name: expectations}, cycle_callers, dk_text, backend)
    spec, exps = _parse_response_spec(fn.name, group)
    return spec, exps


def _group_request(
    fns: list[FunctionRecord],
    expectations: dict[str, list[ExpectedSpecification]],
    cycle_callers: list[FunctionRecord],
    dk_text: str,
    backend: ReasoningBackend,
) -> dict | None:
    payload = {
        "functions": [function_payload(f) for f in fns],
        "expectations": {
            name: [e.to_json() for e in exps]
            for name, exps in sorted(expectations.items())
        },
        "cycle": len(fns) > 1 or bool(cycle_callers),
        "cycle_callers": [function_payload(f) for f in cycle_callers],
        "dk_text": dk_text,
    }
    resp = backend.submit(ReasoningRequest(RequestKind.GENERATE_INTERNAL_SPEC, payload))
    return resp.result


# --------------------------------------------------------------------------
# run_generation


@dataclass(frozen=True)
class _Unit:
    """One generation request: a single function or a whole SCC group."""

    names: tuple[str, ...]
    phase: str
    layer: int
    is_cycle: bool


def run_generation(
    cb: Codebase,
    plans: dict[str, LayerPlan],
    dk: DomainKnowledge,
    backend: ReasoningBackend,
    out_dir: str | Path,
    batch_size: int = 8,
    workers: int = 8,
) -> GenerationState:
    """Process layers strictly in order (lockstep across phases), dispatch
    batches within a round concurrently, and persist one SpecFile per
    function plus the generation state and event log.

    Rerunning over a partially populated directory loads existing SpecFiles
    instead of regenerating them, so a crashed run resumes to the same final
    state as an uninterrupted one.
    """
    if isinstance(plans, LayerPlan):
        plans = {"default": plans}
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    state = GenerationState()
    events = EventLog(out / EVENTS_FILE)
    phases = {label: set(plan.all_functions()) for label, plan in plans.items()}

    max_rounds = max((len(p.layers) for p in plans.values()), default=0)
    pool = ThreadPoolExecutor(max_workers=max(1, workers))
    try:
        for round_i in range(max_rounds):
            units: list[_Unit] = []
            for label in sorted(plans):
                plan = plans[label]
                if round_i >= len(plan.layers):
                    continue
                units.extend(_layer_units(plan, round_i, label))

            todo: list[_Unit] = []
            for unit in units:
                loaded = [_load_existing(cb, out, unit, n, state, events) for n in unit.names]
                if not all(loaded):
                    todo.append(unit)

            batches = _unit_batches(todo, batch_size)
            results: list[tuple[_Unit, dict | None, str | None]] = []
            futures = [
                pool.submit(_run_batch, cb, batch, state, dk, phases, backend)
                for batch in batches
            ]
            for fut in futures:
                results.extend(fut.result())

            # the coordinator alone mutates state, in deterministic order
            results.sort(key=lambda r: r[0].names)
            for unit, result, error in results:
                _absorb_unit(cb, out, unit, result, error, state, events)

            for label in sorted(plans):
                if round_i < len(plans[label].layers):
                    events.append("layer_completed", phase=label, layer=round_i)
            state.completed_layers = round_i + 1
            _write_state(out, state)
    finally:
        pool.shutdown(wait=True)

    _write_state(out, state)
    return state


def _layer_units(plan: LayerPlan, layer_i: int, phase: str) -> list[_Unit]:
    layer = plan.layers[layer_i]
    by_scc: dict[int, list[str]] = {}
    for name in layer:
        by_scc.setdefault(plan.scc_of[name], []).append(name)
    units = []
    for scc_id in sorted(by_scc, key=lambda s: min(by_scc[s])):
        members = tuple(sorted(by_scc[scc_id]))
        units.append(_Unit(members, phase, layer_i, is_cycle=len(members) > 1))
    return units


def _unit_batches(units: list[_Unit], batch_size: int) -> list[list[_Unit]]:
    """Chunk units so one batch carries at most batch_size functions; an SCC
    is never split, so a group larger than the batch size rides alone."""
    batches: list[list[_Unit]] = []
    current: list[_Unit] = []
    weight = 0
    for unit in units:
        w = len(unit.names)
        if current and weight + w > batch_size:
            batches.append(current)
            current, weight = [], 0
        current.append(unit)
        weight += w
    if current:
        batches.append(current)
    return batches


def _spec_path(out: Path, phase: str, name: str) -> Path:
    return out / phase / f"{name}.md"


def _load_existing(cb: Codebase, out: Path, unit: _Unit, name: str,
                   state: GenerationState, events: EventLog) -> bool:
    path = _spec_path(out, unit.phase, name)
    if name in state.specs or not path.exists():
        return name in state.specs
    try:
        sf = parse_spec_file(path.read_text(encoding="utf-8"))
    except SpecforgeError:
        return False
    state.specs[name] = sf.spec
    for exp in sf.callee_expectations:
        state.add_expectation(exp)
    events.append("spec_loaded", function=name, phase=unit.phase, layer=unit.layer)
    return True


def _run_batch(cb, batch: list[_Unit], state: GenerationState, dk, phases, backend):
    out = []
    for unit in batch:
        try:
            result = _generate_unit(cb, unit, state, dk, phases, backend)
            out.append((unit, result, None))
        except SpecforgeError as exc:
            out.append((unit, None, str(exc)))
    return out


def _generate_unit(cb, unit: _Unit, state: GenerationState, dk, phases, backend):
    fns = [cb.function(n) for n in unit.names]
    dk_text = route_domain_knowledge(dk, fns[0], phases)
    first = fns[0]
    is_entry_unit = len(fns) == 1 and first.is_entry

    if is_entry_unit:
        resp = backend.submit(
            ReasoningRequest(
                RequestKind.GENERATE_ENTRY_SPEC,
                {"function": function_payload(first), "dk_text": dk_text},
            )
        )
        return resp.result

    exp_map = {n: [e.to_json() for e in state.expectations_for(n)] for n in unit.names}
    cycle_callers: list[FunctionRecord] = []
    if unit.is_cycle:
        cycle_callers = fns
    else:
        # a lone function with no surviving expectations falls back to
        # cycle-style generation from its callers' implementations
        if not exp_map.get(first.name):
            callers = sorted(
                n for n, f in cb.functions.items() if first.name in f.callees
            )
            cycle_callers = [cb.function(n) for n in callers]
    payload = {
        "functions": [function_payload(f) for f in fns],
        "expectations": exp_map,
        "cycle": unit.is_cycle or not any(exp_map.values()),
        "cycle_callers": [function_payload(f) for f in cycle_callers],
        "dk_text": dk_text,
    }
    resp = backend.submit(ReasoningRequest(RequestKind.GENERATE_INTERNAL_SPEC, payload))
    return resp.result


def _absorb_unit(cb, out: Path, unit: _Unit, result, error, state: GenerationState,
                 events: EventLog) -> None:
    for name in unit.names:
        if name in state.specs:
            continue
        if error is not None:
            state.failures[name] = error
            events.append("spec_failed", function=name, phase=unit.phase,
                          layer=unit.layer, error=error)
            continue
        try:
            spec, exps = _parse_response_spec(name, result)
        except SpecGenerationError as exc:
            state.failures[name] = str(exc)
            events.append("spec_failed", function=name, phase=unit.phase,
                          layer=unit.layer, error=str(exc))
            continue
        state.specs[name] = spec
        for exp in exps:
            state.add_expectation(exp)
        sf = SpecFile(
            spec=spec,
            callee_expectations=tuple(
                sorted(exps, key=lambda e: (e.call_site, e.callee))
            ),
            body=cb.function(name).body_text(),
        )
        path = _spec_path(out, unit.phase, name)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(render_spec_file(sf), encoding="utf-8")
        events.append("spec_generated", function=name, phase=unit.phase,
                      layer=unit.layer, provenance=spec.provenance)


def _write_state(out: Path, state: GenerationState) -> None:
    (out / STATE_FILE).write_text(
        json.dumps(state.to_json(), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )


def load_state(out_dir: str | Path) -> GenerationState:
    path = Path(out_dir) / STATE_FILE
    return GenerationState.from_json(json.loads(path.read_text(encoding="utf-8")))


# --------------------------------------------------------------------------
# Implementation-only ablation mode (test-only): specs straight from bodies


def implementation_only_spec(fn: FunctionRecord) -> Specification:
    """Derive a specification from the body alone via strongest postconditions
    (precondition true, postcondition the disjunction over exit paths).

    This is the ablation baseline: a buggy-but-internally-consistent body
    satisfies its own derived spec by construction, which is exactly why
    caller-driven generation exists. Loops and calls are out of scope here.
    """
    if isinstance(fn.body, str):
        raise SpecGenerationError("implementation-only mode needs a parsed body")

    pre = Condition.true()
    exits: list[F.Formula] = []

    def explore(stmts: tuple[minilang.Stmt, ...], state: Condition) -> Condition | None:
        for i, st in enumerate(stmts):
            if isinstance(st, minilang.SAssign):
                state = strongest_post(state, [st])
            elif isinstance(st, minilang.SReturn):
                final = strongest_post(
                    state, [minilang.SAssign("result", st.expr, st.line)]
                )
                exits.append(final.formula)
                return None
            elif isinstance(st, minilang.SIf):
                guard = cond_to_formula(st.cond)
                t = explore(st.then_body, Condition.from_formula(
                    F.conj([state.formula, guard])))
                e = explore(st.else_body, Condition.from_formula(
                    F.conj([state.formula, F.Not(guard)])))
                if t is None and e is None:
                    return None
                if t is None:
                    state = e
                elif e is None:
                    state = t
                else:
                    state = Condition.from_formula(F.disj([t.formula, e.formula]))
            else:
                raise SpecGenerationError(
                    "implementation-only mode supports assignments, branches "
                    "and returns only"
                )
        return state

    leftover = explore(fn.body, pre)
    if leftover is not None:
        final = strongest_post(
            leftover, [minilang.SAssign("result", minilang.ELit(0), 0)]
        )
        exits.append(final.formula)
    post = Condition.from_formula(F.disj(exits)) if exits else Condition.true()
    return Specification(fn.name, pre, post, PROVENANCE_ENTRY)
