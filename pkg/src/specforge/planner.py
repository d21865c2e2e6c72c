"""Caller-before-callee ordering: call-graph construction, strongly connected
components, condensation, and a layered topological sort.

The resulting LayerPlan is the concurrency contract for specification
generation: layers run strictly in order, members of one layer are free to
run in parallel, and distinct phases are independent. Iteration order and
tie-breaking are lexicographic by function name everywhere so identical
inputs serialize to identical plans.
"""

from __future__ import annotations

from dataclasses import dataclass

from .codebase import Codebase
from .errors import SpecforgeError


@dataclass(frozen=True)
class CallGraph:
    nodes: frozenset[str]
    edges: frozenset[tuple[str, str]]  # caller -> callee

    def successors(self, node: str) -> list[str]:
        return sorted(t for s, t in self.edges if s == node)


@dataclass(frozen=True)
class Scc:
    id: int
    members: frozenset[str]


@dataclass(frozen=True)
class CondensedGraph:
    nodes: frozenset[int]
    edges: frozenset[tuple[int, int]]


@dataclass(frozen=True)
class LayerPlan:
    layers: tuple[tuple[str, ...], ...]  # each layer sorted by name
    scc_of: dict[str, int]

    def layer_of(self, name: str) -> int:
        for i, layer in enumerate(self.layers):
            if name in layer:
                return i
        raise KeyError(name)

    def all_functions(self) -> list[str]:
        return [n for layer in self.layers for n in layer]

    def to_json_dict(self) -> dict:
        return {
            "layers": [list(layer) for layer in self.layers],
            "scc_of": dict(sorted(self.scc_of.items())),
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "LayerPlan":
        return cls(
            layers=tuple(tuple(layer) for layer in doc["layers"]),
            scc_of={str(k): int(v) for k, v in doc["scc_of"].items()},
        )


@dataclass(frozen=True)
class BatchPlan:
    batches: tuple[tuple[str, ...], ...]
    batch_size: int


def construct_call_graph(cb: Codebase) -> CallGraph:
    """One node per function; an edge per in-codebase caller->callee pair.
    External sentinels never appear."""
    nodes = frozenset(cb.functions)
    edges = frozenset(
        (name, callee)
        for name, fn in cb.functions.items()
        for callee in fn.callees
    )
    return CallGraph(nodes, edges)


def find_sccs(g: CallGraph) -> list[Scc]:
    """Maximal strongly connected components (iterative Tarjan).

    Ids are assigned deterministically: components sorted by their
    lexicographically smallest member get ids 0, 1, 2, ...
    """
    succ: dict[str, list[str]] = {n: [] for n in sorted(g.nodes)}
    for s, t in sorted(g.edges):
        succ[s].append(t)

    index: dict[str, int] = {}
    low: dict[str, int] = {}
    on_stack: set[str] = set()
    stack: list[str] = []
    counter = [0]
    components: list[frozenset[str]] = []

    for root in sorted(g.nodes):
        if root in index:
            continue
        work: list[tuple[str, int]] = [(root, 0)]
        while work:
            node, child_i = work[-1]
            if child_i == 0:
                index[node] = low[node] = counter[0]
                counter[0] += 1
                stack.append(node)
                on_stack.add(node)
            advanced = False
            children = succ[node]
            while child_i < len(children):
                child = children[child_i]
                child_i += 1
                if child not in index:
                    work[-1] = (node, child_i)
                    work.append((child, 0))
                    advanced = True
                    break
                if child in on_stack:
                    low[node] = min(low[node], index[child])
            if advanced:
                continue
            work.pop()
            if low[node] == index[node]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.append(w)
                    if w == node:
                        break
                components.append(frozenset(comp))
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[node])

    components.sort(key=lambda c: min(c))
    return [Scc(i, members) for i, members in enumerate(components)]


def condense_graph(g: CallGraph, sccs: list[Scc]) -> CondensedGraph:
    """Collapse each SCC to one node; deduplicate edges; drop self-edges."""
    owner: dict[str, int] = {}
    for scc in sccs:
        for m in scc.members:
            owner[m] = scc.id
    missing = g.nodes - owner.keys()
    if missing:
        raise SpecforgeError(f"sccs do not partition the graph: missing {sorted(missing)}")
    edges = frozenset(
        (owner[s], owner[t]) for s, t in g.edges if owner[s] != owner[t]
    )
    return CondensedGraph(frozenset(s.id for s in sccs), edges)


def plan_layers(cg: CondensedGraph, sccs: list[Scc]) -> LayerPlan:
    """Kahn-style layering of the condensed DAG, expanded back to functions.

    Layer 1 holds every zero-in-degree component (the functions without
    callers); each following layer holds the components whose in-degree
    reaches zero once the prior layers are removed. A leftover node means the
    condensation was not acyclic, which is a bug worth aborting on.
    """
    members = {s.id: s.members for s in sccs}
    indeg: dict[int, int] = {n: 0 for n in cg.nodes}
    succ: dict[int, list[int]] = {n: [] for n in cg.nodes}
    for s, t in sorted(cg.edges):
        indeg[t] += 1
        succ[s].append(t)

    queue = sorted(n for n, d in indeg.items() if d == 0)
    layers: list[tuple[str, ...]] = []
    emitted = 0
    while queue:
        layer_ids = queue
        queue = []
        layers.append(tuple(sorted(n for i in layer_ids for n in members[i])))
        emitted += len(layer_ids)
        for i in layer_ids:
            for j in succ[i]:
                indeg[j] -= 1
                if indeg[j] == 0:
                    queue.append(j)
        queue.sort()
    if emitted != len(cg.nodes):
        raise SpecforgeError("cycle detected in condensed graph; condensation is buggy")

    scc_of = {m: s.id for s in sccs for m in s.members}
    return LayerPlan(tuple(layers), scc_of)


def plan_codebase(cb: Codebase) -> LayerPlan:
    """Convenience: full Algorithm-1 run over one codebase (single phase)."""
    g = construct_call_graph(cb)
    sccs = find_sccs(g)
    return plan_layers(condense_graph(g, sccs), sccs)


def induced_subgraph(g: CallGraph, keep: set[str]) -> CallGraph:
    return CallGraph(
        frozenset(n for n in g.nodes if n in keep),
        frozenset((s, t) for s, t in g.edges if s in keep and t in keep),
    )


def partition_phases(cb: Codebase, backend=None) -> dict[str, set[str]]:
    """Group functions into self-contained phases.

    Explicit phase tags are authoritative. With tags present, untagged
    functions join their (lexicographically first) tagged caller's phase, or
    a 'default' phase when no caller is tagged. With no tags at all, the
    backend may propose a partition; on backend failure or absence everything
    lands in one phase.
    """
    tagged = {n: fn.phase for n, fn in cb.functions.items() if fn.phase}
    if not tagged:
        proposal = _propose_partition(cb, backend)
        if proposal:
            return proposal
        return {"default": set(cb.functions)} if cb.functions else {}

    callers: dict[str, list[str]] = {n: [] for n in cb.functions}
    for name, fn in cb.functions.items():
        for callee in fn.callees:
            callers[callee].append(name)

    phases: dict[str, set[str]] = {}
    for name in cb.sorted_names():
        label = tagged.get(name)
        if label is None:
            tagged_callers = sorted(c for c in callers[name] if c in tagged)
            label = tagged[tagged_callers[0]] if tagged_callers else "default"
        phases.setdefault(label, set()).add(name)
    return phases


def _propose_partition(cb: Codebase, backend) -> dict[str, set[str]] | None:
    if backend is None:
        return None
    from .backend.base import ReasoningRequest, RequestKind

    try:
        resp = backend.submit(
            ReasoningRequest(
                RequestKind.PROPOSE_PHASE_PARTITION,
                {"functions": cb.sorted_names()},
            )
        )
    except Exception:
        return None
    result = resp.result or {}
    raw = result.get("phases") if isinstance(result, dict) else None
    if not isinstance(raw, dict) or not raw:
        return None
    out: dict[str, set[str]] = {}
    seen: set[str] = set()
    for label in sorted(raw):
        names = {n for n in raw[label] if n in cb.functions and n not in seen}
        if names:
            out[str(label)] = names
            seen |= names
    leftover = set(cb.functions) - seen
    if leftover:
        out.setdefault("default", set()).update(leftover)
    return out or None


def phase_dependencies(cb: Codebase, phases: dict[str, set[str]]) -> list[tuple[str, str]]:
    """Cross-phase call edges, lifted to (caller phase, callee phase) pairs."""
    owner = {n: label for label, names in phases.items() for n in names}
    deps: set[tuple[str, str]] = set()
    for name, fn in cb.functions.items():
        for callee in fn.callees:
            if owner[name] != owner[callee]:
                deps.add((owner[name], owner[callee]))
    return sorted(deps)


def plan_phases(cb: Codebase, backend=None) -> dict[str, LayerPlan]:
    """Layer each phase independently on its induced subgraph; cross-phase
    callees count as already-specified externals and impose no ordering."""
    g = construct_call_graph(cb)
    phases = partition_phases(cb, backend)
    plans: dict[str, LayerPlan] = {}
    for label in sorted(phases):
        sub = induced_subgraph(g, phases[label])
        sccs = find_sccs(sub)
        plans[label] = plan_layers(condense_graph(sub, sccs), sccs)
    return plans


def make_batches(layer, batch_size: int) -> BatchPlan:
    """Deterministic sorted-name chunking of one layer into runs of at most
    ``batch_size`` functions."""
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    names = sorted(layer)
    batches = tuple(
        tuple(names[i : i + batch_size]) for i in range(0, len(names), batch_size)
    )
    return BatchPlan(batches, batch_size)
