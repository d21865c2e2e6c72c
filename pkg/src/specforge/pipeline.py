"""End-to-end orchestration: ingest -> plan -> specgen -> reason -> validate.

Every stage persists plain-file artifacts before the next stage starts, so
each stage is independently runnable, inspectable, and resumable: a rerun
skips any stage whose artifacts are already complete. All persisted files
are deterministic for a deterministic backend (sorted keys, no timestamps);
wall-clock timings go to stdout only.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

from . import reasoner as R
from . import validator as V
from .backend.base import BackendConfig, CountingBackend, ReasoningBackend
from .backend.oracle_backend import OracleBackend
from .backend.remote import RemoteBackend, TranscriptCache, replay_backend
from .codebase import Codebase, load_callgraph_manifest, load_minilang_file
from .errors import PrerequisiteError, SpecforgeError, UnparseableBodyError, HarnessError
from .generator import load_state, run_generation
from .oracle import BoundedDomain
from .planner import LayerPlan, plan_phases
from .specmodel import Condition, DomainKnowledge, parse_spec_file
from .validator import HarnessConfig, ValidationContext

PLAN_FILE = "plan.json"
SPECS_DIR = "specs"
REPORTS_DIR = "reports"
VALIDATION_DIR = "validation"
REPORT_FILE = "report.json"
CACHE_DIR = "cache"


@dataclass(frozen=True)
class RunConfig:
    input_path: str
    out_dir: str
    manifest: bool = False
    backend_kind: str = "oracle"  # oracle | remote | replay
    backend: BackendConfig = field(default_factory=BackendConfig)
    harness: HarnessConfig = field(default_factory=HarnessConfig)
    workers: int = 8
    batch_size: int = 8
    bound: int = 8
    domain_knowledge_dir: str | None = None
    phase_overrides: dict[str, str] = field(default_factory=dict)

    def out(self) -> Path:
        return Path(self.out_dir)


@dataclass
class RunReport:
    function_count: int = 0
    phase_layers: dict[str, int] = field(default_factory=dict)
    functions_per_phase: dict[str, int] = field(default_factory=dict)
    tokens_used: int = 0
    bugs_potential: int = 0
    bugs_confirmed: int = 0
    bugs_unconfirmed: int = 0
    bugs_harness_failed: int = 0
    failures: list[str] = field(default_factory=list)
    stages_run: list[str] = field(default_factory=list)
    stage_seconds: dict[str, float] = field(default_factory=dict)  # stdout only

    def to_json(self) -> dict:
        return {
            "function_count": self.function_count,
            "phase_layers": dict(sorted(self.phase_layers.items())),
            "functions_per_phase": dict(sorted(self.functions_per_phase.items())),
            "tokens_used": self.tokens_used,
            "bug_tallies": {
                "potential": self.bugs_potential,
                "confirmed": self.bugs_confirmed,
                "unconfirmed": self.bugs_unconfirmed,
                "harness_failed": self.bugs_harness_failed,
            },
            "failures": sorted(self.failures),
            "stages_run": list(self.stages_run),
        }

    def summary_lines(self) -> list[str]:
        lines = [
            f"functions: {self.function_count}",
            f"tokens used: {self.tokens_used}",
            (
                f"bugs: {self.bugs_potential} potential -> "
                f"{self.bugs_confirmed} confirmed, "
                f"{self.bugs_unconfirmed} unconfirmed, "
                f"{self.bugs_harness_failed} harness-failed"
            ),
        ]
        for stage in self.stages_run:
            secs = self.stage_seconds.get(stage)
            if secs is not None:
                lines.append(f"stage {stage}: {secs:.2f}s")
        if self.failures:
            lines.append(f"failures: {len(self.failures)} (see report.json)")
        return lines


# --------------------------------------------------------------------------
# Shared plumbing


def load_codebase(cfg: RunConfig) -> Codebase:
    if cfg.manifest:
        cb = load_callgraph_manifest(cfg.input_path)
    else:
        cb = load_minilang_file(cfg.input_path)
    if cfg.phase_overrides:
        functions = {
            name: (
                replace(fn, phase=cfg.phase_overrides.get(name, fn.phase))
            )
            for name, fn in cb.functions.items()
        }
        cb = replace(cb, functions=functions)
    return cb


def load_domain_knowledge(cfg: RunConfig) -> DomainKnowledge:
    if not cfg.domain_knowledge_dir:
        return DomainKnowledge.empty()
    shards: dict[str, str] = {}
    root = Path(cfg.domain_knowledge_dir)
    if not root.is_dir():
        raise PrerequisiteError(f"domain-knowledge directory {root} does not exist")
    for p in sorted(root.glob("*.md")) + sorted(root.glob("*.txt")):
        text = p.read_text(encoding="utf-8")
        if text.strip():
            shards[p.stem] = text
    return DomainKnowledge(shards)


def make_backend(cfg: RunConfig) -> CountingBackend:
    bc = cfg.backend
    if bc.batch_size != cfg.batch_size:
        bc = replace(bc, batch_size=cfg.batch_size)
    if cfg.backend_kind == "oracle":
        inner: ReasoningBackend = OracleBackend(
            BoundedDomain(cfg.bound), batch_size=cfg.batch_size
        )
    elif cfg.backend_kind == "remote":
        cache_dir = bc.cache_dir or str(cfg.out() / CACHE_DIR)
        bc = replace(bc, cache_dir=cache_dir)
        inner = RemoteBackend(bc, TranscriptCache(cache_dir))
    elif cfg.backend_kind == "replay":
        cache_dir = bc.cache_dir or str(cfg.out() / CACHE_DIR)
        bc = replace(bc, cache_dir=cache_dir)
        inner = replay_backend(bc)
    else:
        raise SpecforgeError(f"unknown backend kind {cfg.backend_kind!r}")
    return CountingBackend(inner)


def _write_json(path: Path, doc) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _read_json(path: Path, what: str):
    if not path.exists():
        raise PrerequisiteError(f"missing {what}: {path} (run the prior stage first)")
    return json.loads(path.read_text(encoding="utf-8"))


# --------------------------------------------------------------------------
# Stages


def stage_plan(cfg: RunConfig, backend: ReasoningBackend | None = None) -> dict[str, LayerPlan]:
    """Order planning; artifact: plan.json in the documented shape."""
    out = cfg.out()
    path = out / PLAN_FILE
    if path.exists():
        return load_plan(out)
    cb = load_codebase(cfg)
    backend = backend or make_backend(cfg)
    plans = plan_phases(cb, backend)
    doc = {"phases": [], "scc_of": {}}
    offset = 0
    for label in sorted(plans):
        plan = plans[label]
        doc["phases"].append(
            {"label": label, "layers": [list(layer) for layer in plan.layers]}
        )
        for name, scc in sorted(plan.scc_of.items()):
            doc["scc_of"][name] = scc + offset
        offset += len(set(plan.scc_of.values()))
    _write_json(path, doc)
    return plans


def load_plan(out: Path) -> dict[str, LayerPlan]:
    doc = _read_json(out / PLAN_FILE, "layer plan")
    plans: dict[str, LayerPlan] = {}
    for entry in doc["phases"]:
        layers = tuple(tuple(layer) for layer in entry["layers"])
        names = {n for layer in layers for n in layer}
        scc_of = {n: int(doc["scc_of"][n]) for n in names}
        # normalize global ids back to dense per-phase ids
        dense = {g: i for i, g in enumerate(sorted(set(scc_of.values())))}
        plans[entry["label"]] = LayerPlan(layers, {n: dense[g] for n, g in scc_of.items()})
    return plans


def stage_specgen(cfg: RunConfig, backend: ReasoningBackend | None = None):
    out = cfg.out()
    plans = load_plan(out)
    cb = load_codebase(cfg)
    specs_dir = out / SPECS_DIR

    state_path = specs_dir / "_state.json"
    planned = {n for plan in plans.values() for n in plan.all_functions()}
    if state_path.exists():
        state = load_state(specs_dir)
        if planned <= (state.specs.keys() | state.failures.keys()):
            return state  # stage already complete; leave artifacts untouched

    backend = backend or make_backend(cfg)
    dk = load_domain_knowledge(cfg)
    return run_generation(
        cb, plans, dk, backend, specs_dir,
        batch_size=cfg.batch_size, workers=cfg.workers,
    )


def stage_reason(cfg: RunConfig, backend: ReasoningBackend | None = None) -> dict:
    out = cfg.out()
    specs_dir = out / SPECS_DIR
    if not (specs_dir / "_state.json").exists():
        raise PrerequisiteError(
            f"missing generated specifications: {specs_dir / '_state.json'} "
            "(run specgen first)"
        )
    reports_dir = out / REPORTS_DIR
    index_path = reports_dir / "_index.json"
    if index_path.exists():
        return _read_json(index_path, "reasoner index")

    cb = load_codebase(cfg)
    backend = backend or make_backend(cfg)
    rcfg = R.ReasonerConfig(bound=cfg.bound)

    spec_files = sorted(p for p in specs_dir.glob("*/*.md"))
    jobs = []
    for p in spec_files:
        jobs.append((p.stem, p))

    def check(job):
        name, path = job
        diagnostics: list[str] = []
        sf = parse_spec_file(path.read_text(encoding="utf-8"))
        fn = cb.functions.get(name)
        source = (fn.span[0], fn.span[1]) if fn else None
        try:
            bugs = R.verify_function(sf, backend, rcfg, source=source,
                                     diagnostics=diagnostics)
            return name, [b.to_json() for b in bugs], diagnostics, False
        except UnparseableBodyError as exc:
            return name, [], [str(exc)], True

    with ThreadPoolExecutor(max_workers=max(1, cfg.workers)) as pool:
        results = list(pool.map(check, jobs))

    index = {"functions": {}, "diagnostics": []}
    for name, bug_docs, diagnostics, skipped in sorted(results, key=lambda r: r[0]):
        if bug_docs:
            _write_json(reports_dir / f"{name}.json", bug_docs)
        index["functions"][name] = {
            "bugs": len(bug_docs),
            "skipped": skipped,
        }
        index["diagnostics"].extend(diagnostics)
    index["diagnostics"].sort()
    _write_json(index_path, index)
    return index


def stage_validate(cfg: RunConfig, backend: ReasoningBackend | None = None) -> RunReport:
    out = cfg.out()
    reports_dir = out / REPORTS_DIR
    index = _read_json(reports_dir / "_index.json", "reasoner index")
    cb = load_codebase(cfg)
    backend = backend or make_backend(cfg)

    report = RunReport()
    plans_doc = _read_json(out / PLAN_FILE, "layer plan")
    for entry in plans_doc["phases"]:
        report.phase_layers[entry["label"]] = len(entry["layers"])
        report.functions_per_phase[entry["label"]] = sum(
            len(layer) for layer in entry["layers"]
        )
    report.function_count = sum(report.functions_per_phase.values())

    state = load_state(out / SPECS_DIR)
    for name, err in sorted(state.failures.items()):
        report.failures.append(f"specgen:{name}: {err}")
    for name, info in sorted(index["functions"].items()):
        if info.get("skipped"):
            report.failures.append(f"reason:{name}: analysis skipped (unparseable body)")

    jobs: list[tuple[str, int, R.PotentialBug]] = []
    for name in sorted(index["functions"]):
        path = reports_dir / f"{name}.json"
        if not path.exists():
            continue
        for i, doc in enumerate(json.loads(path.read_text(encoding="utf-8"))):
            jobs.append((name, i, R.PotentialBug.from_json(doc)))
    report.bugs_potential = len(jobs)

    spec_by_name = state.specs

    def run(job):
        name, i, bug = job
        if bug.status != R.STATUS_POTENTIAL:
            return name, i, bug, None, None
        ctx = _context_for(cfg, cb, bug, spec_by_name)
        if ctx is None:
            return name, i, bug, None, "no entry function reaches the bug"
        log_path = out / VALIDATION_DIR / f"{name}-{i}.jsonl"
        try:
            outcome = V.validate_bug(bug, cfg.harness, backend, ctx, log_path)
            return name, i, bug, outcome, None
        except HarnessError as exc:
            return name, i, bug, None, str(exc)

    with ThreadPoolExecutor(max_workers=max(1, cfg.workers)) as pool:
        results = list(pool.map(run, jobs))

    by_function: dict[str, list] = {}
    for name, i, bug, outcome, harness_error in sorted(results, key=lambda r: (r[0], r[1])):
        if harness_error is not None:
            report.bugs_harness_failed += 1
            report.failures.append(f"validate:{name}#{i}: {harness_error}")
        elif bug.status == R.STATUS_CONFIRMED:
            report.bugs_confirmed += 1
        elif bug.status == R.STATUS_UNCONFIRMED:
            report.bugs_unconfirmed += 1
        else:
            report.bugs_harness_failed += 1
            report.failures.append(f"validate:{name}#{i}: left unvalidated")
        by_function.setdefault(name, []).append(bug.to_json())
    for name, docs in sorted(by_function.items()):
        _write_json(reports_dir / f"{name}.json", docs)

    report.tokens_used = _count_tokens(cfg, backend)
    report.stages_run = ["plan", "specgen", "reason", "validate"]
    _write_json(out / REPORT_FILE, report.to_json())
    return report


def _context_for(cfg: RunConfig, cb: Codebase, bug: R.PotentialBug,
                 specs) -> ValidationContext | None:
    if bug.function not in cb.functions:
        return None
    entry = V.entry_reaching(cb, bug.function)
    if entry is None:
        return None
    entry_fn = cb.functions[entry]
    entry_pre: Condition | None = None
    spec = specs.get(entry)
    if spec is not None:
        entry_pre = spec.pre
    return ValidationContext(
        entry_name=entry,
        entry_params=entry_fn.params,
        entry_pre=entry_pre,
        codebase=cb if cb.language == "minilang" and not cfg.harness.run_command else None,
        bound=cfg.bound,
    )


def _count_tokens(cfg: RunConfig, backend: ReasoningBackend) -> int:
    cache_dir = cfg.backend.cache_dir or str(cfg.out() / CACHE_DIR)
    if cfg.backend_kind in ("remote", "replay") and Path(cache_dir).is_dir():
        return TranscriptCache(cache_dir).total_tokens()
    if isinstance(backend, CountingBackend):
        return backend.tokens_used
    return 0


# --------------------------------------------------------------------------
# Whole pipeline


def run_pipeline(cfg: RunConfig) -> RunReport:
    """Run every stage in order, resuming over whatever artifacts already
    exist; per-item errors never stop the run, stage-fatal ones do."""
    out = cfg.out()
    out.mkdir(parents=True, exist_ok=True)
    backend = make_backend(cfg)
    timings: dict[str, float] = {}

    t0 = time.monotonic()
    stage_plan(cfg, backend)
    timings["plan"] = time.monotonic() - t0

    t0 = time.monotonic()
    stage_specgen(cfg, backend)
    timings["specgen"] = time.monotonic() - t0

    t0 = time.monotonic()
    stage_reason(cfg, backend)
    timings["reason"] = time.monotonic() - t0

    t0 = time.monotonic()
    report = stage_validate(cfg, backend)
    timings["validate"] = time.monotonic() - t0

    report.stage_seconds = timings
    return report
