"""Turns potential bugs into confirmed or unconfirmed ones by generating
system-entry test cases, executing them against the system under test, and
matching the observed signal against the expected class, within a hard
attempt budget.

Signals are matched by class (crash / divergence from a reference /
specification violation), not by exact text. A harness misconfiguration is
fatal and leaves the bug untouched; a failing test case is just a consumed
attempt.
"""

from __future__ import annotations

import json
import shlex
import subprocess
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

from . import formula as F
from . import oracle
from .backend.base import ReasoningBackend, ReasoningRequest, RequestKind
from .codebase import Codebase
from .errors import HarnessError, SpecforgeError
from .reasoner import (
    STATUS_CONFIRMED,
    STATUS_POTENTIAL,
    STATUS_UNCONFIRMED,
    PotentialBug,
)
from .specmodel import Condition

SIGNAL_CRASH = "crash"
SIGNAL_DIVERGENCE = "divergence"
SIGNAL_SPEC_VIOLATION = "spec_violation"


@dataclass(frozen=True)
class TestCase:
    id: str
    bug_function: str
    input_artifact: str  # program source, query text, or entry-argument JSON
    expected_signal: str
    attempt: int  # 1-based

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "bug_function": self.bug_function,
            "input_artifact": self.input_artifact,
            "expected_signal": self.expected_signal,
            "attempt": self.attempt,
        }


@dataclass(frozen=True)
class HarnessConfig:
    run_command: str | None = None  # template with {input_file} and {workdir}
    reference_command: str | None = None
    timeout_seconds: float = 10.0
    max_attempts: int = 10
    workdir: str | None = None
    env_setup_doc: str | None = None  # passed through to the backend, never executed

    def __post_init__(self):
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")


@dataclass(frozen=True)
class ObservedSignal:
    kind: str  # crash | output | timeout
    output: str = ""
    reference_output: str | None = None
    detail: str = ""

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "output": self.output,
            "reference_output": self.reference_output,
            "detail": self.detail,
        }


@dataclass
class ValidationOutcome:
    status: str  # confirmed | unconfirmed
    triggering_case: TestCase | None
    attempts: list[tuple[TestCase, ObservedSignal]] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "status": self.status,
            "triggering_case": self.triggering_case.to_json() if self.triggering_case else None,
            "attempts": [
                {"test_case": tc.to_json(), "observed": sig.to_json()}
                for tc, sig in self.attempts
            ],
        }


@dataclass(frozen=True)
class ValidationContext:
    """Everything the generator and runtime need about the system under test:
    the entry point reaching the bug and, in MiniLang mode, the codebase and
    an optional correct twin as reference."""

    entry_name: str
    entry_params: tuple[tuple[str, str], ...]
    entry_pre: Condition | None = None
    codebase: Codebase | None = None
    reference: Codebase | None = None
    bound: int = 8
    step_budget: int = 100_000


def entry_reaching(cb: Codebase, function: str) -> str | None:
    """Lexicographically smallest entry function that reaches ``function``
    through the call graph (the function itself when it is an entry)."""
    reverse: dict[str, set[str]] = {n: set() for n in cb.functions}
    for name, fn in cb.functions.items():
        for callee in fn.callees:
            reverse[callee].add(name)
    seen = {function}
    frontier = [function]
    while frontier:
        cur = frontier.pop()
        for caller in reverse[cur]:
            if caller not in seen:
                seen.add(caller)
                frontier.append(caller)
    entries = sorted(n for n in seen if cb.functions[n].is_entry)
    return entries[0] if entries else None


# --------------------------------------------------------------------------
# Operations


def generate_test_case(
    bug: PotentialBug,
    prior_attempts: list[TestCase],
    backend: ReasoningBackend,
    ctx: ValidationContext,
    cfg: HarnessConfig,
) -> TestCase:
    """One system-entry input (never a direct internal-function harness),
    guided by the bug's reasoning trace, its entailment counterexample when
    one exists, and the prior failed attempts."""
    attempt = len(prior_attempts) + 1
    if attempt > cfg.max_attempts:
        raise SpecforgeError("attempt budget exhausted")
    payload = {
        "bug": bug.to_json(),
        "entry": {
            "name": ctx.entry_name,
            "params": [list(p) for p in ctx.entry_params],
        },
        "entry_pre": ctx.entry_pre.to_json() if ctx.entry_pre else None,
        "prior_inputs": [tc.input_artifact for tc in prior_attempts],
        "bound": ctx.bound,
        "env_setup_doc": cfg.env_setup_doc,
    }
    resp = backend.submit(ReasoningRequest(RequestKind.GENERATE_TEST_CASE, payload))
    result = resp.result if isinstance(resp.result, dict) else None
    if not result or not result.get("input"):
        raise SpecforgeError("backend produced no test case")
    expected = result.get("expected_signal") or SIGNAL_SPEC_VIOLATION
    if cfg.reference_command or ctx.reference is not None:
        expected = SIGNAL_DIVERGENCE if expected == SIGNAL_SPEC_VIOLATION else expected
    return TestCase(
        id=f"{bug.function}-a{attempt}",
        bug_function=bug.function,
        input_artifact=str(result["input"]),
        expected_signal=expected,
        attempt=attempt,
    )


def execute_test_case(tc: TestCase, cfg: HarnessConfig,
                      ctx: ValidationContext | None = None) -> ObservedSignal:
    """Run the system under test on the input; with a reference configured,
    run it too so divergence can be observed. MiniLang codebases execute
    in-process through the interpreter; anything else goes through the run
    command template."""
    if ctx is not None and ctx.codebase is not None and not cfg.run_command:
        sut = _run_minilang(tc, ctx.codebase, ctx)
        if ctx.reference is not None and sut.kind == "output":
            ref = _run_minilang(tc, ctx.reference, ctx)
            return ObservedSignal(
                sut.kind, sut.output,
                reference_output=ref.output if ref.kind == "output" else f"<{ref.kind}>",
                detail=sut.detail,
            )
        return sut
    if not cfg.run_command:
        raise HarnessError("no run command configured and no executable codebase")
    return _run_subprocess(tc, cfg)


def _run_minilang(tc: TestCase, cb: Codebase, ctx: ValidationContext) -> ObservedSignal:
    try:
        doc = json.loads(tc.input_artifact)
        entry = doc["entry"]
        args = [int(a) for a in doc["args"]]
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        return ObservedSignal("crash", detail=f"malformed input artifact: {exc}")
    try:
        outcome = oracle.eval_function(cb, entry, args, ctx.step_budget)
    except SpecforgeError as exc:
        raise HarnessError(f"cannot execute entry '{entry}': {exc}") from exc
    if isinstance(outcome, oracle.Returned):
        return ObservedSignal("output", output=str(outcome.value))
    if isinstance(outcome, oracle.RuntimeFault):
        return ObservedSignal("crash", detail=outcome.kind)
    return ObservedSignal("timeout", detail="step budget exhausted")


def _run_subprocess(tc: TestCase, cfg: HarnessConfig) -> ObservedSignal:
    workdir = Path(cfg.workdir) if cfg.workdir else Path(tempfile.mkdtemp(prefix="specforge-"))
    workdir.mkdir(parents=True, exist_ok=True)
    input_file = workdir / f"{tc.id}.input"
    input_file.write_text(tc.input_artifact, encoding="utf-8")

    sut = _run_command(cfg.run_command, input_file, workdir, cfg.timeout_seconds)
    if cfg.reference_command and sut.kind == "output":
        ref = _run_command(cfg.reference_command, input_file, workdir, cfg.timeout_seconds)
        return ObservedSignal(
            sut.kind, sut.output,
            reference_output=ref.output if ref.kind == "output" else f"<{ref.kind}>",
            detail=sut.detail,
        )
    return sut


def _run_command(template: str, input_file: Path, workdir: Path,
                 timeout: float) -> ObservedSignal:
    cmd = template.format(input_file=str(input_file), workdir=str(workdir))
    argv = shlex.split(cmd)
    if not argv:
        raise HarnessError("empty run command")
    try:
        proc = subprocess.run(
            argv, capture_output=True, text=True, timeout=timeout, cwd=str(workdir)
        )
    except subprocess.TimeoutExpired:
        return ObservedSignal("timeout", detail=f"timed out after {timeout}s")
    except (OSError, ValueError) as exc:
        raise HarnessError(f"cannot run {argv[0]!r}: {exc}") from exc
    if proc.returncode != 0:
        return ObservedSignal(
            "crash", output=proc.stdout.strip(),
            detail=f"exit status {proc.returncode}: {proc.stderr.strip()}",
        )
    return ObservedSignal("output", output=proc.stdout.strip())


def _signal_matches(tc: TestCase, sig: ObservedSignal, bug: PotentialBug,
                    backend: ReasoningBackend, ctx: ValidationContext) -> bool:
    """Class-based matching of observed signal against the expectation."""
    if tc.expected_signal == SIGNAL_CRASH:
        return sig.kind in ("crash", "timeout")
    if tc.expected_signal == SIGNAL_DIVERGENCE:
        if sig.kind in ("crash", "timeout"):
            return True  # the reference path stayed healthy; the SUT did not
        return sig.reference_output is not None and sig.output != sig.reference_output
    # spec violation: the execution result must contradict the violated
    # condition (oracle-decidable when the condition is precise)
    if sig.kind in ("crash", "timeout"):
        return True
    return _violates_condition(tc, sig, bug, backend, ctx)


def _violates_condition(tc: TestCase, sig: ObservedSignal, bug: PotentialBug,
                        backend: ReasoningBackend, ctx: ValidationContext) -> bool:
    cond = bug.violated
    try:
        result_value = int(sig.output)
    except ValueError:
        result_value = None
    if cond.is_precise and result_value is not None:
        env: dict[str, int] = {"result": result_value}
        try:
            doc = json.loads(tc.input_artifact)
            env.update(
                {p[0]: int(v) for p, v in zip(ctx.entry_params, doc.get("args", []))}
            )
        except (json.JSONDecodeError, TypeError, ValueError, AttributeError):
            pass
        try:
            return not F.evaluate(cond.formula, env)
        except (SpecforgeError, KeyError):
            return False
    observed = Condition.of(
        f"Running input {tc.input_artifact!r} produced output {sig.output!r}."
    )
    resp = backend.submit(
        ReasoningRequest(
            RequestKind.CHECK_ENTAILMENT,
            {"antecedent": observed.to_json(), "consequent": cond.to_json()},
        )
    )
    return (resp.result or {}).get("verdict") == "fails"


def validate_bug(
    bug: PotentialBug,
    cfg: HarnessConfig,
    backend: ReasoningBackend,
    ctx: ValidationContext,
    log_path: Path | None = None,
) -> ValidationOutcome:
    """Up to max_attempts generate/execute rounds; the first matching signal
    confirms the bug, exhaustion leaves it unconfirmed. A backend failure
    consumes an attempt; a harness-fatal error aborts without consuming the
    bug (its status stays potential)."""
    if bug.status != STATUS_POTENTIAL:
        raise SpecforgeError(f"bug for '{bug.function}' was already validated")
    attempts: list[tuple[TestCase, ObservedSignal]] = []
    outcome: ValidationOutcome | None = None

    while len(attempts) < cfg.max_attempts:
        try:
            tc = generate_test_case(bug, [a[0] for a in attempts], backend, ctx, cfg)
        except SpecforgeError as exc:
            # a failed generation is a consumed attempt, not a crash
            tc = TestCase(
                id=f"{bug.function}-a{len(attempts) + 1}",
                bug_function=bug.function,
                input_artifact="",
                expected_signal=SIGNAL_SPEC_VIOLATION,
                attempt=len(attempts) + 1,
            )
            attempts.append((tc, ObservedSignal("crash", detail=f"generation failed: {exc}")))
            continue
        sig = execute_test_case(tc, cfg, ctx)  # HarnessError propagates: fatal
        attempts.append((tc, sig))
        if _signal_matches(tc, sig, bug, backend, ctx):
            bug.status = STATUS_CONFIRMED
            outcome = ValidationOutcome(STATUS_CONFIRMED, tc, attempts)
            break

    if outcome is None:
        bug.status = STATUS_UNCONFIRMED
        outcome = ValidationOutcome(STATUS_UNCONFIRMED, None, attempts)

    if log_path is not None:
        log_path.parent.mkdir(parents=True, exist_ok=True)
        with log_path.open("w", encoding="utf-8") as fh:
            for tc, sig in attempts:
                fh.write(
                    json.dumps(
                        {"test_case": tc.to_json(), "observed": sig.to_json()},
                        sort_keys=True,
                    )
                    + "\n"
                )
    return outcome
