"""Checks each function body against its specification by stepwise pre/post
propagation: maximal call-free blocks are judged in one backend request, the
branch rule disjoins per-arm states, loop postconditions are proposed first
and then validated by an invariant search, and every exit path must entail
the specification's postcondition.

Compositionality is enforced by the interface: verification consumes one
SpecFile (spec, callee expectations, body) and never sees any callee's body.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

from . import formula as F
from . import minilang as M
from . import oracle
from .backend.base import ReasoningBackend, ReasoningRequest, RequestKind
from .errors import SpecforgeError, UnparseableBodyError
from .specmodel import Condition, ExpectedSpecification, SpecFile

STATUS_POTENTIAL = "potential"
STATUS_CONFIRMED = "confirmed"
STATUS_UNCONFIRMED = "unconfirmed"

SOURCE_TEXT = "text_entailment"
SOURCE_FORMULA = "formula_entailment"
SOURCE_UNKNOWN = "unknown_entailment"


@dataclass(frozen=True)
class TraceStep:
    span: str
    pre: Condition
    post: Condition

    def to_json(self) -> dict:
        return {"span": self.span, "pre": self.pre.to_json(), "post": self.post.to_json()}

    @classmethod
    def from_json(cls, doc: dict) -> "TraceStep":
        return cls(doc["span"], Condition.from_json(doc["pre"]),
                   Condition.from_json(doc["post"]))


@dataclass
class PotentialBug:
    function: str
    statement: tuple[str, int]  # file, line
    violated: Condition
    trace: tuple[TraceStep, ...]
    verdict_source: str
    status: str = STATUS_POTENTIAL
    counterexample: dict[str, int] | None = None

    def to_json(self) -> dict:
        return {
            "function": self.function,
            "statement": {"file": self.statement[0], "line": self.statement[1]},
            "violated": self.violated.to_json(),
            "trace": [t.to_json() for t in self.trace],
            "verdict_source": self.verdict_source,
            "status": self.status,
            "counterexample": self.counterexample,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "PotentialBug":
        return cls(
            function=doc["function"],
            statement=(doc["statement"]["file"], int(doc["statement"]["line"])),
            violated=Condition.from_json(doc["violated"]),
            trace=tuple(TraceStep.from_json(t) for t in doc.get("trace", [])),
            verdict_source=doc["verdict_source"],
            status=doc.get("status", STATUS_POTENTIAL),
            counterexample=doc.get("counterexample"),
        )


@dataclass(frozen=True)
class ReasonerConfig:
    bound: int = 8
    exit_path_cap: int = 64
    invariant_retries: int = 3
    loop_post_retries: int = 2
    enumeration_budget: int = 2_000_000

    @property
    def dom(self) -> oracle.BoundedDomain:
        return oracle.BoundedDomain(self.bound, self.enumeration_budget)


# --------------------------------------------------------------------------
# Inference operations


def _ask(backend: ReasoningBackend, kind: RequestKind, payload: dict):
    try:
        return backend.submit(ReasoningRequest(kind, payload))
    except SpecforgeError:
        return None


def _entailment(backend, antecedent: Condition, consequent: Condition,
                bound: int) -> tuple[str, dict | None]:
    resp = _ask(
        backend,
        RequestKind.CHECK_ENTAILMENT,
        {
            "antecedent": antecedent.to_json(),
            "consequent": consequent.to_json(),
            "bound": bound,
        },
    )
    if resp is None or not isinstance(resp.result, dict):
        return "unknown", None
    return resp.result.get("verdict", "unknown"), resp.result.get("counterexample")


def infer_block_post(pre: Condition, block, backend: ReasoningBackend,
                     expectations: dict[int, ExpectedSpecification] | None = None,
                     obligations: list | None = None,
                     base_index: int = 0,
                     bound: int = 8) -> Condition:
    """Postcondition of a straight-line block (assignments and calls).

    Call-free runs are judged collectively in one backend request; each call
    statement consumes the callee's expected specification: the target is
    havocked, the expected post is assumed, and the obligation that the
    current state entails the expected pre is appended to ``obligations`` as
    (index, call, expectation) for the caller to check.
    """
    state = pre
    run: list[M.SAssign] = []
    for offset, st in enumerate(block):
        if isinstance(st, M.SAssign):
            run.append(st)
            continue
        if isinstance(st, M.SCall):
            state = _flush_run(state, run, backend)
            run = []
            exp = (expectations or {}).get(base_index + offset)
            if obligations is not None and exp is not None:
                obligations.append((base_index + offset, st, state, exp))
            state = _apply_call(state, st, exp)
            continue
        raise SpecforgeError(
            f"infer_block_post only accepts straight-line statements, got "
            f"{type(st).__name__}"
        )
    return _flush_run(state, run, backend)


def _flush_run(state: Condition, run: list[M.SAssign], backend) -> Condition:
    if not run:
        return state
    src = M.render_statements(run, indent=0)
    if state.is_precise:
        resp = _ask(
            backend,
            RequestKind.INFER_POSTCONDITION,
            {"pre": state.to_json(), "block": src, "hint": "block"},
        )
        doc = (resp.result or {}).get("post") if resp and isinstance(resp.result, dict) else None
        if doc:
            return Condition.from_json(doc)
    # degraded path: keep reasoning in prose; downstream checks go unknown
    flat = "; ".join(src.split("\n"))
    return Condition.of(f"{state.text} Then the block [{flat}] has executed.")


def _apply_call(state: Condition, st: M.SCall, exp: ExpectedSpecification | None) -> Condition:
    post = exp.post if exp is not None else None
    if state.is_precise:
        try:
            return oracle.strongest_post(state, [st], {0: exp} if exp else None)
        except SpecforgeError:
            pass
    args = ", ".join(M.render_expr(a) for a in st.args)
    if post is not None:
        text = (
            f"{state.text} After {st.target} = {st.callee}({args}), the callee "
            f"guarantees (with result meaning {st.target}): {post.text}"
        )
    else:
        text = (
            f"{state.text} After {st.target} = {st.callee}({args}), "
            f"{st.target} holds an unspecified value."
        )
    return Condition.of(text)


def infer_branch_post(pre: Condition, cond: M.Cond, then_post: Condition,
                      else_post: Condition | None) -> Condition:
    """The branch rule: the disjunction of the per-arm postconditions. A
    missing else arm contributes ``pre`` constrained by the negated guard."""
    guard = oracle.cond_to_formula(cond)
    if else_post is None:
        if pre.is_precise:
            f = F.conj([pre.formula, F.Not(guard)])
            else_post = Condition.of(F.render(f), f)
        else:
            else_post = Condition.of(
                f"{pre.text} The branch guard {M.render_cond(cond)} is false."
            )
    if then_post.is_precise and else_post.is_precise:
        f = F.disj([then_post.formula, else_post.formula])
        return Condition.of(F.render(f), f)
    if then_post.text == else_post.text:
        return Condition.of(then_post.text)
    return Condition.of(f"Either: {then_post.text} Or: {else_post.text}")


def infer_loop_post(pre: Condition, loop: M.SWhile, spec_hint: Condition | None,
                    backend: ReasoningBackend,
                    config: ReasonerConfig | None = None) -> tuple[Condition, Condition | None]:
    """Postcondition-first loop handling.

    Candidate loop postconditions are tried in order; each is validated by an
    invariant search against the three obligations (bounded oracle check when
    everything is precise, backend self-check otherwise). When every
    candidate exhausts its invariant budget the last candidate is returned
    marked unknown (formula dropped, invariant None) so the exit check
    surfaces a potential bug instead of silently trusting the loop.
    """
    cfg = config or ReasonerConfig()
    guard_f = oracle.cond_to_formula(loop.cond)
    frame = _frame_condition(pre, loop)
    src = M.render_statements([loop], indent=0)

    candidates: list[Condition] = []
    if spec_hint is not None and spec_hint.formula is not None:
        candidates.append(_with_frame(spec_hint, frame))
    resp = _ask(backend, RequestKind.INFER_POSTCONDITION,
                {"pre": pre.to_json(), "block": src, "hint": "loop"})
    doc = (resp.result or {}).get("post") if resp and isinstance(resp.result, dict) else None
    if doc:
        candidates.append(_with_frame(Condition.from_json(doc), frame))
    if pre.is_precise:
        f = F.conj([pre.formula, F.Not(guard_f)])
        candidates.append(Condition.of(F.render(f), f))

    seen: set[str] = set()
    unique: list[Condition] = []
    for c in candidates:
        if c.text not in seen:
            seen.add(c.text)
            unique.append(c)
    unique = unique[: cfg.loop_post_retries]

    for cand in unique:
        inv = _search_invariant(pre, loop, cand, frame, backend, cfg)
        if inv is not None:
            return cand, inv

    if unique:
        last = unique[-1]
        return Condition.of(f"{last.text} (loop postcondition not validated)"), None
    return (
        Condition.of(f"State after the loop at line {loop.line} (not derived)."),
        None,
    )


def _with_frame(hint: Condition, frame: Condition | None) -> Condition:
    if frame is None or frame.formula is None or frame.formula == F.TRUE:
        return hint
    if hint.formula is not None:
        f = F.conj([hint.formula, frame.formula])
        return Condition.of(F.render(f), f)
    return Condition.of(f"{hint.text} Also: {frame.text}")


def _frame_condition(pre: Condition, loop: M.SWhile) -> Condition | None:
    """Conjuncts of the loop-head state over variables the body never
    assigns; they survive the loop verbatim."""
    if not pre.is_precise:
        return None
    touched = M.assigned_vars(loop.body)
    keep = [c for c in F.conjuncts(pre.formula) if not (F.free_vars(c) & touched)]
    if not keep:
        return None
    f = F.conj(keep)
    return Condition.of(F.render(f), f)


def _search_invariant(pre: Condition, loop: M.SWhile, post: Condition,
                      frame: Condition | None, backend, cfg: ReasonerConfig
                      ) -> Condition | None:
    src = M.render_statements([loop], indent=0)
    prior: list[str] = []
    body_supported = not any(
        isinstance(st, (M.SCall, M.SReturn)) for st in M.walk_statements(loop.body)
    )
    for _ in range(cfg.invariant_retries):
        payload = {
            "loop": src,
            "pre": pre.to_json(),
            "post_hint": post.to_json(),
            "frame": frame.to_json() if frame is not None else None,
            "prior": list(prior),
        }
        resp = _ask(backend, RequestKind.PROPOSE_INVARIANT, payload)
        doc = (resp.result or {}).get("invariant") if resp and isinstance(resp.result, dict) else None
        if not doc:
            return None
        inv = Condition.from_json(doc)
        prior.append(F.render(inv.formula) if inv.formula is not None else inv.text)
        if _invariant_holds(inv, loop, pre, post, backend, cfg, body_supported):
            return inv
    return None


def _invariant_holds(inv: Condition, loop: M.SWhile, pre: Condition, post: Condition,
                     backend, cfg: ReasonerConfig, body_supported: bool) -> bool:
    precise = inv.is_precise and pre.is_precise and post.is_precise
    if precise and body_supported:
        try:
            return oracle.check_invariant_bounded(inv, loop, pre, post, cfg.dom).holds
        except SpecforgeError:
            return False
    # backend self-check of the three obligations
    guard_text = M.render_cond(loop.cond)
    v1, _ = _entailment(backend, pre, inv, cfg.bound)
    if v1 != "holds":
        return False
    body_pre = Condition.of(f"{inv.text} The loop guard {guard_text} holds.")
    body_post = infer_block_post_text(body_pre, loop.body, backend)
    v2, _ = _entailment(backend, body_post, inv, cfg.bound)
    if v2 != "holds":
        return False
    exit_state = Condition.of(f"{inv.text} The loop guard {guard_text} is false.")
    v3, _ = _entailment(backend, exit_state, post, cfg.bound)
    return v3 == "holds"


def infer_block_post_text(pre: Condition, body, backend) -> Condition:
    """Whole-body text inference used by the imprecise self-check path."""
    src = M.render_statements(list(body), indent=0)
    resp = _ask(backend, RequestKind.INFER_POSTCONDITION,
                {"pre": pre.to_json(), "block": src, "hint": "block"})
    doc = (resp.result or {}).get("post") if resp and isinstance(resp.result, dict) else None
    if doc:
        return Condition.from_json(doc)
    flat = "; ".join(src.split("\n"))
    return Condition.of(f"{pre.text} Then the block [{flat}] has executed.")


def formalize_condition(c: Condition, backend: ReasoningBackend) -> Condition:
    """Attach a formula to a prose condition, gated on uninterpreted
    predicates; best-effort and never fails."""
    if c.formula is not None:
        return c
    resp = _ask(backend, RequestKind.FORMALIZE_CONDITION, {"text": c.text})
    raw = (resp.result or {}).get("formula") if resp and isinstance(resp.result, dict) else None
    if not raw:
        return c
    try:
        return Condition.of(c.text, F.parse(raw))
    except SpecforgeError:
        return c


# --------------------------------------------------------------------------
# verify_function


class _Walker:
    def __init__(self, sf: SpecFile, fn: M.FunctionDef, backend, cfg: ReasonerConfig,
                 source: tuple[str, int] | None, diagnostics: list[str] | None):
        self.sf = sf
        self.fn = fn
        self.backend = backend
        self.cfg = cfg
        self.file = source[0] if source else "<body>"
        self.line_base = (source[1] - 1) if source else 0
        self.diagnostics = diagnostics
        self.bugs: list[PotentialBug] = []
        self.exits = 0
        self.truncated = False
        self.expectations = {e.call_site: e for e in sf.callee_expectations}

        mutated = set(fn.params) & M.assigned_vars(fn.body)
        taken = M.read_vars(fn.body) | M.assigned_vars(fn.body) | set(fn.params)
        self.ghosts: dict[str, str] = {}
        for p in sorted(mutated):
            ghost = f"{p}__in"
            while ghost in taken:
                ghost += "_"
            self.ghosts[p] = ghost
        self.site_index: dict[int, int] = {}  # id(stmt) -> pre-order index
        for i, st in enumerate(M.walk_statements(fn.body)):
            self.site_index[id(st)] = i

    # -- state helpers ----------------------------------------------------

    def initial_state(self) -> Condition:
        pre = self.sf.spec.pre
        if not self.ghosts:
            return pre
        if pre.is_precise:
            # pin the entry value of every mutated parameter to a ghost name
            # so the exit check can still talk about the value at entry
            pins = [F.Cmp("==", F.VarRef(p), F.VarRef(g)) for p, g in self.ghosts.items()]
            f = F.conj([pre.formula, *pins])
            return Condition.of(F.render(f), f)
        return pre

    def spec_post(self) -> Condition:
        post = self.sf.spec.post
        if post.formula is not None and self.ghosts:
            f = F.rename(post.formula, self.ghosts)
            return Condition.of(post.text, f)
        return post

    def _line(self, line: int) -> int:
        return self.line_base + line

    def _bug(self, trace: list[TraceStep], line: int, violated: Condition,
             source: str, counterexample=None) -> None:
        self.bugs.append(
            PotentialBug(
                function=self.sf.spec.function,
                statement=(self.file, self._line(line)),
                violated=violated,
                trace=tuple(trace),
                verdict_source=source,
                counterexample=counterexample,
            )
        )

    # -- traversal ----------------------------------------------------------

    def run(self) -> list[PotentialBug]:
        trace: list[TraceStep] = []
        state = self.initial_state()
        final = self.walk(list(self.fn.body), state, trace)
        if final is not None:
            self.check_exit(final, None, self.fn.end_line, trace)
        return self.bugs

    def walk(self, stmts: list[M.Stmt], state: Condition,
             trace: list[TraceStep]) -> Condition | None:
        """Propagate through a statement list; returns the fall-through state
        or None when every path through it has exited. ``trace`` is the
        path-local reasoning log and is mutated in place."""
        i = 0
        n = len(stmts)
        while i < n:
            st = stmts[i]
            if isinstance(st, (M.SAssign, M.SCall)):
                j = i
                while j < n and isinstance(stmts[j], (M.SAssign, M.SCall)):
                    j += 1
                state = self._block_step(stmts[i:j], state, trace)
                i = j
                continue
            if isinstance(st, M.SReturn):
                self.check_exit(state, st.expr, st.line, trace)
                return None
            if isinstance(st, M.SIf):
                state = self._branch_step(st, state, trace)
                if state is None:
                    return None
                i += 1
                continue
            if isinstance(st, M.SWhile):
                hint = self._loop_hint(stmts[i + 1 :])
                post, inv = infer_loop_post(state, st, hint, self.backend, self.cfg)
                if inv is None and self.diagnostics is not None:
                    self.diagnostics.append(
                        f"{self.sf.spec.function}: loop at line {self._line(st.line)} "
                        "has no validated postcondition"
                    )
                trace.append(
                    TraceStep(f"line {self._line(st.line)}: while loop", state, post)
                )
                state = post
                i += 1
                continue
            raise SpecforgeError(f"unexpected statement {type(st).__name__}")
        return state

    def _block_step(self, block, state: Condition, trace: list[TraceStep]) -> Condition:
        obligations: list = []
        base = self.site_index[id(block[0])]
        post = infer_block_post(
            state, block, self.backend,
            expectations=self.expectations, obligations=obligations,
            base_index=base, bound=self.cfg.bound,
        )
        first, last = block[0].line, block[-1].line
        trace.append(
            TraceStep(f"lines {self._line(first)}-{self._line(last)}: block", state, post)
        )
        for _site, call, call_state, exp in obligations:
            self._check_call_pre(call, call_state, exp, trace)
        return post

    def _check_call_pre(self, call: M.SCall, state: Condition,
                        exp: ExpectedSpecification, trace: list[TraceStep]) -> None:
        needed = _instantiate_pre(exp, call)
        verdict, cex = _entailment(self.backend, state, needed, self.cfg.bound)
        if verdict == "holds":
            return
        source = SOURCE_UNKNOWN if verdict == "unknown" else (
            SOURCE_FORMULA if state.is_precise and needed.is_precise else SOURCE_TEXT
        )
        self._bug(trace, call.line, needed, source, cex)

    def _branch_step(self, st: M.SIf, state: Condition,
                     trace: list[TraceStep]) -> Condition | None:
        guard_text = M.render_cond(st.cond)
        guard = oracle.cond_to_formula(st.cond)
        then_state = _constrain(state, guard, guard_text, True)
        else_state = _constrain(state, F.Not(guard), guard_text, False)

        then_trace = list(trace)
        then_trace.append(
            TraceStep(f"line {self._line(st.line)}: guard {guard_text}", state, then_state)
        )
        t_end = self.walk(list(st.then_body), then_state, then_trace)

        else_trace = list(trace)
        else_trace.append(
            TraceStep(f"line {self._line(st.line)}: guard !({guard_text})", state, else_state)
        )
        if st.else_body:
            e_end = self.walk(list(st.else_body), else_state, else_trace)
        else:
            e_end = else_state

        if t_end is None and e_end is None:
            return None
        if t_end is None:
            trace[:] = else_trace
            return e_end
        if e_end is None:
            trace[:] = then_trace
            return t_end
        merged = infer_branch_post(state, st.cond, t_end, e_end)
        trace.append(
            TraceStep(f"line {self._line(st.line)}: branch merge", state, merged)
        )
        return merged

    def _loop_hint(self, suffix: list[M.Stmt]) -> Condition | None:
        # the spec post retargeted onto the loop's outcome, when the loop is
        # trailed by nothing but `return v;` (or nothing at all)
        post = self.spec_post()
        if post.formula is None:
            return None
        if len(suffix) == 1 and isinstance(suffix[0], M.SReturn) and isinstance(
            suffix[0].expr, M.EVar
        ):
            f = F.substitute(post.formula, {"result": F.VarRef(suffix[0].expr.name)})
            return Condition.of(F.render(f), f)
        if not suffix:
            f = F.substitute(post.formula, {"result": F.IntLit(0)})
            return Condition.of(F.render(f), f)
        return None

    def check_exit(self, state: Condition, expr: M.Expr | None, line: int,
                   trace: list[TraceStep]) -> None:
        self.exits += 1
        if self.exits > self.cfg.exit_path_cap:
            if not self.truncated and self.diagnostics is not None:
                self.diagnostics.append(
                    f"{self.sf.spec.function}: exit-path cap "
                    f"({self.cfg.exit_path_cap}) reached; analysis truncated"
                )
            self.truncated = True
            return
        if expr is None:
            expr = M.ELit(0)
            label = "fall-through return"
        else:
            label = f"return {M.render_expr(expr)}"
        exit_state = _bind_result(state, expr)
        exit_trace = list(trace)
        exit_trace.append(TraceStep(f"line {self._line(line)}: {label}", state, exit_state))
        target = self.spec_post()
        verdict, cex = _entailment(self.backend, exit_state, target, self.cfg.bound)
        if verdict == "holds":
            return
        source = SOURCE_UNKNOWN if verdict == "unknown" else (
            SOURCE_FORMULA if exit_state.is_precise and target.is_precise
            else SOURCE_TEXT
        )
        self._bug(exit_trace, line, self.sf.spec.post, source, cex)


def _constrain(state: Condition, guard: F.Formula, guard_text: str,
               polarity: bool) -> Condition:
    if state.is_precise:
        f = F.conj([state.formula, guard])
        return Condition.of(F.render(f), f)
    word = "holds" if polarity else "is false"
    return Condition.of(f"{state.text} The branch guard {guard_text} {word}.")


def _bind_result(state: Condition, expr: M.Expr) -> Condition:
    if state.is_precise:
        try:
            return oracle.strongest_post(
                state, [M.SAssign("result", expr, 0)]
            )
        except SpecforgeError:
            pass
    return Condition.of(f"{state.text} The function returns {M.render_expr(expr)}.")


def _instantiate_pre(exp: ExpectedSpecification, call: M.SCall) -> Condition:
    """The callee's expected pre over the caller frame at this call site."""
    if exp.pre.formula is None:
        return exp.pre
    binding = {
        p: oracle.expr_to_term(a) for p, a in zip(exp.callee_params, call.args)
    }
    f = F.substitute(exp.pre.formula, binding)
    return Condition.of(exp.pre.text, f)


def verify_function(sf: SpecFile, backend: ReasoningBackend,
                    config: ReasonerConfig | None = None,
                    source: tuple[str, int] | None = None,
                    diagnostics: list[str] | None = None) -> list[PotentialBug]:
    """Check one function against its specification; emits a PotentialBug for
    every exit whose final state fails (or cannot be shown) to entail the
    spec postcondition and for every call whose state fails to establish the
    callee's expected pre. The first violation per path is reported; other
    paths keep going.

    Raises UnparseableBodyError when a MiniLang-looking body does not parse;
    opaque bodies take the text-only route instead.
    """
    cfg = config or ReasonerConfig()
    body = sf.body.strip()
    if body.startswith("fn "):
        try:
            fn = M.parse_function(sf.body)
        except SpecforgeError as exc:
            raise UnparseableBodyError(
                f"{sf.spec.function}: body does not parse: {exc}"
            ) from exc
        return _Walker(sf, fn, backend, cfg, source, diagnostics).run()
    return _verify_opaque(sf, backend, cfg, source, diagnostics)


def _verify_opaque(sf: SpecFile, backend, cfg: ReasonerConfig,
                   source, diagnostics) -> list[PotentialBug]:
    """Text-only route for bodies in foreign languages: one whole-body
    inference, then the exit and call-site obligations."""
    file = source[0] if source else "<body>"
    line = source[1] if source else 0
    bugs: list[PotentialBug] = []
    pre = sf.spec.pre
    resp = _ask(backend, RequestKind.INFER_POSTCONDITION,
                {"pre": pre.to_json(), "block": sf.body, "hint": "opaque"})
    doc = (resp.result or {}).get("post") if resp and isinstance(resp.result, dict) else None
    final = Condition.from_json(doc) if doc else Condition.of(
        f"{pre.text} The body has executed (no post derived)."
    )
    trace = (TraceStep("whole body", pre, final),)

    for exp in sf.callee_expectations:
        verdict, cex = _entailment(backend, final, exp.pre, cfg.bound)
        if verdict != "holds":
            bugs.append(
                PotentialBug(
                    function=sf.spec.function,
                    statement=(file, line),
                    violated=exp.pre,
                    trace=trace,
                    verdict_source=SOURCE_UNKNOWN if verdict == "unknown" else SOURCE_TEXT,
                    counterexample=cex,
                )
            )

    verdict, cex = _entailment(backend, final, sf.spec.post, cfg.bound)
    if verdict != "holds":
        bugs.append(
            PotentialBug(
                function=sf.spec.function,
                statement=(file, line),
                violated=sf.spec.post,
                trace=trace,
                verdict_source=SOURCE_UNKNOWN if verdict == "unknown" else SOURCE_TEXT,
                counterexample=cex,
            )
        )
    return bugs
