"""Deterministic backend: serves every request kind from the bounded Hoare
oracle plus a handful of fixed heuristics, so the whole pipeline runs and is
exactly checkable without any language model.

Intent enters oracle mode through domain knowledge: a shard may carry
machine-readable contract blocks, and caller-side expectation generation
routes those contracts down the call graph::

    ### contract: g_sum(n)
    pre: n >= 0 and n <= 8
    post: 2*result == n*(n-1)
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass

from .. import formula as F
from .. import minilang as M
from .. import oracle
from ..errors import (
    BackendError,
    EnumerationBudgetError,
    ImpreciseConditionError,
    SpecforgeError,
    UnsupportedStatementError,
)
from ..specmodel import (
    PROVENANCE_COMBINED,
    PROVENANCE_CYCLE,
    PROVENANCE_ENTRY,
    Condition,
    ExpectedSpecification,
    combine_expected_specs,
)
from .base import ReasoningBackend, ReasoningRequest, ReasoningResponse, RequestKind

_CONTRACT_RE = re.compile(r"^###\s*contract:\s*([A-Za-z_][A-Za-z0-9_]*)\((.*?)\)\s*$")


@dataclass(frozen=True)
class Contract:
    name: str
    params: tuple[str, ...]
    pre: Condition
    post: Condition


def parse_contracts(dk_text: str) -> dict[str, Contract]:
    """Extract contract blocks from a domain-knowledge shard."""
    contracts: dict[str, Contract] = {}
    current: dict | None = None

    def flush():
        nonlocal current
        if current and current.get("pre") and current.get("post"):
            c = Contract(
                current["name"], current["params"], current["pre"], current["post"]
            )
            contracts[c.name] = c
        current = None

    for line in dk_text.split("\n"):
        m = _CONTRACT_RE.match(line.strip())
        if m:
            flush()
            params = tuple(p.strip() for p in m.group(2).split(",") if p.strip())
            current = {"name": m.group(1), "params": params}
            continue
        if current is None:
            continue
        s = line.strip()
        for key in ("pre", "post"):
            if s.startswith(key + ":"):
                text = s[len(key) + 1 :].strip()
                try:
                    current[key] = Condition.from_formula(F.parse(text))
                except Exception:
                    current[key] = Condition.of(text)
    flush()
    return contracts


class OracleBackend(ReasoningBackend):
    """Pure and stateless; callable from any number of workers."""

    def __init__(self, dom: oracle.BoundedDomain | None = None, batch_size: int = 8):
        self.dom = dom or oracle.BoundedDomain()
        self.batch_size = batch_size

    def submit(self, req: ReasoningRequest) -> ReasoningResponse:
        handler = {
            RequestKind.GENERATE_ENTRY_SPEC: self._generate_entry_spec,
            RequestKind.GENERATE_INTERNAL_SPEC: self._generate_internal_spec,
            RequestKind.INFER_POSTCONDITION: self._infer_postcondition,
            RequestKind.CHECK_ENTAILMENT: self._check_entailment,
            RequestKind.PROPOSE_INVARIANT: self._propose_invariant,
            RequestKind.MERGE_CONDITIONS: self._merge_conditions,
            RequestKind.GENERATE_TEST_CASE: self._generate_test_case,
            RequestKind.PROPOSE_PHASE_PARTITION: self._propose_phase_partition,
            RequestKind.FORMALIZE_CONDITION: self._formalize_condition,
        }.get(req.kind)
        if handler is None:
            raise BackendError(f"oracle backend does not serve {req.kind}")
        result, note = handler(req.payload)
        return ReasoningResponse(req.kind, result, raw=note, tokens_used=0)

    # -- specification generation -----------------------------------------

    def _spec_conditions(self, name: str, contracts) -> tuple[Condition, Condition]:
        c = contracts.get(name)
        if c is None:
            return Condition.true(), Condition.true()
        return c.pre, c.post

    def _callee_expectations(self, fn_doc: dict, contracts) -> list[dict]:
        out = []
        for site in fn_doc.get("call_sites", []):
            callee = site["callee"]
            c = contracts.get(callee)
            if c is None:
                pre, post, params = Condition.true(), Condition.true(), ()
            else:
                pre, post, params = c.pre, c.post, c.params
            out.append(
                ExpectedSpecification(
                    caller=fn_doc["name"],
                    callee=callee,
                    pre=pre,
                    post=post,
                    call_site=int(site["call_site"]),
                    callee_params=tuple(params),
                ).to_json()
            )
        return out

    def _generate_entry_spec(self, payload: dict):
        fn_doc = payload["function"]
        contracts = parse_contracts(payload.get("dk_text") or "")
        pre, post = self._spec_conditions(fn_doc["name"], contracts)
        spec = {
            "function": fn_doc["name"],
            "pre": pre.to_json(),
            "post": post.to_json(),
            "provenance": PROVENANCE_ENTRY,
        }
        return (
            {"specs": {fn_doc["name"]: spec},
             "expectations": self._callee_expectations(fn_doc, contracts)},
            "entry spec from domain contracts",
        )

    def _generate_internal_spec(self, payload: dict):
        contracts = parse_contracts(payload.get("dk_text") or "")
        specs: dict[str, dict] = {}
        expectations: list[dict] = []
        for fn_doc in payload["functions"]:
            name = fn_doc["name"]
            exp_docs = (payload.get("expectations") or {}).get(name) or []
            if exp_docs:
                exps = [ExpectedSpecification.from_json(d) for d in exp_docs]
                spec = combine_expected_specs(exps, self)
                specs[name] = spec.to_json()
            else:
                # cycle-style: no outside-SCC caller evidence; fall back to
                # the domain contract (the deterministic stand-in for reading
                # the cycle peers' implementations)
                pre, post = self._spec_conditions(name, contracts)
                specs[name] = {
                    "function": name,
                    "pre": pre.to_json(),
                    "post": post.to_json(),
                    "provenance": PROVENANCE_CYCLE,
                }
            expectations.extend(self._callee_expectations(fn_doc, contracts))
        return {"specs": specs, "expectations": expectations}, "internal specs combined"

    # -- Hoare-style inference ---------------------------------------------

    def _infer_postcondition(self, payload: dict):
        pre = Condition.from_json(payload["pre"])
        if not pre.is_precise:
            return {"post": None}, "imprecise precondition; no strongest post"
        try:
            stmts = M.parse_statements(payload["block"])
            post = oracle.strongest_post(pre, list(stmts))
        except (SpecforgeError, Exception) as exc:  # noqa: BLE001
            return {"post": None}, f"cannot compute strongest post: {exc}"
        return {"post": post.to_json()}, "strongest postcondition"

    def _check_entailment(self, payload: dict):
        dom = self._dom(payload)
        try:
            a = Condition.from_json(payload["antecedent"])
            c = Condition.from_json(payload["consequent"])
            r = oracle.check_entailment_bounded(a, c, dom)
        except (ImpreciseConditionError, SpecforgeError) as exc:
            return (
                {"verdict": "unknown", "counterexample": None},
                f"not decidable by enumeration: {exc}",
            )
        return (
            {"verdict": r.verdict, "counterexample": r.counterexample},
            "bounded enumeration",
        )

    def _dom(self, payload: dict) -> oracle.BoundedDomain:
        bound = payload.get("bound")
        if bound:
            return oracle.BoundedDomain(int(bound), self.dom.enumeration_budget)
        return self.dom

    def _propose_invariant(self, payload: dict):
        pre = Condition.from_json(payload["pre"])
        hint = Condition.from_json(payload["post_hint"])
        frame_doc = payload.get("frame")
        frame = Condition.from_json(frame_doc) if frame_doc else None
        prior = set(payload.get("prior") or ())
        if not (pre.is_precise and hint.is_precise):
            return {"invariant": None}, "imprecise inputs"
        try:
            loop = M.parse_statements(payload["loop"])
        except SpecforgeError as exc:
            return {"invariant": None}, f"unparseable loop: {exc}"
        if len(loop) != 1 or not isinstance(loop[0], M.SWhile):
            return {"invariant": None}, "payload is not a single while loop"

        for cand in _invariant_candidates(pre, hint, frame, loop[0]):
            rendered = F.render(cand)
            if rendered not in prior:
                return (
                    {"invariant": Condition.from_formula(cand).to_json()},
                    "heuristic invariant candidate",
                )
        return {"invariant": None}, "candidate pool exhausted"

    def _merge_conditions(self, payload: dict):
        conds = [Condition.from_json(d) for d in payload["conditions"]]
        mode = payload.get("mode", "all")
        texts = []
        for c in conds:
            if c.text not in texts:
                texts.append(c.text)
        label = "Any of: " if mode == "any" else "All of: "
        text = texts[0] if len(texts) == 1 else label + "; ".join(texts)
        formula = None
        if all(c.is_precise for c in conds):
            join = F.disj if mode == "any" else F.conj
            formula = join([c.formula for c in conds])
        return {"merged": Condition.of(text, formula).to_json()}, "deterministic merge"

    # -- test-case generation ----------------------------------------------

    def _generate_test_case(self, payload: dict):
        entry = payload["entry"]
        params = [p[0] for p in entry.get("params") or []]
        bound = int(payload.get("bound") or self.dom.bound)
        prior = set(payload.get("prior_inputs") or ())
        pre_doc = payload.get("entry_pre")
        pre = Condition.from_json(pre_doc) if pre_doc else None

        def render(args: list[int]) -> str:
            return json.dumps({"entry": entry["name"], "args": args})

        cex = (payload.get("bug") or {}).get("counterexample") or {}
        if params and any(p in cex for p in params):
            args = [int(cex.get(p, 0)) for p in params]
            text = render(args)
            if text not in prior:
                return (
                    {"input": text, "expected_signal": "spec_violation"},
                    "counterexample-guided input",
                )

        ordered = _small_first(bound)
        import itertools

        for combo in itertools.product(ordered, repeat=len(params)):
            if pre is not None and pre.is_precise:
                env = dict(zip(params, combo))
                try:
                    if not F.evaluate(pre.formula, env):
                        continue
                except Exception:
                    pass
            text = render(list(combo))
            if text not in prior:
                return (
                    {"input": text, "expected_signal": "spec_violation"},
                    "systematic input enumeration",
                )
        return None, "input space exhausted"

    def _propose_phase_partition(self, payload: dict):
        names = sorted(payload.get("functions") or [])
        return {"phases": {"main": names}}, "single-phase fallback partition"

    def _formalize_condition(self, payload: dict):
        f = formalize_text(str(payload.get("text") or ""))
        return (
            {"formula": F.render(f) if f is not None else None},
            "phrase-table translation",
        )


def _small_first(bound: int) -> list[int]:
    out = [0]
    for v in range(1, bound + 1):
        out.extend((v, -v))
    return out


# --------------------------------------------------------------------------
# Invariant candidate heuristics


def _invariant_candidates(pre: Condition, hint: Condition, frame, loop: M.SWhile):
    """Deterministic, ordered invariant candidates:

    1. the post hint with one guard side substituted for the other plus the
       relaxed guard bound (the classic shape for counting loops),
    2. the loop-head state itself (right for zero-iteration loops),
    3. the hint as-is,
    4. loop-head state conjoined with the hint.
    """
    frame_f = frame.formula if frame is not None and frame.formula is not None else F.TRUE
    hint_f = hint.formula
    pre_f = pre.formula
    guard = oracle.cond_to_formula(loop.cond)

    cands: list[F.Formula] = []
    for subst, relax in _guard_substitutions(guard):
        cands.append(F.conj([F.substitute(hint_f, subst), relax, frame_f]))
    cands.append(pre_f)
    cands.append(F.conj([hint_f, frame_f]))
    cands.append(F.conj([pre_f, hint_f, frame_f]))

    seen: set[str] = set()
    for c in cands:
        c = F.simplify(c)
        key = F.render(c)
        if key not in seen and not F.has_upred(c):
            seen.add(key)
            yield c


def _guard_substitutions(guard: F.Formula):
    """(substitution, relaxed-bound) pairs derived from guard atoms."""
    atoms: list[F.Cmp] = []

    def collect(f):
        if isinstance(f, F.Cmp):
            atoms.append(f)
        elif isinstance(f, (F.And, F.Or)):
            for p in f.parts:
                collect(p)
        elif isinstance(f, F.Not):
            collect(f.inner)

    collect(guard)
    for atom in atoms:
        l, r = atom.left, atom.right
        if not (isinstance(l, F.VarRef) and isinstance(r, F.VarRef)):
            continue
        if atom.op == "<":
            relax = F.Cmp("<=", l, r)
        elif atom.op == "<=":
            relax = F.Cmp("<=", l, F.BinTerm("+", r, F.IntLit(1)))
        elif atom.op == ">":
            relax = F.Cmp(">=", l, r)
        elif atom.op == ">=":
            relax = F.Cmp(">=", l, F.BinTerm("-", r, F.IntLit(1)))
        else:
            continue
        yield {r.name: l}, relax
        yield {l.name: r}, relax


# --------------------------------------------------------------------------
# Phrase table: canonical natural-language conditions -> formulas

_INT = r"(-?\d+)"
_VAR = r"([A-Za-z_][A-Za-z0-9_]*)"


def _v(name: str) -> F.Term:
    return F.VarRef(name)


def _lit_or_var(tok: str) -> F.Term:
    try:
        return F.IntLit(int(tok))
    except ValueError:
        return F.VarRef(tok)


_PHRASES: list[tuple[re.Pattern, object]] = [
    (re.compile(rf"^{_VAR} is positive$"), lambda m: F.Cmp(">", _v(m[1]), F.IntLit(0))),
    (re.compile(rf"^{_VAR} is negative$"), lambda m: F.Cmp("<", _v(m[1]), F.IntLit(0))),
    (
        re.compile(rf"^{_VAR} is non-?negative$"),
        lambda m: F.Cmp(">=", _v(m[1]), F.IntLit(0)),
    ),
    (re.compile(rf"^{_VAR} is zero$"), lambda m: F.Cmp("==", _v(m[1]), F.IntLit(0))),
    (
        re.compile(rf"^{_VAR} is not zero$|^{_VAR} is nonzero$"),
        lambda m: F.Cmp("!=", _v(m[1] or m[2]), F.IntLit(0)),
    ),
    (
        re.compile(rf"^{_VAR} (?:equals|is equal to) (\S+)$"),
        lambda m: F.Cmp("==", _v(m[1]), _lit_or_var(m[2])),
    ),
    (
        re.compile(rf"^{_VAR} is at least (\S+)$"),
        lambda m: F.Cmp(">=", _v(m[1]), _lit_or_var(m[2])),
    ),
    (
        re.compile(rf"^{_VAR} is at most (\S+)$"),
        lambda m: F.Cmp("<=", _v(m[1]), _lit_or_var(m[2])),
    ),
    (
        re.compile(rf"^{_VAR} is greater than (\S+)$"),
        lambda m: F.Cmp(">", _v(m[1]), _lit_or_var(m[2])),
    ),
    (
        re.compile(rf"^{_VAR} is less than (\S+)$"),
        lambda m: F.Cmp("<", _v(m[1]), _lit_or_var(m[2])),
    ),
    (
        re.compile(rf"^{_VAR} is between {_INT} and {_INT}$"),
        lambda m: F.And(
            (
                F.Cmp(">=", _v(m[1]), F.IntLit(int(m[2]))),
                F.Cmp("<=", _v(m[1]), F.IntLit(int(m[3]))),
            )
        ),
    ),
    (
        re.compile(rf"^the result is the sum of {_VAR} and {_VAR}$"),
        lambda m: F.Cmp("==", _v("result"), F.BinTerm("+", _v(m[1]), _v(m[2]))),
    ),
    (
        re.compile(rf"^the result is the product of {_VAR} and {_VAR}$"),
        lambda m: F.Cmp("==", _v("result"), F.BinTerm("*", _v(m[1]), _v(m[2]))),
    ),
    (
        re.compile(rf"^the result (?:equals|is) {_VAR}$"),
        lambda m: F.Cmp("==", _v("result"), _v(m[1])),
    ),
    (
        re.compile(rf"^the result (?:equals|is) {_INT}$"),
        lambda m: F.Cmp("==", _v("result"), F.IntLit(int(m[1]))),
    ),
    (
        re.compile(rf"^{_VAR} is even$"),
        lambda m: F.Cmp(
            "==",
            F.BinTerm("*", F.IntLit(2), F.BinTerm("/", _v(m[1]), F.IntLit(2))),
            _v(m[1]),
        ),
    ),
    (
        re.compile(rf"^{_VAR} is odd$"),
        lambda m: F.Not(
            F.Cmp(
                "==",
                F.BinTerm("*", F.IntLit(2), F.BinTerm("/", _v(m[1]), F.IntLit(2))),
                _v(m[1]),
            )
        ),
    ),
]

_IS_A = re.compile(rf"^{_VAR} is an? ([a-z][a-z0-9_]*)$")


def formalize_text(text: str) -> F.Formula | None:
    """Best-effort translation of one canonical phrase into a formula.

    Unknown 'x is a <concept>' phrases become uninterpreted predicates,
    which downstream code treats as ambiguous; anything else stays prose.
    """
    s = text.strip().rstrip(".").strip().lower()
    if s in ("true", "always"):
        return F.TRUE
    for pattern, build in _PHRASES:
        m = pattern.match(s)
        if m:
            return build(m)
    m = _IS_A.match(s)
    if m:
        return F.UPred(f"is_{m[2]}", (F.VarRef(m[1]),))
    return None
