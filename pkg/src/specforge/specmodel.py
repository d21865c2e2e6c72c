"""Conditions, function specifications, caller expectations, the caller
combination rule, domain-knowledge routing, and the per-function spec file
format.

A Condition carries prose plus an optional formula. It is *precise* exactly
when the formula exists and mentions no uninterpreted predicate; only precise
conditions are eligible for exact bounded checking, everything else goes
through textual reasoning.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace

from . import formula as F
from .errors import SpecFileFormatError, SpecforgeError

PRECISE = "precise"
AMBIGUOUS = "ambiguous"

PROVENANCE_ENTRY = "entry"
PROVENANCE_COMBINED = "combined"
PROVENANCE_CYCLE = "cycle"


@dataclass(frozen=True)
class Condition:
    text: str
    formula: F.Formula | None = None

    def __post_init__(self):
        if not self.text.strip():
            raise SpecforgeError("condition text must be nonempty")

    @classmethod
    def of(cls, text: str, formula: F.Formula | None = None) -> "Condition":
        return cls(text=text.strip(), formula=formula)

    @classmethod
    def from_formula(cls, f: F.Formula) -> "Condition":
        return cls(text=F.render(f), formula=f)

    @classmethod
    def true(cls) -> "Condition":
        return cls.from_formula(F.TRUE)

    @property
    def precision(self) -> str:
        # the uninterpreted-predicate gate: a formula with U_* predicates is
        # kept for the record but never counts as precise
        if self.formula is not None and not F.has_upred(self.formula):
            return PRECISE
        return AMBIGUOUS

    @property
    def is_precise(self) -> bool:
        return self.precision == PRECISE

    def to_json(self) -> dict:
        return {
            "text": self.text,
            "formula": F.render(self.formula) if self.formula is not None else None,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "Condition":
        raw = doc.get("formula")
        formula = F.parse(raw) if raw else None
        return cls.of(str(doc["text"]), formula)


@dataclass(frozen=True)
class Specification:
    function: str
    pre: Condition
    post: Condition
    provenance: str  # entry | combined | cycle

    def to_json(self) -> dict:
        return {
            "function": self.function,
            "pre": self.pre.to_json(),
            "post": self.post.to_json(),
            "provenance": self.provenance,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "Specification":
        return cls(
            function=doc["function"],
            pre=Condition.from_json(doc["pre"]),
            post=Condition.from_json(doc["post"]),
            provenance=doc.get("provenance", PROVENANCE_ENTRY),
        )


@dataclass(frozen=True)
class ExpectedSpecification:
    """What one caller demands of a callee at one call site.

    Conditions are over the callee frame: the named callee parameters plus
    ``result`` for the return value. ``callee_params`` records the parameter
    order so call sites can instantiate the conditions against actual
    argument expressions.
    """

    caller: str
    callee: str
    pre: Condition
    post: Condition
    call_site: int  # pre-order statement index in the caller
    callee_params: tuple[str, ...] = ()

    def to_json(self) -> dict:
        return {
            "caller": self.caller,
            "callee": self.callee,
            "pre": self.pre.to_json(),
            "post": self.post.to_json(),
            "call_site": self.call_site,
            "callee_params": list(self.callee_params),
        }

    @classmethod
    def from_json(cls, doc: dict) -> "ExpectedSpecification":
        return cls(
            caller=doc["caller"],
            callee=doc["callee"],
            pre=Condition.from_json(doc["pre"]),
            post=Condition.from_json(doc["post"]),
            call_site=int(doc["call_site"]),
            callee_params=tuple(doc.get("callee_params") or ()),
        )


@dataclass(frozen=True)
class SpecFile:
    """The three-part per-function file: own specification, expectations for
    the function's callees, and the function body."""

    spec: Specification
    callee_expectations: tuple[ExpectedSpecification, ...]
    body: str


@dataclass(frozen=True)
class DomainKnowledge:
    shards: dict[str, str]  # component label -> text

    def __post_init__(self):
        for label, text in self.shards.items():
            if not text.strip():
                raise SpecforgeError(f"domain-knowledge shard '{label}' is empty")

    @classmethod
    def empty(cls) -> "DomainKnowledge":
        return cls(shards={})


def route_domain_knowledge(dk: DomainKnowledge, fn, phases: dict[str, set[str]] | None = None) -> str:
    """The shard for the function's phase/component; empty when none matches.
    Never concatenates shards and never fails."""
    if fn.phase and fn.phase in dk.shards:
        return dk.shards[fn.phase]
    if phases:
        for label in sorted(phases):
            if fn.name in phases[label] and label in dk.shards:
                return dk.shards[label]
    if not fn.phase and len(dk.shards) == 1 and "default" in dk.shards:
        return dk.shards["default"]
    return ""


# --------------------------------------------------------------------------
# Caller combination rule


def combine_expected_specs(
    expectations, backend, diagnostics: list[str] | None = None
) -> Specification:
    """Fuse the expectations of every caller into one specification.

    The precondition is the disjunction of the callers' preconditions (the
    callee may be entered from any of those contexts) and the postcondition
    is the conjunction of their postconditions (all callers rely on theirs at
    once). With every condition precise the formulas are built literally that
    way and self-checked by bounded entailment; with any ambiguous condition
    the backend merges the prose and the merge is recorded as unchecked.
    """
    exps = list(expectations)
    if not exps:
        raise SpecforgeError("cannot combine an empty expectation list")
    callees = {e.callee for e in exps}
    if len(callees) != 1:
        raise SpecforgeError(f"expectations target multiple callees: {sorted(callees)}")
    callee = exps[0].callee
    exps = sorted(exps, key=lambda e: (e.caller, e.call_site))

    if len(exps) == 1:
        spec = Specification(callee, exps[0].pre, exps[0].post, PROVENANCE_COMBINED)
        _self_check(spec, exps, backend, diagnostics)
        return spec

    pres = [e.pre for e in exps]
    posts = [e.post for e in exps]
    pre = _merge(pres, "any", backend)
    post = _merge(posts, "all", backend)
    spec = Specification(callee, pre, post, PROVENANCE_COMBINED)
    _self_check(spec, exps, backend, diagnostics)
    return spec


def _merge(conds: list[Condition], mode: str, backend) -> Condition:
    joiner = F.disj if mode == "any" else F.conj
    if all(c.is_precise for c in conds):
        combined = joiner([c.formula for c in conds])
        texts = _dedupe([c.text for c in conds])
        if len(texts) == 1:
            text = texts[0]
        elif mode == "any":
            text = "Any of the following caller contexts holds: " + "; ".join(texts)
        else:
            text = "All of the following hold: " + "; ".join(texts)
        return Condition.of(text, combined)

    from .backend.base import ReasoningRequest, RequestKind

    resp = backend.submit(
        ReasoningRequest(
            RequestKind.MERGE_CONDITIONS,
            {"conditions": [c.to_json() for c in conds], "mode": mode},
        )
    )
    merged = (resp.result or {}).get("merged") if isinstance(resp.result, dict) else None
    if merged:
        return Condition.from_json(merged)
    # degraded but safe: keep the prose, drop formula-level claims
    texts = _dedupe([c.text for c in conds])
    word = "Any of: " if mode == "any" else "All of: "
    return Condition.of(word + "; ".join(texts))


def _dedupe(texts: list[str]) -> list[str]:
    seen, out = set(), []
    for t in texts:
        if t not in seen:
            seen.add(t)
            out.append(t)
    return out


def _self_check(spec: Specification, exps, backend, diagnostics: list[str] | None) -> None:
    """Semantic contract of the merge: each caller pre entails the combined
    pre; the combined post entails each caller post. Checked by bounded
    entailment when formulas exist, recorded as unchecked otherwise."""
    from .backend.base import ReasoningRequest, RequestKind

    def note(msg: str):
        if diagnostics is not None:
            diagnostics.append(msg)

    if not (spec.pre.is_precise and spec.post.is_precise
            and all(e.pre.is_precise and e.post.is_precise for e in exps)):
        note(f"{spec.function}: combination recorded as unchecked (ambiguous conditions)")
        return

    def entails(a: Condition, b: Condition) -> str:
        resp = backend.submit(
            ReasoningRequest(
                RequestKind.CHECK_ENTAILMENT,
                {"antecedent": a.to_json(), "consequent": b.to_json()},
            )
        )
        result = resp.result or {}
        return result.get("verdict", "unknown")

    for e in exps:
        if entails(e.pre, spec.pre) != "holds":
            note(f"{spec.function}: caller {e.caller} pre not covered by combined pre")
        if entails(spec.post, e.post) != "holds":
            note(f"{spec.function}: combined post does not entail caller {e.caller} post")

    unsat = entails(spec.post, Condition.from_formula(F.FALSE))
    if unsat == "holds":
        note(
            f"{spec.function}: spec-conflict - caller postconditions are mutually "
            "unsatisfiable over the bounded domain"
        )


# --------------------------------------------------------------------------
# Spec file rendering and parsing
#
# Markdown with fixed headers:
#   ## Specification            (Function:/Provenance: lines, ### Pre, ### Post)
#   ## Expected Callee Specifications   (### <callee>@<call_site> each)
#   ## Function Body            (fenced code block)
# Each Pre/Post holds a text paragraph and an optional ```formula block.

_H_SPEC = "## Specification"
_H_EXPECT = "## Expected Callee Specifications"
_H_BODY = "## Function Body"


def _render_condition(heading: str, cond: Condition) -> list[str]:
    lines = [heading, "", cond.text, ""]
    if cond.formula is not None:
        lines += ["```formula", F.render(cond.formula), "```", ""]
    return lines


def render_spec_file(sf: SpecFile) -> str:
    lines: list[str] = [_H_SPEC, ""]
    lines.append(f"Function: {sf.spec.function}")
    lines.append(f"Provenance: {sf.spec.provenance}")
    lines.append("")
    lines += _render_condition("### Pre", sf.spec.pre)
    lines += _render_condition("### Post", sf.spec.post)
    lines.append(_H_EXPECT)
    lines.append("")
    for exp in sf.callee_expectations:
        lines.append(f"### {exp.callee}@{exp.call_site}")
        lines.append("")
        if exp.callee_params:
            lines.append(f"Params: {', '.join(exp.callee_params)}")
            lines.append("")
        lines += _render_condition("#### Pre", exp.pre)
        lines += _render_condition("#### Post", exp.post)
    lines.append(_H_BODY)
    lines.append("")
    fence = "`" * max(3, _longest_backtick_run(sf.body) + 1)
    lines.append(fence)
    if sf.body:
        lines.append(sf.body)
    lines.append(fence)
    lines.append("")
    return "\n".join(lines)


def _longest_backtick_run(text: str) -> int:
    longest = 0
    for m in re.finditer(r"`+", text):
        longest = max(longest, len(m.group(0)))
    return longest


class _SpecFileParser:
    def __init__(self, text: str):
        self.lines = text.split("\n")
        self.i = 0

    def error(self, msg: str):
        raise SpecFileFormatError(f"{msg} (line {self.i + 1})")

    def at_end(self) -> bool:
        return self.i >= len(self.lines)

    def peek(self) -> str:
        return self.lines[self.i] if not self.at_end() else ""

    def skip_blank(self):
        while not self.at_end() and not self.lines[self.i].strip():
            self.i += 1

    def expect_header(self, header: str):
        self.skip_blank()
        if self.peek().strip() != header:
            self.error(f"missing section header {header!r}")
        self.i += 1

    def read_kv(self, key: str) -> str:
        self.skip_blank()
        line = self.peek().strip()
        prefix = key + ":"
        if not line.startswith(prefix):
            self.error(f"missing '{key}:' line")
        self.i += 1
        return line[len(prefix):].strip()

    def read_condition(self, heading: str) -> Condition:
        self.expect_header(heading)
        self.skip_blank()
        text_lines: list[str] = []
        while not self.at_end():
            line = self.lines[self.i]
            s = line.strip()
            if s.startswith("#") or s.startswith("```"):
                break
            text_lines.append(line)
            self.i += 1
        text = "\n".join(text_lines).strip()
        if not text:
            self.error(f"empty condition text under {heading!r}")
        formula = None
        self.skip_blank()
        if self.peek().strip() == "```formula":
            self.i += 1
            body: list[str] = []
            while not self.at_end() and self.lines[self.i].strip() != "```":
                body.append(self.lines[self.i])
                self.i += 1
            if self.at_end():
                self.error("unterminated formula block")
            self.i += 1
            try:
                formula = F.parse("\n".join(body).strip())
            except Exception as exc:
                self.error(f"malformed formula block: {exc}")
        return Condition.of(text, formula)


def parse_spec_file(text: str) -> SpecFile:
    p = _SpecFileParser(text)
    p.expect_header(_H_SPEC)
    function = p.read_kv("Function")
    provenance = p.read_kv("Provenance")
    if provenance not in (PROVENANCE_ENTRY, PROVENANCE_COMBINED, PROVENANCE_CYCLE):
        p.error(f"unknown provenance {provenance!r}")
    pre = p.read_condition("### Pre")
    post = p.read_condition("### Post")
    spec = Specification(function, pre, post, provenance)

    p.expect_header(_H_EXPECT)
    expectations: list[ExpectedSpecification] = []
    while True:
        p.skip_blank()
        line = p.peek().strip()
        if line == _H_BODY or p.at_end():
            break
        m = re.fullmatch(r"### (\S+)@(\d+)", line)
        if not m:
            p.error("expected '### <callee>@<call_site>' or '## Function Body'")
        p.i += 1
        callee, site = m.group(1), int(m.group(2))
        p.skip_blank()
        params: tuple[str, ...] = ()
        if p.peek().strip().startswith("Params:"):
            raw = p.peek().strip()[len("Params:"):].strip()
            params = tuple(x.strip() for x in raw.split(",") if x.strip())
            p.i += 1
        e_pre = p.read_condition("#### Pre")
        e_post = p.read_condition("#### Post")
        expectations.append(
            ExpectedSpecification(function, callee, e_pre, e_post, site, params)
        )

    p.expect_header(_H_BODY)
    p.skip_blank()
    fence = p.peek().strip()
    if not re.fullmatch(r"`{3,}", fence):
        p.error("missing fenced body block")
    p.i += 1
    body_lines: list[str] = []
    while not p.at_end() and p.lines[p.i].strip() != fence:
        body_lines.append(p.lines[p.i])
        p.i += 1
    if p.at_end():
        p.error("unterminated body block")
    p.i += 1
    body = "\n".join(body_lines)
    return SpecFile(spec, tuple(expectations), body)
