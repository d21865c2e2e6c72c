"""Quantifier-free integer formulas: the assertion language shared by the
Hoare oracle, specification conditions, and the code reasoner.

Atoms are comparisons between integer terms built from variables, literals,
``+ - *`` and truncating ``/``, plus uninterpreted predicates written
``U_<name>(args)`` that stand in for concepts a natural-language condition
left vague. Connectives are ``and``/``or``/``not``; there are no quantifiers.

Division is total: ``x / 0`` evaluates to 0. Callers that care about runtime
division errors (the strongest-postcondition builder does) must emit an
explicit ``divisor != 0`` guard next to any division they introduce.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Mapping

from .errors import FormulaParseError, ImpreciseConditionError

CMP_OPS = ("<=", ">=", "==", "!=", "<", ">")
_TERM_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


# --------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class IntLit:
    value: int


@dataclass(frozen=True)
class VarRef:
    name: str


@dataclass(frozen=True)
class BinTerm:
    op: str  # one of + - * /
    left: "Term"
    right: "Term"


Term = IntLit | VarRef | BinTerm


@dataclass(frozen=True)
class BoolLit:
    value: bool


@dataclass(frozen=True)
class Cmp:
    op: str  # one of CMP_OPS
    left: Term
    right: Term


@dataclass(frozen=True)
class UPred:
    name: str
    args: tuple[Term, ...]


@dataclass(frozen=True)
class Not:
    inner: "Formula"


@dataclass(frozen=True)
class And:
    parts: tuple["Formula", ...]


@dataclass(frozen=True)
class Or:
    parts: tuple["Formula", ...]


Formula = BoolLit | Cmp | UPred | Not | And | Or

TRUE = BoolLit(True)
FALSE = BoolLit(False)


def conj(parts: Iterable[Formula]) -> Formula:
    """n-ary conjunction, flattened and deduplicated."""
    return simplify(And(tuple(parts)))


def disj(parts: Iterable[Formula]) -> Formula:
    """n-ary disjunction, flattened and deduplicated."""
    return simplify(Or(tuple(parts)))


# --------------------------------------------------------------------------
# Structural helpers


def free_vars(node: Formula | Term) -> frozenset[str]:
    out: set[str] = set()
    _collect_vars(node, out)
    return frozenset(out)


def _collect_vars(node, out: set[str]) -> None:
    if isinstance(node, VarRef):
        out.add(node.name)
    elif isinstance(node, BinTerm):
        _collect_vars(node.left, out)
        _collect_vars(node.right, out)
    elif isinstance(node, Cmp):
        _collect_vars(node.left, out)
        _collect_vars(node.right, out)
    elif isinstance(node, UPred):
        for a in node.args:
            _collect_vars(a, out)
    elif isinstance(node, Not):
        _collect_vars(node.inner, out)
    elif isinstance(node, (And, Or)):
        for p in node.parts:
            _collect_vars(p, out)


def has_upred(f: Formula) -> bool:
    if isinstance(f, UPred):
        return True
    if isinstance(f, Not):
        return has_upred(f.inner)
    if isinstance(f, (And, Or)):
        return any(has_upred(p) for p in f.parts)
    return False


def substitute_term(t: Term, mapping: Mapping[str, Term]) -> Term:
    if isinstance(t, IntLit):
        return t
    if isinstance(t, VarRef):
        return mapping.get(t.name, t)
    return BinTerm(t.op, substitute_term(t.left, mapping), substitute_term(t.right, mapping))


def substitute(f: Formula, mapping: Mapping[str, Term]) -> Formula:
    """Simultaneous substitution of variables by terms."""
    if isinstance(f, BoolLit):
        return f
    if isinstance(f, Cmp):
        return Cmp(f.op, substitute_term(f.left, mapping), substitute_term(f.right, mapping))
    if isinstance(f, UPred):
        return UPred(f.name, tuple(substitute_term(a, mapping) for a in f.args))
    if isinstance(f, Not):
        return Not(substitute(f.inner, mapping))
    if isinstance(f, And):
        return And(tuple(substitute(p, mapping) for p in f.parts))
    return Or(tuple(substitute(p, mapping) for p in f.parts))


def rename(f: Formula, mapping: Mapping[str, str]) -> Formula:
    return substitute(f, {k: VarRef(v) for k, v in mapping.items()})


def simplify(f: Formula) -> Formula:
    """Flatten nested and/or, drop duplicate and absorbing literal parts.

    Deliberately no solver-style rewriting; output is deterministic in the
    input's structure.
    """
    if isinstance(f, Not):
        return Not(simplify(f.inner))
    if not isinstance(f, (And, Or)):
        return f
    flat: list[Formula] = []
    seen: set[str] = set()
    absorb = FALSE if isinstance(f, And) else TRUE
    neutral = TRUE if isinstance(f, And) else FALSE
    for part in f.parts:
        part = simplify(part)
        same = And if isinstance(f, And) else Or
        children = part.parts if isinstance(part, same) else (part,)
        for c in children:
            if c == absorb:
                return absorb
            if c == neutral:
                continue
            key = render(c)
            if key not in seen:
                seen.add(key)
                flat.append(c)
    if not flat:
        return neutral
    if len(flat) == 1:
        return flat[0]
    return And(tuple(flat)) if isinstance(f, And) else Or(tuple(flat))


def conjuncts(f: Formula) -> tuple[Formula, ...]:
    """Top-level conjunct list (a non-And formula is its own single conjunct)."""
    if isinstance(f, And):
        return f.parts
    if f == TRUE:
        return ()
    return (f,)


# --------------------------------------------------------------------------
# Evaluation


def trunc_div(a: int, b: int) -> int:
    """Truncating division toward zero, total with b == 0 mapped to 0."""
    if b == 0:
        return 0
    q = abs(a) // abs(b)
    return q if (a >= 0) == (b >= 0) else -q


def eval_term(t: Term, env: Mapping[str, int]) -> int:
    if isinstance(t, IntLit):
        return t.value
    if isinstance(t, VarRef):
        return env[t.name]
    a = eval_term(t.left, env)
    b = eval_term(t.right, env)
    if t.op == "+":
        return a + b
    if t.op == "-":
        return a - b
    if t.op == "*":
        return a * b
    return trunc_div(a, b)


def evaluate(f: Formula, env: Mapping[str, int]) -> bool:
    """Tree-walking evaluation over exact Python integers.

    Raises ImpreciseConditionError on uninterpreted predicates: they have no
    semantics, which is exactly why conditions containing them are never
    marked precise.
    """
    if isinstance(f, BoolLit):
        return f.value
    if isinstance(f, Cmp):
        a = eval_term(f.left, env)
        b = eval_term(f.right, env)
        return {
            "<": a < b,
            "<=": a <= b,
            "==": a == b,
            "!=": a != b,
            ">=": a >= b,
            ">": a > b,
        }[f.op]
    if isinstance(f, UPred):
        raise ImpreciseConditionError(f"cannot evaluate uninterpreted predicate U_{f.name}")
    if isinstance(f, Not):
        return not evaluate(f.inner, env)
    if isinstance(f, And):
        return all(evaluate(p, env) for p in f.parts)
    return any(evaluate(p, env) for p in f.parts)


# --------------------------------------------------------------------------
# Rendering

def _render_term(t: Term, parent_prec: int = 0, right: bool = False) -> str:
    if isinstance(t, IntLit):
        return str(t.value)
    if isinstance(t, VarRef):
        return t.name
    prec = _TERM_PREC[t.op]
    s = f"{_render_term(t.left, prec, False)} {t.op} {_render_term(t.right, prec, True)}"
    if prec < parent_prec or (prec == parent_prec and right):
        return f"({s})"
    return s


def render_term(t: Term) -> str:
    return _render_term(t)


def render(f: Formula) -> str:
    """Canonical text form; ``parse(render(f))`` reproduces ``f`` structurally."""
    if isinstance(f, BoolLit):
        return "true" if f.value else "false"
    if isinstance(f, Cmp):
        return f"{_render_term(f.left)} {f.op} {_render_term(f.right)}"
    if isinstance(f, UPred):
        args = ", ".join(_render_term(a) for a in f.args)
        return f"U_{f.name}({args})"
    if isinstance(f, Not):
        return f"not ({render(f.inner)})"
    if isinstance(f, And):
        return " and ".join(
            f"({render(p)})" if isinstance(p, Or) else render(p) for p in f.parts
        )
    return " or ".join(render(p) for p in f.parts)


# --------------------------------------------------------------------------
# Parsing

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<int>\d+)|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op><=|>=|==|!=|[<>+\-*/(),]))"
)
_KEYWORDS = {"and", "or", "not", "true", "false"}


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m or m.end() == pos:
            rest = text[pos:].lstrip()
            if not rest:
                break
            raise FormulaParseError(f"unexpected character {rest[0]!r}", pos)
        if m.group("int") is not None:
            tokens.append(("INT", m.group("int"), m.start("int")))
        elif m.group("ident") is not None:
            tokens.append(("IDENT", m.group("ident"), m.start("ident")))
        else:
            tokens.append(("OP", m.group("op"), m.start("op")))
        pos = m.end()
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self) -> tuple[str, str, int] | None:
        return self.toks[self.i] if self.i < len(self.toks) else None

    def next(self) -> tuple[str, str, int]:
        tok = self.peek()
        if tok is None:
            raise FormulaParseError("unexpected end of formula", len(self.text))
        self.i += 1
        return tok

    def expect_op(self, op: str) -> None:
        tok = self.peek()
        if tok is None or tok[0] != "OP" or tok[1] != op:
            where = tok[2] if tok else len(self.text)
            raise FormulaParseError(f"expected {op!r}", where)
        self.i += 1

    def _at_keyword(self, word: str) -> bool:
        tok = self.peek()
        return tok is not None and tok[0] == "IDENT" and tok[1] == word

    # formula := and_expr ("or" and_expr)*
    def formula(self) -> Formula:
        parts = [self.and_expr()]
        while self._at_keyword("or"):
            self.i += 1
            parts.append(self.and_expr())
        if len(parts) == 1:
            return parts[0]
        flat: list[Formula] = []
        for p in parts:
            flat.extend(p.parts if isinstance(p, Or) else (p,))
        return Or(tuple(flat))

    def and_expr(self) -> Formula:
        parts = [self.not_expr()]
        while self._at_keyword("and"):
            self.i += 1
            parts.append(self.not_expr())
        if len(parts) == 1:
            return parts[0]
        flat: list[Formula] = []
        for p in parts:
            flat.extend(p.parts if isinstance(p, And) else (p,))
        return And(tuple(flat))

    def not_expr(self) -> Formula:
        if self._at_keyword("not"):
            self.i += 1
            return Not(self.not_expr())
        return self.atom()

    def atom(self) -> Formula:
        tok = self.peek()
        if tok is None:
            raise FormulaParseError("expected formula", len(self.text))
        if tok[0] == "IDENT" and tok[1] in ("true", "false"):
            self.i += 1
            return BoolLit(tok[1] == "true")
        if tok[0] == "IDENT" and tok[1].startswith("U_"):
            return self._upred()
        # Try "term cmp term" first (covers parenthesized arithmetic like
        # "(x + 1) < 2"); fall back to a parenthesized sub-formula.
        save = self.i
        try:
            left = self.term()
            op_tok = self.peek()
            if op_tok is None or op_tok[0] != "OP" or op_tok[1] not in CMP_OPS:
                raise FormulaParseError("expected comparison operator",
                                        op_tok[2] if op_tok else len(self.text))
            self.i += 1
            right = self.term()
            return Cmp(op_tok[1], left, right)
        except FormulaParseError:
            self.i = save
        if tok[0] == "OP" and tok[1] == "(":
            self.i += 1
            inner = self.formula()
            self.expect_op(")")
            return inner
        raise FormulaParseError("expected formula atom", tok[2])

    def _upred(self) -> UPred:
        tok = self.next()
        name = tok[1][2:]
        if not name:
            raise FormulaParseError("empty uninterpreted predicate name", tok[2])
        self.expect_op("(")
        args: list[Term] = []
        nxt = self.peek()
        if not (nxt and nxt[0] == "OP" and nxt[1] == ")"):
            args.append(self.term())
            while self.peek() and self.peek()[0] == "OP" and self.peek()[1] == ",":
                self.i += 1
                args.append(self.term())
        self.expect_op(")")
        return UPred(name, tuple(args))

    def term(self) -> Term:
        left = self.factor()
        while True:
            tok = self.peek()
            if tok and tok[0] == "OP" and tok[1] in ("+", "-"):
                self.i += 1
                left = BinTerm(tok[1], left, self.factor())
            else:
                return left

    def factor(self) -> Term:
        left = self.unary()
        while True:
            tok = self.peek()
            if tok and tok[0] == "OP" and tok[1] in ("*", "/"):
                self.i += 1
                left = BinTerm(tok[1], left, self.unary())
            else:
                return left

    def unary(self) -> Term:
        tok = self.peek()
        if tok and tok[0] == "OP" and tok[1] == "-":
            self.i += 1
            nxt = self.peek()
            if nxt and nxt[0] == "INT":
                self.i += 1
                return IntLit(-int(nxt[1]))
            return BinTerm("-", IntLit(0), self.unary())
        return self.primary()

    def primary(self) -> Term:
        tok = self.next()
        if tok[0] == "INT":
            return IntLit(int(tok[1]))
        if tok[0] == "IDENT":
            if tok[1] in _KEYWORDS:
                raise FormulaParseError(f"{tok[1]!r} is not a term", tok[2])
            return VarRef(tok[1])
        if tok[0] == "OP" and tok[1] == "(":
            inner = self.term()
            self.expect_op(")")
            return inner
        raise FormulaParseError("expected term", tok[2])


def parse(text: str) -> Formula:
    p = _Parser(text)
    f = p.formula()
    tok = p.peek()
    if tok is not None:
        raise FormulaParseError(f"trailing input {tok[1]!r}", tok[2])
    return f


def parse_term(text: str) -> Term:
    p = _Parser(text)
    t = p.term()
    tok = p.peek()
    if tok is not None:
        raise FormulaParseError(f"trailing input {tok[1]!r}", tok[2])
    return t
