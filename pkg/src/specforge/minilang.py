"""MiniLang: a deliberately tiny imperative language (integers only, no heap,
no globals) over which the deterministic Hoare oracle is sound and complete
on bounded domains.

Grammar (whitespace-insensitive, ``//`` line comments)::

    module := fndef+
    fndef  := "fn" ident "(" params? ")" block
    block  := "{" stmt* "}"
    stmt   := ident "=" expr ";"
            | ident "=" ident "(" args? ")" ";"
            | "if" "(" cond ")" block ("else" block)?
            | "while" "(" cond ")" block
            | "return" expr ";"

Expressions are integer literals, variables and ``+ - *`` plus truncating
``/`` (division by zero is a designated runtime error, never undefined
behavior). Conditions are comparisons combined with ``&& || !`` and the
literals ``true``/``false``.

``result`` is reserved: specifications use it to name a function's return
value, so programs may not bind it.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import MiniLangSyntaxError, UseBeforeAssignError

RESULT_NAME = "result"
_KEYWORDS = {"fn", "if", "else", "while", "return", "true", "false"}


# --------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class ELit:
    value: int


@dataclass(frozen=True)
class EVar:
    name: str


@dataclass(frozen=True)
class EBin:
    op: str  # + - * /
    left: "Expr"
    right: "Expr"


Expr = ELit | EVar | EBin


@dataclass(frozen=True)
class CBool:
    value: bool


@dataclass(frozen=True)
class CCmp:
    op: str  # < <= == != >= >
    left: Expr
    right: Expr


@dataclass(frozen=True)
class CNot:
    inner: "Cond"


@dataclass(frozen=True)
class CAnd:
    parts: tuple["Cond", ...]


@dataclass(frozen=True)
class COr:
    parts: tuple["Cond", ...]


Cond = CBool | CCmp | CNot | CAnd | COr


@dataclass(frozen=True)
class SAssign:
    target: str
    expr: Expr
    line: int


@dataclass(frozen=True)
class SCall:
    target: str
    callee: str
    args: tuple[Expr, ...]
    line: int


@dataclass(frozen=True)
class SIf:
    cond: Cond
    then_body: tuple["Stmt", ...]
    else_body: tuple["Stmt", ...]
    line: int


@dataclass(frozen=True)
class SWhile:
    cond: Cond
    body: tuple["Stmt", ...]
    line: int


@dataclass(frozen=True)
class SReturn:
    expr: Expr
    line: int


Stmt = SAssign | SCall | SIf | SWhile | SReturn


@dataclass(frozen=True)
class FunctionDef:
    name: str
    params: tuple[str, ...]
    body: tuple[Stmt, ...]
    start_line: int
    end_line: int


# --------------------------------------------------------------------------
# Lexer

_TOK_RE = re.compile(
    r"(?P<ws>\s+)|(?P<comment>//[^\n]*)|(?P<int>\d+)"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op><=|>=|==|!=|&&|\|\||[<>=!+\-*/(){},;])"
)


@dataclass(frozen=True)
class _Tok:
    kind: str  # INT, IDENT, OP, EOF
    text: str
    line: int
    col: int


def _lex(source: str) -> list[_Tok]:
    toks: list[_Tok] = []
    line, col, pos = 1, 1, 0
    while pos < len(source):
        m = _TOK_RE.match(source, pos)
        if not m or m.end() == pos:
            raise MiniLangSyntaxError(f"unexpected character {source[pos]!r}", line, col)
        text = m.group(0)
        if m.lastgroup == "int":
            toks.append(_Tok("INT", text, line, col))
        elif m.lastgroup == "ident":
            toks.append(_Tok("IDENT", text, line, col))
        elif m.lastgroup == "op":
            toks.append(_Tok("OP", text, line, col))
        nl = text.count("\n")
        if nl:
            line += nl
            col = len(text) - text.rfind("\n")
        else:
            col += len(text)
        pos = m.end()
    toks.append(_Tok("EOF", "", line, col))
    return toks


# --------------------------------------------------------------------------
# Parser


class _Parser:
    def __init__(self, source: str):
        self.toks = _lex(source)
        self.i = 0

    def peek(self, ahead: int = 0) -> _Tok:
        return self.toks[min(self.i + ahead, len(self.toks) - 1)]

    def next(self) -> _Tok:
        tok = self.toks[self.i]
        if tok.kind != "EOF":
            self.i += 1
        return tok

    def error(self, expected: str, tok: _Tok | None = None):
        tok = tok or self.peek()
        got = tok.text or "end of input"
        raise MiniLangSyntaxError(f"expected {expected}, got {got!r}", tok.line, tok.col)

    def expect(self, kind: str, text: str | None = None) -> _Tok:
        tok = self.peek()
        if tok.kind != kind or (text is not None and tok.text != text):
            self.error(repr(text) if text is not None else kind.lower())
        return self.next()

    def module(self) -> list[FunctionDef]:
        fns = [self.fndef()]
        while self.peek().kind != "EOF":
            fns.append(self.fndef())
        return fns

    def fndef(self) -> FunctionDef:
        start = self.expect("IDENT", "fn")
        name_tok = self.peek()
        if name_tok.kind != "IDENT" or name_tok.text in _KEYWORDS:
            self.error("function name")
        name = self.next().text
        self.expect("OP", "(")
        params: list[str] = []
        if not self._at_op(")"):
            params.append(self._param())
            while self._at_op(","):
                self.next()
                params.append(self._param())
        self.expect("OP", ")")
        body = self.block()
        end_line = self.toks[self.i - 1].line
        return FunctionDef(name, tuple(params), tuple(body), start.line, end_line)

    def _param(self) -> str:
        tok = self.peek()
        if tok.kind != "IDENT" or tok.text in _KEYWORDS:
            self.error("parameter name")
        if tok.text == RESULT_NAME:
            raise MiniLangSyntaxError("'result' is reserved", tok.line, tok.col)
        return self.next().text

    def block(self) -> list[Stmt]:
        self.expect("OP", "{")
        stmts: list[Stmt] = []
        while not self._at_op("}"):
            stmts.append(self.stmt())
        self.expect("OP", "}")
        return stmts

    def stmt(self) -> Stmt:
        tok = self.peek()
        if tok.kind == "IDENT" and tok.text == "if":
            return self._if()
        if tok.kind == "IDENT" and tok.text == "while":
            return self._while()
        if tok.kind == "IDENT" and tok.text == "return":
            self.next()
            expr = self.expr()
            self.expect("OP", ";")
            return SReturn(expr, tok.line)
        if tok.kind == "IDENT" and tok.text not in _KEYWORDS:
            if tok.text == RESULT_NAME:
                raise MiniLangSyntaxError("'result' is reserved", tok.line, tok.col)
            target = self.next().text
            self.expect("OP", "=")
            # "x = f(...)" is a call; anything else is a plain assignment.
            if (
                self.peek().kind == "IDENT"
                and self.peek().text not in _KEYWORDS
                and self.peek(1).kind == "OP"
                and self.peek(1).text == "("
            ):
                callee = self.next().text
                self.expect("OP", "(")
                args: list[Expr] = []
                if not self._at_op(")"):
                    args.append(self.expr())
                    while self._at_op(","):
                        self.next()
                        args.append(self.expr())
                self.expect("OP", ")")
                self.expect("OP", ";")
                return SCall(target, callee, tuple(args), tok.line)
            expr = self.expr()
            self.expect("OP", ";")
            return SAssign(target, expr, tok.line)
        self.error("statement")

    def _if(self) -> SIf:
        tok = self.next()
        self.expect("OP", "(")
        cond = self.cond()
        self.expect("OP", ")")
        then_body = self.block()
        else_body: list[Stmt] = []
        if self.peek().kind == "IDENT" and self.peek().text == "else":
            self.next()
            else_body = self.block()
        return SIf(cond, tuple(then_body), tuple(else_body), tok.line)

    def _while(self) -> SWhile:
        tok = self.next()
        self.expect("OP", "(")
        cond = self.cond()
        self.expect("OP", ")")
        body = self.block()
        return SWhile(cond, tuple(body), tok.line)

    # cond := cand ("||" cand)*
    def cond(self) -> Cond:
        parts = [self.cand()]
        while self._at_op("||"):
            self.next()
            parts.append(self.cand())
        if len(parts) == 1:
            return parts[0]
        flat: list[Cond] = []
        for p in parts:
            flat.extend(p.parts if isinstance(p, COr) else (p,))
        return COr(tuple(flat))

    def cand(self) -> Cond:
        parts = [self.cnot()]
        while self._at_op("&&"):
            self.next()
            parts.append(self.cnot())
        if len(parts) == 1:
            return parts[0]
        flat: list[Cond] = []
        for p in parts:
            flat.extend(p.parts if isinstance(p, CAnd) else (p,))
        return CAnd(tuple(flat))

    def cnot(self) -> Cond:
        if self._at_op("!"):
            self.next()
            return CNot(self.cnot())
        return self.catom()

    def catom(self) -> Cond:
        tok = self.peek()
        if tok.kind == "IDENT" and tok.text in ("true", "false"):
            self.next()
            return CBool(tok.text == "true")
        save = self.i
        try:
            left = self.expr()
            op_tok = self.peek()
            if op_tok.kind != "OP" or op_tok.text not in ("<", "<=", "==", "!=", ">=", ">"):
                self.error("comparison operator")
            self.next()
            right = self.expr()
            return CCmp(op_tok.text, left, right)
        except MiniLangSyntaxError:
            self.i = save
        if self._at_op("("):
            self.next()
            inner = self.cond()
            self.expect("OP", ")")
            return inner
        self.error("condition")

    def expr(self) -> Expr:
        left = self.factor()
        while self.peek().kind == "OP" and self.peek().text in ("+", "-"):
            op = self.next().text
            left = EBin(op, left, self.factor())
        return left

    def factor(self) -> Expr:
        left = self.unary()
        while self.peek().kind == "OP" and self.peek().text in ("*", "/"):
            op = self.next().text
            left = EBin(op, left, self.unary())
        return left

    def unary(self) -> Expr:
        if self._at_op("-"):
            self.next()
            if self.peek().kind == "INT":
                return ELit(-int(self.next().text))
            return EBin("-", ELit(0), self.unary())
        return self.primary()

    def primary(self) -> Expr:
        tok = self.next()
        if tok.kind == "INT":
            return ELit(int(tok.text))
        if tok.kind == "IDENT" and tok.text not in _KEYWORDS:
            return EVar(tok.text)
        if tok.kind == "OP" and tok.text == "(":
            inner = self.expr()
            self.expect("OP", ")")
            return inner
        self.error("expression", tok)

    def _at_op(self, text: str) -> bool:
        tok = self.peek()
        return tok.kind == "OP" and tok.text == text


def parse_module(source: str) -> list[FunctionDef]:
    """Parse a whole module and run the definite-assignment check."""
    fns = _Parser(source).module()
    for fn in fns:
        check_definite_assignment(fn)
    return fns


def parse_function(source: str) -> FunctionDef:
    fns = parse_module(source)
    if len(fns) != 1:
        raise MiniLangSyntaxError("expected exactly one function definition", 1, 1)
    return fns[0]


def parse_statements(source: str) -> tuple[Stmt, ...]:
    """Parse a bare statement sequence (used for spec-file bodies and tests)."""
    p = _Parser("fn __wrap__() {\n" + source + "\n}")
    fn = p.fndef()
    if p.peek().kind != "EOF":
        p.error("end of input")
    return fn.body


# --------------------------------------------------------------------------
# Static checks and structural helpers


def expr_vars(e: Expr, out: set[str] | None = None) -> set[str]:
    if out is None:
        out = set()
    if isinstance(e, EVar):
        out.add(e.name)
    elif isinstance(e, EBin):
        expr_vars(e.left, out)
        expr_vars(e.right, out)
    return out


def cond_vars(c: Cond, out: set[str] | None = None) -> set[str]:
    if out is None:
        out = set()
    if isinstance(c, CCmp):
        expr_vars(c.left, out)
        expr_vars(c.right, out)
    elif isinstance(c, CNot):
        cond_vars(c.inner, out)
    elif isinstance(c, (CAnd, COr)):
        for p in c.parts:
            cond_vars(p, out)
    return out


def check_definite_assignment(fn: FunctionDef) -> None:
    """Every variable read must be a parameter or previously assigned on all
    paths reaching the read."""

    def check_expr(e: Expr, assigned: set[str], line: int) -> None:
        for v in expr_vars(e):
            if v not in assigned:
                raise UseBeforeAssignError(v, fn.name, line)

    def check_cond(c: Cond, assigned: set[str], line: int) -> None:
        for v in cond_vars(c):
            if v not in assigned:
                raise UseBeforeAssignError(v, fn.name, line)

    def walk(stmts: tuple[Stmt, ...], assigned: set[str]) -> set[str]:
        for st in stmts:
            if isinstance(st, SAssign):
                check_expr(st.expr, assigned, st.line)
                assigned = assigned | {st.target}
            elif isinstance(st, SCall):
                for a in st.args:
                    check_expr(a, assigned, st.line)
                assigned = assigned | {st.target}
            elif isinstance(st, SIf):
                check_cond(st.cond, assigned, st.line)
                a_then = walk(st.then_body, set(assigned))
                a_else = walk(st.else_body, set(assigned))
                assigned = a_then & a_else
            elif isinstance(st, SWhile):
                check_cond(st.cond, assigned, st.line)
                walk(st.body, set(assigned))
                # body may run zero times: nothing new is definitely assigned
            elif isinstance(st, SReturn):
                check_expr(st.expr, assigned, st.line)
        return assigned

    walk(fn.body, set(fn.params))


def assigned_vars(stmts: tuple[Stmt, ...] | list[Stmt]) -> set[str]:
    out: set[str] = set()
    for st in stmts:
        if isinstance(st, (SAssign, SCall)):
            out.add(st.target)
        elif isinstance(st, SIf):
            out |= assigned_vars(st.then_body)
            out |= assigned_vars(st.else_body)
        elif isinstance(st, SWhile):
            out |= assigned_vars(st.body)
    return out


def read_vars(stmts) -> set[str]:
    out: set[str] = set()
    for st in stmts:
        if isinstance(st, SAssign):
            expr_vars(st.expr, out)
        elif isinstance(st, SCall):
            for a in st.args:
                expr_vars(a, out)
        elif isinstance(st, SIf):
            cond_vars(st.cond, out)
            out |= read_vars(st.then_body)
            out |= read_vars(st.else_body)
        elif isinstance(st, SWhile):
            cond_vars(st.cond, out)
            out |= read_vars(st.body)
        elif isinstance(st, SReturn):
            expr_vars(st.expr, out)
    return out


def walk_statements(stmts):
    """Pre-order iteration over all statements, nested ones included."""
    for st in stmts:
        yield st
        if isinstance(st, SIf):
            yield from walk_statements(st.then_body)
            yield from walk_statements(st.else_body)
        elif isinstance(st, SWhile):
            yield from walk_statements(st.body)


def call_sites(fn: FunctionDef) -> list[tuple[int, SCall]]:
    """(pre-order statement index, call statement) pairs for every call in fn."""
    return [
        (i, st)
        for i, st in enumerate(walk_statements(fn.body))
        if isinstance(st, SCall)
    ]


def callee_names(fn: FunctionDef) -> set[str]:
    return {st.callee for _, st in call_sites(fn)}


# --------------------------------------------------------------------------
# Renderer

_EXPR_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def render_expr(e: Expr, parent_prec: int = 0, right: bool = False) -> str:
    if isinstance(e, ELit):
        return str(e.value)
    if isinstance(e, EVar):
        return e.name
    prec = _EXPR_PREC[e.op]
    s = f"{render_expr(e.left, prec, False)} {e.op} {render_expr(e.right, prec, True)}"
    if prec < parent_prec or (prec == parent_prec and right):
        return f"({s})"
    return s


def render_cond(c: Cond) -> str:
    if isinstance(c, CBool):
        return "true" if c.value else "false"
    if isinstance(c, CCmp):
        return f"{render_expr(c.left)} {c.op} {render_expr(c.right)}"
    if isinstance(c, CNot):
        return f"!({render_cond(c.inner)})"
    if isinstance(c, CAnd):
        return " && ".join(
            f"({render_cond(p)})" if isinstance(p, COr) else render_cond(p)
            for p in c.parts
        )
    return " || ".join(render_cond(p) for p in c.parts)


def render_statements(stmts, indent: int = 1) -> str:
    pad = "    " * indent
    lines: list[str] = []
    for st in stmts:
        if isinstance(st, SAssign):
            lines.append(f"{pad}{st.target} = {render_expr(st.expr)};")
        elif isinstance(st, SCall):
            args = ", ".join(render_expr(a) for a in st.args)
            lines.append(f"{pad}{st.target} = {st.callee}({args});")
        elif isinstance(st, SReturn):
            lines.append(f"{pad}return {render_expr(st.expr)};")
        elif isinstance(st, SIf):
            lines.append(f"{pad}if ({render_cond(st.cond)}) {{")
            lines.append(render_statements(st.then_body, indent + 1))
            if st.else_body:
                lines.append(f"{pad}}} else {{")
                lines.append(render_statements(st.else_body, indent + 1))
            lines.append(f"{pad}}}")
        elif isinstance(st, SWhile):
            lines.append(f"{pad}while ({render_cond(st.cond)}) {{")
            lines.append(render_statements(st.body, indent + 1))
            lines.append(f"{pad}}}")
    return "\n".join(l for l in lines if l != "")


def render_function(fn: FunctionDef) -> str:
    params = ", ".join(fn.params)
    body = render_statements(fn.body)
    if body:
        return f"fn {fn.name}({params}) {{\n{body}\n}}"
    return f"fn {fn.name}({params}) {{\n}}"


def render_module(fns) -> str:
    return "\n\n".join(render_function(fn) for fn in fns) + "\n"
