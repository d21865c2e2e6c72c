"""Deterministic Hoare-logic engine for MiniLang.

Sound and complete over bounded integer domains: entailment and invariant
obligations are decided by exhaustive enumeration instead of an SMT solver,
which keeps verdicts reproducible and dependency-free. The interfaces are
shaped so a solver could be slotted in later without touching callers.

Two independent evaluation engines live here on purpose: the scalar
tree-walker in :mod:`specforge.formula` and the vectorized grid evaluator
below. Tests cross-check them against each other.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from . import formula as F
from . import minilang as M
from .codebase import Codebase
from .errors import (
    ArityMismatchError,
    EnumerationBudgetError,
    ImpreciseConditionError,
    UnsupportedStatementError,
)

_INT64_SAFE = 2**62


@dataclass(frozen=True)
class BoundedDomain:
    """Variables range over integers in [-bound, bound]."""

    bound: int = 8
    enumeration_budget: int = 2_000_000

    def __post_init__(self):
        if self.bound < 1:
            raise ValueError("bound must be >= 1")

    @property
    def width(self) -> int:
        return 2 * self.bound + 1

    def values(self) -> range:
        return range(-self.bound, self.bound + 1)


# --------------------------------------------------------------------------
# Execution outcomes


@dataclass(frozen=True)
class Returned:
    value: int


@dataclass(frozen=True)
class RuntimeFault:
    kind: str = "div_by_zero"


@dataclass(frozen=True)
class NonTerminated:
    pass


ExecOutcome = Returned | RuntimeFault | NonTerminated


class _Fault(Exception):
    def __init__(self, kind: str):
        self.kind = kind


class _OutOfFuel(Exception):
    pass


class _Returning(Exception):
    def __init__(self, value: int):
        self.value = value


DEFAULT_STEP_BUDGET = 100_000


def _eval_expr(e: M.Expr, env: dict[str, int], cb: Codebase | None, fuel: list[int]) -> int:
    if isinstance(e, M.ELit):
        return e.value
    if isinstance(e, M.EVar):
        return env[e.name]
    a = _eval_expr(e.left, env, cb, fuel)
    b = _eval_expr(e.right, env, cb, fuel)
    if e.op == "+":
        return a + b
    if e.op == "-":
        return a - b
    if e.op == "*":
        return a * b
    if b == 0:
        raise _Fault("div_by_zero")
    return F.trunc_div(a, b)


def _eval_cond(c: M.Cond, env, cb, fuel) -> bool:
    if isinstance(c, M.CBool):
        return c.value
    if isinstance(c, M.CCmp):
        a = _eval_expr(c.left, env, cb, fuel)
        b = _eval_expr(c.right, env, cb, fuel)
        return {
            "<": a < b, "<=": a <= b, "==": a == b,
            "!=": a != b, ">=": a >= b, ">": a > b,
        }[c.op]
    if isinstance(c, M.CNot):
        return not _eval_cond(c.inner, env, cb, fuel)
    if isinstance(c, M.CAnd):
        return all(_eval_cond(p, env, cb, fuel) for p in c.parts)
    return any(_eval_cond(p, env, cb, fuel) for p in c.parts)


def _exec_stmts(stmts, env: dict[str, int], cb: Codebase | None, fuel: list[int]) -> None:
    for st in stmts:
        if fuel[0] <= 0:
            raise _OutOfFuel
        fuel[0] -= 1
        if isinstance(st, M.SAssign):
            env[st.target] = _eval_expr(st.expr, env, cb, fuel)
        elif isinstance(st, M.SCall):
            if cb is None:
                raise UnsupportedStatementError(
                    f"call to '{st.callee}' is not supported in this context"
                )
            args = [_eval_expr(a, env, cb, fuel) for a in st.args]
            env[st.target] = _call(cb, st.callee, args, fuel)
        elif isinstance(st, M.SIf):
            branch = st.then_body if _eval_cond(st.cond, env, cb, fuel) else st.else_body
            _exec_stmts(branch, env, cb, fuel)
        elif isinstance(st, M.SWhile):
            while _eval_cond(st.cond, env, cb, fuel):
                if fuel[0] <= 0:
                    raise _OutOfFuel
                fuel[0] -= 1
                _exec_stmts(st.body, env, cb, fuel)
        elif isinstance(st, M.SReturn):
            raise _Returning(_eval_expr(st.expr, env, cb, fuel))


def _call(cb: Codebase, name: str, args: list[int], fuel: list[int]) -> int:
    fn = cb.function(name)
    if isinstance(fn.body, str):
        raise UnsupportedStatementError(f"function '{name}' has no executable body")
    if len(args) != len(fn.params):
        raise ArityMismatchError(
            f"'{name}' takes {len(fn.params)} arguments, got {len(args)}"
        )
    env = dict(zip(fn.param_names, args))
    try:
        _exec_stmts(fn.body, env, cb, fuel)
    except _Returning as r:
        return r.value
    return 0  # fall-through: the designated return value is 0


def eval_function(
    cb: Codebase, name: str, args: list[int], step_budget: int = DEFAULT_STEP_BUDGET
) -> ExecOutcome:
    """Deterministic big-step evaluation of ``name(args)``."""
    fuel = [step_budget]
    try:
        return Returned(_call(cb, name, list(args), fuel))
    except _Fault as f:
        return RuntimeFault(f.kind)
    except (_OutOfFuel, RecursionError):
        # deep recursion is bounded by the same budget notion as loops
        return NonTerminated()


def run_statements(
    stmts, env: dict[str, int], cb: Codebase | None = None,
    step_budget: int = DEFAULT_STEP_BUDGET,
):
    """Execute a statement sequence over ``env`` in place.

    Returns ('ok', env), ('return', value), ('error', kind) or ('timeout',).
    """
    fuel = [step_budget]
    try:
        _exec_stmts(stmts, env, cb, fuel)
        return ("ok", env)
    except _Returning as r:
        return ("return", r.value)
    except _Fault as f:
        return ("error", f.kind)
    except (_OutOfFuel, RecursionError):
        return ("timeout",)


# --------------------------------------------------------------------------
# MiniLang conditions/expressions as formulas


def expr_to_term(e: M.Expr) -> F.Term:
    if isinstance(e, M.ELit):
        return F.IntLit(e.value)
    if isinstance(e, M.EVar):
        return F.VarRef(e.name)
    return F.BinTerm(e.op, expr_to_term(e.left), expr_to_term(e.right))


def cond_to_formula(c: M.Cond) -> F.Formula:
    if isinstance(c, M.CBool):
        return F.TRUE if c.value else F.FALSE
    if isinstance(c, M.CCmp):
        return F.Cmp(c.op, expr_to_term(c.left), expr_to_term(c.right))
    if isinstance(c, M.CNot):
        return F.Not(cond_to_formula(c.inner))
    if isinstance(c, M.CAnd):
        return F.And(tuple(cond_to_formula(p) for p in c.parts))
    return F.Or(tuple(cond_to_formula(p) for p in c.parts))


def _division_guards(t: F.Term, out: list[F.Formula]) -> None:
    if isinstance(t, F.BinTerm):
        _division_guards(t.left, out)
        _division_guards(t.right, out)
        if t.op == "/":
            out.append(F.Cmp("!=", t.right, F.IntLit(0)))


# --------------------------------------------------------------------------
# Strongest postconditions (straight-line code)


def _formula_of(cond) -> F.Formula:
    """Accept a Condition-like object or a bare Formula."""
    f = getattr(cond, "formula", cond)
    if f is None or not isinstance(f, (F.BoolLit, F.Cmp, F.UPred, F.Not, F.And, F.Or)):
        raise ImpreciseConditionError("a precise formula is required here")
    if F.has_upred(f):
        raise ImpreciseConditionError("formula contains uninterpreted predicates")
    return f


def _fresh_name(base: str, taken: set[str]) -> str:
    k = 0
    while f"{base}__{k}" in taken:
        k += 1
    name = f"{base}__{k}"
    taken.add(name)
    return name


@dataclass
class SymbolicState:
    """Values of program variables as terms over block-entry names, plus the
    division guards collected along the way."""

    values: dict[str, F.Term] = field(default_factory=dict)
    guards: list[F.Formula] = field(default_factory=list)

    def term_of(self, name: str) -> F.Term:
        return self.values.get(name, F.VarRef(name))

    def eval(self, e: M.Expr) -> F.Term:
        t = F.substitute_term(expr_to_term(e), self.values)
        _division_guards(t, self.guards)
        return t


def strongest_post(pre, stmt, expectations: dict[int, object] | None = None) -> "Condition":
    """Strongest postcondition of a straight-line statement (or sequence).

    ``pre`` must be precise. Runs of assignments are executed symbolically,
    so entry values needing a fresh name (the ``<var>__<k>`` pattern) are
    introduced at most once per variable per run, and eliminated again when
    the old value is recoverable from the new one (aliases, constant
    offsets).

    Calls are supported only when ``expectations`` maps the call's position
    in the sequence to an object with a precise ``post`` over the callee
    frame (``result`` plus the named callee parameters): the target is
    havocked, then the instantiated callee post is conjoined. The callee
    *pre* is an obligation for the reasoner, not knowledge, and is ignored
    here. Branches and loops are rejected.
    """
    from .specmodel import Condition  # local import to avoid a cycle

    phi = _formula_of(pre)
    stmts = list(stmt) if isinstance(stmt, (list, tuple)) else [stmt]
    taken = set(F.free_vars(phi)) | {
        v for st in stmts if isinstance(st, (M.SAssign, M.SCall)) for v in [st.target]
    }

    run: list[M.SAssign] = []
    for idx, st in enumerate(stmts):
        if isinstance(st, M.SAssign):
            run.append(st)
        elif isinstance(st, M.SCall):
            phi = _sp_assign_run(phi, run, taken)
            run = []
            exp = (expectations or {}).get(idx)
            phi = _sp_call(phi, st, exp, taken)
        else:
            raise UnsupportedStatementError(
                f"strongest_post only handles straight-line code, got "
                f"{type(st).__name__}"
            )
    phi = _sp_assign_run(phi, run, taken)
    phi = F.simplify(phi)
    return Condition.of(F.render(phi), phi)


def _sp_assign_run(phi: F.Formula, run: list[M.SAssign], taken: set[str]) -> F.Formula:
    if not run:
        return phi
    state = SymbolicState()
    for st in run:
        state.values[st.target] = state.eval(st.expr)

    assigned = {v: t for v, t in state.values.items() if t != F.VarRef(v)}
    referenced: set[str] = set(F.free_vars(phi))
    for t in assigned.values():
        referenced |= set(F.free_vars(t))
    for g in state.guards:
        referenced |= set(F.free_vars(g))

    # Entry values of overwritten variables that are still referenced either
    # get an inverse substitution (quantifier elimination) or a fresh alias.
    entry_sub: dict[str, F.Term] = {}
    inverted: set[str] = set()
    aux_names: list[str] = []
    for v in sorted(assigned):
        if v not in referenced:
            continue
        inverse = _invert_offset(v, assigned[v])
        if inverse is not None:
            entry_sub[v] = inverse
            inverted.add(v)
        else:
            fresh = _fresh_name(v, taken)
            entry_sub[v] = F.VarRef(fresh)
            aux_names.append(fresh)

    parts: list[F.Formula] = list(F.conjuncts(F.simplify(F.substitute(phi, entry_sub))))
    for g in state.guards:
        parts.append(F.substitute(g, entry_sub))
    for v in sorted(assigned):
        if v in inverted:
            continue  # the defining equation reduced to a tautology
        parts.append(F.Cmp("==", F.VarRef(v), F.substitute_term(assigned[v], entry_sub)))
    return _eliminate_aux(parts, aux_names)


def _sp_call(phi: F.Formula, st: M.SCall, exp, taken: set[str]) -> F.Formula:
    arg_terms = [expr_to_term(a) for a in st.args]
    guards: list[F.Formula] = []
    for t in arg_terms:
        _division_guards(t, guards)
    parts = list(F.conjuncts(phi)) + guards

    target = st.target
    needs_alias = any(
        target in F.free_vars(p) for p in parts
    ) or any(target in F.free_vars(t) for t in arg_terms)
    aux_names: list[str] = []
    if needs_alias:
        fresh = _fresh_name(target, taken)
        aux_names.append(fresh)
        sub = {target: F.VarRef(fresh)}
        parts = [F.substitute(p, sub) for p in parts]
        arg_terms = [F.substitute_term(t, sub) for t in arg_terms]

    post = getattr(exp, "post", None) if exp is not None else None
    post_formula = getattr(post, "formula", None)
    if post_formula is not None and not F.has_upred(post_formula):
        binding: dict[str, F.Term] = {"result": F.VarRef(target)}
        params = tuple(getattr(exp, "callee_params", ()) or ())
        for p, t in zip(params, arg_terms):
            binding[p] = t
        parts.append(F.substitute(post_formula, binding))
    # with no precise callee post, the target is simply havocked

    return _eliminate_aux(parts, aux_names)


def _invert_offset(v: str, final: F.Term) -> F.Term | None:
    """Solve ``v_new = f(v_old)`` for v_old when f is a constant offset;
    returns the replacement term for the entry value or None."""
    if isinstance(final, F.BinTerm) and final.op in ("+", "-"):
        a, b = final.left, final.right
        if a == F.VarRef(v) and isinstance(b, F.IntLit):
            inv_op = "-" if final.op == "+" else "+"
            return F.BinTerm(inv_op, F.VarRef(v), b)
        if final.op == "+" and b == F.VarRef(v) and isinstance(a, F.IntLit):
            return F.BinTerm("-", F.VarRef(v), a)
    return None


def _eliminate_aux(parts: list[F.Formula], aux_names: list[str]) -> F.Formula:
    """One-point elimination of fresh alias variables.

    A conjunct ``a == t`` (or ``x == a +/- c`` and friends) with ``a`` not
    free in the replacement lets us substitute ``a`` away exactly:
    exists a. (a == t) and psi(a)  ==  psi(t).
    """
    pending = list(aux_names)
    changed = True
    while changed and pending:
        changed = False
        for a in list(pending):
            repl, drop_idx = _find_one_point(parts, a)
            if repl is None:
                continue
            sub = {a: repl}
            parts = [
                F.substitute(p, sub) for i, p in enumerate(parts) if i != drop_idx
            ]
            pending.remove(a)
            changed = True
    return F.conj(parts)


def _find_one_point(parts: list[F.Formula], a: str):
    for i, p in enumerate(parts):
        if not isinstance(p, F.Cmp) or p.op != "==":
            continue
        for lhs, rhs in ((p.left, p.right), (p.right, p.left)):
            if lhs == F.VarRef(a) and a not in F.free_vars(rhs):
                return rhs, i
            # x == a + c  =>  a == x - c
            if (
                isinstance(rhs, F.BinTerm)
                and rhs.op in ("+", "-")
                and rhs.left == F.VarRef(a)
                and isinstance(rhs.right, F.IntLit)
                and isinstance(lhs, (F.VarRef, F.IntLit))
                and a not in F.free_vars(lhs)
            ):
                inv = "-" if rhs.op == "+" else "+"
                return F.BinTerm(inv, lhs, rhs.right), i
            if (
                isinstance(rhs, F.BinTerm)
                and rhs.op == "+"
                and rhs.right == F.VarRef(a)
                and isinstance(rhs.left, F.IntLit)
                and isinstance(lhs, (F.VarRef, F.IntLit))
                and a not in F.free_vars(lhs)
            ):
                return F.BinTerm("-", lhs, rhs.left), i
    return None, None


# --------------------------------------------------------------------------
# Grid (vectorized) evaluation


def _term_bound(t: F.Term, B: int) -> int:
    if isinstance(t, F.IntLit):
        return abs(t.value)
    if isinstance(t, F.VarRef):
        return B
    a = _term_bound(t.left, B)
    b = _term_bound(t.right, B)
    if t.op in ("+", "-"):
        return a + b
    if t.op == "*":
        return a * b
    return a  # |a / b| <= |a| under truncation


def _formula_bound(f: F.Formula, B: int) -> int:
    if isinstance(f, F.Cmp):
        return max(_term_bound(f.left, B), _term_bound(f.right, B))
    if isinstance(f, F.Not):
        return _formula_bound(f.inner, B)
    if isinstance(f, (F.And, F.Or)):
        return max((_formula_bound(p, B) for p in f.parts), default=0)
    return 0


def _grid_term(t: F.Term, env: dict):
    if isinstance(t, F.IntLit):
        return t.value
    if isinstance(t, F.VarRef):
        return env[t.name]
    a = _grid_term(t.left, env)
    b = _grid_term(t.right, env)
    if t.op == "+":
        return a + b
    if t.op == "-":
        return a - b
    if t.op == "*":
        return a * b
    # truncating total division, elementwise
    a_arr = np.asarray(a, dtype=np.int64)
    b_arr = np.asarray(b, dtype=np.int64)
    zero = b_arr == 0
    safe = np.where(zero, 1, b_arr)
    q = np.abs(a_arr) // np.abs(safe)
    q = np.where((a_arr >= 0) == (safe >= 0), q, -q)
    return np.where(zero, 0, q)


def _grid_eval(f: F.Formula, env: dict):
    if isinstance(f, F.BoolLit):
        return np.bool_(f.value)
    if isinstance(f, F.Cmp):
        a = _grid_term(f.left, env)
        b = _grid_term(f.right, env)
        if f.op == "<":
            return a < b
        if f.op == "<=":
            return a <= b
        if f.op == "==":
            return a == b
        if f.op == "!=":
            return a != b
        if f.op == ">=":
            return a >= b
        return a > b
    if isinstance(f, F.UPred):
        raise ImpreciseConditionError(f"cannot enumerate U_{f.name}")
    if isinstance(f, F.Not):
        return ~np.asarray(_grid_eval(f.inner, env))
    if isinstance(f, F.And):
        out = np.bool_(True)
        for p in f.parts:
            out = out & _grid_eval(p, env)
        return out
    out = np.bool_(False)
    for p in f.parts:
        out = out | _grid_eval(p, env)
    return out


def _check_budget(n_vars: int, dom: BoundedDomain, budget: int | None = None) -> int:
    needed = dom.width ** n_vars
    limit = budget if budget is not None else dom.enumeration_budget
    if needed > limit:
        raise EnumerationBudgetError(needed, limit)
    return needed


# --------------------------------------------------------------------------
# Entailment


@dataclass(frozen=True)
class EntailmentResult:
    holds: bool
    counterexample: dict[str, int] | None = None

    @property
    def verdict(self) -> str:
        return "holds" if self.holds else "fails"


def check_entailment_bounded(antecedent, consequent, dom: BoundedDomain) -> EntailmentResult:
    """holds iff every assignment in the domain satisfying the antecedent
    satisfies the consequent; fails carries the lexicographically smallest
    witness. Raises EnumerationBudgetError rather than guessing."""
    a = _formula_of(antecedent)
    c = _formula_of(consequent)
    names = sorted(F.free_vars(a) | F.free_vars(c))
    _check_budget(len(names), dom)

    if not names:
        ok = (not F.evaluate(a, {})) or F.evaluate(c, {})
        return EntailmentResult(ok, None if ok else {})

    big = max(_formula_bound(a, dom.bound), _formula_bound(c, dom.bound))
    if big >= _INT64_SAFE:
        return _check_entailment_scalar(a, c, names, dom)

    axes = np.arange(-dom.bound, dom.bound + 1, dtype=np.int64)
    grids = np.meshgrid(*([axes] * len(names)), indexing="ij")
    env = dict(zip(names, grids))
    viol = np.asarray(_grid_eval(a, env)) & ~np.asarray(_grid_eval(c, env))
    viol = np.broadcast_to(viol, grids[0].shape)
    if not viol.any():
        return EntailmentResult(True)
    flat = int(np.argmax(viol))
    idx = np.unravel_index(flat, grids[0].shape)
    witness = {n: int(axes[i]) for n, i in zip(names, idx)}
    return EntailmentResult(False, witness)


def _check_entailment_scalar(a, c, names, dom: BoundedDomain) -> EntailmentResult:
    # exact-arithmetic fallback when intermediate terms might overflow int64
    for combo in itertools.product(dom.values(), repeat=len(names)):
        env = dict(zip(names, combo))
        if F.evaluate(a, env) and not F.evaluate(c, env):
            return EntailmentResult(False, env)
    return EntailmentResult(True)


def check_satisfiable_bounded(f, dom: BoundedDomain) -> bool:
    """True iff some assignment in the domain satisfies the formula."""
    r = check_entailment_bounded(f, F.FALSE, dom)
    return not r.holds


def satisfying_states(
    f, over_vars, dom: BoundedDomain, budget: int | None = None
) -> set[tuple[int, ...]]:
    """Assignments over ``over_vars`` (within the domain) under which the
    formula is satisfiable; remaining free variables are projected out by
    enumeration. The enumeration budget covers the full joint space."""
    ff = _formula_of(f)
    over = list(over_vars)
    aux = sorted(set(F.free_vars(ff)) - set(over))
    _check_budget(len(over) + len(aux), dom, budget)

    axes = np.arange(-dom.bound, dom.bound + 1, dtype=np.int64)
    if over:
        grids = np.meshgrid(*([axes] * len(over)), indexing="ij")
        shape = grids[0].shape
    else:
        grids, shape = [], ()

    scalar = _formula_bound(ff, dom.bound) >= _INT64_SAFE
    mask = np.zeros(shape, dtype=bool) if shape else np.bool_(False)
    for combo in itertools.product(dom.values(), repeat=len(aux)):
        env = dict(zip(over, grids))
        env.update(zip(aux, (int(v) for v in combo)))
        if scalar:
            got = _satisfying_scalar(ff, over, env, dom)
        else:
            got = np.broadcast_to(np.asarray(_grid_eval(ff, env)), shape) if shape \
                else np.asarray(_grid_eval(ff, env))
        mask = mask | got
        if not aux:
            break

    if not shape:
        return {()} if bool(mask) else set()
    coords = np.argwhere(mask)
    return {tuple(int(axes[i]) for i in row) for row in coords}


def _satisfying_scalar(ff, over, env, dom: BoundedDomain):
    out = np.zeros([dom.width] * len(over), dtype=bool)
    fixed = {k: v for k, v in env.items() if isinstance(v, int)}
    for combo in itertools.product(dom.values(), repeat=len(over)):
        e = dict(fixed)
        e.update(zip(over, combo))
        if F.evaluate(ff, e):
            out[tuple(v + dom.bound for v in combo)] = True
    return out


# --------------------------------------------------------------------------
# Loop invariant obligations


@dataclass(frozen=True)
class InvariantResult:
    holds: bool
    failed_obligation: int | None = None  # 1, 2 or 3
    witness: dict[str, int] | None = None
    detail: str = ""

    @property
    def verdict(self) -> str:
        return "holds" if self.holds else "fails"


def check_invariant_bounded(
    inv, loop: M.SWhile, pre, post, dom: BoundedDomain,
    step_budget: int = 10_000,
) -> InvariantResult:
    """Check the three loop obligations over the bounded domain:

    1. the loop precondition implies the invariant;
    2. the invariant is maintained by every iteration started from a domain
       state satisfying invariant and guard (an iteration that faults or
       exhausts its step budget counts as a violation);
    3. invariant plus negated guard implies the loop postcondition.
    """
    if not isinstance(loop, M.SWhile):
        raise UnsupportedStatementError("check_invariant_bounded needs a while loop")
    inv_f = _formula_of(inv)
    pre_f = _formula_of(pre)
    post_f = _formula_of(post)
    guard_f = cond_to_formula(loop.cond)
    if F.has_upred(guard_f):
        raise ImpreciseConditionError("loop guard is not precise")

    r1 = check_entailment_bounded(pre_f, inv_f, dom)
    if not r1.holds:
        return InvariantResult(False, 1, r1.counterexample,
                               "precondition does not establish the invariant")

    names = sorted(
        set(F.free_vars(inv_f))
        | set(F.free_vars(guard_f))
        | M.read_vars(loop.body)
        | M.assigned_vars(loop.body)
        | set(M.cond_vars(loop.cond))
    )
    _check_budget(len(names), dom)
    start = F.conj([inv_f, guard_f])
    for state in sorted(satisfying_states(start, names, dom)):
        env = dict(zip(names, state))
        status = run_statements(list(loop.body), dict(env), cb=None, step_budget=step_budget)
        if status[0] == "ok":
            if not F.evaluate(inv_f, status[1]):
                return InvariantResult(False, 2, env,
                                       "an iteration leaves the invariant false")
        elif status[0] == "return":
            return InvariantResult(False, 2, env,
                                   "loop body returns; invariant cannot be maintained")
        else:
            return InvariantResult(False, 2, env, f"loop body {status[0]} during iteration")

    r3 = check_entailment_bounded(F.conj([inv_f, F.Not(guard_f)]), post_f, dom)
    if not r3.holds:
        return InvariantResult(False, 3, r3.counterexample,
                               "invariant and negated guard do not imply the postcondition")
    return InvariantResult(True)
