"""Shared randomized generators and independent oracles for the test suite.

Everything here is deliberately written without reusing the implementation
under test: SCC partitions come from pairwise reachability, callee maps from
a raw token scan, and entailment spot-checks from the scalar tree-walking
evaluator.
"""

from __future__ import annotations

import random

from specforge import formula as F
from specforge import minilang as M

VARS = ("x", "y", "z")


# --------------------------------------------------------------------------
# Random formulas


def random_term(rng: random.Random, names, depth: int = 2) -> F.Term:
    if depth <= 0 or rng.random() < 0.4:
        if rng.random() < 0.5:
            return F.IntLit(rng.randint(-4, 4))
        return F.VarRef(rng.choice(names))
    op = rng.choice("++-**/")
    return F.BinTerm(op, random_term(rng, names, depth - 1),
                     random_term(rng, names, depth - 1))


def random_atom(rng: random.Random, names) -> F.Formula:
    op = rng.choice(F.CMP_OPS)
    return F.Cmp(op, random_term(rng, names, 1), random_term(rng, names, 1))


def random_formula(rng: random.Random, names, depth: int = 2) -> F.Formula:
    if depth <= 0 or rng.random() < 0.35:
        return random_atom(rng, names)
    kind = rng.random()
    if kind < 0.4:
        return F.And(tuple(random_formula(rng, names, depth - 1) for _ in range(2)))
    if kind < 0.8:
        return F.Or(tuple(random_formula(rng, names, depth - 1) for _ in range(2)))
    return F.Not(random_formula(rng, names, depth - 1))


# --------------------------------------------------------------------------
# Random straight-line MiniLang programs


def random_expr(rng: random.Random, names, depth: int = 2) -> M.Expr:
    if depth <= 0 or rng.random() < 0.45:
        if rng.random() < 0.45:
            return M.ELit(rng.randint(-3, 3))
        return M.EVar(rng.choice(names))
    op = rng.choice(["+", "+", "-", "-", "*", "/"])
    return M.EBin(op, random_expr(rng, names, depth - 1),
                  random_expr(rng, names, depth - 1))


def random_straightline(rng: random.Random, max_stmts: int = 6) -> list[M.SAssign]:
    n = rng.randint(1, max_stmts)
    return [
        M.SAssign(rng.choice(VARS), random_expr(rng, VARS), line=i + 1)
        for i in range(n)
    ]


# --------------------------------------------------------------------------
# Independent graph oracles


def random_digraph(rng: random.Random, n_nodes: int, edge_prob: float):
    nodes = [f"n{i:02d}" for i in range(n_nodes)]
    edges = set()
    for a in nodes:
        for b in nodes:
            if a != b and rng.random() < edge_prob:
                edges.add((a, b))
    if rng.random() < 0.3 and nodes:
        edges.add((rng.choice(nodes), rng.choice(nodes)))  # maybe a self-loop
    return nodes, edges


def reachability_scc_partition(nodes, edges) -> set[frozenset[str]]:
    """SCCs by pairwise reachability closure: f and g share a component iff
    each reaches the other. O(V*(V+E)), independent of Tarjan."""
    succ = {n: set() for n in nodes}
    for a, b in edges:
        succ[a].add(b)

    def reachable(src: str) -> set[str]:
        seen = {src}
        stack = [src]
        while stack:
            cur = stack.pop()
            for nxt in succ[cur]:
                if nxt not in seen:
                    seen.add(nxt)
                    stack.append(nxt)
        return seen

    reach = {n: reachable(n) for n in nodes}
    out: set[frozenset[str]] = set()
    for n in nodes:
        members = frozenset(m for m in nodes if m in reach[n] and n in reach[m])
        out.add(members)
    return out


def token_scan_callees(source: str) -> dict[str, set[str]]:
    """Second, parser-free callee extraction: scan the raw token stream for
    the `ident = ident (` call shape inside each `fn` definition."""
    toks = M._lex(source)
    out: dict[str, set[str]] = {}
    current = None
    i = 0
    while i < len(toks):
        t = toks[i]
        if t.kind == "IDENT" and t.text == "fn" and toks[i + 1].kind == "IDENT":
            current = toks[i + 1].text
            out[current] = set()
            i += 2
            continue
        if (
            current is not None
            and t.kind == "IDENT"
            and t.text not in M._KEYWORDS
            and i + 3 < len(toks)
            and toks[i + 1].text == "="
            and toks[i + 2].kind == "IDENT"
            and toks[i + 2].text not in M._KEYWORDS
            and toks[i + 3].text == "("
        ):
            out[current].add(toks[i + 2].text)
            i += 3
            continue
        i += 1
    return out
