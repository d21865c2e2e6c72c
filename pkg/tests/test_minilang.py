import pytest

from specforge import minilang as M
from specforge.errors import MiniLangSyntaxError, UseBeforeAssignError


def test_parse_single_function():
    fns = M.parse_module("fn main(){ return 0; }")
    assert len(fns) == 1
    assert fns[0].name == "main"
    assert fns[0].params == ()
    assert isinstance(fns[0].body[0], M.SReturn)


def test_parse_params_and_call():
    src = "fn f(x){ y = g(x); return y; } fn g(a){ return a; }"
    fns = M.parse_module(src)
    f = fns[0]
    assert f.params == ("x",)
    call = f.body[0]
    assert isinstance(call, M.SCall)
    assert call.callee == "g"
    assert call.target == "y"


def test_parse_if_else_while():
    src = """
    fn f(n) {
        s = 0;
        i = 0;
        while (i < n) {
            if (i > 2 && n != 4) {
                s = s + i;
            } else {
                s = s - 1;
            }
            i = i + 1;
        }
        return s;
    }
    """
    fn = M.parse_module(src)[0]
    loop = fn.body[2]
    assert isinstance(loop, M.SWhile)
    branch = loop.body[0]
    assert isinstance(branch, M.SIf)
    assert isinstance(branch.cond, M.CAnd)


def test_comments_and_whitespace_insensitive():
    a = M.parse_module("fn f(x){ // comment\n return x; }")
    b = M.parse_module("fn f(x){return x;}")
    assert M.render_module(a) == M.render_module(b)


def test_syntax_error_position_and_expectation():
    with pytest.raises(MiniLangSyntaxError) as exc:
        M.parse_module("fn f(x){ return x }")
    assert "';'" in str(exc.value)
    assert exc.value.line == 1


def test_use_before_assign_simple():
    with pytest.raises(UseBeforeAssignError):
        M.parse_module("fn f(x){ y = z + 1; return y; }")


def test_use_before_assign_branch_paths():
    # assigned on one path only: still an error after the branch
    src = "fn f(x){ if (x > 0) { y = 1; } return y; }"
    with pytest.raises(UseBeforeAssignError):
        M.parse_module(src)
    # assigned on both paths: fine
    ok = "fn f(x){ if (x > 0) { y = 1; } else { y = 2; } return y; }"
    M.parse_module(ok)


def test_use_before_assign_while_body_not_definite():
    src = "fn f(x){ while (x > 0) { y = 1; x = x - 1; } return y; }"
    with pytest.raises(UseBeforeAssignError):
        M.parse_module(src)


def test_result_is_reserved():
    with pytest.raises(MiniLangSyntaxError):
        M.parse_module("fn f(result){ return result; }")
    with pytest.raises(MiniLangSyntaxError):
        M.parse_module("fn f(x){ result = x; return x; }")


def test_unary_minus_and_precedence():
    fn = M.parse_module("fn f(x){ return -3 + x * 2; }")[0]
    ret = fn.body[0]
    assert isinstance(ret.expr, M.EBin)
    assert ret.expr.op == "+"
    assert ret.expr.left == M.ELit(-3)


def test_render_parse_round_trip():
    src = """
    fn f(a, b) {
        c = a * (b + 2);
        if (c >= 0 || a == -1) {
            c = c / 2;
        }
        while (c > 0) {
            c = c - 1;
        }
        d = f(c, b);
        return d;
    }
    """
    fns = M.parse_module(src)
    rendered = M.render_module(fns)
    again = M.parse_module(rendered)
    # compare modulo line numbers
    assert M.render_module(again) == rendered


def test_call_sites_preorder_indexing():
    src = """
    fn f(x) {
        a = g(x);
        if (x > 0) {
            b = h(a);
        } else {
            b = g(a);
        }
        return b;
    }
    fn g(v){ return v; }
    fn h(v){ return v; }
    """
    fn = M.parse_module(src)[0]
    sites = M.call_sites(fn)
    assert [(i, st.callee) for i, st in sites] == [(0, "g"), (2, "h"), (3, "g")]
    assert M.callee_names(fn) == {"g", "h"}


def test_walk_statements_counts_nested():
    src = "fn f(x){ if (x>0) { y = 1; } else { y = 2; } return y; }"
    fn = M.parse_module(src)[0]
    kinds = [type(s).__name__ for s in M.walk_statements(fn.body)]
    assert kinds == ["SIf", "SAssign", "SAssign", "SReturn"]


def test_empty_module_is_a_syntax_error():
    with pytest.raises(MiniLangSyntaxError):
        M.parse_module("")
