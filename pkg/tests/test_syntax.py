import json

import pytest
from hypothesis import given, settings
from strategies import VARS, bool_assertions, closed_forall_types, quant_assertions, terms, types

from hoplog import syntax as S
from hoplog.semantics import run
from hoplog.sexp import assertion_sexp, parse_assertion, read_one, show
from hoplog.surface import ParseError, dump_json, parse_program, parse_term, parse_type, show_term, show_type

HEADER = """values nat 4 + none;
locations a b c;
array L : 2;
dist coin : unit -> nat(1) = uniform 2;
"""


@pytest.fixture(scope="module")
def prog():
    return parse_program(HEADER)


def term(prog, text, scope=VARS):
    return parse_term(text, prog.config, prog, scope=scope)


# ---------------------------------------------------------------- parsing and sugar


def test_let_read_unit(prog):
    assert term(prog, "let x = read a in unit x") == S.LetM("x", S.Read("a"), S.UnitM(S.Var("x")))


def test_assign_sugar(prog):
    t = term(prog, "a := S 0")
    assert t == S.LetM("_", S.UnitM(S.Star()), S.Write("a", S.Succ(S.Zero())))


def test_inc_sugar_reads_then_writes(prog):
    t = term(prog, "inc a")
    assert isinstance(t, S.LetM) and t.bound == S.Read("a")
    assert isinstance(t.body, S.Write) and t.body.loc == "a"
    d = run(prog.config, t, (2, 0, 0, None, None))
    assert [m for _, m in d.support()] == [(3, 0, 0, None, None)]


def test_sequence_sugars(prog):
    assert term(prog, "read a; skip") == S.LetM("_", S.Read("a"), S.Skip())
    # a pure binding: the bound term is substituted, not executed
    t = term(prog, "y = S 1; unit y")
    assert t == S.App(S.Lam("y", None, S.UnitM(S.Var("y"))), S.Succ(S.Lit(1)))
    assert run(prog.config, t, (1, 0, 0, 0, 0)).support() == [(2, (1, 0, 0, 0, 0))]


def test_array_index_is_a_case_over_cells(prog):
    t = term(prog, "let y = L[x] in unit y")
    assert isinstance(t.bound, S.Case)
    assert {t.bound.then, t.bound.else_} == {S.Read("L[0]"), S.Read("L[1]")}
    manual = term(prog, "let y = if x == 0 then read L[0] else read L[1] in unit y")
    cfg = prog.config
    for x in (0, 1):
        for mem in [(0, 0, 0, 1, 2), (0, 0, 0, None, 3)]:
            assert run(cfg, t, mem, {"x": x}) == run(cfg, manual, mem, {"x": x})


def test_array_write_touches_one_cell(prog):
    t = term(prog, "L[x] := 3")
    d = run(prog.config, t, (0, 0, 0, 0, 0), {"x": 1})
    assert d.support()[0][1] == (0, 0, 0, 0, 3)


def test_parse_errors_carry_positions(prog):
    with pytest.raises(ParseError) as e:
        term(prog, "let x = read zz in unit x")
    assert e.value.line == 1
    with pytest.raises(ParseError):
        term(prog, "sample nosuchdist")
    with pytest.raises(ParseError):
        parse_program("locations a;\ndef f : T[{a}; 0] unit = let x = in unit x")


def test_json_dump_is_stable(programs):
    for prog in programs.values():
        text = dump_json(prog)
        assert text == dump_json(prog)
        data = json.loads(text)
        assert set(data) == {"config", "adversaries", "impls", "defs"}


# ---------------------------------------------------------------- substitution


def test_region_substitution_unions_locations():
    t = S.TMon(S.Effect.of(["a"], ["r"]), 1, S.UNIT)
    assert S.subst_region(t, "r", S.Effect.of(["b"])) == S.TMon(S.Effect.of(["a", "b"]), 1, S.UNIT)


def test_substitution_skips_bound_variable():
    lam = S.Lam("x", S.BOOL, S.Var("x"))
    assert S.substitute(lam, {"y": S.Lit(1)}) == lam
    assert S.substitute(lam, {"x": S.Lit(1)}) == lam


def test_substitution_avoids_capture():
    lam = S.Lam("x", S.BOOL, S.Prim("and", (S.Var("x"), S.Var("y"))))
    out = S.substitute(lam, {"y": S.Var("x")})
    assert isinstance(out, S.Lam) and out.var != "x"
    assert S.free_vars(out) == {"x"}


def test_adversary_substitution_requires_closed_term():
    t = S.App(S.AdvVar("A"), S.Var("f"))
    with pytest.raises(S.OpenAdversaryError):
        S.subst_adv(t, "A", S.Var("z"))
    closed = S.Lam("o", S.BOOL, S.UnitM(S.Star()))
    assert S.subst_adv(t, "A", closed) == S.App(closed, S.Var("f"))


@given(terms(), terms())
@settings(max_examples=200, deadline=None)
def test_substitution_free_variables(t, r):
    for x in VARS:
        out = S.substitute(t, {x: r})
        if x in S.free_vars(t):
            assert S.free_vars(out) == (S.free_vars(t) - {x}) | S.free_vars(r)
        else:
            assert S.free_vars(out) == S.free_vars(t)


# ---------------------------------------------------------------- eff


def test_eff_examples():
    assert S.eff(S.BOOL) == S.EMPTY
    assert S.eff(S.TArrow(S.VAL, S.TMon(S.Effect.of(["a"]), 1, S.BOOL))) == S.Effect.of(["a"])
    t = S.TForall("r", S.TMon(S.Effect.of(["a"], ["r"]), 1, S.UNIT))
    assert S.eff(t) == S.Effect.of(["a"])


@given(closed_forall_types())
@settings(max_examples=100, deadline=None)
def test_eff_of_forall_is_the_intersection_over_instances(t):
    # eff(forall r. tau) = eff(tau[r := {}]); instances add only the chosen locations
    base = S.eff(t).locs
    instances = [S.eff(S.subst_region(t.body, "r", S.Effect.of(locs))).locs
                 for locs in ([], ["a"], ["b"], ["a", "c"])]
    assert base == frozenset.intersection(*instances)


@given(types())
@settings(max_examples=200, deadline=None)
def test_eff_commutes_with_region_substitution(t):
    sub = S.Effect.of(["c"])
    lhs = S.eff(S.subst_region(t, "r", sub))
    rhs = S.eff(t).subst("r", sub)
    assert lhs == rhs


def test_eff_of_products_is_the_union():
    p = S.TProd(S.TMon(S.Effect.of(["a"]), 0, S.UNIT), S.TMon(S.Effect.of(["b"]), 0, S.UNIT))
    assert S.eff(p) == S.Effect.of(["a", "b"])


# ---------------------------------------------------------------- round trips


@given(types())
@settings(max_examples=300, deadline=None)
def test_type_round_trip(t):
    prog = parse_program(HEADER)
    assert parse_type(show_type(t), prog.config) == t


@given(closed_forall_types())
@settings(max_examples=100, deadline=None)
def test_forall_type_round_trip(t):
    prog = parse_program(HEADER)
    assert parse_type(show_type(t), prog.config) == t


@given(terms())
@settings(max_examples=300, deadline=None)
def test_term_round_trip(t):
    prog = parse_program(HEADER)
    assert term(prog, show_term(t)) == t


@given(bool_assertions())
@settings(max_examples=200, deadline=None)
def test_bool_assertion_round_trip(a):
    assert parse_assertion(read_one(show(assertion_sexp(a)))) == a


@given(quant_assertions())
@settings(max_examples=200, deadline=None)
def test_quant_assertion_round_trip(a):
    assert parse_assertion(read_one(show(assertion_sexp(a)))) == a
