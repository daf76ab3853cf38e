import random

import pytest
from hypothesis import HealthCheck, assume, given, settings
from hypothesis import strategies as st
from strategies import LOCS, VARS, computations, effects, types

from hoplog import syntax as S
from hoplog.oracle import instantiate
from hoplog.semantics import Comp, EvalError, Interpreter
from hoplog.surface import parse_program, parse_term, parse_type
from hoplog.typecheck import (
    AdversaryMismatch, CostOverflow, Ctx, EffectEscape, MemExprError, RegionError, TypeCheckError,
    check_mem_expr, check_program, check_subtype, check_type, effect_subset, infer_type,
)

SMALL = parse_program("""values nat 3 + none;
locations a b c;
dist coin : unit -> nat(1) = uniform 2;
""")
CFG = SMALL.config


def ty(text):
    return parse_type(text, CFG)


def tm(text, scope=()):
    return parse_term(text, CFG, SMALL, scope=list(scope))


# ---------------------------------------------------------------- check_type


def test_unit_star_has_empty_grade():
    assert check_type(CFG, Ctx.make(), tm("unit ()"), ty("T[{}; 0] unit")) is not None
    assert infer_type(CFG, Ctx.make(), tm("unit ()")) == S.TMon(S.EMPTY, 0, S.UNIT)


def test_bind_unions_read_and_write_effects():
    t = tm("let x = read a in write b x")
    assert infer_type(CFG, Ctx.make(), t) == S.TMon(S.Effect.of(["a", "b"]), 0, S.UNIT)
    check_type(CFG, Ctx.make(), t, ty("T[{a, b}; 0] unit"))
    with pytest.raises(EffectEscape):
        check_type(CFG, Ctx.make(), t, ty("T[{a}; 0] unit"))


def test_read_write_sample_grades():
    assert infer_type(CFG, Ctx.make(), tm("read c")) == S.TMon(S.Effect.of(["c"]), 0, S.VAL)
    assert infer_type(CFG, Ctx.make(), tm("write c 1")).eff == S.Effect.of(["c"])
    t = infer_type(CFG, Ctx.make(), tm("sample coin"))
    assert (t.eff, t.cost) == (S.EMPTY, 0)
    assert infer_type(CFG, Ctx.make(), tm("skip")) == S.TMon(S.EMPTY, 0, S.UNIT)


def test_bind_adds_the_effect_of_the_bound_type():
    # the bound value is a computation over {c}; its effect must show up in the grade
    t = tm("let f = unit (read c) in unit 0")
    assert "c" in infer_type(CFG, Ctx.make(), t).eff.locs


def test_fold_cost_is_base_plus_count_times_step():
    ctx = Ctx.make(vars={"g": ty("nat(1) -> T[{a}; 2] nat(1)"), "h": ty("T[{b}; 1] nat(1)")})
    t = S.MFold(S.Lit(3), S.Var("h"), S.Var("g"))
    out = infer_type(CFG, ctx, t)
    assert out.eff == S.Effect.of(["a", "b"]) and out.cost == 1 + 3 * 2


ADV = """values nat 2 + none;
locations a b;
adversary A : forall 'r. (nat(1) -> T[{'r}; 1] val) -> T[{'r, a}; 2] bool;
def ok : T[{a, b}; 2] bool = A (fun (x : nat(1)) => read b)
def escape : T[{a}; 2] bool = A (fun (x : nat(1)) => read b)
def cheap : T[{a, b}; 1] bool = A (fun (x : nat(1)) => read b)
def costly : T[{a, b}; 2] bool = A (fun (x : nat(1)) => let y = read b in A (fun (z : nat(1)) => unit 0))
"""


def test_adversary_application_instantiates_the_region():
    prog = parse_program(ADV)
    assert check_program(prog, "ok")["ok"] == ty("T[{a, b}; 2] bool")
    with pytest.raises(EffectEscape):
        check_program(prog, "escape")
    with pytest.raises(CostOverflow):
        check_program(prog, "cheap")
    with pytest.raises(TypeCheckError):
        check_program(prog, "costly")


def test_adversary_argument_must_match_the_oracle_shape():
    prog = parse_program(ADV.split("def ok")[0] + "def bad : T[{a, b}; 2] bool = A (fun (x : bool) => read b)\n")
    with pytest.raises(AdversaryMismatch):
        check_program(prog, "bad")


def test_unknown_region_variable_is_rejected():
    with pytest.raises(RegionError):
        check_type(CFG, Ctx.make(), tm("unit ()"), S.TMon(S.Effect.of([], ["q"]), 0, S.UNIT))


def test_succ_widens_the_bound():
    ctx = Ctx.make(vars={"x": S.TNat(2)})
    assert infer_type(CFG, ctx, S.Succ(S.Var("x"))) == S.TNat(3)
    assert infer_type(CFG, Ctx.make(), S.Succ(S.Succ(S.Zero()))) == S.TNat(2)


def test_comparisons_need_matching_operands():
    prog = parse_program("""values nat 2;
array L : 2;
def bad (b : bool) : T[{L}; 0] val = L[b]
def good (n : nat(1)) : T[{L}; 0] val = L[n]
def flags (b : bool) : T[{}; 0] bool = unit (b == tt)
def order (b : bool) : T[{}; 0] bool = unit (b < 1)
""")
    with pytest.raises(TypeCheckError, match="expected val, found bool"):
        check_program(prog, "bad")
    check_program(prog, "good")
    check_program(prog, "flags")
    with pytest.raises(TypeCheckError):
        check_program(prog, "order")


def test_corpus_type_checks(programs):
    for prog in programs.values():
        assert check_program(prog)


# ---------------------------------------------------------------- subtyping


def test_subtype_examples():
    assert check_subtype((), S.TNat(3), S.TNat(5))
    assert not check_subtype((), S.TNat(5), S.TNat(3))
    assert check_subtype((), ty("T[{a}; 1] bool"), ty("T[{a, b}; 2] bool"))
    assert not check_subtype((), ty("T[{a, b}; 1] bool"), ty("T[{a}; 2] bool"))
    assert not check_subtype((), ty("T[{a}; 3] bool"), ty("T[{a}; 2] bool"))
    narrow, wide = S.TNat(1), S.TNat(4)
    assert check_subtype((), S.TArrow(wide, S.BOOL), S.TArrow(narrow, S.BOOL))
    assert not check_subtype((), S.TArrow(narrow, S.BOOL), S.TArrow(wide, S.BOOL))


def test_effect_subset_examples():
    r = ["r"]
    assert effect_subset(r, S.Effect.of(["a"], r), S.Effect.of(["a", "b"], r))
    assert effect_subset(("r", "q"), S.EMPTY, S.Effect.of([], ["q"]))
    lhs, rhs = S.Effect.of(["a"], r), S.Effect.of(["a", "b"])
    assert not effect_subset(r, lhs, rhs)
    # countermodel: instantiate 'r with a location outside the right-hand side
    fresh = S.Effect.of(["c"])
    inst_l, inst_r = lhs.subst("r", fresh), rhs.subst("r", fresh)
    assert not inst_l.locs <= inst_r.locs


@given(effects(), effects(), st.sets(st.sampled_from(LOCS + ["d", "e"]), max_size=2),
       st.sets(st.sampled_from(LOCS + ["d", "e"]), max_size=2))
def test_effect_subset_is_sound_for_every_instantiation(a, b, r_inst, q_inst):
    if effect_subset(("r", "q"), a, b):
        inst = {"r": S.Effect.of(r_inst), "q": S.Effect.of(q_inst)}
        ca, cb = a, b
        for v, e in inst.items():
            ca, cb = ca.subst(v, e), cb.subst(v, e)
        assert ca.locs <= cb.locs


@st.composite
def widened(draw, t, up=True):
    """A super- (up) or subtype (not up) of t built from the structural rules."""
    if isinstance(t, S.TNat):
        d = draw(st.integers(0, 2))
        return S.TNat(t.bound + d) if up else S.TNat(max(0, t.bound - d))
    if isinstance(t, S.TMon):
        inner = draw(widened(t.inner, up))
        if up:
            extra = draw(effects())
            return S.TMon(t.eff | extra, t.cost + draw(st.integers(0, 2)), inner)
        locs = draw(st.sets(st.sampled_from(sorted(t.eff.locs)))) if t.eff.locs else set()
        vs = draw(st.sets(st.sampled_from(sorted(t.eff.vars)))) if t.eff.vars else set()
        return S.TMon(S.Effect.of(locs, vs), max(0, t.cost - draw(st.integers(0, 2))), inner)
    if isinstance(t, S.TArrow):
        return S.TArrow(draw(widened(t.dom, not up)), draw(widened(t.cod, up)))
    if isinstance(t, S.TProd):
        return S.TProd(draw(widened(t.left, up)), draw(widened(t.right, up)))
    return t


@st.composite
def chains(draw):
    t = draw(types())
    u = draw(widened(t))
    return t, u, draw(widened(u))


XI = ("r", "q")


@given(types())
@settings(max_examples=200)
def test_subtyping_is_reflexive(t):
    assert check_subtype(XI, t, t)


@given(chains())
@settings(max_examples=200)
def test_subtyping_is_transitive(chain):
    t, u, v = chain
    assert check_subtype(XI, t, u) and check_subtype(XI, u, v)
    assert check_subtype(XI, t, v)


@given(types(), types(), types())
@settings(max_examples=200)
def test_subtyping_is_transitive_on_arbitrary_triples(t, u, v):
    if check_subtype(XI, t, u) and check_subtype(XI, u, v):
        assert check_subtype(XI, t, v)


def test_forall_congruence():
    lo = S.TForall("r", S.TMon(S.Effect.of(["a"], ["r"]), 1, S.BOOL))
    hi = S.TForall("r", S.TMon(S.Effect.of(["a", "b"], ["r"]), 2, S.BOOL))
    assert check_subtype((), lo, hi)
    assert not check_subtype((), hi, lo)


# ---------------------------------------------------------------- memory expressions


def test_mem_expr_typing():
    s = S.Var("s")
    assert check_mem_expr(CFG, {"s": S.MEM}, S.Select(s, "a")) == S.VAL
    assert check_mem_expr(CFG, {"s": S.MEM}, S.Store(s, "a", S.Select(s, "b"))) == S.MEM
    with pytest.raises(MemExprError):
        check_mem_expr(CFG, {"s": S.BOOL}, S.Select(s, "a"))
    with pytest.raises(MemExprError):
        check_mem_expr(CFG, {"s": S.MEM}, S.Select(s, "zz"))
    with pytest.raises(MemExprError):
        check_mem_expr(CFG, {"s": S.MEM}, S.Store(s, "a", S.Lit(True)))


# ---------------------------------------------------------------- semantic properties

ENV_TYPES = {v: S.TNat(1) for v in VARS}
MEMORIES = [(x, y, z) for x in CFG.values for y in CFG.values for z in CFG.values]


@given(computations(), st.lists(st.integers(0, 1), min_size=3, max_size=3))
@settings(max_examples=150, deadline=None, suppress_health_check=[HealthCheck.filter_too_much])
def test_footprint_soundness(t, vals):
    ctx = Ctx.make(vars=ENV_TYPES)
    try:
        out = infer_type(CFG, ctx, t)
    except TypeCheckError:
        assume(False)
    assume(isinstance(out, S.TMon))
    assert infer_type(CFG, ctx, t) == out          # deterministic
    env = dict(zip(VARS, vals))
    interp = Interpreter(CFG)
    keep = [i for i, loc in enumerate(CFG.locations) if loc not in out.eff.locs]
    for mem in MEMORIES:
        try:
            d = interp.run(t, mem, env)
        except EvalError:
            continue
        for _, m in d.support():
            assert all(m[i] == mem[i] for i in keep)


def test_corpus_footprints(programs):
    rng = random.Random(7)
    for prog in programs.values():
        cfg = prog.config
        for d in prog.defs.values():
            rty = d.ret
            if not isinstance(rty, S.TMon):
                continue
            impls = [i for i, (a, _) in prog.impls.items()] if S.adv_vars(d.body) else [None]
            keep = [i for i, loc in enumerate(cfg.locations) if loc not in rty.eff.locs]
            for impl in impls:
                body = instantiate(prog, d.body, impl)
                for _ in range(10):
                    mem = tuple(rng.choice(cfg.domain(loc)) for loc in cfg.locations)
                    env = {x: rng.choice([v for v in range(pt.bound + 1)]) if isinstance(pt, S.TNat) else 0
                           for x, pt in d.params}
                    try:
                        dist = Interpreter(cfg).run(body, mem, env)
                    except EvalError:
                        continue
                    for _, m in dist.support():
                        assert all(m[i] == mem[i] for i in keep), (d.name, impl)


class CountingInterpreter(Interpreter):
    """Tracks the number of oracle invocations in an extra trailing memory slot."""

    def __init__(self, cfg, oracle_body):
        super().__init__(cfg)
        self.oracle_body = oracle_body

    def apply(self, f, a):
        out = super().apply(f, a)
        if f.body is self.oracle_body and isinstance(out, Comp):
            return Counted(out.term, out.env)
        return out

    def run_comp(self, c, mem):
        if isinstance(c, Counted):
            mem = mem[:-1] + (mem[-1] + 1,)
        return super().run_comp(c, mem)


class Counted(Comp):
    pass


def test_cost_bounds_oracle_calls(programs):
    checked = 0
    for prog in programs.values():
        cfg = prog.config
        for d in prog.defs.values():
            body = d.body
            if d.params or not isinstance(body, S.App) or not isinstance(body.fn, S.AdvVar):
                continue
            for impl in prog.impls:
                term = instantiate(prog, body, impl)
                interp = CountingInterpreter(cfg, term.arg.body)
                out = interp.run_comp(interp.eval(term, {}), cfg.default_memory() + (0,))
                calls = max(m[-1] for _, m in out)
                assert 0 < calls <= d.ret.cost, (d.name, impl, calls)
                checked += 1
    assert checked >= 4
