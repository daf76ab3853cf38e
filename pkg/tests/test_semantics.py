from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from strategies import VARS, computations

from hoplog import syntax as S
from hoplog.semantics import INF, Dist, EvalError, Interpreter, dist_bind, expectation, outcome_table, parse_memory, run
from hoplog.surface import parse_program, parse_term

PROG = parse_program("""values nat 3 + none;
locations a b c;
dist coin : unit -> nat(1) = uniform 2;
dist bias : unit -> nat(1) = table { [] -> { 0 : 1/3, 1 : 2/3 } };
dist pick : nat(2) -> nat(2) = table { [0] -> { 0 : 1 }, [1] -> { 0 : 1/2, 1 : 1/2 }, [2] -> { 2 : 1 } };
""")
CFG = PROG.config
M0 = (0, 0, 0)


def tm(text, scope=()):
    return parse_term(text, CFG, PROG, scope=list(scope))


def test_read_then_write_back_is_the_identity():
    for m in [(0, 1, 2), (None, 0, 0), (2, 2, None)]:
        d = run(CFG, tm("let x = read a in write a x"), m)
        assert [mem for _, mem in d.support()] == [m] and d.total() == 1


def test_uniform_base_case():
    d = run(CFG, tm("sample coin"), M0)
    assert dict(d.items()) == {(0, M0): Fraction(1, 2), (1, M0): Fraction(1, 2)}


def test_sample_then_write():
    d = run(CFG, tm("let x = sample coin in write a x"), M0)
    mems = sorted(mem for _, mem in d.support())
    assert mems == [(0, 0, 0), (1, 0, 0)]
    assert all(p == Fraction(1, 2) for _, p in d.items())


def test_table_distributions():
    assert run(CFG, tm("sample bias"), M0)[(1, M0)] == Fraction(2, 3)
    d = run(CFG, tm("let z = sample pick(1) in unit z"), M0)
    assert d[(0, M0)] == d[(1, M0)] == Fraction(1, 2)


def test_errors():
    with pytest.raises(EvalError):
        run(CFG, tm("write a 7"), M0)
    with pytest.raises(EvalError):
        run(CFG, S.Var("nope"), M0)
    with pytest.raises(EvalError):
        run(CFG, S.Sample("missing"), M0)


def test_outcome_table_and_memory_syntax():
    # unlisted cells default to none when the domain has it
    mem = parse_memory(CFG, "a=2,b=1")
    assert mem == (2, 1, None)
    rows = outcome_table(CFG, run(CFG, tm("read a"), mem))
    assert len(rows) == 1 and rows[0][0] == "2" and rows[0][2] == "1"


# ---------------------------------------------------------------- dist_bind and expectation

small_dists = st.dictionaries(st.integers(0, 4), st.integers(1, 5), min_size=1, max_size=4).map(
    lambda w: Dist({k: Fraction(v, sum(w.values())) for k, v in w.items()}))


@st.composite
def kernels(draw):
    table = {x: draw(small_dists) for x in range(5)}
    return lambda x: table[x]


@given(st.integers(0, 4), kernels())
def test_left_unit(x, f):
    assert dist_bind(Dist.point(x), f) == f(x)


@given(small_dists)
def test_right_unit(d):
    assert dist_bind(d, Dist.point) == d


@given(small_dists, kernels(), kernels())
@settings(max_examples=100)
def test_associativity(d, f, g):
    assert dist_bind(dist_bind(d, f), g) == dist_bind(d, lambda x: dist_bind(f(x), g))


@given(small_dists, kernels())
def test_bind_conserves_mass(d, f):
    assert dist_bind(d, f).total() == 1


def test_expectation_examples():
    g = lambda x: Fraction(x * x)  # noqa: E731
    assert expectation(Dist.point(3), g) == 9
    assert expectation(Dist.uniform(range(4)), lambda x: Fraction(x)) == Fraction(3, 2)
    assert expectation(Dist.uniform(range(4)), lambda x: INF if x == 2 else 0) == INF


def test_dist_rejects_bad_weights():
    with pytest.raises(ValueError, match="sum"):
        Dist({0: Fraction(1, 2)})
    with pytest.raises(ValueError, match="negative"):
        Dist({0: Fraction(3, 2), 1: Fraction(-1, 2)})


# ---------------------------------------------------------------- whole programs


@given(computations(), st.lists(st.integers(0, 1), min_size=3, max_size=3))
@settings(max_examples=100, deadline=None)
def test_mass_conservation(t, vals):
    env = dict(zip(VARS, vals))
    try:
        d = run(CFG, t, M0, env)
    except EvalError:
        return
    assert d.total() == 1
    assert all(p > 0 for _, p in d.items())


STEP = "fun (x : nat(1)) => let y = sample coin in let z = read a in if y == 0 then unit x else (write b y; unit y)"


@pytest.mark.parametrize("n", range(6))
def test_mfold_unrolls_to_a_let_chain(n):
    step = tm(STEP)
    init = tm("let w = read b in unit 0")
    folded = S.MFold(S.num(n), init, step)
    chain = init
    for i in range(n):
        chain = S.LetM(f"acc{i}", chain, S.App(step, S.Var(f"acc{i}")))
    for m in [(0, 0, 0), (1, 2, None)]:
        assert run(CFG, folded, m) == run(CFG, chain, m)


def test_trace_records_effects():
    trace = []
    Interpreter(CFG, trace).run(tm("let x = read a in write b x"), (1, 0, 0))
    assert trace == ["read a -> 1", "write b <- 1"]
