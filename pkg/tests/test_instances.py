from fractions import Fraction

import pytest
from conftest import proof
from hypothesis import given, settings
from hypothesis import strategies as st
from strategies import NUM_TERMS, bool_assertions, props, quant_assertions

from hoplog import syntax as S
from hoplog.assertions import BOOL, QUANT, Compiler, eq_tau
from hoplog.discharge import check_rsafe, check_safe
from hoplog.kernel import check_proof
from hoplog.oracle import statistical_distance, validate_proof
from hoplog.proof import (
    MissingObligation, MonadicTypeError, ObligationFailed, RangeError, SafetyViolation, SampleError, ScopeError,
)
from hoplog.semantics import INF, Dist, run
from hoplog.sexp import parse_assertion, read_one
from hoplog.surface import parse_program

UBL = """values nat 8 + none;
locations w q;
dist u8 : unit -> nat(7) = uniform 8;
adversary A : forall 'r. (nat(7) -> T[{'r}; 1] unit) -> T[{'r, q}; 3] unit;
impl thrice of A = fun (o : nat(7) -> T[{'r}; 1] unit) => o 1; q := 1; o 1; o 2
def s8 : T[{}; 0] nat(7) = sample u8
def orc (x : nat(7)) : T[{w}; 0] unit = let z = sample u8 in if z == x then w := 1 else unit ()
def game : T[{w, q}; 3] unit = A orc
def viaparam (f : (nat(7) -> T[{w}; 1] unit) -> T[{w}; 3] unit) : T[{w}; 3] unit = f orc
"""
UPROG = parse_program(UBL)


def ubl(name, pre, post, deriv, grade=None, prog=UPROG, extra=""):
    return check_proof(prog, proof("ubl", name, pre, post, deriv, grade, extra))


def sample_ubl(phi, g, pre="true"):
    return f"(SAMPLE-UBL (meta (pre {pre}) (phi {phi}) (grade {g})) (obligations (ratio eval)))"


# ---------------------------------------------------------------- SAMPLE-UBL


@pytest.mark.parametrize("i", range(9))
def test_sample_avoiding_a_set_of_size_i(i):
    avoid = " ".join(str(n) for n in range(i))
    phi = f"(not (member v {avoid}))" if i else "true"
    cert = ubl("s8", "true", f"(meet true {phi})", sample_ubl(phi, f"{i}/8"))
    assert Fraction(cert.grade) == Fraction(i, 8)
    if i:
        with pytest.raises(ObligationFailed):
            ubl("s8", "true", f"(meet true {phi})", sample_ubl(phi, f"{i - 1}/8"))


def test_sample_trivial_phis():
    assert ubl("s8", "true", "(meet true true)", sample_ubl("true", 0)).grade == "0"
    assert ubl("s8", "true", "(meet true false)", sample_ubl("false", 1)).grade == "1"
    with pytest.raises(SampleError):
        ubl("s8", "true", "(meet true false)", sample_ubl("false", "3/2"))


# ---------------------------------------------------------------- ADV-U

ORACLE_STEP = ("(WP (meta (pre (= (sel s w) 0))) (obligations (pre eval)) "
               "(CONSEQ (meta (post (meet (= (sel s w) 0) (<> v x)))) (obligations (post eval)) "
               + sample_ubl("(<> v x)", "1/8", "(= (sel s w) 0)") + "))")


def test_adv_constant_family():
    deriv = f"(ADV-U (meta (inv (= (sel s w) 0)) (delta 1/8)) (obligations (safe eval)) {ORACLE_STEP})"
    cert = ubl("game", "(= (sel s w) 0)", "(= (sel s w) 0)", deriv)
    assert cert.grade == "3/8"
    report = validate_proof(UPROG, proof("ubl", "game", "(= (sel s w) 0)", "(= (sel s w) 0)", deriv),
                            instances=["thrice"])
    assert report.ok


def test_adv_indexed_family(certs):
    # collision: delta_i = (i+1)/8 for k = 3 queries sums to k(k+1)/2^(l+1) with l = 3
    assert Fraction(certs["collision"].grade) == Fraction(3 * 4, 2 ** 4)
    assert Fraction(certs["prfprp"].grade) == Fraction(2 * 3, 2 ** 3)


def test_adv_invariant_reading_private_state_is_unsafe():
    step = ORACLE_STEP.replace("(= (sel s w) 0)", "(= (sel s q) 0)")
    deriv = f"(ADV-U (meta (inv (= (sel s q) 0)) (delta 1/8)) (obligations (safe eval)) {step})"
    with pytest.raises(SafetyViolation):
        ubl("game", "(= (sel s q) 0)", "(= (sel s q) 0)", deriv)


def test_adv_safe_obligation_must_be_listed():
    deriv = f"(ADV-U (meta (inv (= (sel s w) 0)) (delta 1/8)) {ORACLE_STEP})"
    with pytest.raises(MissingObligation):
        ubl("game", "(= (sel s w) 0)", "(= (sel s w) 0)", deriv)


def test_adv_rejects_monadic_result_type():
    prog = parse_program(UBL.replace("-> T[{'r, q}; 3] unit;", "-> T[{'r, q}; 3] (T[{}; 0] bool);")
                         .replace("def game : T[{w, q}; 3] unit", "def game : T[{w, q}; 3] (T[{}; 0] bool)")
                         .split("def viaparam")[0])
    deriv = f"(ADV-U (meta (inv (= (sel s w) 0)) (delta 1/8)) (obligations (safe eval)) {ORACLE_STEP})"
    with pytest.raises(MonadicTypeError):
        ubl("game", "(= (sel s w) 0)", "(= (sel s w) 0)", deriv, prog=prog)


def test_adversary_must_come_from_the_adversary_context():
    deriv = f"(ADV-U (meta (inv (= (sel s w) 0)) (delta 1/8)) (obligations (safe eval)) {ORACLE_STEP})"
    with pytest.raises(ScopeError):
        ubl("viaparam", "(= (sel s w) 0)", "(= (sel s w) 0)", deriv)


# ---------------------------------------------------------------- Safe / RSafe

SAFE_CFG = parse_program("values nat 2;\nlocations a b c;\n").config


def asrt(text):
    return parse_assertion(read_one(text))


def test_safe_examples():
    assert check_safe(SAFE_CFG, asrt("(= (sel s a) (sel s b))"), ("c",)) is None
    cex = check_safe(SAFE_CFG, asrt("(= (sel s a) 0)"), ("a",))
    assert cex is not None
    assert check_safe(SAFE_CFG, asrt("(q (sel s a))"), ("b",), mode=QUANT) is None
    assert check_safe(SAFE_CFG, asrt("(q (sel s a))"), ("a",), mode=QUANT) is not None


def test_rsafe_examples():
    two = parse_program("values nat 2;\nlocations a b;\n").config
    for sigma in [(), ("a",), ("b",), ("a", "b")]:
        assert check_rsafe(two, asrt("(= s1 s2)"), sigma) is None
    assert check_rsafe(two, asrt("(= (sel s1 b) (sel s2 b))"), ("a",)) is not None
    assert check_rsafe(two, asrt("(= (sel s1 a) (sel s2 a))"), ("a",)) is None
    # one-sided relations still constrain agreement on sigma
    assert check_rsafe(two, asrt("(= (sel s1 b) 0)"), ("a",)) is not None
    assert check_rsafe(two, asrt("(= (sel s1 b) 0)"), ()) is None


# ---------------------------------------------------------------- HO-EXP

EXP = parse_program("""values nat 4;
locations a b;
dist u4 : unit -> nat(3) = uniform 4;
def s4 : T[{}; 0] nat(3) = sample u4
""")


def exp(pre, post, deriv, grade=None):
    return check_proof(EXP, proof("exp", "s4", pre, post, deriv, grade))


def unif(U, P):
    return f"(UNIF-EXP (meta (U {U}) (P {P})))"


def test_unif_exp_with_zero_frame():
    cert = exp("(scale 1/2 top)", "(times (iverson (member v 0 1)) top)", unif("0 1", "top"))
    assert cert.grade == "0"
    # the quantitative top is the constant 0
    f = Compiler(EXP.config, QUANT).assertion(asrt("(scale 1/2 top)"))
    assert f({"s": (0, 0)}) == 0


def test_unif_exp_out_of_range():
    with pytest.raises(RangeError):
        exp("(scale 1/4 top)", "(times (iverson (member v 5)) top)", unif("5", "top"))


def test_lin_exp_doubles_a_triple():
    P, Q = "(scale 1/2 (q 1))", "(times (iverson (member v 0 1)) (q 1))"
    leaf = unif("0 1", "(q 1)")
    cert = exp(f"(plus {P} {P})", f"(plus {Q} {Q})", f"(LIN-EXP {leaf} {leaf})")
    assert cert.grade == "0"
    report = validate_proof(EXP, proof("exp", "s4", f"(plus {P} {P})", f"(plus {Q} {Q})",
                                       f"(LIN-EXP {leaf} {leaf})"))
    assert report.ok and report.memories_checked == 16


def test_bloom_pre_expectation(certs):
    assert certs["bloom"].grade == "0"
    assert certs["bloom"].logic == "exp"


# ---------------------------------------------------------------- HO-RPL

RPL = parse_program("""values nat 8;
locations c;
dist u8 : unit -> nat(7) = uniform 8;
dist u2 : unit -> nat(7) = uniform 2;
dist ex : nat(7) -> nat(7) = uniform 8 except;
def one : T[{}; 0] nat(7) = unit 1
def sk : T[{}; 0] unit = skip
def s8 : T[{}; 0] nat(7) = sample u8
def s2 : T[{}; 0] nat(7) = sample u2
def e0 : T[{}; 0] nat(7) = sample ex(0)
def e1 : T[{}; 0] nat(7) = sample ex(1)
def br1 : T[{c}; 0] nat(7) = let b = read c in if b == 0 then unit 1 else unit 2
""")


def rpl(progs, pre, post, deriv, grade=None, prog=RPL):
    return check_proof(prog, proof("rpl", progs, pre, post, deriv, grade))


def test_unit_r():
    cert = rpl("one one", "true", "(meet (= v1 v2) true)",
               "(UNIT-R (meta (phi (= v1 v2)) (pre true)) (obligations (phi eval)))")
    assert cert.grade == "0"


def test_one_sided_unit():
    cert = rpl("one sk", "(= 1 1)", "(= v1 1)", "(L-UNIT-R)")
    assert cert.grade == "0"
    assert rpl("sk one", "(= 1 1)", "(= v2 1)", "(R-UNIT-R)").grade == "0"


def sample_r(g, pre="true"):
    return f"(SAMPLE-R (meta (pre {pre}) (grade {g})) (obligations (ratio eval)))"


def test_sample_r_grades():
    assert rpl("s8 s8", "true", "(meet (= v1 v2) true)", sample_r(0)).grade == "0"
    cert = rpl("s2 s8", "true", "(meet (= v1 v2) true)", sample_r("3/4"))
    assert cert.grade == "3/4"
    with pytest.raises(ObligationFailed):
        rpl("s2 s8", "true", "(meet (= v1 v2) true)", sample_r("1/2"))
    d1, d2 = run(RPL.config, S.Sample("u2"), (0,)), run(RPL.config, S.Sample("u8"), (0,))
    assert statistical_distance(d1, d2) == Fraction(3, 4)
    report = validate_proof(RPL, proof("rpl", "s2 s8", "true", "(meet (= v1 v2) true)", sample_r("3/4")))
    assert report.ok


def test_sample_r_needs_nested_supports():
    assert rpl("e0 s8", "true", "(meet (= v1 v2) true)", sample_r("1/8")).grade == "1/8"
    with pytest.raises(SampleError):
        rpl("e0 e1", "true", "(meet (= v1 v2) true)", sample_r("1/2"))


def test_mcase_r_requires_synchronization():
    mlet = ("(MLET-R (READ-R) (MCASE-R {meta}{obs} "
            "(UNIT-R (meta (phi (= v1 v2)) (pre true)) (obligations (phi eval))) "
            "(UNIT-R (meta (phi (= v1 v2)) (pre true)) (obligations (phi eval)))))")
    pre = "(and (= b (sel s1 c)) (= b' (sel s2 c)) (= (sel s1 c) (sel s2 c)))"
    good = mlet.format(meta=f"(meta (pre {pre})) ", obs="(obligations (sync eval) (pre eval))")
    root = "(CONSEQ-R (meta (pre (= (sel s1 c) (sel s2 c)))) (obligations (pre eval)) {})"
    cert = rpl("br1 br1", "(= (sel s1 c) (sel s2 c))", "(meet (= v1 v2) true)", root.format(good))
    assert cert.grade == "0"
    missing = mlet.format(meta=f"(meta (pre {pre})) ", obs="(obligations (pre eval))")
    with pytest.raises(MissingObligation):
        rpl("br1 br1", "(= (sel s1 c) (sel s2 c))", "(meet (= v1 v2) true)", root.format(missing))
    # without related inputs the branches can diverge
    with pytest.raises(ObligationFailed):
        rpl("br1 br1", "true", "(meet (= v1 v2) true)",
            "(CONSEQ-R (meta (pre true)) (obligations (pre eval)) "
            + mlet.format(meta="(meta (pre (and (= b (sel s1 c)) (= b' (sel s2 c))))) ",
                          obs="(obligations (sync eval) (pre eval))") + ")")


ADVR = parse_program("""values nat 8;
locations q;
dist u8 : unit -> nat(7) = uniform 8;
dist ex8 : nat(7) -> nat(7) = uniform 8 except;
adversary B : forall 'r. (nat(7) -> T[{'r}; 1] nat(7)) -> T[{'r, q}; 2] bool;
impl probe of B = fun (o : nat(7) -> T[{'r}; 1] nat(7)) => let y = o 3 in let z = o 4 in unit (y == 3)
def g1 : T[{q}; 2] bool = B (fun (x : nat(7)) => sample ex8(x))
def g2 : T[{q}; 2] bool = B (fun (x : nat(7)) => sample u8)
""")


def test_adv_r_scales_the_step_grade():
    script = proof("rpl", "g1 g2", "(= s1 s2)", "(meet (inj (= v1 v2)) (inj (= s1 s2)))",
                   "(ADV-R (meta (inv (= s1 s2)) (delta 1/8)) (obligations (rsafe eval)) "
                   "(SAMPLE-R (meta (pre (= s1 s2)) (grade 1/8)) (obligations (ratio eval))))")
    cert = check_proof(ADVR, script)
    assert cert.grade == "1/4"
    report = validate_proof(ADVR, script, instances=["probe"])
    assert report.ok


def test_eq_tau():
    v1, v2 = S.Var("v1"), S.Var("v2")
    assert eq_tau(S.BOOL, v1, v2) == S.Rel("=", (v1, v2))
    pair = eq_tau(S.TProd(S.BOOL, S.BOOL), v1, v2)
    assert pair == S.And(S.Rel("=", (S.Proj1(v1), S.Proj1(v2))), S.Rel("=", (S.Proj2(v1), S.Proj2(v2))))
    arrow = eq_tau(S.TArrow(S.TNat(1), S.BOOL), v1, v2)
    assert isinstance(arrow, S.PForall) and isinstance(arrow.body, S.PForall)


# ---------------------------------------------------------------- assertion semantics

ENV_CFG = parse_program("values nat 3;\nlocations a b c;\n").config
ENVS = [{"s": (i, j, 0), "v": k, "x": 1} for i in range(3) for j in range(3) for k in range(3)]


def qeval(a, env):
    return Compiler(ENV_CFG, QUANT).assertion(a)(env)


def beval(a, env):
    return Compiler(ENV_CFG, BOOL).assertion(a)(env)


@given(quant_assertions(NUM_TERMS), quant_assertions(NUM_TERMS))
@settings(max_examples=150, deadline=None)
def test_quant_connectives_are_max_and_min(p, q):
    for env in ENVS[::5]:
        a, b = qeval(p, env), qeval(q, env)
        assert qeval(S.Meet(p, q), env) == max(a, b)
        assert qeval(S.Join(p, q), env) == min(a, b)
        assert qeval(S.Plus(p, q), env) == a + b


@given(props(NUM_TERMS).map(S.Inj))
@settings(max_examples=100, deadline=None)
def test_quant_injection_and_iverson_ranges(inj):
    for env in ENVS[::3]:
        assert qeval(inj, env) in (0, INF)
        assert qeval(S.Iverson(inj.prop), env) in (0, 1)
        assert (qeval(inj, env) == 0) == (qeval(S.Iverson(inj.prop), env) == 1)


def test_quant_constants():
    env = ENVS[0]
    assert qeval(S.Top(), env) == 0 and qeval(S.Bot(), env) == INF


@given(bool_assertions(NUM_TERMS), bool_assertions(NUM_TERMS))
@settings(max_examples=150, deadline=None)
def test_bool_connectives(p, q):
    for env in ENVS[::5]:
        assert beval(S.Meet(p, q), env) == (beval(p, env) and beval(q, env))
        assert beval(S.Join(p, q), env) == (beval(p, env) or beval(q, env))


@given(quant_assertions(NUM_TERMS), quant_assertions(NUM_TERMS), st.fractions(0, 3))
@settings(max_examples=100, deadline=None)
def test_scaling_and_addition_are_monotone(p, q, k):
    for env in ENVS[::7]:
        a, b = qeval(p, env), qeval(q, env)
        if a <= b:
            assert qeval(S.Scale(Fraction(k), p), env) <= qeval(S.Scale(Fraction(k), q), env)
            assert qeval(S.Plus(p, p), env) <= qeval(S.Plus(q, p), env)


def test_dist_sanity():
    assert Dist.uniform(range(4)).prob(lambda x: x < 2) == Fraction(1, 2)
