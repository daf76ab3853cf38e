"""The eight end-to-end acceptance criteria; each prints a PASS/FAIL line in the terminal summary."""

import contextlib
import itertools
import random
import time
from fractions import Fraction

import pytest
from conftest import ACCEPTANCE, proof
from oracles import (
    lp_max_coupling, random_formula, random_pmf, random_relation, render, truth_table_rsafe, truth_table_safe,
)

from hoplog.discharge import check_rsafe, check_safe
from hoplog.kernel import check_proof
from hoplog.oracle import (
    check_approx_lifting, check_lifting_laws, check_monad_laws, instantiate, statistical_distance, validate_proof,
)
from hoplog.proof import (
    GradeError, GradeMismatch, MissingObligation, MonadicTypeError, RangeError, SafetyViolation, SampleError,
    SubstitutionMismatch,
)
from hoplog.semantics import Dist, expectation, run
from hoplog.sexp import parse_assertion, read_one
from hoplog.surface import parse_program
from hoplog.typecheck import EffectEscape, check_program


@contextlib.contextmanager
def criterion(n, title):
    state = {"detail": ""}
    try:
        yield state
    except BaseException as e:
        ACCEPTANCE[n] = (False, title, f"{type(e).__name__}: {str(e).splitlines()[0] if str(e) else ''}")
        print(f"FAIL {n}. {title}")
        raise
    ACCEPTANCE[n] = (True, title, state["detail"])
    print(f"PASS {n}. {title}: {state['detail']}")


def bound(k, l):
    return Fraction(k * (k + 1), 2 ** (l + 1))


def check_entry(corpus, name):
    entry = corpus[name]
    prog = parse_program(entry.program)
    check_program(prog)
    cert = check_proof(prog, entry.proof)
    return prog, cert, validate_proof(prog, entry.proof, cert)


def test_1_collision_bound(corpus):
    with criterion(1, "collision bound") as c:
        t0 = time.perf_counter()
        prog, cert, report = check_entry(corpus, "collision")
        secs = time.perf_counter() - t0
        assert Fraction(cert.grade) == bound(3, 3) == Fraction(3, 4)
        assert report.failures == [] and report.admitted_lemmas_falsified == []
        p = report.stats["distinct"]["failure_probability"]
        assert p == Fraction(11, 32) and p <= Fraction(3, 4)
        assert secs < 10
        c["detail"] = f"grade {cert.grade}, Pr = {p} over {report.memories_checked} memories, {secs:.1f}s"


def test_2_bloom_pollution(corpus):
    with criterion(2, "Bloom filter pollution") as c:
        t0 = time.perf_counter()
        prog, cert, report = check_entry(corpus, "bloom")
        cfg = prog.config
        t = instantiate(prog, prog.definition("pollute").body, "distinct")
        empty = tuple(0 if l.startswith("L") or l in ("r", "q") else None for l in cfg.locations)
        bits = [cfg.index(f"L[{i}]") for i in range(4)]
        e = expectation(run(cfg, t, empty), lambda o: Fraction(sum(o[1][i] for i in bits)))
        secs = time.perf_counter() - t0
        m, k = 4, 3
        assert cert.grade == "0"
        assert "sum-arr s L" in cert.pre and "(pow 3/4 (- 3 (sel s r)))" in cert.pre
        assert e == Fraction(37, 16) == m * (1 - Fraction(m - 1, m) ** k)
        assert report.ok and report.memories_checked > 0
        assert secs < 10
        c["detail"] = f"grade 0, E = {e}, F holds on {report.memories_checked} memories, {secs:.1f}s"


def test_3_prf_prp_switching(corpus):
    with criterion(3, "PRF/PRP switching") as c:
        t0 = time.perf_counter()
        prog, cert, report = check_entry(corpus, "prfprp")
        secs = time.perf_counter() - t0
        assert Fraction(cert.grade) == bound(2, 2) == Fraction(3, 4)
        assert report.ok
        sd1 = report.stats["collide"]["statistical_distance"]
        sd0 = report.stats["constant"]["statistical_distance"]
        assert sd1 == Fraction(1, 4) <= Fraction(3, 4) and sd0 == 0
        assert secs < 30
        c["detail"] = f"grade {cert.grade}, SD = {sd1} and {sd0}, {secs:.1f}s"


def test_4_lifting_laws():
    with criterion(4, "lifting-law suite") as c:
        reports = {m: check_lifting_laws(m, trials=1000, seed=2024) for m in ("ubl", "exp", "rpl")}
        for r in reports.values():
            assert r["trials"] == 1000
            assert r["violations"] == 0, r
        c["detail"] = "1000 cases x 4 laws x 3 modes, 0 violations"


def test_5_monad_laws():
    with criterion(5, "monad-law suite") as c:
        r = check_monad_laws(trials=100, seed=2024)
        assert r["trials"] == 100 and r["violations"] == 0, r
        c["detail"] = "100 programs, 0 violations"


def test_6_coupling_oracle():
    with criterion(6, "coupling oracle equivalence") as c:
        rng = random.Random(6)
        eq = lambda x, y: x == y  # noqa: E731
        agree = 0
        for _ in range(200):
            p1, p2, R = random_pmf(rng), random_pmf(rng), random_relation(rng)
            d1, d2 = Dist(p1), Dist(p2)
            best = lp_max_coupling(p1, p2, R)
            res = check_approx_lifting(d1, d2, R, 1 - best)
            ok = res.holds and res.mass == best
            if best > 0:
                ok = ok and not check_approx_lifting(d1, d2, R, 1 - best + Fraction(-1, 101)).holds
            sd = statistical_distance(d1, d2)
            ok = ok and lp_max_coupling(p1, p2, eq) == 1 - sd
            ok = ok and check_approx_lifting(d1, d2, eq, sd).holds
            ok = ok and (sd == 0 or not check_approx_lifting(d1, d2, eq, sd - Fraction(1, 101)).holds)
            agree += ok
        assert agree == 200
        c["detail"] = f"{agree}/200 agree"


SAFE_PROG = parse_program("values nat 2;\nlocations a b c;\n")
LOCS = ["a", "b", "c"]


def test_7_safe_and_rsafe():
    with criterion(7, "Safe/RSafe checker") as c:
        cfg = SAFE_PROG.config
        rng = random.Random(7)
        sigmas = [tuple(s) for k in range(4) for s in itertools.combinations(LOCS, k)]
        agree = {"safe": 0, "rsafe": 0}
        for _ in range(500):
            f, sigma = random_formula(rng, LOCS), rng.choice(sigmas)
            got = check_safe(cfg, parse_assertion(read_one(render(f))), sigma) is None
            agree["safe"] += got == truth_table_safe(f, sigma, LOCS)
            g, sigma = random_formula(rng, LOCS, sides=("s1", "s2")), rng.choice(sigmas)
            got = check_rsafe(cfg, parse_assertion(read_one(render(g))), sigma) is None
            agree["rsafe"] += got == truth_table_rsafe(g, sigma, LOCS)
        assert agree == {"safe": 500, "rsafe": 500}
        eq_ab = parse_assertion(read_one("(= (sel s a) (sel s b))"))
        for sigma in sigmas:
            assert (check_safe(cfg, eq_ab, sigma) is None) == ("a" not in sigma and "b" not in sigma)
        c["detail"] = "500/500 Safe, 500/500 RSafe, s[a]=s[b] instances hold"


# ---------------------------------------------------------------- 8: rejections

KPROG = parse_program("""values nat 8 + none;
locations a b;
dist u8 : unit -> nat(7) = uniform 8;
dist u4 : unit -> nat(3) = uniform 4;
def wr : T[{a}; 0] unit = write a 1
def s8 : T[{}; 0] nat(7) = sample u8
def twice : T[{}; 0] nat(3) = let x = sample u4 in sample u4
def pick (b : bool) : T[{}; 0] nat(7) = if b then sample u8 else unit 1
""")

ADV_TYPES = """values nat 2 + none;
locations a b;
adversary A : forall 'r. (nat(1) -> T[{'r}; 1] val) -> T[{'r, a}; 2] bool;
def escape : T[{a}; 2] bool = A (fun (x : nat(1)) => read b)
"""

UBL = """values nat 8 + none;
locations w q;
dist u8 : unit -> nat(7) = uniform 8;
adversary A : forall 'r. (nat(7) -> T[{'r}; 1] unit) -> T[{'r, q}; 3] unit;
impl thrice of A = fun (o : nat(7) -> T[{'r}; 1] unit) => o 1; q := 1; o 1; o 2
def orc (x : nat(7)) : T[{w}; 0] unit = let z = sample u8 in if z == x then w := 1 else unit ()
def game : T[{w, q}; 3] unit = A orc
"""

RPL = parse_program("""values nat 8;
locations c;
dist u8 : unit -> nat(7) = uniform 8;
dist ex : nat(7) -> nat(7) = uniform 8 except;
def e0 : T[{}; 0] nat(7) = sample ex(0)
def e1 : T[{}; 0] nat(7) = sample ex(1)
def br1 : T[{c}; 0] nat(7) = let b = read c in if b == 0 then unit 1 else unit 2
""")

EXP = parse_program("""values nat 4;
locations a b;
dist u4 : unit -> nat(3) = uniform 4;
def s4 : T[{}; 0] nat(3) = sample u4
""")


def sample_ubl(phi, g, pre="true"):
    return f"(SAMPLE-UBL (meta (pre {pre}) (phi {phi}) (grade {g})) (obligations (ratio eval)))"


def sample4():
    return f"(CONSEQ (meta (post (meet true (<> v 0)))) (obligations (post eval)) {sample_ubl('(<> v 0)', '1/4')})"


SAMPLE8 = f"(CONSEQ (meta (post (meet true (<> v 0)))) (obligations (post eval)) {sample_ubl('(<> v 0)', '1/8')})"

STEP = ("(WP (meta (pre (= (sel s {l}) 0))) (obligations (pre eval)) "
        "(CONSEQ (meta (post (meet (= (sel s {l}) 0) (<> v x)))) (obligations (post eval)) "
        + sample_ubl("(<> v x)", "1/8", "(= (sel s {l}) 0)") + "))")


def conseq_reversal():
    check_proof(KPROG, proof("ubl", "s8", "true", "(meet true (<> v 0))",
                             f"(CONSEQ (meta (grade 1/4)) {sample_ubl('(<> v 0)', '1/2')})"))


def effect_escape():
    check_program(parse_program(ADV_TYPES), "escape")


def mcase_r_missing_sync():
    pre = "(and (= b (sel s1 c)) (= b' (sel s2 c)) (= (sel s1 c) (sel s2 c)))"
    unit = "(UNIT-R (meta (phi (= v1 v2)) (pre true)) (obligations (phi eval)))"
    d = (f"(CONSEQ-R (meta (pre (= (sel s1 c) (sel s2 c)))) (obligations (pre eval)) "
         f"(MLET-R (READ-R) (MCASE-R (meta (pre {pre})) (obligations (pre eval)) {unit} {unit})))")
    check_proof(RPL, proof("rpl", "br1 br1", "(= (sel s1 c) (sel s2 c))", "(meet (= v1 v2) true)", d))


def adv_monadic_result():
    src = (UBL.replace("-> T[{'r, q}; 3] unit;", "-> T[{'r, q}; 3] (T[{}; 0] bool);")
              .replace("def game : T[{w, q}; 3] unit", "def game : T[{w, q}; 3] (T[{}; 0] bool)"))
    d = f"(ADV-U (meta (inv (= (sel s w) 0)) (delta 1/8)) (obligations (safe eval)) {STEP.format(l='w')})"
    check_proof(parse_program(src), proof("ubl", "game", "(= (sel s w) 0)", "(= (sel s w) 0)", d))


def mlet_under_claim():
    d = f"(CONSEQ (meta (pre true)) (obligations (pre eval)) (MLET-U (meta (grade 1/3)) {sample4()} {sample4()}))"
    check_proof(KPROG, proof("ubl", "twice", "true", "(<> v 0)", d))


def mcase_u_mismatch():
    d = f"(CONSEQ (meta (pre true)) (obligations (pre eval)) (MCASE-U {SAMPLE8} (UNIT-U)))"
    check_proof(KPROG, proof("ubl", "pick", "true", "(<> v 0)", d))


def write_u_wrong_pre():
    check_proof(KPROG, proof("ubl", "wr", "(= (sel s a) 0)", "(= (sel s a) 0)",
                             "(WRITE-U (meta (pre (= (sel s a) 0))))"))


def sample_r_incomparable():
    check_proof(RPL, proof("rpl", "e0 e1", "true", "(meet (= v1 v2) true)",
                           "(SAMPLE-R (meta (pre true) (grade 1/2)) (obligations (ratio eval)))"))


def unif_exp_out_of_range():
    check_proof(EXP, proof("exp", "s4", "(scale 1/4 top)", "(times (iverson (member v 5)) top)",
                           "(UNIF-EXP (meta (U 5) (P top)))"))


def adv_u_unsafe():
    d = f"(ADV-U (meta (inv (= (sel s q) 0)) (delta 1/8)) (obligations (safe eval)) {STEP.format(l='q')})"
    check_proof(parse_program(UBL), proof("ubl", "game", "(= (sel s q) 0)", "(= (sel s q) 0)", d))


NEGATIVES = [
    ("CONSEQ-U grade reversal", conseq_reversal, GradeError),
    ("effect escape in adversary typing", effect_escape, EffectEscape),
    ("MCASE-R without b1 = b2", mcase_r_missing_sync, MissingObligation),
    ("monadic result type in ADV-U", adv_monadic_result, MonadicTypeError),
    ("MLET-U claimed grade below the sum", mlet_under_claim, GradeError),
    ("MCASE-U branch grade mismatch", mcase_u_mismatch, GradeMismatch),
    ("WRITE-U with the wrong pre", write_u_wrong_pre, SubstitutionMismatch),
    ("SAMPLE-R with incomparable supports", sample_r_incomparable, SampleError),
    ("UNIF-EXP value outside the range", unif_exp_out_of_range, RangeError),
    ("ADV-U invariant reading private state", adv_u_unsafe, SafetyViolation),
]


def test_8_negative_cases():
    with criterion(8, "rule rejections") as c:
        wrong = []
        for label, fn, err in NEGATIVES:
            try:
                fn()
            except err:
                continue
            except Exception as e:  # noqa: BLE001
                wrong.append(f"{label}: {type(e).__name__}")
            else:
                wrong.append(f"{label}: accepted")
        assert not wrong, wrong
        c["detail"] = f"{len(NEGATIVES)}/{len(NEGATIVES)} rejected with the named error"


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
