"""Rules specific to the three logics: sampling, adversaries, linearity and the relational rules."""

from __future__ import annotations

from fractions import Fraction

from . import sexp as X
from . import syntax as S
from .assertions import BOOL, Compiler, eq_tau
from .discharge import antecedent_of, forall
from .kernel import (RESERVED, Checker, Result, balance, eq_ff, eq_tt, head, parse_node, pick, rule)
from .proof import (Derivation, GradeError, GradeMismatch, MonadicTypeError, RangeError, SafetyViolation,
                    SampleError, ScopeError, ScriptError, ShapeError, gadd, gscale, show_grade, _le)
from .semantics import INF
from .typecheck import AdversaryMismatch, adversary_shape

UNARY = ("ubl", "exp")
ZERO = Fraction(0)


def _leaf(name, g=ZERO):
    return Derivation(name, g, "leaf", base=g)


def has_monad(ty: S.Type) -> bool:
    if isinstance(ty, S.TMon):
        return True
    if isinstance(ty, (S.TArrow,)):
        return has_monad(ty.dom) or has_monad(ty.cod)
    if isinstance(ty, S.TProd):
        return has_monad(ty.left) or has_monad(ty.right)
    if isinstance(ty, S.TForall):
        return True
    return False


def _uniform(k: Checker, node, t: S.Sample):
    decl = k.cfg.dists.get(t.dist)
    if decl is None:
        raise SampleError(f"unknown distribution {t.dist}", node.rule, node.path)
    if decl.kind not in ("uniform", "uniform_except"):
        raise SampleError(f"{t.dist} is not uniform over a finite set", node.rule, node.path)
    return decl


# ---------------------------------------------------------------- HO-UBL


@rule("SAMPLE-UBL", "ubl")
def sample_ubl(k: Checker, node, goal):
    t = k.term(node, goal, S.Sample)
    k.children(node, 0)
    decl = _uniform(k, node, t)
    P = k.meta_assertion(node, "pre")
    phi = k.meta_prop(node, "phi")
    if "grade" not in node.meta:
        raise ScriptError("SAMPLE-UBL needs (meta (grade g))", node.rule, node.path)
    g = k.grade_meta(node, "grade")
    if g == INF or not 0 <= g <= 1:
        raise SampleError("the failure probability must lie in [0, 1]", node.rule, node.path, actual=g)
    if "v" in S.free_vars(P):
        raise ScopeError("the precondition may not mention the sampled value", node.rule, node.path, actual=P)
    k.require_same(node, "postcondition", S.Meet(P, S.Inj(phi)), goal.post)
    cfg = k.cfg
    gamma = {**goal.gamma, "s": S.MEM}
    comp = Compiler(cfg, BOOL)
    pf, phif = comp.assertion(P), comp.prop(phi)
    argfs = [comp.term(a) for a in t.args]

    def body(env):
        if not pf(env):
            return True
        B = decl.support_set(tuple(f(env) for f in argfs))
        good = sum(1 for b in sorted(B) if phif({**env, "v": b}))
        if Fraction(good, len(B)) >= 1 - g:
            return True
        return f"only {good} of {len(B)} samples satisfy phi"

    text = f"{X.show_assertion(P)} => |{{v in {t.dist} | {X.show_prop(phi)}}}| >= (1 - {show_grade(g)})·|support|"
    k.oblige(node, "ratio", "ratio", goal, gamma=gamma,
             extra={"text": text,
                    "check": lambda: forall(cfg, gamma, [P, phi, *t.args], antecedent_of(goal.psi, P), body,
                                            bound={"v"})})
    return Result(P, g, _leaf("SAMPLE-UBL", g))


# ---------------------------------------------------------------- HO-EXP


@rule("LIN-EXP", "exp")
def lin_exp(k: Checker, node, goal):
    c1, c2 = k.children(node, 2)
    if not isinstance(goal.post, S.Plus):
        raise ShapeError("LIN-EXP needs a postcondition Q1 + Q2", node.rule, node.path, actual=goal.post)
    r1 = k.check(c1, k.sub(goal, post=goal.post.left))
    r2 = k.check(c2, k.sub(goal, post=goal.post.right))
    g = gadd(r1.grade, r2.grade)
    return Result(S.Plus(r1.pre, r2.pre), g, Derivation("LIN-EXP", g, "sum", [r1.deriv, r2.deriv]))


def prop_to_term(p: S.Prop) -> S.Term:
    if isinstance(p, S.PTrue):
        return S.TRUE
    if isinstance(p, S.PFalse):
        return S.FALSE
    if isinstance(p, S.And):
        return S.Prim("and", (prop_to_term(p.left), prop_to_term(p.right)))
    if isinstance(p, S.Or):
        return S.Prim("or", (prop_to_term(p.left), prop_to_term(p.right)))
    if isinstance(p, S.Not):
        return S.Prim("not", (prop_to_term(p.arg),))
    if isinstance(p, S.Implies):
        return S.Prim("or", (S.Prim("not", (prop_to_term(p.left),)), prop_to_term(p.right)))
    if isinstance(p, S.Rel) and p.name not in ("holds", "member"):
        return S.Prim(p.name, p.args)
    if isinstance(p, S.Rel) and p.name == "holds":
        return p.args[0]
    raise ScriptError(f"set comprehension condition cannot be evaluated as a term: {X.show_prop(p)}")


def unif_set(k: Checker, node, K: int):
    """The meta U: a list of numerals or a comprehension (i) cond; returns (membership prop of v, size term or int)."""
    raw = node.meta.get("U")
    if raw is None:
        raise ScriptError("UNIF-EXP needs (meta (U ...))", node.rule, node.path)
    if len(raw) == 2 and isinstance(raw[0], list):
        (var,), cond_raw = raw[0], raw[1]
        cond = X.parse_prop(cond_raw)
        member = S.substitute(cond, {var: S.Var("v")})
        cterm = prop_to_term(cond)
        count = None
        for j in range(K):
            one = S.Case(S.substitute(cterm, {var: S.num(j) if j else S.Zero()}), S.num(1), S.Zero())
            count = one if count is None else S.Prim("+", (count, one))
        return member, count
    elems = []
    for x in raw:
        if not X.is_num(x) or Fraction(x).denominator != 1:
            raise RangeError(f"U must list naturals, found {X.show(x)}", node.rule, node.path)
        n = int(x)
        if not 0 <= n < K:
            raise RangeError(f"{n} is outside the range 0..{K - 1} of the sampled distribution", node.rule, node.path)
        if n not in elems:
            elems.append(n)
    lits = tuple(S.num(n) if n else S.Zero() for n in sorted(elems))
    return S.Rel("member", (S.Var("v"),) + lits), len(elems)


@rule("UNIF-EXP", "exp")
def unif_exp(k: Checker, node, goal):
    t = k.term(node, goal, S.Sample)
    k.children(node, 0)
    decl = _uniform(k, node, t)
    if decl.kind != "uniform" or t.args:
        raise SampleError("UNIF-EXP samples a fixed uniform distribution over 0..K-1", node.rule, node.path)
    K = decl.size
    member, size = unif_set(k, node, K)
    P = k.meta_assertion(node, "P")
    if "v" in S.free_vars(P):
        raise ScopeError("the frame P may not mention the sampled value", node.rule, node.path, actual=P)
    k.require_same(node, "postcondition", S.Times(S.Iverson(member), P), goal.post)
    if isinstance(size, int):
        pre = S.Scale(Fraction(size, K), P)
    else:
        pre = S.Times(S.Atom("q", (S.Prim("/", (size, S.num(K))),)), P)
    return Result(pre, ZERO, _leaf("UNIF-EXP"))


@rule("UNIF-SPLIT", "exp")
def unif_split(k: Checker, node, goal):
    """LIN-EXP over UNIF-EXP on every singleton, then CONSEQ back to Q."""
    t = k.term(node, goal, S.Sample)
    k.children(node, 0)
    decl = _uniform(k, node, t)
    if decl.kind != "uniform" or t.args:
        raise SampleError("UNIF-SPLIT samples a fixed uniform distribution over 0..K-1", node.rule, node.path)
    K = decl.size
    Q = goal.post
    parts = []
    for u in range(K):
        lit = S.num(u) if u else S.Zero()
        parts.append((lit, k.subst(Q, {"v": lit})))
    pre = None
    post = None
    deriv = None
    for lit, qu in reversed(parts):
        p_u = S.Scale(Fraction(1, K), qu)
        q_u = S.Times(S.Iverson(S.Rel("member", (S.Var("v"), lit))), qu)
        leaf = _leaf("UNIF-EXP")
        if pre is None:
            pre, post, deriv = p_u, q_u, leaf
        else:
            pre, post = S.Plus(p_u, pre), S.Plus(q_u, post)
            deriv = Derivation("LIN-EXP", ZERO, "sum", [leaf, deriv])
    vty = goal.types[0]
    if not (isinstance(vty, S.TNat) and vty.bound == K - 1):
        # the split covers every value only when v ranges over 0..K-1
        k.entail(node, "post", goal, post, Q)
    return Result(pre, ZERO, Derivation("CONSEQ", ZERO, "weaken", [deriv]))


# ---------------------------------------------------------------- adversaries


def _family(k: Checker, node, count: int):
    """Invariants P_0..P_count and grades δ_0..δ_{count-1} from (index i) (inv ..) (delta ..)."""
    idx = node.get("index")
    if "inv" not in node.meta or "delta" not in node.meta:
        raise ScriptError(f"{node.rule} needs (meta (inv A) (delta d)) and optionally (index i)", node.rule, node.path)
    if idx is None:
        P = k.meta_assertion(node, "inv")
        d = k.grade_meta(node, "delta")
        return None, [P] * (count + 1), [d] * count
    if not isinstance(idx, str):
        raise ScriptError("(index i) takes a symbol", node.rule, node.path)
    invs = [k.meta_assertion(node, "inv", env={idx: str(n)}) for n in range(count + 1)]
    deltas = [k.grade_meta(node, "delta", env={idx: Fraction(n)}) for n in range(count)]
    return idx, invs, deltas


def _instantiate(node, idx, n):
    (child,) = node.children
    if idx is None:
        return child
    raw = X.fold_arith(X.substitute_symbols(child.raw, {idx: str(n)}))
    return parse_node(raw, f"{child.path}[{idx}={n}]")


def _adversary(k: Checker, node, t):
    t = head(t)
    if not isinstance(t, S.App):
        raise ShapeError(f"{node.rule} expects an adversary applied to an oracle", node.rule, node.path, actual=t)
    if isinstance(t.fn, S.Var):
        raise ScopeError(f"{t.fn.name} is a program variable; adversaries must come from the adversary context",
                         node.rule, node.path, actual=t)
    if not isinstance(t.fn, S.AdvVar):
        raise ShapeError(f"{node.rule} expects an adversary applied to an oracle", node.rule, node.path, actual=t)
    name = t.fn.name
    advs = k.prog.adversaries
    if name not in advs:
        raise ScopeError(f"adversary {name} is not declared", node.rule, node.path)
    if len(advs) != 1:
        raise ScopeError("adversary rules need exactly one declared adversary", node.rule, node.path)
    try:
        shape = adversary_shape(advs[name])
    except AdversaryMismatch as e:
        raise ShapeError(str(e), node.rule, node.path) from None
    for what, ty in (("argument", shape.sigma), ("oracle result", shape.tau), ("adversary result", shape.tauprime)):
        if has_monad(ty):
            raise MonadicTypeError(f"the {what} type must be non-monadic", node.rule, node.path, actual=ty)
    if shape.private.vars:
        raise ShapeError("the adversary's private region must be a set of locations", node.rule, node.path)
    oracle = head(t.arg)
    if not isinstance(oracle, S.Lam):
        raise ShapeError("the oracle must be a function literal (or a definition of one)", node.rule, node.path,
                         actual=oracle)
    return name, shape, oracle


def _check_family_scope(node, invs, allowed):
    for P in invs:
        extra = S.free_vars(P) - allowed
        if extra:
            raise ScopeError(f"adversary invariant mentions {', '.join(sorted(extra))}", node.rule, node.path, actual=P)


def _monotone(k: Checker, node, goal, invs, gamma):
    for n in range(len(invs) - 1):
        if not k.same(invs[n], invs[n + 1]):
            k.oblige(node, "mono", "entail", goal, lhs=invs[n], rhs=invs[n + 1], gamma=gamma, psi=())


def _family_grade(node, idx, deltas, child_results):
    if idx is None:
        total = gscale(len(deltas), deltas[0]) if deltas else ZERO
        base = _leaf("ADV-base")
        d = Derivation(node.rule, total, "fold", [base, child_results[0].deriv], factor=len(deltas))
        return total, d
    total = ZERO
    for x in deltas:
        total = gadd(total, x)
    return total, Derivation(node.rule, total, "sum", [r.deriv for r in child_results])


@rule("ADV-U", *UNARY)
def adv_u(k: Checker, node, goal):
    name, shape, oracle = _adversary(k, node, goal.terms[0])
    if len(node.children) != 1:
        raise ScriptError("ADV-U takes one premise (the oracle body)", node.rule, node.path)
    count = shape.kprime
    idx, invs, deltas = _family(k, node, count)
    _check_family_scope(node, invs, {"s"})
    x, body = oracle.var, oracle.body
    if x in RESERVED or x in goal.gamma:
        nx = pick(x, k.avoid(goal))
        body, x = S.substitute(body, {x: S.Var(nx)}), nx
    for p in goal.psi:
        if x in S.free_vars(p):
            raise ScopeError(f"oracle argument {x} occurs in the assumptions", node.rule, node.path)
    k.require_same(node, "postcondition", invs[-1], goal.post)
    sigma = tuple(sorted(shape.private.locs))
    seen = []
    for P in invs:
        if any(k.same(P, q) for q in seen):
            continue
        seen.append(P)
        k.oblige(node, "safe", "safe", goal, lhs=P, gamma={"s": S.MEM}, psi=(),
                 extra={"sigma": sigma}, error=SafetyViolation)
    _monotone(k, node, goal, invs, {"s": S.MEM})
    results = []
    rounds = 1 if idx is None else count
    for n in range(rounds):
        child = _instantiate(node, idx, n)
        sub = k.sub(goal, terms=(body,), types=(shape.tau,), post=invs[n + 1],
                    gamma={**goal.gamma, x: shape.sigma})
        r = k.check(child, sub)
        k.require_same(node, f"premise precondition (i={n})", invs[n], r.pre)
        if not _le(r.grade, deltas[n]):
            raise GradeError(f"oracle step {n} needs grade {show_grade(r.grade)} > δ_{n} = {show_grade(deltas[n])}",
                             node.rule, node.path, expected=r.grade, actual=deltas[n])
        if r.grade != deltas[n]:
            r = Result(r.pre, deltas[n], Derivation("CONSEQ", deltas[n], "weaken", [r.deriv]))
        results.append(r)
    total, d = _family_grade(node, idx, deltas, results)
    return Result(invs[0], total, d)


# ---------------------------------------------------------------- HO-RPL


def _both(k, node, goal, cls1, cls2=None):
    cls2 = cls2 or cls1
    t1, t2 = head(goal.terms[0]), head(goal.terms[1])
    if not isinstance(t1, cls1) or not isinstance(t2, cls2):
        raise ShapeError(f"{node.rule} does not match the shapes of the two terms", node.rule, node.path,
                         actual=t1 if not isinstance(t1, cls1) else t2)
    return t1, t2


def _as_unit(t):
    return S.UnitM(S.Star()) if isinstance(t, S.Skip) else t


def _unit_r(k: Checker, node, goal, a1, a2):
    k.children(node, 0)
    phi = k.meta_prop(node, "phi", required=False)
    if phi is None:
        return Result(k.subst(goal.post, {"v1": a1, "v2": a2}), ZERO, _leaf(node.rule))
    P = k.meta_assertion(node, "pre")
    if {"v1", "v2"} & S.free_vars(P):
        raise ScopeError("the frame P may not mention the results", node.rule, node.path, actual=P)
    k.require_same(node, "postcondition", S.Meet(S.Inj(phi), P), goal.post)
    k.oblige(node, "phi", "hol", goal, rhs=S.substitute(phi, {"v1": a1, "v2": a2}),
             gamma={**goal.gamma, "s1": S.MEM, "s2": S.MEM})
    return Result(P, ZERO, _leaf(node.rule))


@rule("UNIT-R", "rpl")
def unit_r(k: Checker, node, goal):
    t1, t2 = _both(k, node, goal, (S.UnitM, S.Skip))
    return _unit_r(k, node, goal, _as_unit(t1).arg, _as_unit(t2).arg)


@rule("L-UNIT-R", "rpl")
def l_unit_r(k: Checker, node, goal):
    t1, _ = _both(k, node, goal, S.UnitM, S.Skip)
    return _unit_r(k, node, goal, t1.arg, S.Star())


@rule("R-UNIT-R", "rpl")
def r_unit_r(k: Checker, node, goal):
    _, t2 = _both(k, node, goal, S.Skip, S.UnitM)
    return _unit_r(k, node, goal, S.Star(), t2.arg)


@rule("READ-R", "rpl")
def read_r(k: Checker, node, goal):
    t1, t2 = _both(k, node, goal, S.Read)
    k.children(node, 0)
    pre = k.subst(goal.post, {"v1": S.Select(S.Var("s1"), t1.loc), "v2": S.Select(S.Var("s2"), t2.loc)})
    claimed = k.meta_assertion(node, "pre", required=False)
    if claimed is not None:
        k.require_same(node, "precondition", pre, claimed)
    return Result(pre, ZERO, _leaf("READ-R"))


@rule("WRITE-R", "rpl")
def write_r(k: Checker, node, goal):
    t1, t2 = _both(k, node, goal, S.Write)
    k.children(node, 0)
    post = S.substitute(goal.post, {"v1": S.Star(), "v2": S.Star()})
    pre = k.subst(post, {"s1": S.Store(S.Var("s1"), t1.loc, t1.arg), "s2": S.Store(S.Var("s2"), t2.loc, t2.arg)})
    claimed = k.meta_assertion(node, "pre", required=False)
    if claimed is not None:
        k.require_same(node, "precondition", pre, claimed)
    return Result(pre, ZERO, _leaf("WRITE-R"))


def _bind_names(k, goal, x1, x2, body1, body2):
    avoid = k.avoid(goal)
    n1 = pick(x1 if x1 != "_" else "u", avoid)
    n2 = pick(x2 if x2 != "_" else "u", avoid | {n1})
    if x1 != "_" and n1 != x1:
        body1 = S.substitute(body1, {x1: S.Var(n1)})
    if x2 != "_" and n2 != x2:
        body2 = S.substitute(body2, {x2: S.Var(n2)})
    return n1, n2, body1, body2


def _mid(k, node, pre2, binding):
    if {"v1", "v2"} & S.free_vars(pre2):
        raise ScopeError("intermediate precondition mentions a result variable", node.rule, node.path, actual=pre2)
    mid = k.subst(pre2, binding)
    claimed = k.meta_assertion(node, "mid", required=False)
    if claimed is not None:
        k.require_same(node, "intermediate assertion", mid, claimed)
    return mid


@rule("MLET-R", "rpl")
def mlet_r(k: Checker, node, goal):
    t1, t2 = _both(k, node, goal, S.LetM)
    c1, c2 = k.children(node, 2)
    for x in (t1.var, t2.var):
        if x in S.free_vars(goal.post) and x not in goal.gamma:
            raise ScopeError(f"bound variable {x} occurs in the postcondition", node.rule, node.path)
    n1, n2, u1, u2 = _bind_names(k, goal, t1.var, t2.var, t1.body, t2.body)
    ty1 = k.result_type(t1.bound, goal.gamma, node)
    ty2 = k.result_type(t2.bound, goal.gamma, node)
    r2 = k.check(c2, k.sub(goal, terms=(u1, u2), gamma={**goal.gamma, n1: ty1, n2: ty2}))
    mid = _mid(k, node, r2.pre, {n1: S.Var("v1"), n2: S.Var("v2")})
    r1 = k.check(c1, k.sub(goal, terms=(t1.bound, t2.bound), types=(ty1, ty2), post=mid))
    g = gadd(r1.grade, r2.grade)
    return Result(r1.pre, g, Derivation("MLET-R", g, "sum", [r1.deriv, r2.deriv]))


def _one_sided_let(k: Checker, node, goal, left: bool):
    side = 0 if left else 1
    t = head(goal.terms[side])
    other = goal.terms[1 - side]
    if not isinstance(t, S.LetM):
        raise ShapeError(f"{node.rule} expects a let on the {'left' if left else 'right'}", node.rule, node.path,
                         actual=t)
    c1, c2 = k.children(node, 2)
    x = t.var
    if x != "_" and x in S.free_vars(other):
        raise ScopeError(f"bound variable {x} also occurs free on the other side", node.rule, node.path, actual=other)
    if x in S.free_vars(goal.post) and x not in goal.gamma:
        raise ScopeError(f"bound variable {x} occurs in the postcondition", node.rule, node.path)
    body = t.body
    nx = pick(x if x != "_" else "u", k.avoid(goal))
    if x != "_" and nx != x:
        body = S.substitute(body, {x: S.Var(nx)})
    ty = k.result_type(t.bound, goal.gamma, node)
    terms2 = (body, other) if left else (other, body)
    r2 = k.check(c2, k.sub(goal, terms=terms2, gamma={**goal.gamma, nx: ty}))
    vname = "v1" if left else "v2"
    mid = _mid(k, node, r2.pre, {nx: S.Var(vname)})
    terms1 = (t.bound, S.Skip()) if left else (S.Skip(), t.bound)
    types1 = (ty, S.UNIT) if left else (S.UNIT, ty)
    r1 = k.check(c1, k.sub(goal, terms=terms1, types=types1, post=mid))
    g = gadd(r1.grade, r2.grade)
    return Result(r1.pre, g, Derivation(node.rule, g, "sum", [r1.deriv, r2.deriv]))


rule("L-MLET-R", "rpl")(lambda k, node, goal: _one_sided_let(k, node, goal, True))
rule("R-MLET-R", "rpl")(lambda k, node, goal: _one_sided_let(k, node, goal, False))


def mcase_r(k: Checker, node, goal, balanced=False):
    t1, t2 = _both(k, node, goal, S.Case)
    c1, c2 = k.children(node, 2)
    b1, b2 = t1.guard, t2.guard
    if not (S.is_pure(b1) and S.is_pure(b2)):
        raise ShapeError("case guards must be pure", node.rule, node.path)
    Q = k.meta_assertion(node, "pre", required=False)
    both = {**goal.gamma, "s1": S.MEM, "s2": S.MEM}
    if Q is None:
        k.oblige(node, "sync", "hol", goal, rhs=S.Rel("=", (b1, b2)), gamma=both)
    else:
        # guards that read let-bound values agree under the claimed precondition
        k.oblige(node, "sync", "entail", goal, lhs=Q, rhs=S.Inj(S.Rel("=", (b1, b2))), gamma=both)
    r1 = k.check(c1, k.sub(goal, terms=(t1.then, t2.then), psi=goal.psi + (eq_tt(b1), eq_tt(b2))))
    r2 = k.check(c2, k.sub(goal, terms=(t1.else_, t2.else_), psi=goal.psi + (eq_ff(b1), eq_ff(b2))))
    if balanced:
        r1, r2 = balance(r1, r2, "MCASE-R")
    if r1.grade != r2.grade:
        raise GradeMismatch("both branches must carry the same grade", node.rule, node.path,
                            expected=r1.grade, actual=r2.grade)
    pre = S.Join(S.Meet(S.Inj(eq_tt(b1)), r1.pre), S.Meet(S.Inj(eq_ff(b1)), r2.pre))
    if Q is not None:
        k.entail(node, "pre", goal, Q, pre, gamma=both)
        pre = Q
    return Result(pre, r1.grade, Derivation("MCASE-R", r1.grade, "same", [r1.deriv, r2.deriv]))


rule("MCASE-R", "rpl")(mcase_r)
rule("MCASE-R*", "rpl")(lambda k, node, goal: mcase_r(k, node, goal, balanced=True))


@rule("SAMPLE-R", "rpl")
def sample_r(k: Checker, node, goal):
    t1, t2 = _both(k, node, goal, S.Sample)
    k.children(node, 0)
    d1, d2 = _uniform(k, node, t1), _uniform(k, node, t2)
    P = k.meta_assertion(node, "pre")
    if "grade" not in node.meta:
        raise ScriptError("SAMPLE-R needs (meta (grade g))", node.rule, node.path)
    g = k.grade_meta(node, "grade")
    if g == INF or not 0 <= g <= 1:
        raise SampleError("the grade must lie in [0, 1]", node.rule, node.path, actual=g)
    if {"v1", "v2"} & S.free_vars(P):
        raise ScopeError("the precondition may not mention the sampled values", node.rule, node.path, actual=P)
    k.require_same(node, "postcondition", S.Meet(S.Inj(S.Rel("=", (S.Var("v1"), S.Var("v2")))), P), goal.post)
    cfg = k.cfg
    gamma = {**goal.gamma, "s1": S.MEM, "s2": S.MEM}
    comp = Compiler(cfg, BOOL)
    pf = comp.assertion(P)
    a1 = [comp.term(a) for a in t1.args]
    a2 = [comp.term(a) for a in t2.args]
    problem = {}

    def body(env):
        if not pf(env):
            return True
        B1 = d1.support_set(tuple(f(env) for f in a1))
        B2 = d2.support_set(tuple(f(env) for f in a2))
        if not (B1 <= B2 or B2 <= B1):
            problem["env"] = env
            return f"supports {sorted(B1)} and {sorted(B2)} are incomparable"
        lo, hi = min(len(B1), len(B2)), max(len(B1), len(B2))
        if 1 - Fraction(lo, hi) <= g:
            return True
        return f"distance {1 - Fraction(lo, hi)} exceeds {show_grade(g)}"

    def check():
        cex = forall(cfg, gamma, [P, *t1.args, *t2.args], antecedent_of(goal.psi, P), body)
        if cex is not None and "env" in problem:
            raise SampleError(f"uniform supports must be nested; counterexample: {cex.show(cfg)}",
                              node.rule, node.path)
        return cex

    text = f"{X.show_assertion(P)} => nested supports with 1 - |B1|/|B2| <= {show_grade(g)}"
    k.oblige(node, "ratio", "coupling", goal, gamma=gamma, extra={"text": text, "check": check})
    return Result(P, g, _leaf("SAMPLE-R", g))


@rule("ADV-R", "rpl")
def adv_r(k: Checker, node, goal):
    name1, shape, o1 = _adversary(k, node, goal.terms[0])
    name2, _, o2 = _adversary(k, node, goal.terms[1])
    if name1 != name2:
        raise ShapeError("both sides must apply the same adversary", node.rule, node.path)
    if len(node.children) != 1:
        raise ScriptError("ADV-R takes one premise (the two oracle bodies)", node.rule, node.path)
    count = shape.kprime
    idx, invs, deltas = _family(k, node, count)
    _check_family_scope(node, invs, {"s1", "s2"})
    x1, x2, b1, b2 = _bind_names(k, goal, o1.var, o2.var, o1.body, o2.body)
    if x1 in S.free_vars(b2) or x2 in S.free_vars(b1):
        raise ScopeError("oracle arguments leak into the other oracle", node.rule, node.path)
    eq_res = lambda ty: S.Inj(eq_tau(ty, S.Var("v1"), S.Var("v2")))  # noqa: E731
    k.require_same(node, "postcondition", S.Meet(eq_res(shape.tauprime), invs[-1]), goal.post)
    sigma = tuple(sorted(shape.private.locs))
    seen = []
    for P in invs:
        if any(k.same(P, q) for q in seen):
            continue
        seen.append(P)
        k.oblige(node, "rsafe", "rsafe", goal, lhs=P, gamma={"s1": S.MEM, "s2": S.MEM}, psi=(),
                 extra={"sigma": sigma}, error=SafetyViolation)
    _monotone(k, node, goal, invs, {"s1": S.MEM, "s2": S.MEM})
    results = []
    rounds = 1 if idx is None else count
    arg_eq = eq_tau(shape.sigma, S.Var(x1), S.Var(x2))
    for n in range(rounds):
        child = _instantiate(node, idx, n)
        sub = k.sub(goal, terms=(b1, b2), types=(shape.tau, shape.tau),
                    post=S.Meet(eq_res(shape.tau), invs[n + 1]),
                    gamma={**goal.gamma, x1: shape.sigma, x2: shape.sigma},
                    psi=goal.psi + (arg_eq,))
        r = k.check(child, sub)
        k.require_same(node, f"premise precondition (i={n})", invs[n], r.pre)
        if not _le(r.grade, deltas[n]):
            raise GradeError(f"oracle step {n} needs grade {show_grade(r.grade)} > δ_{n} = {show_grade(deltas[n])}",
                             node.rule, node.path, expected=r.grade, actual=deltas[n])
        if r.grade != deltas[n]:
            r = Result(r.pre, deltas[n], Derivation("CONSEQ", deltas[n], "weaken", [r.deriv]))
        results.append(r)
    total, d = _family_grade(node, idx, deltas, results)
    return Result(invs[0], total, d)
