"""Proof checking for generalized Hoare triples and relational quadruples.

A derivation is checked goal-directed: each node receives the term(s), the
contexts and the postcondition it must establish, and returns the
precondition and grade it proves.  Rules whose premises are sequenced
(let, fold) check the later premise first so that its precondition
becomes the earlier premise's postcondition.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from fractions import Fraction

from . import sexp as X
from . import syntax as S
from .assertions import BOOL, QUANT, AssertionError_, check_mode, normalize, same
from .config import ConfigError, ProgramConfig
from .discharge import (DischargeError, check_entailment, check_prop, check_rsafe, check_safe)
from .proof import (Derivation, GradeError, GradeMismatch, Goal, MissingObligation, ModeError, Obligation,
                    ObligationFailed, ProofError, ProofNode, ScopeError, ScriptError,
                    ShapeError, SubstitutionMismatch, gadd, gscale, recompute_grades, show_grade, _le)
from .semantics import INF, EvalError
from .typecheck import Ctx, TypeChecker, TypeCheckError

RESERVED = {"s", "v", "s1", "s2", "v1", "v2"}
MODES = ("eval", "arith", "admit")


# ---------------------------------------------------------------- logic instances


@dataclass(frozen=True)
class LogicInstance:
    name: str
    mode: str            # assertion semantics: BOOL or QUANT
    relational: bool
    rules: frozenset     # rule names available in this logic

    def wf(self, a: S.Assertion, what: str = "assertion"):
        try:
            check_mode(a, self.mode)
        except AssertionError_ as e:
            raise ModeError(f"{what}: {e}") from None


RULES: dict = {}  # name -> (function, logics)


def rule(name: str, *logics: str):
    def deco(f):
        RULES[name] = (f, frozenset(logics))
        return f

    return deco


def instance(name: str) -> LogicInstance:
    table = {"ubl": (BOOL, False), "exp": (QUANT, False), "rpl": (BOOL, True)}
    if name not in table:
        raise ScriptError(f"unknown logic {name!r}; expected ubl, exp or rpl")
    mode, rel = table[name]
    rules = frozenset(r for r, (_, ls) in RULES.items() if name in ls)
    return LogicInstance(name, mode, rel, rules)


@dataclass
class Result:
    pre: S.Assertion
    grade: object
    deriv: Derivation


# ---------------------------------------------------------------- script parsing


def parse_node(x, path: str = "root") -> ProofNode:
    if not isinstance(x, list) or not x or not isinstance(x[0], str):
        raise ScriptError(f"expected a rule application, found {X.show(x) if x is not None else 'nothing'}", path=path)
    node = ProofNode(rule=x[0], path=path, raw=x)
    kids = []
    for item in x[1:]:
        if isinstance(item, list) and item and item[0] == "meta":
            for entry in item[1:]:
                if not isinstance(entry, list) or not entry or not isinstance(entry[0], str):
                    raise ScriptError(f"bad meta entry {X.show(entry)}", node.rule, path)
                node.meta[entry[0]] = entry[1:]
        elif isinstance(item, list) and item and item[0] == "obligations":
            for entry in item[1:]:
                if not isinstance(entry, list) or len(entry) < 2 or entry[1] not in MODES:
                    raise ScriptError(f"bad obligation entry {X.show(entry)}; use (label eval|arith|admit [name])",
                                      node.rule, path)
                if entry[1] == "admit" and len(entry) < 3:
                    raise ScriptError(f"admitted obligation {entry[0]} needs a lemma name", node.rule, path)
                node.obligations[entry[0]] = (entry[1], entry[2] if len(entry) > 2 else None)
        else:
            kids.append(item)
    node.children = [parse_node(k, f"{path}.{i}") for i, k in enumerate(kids)]
    return node


@dataclass
class Script:
    logic: str
    programs: list
    macros: dict
    params: list
    assume: list
    pre: object
    post: object
    grade: object
    root: object            # raw S-expression
    instances: list = field(default_factory=list)
    init: list = field(default_factory=list)
    source: str = ""


def load_script(text: str) -> Script:
    forms = X.read_all(text)
    if len(forms) != 1 or not isinstance(forms[0], list) or forms[0][:1] != ["proof"]:
        raise ScriptError("a proof script is a single (proof ...) form")
    macros: dict = {}
    fields: dict = {}
    assume = []
    for item in forms[0][1:]:
        if not isinstance(item, list) or not item:
            raise ScriptError(f"unexpected {X.show(item)} in proof script")
        head = item[0]
        if head == "define":
            if len(item) == 4:
                macros[item[1]] = (list(item[2]), X.expand_macros(item[3], macros))
            elif len(item) == 3:
                macros[item[1]] = ([], X.expand_macros(item[2], macros))
            else:
                raise ScriptError(f"bad define {X.show(item)}")
        elif head == "assume":
            assume.append(X.fold_arith(X.expand_macros(item[1], macros)))
        else:
            fields[head] = item[1:]

    def one(key, required=True):
        v = fields.get(key)
        if v is None:
            if required:
                raise ScriptError(f"proof script lacks ({key} ...)")
            return None
        return X.fold_arith(X.expand_macros(v[0], macros))

    logic = one("logic")
    programs = list(fields.get("programs") or fields.get("program") or [])
    if not programs:
        raise ScriptError("proof script lacks (program name) or (programs left right)")
    root = fields.get("derivation")
    if not root:
        raise ScriptError("proof script lacks (derivation ...)")
    params = [(p[0], X.parse_type(p[1])) for p in fields.get("params", [])]
    return Script(
        logic=logic, programs=programs, macros=macros, params=params, assume=assume,
        pre=one("pre"), post=one("post"), grade=one("grade", False),
        root=X.fold_arith(X.expand_macros(root[0], macros)),
        instances=list(fields.get("instances", [])),
        init=list(fields.get("init", [])), source=text)


# ---------------------------------------------------------------- helpers


def pick(name: str, avoid) -> str:
    while name in avoid or name in RESERVED:
        name += "'"
    return name


def head(t: S.Term) -> S.Term:
    """β-reduce redexes with pure arguments at the head."""
    while isinstance(t, S.App) and isinstance(t.fn, S.Lam) and S.is_pure(t.arg):
        t = S.substitute(t.fn.body, {t.fn.var: t.arg})
    return t


def term_regions(t) -> set:
    out: set = set()

    def go(n):
        if isinstance(n, S.Lam) and n.ty is not None:
            out.update(S.type_region_vars(n.ty))
        for c in S.children(n):
            go(c)

    go(t)
    return out


def eq_tt(b: S.Term) -> S.Prop:
    return S.Rel("=", (b, S.TRUE))


def eq_ff(b: S.Term) -> S.Prop:
    return S.Rel("=", (b, S.FALSE))


def as_meet(a, b):
    return S.Meet(a, b)


# ---------------------------------------------------------------- the checker


class Checker:
    def __init__(self, program, inst: LogicInstance, cfg: ProgramConfig | None = None, macros=None):
        self.prog = program
        self.cfg = cfg or program.config
        self.inst = inst
        self.tc = TypeChecker(self.cfg)
        self.obligations: list = []
        self.macros = macros or {}
        self._used: dict = {}

    # -- entry
    def check(self, node: ProofNode, goal: Goal) -> Result:
        name = node.rule
        if name not in RULES:
            raise ScriptError(f"unknown rule {name}", name, node.path)
        if name not in self.inst.rules:
            raise ModeError(f"rule {name} is not part of the {self.inst.name} logic", name, node.path)
        self.scope_check(goal, node)
        fn, _ = RULES[name]
        res = fn(self, node, goal)
        res = Result(normalize(res.pre, self.cfg), res.grade, res.deriv)
        if "grade" in node.meta and name not in GRADE_PARAM_RULES:
            claimed = self.grade_meta(node, "grade")
            if not _le(res.grade, claimed):
                raise GradeError(f"claimed grade {show_grade(claimed)} is below the premises' {show_grade(res.grade)}",
                                 name, node.path, expected=res.grade, actual=claimed)
            if claimed != res.grade:
                res = Result(res.pre, claimed, Derivation(name + "/weaken", claimed, "weaken", [res.deriv]))
        self.unused_admits(node)
        return res

    def scope_check(self, goal: Goal, node: ProofNode):
        allowed = set(goal.gamma) | (({"s1", "s2", "v1", "v2"}) if goal.relational else {"s", "v"})
        extra = S.free_vars(goal.post) - allowed
        if extra:
            raise ScopeError(f"postcondition mentions {', '.join(sorted(extra))}, which is not in scope",
                             node.rule, node.path, actual=goal.post)

    def unused_admits(self, node: ProofNode):
        used = self._used.get(id(node.obligations), set())
        for label, (mode, _) in node.obligations.items():
            if mode == "admit" and label not in used:
                raise ScriptError(f"admitted obligation {label} is never generated by {node.rule}",
                                  node.rule, node.path)

    # -- metavariables
    def meta_assertion(self, node, key, required=True, env=None):
        raw = node.meta.get(key)
        if raw is None:
            if required:
                raise ScriptError(f"{node.rule} needs (meta ({key} ...))", node.rule, node.path)
            return None
        x = raw[0]
        if env:
            x = X.fold_arith(X.substitute_symbols(x, env))
        try:
            a = X.parse_assertion(x)
        except (X.SexpError, IndexError, ValueError) as e:
            raise ScriptError(f"bad assertion for {key}: {e}", node.rule, node.path) from None
        self.inst.wf(a, key)
        return a

    def meta_prop(self, node, key, required=True):
        raw = node.meta.get(key)
        if raw is None:
            if required:
                raise ScriptError(f"{node.rule} needs (meta ({key} ...))", node.rule, node.path)
            return None
        try:
            return X.parse_prop(raw[0])
        except (X.SexpError, IndexError, ValueError) as e:
            raise ScriptError(f"bad proposition for {key}: {e}", node.rule, node.path) from None

    def grade_meta(self, node, key, env=None):
        raw = node.meta.get(key)
        try:
            g = X.rational(raw[0], env)
        except (X.SexpError, TypeError, ZeroDivisionError, ValueError) as e:
            raise ScriptError(f"bad grade for {key}: {e}", node.rule, node.path) from None
        if g != INF and g < 0:
            raise GradeError("grades are nonnegative", node.rule, node.path, actual=g)
        return g

    # -- typing
    def ctx(self, gamma: dict, t=None) -> Ctx:
        vars_ = {k: v for k, v in gamma.items() if k not in RESERVED}
        regions = sorted(term_regions(t)) if t is not None else []
        return Ctx.make(regions=regions, advs=self.prog.adversaries, vars=vars_)

    def type_of(self, t: S.Term, gamma: dict, node: ProofNode) -> S.Type:
        try:
            return self.tc.infer(self.ctx(gamma, t), t)
        except TypeCheckError as e:
            raise ShapeError(f"ill-typed subterm: {e}", node.rule, node.path, actual=t) from None

    def result_type(self, t, gamma, node) -> S.Type:
        ty = self.type_of(t, gamma, node)
        if not isinstance(ty, S.TMon):
            raise ShapeError("expected a monadic computation", node.rule, node.path, actual=t)
        return ty.inner

    # -- assertions
    def same(self, a, b) -> bool:
        return same(a, b, self.cfg)

    def require_same(self, node, what, expected, actual):
        if not self.same(expected, actual):
            raise SubstitutionMismatch(
                f"{what} does not match the rule schema (normal forms shown)", node.rule, node.path,
                expected=normalize(expected, self.cfg), actual=normalize(actual, self.cfg))

    def subst(self, a, binding: dict):
        return normalize(S.substitute(a, binding), self.cfg)

    # -- obligations
    def oblige(self, node: ProofNode, label: str, kind: str, goal: Goal, lhs=None, rhs=None,
               gamma=None, psi=None, extra=None, error=ObligationFailed):
        entry = node.obligations.get(label)
        if entry is None:
            raise MissingObligation(f"side condition '{label}' must be listed in (obligations ...)",
                                    node.rule, node.path,
                                    actual=rhs if kind == "hol" else None)
        self._used.setdefault(id(node.obligations), set()).add(label)
        mode, lemma = entry
        ob = Obligation(label=label, rule=node.rule, path=node.path, kind=kind,
                        gamma=dict(goal.env_types() if gamma is None else gamma),
                        psi=tuple(goal.psi if psi is None else psi),
                        lhs=lhs, rhs=rhs, mode=mode, name=lemma, extra=extra or {})
        self.obligations.append(ob)
        self.discharge(ob, error)
        return ob

    def discharge(self, ob: Obligation, error=ObligationFailed):
        if ob.mode == "admit":
            ob.status = "admitted"
            return
        try:
            if ob.mode == "arith":
                cex = self._arith(ob)
            else:
                cex = self._eval(ob)
        except ProofError:
            raise
        except (DischargeError, ConfigError, EvalError, AssertionError_) as e:
            ob.status = "failed"
            raise error(f"cannot decide obligation '{ob.label}': {e}", ob.rule, ob.path,
                        actual=ob.formula()) from None
        if cex is not None:
            ob.status = "failed"
            ob.detail = cex.show(self.cfg)
            raise error(f"obligation '{ob.label}' is false; counterexample: {ob.detail}", ob.rule, ob.path,
                        actual=ob.formula())
        ob.status = "ok"

    def _eval(self, ob: Obligation):
        mode = self.inst.mode
        if ob.kind == "entail":
            return check_entailment(self.cfg, mode, ob.gamma, ob.psi, ob.lhs, ob.rhs)
        if ob.kind == "hol":
            return check_prop(self.cfg, ob.gamma, ob.psi, ob.rhs)
        if ob.kind == "safe":
            gamma = {k: t for k, t in ob.gamma.items() if k in S.free_vars(ob.lhs) and k != "s"}
            return check_safe(self.cfg, ob.lhs, ob.extra["sigma"], mode, "s", gamma)
        if ob.kind == "rsafe":
            return check_rsafe(self.cfg, ob.lhs, ob.extra["sigma"], gamma=ob.gamma)
        return ob.extra["check"]()

    def _arith(self, ob: Obligation):
        nodes = [n for n in (ob.lhs, ob.rhs) if n is not None] + list(ob.psi)
        fv = set()
        for n in nodes:
            fv |= S.free_vars(n)
        if fv or ob.kind not in ("entail", "hol"):
            raise ScriptError(f"arith obligations must be closed; '{ob.label}' mentions {', '.join(sorted(fv)) or ob.kind}",
                              ob.rule, ob.path)
        return check_entailment(self.cfg, self.inst.mode, {}, ob.psi, ob.lhs, ob.rhs) if ob.kind == "entail" \
            else check_prop(self.cfg, {}, ob.psi, ob.rhs)

    def entail(self, node, label, goal, lhs, rhs, gamma=None, psi=None):
        """Generate lhs ⇛ rhs unless the two are syntactically equal."""
        if self.same(lhs, rhs):
            return None
        return self.oblige(node, label, "entail", goal, lhs=lhs, rhs=rhs, gamma=gamma, psi=psi)

    # -- child goals
    def sub(self, goal: Goal, terms=None, types=None, post=None, gamma=None, psi=None) -> Goal:
        return Goal(gamma=dict(goal.gamma if gamma is None else gamma),
                    psi=tuple(goal.psi if psi is None else psi),
                    terms=tuple(goal.terms if terms is None else terms),
                    types=tuple(goal.types if types is None else types),
                    post=goal.post if post is None else post)

    def avoid(self, goal: Goal, *extra) -> set:
        out = set(goal.gamma) | RESERVED
        for t in goal.terms:
            out |= S.free_vars(t)
        out |= S.free_vars(goal.post)
        for p in goal.psi:
            out |= S.free_vars(p)
        for e in extra:
            out |= S.all_vars(e)
        return out

    def children(self, node: ProofNode, n: int):
        if len(node.children) != n:
            raise ScriptError(f"{node.rule} takes {n} premise(s), got {len(node.children)}", node.rule, node.path)
        return node.children

    def term(self, node, goal, cls, side=0):
        t = head(goal.terms[side])
        if not isinstance(t, cls):
            names = cls.__name__ if isinstance(cls, type) else "/".join(c.__name__ for c in cls)
            raise ShapeError(f"{node.rule} expects a {names} term", node.rule, node.path, actual=t)
        return t


GRADE_PARAM_RULES = {"CONSEQ", "CONSEQ-U", "CONSEQ-R", "SAMPLE-UBL", "SAMPLE-R"}
UNARY = ("ubl", "exp")


# ---------------------------------------------------------------- unary monadic rules


@rule("UNIT-U", *UNARY)
def unit_u(k: Checker, node, goal):
    t = head(goal.terms[0])
    if isinstance(t, S.Skip):
        t = S.UnitM(S.Star())
    if not isinstance(t, S.UnitM):
        raise ShapeError("UNIT-U expects unit t", node.rule, node.path, actual=t)
    k.children(node, 0)
    phi = k.meta_prop(node, "phi", required=False)
    if phi is None:
        pre = k.subst(goal.post, {"v": t.arg})
        return Result(pre, Fraction(0), Derivation("UNIT-U", Fraction(0), "leaf"))
    P = k.meta_assertion(node, "pre")
    k.require_same(node, "postcondition", S.Meet(S.Inj(phi), P), goal.post)
    if "v" in S.free_vars(P):
        raise ScopeError("the frame P may not mention the result", node.rule, node.path, actual=P)
    k.oblige(node, "phi", "hol", goal, rhs=S.substitute(phi, {"v": t.arg}),
             gamma={**goal.gamma, "s": S.MEM})
    return Result(P, Fraction(0), Derivation("UNIT-U", Fraction(0), "leaf"))


@rule("READ-U", *UNARY)
def read_u(k: Checker, node, goal):
    t = k.term(node, goal, S.Read)
    k.children(node, 0)
    pre = k.subst(goal.post, {"v": S.Select(S.Var("s"), t.loc)})
    claimed = k.meta_assertion(node, "pre", required=False)
    if claimed is not None:
        k.require_same(node, "precondition", pre, claimed)
    return Result(pre, Fraction(0), Derivation("READ-U", Fraction(0), "leaf"))


@rule("WRITE-U", *UNARY)
def write_u(k: Checker, node, goal):
    t = k.term(node, goal, S.Write)
    k.children(node, 0)
    if "v" in S.free_vars(goal.post):
        post = S.substitute(goal.post, {"v": S.Star()})
    else:
        post = goal.post
    pre = k.subst(post, {"s": S.Store(S.Var("s"), t.loc, t.arg)})
    claimed = k.meta_assertion(node, "pre", required=False)
    if claimed is not None:
        k.require_same(node, "precondition", pre, claimed)
    return Result(pre, Fraction(0), Derivation("WRITE-U", Fraction(0), "leaf"))


@rule("MLET-U", *UNARY)
def mlet_u(k: Checker, node, goal):
    t = k.term(node, goal, S.LetM)
    c1, c2 = k.children(node, 2)
    x, body = t.var, t.body
    if x in S.free_vars(goal.post) and x not in goal.gamma:
        raise ScopeError(f"bound variable {x} occurs in the postcondition", node.rule, node.path, actual=goal.post)
    if x == "_" or x in goal.gamma or x in RESERVED:
        nx = pick(x if x != "_" else "u", k.avoid(goal))
        body = S.substitute(body, {x: S.Var(nx)}) if x != "_" else body
        x = nx
    tau1 = k.result_type(t.bound, goal.gamma, node)
    r2 = k.check(c2, k.sub(goal, terms=(body,), gamma={**goal.gamma, x: tau1}))
    if "v" in S.free_vars(r2.pre):
        raise ScopeError("intermediate precondition mentions the result variable", node.rule, node.path, actual=r2.pre)
    mid = k.subst(r2.pre, {x: S.Var("v")})
    claimed = k.meta_assertion(node, "mid", required=False)
    if claimed is not None:
        k.require_same(node, "intermediate assertion", mid, claimed)
    r1 = k.check(c1, k.sub(goal, terms=(t.bound,), types=(tau1,), post=mid))
    g = gadd(r1.grade, r2.grade)
    return Result(r1.pre, g, Derivation("MLET-U", g, "sum", [r1.deriv, r2.deriv]))


def balance(r1: Result, r2: Result, rule_name: str):
    """Weaken the cheaper branch so both carry the larger grade (a CONSEQ step)."""
    if r1.grade == r2.grade:
        return r1, r2
    top = r1.grade if _le(r2.grade, r1.grade) else r2.grade

    def up(r):
        if r.grade == top:
            return r
        return Result(r.pre, top, Derivation("CONSEQ", top, "weaken", [r.deriv]))

    return up(r1), up(r2)


def mcase_u(k: Checker, node, goal, balanced=False):
    t = k.term(node, goal, S.Case)
    c1, c2 = k.children(node, 2)
    b = t.guard
    if not S.is_pure(b):
        raise ShapeError("case guard must be pure", node.rule, node.path, actual=b)
    r1 = k.check(c1, k.sub(goal, terms=(t.then,), psi=goal.psi + (eq_tt(b),)))
    r2 = k.check(c2, k.sub(goal, terms=(t.else_,), psi=goal.psi + (eq_ff(b),)))
    if balanced:
        r1, r2 = balance(r1, r2, "MCASE-U")
    if r1.grade != r2.grade:
        raise GradeMismatch("both branches must carry the same grade; weaken one with CONSEQ first",
                            node.rule, node.path, expected=r1.grade, actual=r2.grade)
    pre = S.Join(S.Meet(S.Inj(eq_tt(b)), r1.pre), S.Meet(S.Inj(eq_ff(b)), r2.pre))
    return Result(pre, r1.grade, Derivation("MCASE-U", r1.grade, "same", [r1.deriv, r2.deriv]))


rule("MCASE-U", *UNARY)(mcase_u)
rule("MCASE-U*", *UNARY)(lambda k, node, goal: mcase_u(k, node, goal, balanced=True))


@rule("MFOLD-U", *UNARY)
def mfold_u(k: Checker, node, goal):
    t = k.term(node, goal, S.MFold)
    c_base, c_body = k.children(node, 2)
    n_ty = k.type_of(t.count, goal.gamma, node)
    if not isinstance(n_ty, S.TNat) or n_ty.bound is None:
        raise ShapeError("the iteration count needs a bounded natural type", node.rule, node.path, actual=t.count)
    K = n_ty.bound
    step = head(t.step)
    if not isinstance(step, S.Lam):
        raise ShapeError("MFOLD-U needs a literal step function", node.rule, node.path, actual=step)
    x, body = step.var, step.body
    if x in goal.gamma or x in RESERVED:
        nx = pick(x, k.avoid(goal))
        body = S.substitute(body, {x: S.Var(nx)})
        x = nx
    Q = goal.post
    r0 = k.check(c_base, k.sub(goal, terms=(t.init,)))
    r1 = k.check(c_body, k.sub(goal, terms=(body,), gamma={**goal.gamma, x: goal.types[0]},
                               psi=goal.psi + (S.Rel("<>", (t.count, S.Zero())),)))
    k.require_same(node, "loop invariant", k.subst(Q, {"v": S.Var(x)}), r1.pre)
    g = gadd(r0.grade, gscale(K, r1.grade))
    d = Derivation("MFOLD-U", g, "fold", [r0.deriv, r1.deriv], factor=K)
    return Result(r0.pre, g, d)


# ---------------------------------------------------------------- structural rules


def _conseq(k: Checker, node, goal):
    (child,) = k.children(node, 1)
    Qp = k.meta_assertion(node, "post", required=False)
    P = k.meta_assertion(node, "pre", required=False)
    r = k.check(child, k.sub(goal, post=Qp if Qp is not None else goal.post))
    if Qp is not None:
        k.entail(node, "post", goal, Qp, goal.post)
    pre = r.pre
    if P is not None:
        k.entail(node, "pre", goal, P, r.pre, gamma={**goal.env_types()})
        pre = P
    grade = r.grade
    if "grade" in node.meta:
        grade = k.grade_meta(node, "grade")
        if not _le(r.grade, grade):
            raise GradeError(f"CONSEQ can only weaken grades: premise {show_grade(r.grade)} exceeds "
                             f"conclusion {show_grade(grade)}", node.rule, node.path,
                             expected=r.grade, actual=grade)
    return Result(pre, grade, Derivation(node.rule, grade, "weaken", [r.deriv]))


for _name, _logics in (("CONSEQ", ("ubl", "exp", "rpl")), ("CONSEQ-U", UNARY), ("CONSEQ-R", ("rpl",))):
    rule(_name, *_logics)(_conseq)


def _or_pre(k: Checker, node, goal):
    c1, c2 = k.children(node, 2)
    r1, r2 = k.check(c1, goal), k.check(c2, goal)
    if r1.grade != r2.grade:
        raise GradeMismatch("both premises must carry the same grade", node.rule, node.path,
                            expected=r1.grade, actual=r2.grade)
    return Result(S.Join(r1.pre, r2.pre), r1.grade, Derivation(node.rule, r1.grade, "same", [r1.deriv, r2.deriv]))


def _and_post(k: Checker, node, goal):
    c1, c2 = k.children(node, 2)
    if not isinstance(goal.post, S.Meet):
        raise ShapeError(f"{node.rule} needs a postcondition of the form Q ⊓ Q'", node.rule, node.path,
                         actual=goal.post)
    r1 = k.check(c1, k.sub(goal, post=goal.post.left))
    r2 = k.check(c2, k.sub(goal, post=goal.post.right))
    k.require_same(node, "premise preconditions", r1.pre, r2.pre)
    g = gadd(r1.grade, r2.grade)
    return Result(r1.pre, g, Derivation(node.rule, g, "sum", [r1.deriv, r2.deriv]))


rule("OR-PRE-U", *UNARY)(_or_pre)
rule("OR-PRE-R", "rpl")(_or_pre)
rule("AND-POST-U", *UNARY)(_and_post)
rule("AND-POST-R", "rpl")(_and_post)


# ---------------------------------------------------------------- tactics


def _synthetic(rule_name, node, children=(), meta=None, suffix=""):
    return ProofNode(rule=rule_name, meta=dict(meta or {}), children=list(children),
                     obligations=node.obligations, path=node.path + suffix)


class _Holes:
    def __init__(self, node):
        self.node = node
        self.items = list(node.children)
        self.i = 0

    def next(self, t):
        if self.i >= len(self.items):
            raise ScriptError(f"{self.node.rule} needs a premise for the subterm {_short(t)}",
                              self.node.rule, self.node.path)
        c = self.items[self.i]
        self.i += 1
        return c

    def done(self):
        if self.i != len(self.items):
            raise ScriptError(f"{self.node.rule} was given {len(self.items)} premises but used {self.i}",
                              self.node.rule, self.node.path)


def _short(t) -> str:
    from .surface import show_term
    text = show_term(t)
    return text if len(text) < 60 else text[:57] + "..."


def _elab_wp(t, holes: _Holes, node):
    t = head(t)
    if isinstance(t, S.LetM):
        return _synthetic("MLET-U", node, [_elab_wp(t.bound, holes, node), _elab_wp(t.body, holes, node)])
    if isinstance(t, S.Read):
        return _synthetic("READ-U", node)
    if isinstance(t, S.Write):
        return _synthetic("WRITE-U", node)
    if isinstance(t, (S.UnitM, S.Skip)):
        return _synthetic("UNIT-U", node)
    if isinstance(t, S.Case) and S.is_pure(t.guard):
        return _synthetic("MCASE-U*", node, [_elab_wp(t.then, holes, node), _elab_wp(t.else_, holes, node)])
    return holes.next(t)


def _elab_wp_r(t1, t2, holes: _Holes, node):
    t1, t2 = head(t1), head(t2)
    if isinstance(t1, S.LetM) and isinstance(t2, S.LetM):
        return _synthetic("MLET-R", node, [_elab_wp_r(t1.bound, t2.bound, holes, node),
                                           _elab_wp_r(t1.body, t2.body, holes, node)])
    if isinstance(t1, S.Read) and isinstance(t2, S.Read):
        return _synthetic("READ-R", node)
    if isinstance(t1, S.Write) and isinstance(t2, S.Write):
        return _synthetic("WRITE-R", node)
    if isinstance(t1, (S.UnitM, S.Skip)) and isinstance(t2, (S.UnitM, S.Skip)):
        return _synthetic("UNIT-R", node)
    if isinstance(t1, S.Case) and isinstance(t2, S.Case) and S.is_pure(t1.guard) and S.is_pure(t2.guard):
        return _synthetic("MCASE-R*", node, [_elab_wp_r(t1.then, t2.then, holes, node),
                                             _elab_wp_r(t1.else_, t2.else_, holes, node)])
    return holes.next(t1)


def _wp_common(k: Checker, node, goal, tree):
    P = k.meta_assertion(node, "pre", required=False)
    if P is not None:
        tree = _synthetic("CONSEQ", node, [tree], meta={"pre": node.meta["pre"]})
    return k.check(tree, goal)


@rule("WP", *UNARY)
def wp(k: Checker, node, goal):
    holes = _Holes(node)
    tree = _elab_wp(goal.terms[0], holes, node)
    holes.done()
    return _wp_common(k, node, goal, tree)


@rule("WP-R", "rpl")
def wp_r(k: Checker, node, goal):
    holes = _Holes(node)
    tree = _elab_wp_r(goal.terms[0], goal.terms[1], holes, node)
    holes.done()
    return _wp_common(k, node, goal, tree)


# ---------------------------------------------------------------- certificates


@dataclass
class Certificate:
    logic: str
    programs: list
    program_hash: str
    config_hash: str
    pre: str
    post: str
    terms: list
    types: list
    grade: str
    rule_count: int
    admitted: list
    obligations: dict
    oracle: dict | None = None
    all_obligations: list = field(default_factory=list, repr=False)
    derivation: Derivation | None = field(default=None, repr=False)

    def to_json(self) -> dict:
        out = {
            "logic": self.logic,
            "programs": self.programs,
            "program_hash": self.program_hash,
            "config_hash": self.config_hash,
            "conclusion": {"pre": self.pre, "terms": self.terms, "types": self.types, "post": self.post,
                           "grade": self.grade},
            "grade": self.grade,
            "rule_count": self.rule_count,
            "admitted": self.admitted,
            "obligations": self.obligations,
        }
        if self.oracle is not None:
            out["oracle"] = self.oracle
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, indent=2) + "\n"


def program_hash(prog) -> str:
    return hashlib.sha256(prog.source.encode()).hexdigest()


def setup_goal(prog, script: Script, checker: Checker):
    """The root goal named by the script: program term(s), contexts and post."""
    from .surface import show_type  # noqa: F401  (keeps import local to avoid cycles)

    inst = checker.inst
    want = 2 if inst.relational else 1
    if len(script.programs) != want:
        raise ScriptError(f"the {inst.name} logic needs {want} program(s), got {len(script.programs)}")
    gamma: dict = {}
    terms = []
    for name in script.programs:
        d = prog.definition(name)
        for x, ty in d.params:
            if x in gamma and gamma[x] != ty:
                raise ScriptError(f"parameter {x} has different types in the two programs")
            gamma[x] = ty
        terms.append(d.body)
    for x, ty in script.params:
        gamma[x] = ty
    psi = tuple(X.parse_prop(p) for p in script.assume)
    types = []
    full_types = []
    for t in terms:
        ty = checker.type_of(t, gamma, ProofNode("root"))
        if not isinstance(ty, S.TMon):
            raise ScriptError("the program under proof must be a monadic computation")
        full_types.append(ty)
        types.append(ty.inner)
    post = X.parse_assertion(script.post)
    pre = X.parse_assertion(script.pre)
    inst.wf(pre, "pre")
    inst.wf(post, "post")
    goal = Goal(gamma=gamma, psi=psi, terms=tuple(terms), types=tuple(types), post=post)
    allowed = set(gamma) | ({"s1", "s2"} if inst.relational else {"s"})
    if S.free_vars(pre) - allowed:
        raise ScopeError(f"precondition mentions {', '.join(sorted(S.free_vars(pre) - allowed))}", "root", "root")
    return goal, pre, full_types


def check_proof(prog, script: Script | str, logic: str | None = None, cap: int | None = None) -> Certificate:
    """Check a proof script against a parsed program; returns a certificate or raises ProofError."""
    from .surface import show_term, show_type

    if isinstance(script, str):
        script = load_script(script)
    name = logic or script.logic
    if logic and script.logic and logic != script.logic:
        raise ModeError(f"script is written for {script.logic} but --logic {logic} was requested")
    inst = instance(name)
    cfg = prog.config.with_cap(cap) if cap else prog.config
    checker = Checker(prog, inst, cfg, script.macros)
    goal, pre, full_types = setup_goal(prog, script, checker)
    root = parse_node(script.root)
    res = checker.check(root, goal)
    if not checker.same(pre, res.pre):
        raise SubstitutionMismatch("the derivation proves a different precondition; wrap the root in CONSEQ",
                                   root.rule, root.path, expected=pre, actual=normalize(res.pre, cfg))
    grade = res.grade
    deriv = res.deriv
    if script.grade is not None:
        claimed = X.rational(script.grade)
        if not _le(grade, claimed):
            raise GradeError(f"script claims grade {show_grade(claimed)} but the derivation needs {show_grade(grade)}",
                             root.rule, root.path, expected=grade, actual=claimed)
        if claimed != grade:
            deriv = Derivation("claim", claimed, "weaken", [deriv])
        grade = claimed
    bad = recompute_grades(deriv)
    if bad:
        raise GradeError("grade recomputation failed: " + "; ".join(bad), root.rule, root.path)
    obs = checker.obligations
    admitted: list = []
    for o in obs:
        if o.mode != "admit":
            continue
        use = {"label": o.label, "rule": o.rule, "path": o.path, "formula": o.formula()}
        entry = next((a for a in admitted if a["name"] == o.name), None)
        if entry is None:
            admitted.append({"name": o.name, "uses": [use]})
        else:
            entry["uses"].append(use)
    counts = {m: sum(1 for o in obs if o.mode == m) for m in MODES}
    counts["total"] = len(obs)
    return Certificate(
        logic=name,
        programs=list(script.programs),
        program_hash=program_hash(prog),
        config_hash=cfg.digest(),
        pre=X.show_assertion(pre),
        post=X.show_assertion(goal.post),
        terms=[show_term(t) for t in goal.terms],
        types=[show_type(t) for t in full_types],
        grade=show_grade(grade),
        rule_count=deriv.count() - _weakening_nodes(deriv),
        admitted=admitted,
        obligations=counts,
        all_obligations=obs,
        derivation=deriv,
    )


def _weakening_nodes(d: Derivation) -> int:
    own = 1 if d.rule.endswith("/weaken") or d.rule == "claim" else 0
    return own + sum(_weakening_nodes(c) for c in d.children)


from . import instances  # noqa: E402,F401  registers the logic-specific rules
