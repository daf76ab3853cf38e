"""Abstract syntax for types, effects, terms, propositions and assertions.

Everything here is an immutable dataclass so ASTs can be hashed, compared
structurally and shared freely.  Substitution is capture-avoiding; region
substitution only rewrites effect annotations.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Union

INF = float("inf")


class SyntaxError_(Exception):
    """Raised on malformed ASTs or illegal substitutions."""


class CaptureError(SyntaxError_):
    pass


class OpenAdversaryError(SyntaxError_):
    pass


# ---------------------------------------------------------------- effects


@dataclass(frozen=True)
class Effect:
    locs: frozenset = frozenset()
    vars: frozenset = frozenset()

    @staticmethod
    def of(locs: Iterable[str] = (), vars: Iterable[str] = ()) -> "Effect":
        return Effect(frozenset(locs), frozenset(vars))

    def __or__(self, other: "Effect") -> "Effect":
        return Effect(self.locs | other.locs, self.vars | other.vars)

    def is_empty(self) -> bool:
        return not self.locs and not self.vars

    def subst(self, var: str, eff: "Effect") -> "Effect":
        if var not in self.vars:
            return self
        return Effect(self.locs | eff.locs, (self.vars - {var}) | eff.vars)

    def __repr__(self):
        items = sorted(self.locs) + ["'" + v for v in sorted(self.vars)]
        return "{" + ", ".join(items) + "}"


EMPTY = Effect()


# ---------------------------------------------------------------- types


class Type:
    __slots__ = ()


@dataclass(frozen=True)
class TBase(Type):
    name: str


@dataclass(frozen=True)
class TBool(Type):
    pass


@dataclass(frozen=True)
class TNat(Type):
    bound: int | None  # None means unbounded

    def __post_init__(self):
        if self.bound is not None and self.bound < 0:
            raise SyntaxError_("Nat bound must be nonnegative")


@dataclass(frozen=True)
class TMem(Type):
    pass


@dataclass(frozen=True)
class TUnit(Type):
    pass


@dataclass(frozen=True)
class TVal(Type):
    pass


@dataclass(frozen=True)
class TArrow(Type):
    dom: Type
    cod: Type


@dataclass(frozen=True)
class TProd(Type):
    left: Type
    right: Type


@dataclass(frozen=True)
class TMon(Type):
    eff: Effect
    cost: int
    inner: Type

    def __post_init__(self):
        if self.cost < 0:
            raise SyntaxError_("monadic cost must be nonnegative")


@dataclass(frozen=True)
class TForall(Type):
    var: str
    body: Type


BOOL, UNIT, MEM, VAL = TBool(), TUnit(), TMem(), TVal()


def is_monadic(t: Type) -> bool:
    return isinstance(t, TMon)


def is_first_order(t: Type) -> bool:
    if isinstance(t, TProd):
        return is_first_order(t.left) and is_first_order(t.right)
    return isinstance(t, (TBool, TNat, TUnit, TVal, TBase))


def type_region_vars(t: Type) -> frozenset:
    """Free region variables of a type."""
    if isinstance(t, TMon):
        return t.eff.vars | type_region_vars(t.inner)
    if isinstance(t, (TArrow, TProd)):
        a, b = (t.dom, t.cod) if isinstance(t, TArrow) else (t.left, t.right)
        return type_region_vars(a) | type_region_vars(b)
    if isinstance(t, TForall):
        return type_region_vars(t.body) - {t.var}
    return frozenset()


def subst_region(t: Type, var: str, eff: Effect) -> Type:
    """Replace region variable `var` by the effect `eff` in t."""
    if isinstance(t, TMon):
        return TMon(t.eff.subst(var, eff), t.cost, subst_region(t.inner, var, eff))
    if isinstance(t, TArrow):
        return TArrow(subst_region(t.dom, var, eff), subst_region(t.cod, var, eff))
    if isinstance(t, TProd):
        return TProd(subst_region(t.left, var, eff), subst_region(t.right, var, eff))
    if isinstance(t, TForall):
        if t.var == var:
            return t
        if t.var in eff.vars:
            fresh = fresh_name(t.var, eff.vars | type_region_vars(t.body))
            body = subst_region(t.body, t.var, Effect.of(vars=[fresh]))
            return TForall(fresh, subst_region(body, var, eff))
        return TForall(t.var, subst_region(t.body, var, eff))
    return t


def eff(t: Type) -> Effect:
    """Latent effect of a type."""
    if isinstance(t, TMon):
        return t.eff | eff(t.inner)
    if isinstance(t, TArrow):
        return eff(t.cod)
    if isinstance(t, TProd):
        return eff(t.left) | eff(t.right)
    if isinstance(t, TForall):
        return eff(subst_region(t.body, t.var, EMPTY))
    return EMPTY


# ---------------------------------------------------------------- terms


class Term:
    __slots__ = ()


@dataclass(frozen=True)
class Var(Term):
    name: str


@dataclass(frozen=True)
class AdvVar(Term):
    name: str


@dataclass(frozen=True)
class Star(Term):
    pass


@dataclass(frozen=True)
class Zero(Term):
    pass


@dataclass(frozen=True)
class Succ(Term):
    arg: Term


@dataclass(frozen=True)
class Lit(Term):
    """Literal constant: bool, natural number, rational or None (the `none` value)."""

    value: object

    def __eq__(self, other):
        return (
            isinstance(other, Lit)
            and type(self.value) is type(other.value)
            and self.value == other.value
        )

    def __hash__(self):
        return hash((Lit, type(self.value).__name__, self.value))


@dataclass(frozen=True)
class Prim(Term):
    """First-order primitive operation (arithmetic, comparison, array aggregates)."""

    op: str
    args: tuple


@dataclass(frozen=True)
class Lam(Term):
    var: str
    ty: Type
    body: Term


@dataclass(frozen=True)
class App(Term):
    fn: Term
    arg: Term


@dataclass(frozen=True)
class Pair(Term):
    left: Term
    right: Term


@dataclass(frozen=True)
class Proj1(Term):
    arg: Term


@dataclass(frozen=True)
class Proj2(Term):
    arg: Term


@dataclass(frozen=True)
class Case(Term):
    guard: Term
    then: Term
    else_: Term


@dataclass(frozen=True)
class Read(Term):
    loc: str


@dataclass(frozen=True)
class Write(Term):
    loc: str
    arg: Term


@dataclass(frozen=True)
class Skip(Term):
    pass


@dataclass(frozen=True)
class UnitM(Term):
    arg: Term


@dataclass(frozen=True)
class LetM(Term):
    var: str
    bound: Term
    body: Term


@dataclass(frozen=True)
class MFold(Term):
    count: Term
    init: Term
    step: Term


@dataclass(frozen=True)
class Sample(Term):
    dist: str
    args: tuple = ()


# memory expressions (assertion-only)


@dataclass(frozen=True)
class Select(Term):
    mem: Term
    loc: str


@dataclass(frozen=True)
class Store(Term):
    mem: Term
    loc: str
    val: Term


@dataclass(frozen=True)
class ArrSel(Term):
    """Computed-index selection s[L[e]] inside assertions."""

    mem: Term
    array: str
    index: Term


MONADIC_FORMS = (Read, Write, Skip, UnitM, LetM, MFold, Sample)
MEM_FORMS = (Select, Store, ArrSel)

TRUE, FALSE, NONE = Lit(True), Lit(False), Lit(None)


def num(n) -> Lit:
    return Lit(Fraction(n) if isinstance(n, Fraction) and n.denominator != 1 else int(n))


# ---------------------------------------------------------------- propositions


class Prop:
    __slots__ = ()


@dataclass(frozen=True)
class Rel(Prop):
    name: str
    args: tuple


@dataclass(frozen=True)
class PTrue(Prop):
    pass


@dataclass(frozen=True)
class PFalse(Prop):
    pass


@dataclass(frozen=True)
class And(Prop):
    left: Prop
    right: Prop


@dataclass(frozen=True)
class Or(Prop):
    left: Prop
    right: Prop


@dataclass(frozen=True)
class Implies(Prop):
    left: Prop
    right: Prop


@dataclass(frozen=True)
class Not(Prop):
    arg: Prop


@dataclass(frozen=True)
class PForall(Prop):
    var: str
    ty: Type
    body: Prop


@dataclass(frozen=True)
class PExists(Prop):
    var: str
    ty: Type
    body: Prop


def conj(*ps: Prop) -> Prop:
    ps = [p for p in ps if not isinstance(p, PTrue)]
    if not ps:
        return PTrue()
    out = ps[-1]
    for p in reversed(ps[:-1]):
        out = And(p, out)
    return out


def eq(a: Term, b: Term) -> Prop:
    return Rel("=", (a, b))


# ---------------------------------------------------------------- assertions


class Assertion:
    __slots__ = ()


@dataclass(frozen=True)
class Atom(Assertion):
    fn: str
    args: tuple


@dataclass(frozen=True)
class Top(Assertion):
    pass


@dataclass(frozen=True)
class Bot(Assertion):
    pass


@dataclass(frozen=True)
class Inj(Assertion):
    prop: Prop


@dataclass(frozen=True)
class Meet(Assertion):
    left: Assertion
    right: Assertion


@dataclass(frozen=True)
class Join(Assertion):
    left: Assertion
    right: Assertion


@dataclass(frozen=True)
class Iverson(Assertion):
    prop: Prop


@dataclass(frozen=True)
class Plus(Assertion):
    left: Assertion
    right: Assertion


@dataclass(frozen=True)
class Scale(Assertion):
    factor: Fraction
    arg: Assertion

    def __post_init__(self):
        if self.factor < 0:
            raise SyntaxError_("scaling factor must be nonnegative")


@dataclass(frozen=True)
class Times(Assertion):
    """Pointwise product of two quantitative assertions."""

    left: Assertion
    right: Assertion


QUANT_ONLY = (Iverson, Plus, Scale, Times)

Node = Union[Term, Prop, Assertion]


# ---------------------------------------------------------------- traversal


def children(n) -> tuple:
    """Immediate sub-nodes (terms, props, assertions) in a fixed order."""
    if isinstance(n, (Var, AdvVar, Star, Zero, Lit, Read, Skip, PTrue, PFalse, Top, Bot)):
        return ()
    if isinstance(n, (Succ, Proj1, Proj2, UnitM, Write)):
        return (n.arg,)
    if isinstance(n, (Prim, Rel, Atom)):
        return tuple(n.args)
    if isinstance(n, Sample):
        return tuple(n.args)
    if isinstance(n, Lam):
        return (n.body,)
    if isinstance(n, App):
        return (n.fn, n.arg)
    if isinstance(n, (Pair, And, Or, Implies, Meet, Join, Plus, Times)):
        return (n.left, n.right)
    if isinstance(n, Case):
        return (n.guard, n.then, n.else_)
    if isinstance(n, LetM):
        return (n.bound, n.body)
    if isinstance(n, MFold):
        return (n.count, n.init, n.step)
    if isinstance(n, Select):
        return (n.mem,)
    if isinstance(n, Store):
        return (n.mem, n.val)
    if isinstance(n, ArrSel):
        return (n.mem, n.index)
    if isinstance(n, (Not,)):
        return (n.arg,)
    if isinstance(n, (PForall, PExists)):
        return (n.body,)
    if isinstance(n, (Inj, Iverson)):
        return (n.prop,)
    if isinstance(n, Scale):
        return (n.arg,)
    raise SyntaxError_(f"unknown node {n!r}")


def binder(n) -> str | None:
    if isinstance(n, (Lam, PForall, PExists)):
        return n.var
    if isinstance(n, LetM):
        return n.var
    return None


def free_vars(n) -> frozenset:
    if isinstance(n, Var):
        return frozenset([n.name])
    if isinstance(n, LetM):
        return free_vars(n.bound) | (free_vars(n.body) - {n.var})
    b = binder(n)
    out = frozenset()
    for c in children(n):
        out |= free_vars(c)
    if b is not None:
        out -= {b}
    return out


def all_vars(n) -> frozenset:
    """Free and bound variable names, used to pick fresh names."""
    out = set()
    stack = [n]
    while stack:
        x = stack.pop()
        if isinstance(x, Var):
            out.add(x.name)
        b = binder(x)
        if b is not None:
            out.add(b)
        stack.extend(children(x))
    return frozenset(out)


def adv_vars(n) -> frozenset:
    if isinstance(n, AdvVar):
        return frozenset([n.name])
    out = frozenset()
    for c in children(n):
        out |= adv_vars(c)
    return out


def fresh_name(base: str, avoid) -> str:
    stem = base.rstrip("0123456789'") or "x"
    for i in itertools.count(1):
        cand = f"{stem}{i}"
        if cand not in avoid:
            return cand
    raise AssertionError


def _rebuild(n, kids: list):
    """Rebuild n with new children (same order as `children`)."""
    if isinstance(n, (Succ, Proj1, Proj2, UnitM)):
        return type(n)(kids[0])
    if isinstance(n, Write):
        return Write(n.loc, kids[0])
    if isinstance(n, Prim):
        return Prim(n.op, tuple(kids))
    if isinstance(n, Rel):
        return Rel(n.name, tuple(kids))
    if isinstance(n, Atom):
        return Atom(n.fn, tuple(kids))
    if isinstance(n, Sample):
        return Sample(n.dist, tuple(kids))
    if isinstance(n, Lam):
        return Lam(n.var, n.ty, kids[0])
    if isinstance(n, (App, Pair, And, Or, Implies, Meet, Join, Plus, Times)):
        return type(n)(kids[0], kids[1])
    if isinstance(n, Case):
        return Case(*kids)
    if isinstance(n, LetM):
        return LetM(n.var, kids[0], kids[1])
    if isinstance(n, MFold):
        return MFold(*kids)
    if isinstance(n, Select):
        return Select(kids[0], n.loc)
    if isinstance(n, Store):
        return Store(kids[0], n.loc, kids[1])
    if isinstance(n, ArrSel):
        return ArrSel(kids[0], n.array, kids[1])
    if isinstance(n, Not):
        return Not(kids[0])
    if isinstance(n, (PForall, PExists)):
        return type(n)(n.var, n.ty, kids[0])
    if isinstance(n, (Inj, Iverson)):
        return type(n)(kids[0])
    if isinstance(n, Scale):
        return Scale(n.factor, kids[0])
    return n


def substitute(n, binding: Mapping[str, Term]):
    """Capture-avoiding simultaneous substitution of variables by terms."""
    if not binding:
        return n
    if isinstance(n, Var):
        return binding.get(n.name, n)
    b = binder(n)
    if b is None:
        kids = children(n)
        if not kids:
            return n
        new = [substitute(k, binding) for k in kids]
        if all(x is y for x, y in zip(new, kids)):
            return n
        return _rebuild(n, new)
    if isinstance(n, LetM):
        bound = substitute(n.bound, binding)
        inner = {k: v for k, v in binding.items() if k != b}
        body, var = n.body, b
        if inner:
            repl_fv = frozenset().union(*(free_vars(v) for v in inner.values()))
            if var in repl_fv and free_vars(body) & set(inner):
                var = fresh_name(b, repl_fv | all_vars(body) | set(inner))
                body = substitute(body, {b: Var(var)})
            body = substitute(body, inner)
        return LetM(var, bound, body)
    inner = {k: v for k, v in binding.items() if k != b}
    if not inner:
        return n
    body = children(n)[0]
    repl_fv = frozenset().union(*(free_vars(v) for v in inner.values()))
    var = b
    if var in repl_fv and free_vars(body) & set(inner):
        var = fresh_name(b, repl_fv | all_vars(body) | set(inner))
        body = substitute(body, {b: Var(var)})
    body = substitute(body, inner)
    return type(n)(var, n.ty, body)


def subst_adv(n, name: str, repl: Term):
    """Replace an adversary variable by a closed term (adversary instantiation)."""
    if free_vars(repl) or adv_vars(repl):
        raise OpenAdversaryError(f"replacement for adversary {name} must be closed")
    if isinstance(n, AdvVar):
        return repl if n.name == name else n
    kids = children(n)
    if not kids:
        return n
    return _rebuild(n, [subst_adv(k, name, repl) for k in kids])


def subst_region_term(n, var: str, e: Effect):
    """Region substitution on the type annotations inside a term."""
    if isinstance(n, Lam):
        return Lam(n.var, subst_region(n.ty, var, e), subst_region_term(n.body, var, e))
    if isinstance(n, (PForall, PExists)):
        return type(n)(n.var, subst_region(n.ty, var, e), subst_region_term(n.body, var, e))
    kids = children(n)
    if not kids:
        return n
    return _rebuild(n, [subst_region_term(k, var, e) for k in kids])


# ---------------------------------------------------------------- alpha-equivalence


def alpha_eq(a, b) -> bool:
    return _alpha(a, b, {}, {})


def _alpha(a, b, ea: dict, eb: dict) -> bool:
    if type(a) is not type(b):
        return False
    if isinstance(a, Var):
        ia, ib = ea.get(a.name), eb.get(b.name)
        if ia is None and ib is None:
            return a.name == b.name
        return ia == ib
    ba, bb = binder(a), binder(b)
    if ba is not None:
        if isinstance(a, (Lam, PForall, PExists)) and a.ty != b.ty:
            return False
        depth = len(ea) + 1
        if isinstance(a, LetM):
            if not _alpha(a.bound, b.bound, ea, eb):
                return False
            return _alpha(a.body, b.body, {**ea, ba: depth}, {**eb, bb: depth})
        return _alpha(children(a)[0], children(b)[0], {**ea, ba: depth}, {**eb, bb: depth})
    ka, kb = children(a), children(b)
    if len(ka) != len(kb):
        return False
    if not ka:
        return a == b
    if _shallow_key(a) != _shallow_key(b):
        return False
    return all(_alpha(x, y, ea, eb) for x, y in zip(ka, kb))


def _shallow_key(n):
    if isinstance(n, (Prim,)):
        return n.op
    if isinstance(n, Rel):
        return n.name
    if isinstance(n, Atom):
        return n.fn
    if isinstance(n, Sample):
        return n.dist
    if isinstance(n, (Write, Select, Store)):
        return n.loc
    if isinstance(n, ArrSel):
        return n.array
    if isinstance(n, Scale):
        return n.factor
    return None


# ---------------------------------------------------------------- helpers


def is_value_form(t: Term) -> bool:
    """Syntactic values (pure, already evaluated)."""
    if isinstance(t, (Var, Star, Zero, Lit, Lam, AdvVar)):
        return True
    if isinstance(t, Succ):
        return is_value_form(t.arg)
    if isinstance(t, Pair):
        return is_value_form(t.left) and is_value_form(t.right)
    return False


def is_pure(t: Term) -> bool:
    """No monadic constructs outside lambda bodies."""
    if isinstance(t, MONADIC_FORMS):
        return False
    if isinstance(t, Lam):
        return True
    return all(is_pure(c) for c in children(t) if isinstance(c, Term))


def nat_literal(t: Term) -> int | None:
    if isinstance(t, Zero):
        return 0
    if isinstance(t, Succ):
        inner = nat_literal(t.arg)
        return None if inner is None else inner + 1
    if isinstance(t, Lit) and isinstance(t.value, int) and not isinstance(t.value, bool):
        return t.value
    return None


def size(n) -> int:
    return 1 + sum(size(c) for c in children(n))
