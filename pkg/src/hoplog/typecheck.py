"""Type-and-effect checking for Ξ; Δ; Γ ⊢ t : τ with graded monadic types."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from types import MappingProxyType

from . import syntax as S
from .config import ConfigError, ProgramConfig


class TypeCheckError(Exception):
    rule = "Type"

    def __init__(self, msg: str, term=None, expected=None, actual=None):
        super().__init__(msg)
        self.term, self.expected, self.actual = term, expected, actual

    def to_json(self) -> dict:
        from .surface import show_term, show_type

        def fmt(x, f):
            try:
                return None if x is None else f(x)
            except Exception:
                return repr(x)

        return {
            "error": type(self).__name__,
            "rule": self.rule,
            "message": str(self),
            "term": fmt(self.term, show_term),
            "expected": fmt(self.expected, show_type),
            "actual": fmt(self.actual, show_type),
        }


class TypeMismatch(TypeCheckError):
    rule = "Subtype"


class EffectEscape(TypeCheckError):
    rule = "Subtype"


class CostOverflow(TypeCheckError):
    rule = "Subtype"


class RegionError(TypeCheckError):
    rule = "ForAll-I"


class UnboundVariable(TypeCheckError):
    rule = "Var"


class AdversaryMismatch(TypeCheckError):
    rule = "Adv"


class MemExprError(TypeCheckError):
    rule = "MemExpr"


@dataclass(frozen=True)
class Ctx:
    regions: tuple = ()
    advs: MappingProxyType = field(default_factory=lambda: MappingProxyType({}))
    vars: MappingProxyType = field(default_factory=lambda: MappingProxyType({}))

    @staticmethod
    def make(regions=(), advs=None, vars=None) -> "Ctx":
        return Ctx(tuple(regions), MappingProxyType(dict(advs or {})), MappingProxyType(dict(vars or {})))

    def bind(self, x: str, ty: S.Type) -> "Ctx":
        if x == "_":
            return self
        v = dict(self.vars)
        v[x] = ty
        return Ctx(self.regions, self.advs, MappingProxyType(v))

    def with_region(self, a: str) -> "Ctx":
        return Ctx(self.regions + (a,), self.advs, self.vars)

    def without_adv(self, name: str) -> "Ctx":
        d = dict(self.advs)
        d.pop(name, None)
        return Ctx(self.regions, MappingProxyType(d), self.vars)

    def free_regions(self) -> frozenset:
        out: set = set()
        for t in list(self.advs.values()) + list(self.vars.values()):
            out |= S.type_region_vars(t)
        return frozenset(out)


# ---------------------------------------------------------------- subtyping


def effect_subset(xi, a: S.Effect, b: S.Effect) -> bool:
    """Containment under every instantiation of region variables: componentwise."""
    return a.locs <= b.locs and a.vars <= b.vars


def check_subtype(xi, t: S.Type, u: S.Type) -> bool:
    if t == u:
        return True
    if isinstance(t, S.TNat) and isinstance(u, S.TNat):
        return u.bound is None or (t.bound is not None and t.bound <= u.bound)
    if isinstance(t, S.TNat) and isinstance(u, S.TVal):
        return True
    if isinstance(t, S.TMon) and isinstance(u, S.TMon):
        return effect_subset(xi, t.eff, u.eff) and t.cost <= u.cost and check_subtype(xi, t.inner, u.inner)
    if isinstance(t, S.TArrow) and isinstance(u, S.TArrow):
        return check_subtype(xi, u.dom, t.dom) and check_subtype(xi, t.cod, u.cod)
    if isinstance(t, S.TProd) and isinstance(u, S.TProd):
        return check_subtype(xi, t.left, u.left) and check_subtype(xi, t.right, u.right)
    if isinstance(t, S.TForall) and isinstance(u, S.TForall):
        v = S.fresh_name(t.var, S.type_region_vars(t) | S.type_region_vars(u) | {t.var, u.var})
        tb = S.subst_region(t.body, t.var, S.Effect.of(vars=[v]))
        ub = S.subst_region(u.body, u.var, S.Effect.of(vars=[v]))
        return check_subtype(tuple(xi) + (v,), tb, ub)
    return False


def join_types(t: S.Type, u: S.Type) -> S.Type | None:
    if check_subtype((), t, u):
        return u
    if check_subtype((), u, t):
        return t
    if isinstance(t, S.TNat) and isinstance(u, S.TNat):
        return S.TNat(None if None in (t.bound, u.bound) else max(t.bound, u.bound))
    if isinstance(t, S.TMon) and isinstance(u, S.TMon):
        inner = join_types(t.inner, u.inner)
        if inner is None:
            return None
        return S.TMon(t.eff | u.eff, max(t.cost, u.cost), inner)
    if isinstance(t, S.TProd) and isinstance(u, S.TProd):
        l, r = join_types(t.left, u.left), join_types(t.right, u.right)
        return None if l is None or r is None else S.TProd(l, r)
    return None


def _mismatch(t: S.Term, expected: S.Type, actual: S.Type) -> TypeCheckError:
    if isinstance(expected, S.TMon) and isinstance(actual, S.TMon):
        if not effect_subset((), actual.eff, expected.eff):
            extra = S.Effect(actual.eff.locs - expected.eff.locs, actual.eff.vars - expected.eff.vars)
            return EffectEscape(f"effect {extra} escapes the declared effect {expected.eff}", t, expected, actual)
        if actual.cost > expected.cost:
            return CostOverflow(f"cost {actual.cost} exceeds the declared bound {expected.cost}", t, expected, actual)
    from .surface import show_type

    return TypeMismatch(f"expected {show_type(expected)}, found {show_type(actual)}", t, expected, actual)


# ---------------------------------------------------------------- adversary types


@dataclass(frozen=True)
class AdvShape:
    """∀α.(σ → T_{α,k}τ) → T_{α∪Σ,k'}τ'."""

    alpha: str
    sigma: S.Type
    k: int
    tau: S.Type
    private: S.Effect
    kprime: int
    tauprime: S.Type

    def oracle_type(self, eff: S.Effect) -> S.Type:
        return S.TArrow(self.sigma, S.TMon(eff, self.k, self.tau))


def adversary_shape(ty: S.Type) -> AdvShape:
    if not isinstance(ty, S.TForall):
        raise AdversaryMismatch("adversary type must quantify over a region variable", actual=ty)
    a = ty.var
    body = ty.body
    if not (isinstance(body, S.TArrow) and isinstance(body.dom, S.TArrow)
            and isinstance(body.dom.cod, S.TMon) and isinstance(body.cod, S.TMon)):
        raise AdversaryMismatch("adversary type must have the shape (σ → T τ) → T τ'", actual=ty)
    arg = body.dom.cod
    res = body.cod
    if arg.eff != S.Effect.of(vars=[a]):
        raise AdversaryMismatch("the oracle effect must be exactly the quantified region", actual=ty)
    if a not in res.eff.vars:
        raise AdversaryMismatch("the result effect must include the quantified region", actual=ty)
    private = S.Effect(res.eff.locs, res.eff.vars - {a})
    return AdvShape(a, body.dom.dom, arg.cost, arg.inner, private, res.cost, res.inner)


# ---------------------------------------------------------------- checker


ARITH = {"+", "-", "*", "/", "pow", "min", "max"}
COMPARE = {"=", "<>", "<", "<=", ">", ">="}


class TypeChecker:
    def __init__(self, cfg: ProgramConfig):
        self.cfg = cfg

    # entry points ---------------------------------------------------

    def check(self, ctx: Ctx, t: S.Term, expected: S.Type) -> S.Type:
        self.wf_type(ctx, expected)
        if isinstance(expected, S.TForall):
            a = expected.var
            body = expected.body
            if a in ctx.regions or a in ctx.free_regions():
                fresh = S.fresh_name(a, set(ctx.regions) | ctx.free_regions() | S.type_region_vars(expected))
                body = S.subst_region(body, a, S.Effect.of(vars=[fresh]))
                a = fresh
            self.check(ctx.with_region(a), t, body)
            return expected
        if isinstance(t, S.Lam) and isinstance(expected, S.TArrow):
            dom = expected.dom if t.ty is None else t.ty
            if t.ty is not None:
                self.wf_type(ctx, t.ty)
                if not check_subtype(ctx.regions, expected.dom, t.ty):
                    raise _mismatch(t, S.TArrow(t.ty, expected.cod), expected)
            self.check(ctx.bind(t.var, dom), t.body, expected.cod)
            return expected
        if isinstance(t, S.Case):
            self.check(ctx, t.guard, S.BOOL)
            self.check(ctx, t.then, expected)
            self.check(ctx, t.else_, expected)
            return expected
        if isinstance(t, S.App) and isinstance(t.fn, S.Lam) and t.fn.ty is None:
            arg = self.infer(ctx, t.arg)
            self.check(ctx.bind(t.fn.var, arg), t.fn.body, expected)
            return expected
        actual = self.infer(ctx, t)
        if not check_subtype(ctx.regions, actual, expected):
            raise _mismatch(t, expected, actual)
        return expected

    def infer(self, ctx: Ctx, t: S.Term) -> S.Type:
        m = getattr(self, "_infer_" + type(t).__name__, None)
        if m is None:
            raise TypeMismatch(f"cannot type {type(t).__name__}", t)
        return m(ctx, t)

    # well-formedness --------------------------------------------------

    def wf_type(self, ctx: Ctx, ty: S.Type):
        free = S.type_region_vars(ty) - set(ctx.regions)
        if free:
            raise RegionError(f"region variable(s) {sorted(free)} not in the grading context", actual=ty)
        for loc in _type_locs(ty):
            if not self.cfg.has_location(loc):
                raise TypeMismatch(f"unknown location {loc} in a type", actual=ty)

    # rules -------------------------------------------------------------

    def _infer_Var(self, ctx, t):
        if t.name in ctx.vars:
            return ctx.vars[t.name]
        raise UnboundVariable(f"unbound variable {t.name}", t)

    def _infer_AdvVar(self, ctx, t):
        if t.name in ctx.advs:
            return ctx.advs[t.name]
        raise UnboundVariable(f"adversary {t.name} is not in the adversary context", t)

    def _infer_Star(self, ctx, t):
        return S.UNIT

    def _infer_Zero(self, ctx, t):
        return S.TNat(0)

    def _infer_Succ(self, ctx, t):
        a = self.infer(ctx, t.arg)
        if not isinstance(a, S.TNat):
            raise _mismatch(t.arg, S.TNat(None), a)
        return S.TNat(None if a.bound is None else a.bound + 1)

    def _infer_Lit(self, ctx, t):
        v = t.value
        if isinstance(v, bool):
            return S.BOOL
        if isinstance(v, int) and v >= 0:
            return S.TNat(v)
        if v is None or isinstance(v, (int, Fraction)):
            return S.VAL
        raise TypeMismatch(f"literal {v!r} has no type", t)

    def _infer_Prim(self, ctx, t):
        op = t.op
        args = [self.infer(ctx, a) for a in t.args]
        for a, ty in zip(t.args, args):
            if not S.is_first_order(ty) or S.is_monadic(ty):
                raise TypeMismatch(f"operator {op} applied to a non-first-order argument", a, None, ty)
        if op in ("and", "or", "not"):
            for a, ty in zip(t.args, args):
                if ty != S.BOOL:
                    raise _mismatch(a, S.BOOL, ty)
            return S.BOOL
        if op in COMPARE:
            numeric = [isinstance(ty, (S.TNat, S.TVal)) for ty in args]
            if op not in ("=", "<>"):
                for a, ty, ok in zip(t.args, args, numeric):
                    if not ok:
                        raise _mismatch(a, S.VAL, ty)
            elif len(args) == 2 and S.BOOL in args and any(numeric):
                # a Boolean never equals a number, so the test is a typo (e.g. a Bool array index)
                a = t.args[0] if args[0] == S.BOOL else t.args[1]
                raise _mismatch(a, S.VAL, S.BOOL)
            return S.BOOL
        if op == "isnone":
            return S.BOOL
        if op in ARITH:
            if all(isinstance(a, S.TNat) for a in args) and op in ("+", "*", "-", "min", "max"):
                bs = [a.bound for a in args]
                if op == "-":
                    return args[0]
                if None in bs:
                    return S.TNat(None)
                if op == "+":
                    return S.TNat(sum(bs))
                if op == "*":
                    out = 1
                    for b in bs:
                        out *= b
                    return S.TNat(out)
                return S.TNat(max(bs))
            for a, ty in zip(t.args, args):
                if not (isinstance(ty, (S.TNat, S.TVal))):
                    raise _mismatch(a, S.VAL, ty)
            return S.VAL
        raise TypeMismatch(f"primitive {op} is not allowed in programs", t)

    def _infer_Lam(self, ctx, t):
        if t.ty is None:
            raise TypeMismatch("unannotated lambda outside a binding", t)
        self.wf_type(ctx, t.ty)
        return S.TArrow(t.ty, self.infer(ctx.bind(t.var, t.ty), t.body))

    def _infer_App(self, ctx, t):
        if isinstance(t.fn, S.Lam) and t.fn.ty is None:
            arg = self.infer(ctx, t.arg)
            return self.infer(ctx.bind(t.fn.var, arg), t.fn.body)
        if isinstance(t.fn, S.AdvVar):
            return self.adv_app(ctx, t)
        f = self.infer(ctx, t.fn)
        if isinstance(f, S.TForall):
            return self.forall_elim_app(ctx, t, f)
        if not isinstance(f, S.TArrow):
            raise TypeMismatch("application of a non-function", t.fn, None, f)
        self.check(ctx, t.arg, f.dom)
        return f.cod

    def adv_app(self, ctx, t):
        name = t.fn.name
        if name not in ctx.advs:
            raise UnboundVariable(f"adversary {name} is not in the adversary context", t.fn)
        shape = adversary_shape(ctx.advs[name])
        a = shape.alpha
        if a in ctx.regions:
            a = S.fresh_name(a, set(ctx.regions))
        inner = self.infer(ctx.with_region(a), t.arg)
        if not (isinstance(inner, S.TArrow) and isinstance(inner.cod, S.TMon)):
            raise AdversaryMismatch("adversary argument must be a monadic function", t.arg, None, inner)
        oracle_eff = inner.cod.eff
        if a in oracle_eff.vars:
            raise AdversaryMismatch("the oracle effect may not mention the quantified region", t.arg, None, inner)
        want = shape.oracle_type(oracle_eff)
        if not check_subtype(ctx.regions, inner, want):
            raise AdversaryMismatch("oracle does not match the adversary's argument type", t.arg, want, inner)
        return S.TMon(shape.private | oracle_eff, shape.kprime, shape.tauprime)

    def forall_elim_app(self, ctx, t, f: S.TForall):
        arg = self.infer(ctx, t.arg)
        inst = _match_region(f.var, f.body.dom if isinstance(f.body, S.TArrow) else f.body, arg)
        body = S.subst_region(f.body, f.var, inst)
        if not isinstance(body, S.TArrow):
            raise TypeMismatch("application of a non-function", t.fn, None, body)
        if not check_subtype(ctx.regions, arg, body.dom):
            raise _mismatch(t.arg, body.dom, arg)
        return body.cod

    def _infer_Pair(self, ctx, t):
        return S.TProd(self.infer(ctx, t.left), self.infer(ctx, t.right))

    def _infer_Proj1(self, ctx, t):
        p = self.infer(ctx, t.arg)
        if not isinstance(p, S.TProd):
            raise TypeMismatch("projection from a non-pair", t.arg, None, p)
        return p.left

    def _infer_Proj2(self, ctx, t):
        p = self.infer(ctx, t.arg)
        if not isinstance(p, S.TProd):
            raise TypeMismatch("projection from a non-pair", t.arg, None, p)
        return p.right

    def _infer_Case(self, ctx, t):
        self.check(ctx, t.guard, S.BOOL)
        a = self.infer(ctx, t.then)
        b = self.infer(ctx, t.else_)
        j = join_types(a, b)
        if j is None:
            raise _mismatch(t.else_, a, b)
        return j

    def _infer_Read(self, ctx, t):
        self._loc(t, t.loc)
        return S.TMon(S.Effect.of([t.loc]), 0, S.VAL)

    def _infer_Write(self, ctx, t):
        self._loc(t, t.loc)
        self.check(ctx, t.arg, S.VAL)
        return S.TMon(S.Effect.of([t.loc]), 0, S.UNIT)

    def _infer_Skip(self, ctx, t):
        return S.TMon(S.EMPTY, 0, S.UNIT)

    def _infer_UnitM(self, ctx, t):
        return S.TMon(S.EMPTY, 0, self.infer(ctx, t.arg))

    def _infer_Sample(self, ctx, t):
        decl = self.cfg.dists.get(t.dist)
        if decl is None:
            raise TypeMismatch(f"unknown distribution {t.dist}", t)
        if len(decl.arg_types) != len(t.args):
            raise TypeMismatch(f"{t.dist} expects {len(decl.arg_types)} arguments", t)
        for a, ty in zip(t.args, decl.arg_types):
            self.check(ctx, a, ty)
        return S.TMon(S.EMPTY, 0, decl.result)

    def _infer_LetM(self, ctx, t):
        m1 = self.infer(ctx, t.bound)
        if not isinstance(m1, S.TMon):
            raise TypeMismatch("let-bound term must be monadic", t.bound, None, m1)
        m2 = self.infer(ctx.bind(t.var, m1.inner), t.body)
        if not isinstance(m2, S.TMon):
            raise TypeMismatch("let body must be monadic", t.body, None, m2)
        return S.TMon(m1.eff | m2.eff | S.eff(m1.inner), m1.cost + m2.cost, m2.inner)

    def _infer_MFold(self, ctx, t):
        n = self.infer(ctx, t.count)
        if not isinstance(n, S.TNat) or n.bound is None:
            raise TypeMismatch("mfold count must have a bounded natural type", t.count, S.TNat(0), n)
        init = self.infer(ctx, t.init)
        if not isinstance(init, S.TMon):
            raise TypeMismatch("mfold initial computation must be monadic", t.init, None, init)
        acc = init.inner
        if isinstance(t.step, S.Lam):
            dom = init.inner if t.step.ty is None else t.step.ty
            acc = dom  # an annotated step widens the accumulator
            if not check_subtype(ctx.regions, init.inner, dom):
                raise _mismatch(t.step, S.TArrow(init.inner, init), S.TArrow(dom, init))
            body_ty = self.infer(ctx.bind(t.step.var, dom), t.step.body)
        else:
            st = self.infer(ctx, t.step)
            if not isinstance(st, S.TArrow):
                raise TypeMismatch("mfold step must be a function", t.step, None, st)
            if not check_subtype(ctx.regions, init.inner, st.dom):
                raise _mismatch(t.step, S.TArrow(init.inner, st.cod), st)
            body_ty = st.cod
            acc = st.dom
        if not isinstance(body_ty, S.TMon) or not check_subtype(ctx.regions, body_ty.inner, acc):
            raise TypeMismatch("mfold step must return a computation of the accumulator type", t.step, None, body_ty)
        return S.TMon(init.eff | body_ty.eff, init.cost + n.bound * body_ty.cost, acc)

    def _loc(self, t, loc):
        if not self.cfg.has_location(loc):
            err = MemExprError if isinstance(t, S.MEM_FORMS) else TypeMismatch
            raise err(f"unknown location {loc}", t)

    # memory expressions (assertion language) -----------------------------

    def _infer_Select(self, ctx, t):
        self._mem(ctx, t.mem)
        self._loc(t, t.loc)
        return S.VAL

    def _infer_Store(self, ctx, t):
        self._mem(ctx, t.mem)
        self._loc(t, t.loc)
        v = self.infer(ctx, t.val)
        if not check_subtype(ctx.regions, v, S.VAL):
            raise MemExprError("stored value must have type val", t.val, S.VAL, v)
        return S.MEM

    def _infer_ArrSel(self, ctx, t):
        self._mem(ctx, t.mem)
        if t.array not in self.cfg.arrays:
            raise MemExprError(f"unknown array {t.array}", t)
        i = self.infer(ctx, t.index)
        if not isinstance(i, (S.TNat, S.TVal)):
            raise MemExprError("array index must be a number", t.index, S.TNat(None), i)
        return S.VAL

    def _mem(self, ctx, m):
        ty = self.infer(ctx, m)
        if ty != S.MEM:
            raise MemExprError("memory access on a non-memory", m, S.MEM, ty)


def _type_locs(ty: S.Type) -> set:
    out: set = set()

    def go(t):
        if isinstance(t, S.TMon):
            out.update(t.eff.locs)
            go(t.inner)
        elif isinstance(t, S.TArrow):
            go(t.dom)
            go(t.cod)
        elif isinstance(t, S.TProd):
            go(t.left)
            go(t.right)
        elif isinstance(t, S.TForall):
            go(t.body)

    go(ty)
    return out


def _match_region(var: str, pattern: S.Type, actual: S.Type) -> S.Effect:
    """Instantiate `var` so that the pattern's effects cover the actual ones."""
    found = S.Effect()

    def go(p, a):
        nonlocal found
        if isinstance(p, S.TMon) and isinstance(a, S.TMon):
            if var in p.eff.vars:
                rest = S.Effect(a.eff.locs - p.eff.locs, a.eff.vars - (p.eff.vars - {var}))
                found = found | rest
            go(p.inner, a.inner)
        elif isinstance(p, S.TArrow) and isinstance(a, S.TArrow):
            go(p.dom, a.dom)
            go(p.cod, a.cod)
        elif isinstance(p, S.TProd) and isinstance(a, S.TProd):
            go(p.left, a.left)
            go(p.right, a.right)

    go(pattern, actual)
    return found


# ---------------------------------------------------------------- programs


def check_type(cfg: ProgramConfig, ctx: Ctx, t: S.Term, expected: S.Type) -> S.Type:
    return TypeChecker(cfg).check(ctx, t, expected)


def infer_type(cfg: ProgramConfig, ctx: Ctx, t: S.Term) -> S.Type:
    return TypeChecker(cfg).infer(ctx, t)


def check_mem_expr(cfg: ProgramConfig, gamma: dict, e: S.Term, expected: S.Type | None = None) -> S.Type:
    tc = TypeChecker(cfg)
    ctx = Ctx.make(vars=gamma)
    ty = tc.infer(ctx, e)
    if expected is not None and not check_subtype((), ty, expected):
        raise MemExprError("memory expression has the wrong type", e, expected, ty)
    return ty


def check_numerals(cfg: ProgramConfig, t: S.Term):
    """Numerals in programs must lie inside the configured value domains."""
    bound = max([v for dom in [cfg.values, *cfg.domains.values()] for v in dom
                 if isinstance(v, int) and not isinstance(v, bool)] +
                [d.size for d in cfg.dists.values()] + [len(c) for c in cfg.arrays.values()] + [0])

    def go(n):
        if isinstance(n, S.Lit) and isinstance(n.value, int) and not isinstance(n.value, bool):
            if n.value > bound:
                raise ConfigError(f"numeral {n.value} exceeds the configured value domain")
        for c in S.children(n):
            if isinstance(c, S.Term):
                go(c)

    go(t)


def program_ctx(prog, exclude_adv: str | None = None) -> Ctx:
    advs = {k: v for k, v in prog.adversaries.items() if k != exclude_adv}
    return Ctx.make(advs=advs)


def check_program(prog, only: str | None = None) -> dict:
    """Type-check every definition and adversary implementation; name -> type."""
    tc = TypeChecker(prog.config)
    out = {}
    for name, d in prog.defs.items():
        if only is not None and name != only:
            continue
        check_numerals(prog.config, d.body)
        for loc in _type_locs(d.type()):
            tc._loc(d.body, loc)
        tc.check(program_ctx(prog), d.as_term(), d.type())
        out[name] = d.type()
    for name, (adv, term) in prog.impls.items():
        if only is not None and name != only:
            continue
        ty = prog.adversaries[adv]
        adversary_shape(ty)
        check_numerals(prog.config, term)
        tc.check(program_ctx(prog, exclude_adv=adv).without_adv(adv), term, ty)
        if S.free_vars(term):
            raise AdversaryMismatch(f"adversary implementation {name} is not closed", term)
        out[name] = ty
    if only is not None and not out:
        raise ConfigError(f"no definition or implementation named {only}")
    return out
