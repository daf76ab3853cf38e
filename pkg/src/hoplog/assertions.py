"""Assertion semantics (Boolean and quantitative), normalization and read sets."""

from __future__ import annotations

import itertools
from fractions import Fraction

from . import syntax as S
from .config import ConfigError, ProgramConfig
from .semantics import INF, MEM_OPS, PURE_OPS, Closure, EvalError, Interpreter, mem_op_fn, qadd, qmul

BOOL, QUANT = "bool", "quant"
ALL = None  # read-set marker: every location


class AssertionError_(Exception):
    pass


# ---------------------------------------------------------------- normalization


def _lit(v) -> S.Term:
    if isinstance(v, bool) or v is None:
        return S.Lit(v)
    if isinstance(v, (int, Fraction)):
        if v == 0:
            return S.Zero()
        return S.num(v)
    return None


def _literal_value(t):
    if isinstance(t, S.Zero):
        return 0, True
    if isinstance(t, S.Lit) and not isinstance(t.value, str):
        return t.value, True
    if isinstance(t, S.Star):
        return (), True
    return None, False


def normalize(n, cfg: ProgramConfig):
    """Bottom-up memory-expression normalization plus constant folding and β."""
    kids = S.children(n)
    if kids:
        new = [normalize(k, cfg) if not isinstance(k, S.Type) else k for k in kids]
        if any(a is not b for a, b in zip(new, kids)):
            n = S._rebuild(n, new)
    return _step(n, cfg)


def _step(n, cfg):
    if isinstance(n, S.Select):
        m = n.mem
        while isinstance(m, S.Store):
            if m.loc == n.loc:
                return m.val
            m = m.mem
        if m is not n.mem:
            return S.Select(m, n.loc)
        return n
    if isinstance(n, S.ArrSel):
        i = S.nat_literal(n.index)
        cells = cfg.arrays.get(n.array)
        if i is not None and cells is not None and 0 <= i < len(cells):
            return _step(S.Select(n.mem, cells[i]), cfg)
        return n
    if isinstance(n, S.Prim):
        if n.op in MEM_OPS and n.args and isinstance(n.args[1], S.Lit):
            cells = set(cfg.arrays.get(n.args[1].value, ()))
            m = n.args[0]
            while isinstance(m, S.Store) and m.loc not in cells:
                m = m.mem
            if m is not n.args[0]:
                return S.Prim(n.op, (m,) + n.args[1:])
            return n
        f = PURE_OPS.get(n.op)
        if f is not None:
            vals = [_literal_value(a) for a in n.args]
            if all(ok for _, ok in vals):
                try:
                    out = _lit(f(*[v for v, _ in vals]))
                except (EvalError, TypeError, ZeroDivisionError):
                    return n
                if out is not None:
                    return out
        return n
    if isinstance(n, S.Case):
        if n.guard == S.TRUE:
            return n.then
        if n.guard == S.FALSE:
            return n.else_
        return n
    if isinstance(n, S.Join):
        # (<b = tt> meet P) join (<b = ff> meet P) is P for a boolean guard b
        g1, g2 = _guarded(n.left), _guarded(n.right)
        if g1 and g2 and g1[0] == g2[0] and {g1[1], g2[1]} == {True, False} and S.alpha_eq(g1[2], g2[2]):
            return g1[2]
        return n
    if isinstance(n, S.Succ):
        k = S.nat_literal(n.arg)
        if k is not None and not isinstance(n.arg, S.Succ):
            return S.num(k + 1)
        return n
    if isinstance(n, (S.Proj1, S.Proj2)) and isinstance(n.arg, S.Pair):
        return n.arg.left if isinstance(n, S.Proj1) else n.arg.right
    if isinstance(n, S.App) and isinstance(n.fn, S.Lam) and S.is_pure(n.arg):
        return normalize(S.substitute(n.fn.body, {n.fn.var: n.arg}), cfg)
    return n


def _guarded(a):
    if isinstance(a, S.Meet) and isinstance(a.left, S.Inj):
        p = a.left.prop
        if isinstance(p, S.Rel) and p.name == "=" and len(p.args) == 2 and p.args[1] in (S.TRUE, S.FALSE):
            return p.args[0], p.args[1] == S.TRUE, a.right
    return None


def same(a, b, cfg: ProgramConfig) -> bool:
    """Equality up to normalization and α-equivalence."""
    return a == b or S.alpha_eq(normalize(a, cfg), normalize(b, cfg))


# ---------------------------------------------------------------- read sets


def mem_reads(n, memvar: str, cfg: ProgramConfig):
    """Locations of `memvar` the node can observe; ALL when unrestricted."""
    out: set = set()
    every = [False]

    def add(demand):
        if demand is ALL:
            every[0] = True
        else:
            out.update(demand)

    def visit(x, demand, bound=frozenset()):
        if isinstance(x, S.Var):
            if x.name == memvar and x.name not in bound:
                add(demand)
            return
        if isinstance(x, S.Select):
            visit(x.mem, {x.loc}, bound)
            return
        if isinstance(x, S.ArrSel):
            visit(x.mem, set(cfg.arrays.get(x.array, ())) or ALL, bound)
            visit(x.index, ALL, bound)
            return
        if isinstance(x, S.Store):
            visit(x.mem, demand, bound)
            visit(x.val, ALL, bound)
            return
        if isinstance(x, (S.Prim, S.Rel)) and (getattr(x, "op", None) in MEM_OPS or getattr(x, "name", None) in MEM_OPS):
            args = x.args
            if len(args) >= 2 and isinstance(args[1], S.Lit):
                visit(args[0], set(cfg.arrays.get(args[1].value, ())) or ALL, bound)
                for a in args[2:]:
                    visit(a, ALL, bound)
                return
        b = S.binder(x)
        inner = bound | {b} if b else bound
        for c in S.children(x):
            if isinstance(c, S.Type):
                continue
            visit(c, ALL, inner if b and _binds_child(x, c) else bound)

    visit(n, ALL)
    return ALL if every[0] else frozenset(out)


def _binds_child(node, child) -> bool:
    if isinstance(node, S.LetM):
        return child is node.body
    if isinstance(node, S.Lam):
        return child is node.body
    if isinstance(node, (S.PForall, S.PExists)):
        return child is node.body
    return False


# ---------------------------------------------------------------- finite domains


def type_domain(cfg: ProgramConfig, ty: S.Type, locs=None) -> list:
    """Finite carrier of a first-order type (memories restricted to `locs`)."""
    if isinstance(ty, S.TBool):
        return [False, True]
    if isinstance(ty, S.TUnit):
        return [()]
    if isinstance(ty, S.TNat):
        if ty.bound is None:
            raise ConfigError("cannot enumerate an unbounded natural type")
        return list(range(ty.bound + 1))
    if isinstance(ty, S.TVal):
        return list(cfg.values)
    if isinstance(ty, S.TProd):
        return [(a, b) for a in type_domain(cfg, ty.left) for b in type_domain(cfg, ty.right)]
    if isinstance(ty, S.TMem):
        locs = cfg.locations if locs is None else locs
        base = cfg.default_memory()
        idx = [cfg.index(l) for l in locs]
        out = []
        for vals in itertools.product(*[cfg.domain(l) for l in locs]):
            m = list(base)
            for i, v in zip(idx, vals):
                m[i] = v
            out.append(tuple(m))
        return out
    raise ConfigError(f"type {ty} has no finite enumeration; the obligation must be admitted")


def type_size(cfg: ProgramConfig, ty: S.Type, locs=None) -> int:
    if isinstance(ty, S.TBool):
        return 2
    if isinstance(ty, S.TUnit):
        return 1
    if isinstance(ty, S.TNat):
        if ty.bound is None:
            raise ConfigError("cannot enumerate an unbounded natural type")
        return ty.bound + 1
    if isinstance(ty, S.TVal):
        return len(cfg.values)
    if isinstance(ty, S.TProd):
        return type_size(cfg, ty.left) * type_size(cfg, ty.right)
    if isinstance(ty, S.TMem):
        return cfg.memory_space_size(cfg.locations if locs is None else locs)
    raise ConfigError(f"type {ty} has no finite enumeration; the obligation must be admitted")


# ---------------------------------------------------------------- compilation


class Compiler:
    """Turns terms, propositions and assertions into closures over environments."""

    def __init__(self, cfg: ProgramConfig, mode: str = BOOL):
        self.cfg = cfg
        self.mode = mode
        self.interp = Interpreter(cfg)

    # terms
    def term(self, t: S.Term):
        cfg = self.cfg
        if isinstance(t, S.Var):
            name = t.name

            def var(env):
                try:
                    return env[name]
                except KeyError:
                    raise EvalError(f"unbound variable {name}") from None

            return var
        if isinstance(t, (S.Lit, S.Zero, S.Star)):
            v, _ = _literal_value(t)
            if isinstance(t, S.Lit):
                v = t.value
            return lambda env: v
        if isinstance(t, S.Succ):
            f = self.term(t.arg)
            return lambda env: f(env) + 1
        if isinstance(t, S.Select):
            m = self.term(t.mem)
            i = cfg.index(t.loc)
            return lambda env: m(env)[i]
        if isinstance(t, S.Store):
            m, val = self.term(t.mem), self.term(t.val)
            i = cfg.index(t.loc)

            def store(env):
                mm = list(m(env))
                mm[i] = val(env)
                return tuple(mm)

            return store
        if isinstance(t, S.ArrSel):
            m, ix = self.term(t.mem), self.term(t.index)
            cells = cfg.arrays.get(t.array)
            if cells is None:
                raise ConfigError(f"unknown array {t.array}")
            idx = [cfg.index(c) for c in cells]

            def arrsel(env):
                i = ix(env)
                if not isinstance(i, int) or isinstance(i, bool) or not 0 <= i < len(idx):
                    raise EvalError(f"index {i!r} out of range for {t.array}")
                return m(env)[idx[i]]

            return arrsel
        if isinstance(t, S.Prim):
            return self._prim(t.op, t.args)
        if isinstance(t, S.Case):
            g, a, b = self.term(t.guard), self.term(t.then), self.term(t.else_)

            def case(env):
                gv = g(env)
                if not isinstance(gv, bool):
                    raise EvalError("case guard is not a boolean")
                return a(env) if gv else b(env)

            return case
        if isinstance(t, S.Pair):
            a, b = self.term(t.left), self.term(t.right)
            return lambda env: (a(env), b(env))
        if isinstance(t, S.Proj1):
            a = self.term(t.arg)
            return lambda env: a(env)[0]
        if isinstance(t, S.Proj2):
            a = self.term(t.arg)
            return lambda env: a(env)[1]
        interp = self.interp
        return lambda env: interp.eval(t, env)

    def _prim(self, op, args):
        cfg = self.cfg
        if op in MEM_OPS:
            m = self.term(args[0])
            name = args[1].value
            if name not in cfg.arrays:
                raise ConfigError(f"unknown array {name}")
            rest = [self.term(a) for a in args[2:]]
            fn = mem_op_fn(cfg, op, name)
            if not rest:
                return lambda env: fn(m(env), ())
            return lambda env: fn(m(env), [r(env) for r in rest])
        fs = [self.term(a) for a in args]
        if op == "and":
            return lambda env: _b(fs[0](env)) and _b(fs[1](env))
        if op == "or":
            return lambda env: _b(fs[0](env)) or _b(fs[1](env))
        f = PURE_OPS.get(op)
        if f is None:
            raise ConfigError(f"unknown primitive {op}")
        if len(fs) == 1:
            a = fs[0]
            return lambda env: f(a(env))
        if len(fs) == 2:
            a, b = fs
            return lambda env: f(a(env), b(env))
        return lambda env: f(*[g(env) for g in fs])

    # propositions
    def prop(self, p: S.Prop):
        if isinstance(p, S.PTrue):
            return lambda env: True
        if isinstance(p, S.PFalse):
            return lambda env: False
        if isinstance(p, S.And):
            a, b = self.prop(p.left), self.prop(p.right)
            return lambda env: a(env) and b(env)
        if isinstance(p, S.Or):
            a, b = self.prop(p.left), self.prop(p.right)
            return lambda env: a(env) or b(env)
        if isinstance(p, S.Implies):
            a, b = self.prop(p.left), self.prop(p.right)
            return lambda env: (not a(env)) or b(env)
        if isinstance(p, S.Not):
            a = self.prop(p.arg)
            return lambda env: not a(env)
        if isinstance(p, (S.PForall, S.PExists)):
            body = self.prop(p.body)
            dom = type_domain(self.cfg, p.ty)
            var = p.var
            q = all if isinstance(p, S.PForall) else any

            def quant(env):
                e = dict(env)

                def at(x):
                    e[var] = x
                    return body(e)

                return q(at(x) for x in dom)

            return quant
        if isinstance(p, S.Rel):
            return self._rel(p.name, p.args)
        raise AssertionError_(f"not a proposition: {p!r}")

    def _rel(self, name, args):
        if name == "holds":
            f = self.term(args[0])
            return lambda env: f(env) is True
        if name == "member":
            x = self.term(args[0])
            rest = [self.term(a) for a in args[1:]]
            return lambda env: any(PURE_OPS["="](x(env), r(env)) for r in rest)
        f = self._prim(name, args)
        return lambda env: f(env) is True

    # assertions
    def assertion(self, a: S.Assertion):
        return self._bool(a) if self.mode == BOOL else self._quant(a)

    def _bool(self, a):
        if isinstance(a, S.Top):
            return lambda env: True
        if isinstance(a, S.Bot):
            return lambda env: False
        if isinstance(a, S.Inj):
            return self.prop(a.prop)
        if isinstance(a, S.Meet):
            x, y = self._bool(a.left), self._bool(a.right)
            return lambda env: x(env) and y(env)
        if isinstance(a, S.Join):
            x, y = self._bool(a.left), self._bool(a.right)
            return lambda env: x(env) or y(env)
        if isinstance(a, S.Atom) and a.fn == "holds":
            f = self.term(a.args[0])
            return lambda env: f(env) is True
        raise AssertionError_(f"{type(a).__name__} is not a Boolean assertion")

    def _quant(self, a):
        if isinstance(a, S.Top):
            return lambda env: Fraction(0)
        if isinstance(a, S.Bot):
            return lambda env: INF
        if isinstance(a, S.Inj):
            p = self.prop(a.prop)
            return lambda env: Fraction(0) if p(env) else INF
        if isinstance(a, S.Meet):
            x, y = self._quant(a.left), self._quant(a.right)
            return lambda env: max(x(env), y(env))
        if isinstance(a, S.Join):
            x, y = self._quant(a.left), self._quant(a.right)
            return lambda env: min(x(env), y(env))
        if isinstance(a, S.Iverson):
            p = self.prop(a.prop)
            return lambda env: Fraction(1) if p(env) else Fraction(0)
        if isinstance(a, S.Plus):
            x, y = self._quant(a.left), self._quant(a.right)
            return lambda env: qadd(x(env), y(env))
        if isinstance(a, S.Scale):
            x, k = self._quant(a.arg), Fraction(a.factor)
            return lambda env: qmul(k, x(env))
        if isinstance(a, S.Times):
            x, y = self._quant(a.left), self._quant(a.right)
            return lambda env: qmul(x(env), y(env))
        if isinstance(a, S.Atom) and a.fn == "q":
            f = self.term(a.args[0])

            def q(env):
                v = f(env)
                if isinstance(v, bool) or not isinstance(v, (int, Fraction, float)):
                    raise EvalError(f"quantity evaluated to a non-number {v!r}")
                return Fraction(v) if not isinstance(v, float) else v

            return q
        raise AssertionError_(f"{type(a).__name__} is not a quantitative assertion")


def _b(x):
    if not isinstance(x, bool):
        raise EvalError(f"expected a boolean, got {x!r}")
    return x


def holds(cfg, a: S.Assertion, env: dict, mode: str = BOOL):
    return Compiler(cfg, mode).assertion(a)(env)


def entails(mode: str, lhs, rhs) -> bool:
    """P ⇛ Q: implication for Booleans, pointwise ≥ for quantities."""
    if mode == BOOL:
        return (not lhs) or rhs
    return lhs >= rhs


# ---------------------------------------------------------------- well-formedness


def check_mode(a: S.Assertion, mode: str):
    """Quantitative connectives are rejected in Boolean assertions."""
    def go(n):
        if isinstance(n, S.Assertion):
            if mode == BOOL and (isinstance(n, S.QUANT_ONLY) or (isinstance(n, S.Atom) and n.fn != "holds")):
                raise AssertionError_(f"{type(n).__name__} is only legal in quantitative assertions")
            if isinstance(n, S.Atom) and n.fn not in ("q", "holds"):
                raise AssertionError_(f"undeclared atom {n.fn}")
            for c in S.children(n):
                go(c)

    go(a)


def conjuncts(p) -> list:
    """Top-level conjuncts of a proposition or of the Inj parts of a meet."""
    if isinstance(p, S.And):
        return conjuncts(p.left) + conjuncts(p.right)
    if isinstance(p, S.Meet):
        return conjuncts(p.left) + conjuncts(p.right)
    if isinstance(p, S.Inj):
        return conjuncts(p.prop)
    if isinstance(p, S.Prop):
        return [p]
    return []


def eq_tau(ty: S.Type, a: S.Term, b: S.Term) -> S.Prop:
    """Extensional equality at a non-monadic type."""
    if isinstance(ty, S.TProd):
        return S.And(eq_tau(ty.left, S.Proj1(a), S.Proj1(b)), eq_tau(ty.right, S.Proj2(a), S.Proj2(b)))
    if isinstance(ty, S.TArrow):
        avoid = S.free_vars(a) | S.free_vars(b)
        y1 = S.fresh_name("y1", avoid)
        y2 = S.fresh_name("y2", avoid | {y1})
        return S.PForall(y1, ty.dom, S.PForall(y2, ty.dom, S.Implies(
            eq_tau(ty.dom, S.Var(y1), S.Var(y2)),
            eq_tau(ty.cod, S.App(a, S.Var(y1)), S.App(b, S.Var(y2))))))
    if isinstance(ty, S.TMon):
        raise AssertionError_("extensional equality is only defined on non-monadic types")
    return S.Rel("=", (a, b))


def is_closure(x) -> bool:
    return isinstance(x, Closure)
