"""Exact finite-distribution semantics of the probabilistic state monad.

A closed monadic program denotes a map  Memory -> Dist(Value x Memory).
Probabilities are Fractions, so every check downstream is exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable

from . import syntax as S
from .config import ConfigError, ProgramConfig, show_memory, show_value, value_key

STAR = ()
INF = S.INF


class EvalError(Exception):
    pass


class MemoryDomainError(EvalError):
    pass


# ---------------------------------------------------------------- distributions


class Dist:
    """Finite probability distribution with exact rational weights."""

    __slots__ = ("_p",)

    def __init__(self, weights: dict, check: bool = True):
        p = {k: Fraction(v) for k, v in weights.items() if v != 0}
        if check:
            if any(v < 0 for v in p.values()):
                raise ValueError("negative probability")
            if sum(p.values()) != 1:
                raise ValueError(f"probabilities sum to {sum(p.values())}, not 1")
        self._p = p

    @staticmethod
    def point(x) -> "Dist":
        return Dist({x: Fraction(1)}, check=False)

    @staticmethod
    def uniform(xs: Iterable) -> "Dist":
        xs = list(xs)
        if not xs:
            raise ValueError("uniform over empty set")
        w = Fraction(1, len(xs))
        out: dict = {}
        for x in xs:
            out[x] = out.get(x, 0) + w
        return Dist(out, check=False)

    def __getitem__(self, x) -> Fraction:
        return self._p.get(x, Fraction(0))

    def __iter__(self):
        return iter(self._p)

    def __len__(self):
        return len(self._p)

    def items(self):
        return self._p.items()

    def support(self) -> list:
        return sorted(self._p, key=_outcome_key)

    def total(self) -> Fraction:
        return sum(self._p.values(), Fraction(0))

    def __eq__(self, other):
        return isinstance(other, Dist) and self._p == other._p

    def __hash__(self):
        return hash(frozenset(self._p.items()))

    def __repr__(self):
        body = ", ".join(f"{x!r}: {self._p[x]}" for x in self.support())
        return f"Dist({{{body}}})"

    def map(self, f: Callable) -> "Dist":
        out: dict = {}
        for x, p in self._p.items():
            y = f(x)
            out[y] = out.get(y, 0) + p
        return Dist(out, check=False)

    def prob(self, event: Callable) -> Fraction:
        return sum((p for x, p in self._p.items() if event(x)), Fraction(0))


def _outcome_key(x):
    try:
        return (0, value_key(x))
    except Exception:
        return (1, repr(x))


def dist_bind(d: Dist, f: Callable[[object], Dist]) -> Dist:
    out: dict = {}
    for x, p in d.items():
        for y, q in f(x).items():
            out[y] = out.get(y, 0) + p * q
    return Dist(out, check=False)


def qadd(a, b):
    if a == INF or b == INF:
        return INF
    return a + b


def qmul(a, b):
    """Product on [0, inf] with 0 * inf = 0."""
    if a == 0 or b == 0:
        return Fraction(0)
    if a == INF or b == INF:
        return INF
    return a * b


def expectation(d: Dist, g: Callable) -> Fraction | float:
    total = Fraction(0)
    for x, p in d.items():
        total = qadd(total, qmul(p, g(x)))
    return total


# ---------------------------------------------------------------- values


@dataclass(eq=False)
class Closure:
    var: str
    body: S.Term
    env: dict

    def __repr__(self):
        return f"<closure {self.var}>"


@dataclass(eq=False)
class Comp:
    """A suspended monadic computation (term plus environment)."""

    term: S.Term
    env: dict

    def __repr__(self):
        return f"<computation {type(self.term).__name__}>"


def show(v) -> str:
    if isinstance(v, (Closure, Comp)):
        return repr(v)
    return show_value(v)


# ---------------------------------------------------------------- primitives


def _num(x):
    if isinstance(x, bool) or x is None or not isinstance(x, (int, Fraction, float)):
        raise EvalError(f"expected a number, got {show(x)}")
    return x


def _div(a, b):
    a, b = _num(a), _num(b)
    if b == 0:
        raise EvalError("division by zero")
    r = Fraction(a) / Fraction(b)
    return r.numerator if r.denominator == 1 else r


def _pow(a, b):
    a, b = _num(a), _num(b)
    if isinstance(b, Fraction) and b.denominator != 1:
        raise EvalError("non-integer exponent")
    r = Fraction(a) ** int(b)
    return r.numerator if r.denominator == 1 else r


def _arith(f):
    def g(a, b):
        r = f(_num(a), _num(b))
        if isinstance(r, Fraction) and r.denominator == 1:
            return r.numerator
        return r

    return g


def _bool(x):
    if not isinstance(x, bool):
        raise EvalError(f"expected a boolean, got {show(x)}")
    return x


def _cmp(f):
    return lambda a, b: f(_num(a), _num(b))


PURE_OPS: dict = {
    "+": _arith(lambda a, b: a + b),
    "-": _arith(lambda a, b: a - b),
    "*": _arith(lambda a, b: a * b),
    "/": _div,
    "pow": _pow,
    "min": _arith(min),
    "max": _arith(max),
    "=": lambda a, b: a == b and type(a) is type(b) or _numeq(a, b),
    "<>": lambda a, b: not (a == b and type(a) is type(b) or _numeq(a, b)),
    "<": _cmp(lambda a, b: a < b),
    "<=": _cmp(lambda a, b: a <= b),
    ">": _cmp(lambda a, b: a > b),
    ">=": _cmp(lambda a, b: a >= b),
    "and": lambda a, b: _bool(a) and _bool(b),
    "or": lambda a, b: _bool(a) or _bool(b),
    "not": lambda a: not _bool(a),
    "isnone": lambda a: a is None,
}

BOOL_OPS = {"=", "<>", "<", "<=", ">", ">=", "and", "or", "not", "isnone", "in-dom", "in-im"}
MEM_OPS = {"card-dom", "card-im", "sum-arr", "in-dom", "in-im"}


def _numeq(a, b):
    num = (int, Fraction)
    return (
        isinstance(a, num)
        and isinstance(b, num)
        and not isinstance(a, bool)
        and not isinstance(b, bool)
        and a == b
    )


def mem_op_fn(cfg: ProgramConfig, op: str, array: str):
    """A fast evaluator for one aggregate over one array: f(mem, extra)."""
    idx = tuple(cfg.index(c) for c in cfg.arrays[array])
    if op == "card-dom":
        return lambda mem, extra: sum(1 for i in idx if mem[i] is not None)
    if op == "card-im":
        return lambda mem, extra: len({mem[i] for i in idx if mem[i] is not None})
    if op == "sum-arr":
        return lambda mem, extra: sum(_num(mem[i]) for i in idx if mem[i] is not None)
    if op == "in-dom":
        def in_dom(mem, extra):
            j = extra[0]
            return 0 <= j < len(idx) and mem[idx[j]] is not None
        return in_dom
    if op == "in-im":
        return lambda mem, extra: extra[0] is not None and any(
            mem[i] is not None and PURE_OPS["="](mem[i], extra[0]) for i in idx)
    raise EvalError(f"unknown memory operation {op}")


def mem_op(cfg: ProgramConfig, op: str, mem: tuple, array: str, extra):
    return mem_op_fn(cfg, op, array)(mem, extra)


# ---------------------------------------------------------------- evaluator


class Interpreter:
    """Call-by-value evaluator plus the monadic runner for one configuration."""

    def __init__(self, cfg: ProgramConfig, trace: list | None = None):
        self.cfg = cfg
        self.trace = trace

    # pure fragment -------------------------------------------------

    def eval(self, t: S.Term, env: dict):
        ev = self.eval
        if isinstance(t, S.Var):
            try:
                return env[t.name]
            except KeyError:
                raise EvalError(f"unbound variable {t.name}") from None
        if isinstance(t, S.Lit):
            return t.value
        if isinstance(t, S.Star):
            return STAR
        if isinstance(t, S.Zero):
            return 0
        if isinstance(t, S.Succ):
            return _num(ev(t.arg, env)) + 1
        if isinstance(t, S.Prim):
            return self.prim(t, env)
        if isinstance(t, S.Lam):
            return Closure(t.var, t.body, env)
        if isinstance(t, S.App):
            f = ev(t.fn, env)
            a = ev(t.arg, env)
            return self.apply(f, a)
        if isinstance(t, S.Pair):
            return (ev(t.left, env), ev(t.right, env))
        if isinstance(t, S.Proj1):
            return ev(t.arg, env)[0]
        if isinstance(t, S.Proj2):
            return ev(t.arg, env)[1]
        if isinstance(t, S.Case):
            g = ev(t.guard, env)
            if not isinstance(g, bool):
                raise EvalError(f"case guard is not a boolean: {show(g)}")
            return ev(t.then if g else t.else_, env)
        if isinstance(t, S.MONADIC_FORMS):
            return Comp(t, env)
        if isinstance(t, S.Select):
            m = ev(t.mem, env)
            return m[self.cfg.index(t.loc)]
        if isinstance(t, S.Store):
            m = list(ev(t.mem, env))
            m[self.cfg.index(t.loc)] = ev(t.val, env)
            return tuple(m)
        if isinstance(t, S.ArrSel):
            m = ev(t.mem, env)
            i = ev(t.index, env)
            cells = self.cfg.arrays.get(t.array)
            if cells is None:
                raise EvalError(f"unknown array {t.array}")
            if not isinstance(i, int) or isinstance(i, bool) or not 0 <= i < len(cells):
                raise EvalError(f"index {show(i)} out of range for {t.array}")
            return m[self.cfg.index(cells[i])]
        if isinstance(t, S.AdvVar):
            raise EvalError(f"adversary {t.name} must be instantiated before running")
        raise EvalError(f"cannot evaluate {type(t).__name__}")

    def prim(self, t: S.Prim, env: dict):
        op = t.op
        if op in MEM_OPS:
            mem = self.eval(t.args[0], env)
            arr = t.args[1]
            name = arr.value if isinstance(arr, S.Lit) else None
            if name not in self.cfg.arrays:
                raise EvalError(f"{op}: unknown array {name}")
            extra = [self.eval(a, env) for a in t.args[2:]]
            return mem_op(self.cfg, op, mem, name, extra)
        if op == "and":
            return _bool(self.eval(t.args[0], env)) and _bool(self.eval(t.args[1], env))
        if op == "or":
            return _bool(self.eval(t.args[0], env)) or _bool(self.eval(t.args[1], env))
        f = PURE_OPS.get(op)
        if f is None:
            raise EvalError(f"unknown primitive {op}")
        return f(*[self.eval(a, env) for a in t.args])

    def apply(self, f, a):
        if not isinstance(f, Closure):
            raise EvalError(f"application of a non-function {show(f)}")
        env = dict(f.env)
        env[f.var] = a
        return self.eval(f.body, env)

    # monadic fragment ----------------------------------------------

    def run(self, t: S.Term, mem: tuple, env: dict | None = None) -> Dist:
        c = self.eval(t, env or {})
        return Dist(self.run_comp(c, mem), check=True)

    def run_comp(self, c, mem: tuple) -> dict:
        if not isinstance(c, Comp):
            raise EvalError(f"expected a monadic computation, got {show(c)}")
        t, env = c.term, c.env
        if isinstance(t, S.UnitM):
            return {(self.eval(t.arg, env), mem): Fraction(1)}
        if isinstance(t, S.Read):
            v = mem[self.cfg.index(t.loc)]
            self._log(f"read {t.loc} -> {show(v)}")
            return {(v, mem): Fraction(1)}
        if isinstance(t, S.Write):
            v = self.eval(t.arg, env)
            i = self.cfg.index(t.loc)
            if v not in self.cfg.domain(t.loc) or isinstance(v, bool):
                raise MemoryDomainError(f"value {show(v)} outside the domain of {t.loc}")
            self._log(f"write {t.loc} <- {show(v)}")
            m = list(mem)
            m[i] = v
            return {(STAR, tuple(m)): Fraction(1)}
        if isinstance(t, S.Skip):
            return {(STAR, mem): Fraction(1)}
        if isinstance(t, S.Sample):
            decl = self.cfg.dists.get(t.dist)
            if decl is None:
                raise EvalError(f"distribution {t.dist} has no table")
            args = tuple(self.eval(a, env) for a in t.args)
            table = decl.table(args)
            self._log(f"sample {t.dist}{args if args else ''} -> {len(table)} outcomes")
            return {(v, mem): Fraction(p) for v, p in table.items()}
        if isinstance(t, S.LetM):
            first = self.run_comp(self.eval(t.bound, env), mem)
            out: dict = {}
            for (v, m1), p in first.items():
                env2 = dict(env)
                env2[t.var] = v
                for k, q in self.run_comp(self.eval(t.body, env2), m1).items():
                    out[k] = out.get(k, 0) + p * q
            return out
        if isinstance(t, S.MFold):
            n = self.eval(t.count, env)
            if not isinstance(n, int) or isinstance(n, bool) or n < 0:
                raise EvalError(f"mfold count must be a natural number, got {show(n)}")
            step = self.eval(t.step, env)
            acc = self.run_comp(self.eval(t.init, env), mem)
            for _ in range(n):
                nxt: dict = {}
                for (v, m1), p in acc.items():
                    for k, q in self.run_comp(self.apply(step, v), m1).items():
                        nxt[k] = nxt.get(k, 0) + p * q
                acc = nxt
            return acc
        raise EvalError(f"not a monadic form: {type(t).__name__}")

    def _log(self, line: str):
        if self.trace is not None:
            self.trace.append(line)


def run(cfg: ProgramConfig, t: S.Term, mem: tuple, env: dict | None = None, trace=None) -> Dist:
    return Interpreter(cfg, trace).run(t, mem, env)


def outcome_table(cfg: ProgramConfig, d: Dist) -> list:
    """Rows (value, memory, probability) sorted deterministically."""
    return [(show(v), show_memory(cfg, m), str(p)) for (v, m), p in sorted(
        d.items(), key=lambda kv: (_outcome_key(kv[0][0]), kv[0][1] and tuple(value_key(x) for x in kv[0][1])))]


def parse_memory(cfg: ProgramConfig, spec: str, base: tuple | None = None) -> tuple:
    """Parse 'a=0,b=1,L=none' (an array name assigns every cell)."""
    mem = list(base if base is not None else cfg.default_memory())
    spec = spec.strip()
    if not spec:
        return tuple(mem)
    for item in spec.split(","):
        if "=" not in item:
            raise ConfigError(f"bad memory assignment {item!r}")
        k, v = (x.strip() for x in item.split("=", 1))
        val = parse_value(v)
        for cell in cfg.cells(k):
            if val not in cfg.domain(cell) or isinstance(val, bool):
                raise ConfigError(f"value {v} outside the domain of {cell}")
            mem[cfg.index(cell)] = val
    return tuple(mem)


def parse_value(text: str):
    text = text.strip()
    if text == "none":
        return None
    if text == "tt":
        return True
    if text == "ff":
        return False
    if "/" in text:
        return Fraction(text)
    return int(text)
