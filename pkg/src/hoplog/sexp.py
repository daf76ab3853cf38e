"""S-expression syntax for assertions, propositions and proof scripts.

Terms inside assertions:
    s, v, x            variables          (sel s a)          s[a]
    (upd s a t)        s[a -> t]          (aget s L e)       s[L[e]]
    (card-dom s L)     |dom L|            (card-im s L)      |im L|
    (sum-arr s L)      sum of cells       (in-dom s L e), (in-im s L e)
    (if b t u) (pair t u) (fst t) (snd t) (S t) (app f t) and primitive ops
Propositions: true false (and ..) (or ..) (=> p q) (not p)
    (forall (x ty) p) (exists (x ty) p) and relations (= a b) (<= a b) ...
Assertions: top bot (inj p) (meet ..) (join ..) (iverson p) (plus ..)
    (scale 1/2 A) (times A B) (q t) for a numeric quantity, (atom f t ..);
    a bare proposition in assertion position means (inj p).
"""

from __future__ import annotations

import re
from fractions import Fraction

from . import syntax as S


class SexpError(Exception):
    pass


# ---------------------------------------------------------------- reader

_TOKEN = re.compile(r"\s+|;[^\n]*|\(|\)|[^\s()]+")
NUM_RE = re.compile(r"-?\d+(/\d+)?$")


def read_all(text: str) -> list:
    """Read every top-level S-expression (lists become Python lists)."""
    stack: list = [[]]
    line = 1
    for m in _TOKEN.finditer(text):
        tok = m.group()
        if tok.isspace() or tok.startswith(";"):
            line += tok.count("\n")
            continue
        if tok == "(":
            stack.append([])
        elif tok == ")":
            if len(stack) == 1:
                raise SexpError(f"unbalanced ')' at line {line}")
            done = stack.pop()
            stack[-1].append(done)
        else:
            stack[-1].append(tok)
    if len(stack) != 1:
        raise SexpError("unbalanced '(' at end of input")
    return stack[0]


def read_one(text: str):
    xs = read_all(text)
    if len(xs) != 1:
        raise SexpError(f"expected one expression, found {len(xs)}")
    return xs[0]


def show(x) -> str:
    if isinstance(x, list):
        return "(" + " ".join(show(y) for y in x) + ")"
    return str(x)


def is_num(x) -> bool:
    return isinstance(x, str) and bool(NUM_RE.match(x))


def rational(x, env: dict | None = None):
    """Evaluate a closed rational expression such as (/ (+ i 1) 8) or inf."""
    env = env or {}
    if isinstance(x, str):
        if x in env:
            return env[x]
        if x == "inf":
            return S.INF
        if is_num(x):
            return Fraction(x)
        raise SexpError(f"not a number: {x}")
    if not x:
        raise SexpError("empty arithmetic expression")
    op, args = x[0], [rational(a, env) for a in x[1:]]
    if op == "+":
        return sum(args, Fraction(0))
    if op == "*":
        out = Fraction(1)
        for a in args:
            out = out * a
        return out
    if op == "-":
        return -args[0] if len(args) == 1 else args[0] - sum(args[1:])
    if op == "/":
        return args[0] / args[1]
    if op == "pow":
        return Fraction(args[0]) ** int(args[1])
    if op == "min":
        return min(args)
    if op == "max":
        return max(args)
    raise SexpError(f"unknown arithmetic operator {op}")


def substitute_symbols(x, binding: dict):
    if isinstance(x, list):
        return [substitute_symbols(y, binding) for y in x]
    return binding.get(x, x)


def expand_macros(x, macros: dict, depth: int = 0):
    """Expand (NAME args..) for macros NAME -> (params, body); bare NAME if no params."""
    if depth > 200:
        raise SexpError("macro expansion too deep")
    if isinstance(x, str):
        if x in macros and not macros[x][0]:
            return expand_macros(macros[x][1], macros, depth + 1)
        return x
    if x and isinstance(x[0], str) and x[0] in macros:
        params, body = macros[x[0]]
        args = [expand_macros(a, macros, depth) for a in x[1:]]
        if len(args) != len(params):
            raise SexpError(f"macro {x[0]} expects {len(params)} arguments, got {len(args)}")
        return expand_macros(substitute_symbols(body, dict(zip(params, args))), macros, depth + 1)
    return [expand_macros(y, macros, depth) for y in x]


def fold_arith(x):
    """Pre-evaluate closed arithmetic on numerals so that macro arguments stay small."""
    if isinstance(x, list):
        ys = [fold_arith(y) for y in x]
        if ys and ys[0] in ("+", "-", "*", "/") and len(ys) > 1 and all(is_num(y) for y in ys[1:]):
            v = rational(ys)
            return _num_text(v)
        return ys
    return x


def _num_text(v) -> str:
    v = Fraction(v)
    return str(v.numerator) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"


# ---------------------------------------------------------------- types


def parse_type(x) -> S.Type:
    if isinstance(x, str):
        simple = {"bool": S.BOOL, "unit": S.UNIT, "val": S.VAL, "mem": S.MEM}
        if x in simple:
            return simple[x]
        m = re.fullmatch(r"nat(\d+|inf)", x)
        if m:
            return S.TNat(None if m.group(1) == "inf" else int(m.group(1)))
        return S.TBase(x)
    head = x[0]
    if head == "nat":
        return S.TNat(None if x[1] == "inf" else int(x[1]))
    if head == "->":
        return S.TArrow(parse_type(x[1]), parse_type(x[2]))
    if head == "*":
        return S.TProd(parse_type(x[1]), parse_type(x[2]))
    raise SexpError(f"bad type {show(x)}")


def type_sexp(t: S.Type):
    if isinstance(t, S.TBool):
        return "bool"
    if isinstance(t, S.TUnit):
        return "unit"
    if isinstance(t, S.TVal):
        return "val"
    if isinstance(t, S.TMem):
        return "mem"
    if isinstance(t, S.TNat):
        return ["nat", "inf" if t.bound is None else str(t.bound)]
    if isinstance(t, S.TArrow):
        return ["->", type_sexp(t.dom), type_sexp(t.cod)]
    if isinstance(t, S.TProd):
        return ["*", type_sexp(t.left), type_sexp(t.right)]
    if isinstance(t, S.TBase):
        return t.name
    raise SexpError(f"type {t} has no S-expression form")


# ---------------------------------------------------------------- terms

MEM_AGG = {"card-dom", "card-im", "sum-arr", "in-dom", "in-im"}
TERM_OPS = {"+", "-", "*", "/", "pow", "min", "max", "=", "<>", "<", "<=", ">", ">=",
            "and", "or", "not", "isnone"}
RESERVED = {"tt", "ff", "none", "star", "true", "false", "top", "bot", "inf"}


def parse_term(x) -> S.Term:
    if isinstance(x, str):
        if is_num(x):
            v = Fraction(x)
            if v == 0:
                return S.Zero()
            return S.Lit(int(v) if v.denominator == 1 else v)
        if x == "tt":
            return S.TRUE
        if x == "ff":
            return S.FALSE
        if x == "none":
            return S.NONE
        if x == "star":
            return S.Star()
        if x.startswith("@"):
            return S.AdvVar(x[1:])
        return S.Var(x)
    if not x:
        raise SexpError("empty term")
    head, args = x[0], x[1:]
    if head == "sel":
        return S.Select(parse_term(args[0]), args[1])
    if head == "upd":
        return S.Store(parse_term(args[0]), args[1], parse_term(args[2]))
    if head == "aget":
        return S.ArrSel(parse_term(args[0]), args[1], parse_term(args[2]))
    if head in MEM_AGG:
        return S.Prim(head, (parse_term(args[0]), S.Lit(args[1])) + tuple(parse_term(a) for a in args[2:]))
    if head == "S":
        return S.Succ(parse_term(args[0]))
    if head == "fst":
        return S.Proj1(parse_term(args[0]))
    if head == "snd":
        return S.Proj2(parse_term(args[0]))
    if head == "pair":
        return S.Pair(parse_term(args[0]), parse_term(args[1]))
    if head == "if":
        return S.Case(parse_term(args[0]), parse_term(args[1]), parse_term(args[2]))
    if head == "app":
        return S.App(parse_term(args[0]), parse_term(args[1]))
    if head in TERM_OPS:
        return S.Prim(head, tuple(parse_term(a) for a in args))
    raise SexpError(f"unknown term form {head}")


def term_sexp(t: S.Term):
    if isinstance(t, S.Var):
        return t.name
    if isinstance(t, S.AdvVar):
        return "@" + t.name
    if isinstance(t, S.Zero):
        return "0"
    if isinstance(t, S.Star):
        return "star"
    if isinstance(t, S.Lit):
        v = t.value
        if v is True:
            return "tt"
        if v is False:
            return "ff"
        if v is None:
            return "none"
        if isinstance(v, (int, Fraction)):
            return _num_text(v)
        raise SexpError(f"literal {v!r} has no S-expression form")
    if isinstance(t, S.Select):
        return ["sel", term_sexp(t.mem), t.loc]
    if isinstance(t, S.Store):
        return ["upd", term_sexp(t.mem), t.loc, term_sexp(t.val)]
    if isinstance(t, S.ArrSel):
        return ["aget", term_sexp(t.mem), t.array, term_sexp(t.index)]
    if isinstance(t, S.Prim):
        if t.op in MEM_AGG:
            return [t.op, term_sexp(t.args[0]), t.args[1].value] + [term_sexp(a) for a in t.args[2:]]
        return [t.op] + [term_sexp(a) for a in t.args]
    if isinstance(t, S.Succ):
        return ["S", term_sexp(t.arg)]
    if isinstance(t, S.Proj1):
        return ["fst", term_sexp(t.arg)]
    if isinstance(t, S.Proj2):
        return ["snd", term_sexp(t.arg)]
    if isinstance(t, S.Pair):
        return ["pair", term_sexp(t.left), term_sexp(t.right)]
    if isinstance(t, S.Case):
        return ["if", term_sexp(t.guard), term_sexp(t.then), term_sexp(t.else_)]
    if isinstance(t, S.App):
        return ["app", term_sexp(t.fn), term_sexp(t.arg)]
    raise SexpError(f"{type(t).__name__} cannot appear inside an assertion")


# ---------------------------------------------------------------- propositions

RELATIONS = {"=", "<>", "<", "<=", ">", ">=", "in-dom", "in-im", "holds", "member"}


def parse_prop(x) -> S.Prop:
    if isinstance(x, str):
        if x == "true":
            return S.PTrue()
        if x == "false":
            return S.PFalse()
        raise SexpError(f"expected a proposition, found {x}")
    head, args = x[0], x[1:]
    if head == "and" or head == "or":
        if not args:
            return S.PTrue() if head == "and" else S.PFalse()
        ps = [parse_prop(a) for a in args]
        out = ps[-1]
        for p in reversed(ps[:-1]):
            out = (S.And if head == "and" else S.Or)(p, out)
        return out
    if head == "=>":
        return S.Implies(parse_prop(args[0]), parse_prop(args[1]))
    if head == "not":
        return S.Not(parse_prop(args[0]))
    if head in ("forall", "exists"):
        var, ty = args[0]
        body = parse_prop(args[1])
        return (S.PForall if head == "forall" else S.PExists)(var, parse_type(ty), body)
    if head in ("in-dom", "in-im"):
        return S.Rel(head, (parse_term(args[0]), S.Lit(args[1]), parse_term(args[2])))
    if head in RELATIONS:
        return S.Rel(head, tuple(parse_term(a) for a in args))
    raise SexpError(f"unknown proposition form {head}")


def prop_sexp(p: S.Prop):
    if isinstance(p, S.PTrue):
        return "true"
    if isinstance(p, S.PFalse):
        return "false"
    if isinstance(p, (S.And, S.Or)):
        head = "and" if isinstance(p, S.And) else "or"
        out = [head]
        while isinstance(p, S.And if head == "and" else S.Or):
            out.append(prop_sexp(p.left))
            p = p.right
        out.append(prop_sexp(p))
        return out
    if isinstance(p, S.Implies):
        return ["=>", prop_sexp(p.left), prop_sexp(p.right)]
    if isinstance(p, S.Not):
        return ["not", prop_sexp(p.arg)]
    if isinstance(p, (S.PForall, S.PExists)):
        head = "forall" if isinstance(p, S.PForall) else "exists"
        return [head, [p.var, type_sexp(p.ty)], prop_sexp(p.body)]
    if isinstance(p, S.Rel):
        if p.name in ("in-dom", "in-im"):
            return [p.name, term_sexp(p.args[0]), p.args[1].value, term_sexp(p.args[2])]
        return [p.name] + [term_sexp(a) for a in p.args]
    raise SexpError(f"not a proposition: {p!r}")


# ---------------------------------------------------------------- assertions

_NARY = {"meet": S.Meet, "join": S.Join, "plus": S.Plus}


def parse_assertion(x) -> S.Assertion:
    if isinstance(x, str):
        if x == "top":
            return S.Top()
        if x == "bot":
            return S.Bot()
        return S.Inj(parse_prop(x))
    head, args = x[0], x[1:]
    if head in _NARY:
        if len(args) < 2:
            raise SexpError(f"{head} needs at least two arguments")
        parts = [parse_assertion(a) for a in args]
        out = parts[-1]
        for a in reversed(parts[:-1]):
            out = _NARY[head](a, out)
        return out
    if head == "inj":
        return S.Inj(parse_prop(args[0]))
    if head == "iverson":
        return S.Iverson(parse_prop(args[0]))
    if head == "scale":
        return S.Scale(rational(args[0]), parse_assertion(args[1]))
    if head == "times":
        return S.Times(parse_assertion(args[0]), parse_assertion(args[1]))
    if head == "q":
        return S.Atom("q", (parse_term(args[0]),))
    if head == "atom":
        return S.Atom(args[0], tuple(parse_term(a) for a in args[1:]))
    return S.Inj(parse_prop(x))


def assertion_sexp(a: S.Assertion):
    if isinstance(a, S.Top):
        return "top"
    if isinstance(a, S.Bot):
        return "bot"
    for name, cls in _NARY.items():
        if isinstance(a, cls):
            out = [name]
            while isinstance(a, cls):
                out.append(assertion_sexp(a.left))
                a = a.right
            out.append(assertion_sexp(a))
            return out
    if isinstance(a, S.Inj):
        return ["inj", prop_sexp(a.prop)]
    if isinstance(a, S.Iverson):
        return ["iverson", prop_sexp(a.prop)]
    if isinstance(a, S.Scale):
        return ["scale", _num_text(a.factor), assertion_sexp(a.arg)]
    if isinstance(a, S.Times):
        return ["times", assertion_sexp(a.left), assertion_sexp(a.right)]
    if isinstance(a, S.Atom):
        if a.fn == "q" and len(a.args) == 1:
            return ["q", term_sexp(a.args[0])]
        return ["atom", a.fn] + [term_sexp(t) for t in a.args]
    raise SexpError(f"not an assertion: {a!r}")


def show_assertion(a: S.Assertion) -> str:
    return show(assertion_sexp(a))


def show_prop(p: S.Prop) -> str:
    return show(prop_sexp(p))


def show_term(t: S.Term) -> str:
    return show(term_sexp(t))


def assertion(text: str) -> S.Assertion:
    return parse_assertion(read_one(text))


def prop(text: str) -> S.Prop:
    return parse_prop(read_one(text))


def term(text: str) -> S.Term:
    return parse_term(read_one(text))
