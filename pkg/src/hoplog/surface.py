"""Concrete syntax of `.hop` programs: lexer, parser, printer and JSON dump.

    locations a b;            locations r in nat 4;
    array L : 4 in nat 2 + none;
    values nat 4 + none;
    dist unif : unit -> nat(3) = uniform 4;
    dist fresh : val * val -> nat(3) = uniform 4 except;
    adversary A : forall 'a. (nat(3) -> T[{'a}; 1] val) -> T[{'a}; 2] bool;
    impl twice of A = fun (o : nat(3) -> T[{'a}; 1] val) => ...
    def prf (x : nat(3)) : T[{L}; 0] val = let y = L[x] in unit y

Definition bodies run until the next declaration keyword.  Sugar:
`x = t; u` is `(fun x => u) t`, `l := t` writes, `inc l` increments,
`t; u` is `let _ = t in u`, and `L[e]` on an array reads a cell
(a computed index becomes a case split over the cells).
"""

from __future__ import annotations

import dataclasses
import json
import re
from dataclasses import dataclass, field
from fractions import Fraction

from . import syntax as S
from .config import ConfigError, DistDecl, ProgramConfig, nat_domain, show_value

DECL_KEYWORDS = {"locations", "array", "values", "dist", "adversary", "impl", "def"}
KEYWORDS = DECL_KEYWORDS | {
    "fun", "let", "in", "if", "then", "else", "read", "write", "unit", "skip",
    "sample", "mfold", "fst", "snd", "S", "tt", "ff", "none", "not", "isnone",
    "inc", "forall", "of", "uniform", "except", "table",
}
INC_VAR = "y'inc"


class ParseError(Exception):
    def __init__(self, msg: str, line: int = 0, col: int = 0):
        super().__init__(f"{msg} at line {line}, column {col}" if line else msg)
        self.line, self.col = line, col


# ---------------------------------------------------------------- lexer

TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+|\#[^\n]*)
  | (?P<rvar>'[A-Za-z_][A-Za-z0-9_]*)
  | (?P<num>\d+/\d+|\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_']*)
  | (?P<sym>:=|=>|->|==|<>|<=|>=|&&|\|\||[()\[\]{},;:=<>+\-*/.@%])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Tok:
    kind: str
    text: str
    line: int
    col: int


def tokenize(text: str) -> list:
    out, pos, line, lstart = [], 0, 1, 0
    while pos < len(text):
        m = TOKEN_RE.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - lstart + 1)
        kind = m.lastgroup
        tok = m.group()
        if kind != "ws":
            if kind == "ident" and tok in KEYWORDS:
                kind = "kw"
            out.append(Tok(kind, tok, line, pos - lstart + 1))
        nl = tok.count("\n")
        if nl:
            line += nl
            lstart = pos + tok.rfind("\n") + 1
        pos = m.end()
    out.append(Tok("eof", "", line, pos - lstart + 1))
    return out


# ---------------------------------------------------------------- program model


@dataclass
class Definition:
    name: str
    params: list
    ret: S.Type
    body: S.Term

    def as_term(self) -> S.Term:
        t = self.body
        for x, ty in reversed(self.params):
            t = S.Lam(x, ty, t)
        return t

    def type(self) -> S.Type:
        t = self.ret
        for _, ty in reversed(self.params):
            t = S.TArrow(ty, t)
        return t


@dataclass
class Program:
    config: ProgramConfig
    defs: dict = field(default_factory=dict)
    adversaries: dict = field(default_factory=dict)
    impls: dict = field(default_factory=dict)  # impl name -> (adversary, term)
    source: str = ""

    def definition(self, name: str) -> Definition:
        try:
            return self.defs[name]
        except KeyError:
            raise ConfigError(f"no definition named {name}") from None


# ---------------------------------------------------------------- parser


class Parser:
    def __init__(self, text: str, config: ProgramConfig | None = None, program: Program | None = None):
        self.toks = tokenize(text)
        self.i = 0
        self.cfg = config
        self.prog = program
        self.scope: list = []
        self.region_scope: list = []

    # token helpers
    def peek(self, k: int = 0) -> Tok:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def next(self) -> Tok:
        t = self.toks[self.i]
        self.i += 1
        return t

    def at(self, text: str, k: int = 0) -> bool:
        t = self.peek(k)
        return t.text == text and t.kind in ("sym", "kw")

    def expect(self, text: str) -> Tok:
        t = self.next()
        if t.text != text or t.kind not in ("sym", "kw"):
            raise ParseError(f"expected {text!r}, found {t.text or 'end of input'!r}", t.line, t.col)
        return t

    def error(self, msg: str):
        t = self.peek()
        raise ParseError(msg, t.line, t.col)

    def ident(self) -> str:
        t = self.next()
        if t.kind != "ident":
            raise ParseError(f"expected identifier, found {t.text!r}", t.line, t.col)
        return t.text

    def integer(self) -> int:
        t = self.next()
        if t.kind != "num" or "/" in t.text:
            raise ParseError(f"expected integer, found {t.text!r}", t.line, t.col)
        return int(t.text)

    # ------------------------------------------------------------ types

    def type(self) -> S.Type:
        if self.at("forall"):
            self.next()
            v = self.next()
            if v.kind != "rvar":
                raise ParseError("expected region variable", v.line, v.col)
            self.expect(".")
            name = v.text[1:]
            self.region_scope.append(name)
            try:
                body = self.type()
            finally:
                self.region_scope.pop()
            return S.TForall(name, body)
        left = self.prod_type()
        if self.at("->"):
            self.next()
            return S.TArrow(left, self.type())
        return left

    def prod_type(self) -> S.Type:
        t = self.app_type()
        while self.at("*"):
            self.next()
            t = S.TProd(t, self.app_type())
        return t

    def app_type(self) -> S.Type:
        if self.peek().kind == "ident" and self.peek().text == "T" and self.at("[", 1):
            self.next()
            self.expect("[")
            e = self.effect()
            self.expect(";")
            k = self.integer()
            self.expect("]")
            return S.TMon(e, k, self.app_type())
        return self.atom_type()

    def atom_type(self) -> S.Type:
        t = self.next()
        if t.text == "(" and t.kind == "sym":
            ty = self.type()
            self.expect(")")
            return ty
        if t.kind == "ident":
            if t.text == "bool":
                return S.BOOL
            if t.text == "val":
                return S.VAL
            if t.text == "mem":
                return S.MEM
            if t.text == "nat":
                self.expect("(")
                b = self.next()
                self.expect(")")
                if b.text == "inf":
                    return S.TNat(None)
                return S.TNat(int(b.text))
            return S.TBase(t.text)
        if t.text == "unit":
            return S.UNIT
        raise ParseError(f"expected a type, found {t.text!r}", t.line, t.col)

    def effect(self) -> S.Effect:
        self.expect("{")
        locs, vars = set(), set()
        while not self.at("}"):
            t = self.next()
            if t.kind == "rvar":
                vars.add(t.text[1:])
            elif t.kind == "ident":
                name = t.text
                if self.at("["):
                    self.next()
                    name = f"{name}[{self.integer()}]"
                    self.expect("]")
                if self.cfg is not None:
                    try:
                        locs.update(self.cfg.cells(name))
                    except ConfigError:
                        raise ParseError(f"unknown location {name}", t.line, t.col) from None
                else:
                    locs.add(name)
            else:
                raise ParseError(f"bad effect element {t.text!r}", t.line, t.col)
            if not self.at("}"):
                self.expect(",")
        self.expect("}")
        return S.Effect(frozenset(locs), frozenset(vars))

    # ------------------------------------------------------------ terms

    def term(self, seq: bool = True) -> S.Term:
        if self.at("fun"):
            self.next()
            self.expect("(")
            x = self.ident()
            self.expect(":")
            ty = self.type()
            self.expect(")")
            self.expect("=>")
            return S.Lam(x, ty, self.bind(x, lambda: self.term(seq)))
        if self.at("let"):
            self.next()
            x = self.binder_name()
            self.expect("=")
            bound = self.term()
            self.expect("in")
            return S.LetM(x, bound, self.bind(x, lambda: self.term(seq)))
        if self.at("if"):
            self.next()
            g = self.term()
            self.expect("then")
            a = self.term(False)
            self.expect("else")
            return S.Case(g, a, self.term(False))
        return self.seq() if seq else self.stmt()

    def binder_name(self) -> str:
        t = self.next()
        if t.kind == "ident":
            return t.text
        raise ParseError(f"expected a binder, found {t.text!r}", t.line, t.col)

    def bind(self, x: str, f):
        self.scope.append(x)
        try:
            return f()
        finally:
            self.scope.pop()

    def _seq_continues(self) -> bool:
        if not self.at(";"):
            return False
        nxt = self.peek(1)
        return not (nxt.kind == "eof" or (nxt.kind == "kw" and nxt.text in DECL_KEYWORDS))

    def seq(self) -> S.Term:
        # pure sugar: x = t; u
        if self.peek().kind == "ident" and self.at("=", 1):
            x = self.next().text
            self.expect("=")
            bound = self.term(False)
            if not self._seq_continues():
                self.error("expected ';' after binding")
            self.next()
            return S.App(S.Lam(x, None, self.bind(x, self.term)), bound)
        first = self.stmt()
        if self._seq_continues():
            self.next()
            return S.LetM("_", first, self.term())
        return first

    def stmt(self) -> S.Term:
        if self.at("inc"):
            self.next()
            return self.lvalue(lambda loc: S.LetM(
                INC_VAR, S.Read(loc), S.Write(loc, S.Prim("+", (S.Var(INC_VAR), S.Lit(1))))))
        if self.peek().kind == "ident" and self._is_lvalue_assign():
            return self.assignment()
        return self.binop(0)

    def _is_lvalue_assign(self) -> bool:
        if self.at(":=", 1):
            return True
        if self.at("[", 1):
            depth, k = 0, 1
            while True:
                t = self.peek(k)
                if t.kind == "eof":
                    return False
                if t.text == "[":
                    depth += 1
                elif t.text == "]":
                    depth -= 1
                    if depth == 0:
                        return self.at(":=", k + 1)
                k += 1
        return False

    def assignment(self) -> S.Term:
        holder: list = []

        def mk(loc):
            return S.LetM("_", S.UnitM(S.Star()), S.Write(loc, holder[0]))

        tok = self.peek()
        name = self.ident()
        index = None
        if self.at("["):
            self.next()
            index = self.term()
            self.expect("]")
        self.expect(":=")
        holder.append(self.binop(0))
        return self._on_location(name, index, mk, tok)

    def lvalue(self, mk) -> S.Term:
        tok = self.peek()
        name = self.ident()
        index = None
        if self.at("["):
            self.next()
            index = self.term()
            self.expect("]")
        return self._on_location(name, index, mk, tok)

    def _on_location(self, name: str, index, mk, tok) -> S.Term:
        if index is None:
            self._check_loc(name, tok)
            return mk(name)
        lit = S.nat_literal(index)
        if lit is not None:
            loc = f"{name}[{lit}]"
            self._check_loc(loc, tok)
            return mk(loc)
        if self.cfg is None or name not in self.cfg.arrays:
            raise ParseError(f"computed index into unknown array {name}", tok.line, tok.col)
        return array_case(name, len(self.cfg.arrays[name]), index, mk)

    def _check_loc(self, loc: str, tok: Tok):
        if self.cfg is not None and not self.cfg.has_location(loc):
            raise ParseError(f"unknown location {loc}", tok.line, tok.col)

    BINOPS = [
        {"||": "or"},
        {"&&": "and"},
        {"==": "=", "<>": "<>", "<": "<", "<=": "<=", ">": ">", ">=": ">="},
        {"+": "+", "-": "-"},
        {"*": "*", "/": "/"},
    ]

    def binop(self, level: int) -> S.Term:
        if level == len(self.BINOPS):
            return self.app()
        left = self.binop(level + 1)
        ops = self.BINOPS[level]
        while self.peek().kind == "sym" and self.peek().text in ops:
            op = ops[self.next().text]
            right = self.binop(level + 1)
            left = S.Prim(op, (left, right))
            if level == 2:
                break
        return left

    def app(self) -> S.Term:
        t = self.peek()
        if t.kind == "kw":
            w = t.text
            if w == "S":
                self.next()
                return S.Succ(self.atom())
            if w in ("fst", "snd"):
                self.next()
                return (S.Proj1 if w == "fst" else S.Proj2)(self.atom())
            if w in ("not", "isnone"):
                self.next()
                return S.Prim(w, (self.atom(),))
            if w == "unit":
                self.next()
                return S.UnitM(self.atom())
            if w == "read":
                self.next()
                return self.lvalue(S.Read)
            if w == "write":
                self.next()
                holder: list = []
                tok = self.peek()
                name = self.ident()
                index = None
                if self.at("["):
                    self.next()
                    index = self.term()
                    self.expect("]")
                holder.append(self.atom())
                return self._on_location(name, index, lambda loc: S.Write(loc, holder[0]), tok)
            if w == "sample":
                self.next()
                tok = self.peek()
                d = self.ident()
                if self.cfg is not None and d not in self.cfg.dists:
                    raise ParseError(f"unknown distribution {d}", tok.line, tok.col)
                args: list = []
                if self.at("("):
                    self.next()
                    while not self.at(")"):
                        args.append(self.term())
                        if not self.at(")"):
                            self.expect(",")
                    self.expect(")")
                return S.Sample(d, tuple(args))
            if w == "mfold":
                self.next()
                return S.MFold(self.atom(), self.atom(), self.atom())
            if w == "inc":
                return self.stmt()
        head = self.atom()
        while self._starts_atom():
            head = S.App(head, self.atom())
        return head

    def _starts_atom(self) -> bool:
        t = self.peek()
        if t.kind in ("ident", "num"):
            return True
        if t.kind == "kw" and t.text in ("tt", "ff", "none", "skip"):
            return True
        if t.kind == "sym" and t.text in ("(", "@", "%"):
            return True
        return False

    def atom(self) -> S.Term:
        t = self.next()
        if t.kind == "num":
            if "/" in t.text:
                return S.Lit(Fraction(t.text))
            n = int(t.text)
            return S.Zero() if n == 0 else S.Lit(n)
        if t.kind == "kw":
            if t.text == "tt":
                return S.TRUE
            if t.text == "ff":
                return S.FALSE
            if t.text == "none":
                return S.NONE
            if t.text == "skip":
                return S.Skip()
        if t.kind == "sym":
            if t.text == "@":
                return S.AdvVar(self.ident())
            if t.text == "%":
                op = self.next().text
                self.expect("(")
                args = []
                while not self.at(")"):
                    args.append(self.term())
                    if not self.at(")"):
                        self.expect(",")
                self.expect(")")
                return S.Prim(op, tuple(args))
            if t.text == "(":
                if self.at(")"):
                    self.next()
                    return S.Star()
                a = self.term()
                if self.at(","):
                    self.next()
                    b = self.term()
                    self.expect(")")
                    return S.Pair(a, b)
                self.expect(")")
                return a
        if t.kind == "ident":
            name = t.text
            if self.at("[") and name not in self.scope and self._is_array(name):
                self.next()
                index = self.term()
                self.expect("]")
                return self._on_location(name, index, S.Read, t)
            return self.resolve(name)
        raise ParseError(f"unexpected {t.text or 'end of input'!r}", t.line, t.col)

    def _is_array(self, name: str) -> bool:
        return self.cfg is None or name in self.cfg.arrays

    def resolve(self, name: str) -> S.Term:
        if name in self.scope:
            return S.Var(name)
        if self.prog is not None:
            if name in self.prog.defs:
                return self.prog.defs[name].as_term()
            if name in self.prog.adversaries:
                return S.AdvVar(name)
        return S.Var(name)


def array_case(name: str, n: int, index: S.Term, mk) -> S.Term:
    """Case split over the cells of an array for a computed index."""
    out = mk(f"{name}[{n - 1}]")
    for i in range(n - 2, -1, -1):
        guard = S.Prim("=", (index, S.Zero() if i == 0 else S.Lit(i)))
        out = S.Case(guard, mk(f"{name}[{i}]"), out)
    return out


# ---------------------------------------------------------------- program files


def parse_domain(p: Parser) -> tuple:
    if p.at("{"):
        p.next()
        vals = []
        while not p.at("}"):
            t = p.next()
            if t.text == "none":
                vals.append(None)
            elif t.kind == "num":
                vals.append(int(t.text))
            elif t.text == "-":
                vals.append(-p.integer())
            else:
                raise ParseError(f"bad domain value {t.text!r}", t.line, t.col)
            if not p.at("}"):
                p.expect(",")
        p.expect("}")
        return tuple(vals)
    t = p.next()
    if t.text != "nat":
        raise ParseError("expected 'nat N' or '{...}' domain", t.line, t.col)
    n = p.integer()
    with_none = False
    if p.at("+"):
        p.next()
        p.expect("none")
        with_none = True
    return nat_domain(n, with_none)


def parse_program(text: str, cap: int | None = None) -> Program:
    """Parse a `.hop` file: declarations first fix the configuration."""
    cfg = ProgramConfig(locations=(), values=nat_domain(2))
    prog = Program(cfg, source=text)
    p = Parser(text, cfg, prog)
    locations: list = []
    domains: dict = {}
    arrays: dict = {}
    values = None
    dists: dict = {}

    def refresh():
        nonlocal cfg
        cfg = ProgramConfig(
            locations=tuple(locations), arrays=dict(arrays),
            values=values if values is not None else nat_domain(2),
            domains=dict(domains), dists=dict(dists),
        )
        if cap is not None:
            cfg.cap = cap
        prog.config = cfg
        p.cfg = cfg

    refresh()
    while p.peek().kind != "eof":
        tok = p.next()
        kw = tok.text
        if kw == "locations":
            names = []
            while p.peek().kind == "ident":
                names.append(p.ident())
            dom = None
            if p.at("in"):
                p.next()
                dom = parse_domain(p)
            p.expect(";")
            for n in names:
                if n in locations or n in arrays:
                    raise ParseError(f"duplicate location {n}", tok.line, tok.col)
                locations.append(n)
                if dom is not None:
                    domains[n] = dom
        elif kw == "array":
            name = p.ident()
            p.expect(":")
            n = p.integer()
            dom = None
            if p.at("in"):
                p.next()
                dom = parse_domain(p)
            p.expect(";")
            cells = tuple(f"{name}[{i}]" for i in range(n))
            arrays[name] = cells
            locations.extend(cells)
            if dom is not None:
                for c in cells:
                    domains[c] = dom
        elif kw == "values":
            values = parse_domain(p)
            p.expect(";")
        elif kw == "dist":
            name = p.ident()
            p.expect(":")
            argt = p.type()
            if not isinstance(argt, S.TArrow):
                raise ParseError("distribution signature must be an arrow", tok.line, tok.col)
            args = () if argt.dom == S.UNIT else tuple(_flatten_prod(argt.dom))
            p.expect("=")
            decl = parse_dist_kind(p, name, args, argt.cod)
            p.expect(";")
            dists[name] = decl
        elif kw == "adversary":
            name = p.ident()
            p.expect(":")
            prog.adversaries[name] = p.type()
            p.expect(";")
        elif kw == "impl":
            name = p.ident()
            p.expect("of")
            adv = p.ident()
            if adv not in prog.adversaries:
                raise ParseError(f"unknown adversary {adv}", tok.line, tok.col)
            p.expect("=")
            adv_ty = prog.adversaries[adv]
            rvars = []
            while isinstance(adv_ty, S.TForall):
                rvars.append(adv_ty.var)
                adv_ty = adv_ty.body
            p.region_scope.extend(rvars)
            prog.impls[name] = (adv, p.term())
            del p.region_scope[len(p.region_scope) - len(rvars):]
            _end_decl(p)
        elif kw == "def":
            name = p.ident()
            params = []
            while p.at("("):
                p.next()
                x = p.ident()
                p.expect(":")
                params.append((x, p.type()))
                p.expect(")")
            p.expect(":")
            ret = p.type()
            p.expect("=")
            for x, _ in params:
                p.scope.append(x)
            body = p.term()
            del p.scope[len(p.scope) - len(params):]
            prog.defs[name] = Definition(name, params, ret, body)
            _end_decl(p)
        else:
            raise ParseError(f"expected a declaration, found {kw!r}", tok.line, tok.col)
        if kw in ("locations", "array", "values", "dist"):
            refresh()
    return prog


def _end_decl(p: Parser):
    if p.at(";"):
        p.next()
    t = p.peek()
    if not (t.kind == "eof" or (t.kind == "kw" and t.text in DECL_KEYWORDS)):
        raise ParseError(f"unexpected {t.text!r} after definition", t.line, t.col)


def _flatten_prod(t: S.Type) -> list:
    if isinstance(t, S.TProd):
        return _flatten_prod(t.left) + _flatten_prod(t.right)
    return [t]


def parse_dist_kind(p: Parser, name: str, args: tuple, result: S.Type) -> DistDecl:
    kind = p.next()
    if kind.text == "uniform":
        n = p.integer()
        if p.at("except"):
            p.next()
            return DistDecl(name, args, result, "uniform_except", n)
        return DistDecl(name, args, result, "uniform", n)  # arguments, if any, are ignored
    if kind.text == "table":
        p.expect("{")
        rows = []
        while not p.at("}"):
            p.expect("[")
            key = []
            while not p.at("]"):
                key.append(_value_token(p))
                if not p.at("]"):
                    p.expect(",")
            p.expect("]")
            p.expect("->")
            p.expect("{")
            row = []
            while not p.at("}"):
                v = _value_token(p)
                p.expect(":")
                w = Fraction(p.next().text)
                row.append((v, w))
                if not p.at("}"):
                    p.expect(",")
            p.expect("}")
            if sum(w for _, w in row) != 1:
                raise ParseError(f"row of {name} does not sum to 1", kind.line, kind.col)
            rows.append((tuple(key), tuple(row)))
            if p.at(";") or p.at(","):
                p.next()
        p.expect("}")
        return DistDecl(name, args, result, "table", 0, tuple(rows))
    raise ParseError(f"unknown distribution kind {kind.text!r}", kind.line, kind.col)


def _value_token(p: Parser):
    t = p.next()
    if t.text == "none":
        return None
    if t.text == "tt":
        return True
    if t.text == "ff":
        return False
    if t.kind == "num":
        return Fraction(t.text) if "/" in t.text else int(t.text)
    raise ParseError(f"expected a value, found {t.text!r}", t.line, t.col)


def parse_term(text: str, config: ProgramConfig | None = None, program: Program | None = None,
               scope=()) -> S.Term:
    p = Parser(text, config, program)
    p.scope.extend(scope)
    t = p.term()
    if p.peek().kind != "eof":
        p.error(f"trailing input {p.peek().text!r}")
    return t


def parse_type(text: str, config: ProgramConfig | None = None) -> S.Type:
    p = Parser(text, config)
    t = p.type()
    if p.peek().kind != "eof":
        p.error(f"trailing input {p.peek().text!r}")
    return t


# ---------------------------------------------------------------- printer


def show_effect(e: S.Effect) -> str:
    items = sorted(e.locs, key=_loc_key) + ["'" + v for v in sorted(e.vars)]
    return "{" + ", ".join(items) + "}"


def _loc_key(loc: str):
    m = re.fullmatch(r"(.*)\[(\d+)\]", loc)
    return (m.group(1), int(m.group(2))) if m else (loc, -1)


def show_type(t: S.Type, prec: int = 0) -> str:
    if isinstance(t, S.TForall):
        s = f"forall '{t.var}. {show_type(t.body, 0)}"
        return f"({s})" if prec > 0 else s
    if isinstance(t, S.TArrow):
        s = f"{show_type(t.dom, 1)} -> {show_type(t.cod, 0)}"
        return f"({s})" if prec > 0 else s
    if isinstance(t, S.TProd):
        s = f"{show_type(t.left, 1)} * {show_type(t.right, 2)}"
        return f"({s})" if prec > 1 else s
    if isinstance(t, S.TMon):
        return f"T[{show_effect(t.eff)}; {t.cost}] {show_type(t.inner, 3)}"
    if isinstance(t, S.TBool):
        return "bool"
    if isinstance(t, S.TUnit):
        return "unit"
    if isinstance(t, S.TVal):
        return "val"
    if isinstance(t, S.TMem):
        return "mem"
    if isinstance(t, S.TNat):
        return f"nat({'inf' if t.bound is None else t.bound})"
    if isinstance(t, S.TBase):
        return t.name
    raise TypeError(t)


INFIX = {"or": ("||", 0), "and": ("&&", 1), "=": ("==", 2), "<>": ("<>", 2), "<": ("<", 2),
         "<=": ("<=", 2), ">": (">", 2), ">=": (">=", 2), "+": ("+", 3), "-": ("-", 3),
         "*": ("*", 4), "/": ("/", 4)}

P_EXPR, P_SEQ, P_APP, P_ATOM = 0, 1, 6, 7


def show_term(t: S.Term, prec: int = P_EXPR) -> str:
    def wrap(s, p):
        return f"({s})" if prec > p else s

    if isinstance(t, S.Var):
        return t.name
    if isinstance(t, S.AdvVar):
        return "@" + t.name
    if isinstance(t, S.Star):
        return "()"
    if isinstance(t, S.Zero):
        return "0"
    if isinstance(t, S.Skip):
        return "skip"
    if isinstance(t, S.Lit):
        v = t.value
        if isinstance(v, Fraction) and v.denominator == 1:
            v = int(v)
        if isinstance(v, int) and not isinstance(v, bool) and v < 0:
            return f"(0 - {-v})"
        if isinstance(v, str):
            raise ValueError("array-name literals only occur in assertions")
        return show_value(v)
    if isinstance(t, S.Succ):
        return wrap(f"S {show_term(t.arg, P_ATOM)}", P_APP)
    if isinstance(t, S.Proj1):
        return wrap(f"fst {show_term(t.arg, P_ATOM)}", P_APP)
    if isinstance(t, S.Proj2):
        return wrap(f"snd {show_term(t.arg, P_ATOM)}", P_APP)
    if isinstance(t, S.UnitM):
        return wrap(f"unit {show_term(t.arg, P_ATOM)}", P_APP)
    if isinstance(t, S.Read):
        return wrap(f"read {t.loc}", P_APP)
    if isinstance(t, S.Write):
        return wrap(f"write {t.loc} {show_term(t.arg, P_ATOM)}", P_APP)
    if isinstance(t, S.Sample):
        args = "(" + ", ".join(show_term(a) for a in t.args) + ")" if t.args else ""
        return wrap(f"sample {t.dist}{args}", P_APP)
    if isinstance(t, S.MFold):
        return wrap("mfold " + " ".join(show_term(x, P_ATOM) for x in (t.count, t.init, t.step)), P_APP)
    if isinstance(t, S.Prim):
        if t.op in ("not", "isnone") and len(t.args) == 1:
            return wrap(f"{t.op} {show_term(t.args[0], P_ATOM)}", P_APP)
        if t.op in INFIX and len(t.args) == 2:
            sym, lvl = INFIX[t.op]
            p = 2 + lvl
            left = show_term(t.args[0], p if lvl != 2 else p + 1)
            right = show_term(t.args[1], p + 1)
            return wrap(f"{left} {sym} {right}", p)
        return f"%{t.op}(" + ", ".join(show_term(a) for a in t.args) + ")"
    if isinstance(t, S.Pair):
        return f"({show_term(t.left)}, {show_term(t.right)})"
    if isinstance(t, S.App):
        if isinstance(t.fn, S.Lam) and t.fn.ty is None:
            return wrap(f"{t.fn.var} = {show_term(t.arg, P_SEQ)}; {show_term(t.fn.body)}", P_EXPR)
        # keyword forms (unit, sample, S, ...) take exactly one operand, so they need parens as a head
        head = P_APP if isinstance(t.fn, (S.Var, S.AdvVar, S.App)) else P_ATOM
        return wrap(f"{show_term(t.fn, head)} {show_term(t.arg, P_ATOM)}", P_APP)
    if isinstance(t, S.Lam):
        if t.ty is None:
            raise ValueError("unannotated lambda outside binding sugar")
        return wrap(f"fun ({t.var} : {show_type(t.ty)}) => {show_term(t.body)}", P_EXPR)
    if isinstance(t, S.LetM):
        return wrap(f"let {t.var} = {show_term(t.bound)} in {show_term(t.body)}", P_EXPR)
    if isinstance(t, S.Case):
        return wrap(
            f"if {show_term(t.guard)} then {show_term(t.then, P_SEQ)} else {show_term(t.else_, P_SEQ)}",
            P_EXPR)
    raise ValueError(f"cannot print {type(t).__name__} as program syntax")


def show_program(prog: Program) -> str:
    cfg = prog.config
    lines = [f"values {_show_domain(cfg.values)};"]
    arrays = set()
    for name, cells in cfg.arrays.items():
        arrays.update(cells)
    for loc in cfg.locations:
        if loc in arrays:
            continue
        dom = f" in {_show_domain(cfg.domains[loc])}" if loc in cfg.domains else ""
        lines.append(f"locations {loc}{dom};")
    for name, cells in cfg.arrays.items():
        dom = f" in {_show_domain(cfg.domains[cells[0]])}" if cells and cells[0] in cfg.domains else ""
        lines.append(f"array {name} : {len(cells)}{dom};")
    for d in cfg.dists.values():
        args = " * ".join(show_type(a, 2) for a in d.arg_types) or "unit"
        kind = {"uniform": f"uniform {d.size}", "uniform_except": f"uniform {d.size} except"}.get(d.kind)
        if kind is None:
            rows = "; ".join(
                "[" + ", ".join(show_value(k) for k in key) + "] -> {"
                + ", ".join(f"{show_value(v)}: {w}" for v, w in row) + "}" for key, row in d.rows)
            kind = "table { " + rows + " }"
        lines.append(f"dist {d.name} : {args} -> {show_type(d.result)} = {kind};")
    for name, ty in prog.adversaries.items():
        lines.append(f"adversary {name} : {show_type(ty)};")
    for name, (adv, t) in prog.impls.items():
        lines.append(f"impl {name} of {adv} = {show_term(t)}")
    for d in prog.defs.values():
        ps = "".join(f" ({x} : {show_type(ty)})" for x, ty in d.params)
        lines.append(f"def {d.name}{ps} : {show_type(d.ret)} = {show_term(d.body)}")
    return "\n".join(lines) + "\n"


def _show_domain(dom: tuple) -> str:
    nums = [v for v in dom if v is not None]
    if nums == list(range(len(nums))) and all(v is None for v in dom[: len(dom) - len(nums)]):
        return f"nat {len(nums)}" + (" + none" if len(nums) != len(dom) else "")
    return "{" + ", ".join(show_value(v) if v is None or v >= 0 else f"-{-v}" for v in dom) + "}"


# ---------------------------------------------------------------- JSON


def to_json(n):
    """Stable JSON encoding of any AST node."""
    if isinstance(n, (S.Term, S.Type, S.Prop, S.Assertion)):
        out = {"node": type(n).__name__}
        for f in dataclasses.fields(n):
            out[f.name] = to_json(getattr(n, f.name))
        return out
    if isinstance(n, S.Effect):
        return {"locs": sorted(n.locs, key=_loc_key), "vars": sorted(n.vars)}
    if isinstance(n, tuple):
        return [to_json(x) for x in n]
    if isinstance(n, Fraction):
        return str(n)
    if n is None or isinstance(n, (bool, int, str)):
        return n
    raise TypeError(f"cannot encode {n!r}")


def program_json(prog: Program) -> dict:
    return {
        "config": prog.config.to_json(),
        "adversaries": {k: to_json(v) for k, v in prog.adversaries.items()},
        "impls": {k: {"adversary": a, "term": to_json(t)} for k, (a, t) in prog.impls.items()},
        "defs": {
            d.name: {
                "params": [[x, to_json(ty)] for x, ty in d.params],
                "type": to_json(d.ret),
                "body": to_json(d.body),
            }
            for d in prog.defs.values()
        },
    }


def dump_json(prog: Program) -> str:
    return json.dumps(program_json(prog), sort_keys=True, indent=2)
