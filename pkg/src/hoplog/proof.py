"""Proof nodes, goals, obligations and the errors raised while checking them."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from . import sexp as X
from . import syntax as S
from .semantics import INF


class ProofError(Exception):
    """A rejected derivation step."""

    def __init__(self, message: str, rule: str | None = None, path: str | None = None,
                 expected=None, actual=None):
        super().__init__(message)
        self.message = message
        self.rule = rule
        self.path = path
        self.expected = expected
        self.actual = actual

    def __str__(self):
        where = f"{self.rule} at {self.path}: " if self.rule else ""
        out = f"{type(self).__name__}: {where}{self.message}"
        if self.expected is not None:
            out += f"\n  expected: {_show(self.expected)}"
        if self.actual is not None:
            out += f"\n  actual:   {_show(self.actual)}"
        return out

    def to_json(self) -> dict:
        return {
            "error": type(self).__name__,
            "rule": self.rule,
            "path": self.path,
            "message": self.message,
            "expected": None if self.expected is None else _show(self.expected),
            "actual": None if self.actual is None else _show(self.actual),
        }


class ScriptError(ProofError):
    """Malformed proof script."""


class ShapeError(ProofError):
    """The term does not have the constructor the rule expects."""


class ModeError(ProofError):
    """Rule or assertion not available in the current logic."""


class GradeError(ProofError):
    """A claimed grade is below what the premises justify."""


class GradeMismatch(ProofError):
    """Premises that must share one grade carry different grades."""


class SubstitutionMismatch(ProofError):
    """An assertion required by a rule schema differs after normalization."""


class ScopeError(ProofError):
    """A bound variable escapes into an assertion or a term where it may not occur."""


class MissingObligation(ProofError):
    """A rule produced a side condition that the script does not discharge."""


class ObligationFailed(ProofError):
    """A side condition was refuted by enumeration."""


class SafetyViolation(ObligationFailed):
    """An adversary invariant is not Safe/RSafe for the private region."""


class MonadicTypeError(ProofError):
    """Adversary rules require non-monadic argument and result types."""


class SampleError(ProofError):
    """Ill-formed sampling step (infinite support, bad grade, incomparable supports)."""


class RangeError(ProofError):
    """A set of sampled values leaves the distribution's range."""


def _show(x) -> str:
    if isinstance(x, S.Assertion):
        return X.show_assertion(x)
    if isinstance(x, S.Prop):
        return X.show_prop(x)
    if isinstance(x, S.Term):
        try:
            return X.show_term(x)
        except X.SexpError:
            from .surface import show_term
            return show_term(x)
    if isinstance(x, (Fraction, int, float)):
        return show_grade(x)
    return str(x)


# ---------------------------------------------------------------- grades


def show_grade(g) -> str:
    if g == INF:
        return "inf"
    g = Fraction(g)
    return str(g.numerator) if g.denominator == 1 else f"{g.numerator}/{g.denominator}"


def gadd(a, b):
    if a == INF or b == INF:
        return INF
    return Fraction(a) + Fraction(b)


def gscale(k: int, a):
    if k == 0:
        return Fraction(0)
    return INF if a == INF else k * Fraction(a)


# ---------------------------------------------------------------- script structures


@dataclass
class ProofNode:
    rule: str
    meta: dict = field(default_factory=dict)        # key -> list of raw S-expressions
    children: list = field(default_factory=list)
    obligations: dict = field(default_factory=dict)  # label -> (mode, lemma name)
    path: str = "root"
    raw: list | None = None

    def get(self, key, default=None):
        v = self.meta.get(key)
        if v is None:
            return default
        return v[0] if len(v) == 1 else v


@dataclass
class Goal:
    """What a node must establish: terms, their result types, contexts and the post."""

    gamma: dict
    psi: tuple
    terms: tuple
    types: tuple
    post: S.Assertion

    @property
    def relational(self) -> bool:
        return len(self.terms) == 2

    def env_types(self) -> dict:
        g = dict(self.gamma)
        if self.relational:
            g.update(s1=S.MEM, s2=S.MEM, v1=self.types[0], v2=self.types[1])
        else:
            g.update(s=S.MEM, v=self.types[0])
        return g


@dataclass
class Obligation:
    label: str
    rule: str
    path: str
    kind: str               # entail | hol | safe | rsafe | ratio | coupling
    gamma: dict
    psi: tuple
    lhs: object = None
    rhs: object = None
    mode: str = "eval"
    name: str | None = None
    status: str = "pending"  # ok | admitted | failed
    detail: str = ""
    extra: dict = field(default_factory=dict)

    def formula(self) -> str:
        hyps = " ".join(X.show_prop(p) for p in self.psi)
        ctx = " ".join(f"({x} {X.show(X.type_sexp(t))})" for x, t in sorted(self.gamma.items())
                       if not isinstance(t, (S.TArrow, S.TBase)))
        if self.kind == "entail":
            body = f"{X.show_assertion(self.lhs)} => {X.show_assertion(self.rhs)}"
        elif self.kind == "hol":
            body = X.show_prop(self.rhs)
        elif self.kind in ("safe", "rsafe"):
            body = f"{X.show_assertion(self.lhs)} in {self.kind}({', '.join(self.extra.get('sigma', ()))})"
        else:
            body = self.extra.get("text", "")
        prefix = f"[{ctx}] " if ctx else ""
        hyp = f"{hyps} |- " if hyps else "|- "
        return prefix + hyp + body

    def to_json(self) -> dict:
        out = {"label": self.label, "rule": self.rule, "path": self.path, "mode": self.mode,
               "status": self.status, "formula": self.formula()}
        if self.name:
            out["name"] = self.name
        return out


@dataclass
class Derivation:
    """The checked tree, kept for the independent grade recomputation."""

    rule: str
    grade: object
    combine: str
    children: list = field(default_factory=list)
    factor: int = 1
    base: object = Fraction(0)

    def count(self) -> int:
        return 1 + sum(c.count() for c in self.children)


def recompute_grades(d: Derivation) -> list:
    """Re-derive every grade bound from the children; returns violations."""
    bad = []

    def expected(n):
        gs = [c.grade for c in n.children]
        if n.combine == "sum":
            out = n.base
            for g in gs:
                out = gadd(out, g)
            return out
        if n.combine == "same":
            if len(set(map(str, gs))) > 1:
                bad.append(f"{n.rule}: premises carry different grades")
            return gs[0] if gs else Fraction(0)
        if n.combine == "fold":
            return gadd(gs[0], gscale(n.factor, gs[1]))
        if n.combine == "weaken":
            return gs[0]
        return n.base  # leaf

    def go(n):
        for c in n.children:
            go(c)
        e = expected(n)
        if not _le(e, n.grade):
            bad.append(f"{n.rule}: grade {show_grade(n.grade)} below {show_grade(e)}")

    go(d)
    return bad


def _le(a, b) -> bool:
    if b == INF:
        return True
    if a == INF:
        return False
    return Fraction(a) <= Fraction(b)
