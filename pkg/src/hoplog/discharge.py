"""Decision by enumeration over finite domains.

Only the memory cells a formula reads are enumerated; conjuncts of the
antecedent of the shapes `x = e`, `s1 = s2`, `(sel s a) = e` and
`card-dom(s, L) <= c` prune the search without losing any model of it.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import comb

from . import syntax as S
from .assertions import ALL, BOOL, Compiler, conjuncts, entails, mem_reads, normalize, type_domain
from .config import ProgramConfig, show_memory, show_value
from .semantics import EvalError


class DischargeError(Exception):
    pass


class DomainTooLarge(DischargeError):
    def __init__(self, size, cap):
        super().__init__(f"enumeration needs {size} assignments, above the cap of {cap}; admit the obligation instead")
        self.size, self.cap = size, cap


@dataclass
class Counterexample:
    env: dict
    detail: str = ""

    def show(self, cfg: ProgramConfig, reads: dict | None = None) -> str:
        parts = []
        for k in sorted(self.env):
            v = self.env[k]
            if isinstance(v, tuple) and len(v) == len(cfg.locations) and k.startswith("s"):
                locs = (reads or {}).get(k)
                if locs is None or locs is ALL:
                    parts.append(f"{k}={show_memory(cfg, v)}")
                else:
                    cells = ", ".join(f"{l}={show_value(v[cfg.index(l)])}" for l in sorted(locs, key=cfg.index))
                    parts.append(f"{k}=[{cells}]")
            else:
                parts.append(f"{k}={show_value(v)}")
        text = "; ".join(parts)
        return f"{text} ({self.detail})" if self.detail else text


def _is_mem(ty) -> bool:
    return isinstance(ty, S.TMem)


class Space:
    """The assignments to enumerate for a set of formulas."""

    def __init__(self, cfg: ProgramConfig, gamma: dict, nodes: list, antecedent: list,
                 extra_reads: dict | None = None, cap: int | None = None, bound=()):
        self.cfg = cfg
        self.cap = cap or cfg.cap
        fv = set()
        for n in nodes + antecedent:
            fv |= S.free_vars(n)
        fv -= set(bound)
        # memories the caller inspects directly are enumerated even if the formulas ignore them
        fv |= {m for m in (extra_reads or {}) if m in gamma}
        unknown = sorted(v for v in fv if v not in gamma)
        if unknown:
            raise DischargeError(f"free variable(s) {', '.join(unknown)} not in the context")
        self.plain = sorted(v for v in fv if not _is_mem(gamma[v]))
        self.types = {v: gamma[v] for v in fv}
        self.mems = sorted(v for v in fv if _is_mem(gamma[v]))
        extra_reads = extra_reads or {}
        self.reads: dict = {}
        for m in self.mems:
            acc: set = set(extra_reads.get(m, ()))
            every = False
            for n in nodes + antecedent:
                r = mem_reads(n, m, cfg)
                if r is ALL:
                    every = True
                    break
                acc |= r
            self.reads[m] = list(cfg.locations) if every else sorted(acc, key=cfg.index)
        self._plan(antecedent)

    # slot names: plain variables by name, cells as (mem, loc)
    def _slots(self):
        for v in self.plain:
            yield v
        for m in self.mems:
            for loc in self.reads[m]:
                yield (m, loc)

    def _domain(self, slot):
        if isinstance(slot, tuple):
            return list(self.cfg.domain(slot[1]))
        return type_domain(self.cfg, self.types[slot])

    def _plan(self, antecedent):
        cfg = self.cfg
        slots = list(self._slots())
        slotset = set(slots)
        defs: dict = {}
        sparse: dict = {}
        copies: dict = {}
        for p in antecedent:
            if not isinstance(p, S.Rel):
                continue
            p = normalize(p, cfg)
            if p.name == "=" and len(p.args) == 2:
                a, b = p.args
                for lhs, rhs in ((a, b), (b, a)):
                    target = self._target(lhs)
                    if target is None or target not in slotset or target in defs or target in copies:
                        continue
                    if isinstance(target, str) and target in self.mems:
                        continue
                    if isinstance(rhs, S.Var) and rhs.name in self.mems and isinstance(lhs, S.Var) and lhs.name in self.mems:
                        continue
                    if target in self._deps(rhs):
                        continue
                    defs[target] = rhs
                    break
                if isinstance(a, S.Var) and isinstance(b, S.Var) and a.name in self.mems and b.name in self.mems:
                    if b.name not in copies and a.name not in copies and a.name != b.name:
                        copies[b.name] = a.name
            if p.name in ("<=", "<", "=") and len(p.args) == 2:
                agg, bound = p.args
                c = S.nat_literal(bound)
                if (isinstance(agg, S.Prim) and agg.op == "card-dom" and isinstance(agg.args[0], S.Var)
                        and agg.args[0].name in self.mems and c is not None):
                    c = c - 1 if p.name == "<" else c
                    key = (agg.args[0].name, agg.args[1].value)
                    sparse[key] = min(c, sparse.get(key, c))
        # a copied memory reads what its source reads and vice versa
        for dst, src in copies.items():
            both = sorted(set(self.reads[dst]) | set(self.reads[src]), key=cfg.index)
            self.reads[dst] = self.reads[src] = both
        self.copies = copies
        copied = {(m, l) for m in copies for l in self.reads[m]}
        slots = [s for s in self._slots() if s not in copied]
        # order definitions so that dependencies are assigned first
        order = []
        ready = {s for s in slots if s not in defs}
        pending = {s: e for s, e in defs.items() if s in set(slots)}
        while pending:
            progress = False
            for s, e in list(pending.items()):
                deps = self._deps(e)
                if all(d in ready or d in copied for d in deps):
                    order.append((s, e))
                    ready.add(s)
                    del pending[s]
                    progress = True
            if not progress:
                for s in pending:
                    ready.add(s)
                break
        defined = {s for s, _ in order}
        self.defs = order
        free = [s for s in slots if s not in defined]
        # sparse groups: cells of an array enumerated jointly with bounded support
        self.groups = []
        grouped = set()
        for (m, arr), c in sorted(sparse.items()):
            cells = [(m, l) for l in cfg.cells(arr) if (m, l) in set(free)]
            if not cells or c >= len(cells):
                continue
            self.groups.append((cells, c))
            grouped.update(cells)
        self.free = [s for s in free if s not in grouped]
        self.compiler = Compiler(cfg)
        self.def_fns = [(s, self.compiler.term(e)) for s, e in order]
        self.tdoms = {s: _type_values(cfg, self.types[s]) for s, _ in order if not isinstance(s, tuple)}

    def _target(self, t):
        if isinstance(t, S.Var):
            return t.name
        if isinstance(t, S.Select) and isinstance(t.mem, S.Var):
            return (t.mem.name, t.loc)
        return None

    def _deps(self, e) -> set:
        out = set()
        for v in S.free_vars(e):
            if v in self.mems:
                r = mem_reads(e, v, self.cfg)
                locs = self.cfg.locations if r is ALL else r
                out.update((v, l) for l in locs)
            else:
                out.add(v)
        return out

    def _group_choices(self, cells, c):
        doms = [list(self.cfg.domain(l)) for _, l in cells]
        out = []
        n = len(cells)
        for k in range(c + 1):
            for pos in itertools.combinations(range(n), k):
                opts = [[None] if i not in pos else [x for x in doms[i] if x is not None] for i in range(n)]
                out.extend(itertools.product(*opts))
        return out

    def size(self) -> int:
        total = 1
        for s in self.free:
            total *= len(self._domain(s))
        for cells, c in self.groups:
            d = len(self.cfg.domain(cells[0][1])) - 1
            total *= sum(comb(len(cells), k) * d ** k for k in range(c + 1))
        return total

    def envs(self):
        total = self.size()
        if total > self.cap:
            raise DomainTooLarge(total, self.cap)
        cfg = self.cfg
        doms = [self._domain(s) for s in self.free]
        gdoms = [self._group_choices(cells, c) for cells, c in self.groups]
        base = cfg.default_memory()
        idx = {l: cfg.index(l) for l in cfg.locations}
        mem_domains = {l: cfg.domain(l) for l in cfg.locations}
        nfree = len(self.free)
        for vals in itertools.product(*doms, *gdoms):
            asg = dict(zip(self.free, vals[:nfree]))
            for (cells, _), choice in zip(self.groups, vals[nfree:]):
                asg.update(zip(cells, choice))
            env, mems = self._build(asg, base, idx)
            ok = True
            for slot, fn in self.def_fns:
                try:
                    val = fn(env)
                except (EvalError, TypeError, IndexError):
                    ok = False
                    break
                if isinstance(slot, tuple):
                    if not any(val == d and type(val) is type(d) for d in mem_domains[slot[1]]):
                        ok = False
                        break
                    m = slot[0]
                    mems[m][idx[slot[1]]] = val
                    env[m] = tuple(mems[m])
                    for dst, src in self.copies.items():
                        if src == m:
                            env[dst] = env[m]
                else:
                    dom = self.tdoms[slot]
                    if dom is not None and not any(val == d and type(val) is type(d) for d in dom):
                        ok = False
                        break
                    env[slot] = val
            if ok:
                yield env

    def _build(self, asg, base, idx):
        env = {}
        mems = {m: list(base) for m in self.mems if m not in self.copies}
        for k, v in asg.items():
            if isinstance(k, tuple):
                mems[k[0]][idx[k[1]]] = v
            else:
                env[k] = v
        for m, cells in mems.items():
            env[m] = tuple(cells)
        for dst, src in self.copies.items():
            env[dst] = env[src]
        return env, mems


def _type_values(cfg, ty):
    try:
        return type_domain(cfg, ty)
    except Exception:
        return None


def relevant(nodes: list, antecedent: list) -> list:
    """Antecedent conjuncts sharing variables (transitively) with the formula.

    Dropping the others only strengthens the obligation.
    """
    seen = set()
    for n in nodes:
        seen |= S.free_vars(n)
    pending = [(p, S.free_vars(p)) for p in antecedent]
    keep = [p for p, fv in pending if not fv]
    pending = [(p, fv) for p, fv in pending if fv]
    changed = True
    while changed:
        changed = False
        rest = []
        for p, fv in pending:
            if fv & seen:
                keep.append(p)
                seen |= fv
                changed = True
            else:
                rest.append((p, fv))
        pending = rest
    return [p for p in antecedent if any(p is q for q in keep)]


def forall(cfg: ProgramConfig, gamma: dict, nodes: list, antecedent: list, body,
           extra_reads: dict | None = None, cap: int | None = None, bound=()):
    """Check body(env) for every assignment satisfying the antecedent.

    Returns None when it holds everywhere, else a Counterexample. The
    antecedent is a list of propositions; body returns True, False or a
    string describing the failure.
    """
    antecedent = relevant(nodes, antecedent)
    space = Space(cfg, gamma, nodes, antecedent, extra_reads, cap, bound)
    comp = Compiler(cfg)
    ante = [comp.prop(p) for p in antecedent]
    for env in space.envs():
        try:
            if not all(a(env) for a in ante):
                continue
            r = body(env)
        except EvalError as e:
            return Counterexample(env, f"evaluation error: {e}")
        if r is not True:
            return Counterexample(env, r if isinstance(r, str) else "")
    return None


def antecedent_of(psi, lhs=None) -> list:
    out = []
    for p in psi:
        out.extend(conjuncts(p))
    if lhs is not None:
        out.extend(conjuncts(lhs))
    return out


def check_entailment(cfg, mode, gamma, psi, lhs, rhs, cap=None):
    comp = Compiler(cfg, mode)
    f, g = comp.assertion(lhs), comp.assertion(rhs)

    def body(env):
        a, b = f(env), g(env)
        if entails(mode, a, b):
            return True
        return f"lhs={show_value(a) if mode == BOOL else a} rhs={show_value(b) if mode == BOOL else b}"

    return forall(cfg, gamma, [lhs, rhs], antecedent_of(psi, lhs), body, cap=cap)


def check_prop(cfg, gamma, psi, prop, cap=None):
    f = Compiler(cfg).prop(prop)
    return forall(cfg, gamma, [prop], antecedent_of(psi), lambda env: f(env), cap=cap)


# ---------------------------------------------------------------- safety


def syntactically_safe(cfg, a, memvar: str, sigma) -> bool:
    r = mem_reads(a, memvar, cfg)
    return r is not ALL and not (set(r) & set(sigma))


def check_safe(cfg: ProgramConfig, a, sigma, mode: str = BOOL, memvar: str = "s", gamma=None, cap=None):
    """Unary safety: the assertion cannot tell memories apart that differ only on sigma."""
    if syntactically_safe(cfg, a, memvar, sigma):
        return None
    gamma = dict(gamma or {})
    gamma[memvar] = S.MEM
    comp = Compiler(cfg, mode)
    f = comp.assertion(a)
    space_reads = mem_reads(a, memvar, cfg)
    reads = cfg.locations if space_reads is ALL else space_reads
    inner = [l for l in reads if l in set(sigma)]
    inner_doms = [cfg.domain(l) for l in inner]
    idx = [cfg.index(l) for l in inner]
    total = 1
    for d in inner_doms:
        total *= len(d)

    def body(env):
        ref = f(env)
        m = list(env[memvar])
        for vals in itertools.product(*inner_doms):
            for i, v in zip(idx, vals):
                m[i] = v
            other = f({**env, memvar: tuple(m)})
            if other != ref:
                return f"changing {', '.join(inner)} to {', '.join(show_value(v) for v in vals)} gives {other} instead of {ref}"
        return True

    inner_cap = (cap or cfg.cap) // max(total, 1)
    return forall(cfg, gamma, [a], [], body, cap=max(inner_cap, 1))


def check_rsafe(cfg: ProgramConfig, phi, sigma, gamma=None, psi=(), cap=None):
    """Relational safety: related memories agree on sigma and stay related after equal writes to it."""
    gamma = dict(gamma or {})
    gamma.setdefault("s1", S.MEM)
    gamma.setdefault("s2", S.MEM)
    comp = Compiler(cfg, BOOL)
    f = comp.assertion(phi)
    sig = list(sigma)
    i1 = {l: cfg.index(l) for l in sig}

    def body(env):
        if not f(env):
            return True
        m1, m2 = env["s1"], env["s2"]
        for l in sig:
            i = i1[l]
            if not (m1[i] == m2[i] and type(m1[i]) is type(m2[i])):
                return f"related memories disagree on {l}"
            for v in cfg.domain(l):
                a, b = list(m1), list(m2)
                a[i] = b[i] = v
                if not f({**env, "s1": tuple(a), "s2": tuple(b)}):
                    return f"writing {show_value(v)} to {l} breaks the relation"
        return True

    extra = {"s1": sig, "s2": sig}
    return forall(cfg, gamma, [phi], antecedent_of(psi, phi), body, extra_reads=extra, cap=cap)
