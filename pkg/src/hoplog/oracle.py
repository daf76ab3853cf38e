"""Semantic validation of checked judgments on finite distributions.

Every check here is exact: probabilities, expectations and flows are
rationals, and +inf is the float infinity shared with the semantics.
"""

from __future__ import annotations

import itertools
import random
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

from . import syntax as S
from .assertions import BOOL, QUANT, Compiler, conjuncts, type_domain
from .config import ConfigError, show_memory, show_value
from .discharge import DischargeError, Space, check_entailment, check_prop, check_rsafe, check_safe
from .semantics import INF, Dist, EvalError, Interpreter, dist_bind, expectation, qadd

ZERO = Fraction(0)


class OracleError(Exception):
    pass


# ---------------------------------------------------------------- liftings


def check_union_bound(d: Dist, Q: Callable, delta) -> bool:
    """Pr[Q] >= 1 - delta."""
    if delta == INF:
        return True
    return d.prob(Q) >= 1 - Fraction(delta)


def check_expectation(d: Dist, Q: Callable, bound) -> bool:
    """E[Q] <= bound, with +inf absorbing."""
    e = expectation(d, Q)
    if bound == INF:
        return True
    if e == INF:
        return False
    return e <= bound


def statistical_distance(d1: Dist, d2: Dist) -> Fraction:
    return sum((max(ZERO, p - d2[x]) for x, p in d1.items()), ZERO)


def max_flow(n: int, edges: list, source: int, sink: int):
    """Edmonds-Karp over exact capacities (None means unbounded); returns (value, flow per edge)."""
    graph: list = [[] for _ in range(n)]
    cap: list = []
    to: list = []
    for u, v, c in edges:
        graph[u].append(len(to))
        to.append(v)
        cap.append(c)
        graph[v].append(len(to))
        to.append(u)
        cap.append(ZERO)
    flow = [ZERO] * len(to)

    def residual(e):
        c = cap[e]
        return None if c is None else c - flow[e]

    total = ZERO
    while True:
        parent = [-1] * n
        parent[source] = -2
        queue = deque([source])
        while queue and parent[sink] == -1:
            u = queue.popleft()
            for e in graph[u]:
                r = residual(e)
                if parent[to[e]] == -1 and (r is None or r > 0):
                    parent[to[e]] = e
                    queue.append(to[e])
        if parent[sink] == -1:
            break
        path = []
        v = sink
        while v != source:
            e = parent[v]
            path.append(e)
            v = to[e ^ 1]
        amounts = [r for r in (residual(e) for e in path) if r is not None]
        push = min(amounts)  # the source edges are always bounded
        for e in path:
            flow[e] += push
            flow[e ^ 1] -= push
        total += push
    return total, [flow[2 * i] for i in range(len(edges))]


@dataclass
class LiftingResult:
    holds: bool
    mass: Fraction                        # total mass of the best sub-coupling
    coupling: dict | None = None          # (x, y) -> weight when the lifting holds

    def __bool__(self):
        return self.holds


def check_approx_lifting(d1: Dist, d2: Dist, R: Callable, delta) -> LiftingResult:
    """A sub-coupling supported on R with marginals below d1, d2 and mass >= 1 - delta exists."""
    left, right = d1.support(), d2.support()
    n = len(left) + len(right) + 2
    src, snk = n - 2, n - 1
    edges = []
    for i, x in enumerate(left):
        edges.append((src, i, d1[x]))
    pairs = []
    for i, x in enumerate(left):
        for j, y in enumerate(right):
            if R(x, y):
                pairs.append((len(edges), x, y))
                edges.append((i, len(left) + j, None))
    for j, y in enumerate(right):
        edges.append((len(left) + j, snk, d2[y]))
    value, flows = max_flow(n, edges, src, snk)
    holds = delta == INF or value >= 1 - Fraction(delta)
    coupling = None
    if holds:
        coupling = {(x, y): flows[e] for e, x, y in pairs if flows[e] > 0}
    return LiftingResult(holds, value, coupling)


# ---------------------------------------------------------------- lifting laws


def _rand_dist(rng: random.Random, universe=5, max_support=3) -> Dist:
    k = rng.randint(1, max_support)
    xs = rng.sample(range(universe), k)
    ws = [rng.randint(1, 4) for _ in xs]
    tot = sum(ws)
    return Dist({x: Fraction(w, tot) for x, w in zip(xs, ws)})


def _rand_grade(rng: random.Random):
    return rng.choice([ZERO, Fraction(1, 8), Fraction(1, 4), Fraction(1, 3), Fraction(1, 2), Fraction(1), INF])


def _rand_pred(rng: random.Random, universe=5):
    s = frozenset(x for x in range(universe) if rng.random() < 0.5)
    return lambda x: (x[-1] if isinstance(x, tuple) else x) in s


def _rand_quant(rng: random.Random, universe=5):
    table = {x: Fraction(rng.randint(0, 6), rng.randint(1, 3)) for x in range(universe)}
    if rng.random() < 0.1:
        table[rng.randrange(universe)] = INF
    return lambda x: table[x[-1] if isinstance(x, tuple) else x]


def _rand_rel(rng: random.Random, universe=5):
    s = frozenset((x, y) for x in range(universe) for y in range(universe) if rng.random() < 0.4 or x == y and rng.random() < 0.5)
    return lambda a, b: ((a[-1] if isinstance(a, tuple) else a), (b[-1] if isinstance(b, tuple) else b)) in s


def _gadd(a, b):
    return qadd(a, b)


def check_lifting_laws(mode: str, trials: int = 1000, seed: int = 0) -> dict:
    """Property-test monotonicity, unit, bind and strength for one lifting; returns violations per law."""
    rng = random.Random(seed)
    report = {"monotonicity": 0, "unit": 0, "bind": 0, "strength": 0, "trials": trials, "mode": mode}
    for _ in range(trials):
        e1, e2 = _rand_grade(rng), _rand_grade(rng)
        lo, hi = (e1, e2) if (e2 == INF or (e1 != INF and e1 <= e2)) else (e2, e1)
        c = rng.randrange(5)
        if mode == "ubl":
            d, Q = _rand_dist(rng), _rand_pred(rng)
            fs = {x: _rand_dist(rng) for x in range(5)}
            f = lambda x, fs=fs: fs[x]  # noqa: E731
            if check_union_bound(d, Q, lo) and not check_union_bound(d, Q, hi):
                report["monotonicity"] += 1
            x = rng.randrange(5)
            if Q(x) and not check_union_bound(Dist.point(x), Q, ZERO):
                report["unit"] += 1
            mid = lambda x, f=f, Q=Q, e=e2: check_union_bound(f(x), Q, e)  # noqa: E731
            if check_union_bound(d, mid, e1) and not check_union_bound(dist_bind(d, f), Q, _gadd(e1, e2)):
                report["bind"] += 1
            paired = d.map(lambda x: (c, x))
            if check_union_bound(d, Q, e1) != check_union_bound(paired, lambda p: p[0] == c and Q(p[1]), e1):
                report["strength"] += 1
        elif mode == "exp":
            d, Q = _rand_dist(rng), _rand_quant(rng)
            b = Fraction(rng.randint(0, 8), rng.randint(1, 3))
            fs = {x: _rand_dist(rng) for x in range(5)}
            f = lambda x, fs=fs: fs[x]  # noqa: E731
            if check_expectation(d, Q, qadd(b, lo)) and not check_expectation(d, Q, qadd(b, hi)):
                report["monotonicity"] += 1
            x = rng.randrange(5)
            if not check_expectation(Dist.point(x), Q, Q(x)):
                report["unit"] += 1
            # R(x) bounds the expectation of Q after f up to e2; d bounds R by b up to e1
            R = lambda x, f=f, Q=Q: expectation(f(x), Q)  # noqa: E731
            if check_expectation(d, R, qadd(b, e1)) and not check_expectation(dist_bind(d, f), Q, qadd(qadd(b, e1), e2)):
                report["bind"] += 1
            paired = d.map(lambda x: (c, x))
            if check_expectation(d, Q, qadd(b, e1)) != check_expectation(paired, lambda p: Q(p[1]), qadd(b, e1)):
                report["strength"] += 1
        elif mode == "rpl":
            d1, d2, R = _rand_dist(rng), _rand_dist(rng), _rand_rel(rng)
            f1s = {x: _rand_dist(rng) for x in range(5)}
            f2s = {x: _rand_dist(rng) for x in range(5)}
            Q = _rand_rel(rng)
            if check_approx_lifting(d1, d2, R, lo).holds and not check_approx_lifting(d1, d2, R, hi).holds:
                report["monotonicity"] += 1
            x = rng.randrange(5)
            y = rng.randrange(5)
            if R(x, y) and not check_approx_lifting(Dist.point(x), Dist.point(y), R, ZERO).holds:
                report["unit"] += 1
            # bind: if R-related pairs map to Q-liftings at e2, then the composite is a Q-lifting at e1 + e2
            if all(check_approx_lifting(f1s[a], f2s[b], Q, e2).holds
                   for a in d1 for b in d2 if R(a, b)):
                if check_approx_lifting(d1, d2, R, e1).holds and not check_approx_lifting(
                        dist_bind(d1, lambda a: f1s[a]), dist_bind(d2, lambda b: f2s[b]), Q, _gadd(e1, e2)).holds:
                    report["bind"] += 1
            p1, p2 = d1.map(lambda a: (c, a)), d2.map(lambda b: (c, b))
            if check_approx_lifting(d1, d2, R, e1).holds != check_approx_lifting(
                    p1, p2, lambda a, b: a[0] == b[0] and R(a[1], b[1]), e1).holds:
                report["strength"] += 1
        else:
            raise ValueError(f"unknown lifting mode {mode}")
    report["violations"] = report["monotonicity"] + report["unit"] + report["bind"] + report["strength"]
    return report


# ---------------------------------------------------------------- judgment validation


def first_order(ty: S.Type) -> bool:
    if isinstance(ty, (S.TArrow, S.TMon, S.TForall)):
        return False
    if isinstance(ty, S.TProd):
        return first_order(ty.left) and first_order(ty.right)
    return True


def instantiate(prog, term: S.Term, impl: str | None) -> S.Term:
    """Replace the adversary variable by a concrete implementation."""
    advs = S.adv_vars(term)
    if not advs:
        return term
    if impl is None:
        raise OracleError(f"program mentions adversary {', '.join(sorted(advs))}; name an implementation")
    if impl not in prog.impls:
        raise OracleError(f"no implementation named {impl}")
    adv, body = prog.impls[impl]
    return S.subst_adv(term, adv, body)


class _Unread:
    """Placeholder for a cell the program never reads."""

    def __repr__(self):
        return "?"


UNREAD = _Unread()


def read_locations(t) -> set:
    out = set()
    stack = [t]
    while stack:
        n = stack.pop()
        if isinstance(n, S.Read):
            out.add(n.loc)
        stack.extend(S.children(n))
    return out


class _Runner:
    """Runs one program from many memories, sharing work across cells it never reads.

    A cell the program cannot read only flows to the final memory unchanged
    (or gets overwritten), so one run with a placeholder serves every value.
    """

    def __init__(self, interp: Interpreter, cfg, t: S.Term):
        self.interp, self.t = interp, t
        reads = read_locations(t)
        self.blind = [i for i, l in enumerate(cfg.locations) if l not in reads]
        self.cache: dict = {}

    def __call__(self, mem: tuple, env: dict) -> Dist:
        if not self.blind:
            return self.interp.run(self.t, mem, dict(env))
        key = list(mem)
        for i in self.blind:
            key[i] = UNREAD
        key = (tuple(key), tuple(sorted(env.items())))
        d = self.cache.get(key)
        if d is None:
            d = self.cache[key] = self.interp.run(self.t, key[0], dict(env))
        blind = self.blind

        def fill(o):
            v, m = o
            m = list(m)
            for i in blind:
                if m[i] is UNREAD:
                    m[i] = mem[i]
            return v, tuple(m)

        return d.map(fill)


def initial_states(cfg, logic: str, pre: S.Assertion, params=(), cap: int | None = None) -> list:
    """Every (parameter environment, memories) pair the precondition admits.

    Boolean modes keep states where the pre holds; the expectation mode keeps
    states where the pre-expectation is finite (elsewhere the triple is trivial).
    """
    memvars = ["s1", "s2"] if logic == "rpl" else ["s"]
    gamma = {m: S.MEM for m in memvars}
    gamma.update(dict(params))
    if logic == "exp":
        ante = [c.prop for c in _meet_spine(pre) if isinstance(c, S.Inj)]
        keep = lambda r: r != INF  # noqa: E731
    else:
        ante = conjuncts(pre) if not isinstance(pre, S.Top) else []
        keep = bool
    extra = {m: list(cfg.locations) for m in memvars}
    space = Space(cfg, gamma, [pre] + [S.Var(m) for m in memvars], ante, extra_reads=extra, cap=cap)
    f = Compiler(cfg, QUANT if logic == "exp" else BOOL).assertion(pre)
    free = [(x, ty) for x, ty in params if x not in space.plain]
    rest = list(itertools.product(*(type_domain(cfg, ty) for _, ty in free)))
    out = []
    for env in space.envs():
        for vals in rest:
            full = {**env, **{x: v for (x, _), v in zip(free, vals)}}
            try:
                if keep(f(full)):
                    out.append(({x: full[x] for x, _ in params}, tuple(full[m] for m in memvars)))
            except EvalError:
                continue
    return out


def _meet_spine(a):
    if isinstance(a, S.Meet):
        return _meet_spine(a.left) + _meet_spine(a.right)
    return [a]


@dataclass
class Failure:
    instance: str | None
    memories: tuple
    detail: str

    def to_json(self) -> dict:
        return {"instance": self.instance, "memories": list(self.memories), "detail": self.detail}


@dataclass
class ValidationReport:
    logic: str
    grade: object
    memories_checked: int = 0
    instances: list = field(default_factory=list)
    failures: list = field(default_factory=list)
    admitted_lemmas_falsified: list = field(default_factory=list)
    stats: dict = field(default_factory=dict)   # instance -> worst observed quantity

    @property
    def ok(self) -> bool:
        return not self.failures and not self.admitted_lemmas_falsified

    def to_json(self) -> dict:
        return {
            "logic": self.logic,
            "grade": _show_q(self.grade),
            "memories_checked": self.memories_checked,
            "instances": self.instances,
            "failures": [f.to_json() for f in self.failures],
            "admitted_lemmas_falsified": self.admitted_lemmas_falsified,
            "stats": {k: {kk: _show_q(vv) for kk, vv in v.items()} for k, v in sorted(self.stats.items(),
                                                                                  key=lambda kv: str(kv[0]))},
        }


def _show_q(x) -> str:
    if x == INF:
        return "inf"
    x = Fraction(x)
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def validate_triple(prog, logic: str, terms, pre: S.Assertion, post: S.Assertion, grade,
                    instances=None, cap: int | None = None, types=None, admitted=(), params=()) -> ValidationReport:
    """Run the program(s) from every admissible initial state and apply the matching lifting check."""
    cfg = prog.config if cap is None else prog.config.with_cap(cap)
    interp = Interpreter(cfg)
    report = ValidationReport(logic, grade)
    if types is not None and not all(first_order(t) for t in types):
        raise OracleError("validation needs first-order result types")
    impls = list(instances or []) or [None]
    report.instances = [i for i in impls if i is not None]
    try:
        inits = initial_states(cfg, logic, pre, params, cap)
    except DischargeError as e:
        raise OracleError(f"cannot enumerate initial memories: {e}") from None
    comp = Compiler(cfg, QUANT if logic == "exp" else BOOL)
    postf = comp.assertion(post)
    pref = comp.assertion(pre)
    for impl in impls:
        runners = [_Runner(interp, cfg, instantiate(prog, t, impl)) for t in terms]
        worst: dict = {}
        seen: dict = {}
        for env, mems in inits:
            report.memories_checked += 1
            shown = tuple(show_memory(cfg, m) for m in mems)
            if env:
                shown += (" ".join(f"{x}={show_value(v)}" for x, v in sorted(env.items())),)
            try:
                dists = [r(m, env) for r, m in zip(runners, mems)]
            except EvalError as e:
                report.failures.append(Failure(impl, shown, f"run failed: {e}"))
                continue
            ekey = tuple(sorted(env.items()))

            def post_at(o, env=env, ekey=ekey):
                r = seen.get((o, ekey))
                if r is None:
                    r = seen[(o, ekey)] = postf({**env, "s": o[1], "v": o[0]})
                return r

            if logic == "ubl":
                d = dists[0]
                good = lambda o: bool(post_at(o))  # noqa: E731
                fail_p = 1 - d.prob(good)
                worst["failure_probability"] = max(worst.get("failure_probability", ZERO), fail_p)
                if not check_union_bound(d, good, grade):
                    report.failures.append(Failure(impl, shown, f"Pr[not post] = {_show_q(fail_p)} > {_show_q(grade)}"))
            elif logic == "exp":
                d = dists[0]
                e = expectation(d, post_at)
                bound = qadd(pref({**env, "s": mems[0]}), grade)
                worst["expectation"] = max(worst.get("expectation", ZERO), e)
                if not (bound == INF or (e != INF and e <= bound)):
                    report.failures.append(Failure(impl, shown, f"E[post] = {_show_q(e)} > {_show_q(bound)}"))
            else:
                d1, d2 = dists
                R = lambda o1, o2, env=env: bool(  # noqa: E731
                    postf({**env, "s1": o1[1], "v1": o1[0], "s2": o2[1], "v2": o2[0]}))
                sd = statistical_distance(d1, d2)
                worst["statistical_distance"] = max(worst.get("statistical_distance", ZERO), sd)
                res = check_approx_lifting(d1, d2, R, grade)
                if not res.holds:
                    report.failures.append(Failure(impl, shown, f"best coupling mass {_show_q(res.mass)} < 1 - {_show_q(grade)}"))
        report.stats[impl or "-"] = worst
    for ob in admitted:
        cex = falsify(cfg, logic, ob)
        if cex is not None:
            report.admitted_lemmas_falsified.append({"name": ob.name, "path": ob.path, "counterexample": cex})
    return report


def falsify(cfg, logic: str, ob) -> str | None:
    """Try to refute an admitted obligation by enumeration; None when it survives or cannot be enumerated."""
    mode = QUANT if logic == "exp" else BOOL
    try:
        if ob.kind == "entail":
            cex = check_entailment(cfg, mode, ob.gamma, ob.psi, ob.lhs, ob.rhs)
        elif ob.kind == "hol":
            cex = check_prop(cfg, ob.gamma, ob.psi, ob.rhs)
        elif ob.kind == "safe":
            cex = check_safe(cfg, ob.lhs, ob.extra["sigma"], mode)
        elif ob.kind == "rsafe":
            cex = check_rsafe(cfg, ob.lhs, ob.extra["sigma"], gamma=ob.gamma)
        elif "check" in ob.extra:
            cex = ob.extra["check"]()
        else:
            return None
    except (DischargeError, ConfigError, EvalError):
        return None
    except Exception as e:  # a refuted admitted side condition may raise its own rule error
        return str(e)
    return None if cex is None else cex.show(cfg)


def validate_proof(prog, script, cert=None, cap: int | None = None, instances=None) -> ValidationReport:
    """Validate the judgment a checked proof script concludes, with its admitted obligations."""
    from .kernel import check_proof, load_script
    from .sexp import parse_assertion, rational

    if isinstance(script, str):
        script = load_script(script)
    if cert is None:
        cert = check_proof(prog, script, cap=cap)
    defs = [prog.definition(name) for name in script.programs]
    params: dict = {}
    for d in defs:
        params.update(dict(d.params))
    params.update(dict(script.params))
    if not all(first_order(t) for t in params.values()):
        raise OracleError("validation needs first-order parameters")
    pre = parse_assertion(script.pre)
    post = parse_assertion(script.post)
    grade = INF if cert.grade == "inf" else rational(cert.grade)
    admitted = [o for o in cert.all_obligations if o.mode == "admit"]
    types = [_inner(d.ret) for d in defs]
    return validate_triple(prog, cert.logic, [d.body for d in defs], pre, post, grade,
                           instances=instances if instances is not None else script.instances,
                           cap=cap, types=types, admitted=admitted, params=sorted(params.items()))


def _inner(t):
    return t.inner if isinstance(t, S.TMon) else t


def show_outcome(cfg, o) -> str:
    v, m = o
    return f"{show_value(v)} {show_memory(cfg, m)}"


# ---------------------------------------------------------------- monad laws

_LAW_HEADER = """values nat 2;
locations a b in nat 2;
dist coin : unit -> nat(1) = uniform 2;
dist bias : unit -> nat(1) = table { [] -> { 0 : 1/3, 1 : 2/3 } };
"""


class _ProgramGen:
    """Random small computations over two one-bit locations."""

    def __init__(self, rng: random.Random):
        self.rng = rng
        self.n = 0

    def fresh(self) -> str:
        self.n += 1
        return f"x{self.n}"

    def value(self, scope) -> S.Term:
        if scope and self.rng.random() < 0.6:
            return S.Var(self.rng.choice(scope))
        return S.Lit(self.rng.randint(0, 1))

    def comp(self, scope, depth: int) -> S.Term:
        r = self.rng
        kinds = ["unit", "read", "sample"]
        if depth > 0:
            kinds += ["let", "let", "write", "case"]
        k = r.choice(kinds)
        if k == "unit":
            return S.UnitM(self.value(scope))
        if k == "read":
            return S.Read(r.choice(["a", "b"]))
        if k == "sample":
            return S.Sample(r.choice(["coin", "bias"]))
        if k == "write":
            x = self.fresh()
            return S.LetM(x, S.Write(r.choice(["a", "b"]), self.value(scope)), self.comp(scope, depth - 1))
        if k == "case":
            guard = S.Prim("=", (self.value(scope), S.Lit(0)))
            return S.Case(guard, self.comp(scope, depth - 1), self.comp(scope, depth - 1))
        x = self.fresh()
        return S.LetM(x, self.comp(scope, depth - 1), self.comp(scope + [x], depth - 1))

    def kont(self, scope, depth: int) -> S.Term:
        x = self.fresh()
        return S.Lam(x, S.TNat(1), self.comp(scope + [x], depth))


def check_monad_laws(trials: int = 100, seed: int = 0, depth: int = 3) -> dict:
    """Left unit, right unit and associativity by exact distribution equality on every memory."""
    from .surface import parse_program

    cfg = parse_program(_LAW_HEADER).config
    interp = Interpreter(cfg)
    mems = [(x, y) for x in (0, 1) for y in (0, 1)]
    rng = random.Random(seed)
    report = {"left_unit": 0, "right_unit": 0, "associativity": 0, "trials": trials}
    for _ in range(trials):
        g = _ProgramGen(rng)
        t = g.comp([], depth)
        f, h = g.kont([], depth), g.kont([], depth)
        v = rng.randint(0, 1)
        x, y = g.fresh(), g.fresh()
        laws = {
            "left_unit": (S.LetM(x, S.UnitM(S.Lit(v)), S.App(f, S.Var(x))), S.App(f, S.Lit(v))),
            "right_unit": (S.LetM(x, t, S.UnitM(S.Var(x))), t),
            "associativity": (
                S.LetM(y, S.LetM(x, t, S.App(f, S.Var(x))), S.App(h, S.Var(y))),
                S.LetM(x, t, S.LetM(y, S.App(f, S.Var(x)), S.App(h, S.Var(y)))),
            ),
        }
        for law, (lhs, rhs) in laws.items():
            if any(interp.run(lhs, m) != interp.run(rhs, m) for m in mems):
                report[law] += 1
    report["violations"] = report["left_unit"] + report["right_unit"] + report["associativity"]
    return report
