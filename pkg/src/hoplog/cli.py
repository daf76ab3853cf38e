"""Command-line front end: hoplog {typecheck,check-proof,run,validate,selftest}."""

from __future__ import annotations

import argparse
import json
import re
import sys
import time
from pathlib import Path

from . import corpus
from .config import ConfigError
from .discharge import DischargeError
from .kernel import check_proof, load_script
from .oracle import OracleError, check_lifting_laws, check_monad_laws, instantiate, validate_proof
from .proof import ProofError, show_grade
from .semantics import EvalError, Interpreter, outcome_table, parse_memory, parse_value
from .sexp import SexpError
from .surface import ParseError, parse_program, show_type
from .typecheck import TypeCheckError, check_program

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def resolve(path: str) -> Path:
    """A file path, falling back to the shipped corpus by basename."""
    p = Path(path)
    if p.exists():
        return p
    alt = corpus.find(path)
    if alt is None:
        raise UsageError(f"no such file: {path}")
    return alt


def load_program(path: str, values: str | None = None, cap: int | None = None):
    text = resolve(path).read_text()
    if values:
        decl = f"values {values.strip().rstrip(';')};"
        text, n = re.subn(r"^[ \t]*values\b[^;]*;", decl, text, count=1, flags=re.M)
        if n == 0:
            text = decl + "\n" + text
    return parse_program(text, cap)


def _emit(obj, as_json: bool, human: str):
    if as_json:
        print(json.dumps(obj, sort_keys=True, indent=2))
    else:
        print(human)


def _error_json(e: Exception) -> dict:
    if hasattr(e, "to_json"):
        return e.to_json()
    out = {"error": type(e).__name__, "message": str(e)}
    if isinstance(e, ParseError) and e.line:
        out["line"], out["column"] = e.line, e.col
    return out


def show_derivation(d, depth: int = 0) -> list:
    lines = [f"{'  ' * depth}{d.rule}  [{show_grade(d.grade)}]"]
    for c in d.children:
        lines.extend(show_derivation(c, depth + 1))
    return lines


# ---------------------------------------------------------------- subcommands


def cmd_typecheck(args) -> int:
    prog = load_program(args.file, args.values, args.cap)
    types = check_program(prog, args.defn)
    shown = {k: show_type(t) for k, t in types.items()}
    _emit({"ok": True, "types": shown}, args.json, "\n".join(f"{k} : {t}" for k, t in shown.items()))
    return EXIT_OK


def _check(args):
    prog = load_program(args.program, args.values, args.cap)
    check_program(prog)
    script = load_script(resolve(args.proof).read_text())
    cert = check_proof(prog, script, logic=args.logic, cap=args.cap)
    return prog, script, cert


def cmd_check_proof(args) -> int:
    prog, script, cert = _check(args)
    code = EXIT_OK
    if args.validate:
        report = validate_proof(prog, script, cert, cap=args.cap, instances=args.impl or None)
        cert.oracle = report.to_json()
        code = EXIT_OK if report.ok else EXIT_FAIL
    text = cert.dumps()
    if args.out:
        Path(args.out).write_text(text)
    if args.trace:
        print("\n".join(show_derivation(cert.derivation)), file=sys.stderr)
    if args.json:
        sys.stdout.write(text)
    else:
        lines = [
            f"checked {cert.logic} judgment for {', '.join(cert.programs)}",
            f"  pre:   {cert.pre}",
            f"  post:  {cert.post}",
            f"  grade: {cert.grade}",
            f"  rules: {cert.rule_count}, obligations: {cert.obligations['total']}",
        ]
        for a in cert.admitted:
            lines.append(f"  admitted: {a['name']} ({len(a['uses'])} use(s))")
        if cert.oracle is not None:
            lines.append(f"  oracle: {len(cert.oracle['failures'])} failure(s) over "
                         f"{cert.oracle['memories_checked']} memories")
        print("\n".join(lines))
    return code


def cmd_validate(args) -> int:
    prog, script, cert = _check(args)
    report = validate_proof(prog, script, cert, cap=args.cap, instances=args.impl or None)
    print(json.dumps(report.to_json(), sort_keys=True, indent=2))
    return EXIT_OK if report.ok else EXIT_FAIL


def cmd_run(args) -> int:
    prog = load_program(args.file, args.values, args.cap)
    check_program(prog)
    d = prog.definition(args.defn)
    env = {}
    for item in args.arg or []:
        if "=" not in item:
            raise UsageError(f"bad --arg {item!r}; expected name=value")
        k, v = item.split("=", 1)
        env[k.strip()] = parse_value(v)
    missing = [x for x, _ in d.params if x not in env]
    if missing:
        raise UsageError(f"definition {d.name} needs --arg for {', '.join(missing)}")
    impl = args.impl[0] if args.impl else None
    if impl is None and len(prog.impls) == 1:
        impl = next(iter(prog.impls))
    t = instantiate(prog, d.body, impl)
    cfg = prog.config
    mem = parse_memory(cfg, args.memory or "")
    trace: list | None = [] if args.trace else None
    dist = Interpreter(cfg, trace).run(t, mem, env)
    rows = outcome_table(cfg, dist)
    if trace:
        print("\n".join(trace), file=sys.stderr)
    if args.json:
        print(json.dumps([{"value": v, "memory": m, "probability": p} for v, m, p in rows], indent=2))
    else:
        print("\n".join(f"{v}, {m}, {p}" for v, m, p in rows))
    return EXIT_OK


def cmd_selftest(args) -> int:
    t0 = time.time()
    results = {m: check_lifting_laws(m, args.trials, args.seed) for m in ("ubl", "exp", "rpl")}
    monad = check_monad_laws(args.programs, args.seed)
    try:
        corpus.load_corpus()
        integrity = "ok"
    except corpus.CorpusIntegrityError as e:
        integrity = str(e)
    total = sum(r["violations"] for r in results.values()) + monad["violations"]
    summary = {"lifting_laws": results, "monad_laws": monad, "corpus": integrity,
               "violations": total, "seconds": round(time.time() - t0, 2)}
    lines = []
    for m, r in results.items():
        lines.append(f"lifting {m}: {r['trials']} cases per law, "
                     + ", ".join(f"{k} {r[k]}" for k in ("monotonicity", "unit", "bind", "strength")) + " violations")
    lines.append(f"monad laws: {monad['trials']} programs, left unit {monad['left_unit']}, "
                 f"right unit {monad['right_unit']}, associativity {monad['associativity']} violations")
    lines.append(f"corpus integrity: {integrity}")
    lines.append("selftest passed" if total == 0 and integrity == "ok" else "selftest FAILED")
    _emit(summary, args.json, "\n".join(lines))
    return EXIT_OK if total == 0 and integrity == "ok" else EXIT_FAIL


# ---------------------------------------------------------------- entry point


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="machine-readable output")
    common.add_argument("--cap", type=int, help="enumeration cap (overrides HOPLOG_CAP)")
    common.add_argument("--values", help="override the value domain, e.g. 'nat 8 + none'")
    common.add_argument("--trace", action="store_true", help="print an evaluation or derivation trace")

    ap = argparse.ArgumentParser(prog="hoplog", description="Higher-order probabilistic program logics.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("typecheck", parents=[common], help="type-check a program")
    p.add_argument("file")
    p.add_argument("--def", dest="defn", help="only this definition or implementation")
    p.set_defaults(fn=cmd_typecheck)

    for name, fn, hlp in (("check-proof", cmd_check_proof, "check a proof script and emit a certificate"),
                          ("validate", cmd_validate, "check a proof and validate it by exhaustive enumeration")):
        p = sub.add_parser(name, parents=[common], help=hlp)
        p.add_argument("program")
        p.add_argument("proof")
        p.add_argument("--logic", choices=["ubl", "exp", "rpl"])
        p.add_argument("--impl", action="append", help="adversary implementation(s) to validate against")
        p.set_defaults(fn=fn)
        if name == "check-proof":
            p.add_argument("--out", help="write the certificate to this file")
            p.add_argument("--validate", action="store_true", help="attach an oracle validation summary")
        else:
            p.add_argument("--exhaustive", action="store_true",
                           help="enumerate every admissible initial state (always on)")

    p = sub.add_parser("run", parents=[common], help="run a definition and print its outcome distribution")
    p.add_argument("file")
    p.add_argument("--def", dest="defn", required=True)
    p.add_argument("--memory", help="initial memory, e.g. 'a=0,L=none'")
    p.add_argument("--arg", action="append", help="parameter value, e.g. x=2")
    p.add_argument("--impl", action="append", help="adversary implementation to plug in")
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("selftest", parents=[common], help="run the lifting-law and monad-law suites")
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--programs", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_selftest)
    return ap


FAILURES = (ParseError, TypeCheckError, ProofError, OracleError, EvalError, ConfigError, SexpError,
            DischargeError, corpus.CorpusIntegrityError)


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_USAGE
    if getattr(args, "cap", None) is not None and args.cap <= 0:
        print("hoplog: error: --cap must be positive", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.fn(args)
    except UsageError as e:
        print(f"hoplog: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except FAILURES as e:
        if getattr(args, "json", False):
            print(json.dumps(_error_json(e), sort_keys=True, indent=2))
        else:
            print(f"hoplog: {type(e).__name__}: {e}" if not isinstance(e, ProofError) else f"hoplog: {e}",
                  file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
