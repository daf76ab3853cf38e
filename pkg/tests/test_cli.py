import json

import pytest

from hoplog import cli
from hoplog.corpus import load_corpus

BAD_TYPES = """values nat 2;
locations a;
def f : T[{}; 0] nat(1) = write a 1
"""


def call(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_typecheck(capsys):
    code, out, _ = call(capsys, "typecheck", "collision.hop")
    assert code == 0 and "game : T[" in out
    code, out, _ = call(capsys, "typecheck", "collision.hop", "--json", "--def", "prf")
    assert code == 0 and list(json.loads(out)["types"]) == ["prf"]


def test_typecheck_failure_exits_1(capsys, tmp_path):
    p = tmp_path / "bad.hop"
    p.write_text(BAD_TYPES)
    code, out, err = call(capsys, "typecheck", str(p))
    assert code == 1 and "EffectEscape" in err
    code, out, _ = call(capsys, "typecheck", str(p), "--json")
    assert code == 1 and "error" in json.loads(out)


def test_parse_failure_exits_1(capsys, tmp_path):
    p = tmp_path / "bad.hop"
    p.write_text("values nat 2;\nlocations a\ndef")
    assert call(capsys, "typecheck", str(p))[0] == 1


def test_check_proof_reports_the_admitted_lemma(capsys):
    code, out, _ = call(capsys, "check-proof", "bloom.hop", "bloom.proof", "--logic", "exp")
    assert code == 0
    assert "admitted: F-decreasing" in out and "grade: 0" in out


@pytest.mark.parametrize("name", sorted(load_corpus()))
def test_certificates_are_byte_identical(capsys, name):
    entry = load_corpus()[name]
    code, out, _ = call(capsys, "check-proof", f"{name}.hop", f"{name}.proof", "--json")
    assert code == 0 and out == entry.expected


def test_check_proof_out_trace_and_validate(capsys, tmp_path):
    target = tmp_path / "cert.json"
    code, out, err = call(capsys, "check-proof", "sticky.hop", "sticky.proof", "--out", str(target),
                          "--trace", "--validate")
    assert code == 0
    cert = json.loads(target.read_text())
    assert cert["oracle"]["failures"] == [] and cert["oracle"]["memories_checked"] > 0
    assert "MFOLD-U" in err
    assert "oracle: 0 failure(s)" in out


def test_logic_mismatch_exits_1(capsys):
    code, _, err = call(capsys, "check-proof", "bloom.hop", "bloom.proof", "--logic", "ubl")
    assert code == 1 and "ModeError" in err


def test_validate_prfprp(capsys):
    code, out, _ = call(capsys, "validate", "prfprp.hop", "prfprp.proof", "--logic", "rpl", "--exhaustive")
    assert code == 0
    report = json.loads(out)
    assert report["failures"] == [] and report["admitted_lemmas_falsified"] == []
    assert report["stats"]["collide"]["statistical_distance"] == "1/4"
    assert report["stats"]["constant"]["statistical_distance"] == "0"


def test_validate_single_impl(capsys):
    code, out, _ = call(capsys, "validate", "collision.hop", "collision.proof", "--impl", "repeat")
    assert code == 0 and json.loads(out)["instances"] == ["repeat"]


def test_cap_errors(capsys, monkeypatch):
    assert call(capsys, "validate", "bloom.hop", "bloom.proof", "--cap", "0")[0] == 2
    assert call(capsys, "validate", "bloom.hop", "bloom.proof", "--cap", "10")[0] == 1
    monkeypatch.setenv("HOPLOG_CAP", "10")
    assert call(capsys, "validate", "bloom.hop", "bloom.proof")[0] == 1


def test_run(capsys):
    code, out, _ = call(capsys, "run", "collision.hop", "--def", "prf", "--arg", "x=3", "--memory", "a=0")
    rows = out.strip().splitlines()
    assert code == 0 and len(rows) == 8 and all(r.endswith("1/8") for r in rows)
    code, out, err = call(capsys, "run", "collision.hop", "--def", "game", "--impl", "distinct", "--json", "--trace")
    data = json.loads(out)
    assert code == 0 and "read L[0]" in err
    from fractions import Fraction
    assert sum(Fraction(r["probability"]) for r in data) == 1


def test_run_usage_errors(capsys):
    assert call(capsys, "run", "collision.hop", "--def", "prf")[0] == 2
    assert call(capsys, "run", "collision.hop", "--def", "prf", "--arg", "x")[0] == 2
    assert call(capsys, "run", "collision.hop")[0] == 2


def test_values_override(capsys):
    code, out, _ = call(capsys, "run", "collision.hop", "--def", "prf", "--arg", "x=0", "--values", "nat 16 + none")
    assert code == 0 and len(out.strip().splitlines()) == 8


def test_selftest(capsys):
    code, out, _ = call(capsys, "selftest", "--trials", "50", "--programs", "10")
    assert code == 0 and "selftest passed" in out
    code, out, _ = call(capsys, "selftest", "--trials", "20", "--programs", "5", "--json")
    assert code == 0 and json.loads(out)["violations"] == 0


@pytest.mark.parametrize("argv", [[], ["bogus"], ["typecheck"], ["typecheck", "missing.hop"],
                                  ["check-proof", "bloom.hop", "missing.proof"],
                                  ["check-proof", "bloom.hop", "bloom.proof", "--logic", "dp"]])
def test_usage_errors_exit_2(capsys, argv):
    assert call(capsys, *argv)[0] == 2


def test_help_exits_0(capsys):
    assert call(capsys, "--help")[0] == 0
