import pytest

from hoplog.corpus import load_corpus
from hoplog.kernel import check_proof
from hoplog.surface import parse_program


@pytest.fixture(scope="session")
def corpus():
    return load_corpus()


@pytest.fixture(scope="session")
def programs(corpus):
    return {name: parse_program(e.program) for name, e in corpus.items()}


@pytest.fixture(scope="session")
def certs(corpus, programs):
    return {name: check_proof(programs[name], e.proof) for name, e in corpus.items()}


def proof(logic, programs, pre, post, derivation, grade=None, extra=""):
    """Assemble a proof script from its parts."""
    progs = programs if isinstance(programs, str) else " ".join(programs)
    head = "programs" if " " in progs else "program"
    g = f"(grade {grade})" if grade is not None else ""
    return f"(proof (logic {logic}) ({head} {progs}) {extra} (pre {pre}) (post {post}) {g} (derivation {derivation}))"


# ---------------------------------------------------------------- acceptance summary

ACCEPTANCE: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, title, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {n}. {title}: {detail}")
