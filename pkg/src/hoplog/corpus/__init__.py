"""The shipped example programs, proof scripts and expected certificates."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

HERE = Path(__file__).resolve().parent
MANIFEST = HERE / "MANIFEST.json"

# name -> (logic, one-line description)
ENTRIES = {
    "collision": ("ubl", "collision bound for a lazily sampled random function"),
    "bloom": ("exp", "expected pollution of a Bloom filter"),
    "prfprp": ("rpl", "PRF/PRP switching"),
    "sticky": ("ubl", "bounded iteration with an absorbing failure (MFOLD-U)"),
    "branch": ("rpl", "synchronized branching on both sides (MCASE-R)"),
    "guess": ("ubl", "an adversary rule with two concrete adversaries (ADV-U)"),
}


class CorpusIntegrityError(Exception):
    pass


@dataclass(frozen=True)
class CorpusEntry:
    name: str
    logic: str
    description: str
    program: str
    proof: str
    expected: str       # certificate JSON text

    @property
    def program_path(self) -> Path:
        return HERE / f"{self.name}.hop"

    @property
    def proof_path(self) -> Path:
        return HERE / f"{self.name}.proof"


def _files(name: str) -> list[str]:
    return [f"{name}.hop", f"{name}.proof", f"{name}.cert.json"]


def _digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def load_corpus(verify: bool = True) -> dict[str, CorpusEntry]:
    """All corpus entries by name; raises CorpusIntegrityError when a file's hash is off."""
    manifest = json.loads(MANIFEST.read_text())
    out = {}
    for name, (logic, desc) in ENTRIES.items():
        if verify:
            for f in _files(name):
                path = HERE / f
                if not path.exists():
                    raise CorpusIntegrityError(f"corpus file {f} is missing")
                if manifest.get(f) != _digest(path):
                    raise CorpusIntegrityError(f"corpus file {f} does not match its recorded hash")
        out[name] = CorpusEntry(
            name, logic, desc,
            (HERE / f"{name}.hop").read_text(),
            (HERE / f"{name}.proof").read_text(),
            (HERE / f"{name}.cert.json").read_text(),
        )
    return out


def find(path: str) -> Path | None:
    """Resolve a corpus file by basename (e.g. examples/bloom.hop -> the shipped bloom.hop)."""
    cand = HERE / Path(path).name
    return cand if cand.exists() and cand.suffix in (".hop", ".proof") else None


def rebuild() -> dict:
    """Regenerate expected certificates and the hash manifest from the shipped sources."""
    from ..kernel import check_proof
    from ..surface import parse_program

    manifest = {}
    for name in ENTRIES:
        prog = parse_program((HERE / f"{name}.hop").read_text())
        cert = check_proof(prog, (HERE / f"{name}.proof").read_text())
        (HERE / f"{name}.cert.json").write_text(cert.dumps())
        for f in _files(name):
            manifest[f] = _digest(HERE / f)
    MANIFEST.write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n")
    return manifest
