"""Program configuration: locations, arrays, value domains and distributions."""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from fractions import Fraction

from .syntax import TNat, Type

DEFAULT_CAP = 2**20


class ConfigError(Exception):
    pass


def value_key(v):
    """Total order on first-order values (none < bools < numbers < tuples)."""
    if v is None:
        return (0,)
    if isinstance(v, bool):
        return (1, v)
    if isinstance(v, (int, Fraction)):
        return (2, v)
    if isinstance(v, tuple):
        return (3, len(v), tuple(value_key(x) for x in v))
    return (4, repr(v))


def show_value(v) -> str:
    if v is None:
        return "none"
    if v is True:
        return "tt"
    if v is False:
        return "ff"
    if v == () and isinstance(v, tuple):
        return "()"
    if isinstance(v, tuple):
        return "(" + ", ".join(show_value(x) for x in v) + ")"
    return str(v)


@dataclass(frozen=True)
class DistDecl:
    """A named family of finite distributions indexed by argument tuples.

    kind is one of
      uniform N          uniform over {0..N-1}, no arguments
      uniform_except N   uniform over {0..N-1} minus the argument values
                         (falls back to the full range if nothing is left)
      table              explicit rows: argument tuple -> {value: prob}
    """

    name: str
    arg_types: tuple
    result: Type
    kind: str
    size: int = 0
    rows: tuple = ()

    def support_set(self, args: tuple) -> frozenset | None:
        """The finite set B when the distribution is uniform over B."""
        if self.kind == "uniform":
            return frozenset(range(self.size))
        if self.kind == "uniform_except":
            full = frozenset(range(self.size))
            left = full - {a for a in args if a is not None}
            return left or full
        return None

    def table(self, args: tuple) -> dict:
        b = self.support_set(args)
        if b is not None:
            p = Fraction(1, len(b))
            return {v: p for v in sorted(b)}
        for key, row in self.rows:
            if key == tuple(args):
                return dict(row)
        raise ConfigError(f"distribution {self.name} has no row for arguments {args!r}")

    def is_uniform_nat(self) -> bool:
        return self.kind == "uniform"


@dataclass
class ProgramConfig:
    locations: tuple = ()
    arrays: dict = field(default_factory=dict)
    values: tuple = tuple(range(2))
    domains: dict = field(default_factory=dict)
    dists: dict = field(default_factory=dict)
    cap: int = DEFAULT_CAP
    logic: str = "ubl"

    def __post_init__(self):
        self.locations = tuple(self.locations)
        self._index = {l: i for i, l in enumerate(self.locations)}
        if len(self._index) != len(self.locations):
            raise ConfigError("duplicate location")
        env_cap = os.environ.get("HOPLOG_CAP")
        if env_cap:
            self.cap = int(env_cap)
        if self.cap <= 0:
            raise ConfigError("enumeration cap must be positive")
        if not self.values:
            raise ConfigError("value domain must be nonempty")

    def index(self, loc: str) -> int:
        try:
            return self._index[loc]
        except KeyError:
            raise ConfigError(f"unknown location {loc}") from None

    def has_location(self, loc: str) -> bool:
        return loc in self._index

    def domain(self, loc: str) -> tuple:
        return tuple(self.domains.get(loc, self.values))

    def cells(self, name: str) -> tuple:
        """Locations named by an effect atom: an array name expands to its cells."""
        if name in self.arrays:
            return self.arrays[name]
        self.index(name)
        return (name,)

    def default_memory(self) -> tuple:
        return tuple(self.domain(l)[0] for l in self.locations)

    def memory_space_size(self, locs=None) -> int:
        n = 1
        for l in locs if locs is not None else self.locations:
            n *= len(self.domain(l))
        return n

    def with_cap(self, cap: int | None) -> "ProgramConfig":
        if cap is None:
            return self
        c = ProgramConfig(
            self.locations, self.arrays, self.values, self.domains, self.dists, cap, self.logic
        )
        c.cap = cap
        return c

    def to_json(self) -> dict:
        return {
            "locations": list(self.locations),
            "arrays": {k: list(v) for k, v in sorted(self.arrays.items())},
            "values": [show_value(v) for v in self.values],
            "domains": {
                k: [show_value(v) for v in self.domains[k]] for k in sorted(self.domains)
            },
            "dists": {
                k: {"kind": d.kind, "size": d.size, "rows": repr(d.rows)}
                for k, d in sorted(self.dists.items())
            },
            "cap": self.cap,
        }

    def digest(self) -> str:
        blob = json.dumps(self.to_json(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def show_memory(cfg: ProgramConfig, mem: tuple) -> str:
    return "[" + ", ".join(f"{l}={show_value(v)}" for l, v in zip(cfg.locations, mem)) + "]"


def nat_domain(n: int, with_none: bool = False) -> tuple:
    return ((None,) if with_none else ()) + tuple(range(n))


def uniform(name: str, n: int) -> DistDecl:
    return DistDecl(name, (), TNat(n - 1), "uniform", n)
