"""Text format shared by process specs and serialized machines.

::

    # comment
    alphabet: A B
    state 1 A            # optional: state id followed by its suffixes
    1 A 1/2 1            # <from> <symbol> <probability> <to>
    1 B 0.5 2
    2 B 1 1

Probabilities are decimals or rationals ``p/q``.  Suffixes are written as
comma-separated symbols, with ``()`` for the empty word.  States are numbered
in order of first appearance.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .sequence import Alphabet

EMPTY_WORD = "()"


class SpecError(ValueError):
    """Malformed spec or machine text."""


@dataclass
class ProcessSpec:
    """Declarative machine description: alphabet, state suffixes and rows."""

    alphabet: Alphabet
    states: list[str]
    rows: list[tuple[str, str, Fraction, str]]
    suffixes: dict[str, list[tuple[str, ...]]] = field(default_factory=dict)

    def probability_table(self) -> dict[tuple[str, str], tuple[Fraction, str]]:
        table = {}
        for src, sym, p, dst in self.rows:
            if (src, sym) in table:
                raise SpecError(f"duplicate row for state {src!r}, symbol {sym!r}")
            table[src, sym] = (p, dst)
        return table


def parse_probability(token: str) -> Fraction:
    """Exact value of a decimal or ``p/q`` probability."""
    try:
        return Fraction(token)
    except (ValueError, ZeroDivisionError):
        raise SpecError(f"bad probability {token!r}") from None


def parse_word(token: str) -> tuple[str, ...]:
    return () if token == EMPTY_WORD else tuple(token.split(","))


def format_word(word) -> str:
    return ",".join(word) if word else EMPTY_WORD


def parse_spec(text: str) -> ProcessSpec:
    alphabet = None
    states: list[str] = []
    seen = set()
    rows = []
    suffixes: dict[str, list[tuple[str, ...]]] = {}

    def note(state):
        if state not in seen:
            seen.add(state)
            states.append(state)

    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("alphabet:"):
            if alphabet is not None:
                raise SpecError(f"line {lineno}: alphabet declared twice")
            alphabet = Alphabet(tuple(line[len("alphabet:"):].split()))
            continue
        parts = line.split()
        if parts[0] == "state":
            if len(parts) < 2:
                raise SpecError(f"line {lineno}: state line needs an id")
            note(parts[1])
            suffixes.setdefault(parts[1], []).extend(parse_word(w) for w in parts[2:])
            continue
        if alphabet is None:
            raise SpecError(f"line {lineno}: transition row before 'alphabet:' header")
        if len(parts) != 4:
            raise SpecError(f"line {lineno}: expected '<from> <symbol> <prob> <to>', got {line!r}")
        src, sym, prob, dst = parts
        if sym not in alphabet:
            raise SpecError(f"line {lineno}: symbol {sym!r} not in alphabet")
        p = parse_probability(prob)
        if p < 0 or p > 1:
            raise SpecError(f"line {lineno}: probability {prob} outside [0, 1]")
        note(src)
        note(dst)
        rows.append((src, sym, p, dst))
    if alphabet is None:
        raise SpecError("missing 'alphabet:' header")
    for state, words in suffixes.items():
        for w in words:
            for s in w:
                if s not in alphabet:
                    raise SpecError(f"suffix of state {state!r} uses unknown symbol {s!r}")
    return ProcessSpec(alphabet, states, rows, suffixes)


def read_spec(path) -> ProcessSpec:
    return parse_spec(Path(path).read_text())
