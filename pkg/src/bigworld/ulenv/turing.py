"""Turing machines as finitely supported Markov processes over the integers.

Each tape cell maps to one Markov symbol: ``(q, a)`` under the head in
control state ``q``, ``(None, a)`` for a non-blank cell away from the head,
and the Markov blank (``None``) everywhere else.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Optional

from .markov import MarkovState

NO_HEAD = None
MARKOV_BLANK = None
OFFSET = {"L": -1, "R": 1}


class MachineHalted(Exception):
    """No transition is defined for the current (state, symbol) of a non-final state."""

    def __init__(self, state, symbol, head):
        self.state, self.symbol, self.head = state, symbol, head
        super().__init__(f"no transition for state {state!r} reading {symbol!r} at {head}")


@dataclass(frozen=True)
class TuringMachineSpec:
    states: frozenset
    input_alphabet: frozenset
    tape_alphabet: frozenset
    transitions: Mapping  # (q, a) -> (q', a', "L" | "R")
    start: str
    blank: str
    final: frozenset = frozenset()

    def __post_init__(self):
        errors = self.validate()
        if errors:
            raise ValueError("; ".join(errors))

    def validate(self) -> list[str]:
        errors = []
        if self.start not in self.states:
            errors.append(f"start state {self.start!r} not in states")
        if not self.final <= self.states:
            errors.append("final states must be a subset of states")
        if self.blank not in self.tape_alphabet:
            errors.append("blank must be in the tape alphabet")
        if not self.input_alphabet <= self.tape_alphabet:
            errors.append("input alphabet must be a subset of the tape alphabet")
        for (q, a), (q2, a2, d) in self.transitions.items():
            if q not in self.states or q2 not in self.states:
                errors.append(f"transition ({q!r}, {a!r}) uses an unknown state")
            if a not in self.tape_alphabet or a2 not in self.tape_alphabet:
                errors.append(f"transition ({q!r}, {a!r}) uses an unknown symbol")
            if d not in OFFSET:
                errors.append(f"transition ({q!r}, {a!r}) has direction {d!r}")
        return errors

    def is_total(self) -> bool:
        return all((q, a) in self.transitions for q in self.states - self.final for a in self.tape_alphabet)

    def to_json(self) -> dict:
        return {
            "states": sorted(self.states),
            "input_alphabet": sorted(self.input_alphabet),
            "tape_alphabet": sorted(self.tape_alphabet),
            "start": self.start,
            "blank": self.blank,
            "final": sorted(self.final),
            "transitions": [[q, a, q2, a2, d] for (q, a), (q2, a2, d) in sorted(self.transitions.items())],
        }

    @classmethod
    def from_json(cls, data: dict) -> "TuringMachineSpec":
        rows = data["transitions"]
        table = {}
        for row in rows:
            if len(row) != 5:
                raise ValueError(f"transition row must have 5 entries: {row!r}")
            q, a, q2, a2, d = row
            if (q, a) in table:
                raise ValueError(f"duplicate transition for ({q!r}, {a!r})")
            table[(q, a)] = (q2, a2, d)
        return cls(
            frozenset(data["states"]),
            frozenset(data.get("input_alphabet", [])),
            frozenset(data["tape_alphabet"]),
            table,
            data["start"],
            data["blank"],
            frozenset(data.get("final", [])),
        )

    @classmethod
    def load(cls, path) -> "TuringMachineSpec":
        return cls.from_json(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class TMConfiguration:
    state: str
    head: int
    tape: tuple  # sorted (position, symbol) pairs, blanks omitted

    @classmethod
    def make(cls, state, head, tape: Mapping, blank) -> "TMConfiguration":
        return cls(state, head, tuple(sorted((i, a) for i, a in tape.items() if a != blank)))


def binary_counter() -> TuringMachineSpec:
    """Counts upward forever in binary, most significant bit on the left.

    ``seek`` runs right to the end of the number, ``carry`` adds one walking
    left, then control returns to ``seek``. ``halt`` is final and unreachable.
    """
    t = {
        ("seek", "0"): ("seek", "0", "R"),
        ("seek", "1"): ("seek", "1", "R"),
        ("seek", "_"): ("carry", "_", "L"),
        ("carry", "1"): ("carry", "0", "L"),
        ("carry", "0"): ("seek", "1", "R"),
        ("carry", "_"): ("seek", "1", "R"),
    }
    return TuringMachineSpec(frozenset({"seek", "carry", "halt"}), frozenset("01"), frozenset("01_"), t,
                             "seek", "_", frozenset({"halt"}))


def encode(spec: TuringMachineSpec, config: TMConfiguration) -> MarkovState:
    support = {i: (NO_HEAD, a) for i, a in config.tape if a != spec.blank}
    tape = dict(config.tape)
    support[config.head] = (config.state, tape.get(config.head, spec.blank))
    return MarkovState(support, MARKOV_BLANK)


def find_head(omega: MarkovState):
    heads = [(i, v) for i, v in omega.items() if v[0] is not NO_HEAD]
    if len(heads) != 1:
        raise ValueError(f"expected exactly one head cell, found {len(heads)}")
    return heads[0]


def decode(spec: TuringMachineSpec, omega: MarkovState) -> TMConfiguration:
    h, (q, _) = find_head(omega)
    tape = {i: v[1] for i, v in omega.items()}
    return TMConfiguration.make(q, h, tape, spec.blank)


def markov_step(spec: TuringMachineSpec, omega: MarkovState) -> MarkovState:
    """One machine step written as a rewrite of at most two cells.

    Final states map to themselves.
    """
    h, (q, a) = find_head(omega)
    if q in spec.final:
        return omega
    if (q, a) not in spec.transitions:
        raise MachineHalted(q, a, h)
    q2, a2, d = spec.transitions[(q, a)]
    nb = h + OFFSET[d]
    target = omega[nb]
    under = spec.blank if target is MARKOV_BLANK else target[1]
    # a written blank is stored as the Markov blank so encodings stay canonical
    written = MARKOV_BLANK if a2 == spec.blank else (NO_HEAD, a2)
    new = omega.updated({h: written, nb: (q2, under)})
    return new


def tm_to_markov(spec: TuringMachineSpec, tape, head: int = 0, state: Optional[str] = None):
    """Initial Markov state for ``tape`` and the matching transition function.

    ``tape`` is a string laid out from position 0 or a ``{position: symbol}``
    mapping.
    """
    if isinstance(tape, str):
        tape = dict(enumerate(tape))
    for a in tape.values():
        if a not in spec.tape_alphabet:
            raise ValueError(f"tape symbol {a!r} not in the tape alphabet")
    config = TMConfiguration.make(state or spec.start, head, tape, spec.blank)
    return encode(spec, config), (lambda omega: markov_step(spec, omega))


def direct_step(spec: TuringMachineSpec, config: TMConfiguration) -> TMConfiguration:
    """Conventional tape-and-head step, kept separate from the Markov encoding."""
    if config.state in spec.final:
        return config
    tape = dict(config.tape)
    a = tape.get(config.head, spec.blank)
    if (config.state, a) not in spec.transitions:
        raise MachineHalted(config.state, a, config.head)
    q2, a2, d = spec.transitions[(config.state, a)]
    tape[config.head] = a2
    return TMConfiguration.make(q2, config.head + OFFSET[d], tape, spec.blank)


def tape_string(config: TMConfiguration, blank: str = "_") -> str:
    if not config.tape:
        return ""
    lo = min(i for i, _ in config.tape)
    hi = max(i for i, _ in config.tape)
    tape = dict(config.tape)
    return "".join(tape.get(i, blank) for i in range(lo, hi + 1))


@dataclass
class TMEquivalenceReport:
    steps: int
    passed: bool
    max_changed: int
    mismatch_step: Optional[int] = None
    detail: str = ""

    def report(self) -> str:
        status = "PASS" if self.passed else f"FAIL at step {self.mismatch_step}: {self.detail}"
        return f"tm equivalence over {self.steps} steps (max cells changed per step {self.max_changed}): {status}"


def compare_with_direct(spec: TuringMachineSpec, tape, steps: int, head: int = 0) -> TMEquivalenceReport:
    omega, step = tm_to_markov(spec, tape, head)
    config = decode(spec, omega)
    max_changed = 0
    for t in range(1, steps + 1):
        try:
            nxt = step(omega)
        except MachineHalted as exc:
            try:
                direct_step(spec, config)
            except MachineHalted:
                return TMEquivalenceReport(t - 1, True, max_changed, detail=str(exc))
            return TMEquivalenceReport(t, False, max_changed, t, f"encoded machine halted: {exc}")
        changed = sum(1 for i in set(omega) | set(nxt) if omega[i] != nxt[i])
        max_changed = max(max_changed, changed)
        config = direct_step(spec, config)
        omega = nxt
        if changed > 2:
            return TMEquivalenceReport(t, False, max_changed, t, f"{changed} cells changed")
        got = decode(spec, omega)
        if got != config:
            return TMEquivalenceReport(t, False, max_changed, t, f"decoded {got} != direct {config}")
    return TMEquivalenceReport(steps, True, max_changed)
