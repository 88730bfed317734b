"""Finitely supported Markov states and uniformly local transition rules."""
from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass
from typing import Any, Callable, Hashable, Iterable, Optional

import numpy as np


class MarkovState(Mapping):
    """Mapping from index to symbol where unlisted indices hold ``blank``.

    Only non-blank symbols are stored, so ``len(state)`` is the number of
    non-blank cells. Lookups of unlisted indices return the blank.
    """

    __slots__ = ("_support", "blank")

    def __init__(self, support: Optional[Mapping] = None, blank: Any = 0):
        self.blank = blank
        self._support = {} if support is None else {k: v for k, v in support.items() if v != blank}

    @classmethod
    def from_cells(cls, cells: Iterable[Hashable], symbol: Any = 1, blank: Any = 0) -> "MarkovState":
        return cls({c: symbol for c in cells}, blank)

    def __getitem__(self, index):
        return self._support.get(index, self.blank)

    def __iter__(self):
        return iter(self._support)

    def __len__(self):
        return len(self._support)

    def __contains__(self, index):
        return index in self._support

    def __eq__(self, other):
        if isinstance(other, MarkovState):
            return self.blank == other.blank and self._support == other._support
        return NotImplemented

    def __hash__(self):
        return hash((self.blank, frozenset(self._support.items())))

    def __repr__(self):
        return f"MarkovState({self._support!r}, blank={self.blank!r})"

    @property
    def support(self) -> dict:
        return dict(self._support)

    def cells(self) -> frozenset:
        return frozenset(self._support)

    def updated(self, changes: Mapping) -> "MarkovState":
        new = dict(self._support)
        for k, v in changes.items():
            if v == self.blank:
                new.pop(k, None)
            else:
                new[k] = v
        out = MarkovState(blank=self.blank)
        out._support = new
        return out


def shift(index, offset):
    if isinstance(index, tuple):
        return tuple(i + o for i, o in zip(index, offset))
    return index + offset


@dataclass(frozen=True)
class LocalRule:
    """One transition applied identically at every index.

    ``transition(cell_value, neighbour_values)`` receives the neighbour
    values in ``offsets`` order. The blank must be quiescent: a blank cell
    with an all-blank neighbourhood stays blank, which keeps supports finite.
    """

    offsets: tuple
    transition: Callable[[Any, tuple], Any]
    alphabet: tuple = (0, 1)
    blank: Any = 0
    name: str = "rule"
    # optional vectorised step on a batch of dense 2-d grids of alphabet
    # indices, shape (n, h, w); edges may wrap
    batch_step: Optional[Callable] = None

    def __post_init__(self):
        quiet = self.transition(self.blank, (self.blank,) * len(self.offsets))
        if quiet != self.blank:
            raise ValueError(f"{self.name}: blank is not quiescent")

    def with_offsets(self, offsets) -> "LocalRule":
        return LocalRule(tuple(offsets), self.transition, self.alphabet, self.blank, self.name)


def uniform_step(state: MarkovState, rule: LocalRule) -> MarkovState:
    """Apply ``rule`` at every index that could become or stay non-blank."""
    candidates = set(state)
    for idx in state:
        for off in rule.offsets:
            candidates.add(shift(idx, tuple(-o for o in off) if isinstance(off, tuple) else -off))
    out = {}
    for c in candidates:
        v = rule.transition(state[c], tuple(state[shift(c, off)] for off in rule.offsets))
        if v != rule.blank:
            out[c] = v
    return MarkovState(out, state.blank)


def iterate(state: MarkovState, rule: LocalRule, k: int, step: Optional[Callable] = None) -> MarkovState:
    step = step or (lambda s: uniform_step(s, rule))
    for _ in range(k):
        state = step(state)
    return state


def restrict(state: Mapping, F: Iterable) -> dict:
    """The substate on ``F``, blanks included."""
    return {i: state[i] for i in F}


def complement(state: MarkovState, F: Iterable) -> MarkovState:
    F = set(F)
    return MarkovState({k: v for k, v in state.support.items() if k not in F}, state.blank)


def merge(substate: Mapping, rest: MarkovState) -> MarkovState:
    """Inverse of :func:`restrict` plus :func:`complement`."""
    return rest.updated(substate)


def dilate(F: Iterable, k: int, offsets) -> set:
    cells = set(F)
    frontier = set(cells)
    for _ in range(k):
        new = {shift(c, off) for c in frontier for off in offsets} - cells
        cells |= new
        frontier = new
    return cells


def boundary(F: Iterable, k: int, rule: LocalRule) -> set:
    """Cells outside ``F`` read within ``k`` transitions when computing ``F``.

    This is the collective boundary of ``F`` grown ``k`` times, minus ``F``.
    """
    if k < 0:
        raise ValueError(f"k must be >= 0, got {k}")
    F = set(F)
    return dilate(F, k, rule.offsets) - F


@dataclass
class LocalityVerdict:
    passed: bool
    trials: int
    F: frozenset
    k: int
    boundary_size: int
    counterexample: Optional[tuple] = None  # (state_a, state_b, result_a|F, result_b|F)

    def __bool__(self):
        return self.passed

    def report(self) -> str:
        head = f"locality k={self.k} |F|={len(self.F)} |boundary|={self.boundary_size} trials={self.trials}"
        if self.passed:
            return head + ": PASS"
        a, b, ra, rb = self.counterexample
        diff = sorted(i for i in ra if ra[i] != rb[i])
        return (head + f": FAIL at cells {diff}\n  state A: {sorted(a.support.items())}\n"
                f"  state B: {sorted(b.support.items())}")


def verify_locality(rule: LocalRule, F: Iterable, k: int, trials: int = 10000, seed=0,
                    claimed_offsets=None, margin: int = 2, step: Optional[Callable] = None) -> LocalityVerdict:
    """Randomised check that ``F`` and its ``k``-horizon boundary fix ``F`` after ``k`` steps.

    Pairs of states agree on ``F`` plus the boundary and differ arbitrarily
    on a surrounding ring. ``claimed_offsets`` replaces the rule's
    neighbourhood when computing the boundary, to test an undersized one.
    With ``k = 0`` the empty boundary is checked against one transition.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    F = frozenset(F)
    claimed = rule if claimed_offsets is None else rule.with_offsets(claimed_offsets)
    B = boundary(F, k, claimed)
    inside = sorted(F | B)
    n_steps = max(k, 1)
    region = dilate(F | B, n_steps + margin, rule.offsets)
    outside = sorted(region - set(inside))
    rng = np.random.default_rng(seed)
    alphabet = list(rule.alphabet)
    Fs = sorted(F)
    # all randomness drawn up front so both code paths see the same states
    shared_idx = rng.integers(len(alphabet), size=(trials, len(inside)))
    out_idx = rng.integers(len(alphabet), size=(trials, 2, len(outside)))

    def state(t, j):
        cells = {c: alphabet[i] for c, i in zip(outside, out_idx[t, j])}
        cells.update({c: alphabet[i] for c, i in zip(inside, shared_idx[t])})
        return MarkovState(cells, rule.blank)

    planar = all(isinstance(c, tuple) and len(c) == 2 for c in region)
    if rule.batch_step is not None and step is None and planar:
        bad = _batched_mismatch(rule, inside, outside, Fs, shared_idx, out_idx, n_steps, region)
    else:
        bad = None
        for t in range(trials):
            a, b = state(t, 0), state(t, 1)
            if restrict(iterate(a, rule, n_steps, step), Fs) != restrict(iterate(b, rule, n_steps, step), Fs):
                bad = t
                break
    if bad is None:
        return LocalityVerdict(True, trials, F, k, len(B))
    a, b = state(bad, 0), state(bad, 1)
    ra = restrict(iterate(a, rule, n_steps, step), Fs)
    rb = restrict(iterate(b, rule, n_steps, step), Fs)
    return LocalityVerdict(False, bad + 1, F, k, len(B), (a, b, ra, rb))


def _batched_mismatch(rule, inside, outside, Fs, shared_idx, out_idx, n_steps, region):
    """Index of the first trial whose two states disagree on F, using dense grids."""
    xs = [c[0] for c in region]
    ys = [c[1] for c in region]
    pad = n_steps + 1
    x0, y0 = min(xs) - pad, min(ys) - pad
    h, w = max(xs) - x0 + pad + 1, max(ys) - y0 + pad + 1
    n = shared_idx.shape[0]
    blank_idx = list(rule.alphabet).index(rule.blank)
    grids = np.full((2, n, h, w), blank_idx, dtype=np.int8)
    ix = np.array([c[0] - x0 for c in inside], dtype=int)
    iy = np.array([c[1] - y0 for c in inside], dtype=int)
    ox = np.array([c[0] - x0 for c in outside], dtype=int)
    oy = np.array([c[1] - y0 for c in outside], dtype=int)
    for j in range(2):
        grids[j][:, ix, iy] = shared_idx
        if len(outside):
            grids[j][:, ox, oy] = out_idx[:, j, :]
    a, b = grids[0], grids[1]
    for _ in range(n_steps):
        a, b = rule.batch_step(a), rule.batch_step(b)
    fx = np.array([c[0] - x0 for c in Fs], dtype=int)
    fy = np.array([c[1] - y0 for c in Fs], dtype=int)
    diff = np.any(a[:, fx, fy] != b[:, fx, fy], axis=1)
    hits = np.flatnonzero(diff)
    return int(hits[0]) if hits.size else None
