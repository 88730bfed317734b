"""Automata embedded in a finite local environment, simulated two ways.

The joint simulation treats the automaton's internal-state cell and output
cell as part of one Markov state whose transition updates every region at
once. The interaction simulation is the usual observe, act, update loop of a
stateful policy. When the automaton reads nothing but its input cells the
two produce identical behaviour traces.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Any, Callable, Optional, Sequence

import numpy as np

from .markov import MarkovState

THETA = ("agent", "theta")
OUTPUT = ("agent", "y")


def _as_fn(table_or_fn) -> Callable:
    if callable(table_or_fn):
        return table_or_fn
    table = dict(table_or_fn)
    return lambda x, theta: table[(x, theta)]


@dataclass(frozen=True)
class EmbeddedAutomatonSpec:
    """Input cells ``X``, finite spaces, update ``u(x, theta)`` and output ``pi(x, theta)``.

    ``x`` is the tuple of values on the cells the automaton reads, which is
    ``input_cells`` unless ``reads`` says otherwise. ``update`` and ``output``
    may be callables or ``{(x, theta): value}`` tables.
    """

    input_cells: tuple
    input_space: tuple
    output_space: tuple
    state_space: tuple
    update: Any
    output: Any
    theta0: Any
    y0: Any
    reads: Optional[tuple] = None

    @property
    def read_cells(self) -> tuple:
        return tuple(self.input_cells if self.reads is None else self.reads)

    def check(self):
        errors = []
        if self.theta0 not in self.state_space:
            errors.append(f"initial state {self.theta0!r} not in the state space")
        if self.y0 not in self.output_space:
            errors.append(f"initial output {self.y0!r} not in the output space")
        if THETA in self.input_cells or OUTPUT in self.input_cells:
            errors.append("input cells overlap the automaton's own cells")
        return errors


@dataclass
class EmbeddedRun:
    behaviours: list  # (x, y) per step, x over the declared input cells
    joint_states: list


def _check_spaces(automaton: EmbeddedAutomatonSpec, env_state: MarkovState):
    errors = automaton.check()
    for c in automaton.input_cells:
        v = env_state[c]
        if v not in automaton.input_space:
            errors.append(f"input cell {c!r} holds {v!r}, outside the input space")
    if errors:
        raise ValueError("; ".join(errors))


def _env_part(omega: MarkovState) -> MarkovState:
    return MarkovState({k: v for k, v in omega.items() if k not in (THETA, OUTPUT)}, omega.blank)


def joint_step(automaton: EmbeddedAutomatonSpec, env_rule: Callable, omega: MarkovState) -> MarkovState:
    """One synchronous transition of the joint environment-plus-automaton state."""
    u, pi = _as_fn(automaton.update), _as_fn(automaton.output)
    view = tuple(omega[c] for c in automaton.read_cells)
    theta = omega[THETA]
    env_next = env_rule(_env_part(omega), omega[OUTPUT])
    changes = dict(env_next.support)
    changes[THETA] = u(view, theta)
    changes[OUTPUT] = pi(view, theta)
    return MarkovState(changes, omega.blank)


def run_embedded(automaton: EmbeddedAutomatonSpec, env_state: MarkovState, env_rule: Callable,
                 steps: int) -> EmbeddedRun:
    """Behaviour ``(x_t, y_t)`` for ``t = 0 .. steps`` of the joint Markov process."""
    _check_spaces(automaton, env_state)
    omega = env_state.updated({THETA: automaton.theta0, OUTPUT: automaton.y0})
    states = [omega]
    for _ in range(steps):
        omega = joint_step(automaton, env_rule, omega)
        states.append(omega)
    behaviours = [(tuple(s[c] for c in automaton.input_cells), s[OUTPUT]) for s in states]
    return EmbeddedRun(behaviours, states)


def run_interaction(automaton: EmbeddedAutomatonSpec, env_state: MarkovState, env_rule: Callable,
                    steps: int) -> list:
    """Observe, act, update. The automaton sees only its declared input cells."""
    _check_spaces(automaton, env_state)
    u, pi = _as_fn(automaton.update), _as_fn(automaton.output)
    declared = set(automaton.input_cells)
    env, theta, y = env_state, automaton.theta0, automaton.y0
    trace = []
    for t in range(steps + 1):
        x = tuple(env[c] for c in automaton.input_cells)
        trace.append((x, y))
        if t == steps:
            break
        # cells outside X are unobservable and read as blank
        view = tuple(env[c] if c in declared else env.blank for c in automaton.read_cells)
        y_next = pi(view, theta)
        theta = u(view, theta)
        env = env_rule(env, y)
        y = y_next
    return trace


@dataclass
class EquivalenceVerdict:
    passed: bool
    steps: int
    first_divergence: Optional[int] = None
    premise_holds: bool = True
    detail: str = ""

    def __bool__(self):
        return self.passed

    def report(self) -> str:
        if self.passed:
            return f"automaton/POMDP equivalence over {self.steps} steps: PASS"
        return f"automaton/POMDP equivalence: FAIL ({self.detail})"


def verify_pomdp_equivalence(automaton: EmbeddedAutomatonSpec, env_state: MarkovState, env_rule: Callable,
                             steps: int) -> EquivalenceVerdict:
    joint = run_embedded(automaton, env_state, env_rule, steps).behaviours
    loop = run_interaction(automaton, env_state, env_rule, steps)
    premise = set(automaton.read_cells) == set(automaton.input_cells)
    for t, (a, b) in enumerate(zip(joint, loop)):
        if a != b:
            return EquivalenceVerdict(False, steps, t, premise,
                                      f"traces diverge at step {t}: joint {a} vs interaction {b}")
    if not premise:
        extra = sorted(set(automaton.read_cells) - set(automaton.input_cells), key=repr)
        return EquivalenceVerdict(False, steps, None, False,
                                  f"automaton reads cells {extra} outside its input space")
    return EquivalenceVerdict(True, steps)


def find_period(states: Sequence) -> Optional[tuple]:
    """``(start, period)`` of the first repeated state, or ``None``."""
    seen = {}
    for t, s in enumerate(states):
        if s in seen:
            return seen[s], t - seen[s]
        seen[s] = t
    return None


# random instances


def random_automaton(rng, input_cells=(0,), alphabet=(0, 1, 2), n_states: int = 3,
                     outputs=(0, 1, 2)) -> EmbeddedAutomatonSpec:
    rng = np.random.default_rng(rng)
    states = tuple(range(n_states))
    xs = list(itertools.product(alphabet, repeat=len(input_cells)))
    u = {(x, s): int(rng.choice(states)) for x in xs for s in states}
    pi = {(x, s): int(rng.choice(outputs)) for x in xs for s in states}
    return EmbeddedAutomatonSpec(tuple(input_cells), tuple(alphabet), tuple(outputs), states, u, pi,
                                 int(rng.choice(states)), int(rng.choice(outputs)))


def random_environment(rng, n_cells: int = 3, alphabet=(0, 1, 2), outputs=(0, 1, 2)):
    """A random finite environment: initial state and a lookup-table rule ``(env, y) -> env'``."""
    rng = np.random.default_rng(rng)
    table = {}

    def rule(env: MarkovState, y):
        key = (tuple(env[i] for i in range(n_cells)), y)
        if key not in table:
            raise KeyError(key)
        return MarkovState(dict(enumerate(table[key])), env.blank)

    for idx in np.ndindex(*([len(alphabet)] * n_cells)):
        env = tuple(alphabet[i] for i in idx)
        for y in outputs:
            table[(env, y)] = tuple(int(a) for a in rng.choice(alphabet, size=n_cells))
    init = MarkovState(dict(enumerate(int(a) for a in rng.choice(alphabet, size=n_cells))), 0)
    return init, rule


def echo_environment(cell=0, blank=0):
    """The input cell takes the value of the previous output."""
    def rule(env: MarkovState, y):
        return env.updated({cell: y})
    return MarkovState({cell: blank}, blank), rule
