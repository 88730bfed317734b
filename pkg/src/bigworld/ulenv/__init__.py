from .automaton import EmbeddedAutomatonSpec, run_embedded, verify_pomdp_equivalence
from .life import LIFE, life_step
from .markov import LocalRule, MarkovState, boundary, restrict, verify_locality
from .turing import TuringMachineSpec, tm_to_markov

__all__ = [
    "EmbeddedAutomatonSpec",
    "run_embedded",
    "verify_pomdp_equivalence",
    "LIFE",
    "life_step",
    "LocalRule",
    "MarkovState",
    "boundary",
    "restrict",
    "verify_locality",
    "TuringMachineSpec",
    "tm_to_markov",
]
