"""Succinct population protocols: builders, a k-way to 2-way compiler,
exact verification by terminal-SCC analysis, and seeded fair simulation."""

from __future__ import annotations

from .core import (Configuration, DisabledTransitionError, EmptyPopulationError,
                   InvalidInputError, MalformedTransitionError, Multiset, Protocol,
                   ProtocolError, Transition, consensus_output, enabled, fire,
                   initial_configuration)
from .analysis import (ExplorationLimitError, ReachabilityGraph, VerificationReport,
                       check_1aware, coverable, decide_output, explore, verify_predicate)
from .constructions import (LinearSystemSpec, flock_binary, flock_standard, linear_inequality,
                            linear_system, majority_leaders, rep)
from .compilers import (SemigroupPresentation, check_simulation, from_semigroup, pad,
                        simulation_lemma_check, to_2way)
from .sim import estimate, run, step_random

__version__ = "0.1.0"

__all__ = [
    "Configuration", "DisabledTransitionError", "EmptyPopulationError", "InvalidInputError",
    "MalformedTransitionError", "Multiset", "Protocol", "ProtocolError", "Transition",
    "consensus_output", "enabled", "fire", "initial_configuration",
    "ExplorationLimitError", "ReachabilityGraph", "VerificationReport", "check_1aware",
    "coverable", "decide_output", "explore", "verify_predicate",
    "LinearSystemSpec", "flock_binary", "flock_standard", "linear_inequality",
    "linear_system", "majority_leaders", "rep",
    "SemigroupPresentation", "check_simulation", "from_semigroup", "pad",
    "simulation_lemma_check", "to_2way",
    "estimate", "run", "step_random",
]
