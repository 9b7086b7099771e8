"""Compositional open Markov processes and open reaction networks."""
from .errors import (
    DetailedBalanceError,
    DomainError,
    InterfaceMismatchError,
    NonlinearFieldError,
    NotSteadyError,
    NumericalError,
    OpenNetsError,
    UnstableStepError,
)
from .finset import (
    Cospan,
    FinMap,
    FinSet,
    PushoutResult,
    compose_cospans,
    pullback,
    pushforward,
    pushout,
    tensor_cospans,
)
from .linrel import LinRel, Subspace, compose_rel, dagger, direct_sum, equal_rel
from .markov import (
    Edge,
    Hamiltonian,
    MarkovProcess,
    affinity,
    build_hamiltonian,
    check_detailed_balance,
    check_kolmogorov,
    entropy_production,
    evolve,
    flow,
    kernel_steady_states,
    matrix_tree_steady_state,
)
from .open_markov import (
    OpenDetailedBalanced,
    OpenMarkov,
    boundary_flows,
    compose_open,
    compose_open_db,
    open_master_step,
    solve_open_master_fixed_boundary,
    tensor_open,
)
from .behavior_markov import Circuit, alpha, blackbox_circuit, blackbox_markov, check_naturality, to_circuit
from .reaction import PolyVectorField, ReactionNetwork, Transition, mass_action_field, markov_as_reaction
from .open_reaction import OpenDynam, OpenReactionNetwork, compose_dynam, compose_open_rx, graybox, tensor_open_rx
from .behavior_rx import BehaviorOracle, BoundaryTuple, check_functoriality_rx, linear_behavior_bridge

__version__ = "0.1.0"
