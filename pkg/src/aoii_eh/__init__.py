"""AoII-optimal sampling and transmission for an energy-harvesting status update link."""

from aoii_eh.model import Action, MdpState, ModelParams, feasible_actions, g, state_index
from aoii_eh.belief import BeliefVector, belief_from_aoi, belief_update, truncation_gap
from aoii_eh.mdp import MdpKernel, Objective, PolicyTable, build_kernel, expected_aoii_cost
from aoii_eh.solver import (
    SolveResult,
    SolverDidNotConverge,
    enumerate_policies_oracle,
    evaluate_policy_exact,
    rvi_solve,
)
from aoii_eh.chain_analysis import decompose, induce_chain, is_communicating
from aoii_eh.simulator import SimMetrics, SimulatorState, run, step

__version__ = "0.1.0"

__all__ = [
    "Action",
    "BeliefVector",
    "MdpKernel",
    "MdpState",
    "ModelParams",
    "Objective",
    "PolicyTable",
    "SimMetrics",
    "SimulatorState",
    "SolveResult",
    "SolverDidNotConverge",
    "belief_from_aoi",
    "belief_update",
    "build_kernel",
    "decompose",
    "enumerate_policies_oracle",
    "evaluate_policy_exact",
    "expected_aoii_cost",
    "feasible_actions",
    "g",
    "induce_chain",
    "is_communicating",
    "rvi_solve",
    "run",
    "state_index",
    "step",
    "truncation_gap",
]
