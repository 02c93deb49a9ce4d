"""
Resilient multi-dimensional consensus and distributed optimization for
networked agents facing Byzantine neighbours and DoS edge blocking.
"""

from .analysis import HullDistance, StochasticMatrix, consequent_indices, diameter, is_sarymsakov, validity
from .attacks import AdversarySpec, DoSSchedule, ResidualSpec, adversary_emit, dos_duration_ok, is_blocked
from .geometry import KernelEmptyError, PointSet, auxiliary_point, hull_membership, safe_kernel_point
from .graph import Digraph, check_min_indegree, check_r_robust, check_rs_robust, in_neighbors
from .optimization import CostFunction, StepSchedule, check_redundancy, grid_minimizer, subgradient
from .protocol import HOLD_LAST, ZERO_SUBSTITUTE, AgentState, collect_states, consensus_input, optimization_input
from .scenario import Scenario, ScenarioError, load_scenario, validation_report
from .simulator import SimulationError, SimulationTrace, compare_policies, run

__version__ = "0.1.0"

__all__ = [
    "AdversarySpec", "AgentState", "CostFunction", "Digraph", "DoSSchedule", "HOLD_LAST", "HullDistance",
    "KernelEmptyError", "PointSet", "ResidualSpec", "Scenario", "ScenarioError", "SimulationError",
    "SimulationTrace", "StepSchedule", "StochasticMatrix", "ZERO_SUBSTITUTE", "adversary_emit",
    "auxiliary_point", "check_min_indegree", "check_r_robust", "check_redundancy", "check_rs_robust",
    "collect_states", "compare_policies", "consensus_input", "consequent_indices", "diameter",
    "dos_duration_ok", "grid_minimizer", "hull_membership", "in_neighbors", "is_blocked", "is_sarymsakov",
    "load_scenario", "optimization_input", "run", "safe_kernel_point", "subgradient", "validation_report",
    "validity",
]
