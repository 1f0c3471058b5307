"""igpfix: repair of intra-AS link weights under mandated path preferences.

Synthesizes integer IGP link weights that realize mandated (e.g. MED-derived)
path preferences, minimizing weight churn and keeping the traffic-engineering
cost within an operator tolerance. Includes a protocol-dynamics simulator as
an oscillation oracle and a Waxman random-topology benchmark generator.
"""

__version__ = "0.1.0"

from .netmodel import (
    DemandMatrix,
    NetworkInstance,
    ValidationError,
    WaxmanParams,
    generate_waxman,
    load_demands,
    load_instance,
)
from .bgp_prefs import ExternalRoute, MandatedPreferences, close_suffixes, derive_med_preferences
from .repair import RepairConfig, RepairSolution, build_system, h_cost, solve_min_change, verify_solution
from .te import JointConfig, TECostModel, solve_flow, solve_joint_unequal, te_cost

__all__ = [
    "DemandMatrix",
    "ExternalRoute",
    "JointConfig",
    "MandatedPreferences",
    "NetworkInstance",
    "RepairConfig",
    "RepairSolution",
    "TECostModel",
    "ValidationError",
    "WaxmanParams",
    "build_system",
    "close_suffixes",
    "derive_med_preferences",
    "generate_waxman",
    "h_cost",
    "load_demands",
    "load_instance",
    "solve_flow",
    "solve_joint_unequal",
    "solve_min_change",
    "te_cost",
    "verify_solution",
]
