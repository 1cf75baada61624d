"""Discrete-time cellular network simulator with AULB/IULB load balancing."""

from .core import (
    ChannelState,
    LBParameters,
    NetworkState,
    SimParams,
    UserEquipment,
    apply_aulb,
    apply_iulb,
    compute_link_rate,
    deliver,
    generate_traffic,
    init_state,
    iulb_probabilities,
    link_rates,
    move_ues,
    step_sim,
    transition_modes,
)
from .scenario import BUILTIN_SCENARIOS, TrafficScenario, load_scenario, parse_scenario
from .topology import Carrier, NetworkTopology, build_topology

__all__ = [
    "BUILTIN_SCENARIOS", "Carrier", "ChannelState", "LBParameters", "NetworkState",
    "NetworkTopology", "SimParams", "TrafficScenario", "UserEquipment", "apply_aulb",
    "apply_iulb", "build_topology", "compute_link_rate", "deliver", "generate_traffic",
    "init_state", "iulb_probabilities", "link_rates", "load_scenario", "move_ues",
    "parse_scenario", "step_sim", "transition_modes",
]
