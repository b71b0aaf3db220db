"""Cascaded CES production networks.

Triangulate an input-output incidence matrix into a stream order, calibrate
per-sector cascaded CES technologies that restore two observed equilibria,
solve prices under productivity shocks and compare network structures.
"""

__version__ = "0.1.0"

from .cces import (
    NestSpec,
    SectorCalibration,
    SectorObservation,
    SectorTechnology,
    calibrate_lambdas,
    calibrate_sector,
    calibrate_theta,
    cost_shares,
    nest_cost,
    tornqvist,
    unit_cost,
)
from .equilibrium import (
    Economy,
    EquilibriumState,
    coefficients,
    current_state,
    reference_state,
    solve_equilibrium,
    verify_replication,
)
from .errors import CCESError
from .io_data import IncidenceMatrix, LinkedTables, TwoStateData, incidence, load_linked_tables, merge_states, to_two_state
from .netanalysis import distance_change_histogram, distance_matrix, hierarchical_cluster, net_multipliers
from .propagation import ShockScenario, WelfareReport, leontief_baseline, primary_redistribution_profile, welfare
from .synthetic import GeneratorConfig, generate_economy, perturb
from .triangulate import StreamOrder, brute_force_order, linearity, stream_order

__all__ = [name for name in dir() if not name.startswith("_")]
