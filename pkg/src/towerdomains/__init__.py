"""Exact arithmetic in two-step multiquadratic towers, unramified certificates,
explicit fundamental domains, and lattice/covering-radius utilities."""

from .errors import (
    BudgetExhaustedError,
    PrecisionError,
    TowerError,
    UndecidableError,
    ValidationError,
)
from .field import FieldElement, TowerDescriptor, parse_element
from .lattice import LatticeInstance, closest_vector, covering_radius_small, lll_reduce, shortest_vector_l2
from .unramified import build_tower, check_unramified_witness, search_witness, unit_search
from .domain import bound_report, build_domain, domain_radii, reduce_point
from .voronoi import FieldSpec, cyclo_log_root_disc, cyclo_scan, field_report

__version__ = "0.1.0"

__all__ = [
    "BudgetExhaustedError", "FieldElement", "FieldSpec", "LatticeInstance", "PrecisionError", "TowerDescriptor",
    "TowerError", "UndecidableError", "ValidationError", "bound_report", "build_domain", "build_tower",
    "check_unramified_witness", "closest_vector", "covering_radius_small", "cyclo_log_root_disc", "cyclo_scan",
    "domain_radii", "field_report", "lll_reduce", "parse_element", "reduce_point", "search_witness",
    "shortest_vector_l2", "unit_search",
]
