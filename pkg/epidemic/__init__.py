"""
SIR epidemic core: domain types and deterministic simulation
"""

from .state import InfectionMode, EpidemicParams, CompartmentTrajectory, IncidenceSeries
from .simulator import simulate, simulate_from, incidence_of, integrate_batch, template_total

__all__ = [
    'InfectionMode',
    'EpidemicParams',
    'CompartmentTrajectory',
    'IncidenceSeries',
    'simulate',
    'simulate_from',
    'incidence_of',
    'integrate_batch',
    'template_total',
]
