"""Formulation builders: exact power flow in current-voltage and
power-voltage forms, the conic branch-flow relaxation, and the linear
distribution flow approximation."""
from .common import FormulationError, NetworkScope
from .ivr import build_pf_ivr, map_solution_to_ivr
from .acr import build_opf_acr, map_solution_to_acr
from .socbfm import build_opf_socbfm, map_solution_to_socbfm
from .lindistflow import build_opf_lindistflow

__all__ = [
    "FormulationError",
    "NetworkScope",
    "build_pf_ivr",
    "map_solution_to_ivr",
    "build_opf_acr",
    "map_solution_to_acr",
    "build_opf_socbfm",
    "map_solution_to_socbfm",
    "build_opf_lindistflow",
]
