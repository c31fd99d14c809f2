"""Native power-flow solution: Newton-Raphson on the current-voltage
equations, a backward/forward sweep oracle, and solution comparison."""
from .solution import PfSolution, compare_delta, delta_by_bus, load_solution_voltages, power_mismatch
from .newton import NewtonOptions, solve_newton
from .bfs import BfsOptions, solve_bfs

__all__ = [
    "PfSolution",
    "compare_delta",
    "delta_by_bus",
    "load_solution_voltages",
    "power_mismatch",
    "NewtonOptions",
    "solve_newton",
    "BfsOptions",
    "solve_bfs",
]
