"""Backward/forward sweep solver: agreement with Newton across the radial
roster, topology guards, and the power-balance check."""

import pytest

from feederflow.formulations.common import FormulationError
from feederflow.pf import compare_delta, power_mismatch
from feederflow.pf.bfs import BfsOptions, solve_bfs

from conftest import RADIAL_FIXTURES, load_network, newton_solution


@pytest.mark.parametrize("name", RADIAL_FIXTURES)
def test_agrees_with_newton(name):
    net = load_network(name)
    bfs = solve_bfs(net)
    assert bfs.converged, f"{name}: {bfs.message}"
    newton = newton_solution(name)
    floating = {b.id for b in net.buses.values() if b.is_internal}
    delta = compare_delta(newton, bfs, floating_buses=floating)
    assert delta <= 1e-8, f"{name}: delta {delta:.3e}"


@pytest.mark.parametrize("name", RADIAL_FIXTURES)
def test_power_balance_closes(name):
    net = load_network(name)
    sol = solve_bfs(net)
    assert power_mismatch(net, sol) <= 1e-9


def test_meshed_topology_rejected():
    with pytest.raises(FormulationError, match="radial required"):
        solve_bfs(load_network("meshed"))


def test_zero_load_needs_one_sweep():
    sol = solve_bfs(load_network("zero_load"))
    assert sol.converged
    assert sol.iterations <= 2
    for phasors in sol.voltages.values():
        for u in phasors.values():
            assert abs(abs(u) - 1.0) < 1e-12


def test_method_label():
    sol = solve_bfs(load_network("two_bus"))
    assert sol.method == "bfs"


def test_iteration_budget_respected():
    sol = solve_bfs(load_network("four_bus"), BfsOptions(max_iterations=1))
    # one sweep of a loaded feeder cannot hit 1e-10
    assert not sol.converged
    assert sol.message
