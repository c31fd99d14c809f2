#!/usr/bin/env python3
"""Cross-method study over one feeder file.

Solves power flow with both native solvers, prints per-bus voltage
magnitudes, and evaluates the converged operating point against each
exported formulation: the rectangular power-voltage equalities and the
lifted branch-flow cone set. A compact way to inspect agreement and
containment margins on a new case before trusting it in tests.
"""

import argparse
import pathlib
import sys

import numpy as np

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parent.parent / "src"))

from feederflow.dss import parse_file
from feederflow.formulations.acr import build_opf_acr, map_solution_to_acr
from feederflow.formulations.common import FormulationError
from feederflow.formulations.socbfm import build_opf_socbfm, map_solution_to_socbfm
from feederflow.mathir import evaluate_residuals
from feederflow.network import from_dss
from feederflow.pf import compare_delta, power_mismatch, solve_bfs, solve_newton

FIXTURES = pathlib.Path(__file__).resolve().parent.parent / "fixtures"


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("file", nargs="?", default=str(FIXTURES / "four_bus.dss"))
    ap.add_argument("--sbase", type=float, default=1.0e6)
    args = ap.parse_args()

    net = from_dss(parse_file(args.file), sbase=args.sbase)
    print(f"{args.file}")
    print(
        f"  {len(net.terminal_buses())} buses, {len(net.branches)} branches, "
        f"{len(net.transformers)} transformers, {len(net.loads)} loads"
    )

    newton = solve_newton(net)
    print(f"  newton: converged={newton.converged} iters={newton.iterations} "
          f"residual={newton.max_residual:.2e} mismatch={power_mismatch(net, newton):.2e}")
    if not newton.converged:
        print(f"  message: {newton.message}")
        return 1

    try:
        bfs = solve_bfs(net)
        floating = {b.id for b in net.buses.values() if b.is_internal}
        delta = compare_delta(newton, bfs, floating_buses=floating)
        print(f"  sweep:  converged={bfs.converged} iters={bfs.iterations} "
              f"delta vs newton={delta:.2e}")
    except FormulationError as exc:
        print(f"  sweep:  skipped ({exc})")

    print("  voltage magnitudes (pu):")
    for bus in sorted(net.terminal_buses(), key=lambda b: b.id):
        mags = " ".join(f"{p}:{abs(newton.voltages[bus.id][p]):.5f}" for p in bus.phases)
        print(f"    {bus.id:12s} {mags}")

    point = map_solution_to_acr(net, newton)
    rep = evaluate_residuals(build_opf_acr(net), point)
    print(f"  rectangular form residual at solution: {rep.max_violation:.2e}")

    try:
        soc = build_opf_socbfm(net)
        rep = evaluate_residuals(soc, map_solution_to_socbfm(net, newton))
        print(f"  branch-flow lift residual at solution: {rep.max_violation:.2e}")
    except FormulationError as exc:
        print(f"  branch-flow lift skipped ({exc})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
