"""Damped Newton-Raphson on the current-voltage equation system.

The equality system built by the IVR formulation is compiled into vector
residual and analytic Jacobian callables; Newton iterates with a halving
line search on the residual norm. Singular Jacobians are diagnosed by the
constraint labels with the largest left-null-space weight.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..formulations.ivr import build_pf_ivr, ild_im, ild_re, ig_im, ig_re, is_im, is_re, it_im, it_re, u_im, u_re
from ..formulations.common import NetworkScope
from ..mathir import EQ, LinearCon, MathModel, QuadCon
from ..network.components import Network
from .solution import PfSolution


class CompiledSystem:
    """Vectorized residual and Jacobian of a square equality system."""

    def __init__(self, model: MathModel):
        self.model = model
        self.names = list(model.variables)
        self.index = {n: i for i, n in enumerate(self.names)}
        self.labels: list[str] = []

        rows_l, cols_l, vals_l = [], [], []
        qr, qa, qb, qc = [], [], [], []
        consts = []
        for con in model.constraints:
            if isinstance(con, LinearCon):
                if con.sense != EQ:
                    raise ValueError(f"{con.label}: inequality in a square system")
                i = len(self.labels)
                self.labels.append(con.label)
                consts.append(con.expr.const)
                for v, c in con.expr.coeffs.items():
                    rows_l.append(i)
                    cols_l.append(self.index[v])
                    vals_l.append(c)
            elif isinstance(con, QuadCon):
                if con.sense != EQ:
                    raise ValueError(f"{con.label}: inequality in a square system")
                i = len(self.labels)
                self.labels.append(con.label)
                consts.append(con.expr.const)
                for v, c in con.expr.lin.items():
                    rows_l.append(i)
                    cols_l.append(self.index[v])
                    vals_l.append(c)
                for (a, b), c in con.expr.quad.items():
                    qr.append(i)
                    qa.append(self.index[a])
                    qb.append(self.index[b])
                    qc.append(c)
            else:
                raise ValueError(f"{con.label}: conic constraint in a square system")

        self.n_eq = len(self.labels)
        self.n_var = len(self.names)
        self.const = np.array(consts, dtype=float)
        # constant (linear) part of the Jacobian, built once
        self.jac_const = np.zeros((self.n_eq, self.n_var))
        np.add.at(self.jac_const, (np.array(rows_l, dtype=int), np.array(cols_l, dtype=int)),
                  np.array(vals_l, dtype=float))
        self.qr = np.array(qr, dtype=int)
        self.qa = np.array(qa, dtype=int)
        self.qb = np.array(qb, dtype=int)
        self.qc = np.array(qc, dtype=float)

    def start(self) -> np.ndarray:
        return np.array([self.model.variables[n].start for n in self.names])

    def from_mapping(self, values) -> np.ndarray:
        return np.array([values[n] for n in self.names])

    def to_mapping(self, x: np.ndarray) -> dict[str, float]:
        return {n: float(x[i]) for i, n in enumerate(self.names)}

    def residual(self, x: np.ndarray) -> np.ndarray:
        f = self.jac_const @ x + self.const
        if len(self.qr):
            np.add.at(f, self.qr, self.qc * x[self.qa] * x[self.qb])
        return f

    def jacobian(self, x: np.ndarray) -> np.ndarray:
        j = self.jac_const.copy()
        if len(self.qr):
            np.add.at(j, (self.qr, self.qa), self.qc * x[self.qb])
            np.add.at(j, (self.qr, self.qb), self.qc * x[self.qa])
        return j


@dataclass
class NewtonOptions:
    tolerance: float = 1e-10
    max_iterations: int = 50
    damping: bool = True
    start: str = "flat"  # "flat" or "provided"
    start_values: dict[str, float] | None = None
    floating_shunt: float | None = 1e-8

    def __post_init__(self):
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")


def _singular_report(sys: CompiledSystem, j: np.ndarray) -> str:
    # rows with the largest left-null-space weight form the dependent set
    try:
        _, s, vh = np.linalg.svd(j.T)
        y = vh[-1]
    except np.linalg.LinAlgError:
        return "singular Jacobian (null-space analysis failed)"
    worst = np.argsort(-np.abs(y))[:3]
    parts = ", ".join(f"{sys.labels[i]} (weight {abs(y[i]):.2e})" for i in worst)
    return f"singular Jacobian; dependent constraint rows: {parts}"


def _extract_solution(net: Network, sys: CompiledSystem, x: np.ndarray) -> PfSolution:
    scope = NetworkScope(net)
    ix = sys.index
    volt: dict[str, dict[int, complex]] = {}
    for bus in scope.buses():
        volt[bus.id] = {
            p: complex(x[ix[u_re(bus.id, p)]], x[ix[u_im(bus.id, p)]]) for p in bus.phases
        }
    sol = PfSolution(voltages=volt)
    for br in scope.branches:
        sol.branch_current[br.id] = np.array(
            [complex(x[ix[is_re(br.id, p)]], x[ix[is_im(br.id, p)]]) for p in br.phases]
        )
    for tr in scope.transformers:
        cfr = np.array(
            [complex(x[ix[it_re(tr.id, "fr", p)]], x[ix[it_im(tr.id, "fr", p)]]) for p in tr.phases]
        )
        cto = np.array(
            [complex(x[ix[it_re(tr.id, "to", p)]], x[ix[it_im(tr.id, "to", p)]]) for p in tr.phases]
        )
        sol.transformer_current[tr.id] = (cfr, cto)
    for ld in scope.loads:
        from ..formulations.common import leg_label

        sol.load_current[ld.id] = np.array(
            [
                complex(x[ix[ild_re(ld.id, leg_label(leg))]], x[ix[ild_im(ld.id, leg_label(leg))]])
                for leg in ld.legs()
            ]
        )
    for g in scope.generators:
        sol.generator_current[g.id] = np.array(
            [complex(x[ix[ig_re(g.id, p)]], x[ix[ig_im(g.id, p)]]) for p in g.phases]
        )
    return sol


def solve_newton(net: Network, opts: NewtonOptions | None = None) -> PfSolution:
    """Solve unbalanced power flow by Newton iteration on the IVR equations.

    Never raises for non-convergence: the returned solution carries
    ``converged=False`` plus a diagnostic message. Build errors (no slack,
    unsupported component) do raise.
    """
    opts = opts or NewtonOptions()
    model = build_pf_ivr(net, floating_shunt=opts.floating_shunt)
    sys = CompiledSystem(model)
    if opts.start == "provided":
        if opts.start_values is None:
            raise ValueError("start='provided' needs start_values")
        x = sys.from_mapping(opts.start_values)
    else:
        x = sys.start()

    # variables constrained nonnegative (leg voltage magnitudes): if Newton
    # lands on a negative-magnitude mirror solution, flip and re-run
    nonneg = [sys.index[n] for n, v in model.variables.items() if v.lb == 0.0]

    message = ""
    iterations = 0
    converged = False
    for attempt in range(3):
        f = sys.residual(x)
        fmax = float(np.max(np.abs(f))) if len(f) else 0.0
        for _ in range(opts.max_iterations):
            if fmax <= opts.tolerance:
                break
            j = sys.jacobian(x)
            try:
                step = np.linalg.solve(j, -f)
            except np.linalg.LinAlgError:
                return _finish(net, sys, x, False, iterations, fmax, _singular_report(sys, j))
            lam = 1.0
            while True:
                x_new = x + lam * step
                f_new = sys.residual(x_new)
                fmax_new = float(np.max(np.abs(f_new)))
                if fmax_new < fmax or not opts.damping or lam <= 1.0 / 1024.0:
                    break
                lam *= 0.5
            if fmax_new >= fmax and lam <= 1.0 / 1024.0:
                message = f"stalled at residual {fmax:.3e} (no descent direction)"
                return _finish(net, sys, x, False, iterations, fmax, message)
            x, f, fmax = x_new, f_new, fmax_new
            iterations += 1
        converged = fmax <= opts.tolerance
        if not converged:
            worst = sys.labels[int(np.argmax(np.abs(f)))]
            message = (
                f"no convergence in {opts.max_iterations} iterations; "
                f"residual {fmax:.3e} at {worst}"
            )
            break
        flipped = [i for i in nonneg if x[i] < 0.0]
        if not flipped:
            break
        for i in flipped:
            x[i] = -x[i]

    if converged:
        # pin slack phasors to the exact source specification
        for bus in net.buses.values():
            if bus.bus_type != "slack" or bus.id not in {  # only live slack buses
                b.id for b in NetworkScope(net).buses()
            }:
                continue
            u = bus.slack_voltage()
            for k, p in enumerate(bus.phases):
                x[sys.index[u_re(bus.id, p)]] = u[k].real
                x[sys.index[u_im(bus.id, p)]] = u[k].imag
        f = sys.residual(x)
        fmax = float(np.max(np.abs(f))) if len(f) else 0.0
        converged = fmax <= 10.0 * opts.tolerance

    return _finish(net, sys, x, converged, iterations, fmax, message)


def _finish(
    net: Network,
    sys: CompiledSystem,
    x: np.ndarray,
    converged: bool,
    iterations: int,
    fmax: float,
    message: str,
) -> PfSolution:
    sol = _extract_solution(net, sys, x)
    sol.converged = converged
    sol.iterations = iterations
    sol.max_residual = fmax
    sol.method = "newton"
    sol.message = message
    return sol
