"""Solver-agnostic math programs: variables, affine and quadratic
expressions, conic constraints, and residual evaluation.

Every formulation compiles to a :class:`MathModel`. Exact power flow uses
only equality constraints (linear and quadratic); the conic relaxation adds
second-order cones; the linear approximation is pure LP. Labels follow the
``family:component:phase`` convention so residual reports can be grouped.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping

SCHEMA_MATHMODEL = "feederflow-mathmodel/1"
SCHEMA_SOLUTION = "feederflow-solution/1"

INF = float("inf")


@dataclass
class LinExpr:
    """Affine expression sum(coeffs[v] * x_v) + const."""

    coeffs: dict[str, float] = field(default_factory=dict)
    const: float = 0.0

    @staticmethod
    def term(var: str, coef: float = 1.0) -> "LinExpr":
        return LinExpr({var: float(coef)})

    @staticmethod
    def constant(value: float) -> "LinExpr":
        return LinExpr({}, float(value))

    def copy(self) -> "LinExpr":
        return LinExpr(dict(self.coeffs), self.const)

    def add_term(self, var: str, coef: float) -> "LinExpr":
        if coef != 0.0:
            self.coeffs[var] = self.coeffs.get(var, 0.0) + coef
            if self.coeffs[var] == 0.0:
                del self.coeffs[var]
        return self

    def add(self, other: "LinExpr", scale: float = 1.0) -> "LinExpr":
        for v, c in other.coeffs.items():
            self.add_term(v, scale * c)
        self.const += scale * other.const
        return self

    def scaled(self, scale: float) -> "LinExpr":
        return LinExpr({v: c * scale for v, c in self.coeffs.items()}, self.const * scale)

    def value(self, x: Mapping[str, float]) -> float:
        return self.const + sum(c * x[v] for v, c in self.coeffs.items())

    def is_zero(self) -> bool:
        return not self.coeffs and self.const == 0.0

    def variables(self) -> set[str]:
        return set(self.coeffs)


def _qkey(a: str, b: str) -> tuple[str, str]:
    return (a, b) if a <= b else (b, a)


@dataclass
class QuadExpr:
    """Quadratic expression sum(quad[p,q] * x_p * x_q) + linear part.

    Keys of ``quad`` are sorted pairs; a key (v, v) holds the x_v^2 coefficient.
    """

    quad: dict[tuple[str, str], float] = field(default_factory=dict)
    lin: dict[str, float] = field(default_factory=dict)
    const: float = 0.0

    def copy(self) -> "QuadExpr":
        return QuadExpr(dict(self.quad), dict(self.lin), self.const)

    def add_quad_term(self, a: str, b: str, coef: float) -> "QuadExpr":
        if coef != 0.0:
            k = _qkey(a, b)
            self.quad[k] = self.quad.get(k, 0.0) + coef
            if self.quad[k] == 0.0:
                del self.quad[k]
        return self

    def add_lin_term(self, var: str, coef: float) -> "QuadExpr":
        if coef != 0.0:
            self.lin[var] = self.lin.get(var, 0.0) + coef
            if self.lin[var] == 0.0:
                del self.lin[var]
        return self

    def add_linexpr(self, other: LinExpr, scale: float = 1.0) -> "QuadExpr":
        for v, c in other.coeffs.items():
            self.add_lin_term(v, scale * c)
        self.const += scale * other.const
        return self

    def add(self, other: "QuadExpr", scale: float = 1.0) -> "QuadExpr":
        for (a, b), c in other.quad.items():
            self.add_quad_term(a, b, scale * c)
        for v, c in other.lin.items():
            self.add_lin_term(v, scale * c)
        self.const += scale * other.const
        return self

    def value(self, x: Mapping[str, float]) -> float:
        total = self.const
        for (a, b), c in self.quad.items():
            total += c * x[a] * x[b]
        for v, c in self.lin.items():
            total += c * x[v]
        return total

    def gradient(self, x: Mapping[str, float]) -> dict[str, float]:
        g: dict[str, float] = {}
        for (a, b), c in self.quad.items():
            if a == b:
                g[a] = g.get(a, 0.0) + 2.0 * c * x[a]
            else:
                g[a] = g.get(a, 0.0) + c * x[b]
                g[b] = g.get(b, 0.0) + c * x[a]
        for v, c in self.lin.items():
            g[v] = g.get(v, 0.0) + c
        return g

    def is_linear(self) -> bool:
        return not self.quad

    def as_linexpr(self) -> LinExpr:
        if self.quad:
            raise ValueError("expression has quadratic terms")
        return LinExpr(dict(self.lin), self.const)

    def variables(self) -> set[str]:
        names = set(self.lin)
        for a, b in self.quad:
            names.add(a)
            names.add(b)
        return names


def product(u: LinExpr, v: LinExpr) -> QuadExpr:
    """Product of two affine expressions."""
    out = QuadExpr()
    for a, ca in u.coeffs.items():
        for b, cb in v.coeffs.items():
            out.add_quad_term(a, b, ca * cb)
    if v.const != 0.0:
        for a, ca in u.coeffs.items():
            out.add_lin_term(a, ca * v.const)
    if u.const != 0.0:
        for b, cb in v.coeffs.items():
            out.add_lin_term(b, u.const * cb)
    out.const += u.const * v.const
    return out


EQ = "=="
LE = "<="
GE = ">="


@dataclass
class LinearCon:
    """Affine constraint expr (==|<=|>=) 0."""

    label: str
    expr: LinExpr
    sense: str = EQ


@dataclass
class QuadCon:
    """Quadratic constraint expr (==|<=|>=) 0."""

    label: str
    expr: QuadExpr
    sense: str = EQ


@dataclass
class SocCon:
    """Second-order cone: || [a_1(x), ..., a_k(x)] ||_2 <= bound(x)."""

    label: str
    norm_args: list[LinExpr]
    bound: LinExpr


@dataclass
class RotatedSocCon:
    """Rotated cone: sum_i a_i(x)^2 <= x(x) * y(x), with x >= 0, y >= 0."""

    label: str
    x: LinExpr
    y: LinExpr
    args: list[LinExpr]


Constraint = LinearCon | QuadCon | SocCon | RotatedSocCon


@dataclass
class Variable:
    name: str
    lb: float = -INF
    ub: float = INF
    start: float = 0.0


class MathModel:
    """A math program: variables with bounds, typed constraints, and an
    optional linear or quadratic objective to minimize."""

    def __init__(self, name: str = "model"):
        self.name = name
        self.variables: dict[str, Variable] = {}
        self.constraints: list[Constraint] = []
        self.objective: QuadExpr | None = None
        self.objective_sense = "min"
        self.meta: dict[str, Any] = {}

    # -- building -------------------------------------------------------
    def add_var(
        self, name: str, lb: float = -INF, ub: float = INF, start: float = 0.0
    ) -> str:
        if name in self.variables:
            raise ValueError(f"variable {name!r} already declared")
        if lb > ub:
            raise ValueError(f"variable {name!r}: lb {lb} exceeds ub {ub}")
        self.variables[name] = Variable(name, lb, ub, start)
        return name

    def set_bounds(self, name: str, lb: float | None = None, ub: float | None = None):
        v = self.variables[name]
        if lb is not None:
            v.lb = lb
        if ub is not None:
            v.ub = ub
        if v.lb > v.ub:
            raise ValueError(f"variable {name!r}: lb {v.lb} exceeds ub {v.ub}")

    def add_linear(self, label: str, expr: LinExpr, sense: str = EQ) -> LinearCon:
        self._check(label, expr.variables(), sense)
        con = LinearCon(label, expr, sense)
        self.constraints.append(con)
        return con

    def add_quadratic(self, label: str, expr: QuadExpr, sense: str = EQ) -> Constraint:
        if expr.is_linear():
            return self.add_linear(label, expr.as_linexpr(), sense)
        self._check(label, expr.variables(), sense)
        con = QuadCon(label, expr, sense)
        self.constraints.append(con)
        return con

    def add_soc(self, label: str, norm_args: list[LinExpr], bound: LinExpr) -> SocCon:
        names: set[str] = set(bound.variables())
        for a in norm_args:
            names |= a.variables()
        self._check(label, names, LE)
        con = SocCon(label, [a.copy() for a in norm_args], bound.copy())
        self.constraints.append(con)
        return con

    def add_rotated_soc(
        self, label: str, x: LinExpr, y: LinExpr, args: list[LinExpr]
    ) -> RotatedSocCon:
        names = x.variables() | y.variables()
        for a in args:
            names |= a.variables()
        self._check(label, names, LE)
        con = RotatedSocCon(label, x.copy(), y.copy(), [a.copy() for a in args])
        self.constraints.append(con)
        return con

    def set_objective(self, expr: LinExpr | QuadExpr) -> None:
        if isinstance(expr, LinExpr):
            q = QuadExpr(lin=dict(expr.coeffs), const=expr.const)
        else:
            q = expr.copy()
        self._check("objective", q.variables(), "min")
        self.objective = q

    def _check(self, label: str, names: Iterable[str], sense: str) -> None:
        if sense not in (EQ, LE, GE, "min"):
            raise ValueError(f"{label}: unknown sense {sense!r}")
        for n in names:
            if n not in self.variables:
                raise ValueError(f"{label}: references undeclared variable {n!r}")

    # -- inspection -------------------------------------------------------
    def start_point(self) -> dict[str, float]:
        return {n: v.start for n, v in self.variables.items()}

    def equality_count(self) -> int:
        return sum(
            1
            for c in self.constraints
            if isinstance(c, (LinearCon, QuadCon)) and c.sense == EQ
        )

    def stats(self) -> dict[str, int]:
        kinds = {"linear": 0, "quadratic": 0, "soc": 0, "rotated_soc": 0}
        for c in self.constraints:
            if isinstance(c, LinearCon):
                kinds["linear"] += 1
            elif isinstance(c, QuadCon):
                kinds["quadratic"] += 1
            elif isinstance(c, SocCon):
                kinds["soc"] += 1
            else:
                kinds["rotated_soc"] += 1
        out = {"variables": len(self.variables), "constraints": len(self.constraints)}
        out.update(kinds)
        return out


def rotated_soc_to_soc(con: RotatedSocCon) -> SocCon:
    """Rewrite a rotated cone as a plain second-order cone.

    sum a_i^2 <= x*y with x,y >= 0 holds exactly when
    || [2*a_1, ..., 2*a_k, x - y] || <= x + y; the norm form also implies
    both x and y are nonnegative, so no extra sign constraints are needed.
    """
    args = [a.scaled(2.0) for a in con.args]
    diff = con.x.copy().add(con.y, -1.0)
    args.append(diff)
    bound = con.x.copy().add(con.y, 1.0)
    return SocCon(con.label, args, bound)


def convert_rotated_cones(model: MathModel) -> MathModel:
    """Copy of the model with every rotated cone re-expressed as a
    standard second-order cone."""
    out = MathModel(model.name)
    out.meta = dict(model.meta)
    out.objective_sense = model.objective_sense
    for v in model.variables.values():
        out.add_var(v.name, v.lb, v.ub, v.start)
    for c in model.constraints:
        if isinstance(c, RotatedSocCon):
            out.constraints.append(rotated_soc_to_soc(c))
        else:
            out.constraints.append(c)
    if model.objective is not None:
        out.set_objective(model.objective)
    return out


# -- residual evaluation ------------------------------------------------


def constraint_residual(con: Constraint, x: Mapping[str, float]) -> float:
    """Violation of one constraint at a point. Equalities report the
    absolute residual; inequalities and cones report max(0, violation)."""
    if isinstance(con, LinearCon):
        r = con.expr.value(x)
    elif isinstance(con, QuadCon):
        r = con.expr.value(x)
    elif isinstance(con, SocCon):
        nrm = math.sqrt(sum(a.value(x) ** 2 for a in con.norm_args))
        return max(0.0, nrm - con.bound.value(x))
    else:
        lhs = sum(a.value(x) ** 2 for a in con.args)
        xv, yv = con.x.value(x), con.y.value(x)
        return max(0.0, lhs - xv * yv, -xv, -yv)
    if con.sense == EQ:
        return abs(r)
    if con.sense == LE:
        return max(0.0, r)
    return max(0.0, -r)


def bound_violation(model: MathModel, x: Mapping[str, float]) -> float:
    worst = 0.0
    for n, v in model.variables.items():
        val = x[n]
        worst = max(worst, v.lb - val, val - v.ub)
    return worst


@dataclass
class ResidualReport:
    by_constraint: dict[str, float]
    by_family: dict[str, float]
    max_violation: float
    max_bound_violation: float

    def worst(self, k: int = 5) -> list[tuple[str, float]]:
        return sorted(self.by_constraint.items(), key=lambda kv: -kv[1])[:k]


def evaluate_residuals(model: MathModel, x: Mapping[str, float]) -> ResidualReport:
    """Violations of every constraint at a point, grouped by label family
    (the text before the first ':')."""
    by_con: dict[str, float] = {}
    by_fam: dict[str, float] = {}
    worst = 0.0
    for con in model.constraints:
        r = constraint_residual(con, x)
        by_con[con.label] = r
        fam = con.label.split(":", 1)[0]
        by_fam[fam] = max(by_fam.get(fam, -INF), r)
        worst = max(worst, r)
    return ResidualReport(by_con, by_fam, worst, bound_violation(model, x))


# -- serialization --------------------------------------------------------


def _num_out(v: float):
    if v == INF:
        return "inf"
    if v == -INF:
        return "-inf"
    return v


def _num_in(v) -> float:
    if isinstance(v, str):
        return float(v)
    return float(v)


def _lin_out(e: LinExpr) -> dict:
    return {"coeffs": {k: e.coeffs[k] for k in sorted(e.coeffs)}, "const": e.const}


def _lin_in(d: dict) -> LinExpr:
    return LinExpr({k: float(v) for k, v in d["coeffs"].items()}, float(d["const"]))


def _quad_out(e: QuadExpr) -> dict:
    return {
        "quad": [[a, b, c] for (a, b), c in sorted(e.quad.items())],
        "lin": {k: e.lin[k] for k in sorted(e.lin)},
        "const": e.const,
    }


def _quad_in(d: dict) -> QuadExpr:
    q = QuadExpr(lin={k: float(v) for k, v in d["lin"].items()}, const=float(d["const"]))
    for a, b, c in d["quad"]:
        q.add_quad_term(a, b, float(c))
    return q


def model_to_json_dict(model: MathModel) -> dict:
    cons = []
    for c in model.constraints:
        if isinstance(c, LinearCon):
            cons.append(
                {"type": "linear", "label": c.label, "sense": c.sense, "expr": _lin_out(c.expr)}
            )
        elif isinstance(c, QuadCon):
            cons.append(
                {"type": "quadratic", "label": c.label, "sense": c.sense, "expr": _quad_out(c.expr)}
            )
        elif isinstance(c, SocCon):
            cons.append(
                {
                    "type": "soc",
                    "label": c.label,
                    "norm_args": [_lin_out(a) for a in c.norm_args],
                    "bound": _lin_out(c.bound),
                }
            )
        else:
            cons.append(
                {
                    "type": "rotated_soc",
                    "label": c.label,
                    "x": _lin_out(c.x),
                    "y": _lin_out(c.y),
                    "args": [_lin_out(a) for a in c.args],
                }
            )
    return {
        "schema": SCHEMA_MATHMODEL,
        "name": model.name,
        "meta": model.meta,
        "variables": [
            {"name": v.name, "lb": _num_out(v.lb), "ub": _num_out(v.ub), "start": v.start}
            for v in model.variables.values()
        ],
        "constraints": cons,
        "objective": _quad_out(model.objective) if model.objective is not None else None,
        "objective_sense": model.objective_sense,
    }


def model_from_json_dict(data: dict) -> MathModel:
    if data.get("schema") != SCHEMA_MATHMODEL:
        raise ValueError(f"unexpected schema {data.get('schema')!r}")
    model = MathModel(data.get("name", "model"))
    model.meta = dict(data.get("meta", {}))
    model.objective_sense = data.get("objective_sense", "min")
    for v in data["variables"]:
        model.add_var(v["name"], _num_in(v["lb"]), _num_in(v["ub"]), float(v.get("start", 0.0)))
    for c in data["constraints"]:
        t = c["type"]
        if t == "linear":
            model.add_linear(c["label"], _lin_in(c["expr"]), c["sense"])
        elif t == "quadratic":
            model.add_quadratic(c["label"], _quad_in(c["expr"]), c["sense"])
        elif t == "soc":
            model.add_soc(c["label"], [_lin_in(a) for a in c["norm_args"]], _lin_in(c["bound"]))
        elif t == "rotated_soc":
            model.add_rotated_soc(
                c["label"], _lin_in(c["x"]), _lin_in(c["y"]), [_lin_in(a) for a in c["args"]]
            )
        else:
            raise ValueError(f"unknown constraint type {t!r}")
    if data.get("objective") is not None:
        model.set_objective(_quad_in(data["objective"]))
    return model


def solution_to_json_dict(values: Mapping[str, float], meta: dict | None = None) -> dict:
    return {
        "schema": SCHEMA_SOLUTION,
        "values": {k: float(values[k]) for k in sorted(values)},
        "meta": meta or {},
    }


def solution_from_json_dict(data: dict) -> dict[str, float]:
    if data.get("schema") != SCHEMA_SOLUTION:
        raise ValueError(f"unexpected schema {data.get('schema')!r}")
    return {k: float(v) for k, v in data["values"].items()}


def dump_model(model: MathModel, path: str) -> None:
    with open(path, "w") as f:
        json.dump(model_to_json_dict(model), f, indent=1, sort_keys=True)


def load_model(path: str) -> MathModel:
    with open(path) as f:
        return model_from_json_dict(json.load(f))
