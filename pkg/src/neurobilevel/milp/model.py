"""Linear / mixed-integer modeling layer."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np


class ModelingError(ValueError):
    """Raised when a model references undeclared variables or has bad bounds."""


class Sense(enum.Enum):
    LE = "<="
    GE = ">="
    EQ = "="

    @classmethod
    def parse(cls, value: "Sense | str") -> "Sense":
        if isinstance(value, Sense):
            return value
        aliases = {"<=": cls.LE, "=<": cls.LE, ">=": cls.GE, "=>": cls.GE, "=": cls.EQ, "==": cls.EQ}
        try:
            return aliases[value]
        except KeyError:
            raise ModelingError(f"unknown constraint sense {value!r}") from None


class Status(enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    ITERATION_LIMIT = "IterationLimit"


@dataclass(frozen=True)
class Variable:
    index: int
    name: str
    lb: float
    ub: float
    integer: bool


@dataclass(frozen=True)
class Constraint:
    coeffs: dict[int, float]
    sense: Sense
    rhs: float
    name: str = ""


class Model:
    """A linear model over bounded variables, optionally with integrality.

    Variables are referenced by the integer index returned from
    :meth:`add_var`. Everything is kept in insertion order so that solves are
    reproducible.
    """

    def __init__(self, direction: str = "min", name: str = "model"):
        if direction not in ("min", "max"):
            raise ModelingError(f"direction must be 'min' or 'max', got {direction!r}")
        self.name = name
        self.direction = direction
        self.variables: list[Variable] = []
        self.constraints: list[Constraint] = []
        self.objective: dict[int, float] = {}
        self.objective_constant = 0.0

    @property
    def num_vars(self) -> int:
        return len(self.variables)

    @property
    def num_constraints(self) -> int:
        return len(self.constraints)

    def add_var(self, lb: float = 0.0, ub: float = math.inf, integer: bool = False,
                name: str | None = None) -> int:
        lb, ub = float(lb), float(ub)
        if math.isnan(lb) or math.isnan(ub) or lb > ub:
            raise ModelingError(f"invalid bounds [{lb}, {ub}] for variable {name!r}")
        if lb == math.inf or ub == -math.inf:
            raise ModelingError(f"invalid bounds [{lb}, {ub}] for variable {name!r}")
        idx = len(self.variables)
        self.variables.append(Variable(idx, name or f"v{idx}", lb, ub, bool(integer)))
        return idx

    def add_binary(self, name: str | None = None) -> int:
        return self.add_var(0.0, 1.0, integer=True, name=name)

    def _check_coeffs(self, coeffs) -> dict[int, float]:
        out: dict[int, float] = {}
        for var, coef in dict(coeffs).items():
            if not isinstance(var, (int, np.integer)) or not 0 <= var < len(self.variables):
                raise ModelingError(f"coefficient references undeclared variable {var!r}")
            coef = float(coef)
            if not math.isfinite(coef):
                raise ModelingError(f"non-finite coefficient {coef} on variable {var}")
            if coef != 0.0:
                out[int(var)] = out.get(int(var), 0.0) + coef
        return out

    def add_constr(self, coeffs, sense: Sense | str, rhs: float, name: str = "") -> int:
        rhs = float(rhs)
        if not math.isfinite(rhs):
            raise ModelingError(f"non-finite right-hand side {rhs}")
        con = Constraint(self._check_coeffs(coeffs), Sense.parse(sense), rhs, name)
        self.constraints.append(con)
        return len(self.constraints) - 1

    def set_objective(self, coeffs, constant: float = 0.0, direction: str | None = None) -> None:
        if direction is not None:
            if direction not in ("min", "max"):
                raise ModelingError(f"direction must be 'min' or 'max', got {direction!r}")
            self.direction = direction
        self.objective = self._check_coeffs(coeffs)
        self.objective_constant = float(constant)

    def set_bounds(self, var: int, lb: float, ub: float) -> None:
        if not 0 <= var < len(self.variables):
            raise ModelingError(f"undeclared variable {var!r}")
        if lb > ub:
            raise ModelingError(f"invalid bounds [{lb}, {ub}]")
        v = self.variables[var]
        self.variables[var] = Variable(v.index, v.name, float(lb), float(ub), v.integer)

    def copy(self) -> "Model":
        other = Model(self.direction, self.name)
        other.variables = list(self.variables)
        other.constraints = list(self.constraints)
        other.objective = dict(self.objective)
        other.objective_constant = self.objective_constant
        return other

    def integer_indices(self) -> list[int]:
        return [v.index for v in self.variables if v.integer]

    def evaluate_objective(self, x) -> float:
        return self.objective_constant + sum(c * x[j] for j, c in self.objective.items())

    def max_violation(self, x, integrality: bool = True) -> float:
        """Largest bound, row or integrality violation of the point ``x``."""
        worst = 0.0
        for v in self.variables:
            worst = max(worst, v.lb - x[v.index], x[v.index] - v.ub)
            if integrality and v.integer:
                worst = max(worst, abs(x[v.index] - round(x[v.index])))
        for con in self.constraints:
            act = sum(c * x[j] for j, c in con.coeffs.items())
            if con.sense is Sense.LE:
                worst = max(worst, act - con.rhs)
            elif con.sense is Sense.GE:
                worst = max(worst, con.rhs - act)
            else:
                worst = max(worst, abs(act - con.rhs))
        return worst

    def dense(self):
        """Return ``(A, row_lo, row_hi, c, lb, ub, integer_mask)`` with objective in min form."""
        n, m = self.num_vars, self.num_constraints
        A = np.zeros((m, n))
        lo = np.full(m, -np.inf)
        hi = np.full(m, np.inf)
        for i, con in enumerate(self.constraints):
            for j, coef in con.coeffs.items():
                A[i, j] = coef
            if con.sense is not Sense.GE:
                hi[i] = con.rhs
            if con.sense is not Sense.LE:
                lo[i] = con.rhs
        c = np.zeros(n)
        for j, coef in self.objective.items():
            c[j] = coef
        if self.direction == "max":
            c = -c
        lb = np.array([v.lb for v in self.variables], dtype=float)
        ub = np.array([v.ub for v in self.variables], dtype=float)
        mask = np.array([v.integer for v in self.variables], dtype=bool)
        return A, lo, hi, c, lb, ub, mask

    def to_lp_string(self) -> str:
        """Write the model in a CPLEX-LP-like text format (debugging aid).

        Grammar::

            model   := header objective "Subject To" rows "Bounds" bounds ["General" names] "End"
            header  := "\\ " name
            objective := ("Minimize" | "Maximize") "\\n obj: " linexpr [constant]
            rows    := (" c<i>: " linexpr ("<=" | ">=" | "=") number "\\n")*
            bounds  := (" " number " <= " name " <= " number "\\n")*
        """
        def expr(coeffs):
            if not coeffs:
                return "0"
            parts = []
            for j, coef in coeffs.items():
                sign = "-" if coef < 0 else "+"
                parts.append(f"{sign} {abs(coef)!r} {self.variables[j].name}")
            text = " ".join(parts)
            return text[2:] if text.startswith("+ ") else text

        lines = [f"\\ {self.name}", "Minimize" if self.direction == "min" else "Maximize"]
        obj = expr(self.objective)
        if self.objective_constant:
            obj += f" + {self.objective_constant!r}"
        lines.append(f" obj: {obj}")
        lines.append("Subject To")
        for i, con in enumerate(self.constraints):
            lines.append(f" {con.name or f'c{i}'}: {expr(con.coeffs)} {con.sense.value} {con.rhs!r}")
        lines.append("Bounds")
        for v in self.variables:
            lines.append(f" {v.lb!r} <= {v.name} <= {v.ub!r}")
        ints = [v.name for v in self.variables if v.integer]
        if ints:
            lines.append("General")
            lines.append(" " + " ".join(ints))
        lines.append("End")
        return "\n".join(lines) + "\n"


@dataclass
class MipSolution:
    status: Status
    objective: float
    x: np.ndarray
    nodes: int = 0
    wall_time: float = 0.0
    bound: float = math.nan
    cuts_added: int = 0
    lp_iterations: int = 0
    flags: list[str] = field(default_factory=list)

    def __getitem__(self, var: int) -> float:
        return float(self.x[var])

    @property
    def ok(self) -> bool:
        return self.status is Status.OPTIMAL

    def values(self, model: Model) -> dict[str, float]:
        return {v.name: float(self.x[v.index]) for v in model.variables}
