"""Bilevel instances with binary tender, the random generator and the toy fixture.

The program family is::

    min_x   c'x + d1'y
    s.t.    A1 x <= b1,  x in {0,1}^n
            y in argmax { d2'y : A2 x + B2 y <= b2, 0 <= y <= y_upper, (y integer) }
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class LowerKind(str, enum.Enum):
    CONTINUOUS = "Continuous"
    INTEGER = "Integer"

    @classmethod
    def parse(cls, value) -> "LowerKind":
        if isinstance(value, LowerKind):
            return value
        key = str(value).strip().lower()
        if key in ("continuous", "lp", "c"):
            return cls.CONTINUOUS
        if key in ("integer", "milp", "int", "i"):
            return cls.INTEGER
        raise ValueError(f"unknown lower-level kind {value!r}")


class InstanceFormatError(ValueError):
    """Raised for malformed instance documents; the message names the field."""


@dataclass(frozen=True, eq=False)
class BilevelInstance:
    n: int
    m: int
    c: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    A1: np.ndarray
    b1: np.ndarray
    A2: np.ndarray
    B2: np.ndarray
    b2: np.ndarray
    y_upper: np.ndarray
    lower_kind: LowerKind = LowerKind.CONTINUOUS
    name: str = ""

    def __post_init__(self):
        for key in ("c", "d1", "d2", "A1", "b1", "A2", "B2", "b2", "y_upper"):
            arr = np.array(getattr(self, key), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, key, arr)
        object.__setattr__(self, "lower_kind", LowerKind.parse(self.lower_kind))

    def __eq__(self, other) -> bool:
        if not isinstance(other, BilevelInstance):
            return NotImplemented
        if (self.n, self.m, self.lower_kind) != (other.n, other.m, other.lower_kind):
            return False
        return all(
            getattr(self, k).shape == getattr(other, k).shape
            and np.array_equal(getattr(self, k), getattr(other, k))
            for k in _ARRAY_FIELDS
        )

    @property
    def integer_lower(self) -> bool:
        return self.lower_kind is LowerKind.INTEGER

    def upper_feasible(self, x, tol: float = 1e-9) -> bool:
        return bool(np.all(self.A1 @ np.asarray(x, float) <= self.b1 + tol))

    def upper_objective(self, x, y) -> float:
        return float(self.c @ np.asarray(x, float) + self.d1 @ np.asarray(y, float))

    def lower_objective(self, y) -> float:
        return float(self.d2 @ np.asarray(y, float))

    def to_dict(self) -> dict:
        doc = {"n": self.n, "m": self.m, "lower_kind": self.lower_kind.value}
        for key in _ARRAY_FIELDS:
            doc[key] = getattr(self, key).tolist()
        if self.name:
            doc["name"] = self.name
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "BilevelInstance":
        missing = [k for k in ("n", "m", "lower_kind", *_ARRAY_FIELDS) if k not in doc]
        if missing:
            raise InstanceFormatError(f"missing field(s): {', '.join(missing)}")
        try:
            kind = LowerKind.parse(doc["lower_kind"])
        except ValueError as exc:
            raise InstanceFormatError(f"field lower_kind: {exc}") from None
        arrays = {}
        for key in _ARRAY_FIELDS:
            try:
                arrays[key] = np.array(doc[key], dtype=float)
            except (TypeError, ValueError):
                raise InstanceFormatError(f"field {key}: not a numeric array") from None
        inst = cls(n=int(doc["n"]), m=int(doc["m"]), lower_kind=kind, name=doc.get("name", ""), **arrays)
        problems = validate_instance(inst)
        if problems:
            raise InstanceFormatError("; ".join(problems))
        return inst


_ARRAY_FIELDS = ("c", "d1", "d2", "A1", "b1", "A2", "B2", "b2", "y_upper")

# coefficient ranges for the random family; scaled entries are multiplied by delta
COEFFICIENT_RANGES = {
    "c": (-50.0, 50.0),
    "d": (-50.0, 50.0),
    "A1": (-2.0, 2.0),
    "b1": (30.0, 130.0),
    "A2": (-10.0, 10.0),
    "B2": (-1.0, 1.0),
    "b2": (10.0, 110.0),
}
_SCALED = ("A1", "A2", "B2")


def coefficient_range(key: str, n: int, m: int) -> tuple[float, float]:
    lo, hi = COEFFICIENT_RANGES[key]
    if key in _SCALED:
        delta = 200.0 / (m + n)
        return lo * delta, hi * delta
    return lo, hi


def generate_instance(n: int, m: int, lower_kind="Continuous", seed: int = 0) -> BilevelInstance:
    """Draw a random instance; every coefficient class is uniform on its range."""
    if n < 1 or m < 1:
        raise ValueError("n and m must be positive")
    kind = LowerKind.parse(lower_kind)
    rng = np.random.default_rng(seed)

    def draw(key, shape):
        lo, hi = coefficient_range(key, n, m)
        return rng.uniform(lo, hi, size=shape)

    c = draw("c", n)
    d = draw("d", m)
    A1 = draw("A1", (n, n))
    b1 = draw("b1", n)
    A2 = draw("A2", (m, n))
    B2 = draw("B2", (m, m))
    b2 = draw("b2", m)
    return BilevelInstance(n=n, m=m, c=c, d1=d.copy(), d2=d.copy(), A1=A1, b1=b1, A2=A2, B2=B2, b2=b2,
                           y_upper=np.ones(m), lower_kind=kind, name=f"rand-n{n}-m{m}-{kind.value}-s{seed}")


def validate_instance(inst: BilevelInstance) -> list[str]:
    """Return every dimension or bound inconsistency (empty when valid)."""
    problems = []
    n, m = inst.n, inst.m
    if n < 1:
        problems.append(f"n must be >= 1 (got {n})")
    if m < 1:
        problems.append(f"m must be >= 1 (got {m})")
    expected = {
        "c": (n,), "d1": (m,), "d2": (m,), "A1": (n, n), "b1": (n,),
        "A2": (m, n), "B2": (m, m), "b2": (m,), "y_upper": (m,),
    }
    for key, shape in expected.items():
        arr = getattr(inst, key)
        if arr.shape != shape:
            problems.append(f"{key} has shape {arr.shape}, expected {shape}")
        elif not np.all(np.isfinite(arr)):
            problems.append(f"{key} contains non-finite entries")
    if inst.y_upper.shape == (m,) and np.any(inst.y_upper < 0):
        problems.append("y_upper must be nonnegative")
    return problems


def save_instance(inst: BilevelInstance, path) -> None:
    Path(path).write_text(json.dumps(inst.to_dict(), indent=1) + "\n")


def load_instance(path) -> BilevelInstance:
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceFormatError(f"line {exc.lineno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise InstanceFormatError("top-level document must be an object")
    return BilevelInstance.from_dict(doc)


# -- the two-variable toy with a nonlinear lower level ------------------------------


def fixture_lower_argmax(x1: int, x2: int) -> float:
    """Follower's best y: maximise -(y - 2)^2 over 0 <= y <= 1 + 2|x1 - x2|."""
    return min(1.0 + 2.0 * abs(x1 - x2), 2.0)


def fixture_phi(x1: int, x2: int) -> float:
    y = fixture_lower_argmax(x1, x2)
    return -((y - 2.0) ** 2)


def fixture_upper_objective(x1, x2, y) -> float:
    return 2.0 * x1 + x2 - 3.0 * y


def fixture_y_bound(x1, x2) -> float:
    return 1.0 + 2.0 * abs(x1 - x2)


@dataclass(frozen=True)
class IllustrativeFixture:
    phi_table: dict
    known_optimum: tuple
    gnn_closed_form: object = field(repr=False)
    isnn_closed_form: object = field(repr=False)


def illustrative_fixture() -> IllustrativeFixture:
    from .valuenet import closed_form_gnn, closed_form_isnn

    table = {(a, b): fixture_phi(a, b) for a in (0, 1) for b in (0, 1)}
    x_star = (0, 1)
    y_star = fixture_lower_argmax(*x_star)
    f_star = fixture_upper_objective(*x_star, y_star)
    return IllustrativeFixture(table, (x_star, f_star), closed_form_gnn(), closed_form_isnn())


def binary_points(n: int):
    """All points of {0,1}^n as an int array, first coordinate most significant."""
    idx = np.arange(2 ** n)
    return ((idx[:, None] >> np.arange(n - 1, -1, -1)) & 1).astype(int)


def bits_key(x) -> tuple:
    return tuple(int(round(v)) for v in x)


def format_bits(x) -> str:
    return "".join(str(int(round(v))) for v in x)


def is_finite_number(value) -> bool:
    return isinstance(value, (int, float)) and math.isfinite(value)
