"""Experiment reports whose pass flags can be recomputed from the report alone."""

from __future__ import annotations

import operator
from dataclasses import dataclass, field

_OPS = {
    "<=": operator.le,
    "<": operator.lt,
    ">=": operator.ge,
    ">": operator.gt,
}


@dataclass(frozen=True)
class Check:
    """A recorded statistic compared against a stated bound.

    ``op`` is one of ``<=, <, >=, >`` or ``"in"`` (closed interval bound).
    """

    name: str
    value: float
    op: str
    bound: float | tuple

    @property
    def passed(self) -> bool:
        v = self.value
        if v != v:  # nan never passes
            return False
        if self.op == "in":
            lo, hi = self.bound
            return lo <= v <= hi
        return bool(_OPS[self.op](v, self.bound))

    def as_dict(self) -> dict:
        bound = list(self.bound) if isinstance(self.bound, tuple) else self.bound
        return {
            "name": self.name,
            "value": self.value,
            "op": self.op,
            "bound": bound,
            "passed": self.passed,
        }

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return f"[{flag}] {self.name}: {self.value:.6g} {self.op} {self.bound}"


@dataclass
class ExperimentReport:
    experiment: str
    parameters: dict
    checks: list[Check] = field(default_factory=list)
    data: dict = field(default_factory=dict)
    seeds: dict = field(default_factory=dict)
    wall_time: float = 0.0

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def check(self, name, value, op, bound) -> Check:
        c = Check(name, float(value), op, bound)
        self.checks.append(c)
        return c

    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    def results(self) -> dict:
        return {
            "experiment": self.experiment,
            "passed": self.passed,
            "checks": [c.as_dict() for c in self.checks],
            "data": self.data,
        }

    def lines(self) -> list[str]:
        return [f"{self.experiment}: {c.line()}" for c in self.checks]
