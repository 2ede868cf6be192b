"""Named i.i.d. mass laws used to draw initial configurations."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class MassLaw:
    """Marginal law of the initial mass at each vertex."""

    name: str
    params: tuple
    mean: float
    var: float

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        if self.name == "gaussian":
            mu, sd = self.params
            return mu + sd * rng.standard_normal(size)
        if self.name == "two_point":
            mu, spread = self.params
            signs = 2.0 * rng.integers(0, 2, size=size) - 1.0
            return mu + spread * signs
        if self.name == "uniform":
            lo, hi = self.params
            return rng.uniform(lo, hi, size=size)
        raise ValueError(f"unknown law {self.name!r}")

    def describe(self) -> dict:
        return {"name": self.name, "params": list(self.params),
                "mean": self.mean, "var": self.var}


def gaussian(mean: float = 1.0, sd: float = 1.0) -> MassLaw:
    if sd < 0:
        raise ValueError("sd must be nonnegative")
    return MassLaw("gaussian", (float(mean), float(sd)), float(mean), float(sd) ** 2)


def two_point(mean: float = 1.0, spread: float = 1.0) -> MassLaw:
    """``mean +- spread`` with probability 1/2 each."""
    if spread < 0:
        raise ValueError("spread must be nonnegative")
    return MassLaw("two_point", (float(mean), float(spread)), float(mean),
                   float(spread) ** 2)


def uniform(lo: float, hi: float) -> MassLaw:
    if not hi >= lo:
        raise ValueError("uniform law needs hi >= lo")
    return MassLaw("uniform", (float(lo), float(hi)), 0.5 * (lo + hi),
                   (hi - lo) ** 2 / 12.0)


PRESETS = {"gaussian": gaussian, "two_point": two_point, "uniform": uniform}


def parse_law(text: str) -> MassLaw:
    """Parse ``name:p1,p2`` e.g. ``two_point:1,1`` or ``uniform:0.4,1.4``."""
    name, _, rest = text.partition(":")
    if name not in PRESETS:
        raise ValueError(f"unknown mass law {name!r}; choose from {sorted(PRESETS)}")
    args = [float(a) for a in rest.split(",") if a.strip()] if rest else []
    law = PRESETS[name](*args)
    if not all(math.isfinite(p) for p in law.params):
        raise ValueError("law parameters must be finite")
    return law
