"""Reference growth orders for the torus odometer and field variogram."""

from __future__ import annotations

import math


def phi(d: int, n: float) -> float:
    """Order of the expected odometer on ``Z_n^d``."""
    if d == 1:
        return n**1.5
    if d == 2:
        return float(n)
    if d == 3:
        return n**0.5
    if d == 4:
        return math.log(n)
    return math.sqrt(math.log(n))


def psi(d: int, n: float, r: float) -> float:
    """Order of ``E(eta_0 - eta_x)^2`` at lag ``r = |x|_2`` on ``Z_n^d``; zero at ``r = 0``."""
    if r == 0:
        return 0.0
    if d == 1:
        return n * r**2
    if d == 2:
        return r**2 * math.log(n / r)
    if d == 3:
        return float(r)
    if d == 4:
        return math.log1p(r)
    return 1.0


def phi_psi_eval(d: int, n: int, r: float) -> tuple[float, float]:
    """``(phi_d(n), psi_d(n, r))`` with range checks."""
    if int(d) != d or d < 1:
        raise ValueError(f"dimension d={d} must be a positive integer")
    if int(n) != n or n < 2:
        raise ValueError(f"side n={n} must be an integer >= 2")
    if not 0 <= r <= n:
        raise ValueError(f"lag r={r} must lie in [0, n]")
    return phi(int(d), int(n)), psi(int(d), int(n), r)
