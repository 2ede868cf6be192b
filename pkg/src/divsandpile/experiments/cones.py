"""Deterministic cone configurations on ``Z^2``.

The cone ``C_a = {(x, y) : x >= 0, |y| <= a x}`` carries the test
configurations.  The stabilization certificate uses the explicit functions

    u_a(x, y) = (a x - |y|)^2 / (2 (1 + a^2)) on C_a, zero elsewhere,
    v_a(x, y) = u_1(x + c, y) - m u_a(x + c, y),   c = ceil(1/a),

and checks ``m 1_{C_a} + L v_a <= 1`` away from a finite segment of the
axis, ``v_a >= 0``, and that the finite excess on that segment can be
absorbed by holes elsewhere.  ``cone_explode`` tracks the nested-volume
odometer of ``(1 + alpha) 1_{C_1}``, which grows without bound.
"""

from __future__ import annotations

import math
import time
from fractions import Fraction

import numpy as np

from ..graph import laplacian_apply, make_dirichlet_box
from ..sandpile import Configuration, topple_nested
from .report import ExperimentReport

__all__ = [
    "cone_indicator",
    "u_cone",
    "laplacian_u1_formula",
    "cone_certificate",
    "exp_s0_line",
    "cone_explode",
]

CERT_TOL = 1e-9
INCREMENT_FLOOR = 0.5
MAX_DENOMINATOR = 10**6


def cone_indicator(x, y, a) -> np.ndarray:
    """``1_{C_a}``; exact for rational ``a`` given as ``Fraction``."""
    x = np.asarray(x)
    y = np.asarray(y)
    a = Fraction(a)
    # |y| <= a x  <=>  q |y| <= p x  for a = p/q, exact on integers
    return (x >= 0) & (a.denominator * np.abs(y) <= a.numerator * x)


def u_cone(x, y, a) -> np.ndarray:
    """``u_a(x, y)``; the quadratic vanishes on the cone's edge."""
    a = Fraction(a)
    af = float(a)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    vals = (af * x - np.abs(y)) ** 2 / (2.0 * (1.0 + af * af))
    return np.where(cone_indicator(x.astype(np.int64), y.astype(np.int64), a), vals, 0.0)


def laplacian_u1_formula(x, y) -> np.ndarray:
    """Closed-form Laplacian of ``u_1`` on ``Z^2``, piecewise in the cone position."""
    x = np.asarray(x, dtype=np.int64)
    ay = np.abs(np.asarray(y, dtype=np.int64))
    out = np.zeros(np.broadcast(x, ay).shape)
    out = np.where((x > 0) & (ay == 0), 1.0 - x, out)
    out = np.where((x > 0) & (ay > 0) & (ay < x), 1.0, out)
    out = np.where((x > 0) & (ay == x), 0.5, out)
    out = np.where((x == 0) & (ay == 0), 0.25, out)
    return out


def _box_xy(radius):
    """Box of radius ``radius + 1`` with coordinate arrays and the inner-box mask.

    Laplacians are taken on the larger box, so every site of the inner box
    sees its four true neighbours.
    """
    g = make_dirichlet_box(radius + 1, 2)
    xy = g.coords_array()
    inner = np.abs(xy).max(axis=1) <= radius
    return g, xy[:, 0], xy[:, 1], inner


def _as_fraction(a) -> Fraction:
    frac = Fraction(a).limit_denominator(MAX_DENOMINATOR) if not isinstance(a, Fraction) else a
    if not 0 < frac <= 1:
        raise ValueError(f"slope a={a} must lie in (0, 1]")
    return frac


def cone_certificate(a, m: float, radius: int) -> ExperimentReport:
    """Check the stabilization certificate for ``m 1_{C_a}`` on a finite box.

    Parameters
    ----------
    a : rational in (0, 1]
        Cone slope; floats are converted with ``Fraction.limit_denominator``.
    m : float
        Mass density on the cone.  The certificate is expected to pass when
        ``2 m a / (1 + a^2) <= 1``.
    radius : int
        Half-width of the checked box, at least ``ceil(1/a) + 2``.

    Notes
    -----
    The exceptional set is ``{(x, 0) : -c - 1 <= x <= 0}``.  The hole set
    ``F`` is grown from the sites with ``x < -c - 1`` (where the certified
    configuration vanishes) nearest the origin first, until its total
    deficit covers the total excess.
    """
    a = _as_fraction(a)
    m = float(m)
    if not math.isfinite(m) or m < 0:
        raise ValueError("mass density m must be finite and nonnegative")
    c = math.ceil(1 / a)
    if radius < c + 2:
        raise ValueError(f"radius must be >= ceil(1/a) + 2 = {c + 2}")
    t0 = time.perf_counter()
    g, x, y, inner = _box_xy(radius)

    v = u_cone(x + c, y, 1) - m * u_cone(x + c, y, a)
    sigma = m * cone_indicator(x, y, a) + laplacian_apply(g, v)

    u1 = u_cone(x, y, 1)
    lap_u1 = laplacian_apply(g, u1)
    formula_gap = float(np.max(np.abs(lap_u1[inner] - laplacian_u1_formula(x, y)[inner])))

    exceptional = (y == 0) & (x >= -c - 1) & (x <= 0)
    off = inner & ~exceptional
    excess = np.maximum(sigma - 1.0, 0.0)
    total_excess = math.fsum(excess[inner])

    cand = np.flatnonzero(inner & (x < -c - 1))
    order = cand[np.lexsort((y[cand], x[cand], x[cand] ** 2 + y[cand] ** 2))]
    deficit = np.maximum(1.0 - sigma[order], 0.0)
    cum = np.cumsum(deficit)
    k = int(np.searchsorted(cum, total_excess) + 1) if cum.size else 0
    k = min(k, order.size)
    f_sites = order[:k]
    f_deficit = math.fsum(deficit[:k])

    rep = ExperimentReport("cone-certify", {
        "a": str(a), "m": m, "radius": int(radius),
        "threshold": float(2 * m * a / (1 + a * a)),
    })
    rep.check("max s_a + L v_a off the exceptional set", float(sigma[off].max()),
              "<=", 1.0 + CERT_TOL)
    rep.check("min v_a", float(v[inner].min()), ">=", -CERT_TOL)
    rep.check("hole deficit on F minus total excess", f_deficit - total_excess, ">=", 0.0)
    rep.check("max |L u_1 numeric - formula|", formula_gap, "<=", 0.0)
    rep.data.update({
        "c": c,
        "exceptional_set": [[int(p), 0] for p in range(-c - 1, 1)],
        "exceptional_values": [float(sigma[i]) for i in np.flatnonzero(exceptional & inner)],
        "total_excess": total_excess,
        "F_size": int(f_sites.size),
        "F_sites": [[int(x[i]), int(y[i])] for i in f_sites],
        "F_deficit": f_deficit,
        "zero_region_max_abs": float(np.max(np.abs(sigma[cand]))) if cand.size else 0.0,
    })
    rep.wall_time = time.perf_counter() - t0
    return rep


def exp_s0_line(radius: int) -> ExperimentReport:
    """Check ``s_0 + L u_1 <= 1`` for ``s_0(x, y) = x 1_{x > 0, y = 0}`` on a box."""
    if radius < 2:
        raise ValueError("radius must be >= 2")
    t0 = time.perf_counter()
    g, x, y, inner = _box_xy(radius)
    lap = laplacian_apply(g, u_cone(x, y, 1))
    s0 = np.where((x > 0) & (y == 0), x, 0).astype(float)
    total = (s0 + lap)[inner]
    formula = laplacian_u1_formula(x, y)
    o = g.index((0, 0))
    rep = ExperimentReport("s0-line", {"radius": int(radius)})
    rep.check("max s_0 + L u_1", float(total.max()), "<=", 1.0 + CERT_TOL)
    rep.check("|max s_0 + L u_1 - 1|", abs(float(total.max()) - 1.0), "<=", CERT_TOL)
    rep.check("max |L u_1 numeric - formula|",
              float(np.max(np.abs(lap[inner] - formula[inner]))), "<=", 0.0)
    rep.check("|L u_1(0, 0) - 1/4|", abs(lap[o] - 0.25), "<=", 0.0)
    axis = np.flatnonzero(inner & (y == 0) & (x > 0))
    rep.check("max |L u_1(x, 0) - (1 - x)|",
              float(np.max(np.abs(lap[axis] - (1.0 - x[axis])))), "<=", 0.0)
    rep.wall_time = time.perf_counter() - t0
    return rep


def cone_explode(alpha: float, radii) -> ExperimentReport:
    """Nested-volume odometer at ``(1, 0)`` for ``(1 + alpha) 1_{C_1}``.

    A growing odometer with increments that do not decay faster than the
    stated floor is consistent with divergence; a finite computation cannot
    prove it, so the report only records ``divergence_consistent``.
    """
    alpha = float(alpha)
    if not alpha > 0:
        raise ValueError("alpha must be > 0")
    radii = [int(r) for r in radii]
    if len(radii) < 2:
        raise ValueError("need at least two radii")
    if radii[0] < 2:
        raise ValueError("smallest radius must be >= 2")
    t0 = time.perf_counter()
    g = make_dirichlet_box(radii[-1], 2)
    xy = g.coords_array()
    s = (1.0 + alpha) * cone_indicator(xy[:, 0], xy[:, 1], 1)
    reports = topple_nested(Configuration(g, s), radii, method="active_set")
    probe = g.index((1, 0))
    values = [float(r.odometer[probe]) for r in reports]
    inc = np.diff(values)
    rep = ExperimentReport("cone-explode", {"alpha": alpha, "radii": radii})
    rep.check("min increment of u(1, 0)", float(inc.min()), ">", 0.0)
    if inc.size >= 2:
        rep.check("min ratio of successive increments", float(np.min(inc[1:] / inc[:-1])),
                  ">=", INCREMENT_FLOOR)
    rep.check("all stages stabilized", float(all(r.stabilized for r in reports)), ">=", 1.0)
    rep.data.update({
        "u_probe": values,
        "increments": inc.tolist(),
        "stage_iterations": [r.sweeps for r in reports],
        "increment_floor": INCREMENT_FLOOR,
    })
    rep.data["divergence_consistent"] = rep.passed
    rep.wall_time = time.perf_counter() - t0
    return rep
