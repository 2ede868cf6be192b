"""Toppling engines and odometer solvers for the divisible sandpile.

A configuration ``s`` is a real mass field.  An unstable vertex (mass above 1)
keeps mass 1 and splits its excess equally among its neighbours.  The
odometer ``u`` records the total mass each vertex has sent to every one of
its neighbours, so that the configuration at any time is ``s + Laplacian(u)``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as spla

from .graph import Graph, laplacian_apply
from .green import torus_poisson

__all__ = [
    "Configuration",
    "Status",
    "OdometerReport",
    "TopplingTrace",
    "SolverError",
    "topple_parallel",
    "topple_nested",
    "topple_two_stage",
    "solve_odometer_exact",
    "is_stable",
    "check_legal",
    "nested_masks",
    "DEFAULT_TOL",
    "DEFAULT_MAX_SWEEPS",
]

DEFAULT_TOL = 1e-10
DEFAULT_MAX_SWEEPS = 10**6
DIRECT_SOLVE_LIMIT = 10**4


class SolverError(RuntimeError):
    """A linear solve failed or missed its residual target."""


class Status(str, enum.Enum):
    STABILIZED = "stabilized"
    MAX_SWEEPS = "max_sweeps_reached"


@dataclass
class Configuration:
    """Mass field on the vertices of a graph."""

    graph: Graph
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.graph.vertex_count,):
            raise ValueError(
                f"configuration has shape {v.shape}, "
                f"graph has {self.graph.vertex_count} vertices"
            )
        if not np.all(np.isfinite(v)):
            raise ValueError("configuration contains non-finite mass")
        self.values = v

    def total_mass(self) -> float:
        return math.fsum(self.values)

    def copy(self) -> "Configuration":
        return Configuration(self.graph, self.values.copy())


@dataclass
class TopplingTrace:
    """Per-sweep emissions of a toppling run.

    ``increments[t]`` is ``u_{t+1} - u_t``; the configuration before that
    sweep is rebuilt from ``initial`` on demand.
    """

    graph: Graph
    initial: np.ndarray
    increments: list = field(default_factory=list)

    def __len__(self):
        return len(self.increments)

    def configurations(self):
        """Yield ``s_0, s_1, ...`` (one more than there are sweeps)."""
        s = self.initial.copy()
        yield s.copy()
        for inc in self.increments:
            s = s + laplacian_apply(self.graph, inc)
            yield s.copy()

    def odometers(self):
        """Yield ``u_0 = 0, u_1, ...``."""
        u = np.zeros_like(self.initial)
        yield u.copy()
        for inc in self.increments:
            u = u + inc
            yield u.copy()

    def total_masses(self) -> np.ndarray:
        """Total mass on the graph after each sweep, compensated sums."""
        return np.array([math.fsum(s) for s in self.configurations()])


@dataclass
class OdometerReport:
    """Outcome of a stabilization run.

    ``mass_drift`` is ``|sum s_final + absorbed - sum s_0|``; ``absorbed``
    is the mass lost through absorbing stubs (zero on tori).
    ``excess_history[t]`` is the total excess ``sum (s_t - 1)^+`` over the
    toppling region before sweep ``t``.
    """

    odometer: np.ndarray
    final_config: Configuration
    sweeps: int
    status: Status
    max_residual_excess: float
    mass_drift: float
    absorbed: float = 0.0
    excess_history: np.ndarray = field(default_factory=lambda: np.zeros(0))
    trace: TopplingTrace | None = None
    stage_statuses: tuple = ()
    method: str = "parallel"
    max_sweep_drift: float = 0.0

    @property
    def stabilized(self) -> bool:
        return self.status is Status.STABILIZED

    def summary(self) -> dict:
        u = self.odometer
        return {
            "status": self.status.value,
            "method": self.method,
            "sweeps": int(self.sweeps),
            "mass_drift": float(self.mass_drift),
            "absorbed": float(self.absorbed),
            "max_residual_excess": float(self.max_residual_excess),
            "odometer_min": float(u.min()),
            "odometer_max": float(u.max()),
            "odometer_mean": float(u.mean()),
            "stage_statuses": [s.value for s in self.stage_statuses],
        }


def _as_config(s, graph=None) -> Configuration:
    if isinstance(s, Configuration):
        return s
    if graph is None:
        raise TypeError("a bare array needs a graph")
    return Configuration(graph, s)


def _report(graph, s0, u, s, sweeps, status, excess, trace=None, method="parallel"):
    absorbed = math.fsum(u * graph.stubs) if graph.absorbing else 0.0
    drift = abs(math.fsum(s) + absorbed - math.fsum(s0))
    return OdometerReport(
        odometer=u,
        final_config=Configuration(graph, s),
        sweeps=sweeps,
        status=status,
        max_residual_excess=float(np.max(np.maximum(s - 1.0, 0.0))),
        mass_drift=drift,
        absorbed=absorbed,
        excess_history=np.asarray(excess, dtype=float),
        trace=trace,
        method=method,
    )


def _parallel_sweeps(graph, s, u, mask, tol, max_sweeps, trace, drift=None):
    """Parallel toppling restricted to ``mask``; updates ``s`` and ``u`` in place.

    If ``drift`` is a list, the conservation error of every sweep is appended.
    """
    lap = graph.laplacian_matrix()
    deg = graph.degree.astype(float)
    stubs = graph.stubs.astype(float)
    threshold = tol * graph.vertex_count
    excess_hist = []
    if drift is not None:
        mass0 = math.fsum(s)
        absorbed = math.fsum(u * stubs)
    sweeps = 0
    while True:
        excess = np.maximum(s - 1.0, 0.0)
        if mask is not None:
            excess[~mask] = 0.0
        total = excess.sum()
        excess_hist.append(total)
        if total < threshold:
            return sweeps, Status.STABILIZED, excess_hist
        if sweeps >= max_sweeps:
            return sweeps, Status.MAX_SWEEPS, excess_hist
        inc = excess / deg
        u += inc
        s += lap @ inc
        sweeps += 1
        if trace is not None:
            trace.increments.append(inc)
        if drift is not None:
            absorbed += math.fsum(inc * stubs)
            drift.append(abs(math.fsum(s) + absorbed - mass0))


def _check_run_args(tol, max_sweeps):
    if not tol > 0:
        raise ValueError(f"tol={tol} must be positive")
    if int(max_sweeps) < 1:
        raise ValueError(f"max_sweeps={max_sweeps} must be >= 1")


def topple_parallel(
    s,
    tol: float = DEFAULT_TOL,
    max_sweeps: int = DEFAULT_MAX_SWEEPS,
    record: bool = False,
    *,
    graph: Graph | None = None,
    track_mass: bool = False,
) -> OdometerReport:
    """Topple every unstable vertex simultaneously until the excess vanishes.

    Each sweep sets ``u_t - u_{t-1} = (s_{t-1} - 1)^+ / deg``.  The run stops
    with status ``STABILIZED`` once ``sum (s_t - 1)^+ < tol * |V|``, or with
    ``MAX_SWEEPS`` after ``max_sweeps`` sweeps.  Non-convergence is only
    reported, never read as a proof of explosion.

    Parameters
    ----------
    s : Configuration or array_like
        Initial masses (an array needs ``graph=``).
    tol : float
        Termination threshold per vertex on the total excess.
    max_sweeps : int
        Sweep budget.
    record : bool
        Keep the per-sweep emissions in ``report.trace``.
    track_mass : bool
        Record the worst per-sweep conservation error in
        ``report.max_sweep_drift``.
    """
    _check_run_args(tol, max_sweeps)
    conf = _as_config(s, graph)
    g = conf.graph
    s0 = conf.values
    st = s0.copy()
    u = np.zeros_like(st)
    trace = TopplingTrace(g, s0.copy()) if record else None
    drift = [] if track_mass else None
    sweeps, status, hist = _parallel_sweeps(
        g, st, u, None, tol, int(max_sweeps), trace, drift
    )
    rep = _report(g, s0, u, st, sweeps, status, hist, trace)
    if drift:
        rep.max_sweep_drift = max(drift)
    return rep


def nested_masks(g: Graph, radii) -> list[np.ndarray]:
    """Boolean masks of the sup-norm balls ``{|x|_inf <= r}`` about the origin."""
    radii = [int(r) for r in radii]
    if not radii:
        raise ValueError("radii schedule is empty")
    if any(b <= a for a, b in zip(radii, radii[1:])):
        raise ValueError(f"radii {radii} must be strictly increasing")
    if radii[0] < 0:
        raise ValueError("radii must be nonnegative")
    if not g.is_lattice:
        raise TypeError("nested volumes need a torus or a box")
    if g.kind == "box" and radii[-1] > g.radius:
        raise ValueError(f"radius {radii[-1]} exceeds the box radius {g.radius}")
    sup = np.abs(g.coords_array()).max(axis=1)
    return [sup <= r for r in radii]


def _active_set_stage(g, s, mask, max_iter=None):
    """Stabilize the sites in ``mask`` by solving the obstacle problem directly.

    Finds the least ``w >= 0`` supported on ``mask`` with ``s + Lw <= 1``
    there, via Howard's policy iteration on ``min(w, 1 - s - Lw) = 0``.
    Starting from ``w = 0`` the iterates increase monotonically for the
    M-matrix ``-L``; the fixed point is the stage odometer.

    Returns ``(w, iterations, converged)``.
    """
    A = (-g.laplacian_matrix()).tocsr()
    dom = np.flatnonzero(mask)
    A_dom = A[dom][:, dom].tocsc()
    q = 1.0 - s[dom]
    w = np.zeros(dom.size)
    active = q < 0
    max_iter = max_iter or dom.size + 1
    for it in range(1, max_iter + 1):
        idx = np.flatnonzero(active)
        w = np.zeros(dom.size)
        if idx.size:
            if idx.size == g.vertex_count and not g.absorbing:
                raise SolverError("active set covers a graph without absorption")
            w[idx] = spla.spsolve(A_dom[idx][:, idx].tocsc(), -q[idx])
        resid = q + A_dom @ w
        new_active = resid < w
        if np.array_equal(new_active, active):
            break
        active = new_active
    else:
        it = max_iter
    out = np.zeros_like(s)
    out[dom] = w
    converged = bool(np.array_equal(new_active, active)) and bool((w >= 0).all())
    return out, it, converged


def topple_nested(
    s,
    radii,
    tol: float = DEFAULT_TOL,
    max_sweeps: int = DEFAULT_MAX_SWEEPS,
    *,
    method: str = "parallel",
    graph: Graph | None = None,
) -> list[OdometerReport]:
    """Stabilize the sup-norm balls ``V_1 ⊂ V_2 ⊂ ...`` one after another.

    Only sites of the current ball topple; mass pushed out of the ball sits
    on the outside sites until a later, larger ball reaches them.  On a box
    mass leaving the box itself is absorbed.  The returned reports carry the
    cumulative odometer after each ball.

    ``method="parallel"`` runs parallel sweeps inside each ball.
    ``method="active_set"`` solves each stage as an obstacle problem with
    policy iteration; by the least action principle both give the same
    stage odometer, and the latter is far faster on large boxes.
    """
    _check_run_args(tol, max_sweeps)
    if method not in ("parallel", "active_set"):
        raise ValueError(f"unknown method {method!r}")
    conf = _as_config(s, graph)
    g = conf.graph
    masks = nested_masks(g, radii)
    s0 = conf.values
    st = s0.copy()
    u = np.zeros_like(st)
    reports = []
    for mask in masks:
        full_closed = bool(mask.all()) and not g.absorbing
        if method == "parallel" or full_closed:
            sweeps, status, hist = _parallel_sweeps(
                g, st, u, mask, tol, int(max_sweeps), None
            )
            used = "parallel"
        else:
            w, sweeps, ok = _active_set_stage(g, st, mask)
            u += w
            st[:] = s0 + laplacian_apply(g, u)
            status = Status.STABILIZED if ok else Status.MAX_SWEEPS
            hist = [float(np.maximum(st[mask] - 1.0, 0.0).sum())]
            used = "active_set"
        rep = _report(g, s0, u.copy(), st.copy(), sweeps, status, hist, method=used)
        rep.max_residual_excess = float(np.max(np.maximum(st[mask] - 1.0, 0.0)))
        reports.append(rep)
    return reports


def topple_two_stage(
    s1,
    s2,
    tol: float = DEFAULT_TOL,
    max_sweeps: int = DEFAULT_MAX_SWEEPS,
    record: bool = False,
    *,
    graph: Graph | None = None,
) -> OdometerReport:
    """Stabilize ``s1`` first, then add ``s2 >= 0`` and stabilize again.

    Both stages use parallel toppling under the same sweep budget.  If the
    first stage does not stabilize the run still proceeds; both statuses
    are kept in ``stage_statuses``.  The recorded trace is that of stage two.
    """
    c1 = _as_config(s1, graph)
    c2 = _as_config(s2, c1.graph)
    if c2.graph is not c1.graph:
        raise ValueError("s1 and s2 live on different graphs")
    if (c2.values < 0).any():
        bad = int(np.flatnonzero(c2.values < 0)[0])
        raise ValueError(f"s2 is negative at vertex {bad}")
    first = topple_parallel(c1, tol, max_sweeps)
    mid = first.final_config.values + c2.values
    second = topple_parallel(Configuration(c1.graph, mid), tol, max_sweeps, record)
    g = c1.graph
    s0 = c1.values + c2.values
    rep = _report(
        g,
        s0,
        first.odometer + second.odometer,
        second.final_config.values,
        first.sweeps + second.sweeps,
        second.status,
        np.concatenate([first.excess_history, second.excess_history]),
        second.trace,
    )
    rep.stage_statuses = (first.status, second.status)
    return rep


def solve_odometer_exact(
    s,
    *,
    graph: Graph | None = None,
    mass_tol: float = 1e-9,
    residual_tol: float = 1e-8,
) -> np.ndarray:
    """Odometer of a configuration with total mass exactly ``|V|``.

    It is the unique ``u`` with ``s + Laplacian(u) = 1`` and ``min u = 0``.
    On a torus the Poisson problem is solved spectrally; on a general graph
    the system is pinned at vertex 0, solved (directly up to 10^4 vertices,
    by conjugate gradients above), then shifted to minimum 0.

    Raises
    ------
    ValueError
        If the graph absorbs mass or the total mass differs from ``|V|`` by
        more than ``mass_tol * |V|``.
    SolverError
        If the residual ``|s + Lu - 1|_inf`` exceeds ``residual_tol``.
    """
    conf = _as_config(s, graph)
    g = conf.graph
    if g.absorbing:
        raise ValueError("exact odometer needs a graph without absorption")
    nv = g.vertex_count
    gap = conf.total_mass() - nv
    if abs(gap) > mass_tol * nv:
        raise ValueError(
            f"total mass {conf.total_mass():.12g} differs from |V|={nv}; "
            "the configuration does not stabilize to all ones"
        )
    rhs = 1.0 - conf.values
    if g.kind == "torus":
        u = torus_poisson(g.n, g.d, rhs)
    else:
        A = (-g.laplacian_matrix())[1:, 1:].tocsc()
        b = -rhs[1:]
        if nv - 1 <= DIRECT_SOLVE_LIMIT:
            sol = spla.spsolve(A, b)
        else:
            sol, info = spla.cg(A, b, rtol=1e-13, atol=0.0, maxiter=20 * nv)
            if info != 0:
                raise SolverError(f"conjugate gradients did not converge (info={info})")
        u = np.concatenate([[0.0], np.atleast_1d(sol)])
    u = u - u.min()
    resid = np.max(np.abs(conf.values + laplacian_apply(g, u) - 1.0))
    if resid > residual_tol * max(1.0, np.max(np.abs(conf.values))):
        raise SolverError(f"exact solve residual {resid:.3e} above {residual_tol:.1e}")
    return u


def is_stable(s, tol: float = DEFAULT_TOL) -> bool:
    """True iff every vertex carries mass at most ``1 + tol``."""
    values = s.values if isinstance(s, Configuration) else np.asarray(s, dtype=float)
    return bool(np.max(values) <= 1.0 + tol)


def check_legal(trace: TopplingTrace, eps: float = 1e-12):
    """Check that no sweep emitted more than the available excess.

    A sweep is legal at ``x`` when ``u_t(x) - u_{t-1}(x) <=
    (s_{t-1}(x) - 1)^+ / deg(x) + eps``.

    Returns
    -------
    (bool, (sweep, vertex) or None)
        The flag and the first violating sweep (1-based) and vertex.
    """
    deg = trace.graph.degree
    configs = trace.configurations()
    for t, (inc, prev) in enumerate(zip(trace.increments, configs), start=1):
        bound = np.maximum(prev - 1.0, 0.0) / deg
        scale = eps * max(1.0, float(np.max(np.abs(prev))))
        bad = np.flatnonzero(inc > bound + scale)
        if bad.size:
            return False, (t, int(bad[0]))
    return True, None

