"""Monte Carlo experiments on the discrete torus."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from ..field import (
    CholeskySampler,
    SpectralSampler,
    covariance,
    estimate,
    expected_max,
)
from ..graph import Graph, laplacian_apply, make_torus
from ..green import DENSE_LIMIT, green_averaged
from ..rng import map_trials, trial_rng
from ..sandpile import Configuration, solve_odometer_exact, topple_parallel
from .laws import MassLaw
from .report import ExperimentReport
from .theory import phi

__all__ = [
    "exp_equality_in_law",
    "exp_scaling",
    "exp_density_conservation",
    "exp_dirac_identity",
    "ScalingTable",
    "ScalingRow",
    "SLOPE_BANDS",
]

KS_ALPHA = 0.001
KS_SITE_FRACTION = 0.95


def _critical_config(g: Graph, rng: np.random.Generator) -> np.ndarray:
    sigma = rng.standard_normal(g.vertex_count)
    return 1.0 + sigma - sigma.mean()


def _bootstrap_cov_se(a, b, reps, rng):
    """Frobenius norm of the bootstrap standard error of ``cov(a) - cov(b)``."""
    ka, kb = a.shape[0], b.shape[0]
    acc_a, acc_b = [], []
    for _ in range(reps):
        acc_a.append(np.cov(a[rng.integers(0, ka, ka)], rowvar=False))
        acc_b.append(np.cov(b[rng.integers(0, kb, kb)], rowvar=False))
    var = np.var(np.stack(acc_a), axis=0, ddof=1) + np.var(np.stack(acc_b), axis=0, ddof=1)
    return float(np.sqrt(var.sum()))


def exp_equality_in_law(n: int, d: int, trials: int, seed: int, *,
                        bootstrap: int = 200, threads: int | None = None) -> ExperimentReport:
    """Compare exact odometers of critical Gaussian sandpiles with min-shifted fields.

    The odometer pipeline solves ``s + Lu = 1`` for ``s = 1 + sigma -
    mean(sigma)``; the field pipeline draws ``eta`` from the covariance by
    Cholesky and subtracts its minimum.  The two share no randomness.
    """
    if trials < 2:
        raise ValueError("trials must be >= 2")
    t0 = time.perf_counter()
    g = make_torus(n, d)
    if g.vertex_count > DENSE_LIMIT:
        raise ValueError(f"covariance route capped at {DENSE_LIMIT} vertices")
    rep = ExperimentReport("equality-in-law", {"n": n, "d": d, "trials": trials},
                           seeds={"master": seed})

    def odometer(t):
        s = _critical_config(g, trial_rng(seed, t, "odometer"))
        u = solve_odometer_exact(Configuration(g, s))
        resid = float(np.max(np.abs(s + laplacian_apply(g, u) - 1.0)))
        return u, resid

    runs = map_trials(odometer, range(trials), threads)
    U = np.stack([r[0] for r in runs])
    resid = max(r[1] for r in runs)

    sampler = CholeskySampler(covariance(green_averaged(g)), seed)
    H = np.stack(map_trials(sampler.draw, range(trials), threads))
    H -= H.min(axis=1, keepdims=True)

    pvals = np.array([stats.ks_2samp(U[:, x], H[:, x]).pvalue for x in range(g.vertex_count)])
    frac = float(np.mean(pvals > KS_ALPHA))
    dist = float(np.linalg.norm(np.cov(U, rowvar=False) - np.cov(H, rowvar=False)))
    se = _bootstrap_cov_se(U, H, bootstrap, trial_rng(seed, 0, "bootstrap"))

    rep.check("fraction of sites with KS p > 0.001", frac, ">=", KS_SITE_FRACTION)
    rep.check("covariance Frobenius distance / bootstrap SE", dist / se, "<=", 5.0)
    rep.check("max exact-solve residual", resid, "<=", 1e-8)
    rep.check("max |min u|", float(np.max(np.abs(U.min(axis=1)))), "<=", 0.0)
    rep.data.update({
        "ks_pvalues": pvals.tolist(),
        "frobenius_distance": dist,
        "bootstrap_se": se,
        "bootstrap_reps": bootstrap,
        "cholesky_jitter": sampler.jitter,
        "mean_odometer": float(U.mean()),
        "mean_min_shifted_field": float(H.mean()),
    })
    rep.seeds.update({"odometer_stream": "odometer", "field_stream": "field-cholesky"})
    rep.wall_time = time.perf_counter() - t0
    return rep


SLOPE_BANDS = {1: (1.4, 1.6), 2: (0.85, 1.15), 3: (0.35, 0.65)}
RATIO_SPREAD = 4.0


@dataclass
class ScalingRow:
    n: int
    trials: int
    mean: float
    se: float
    mean_at_origin: float
    se_at_origin: float
    phi: float


@dataclass
class ScalingTable:
    """Expected odometer against torus size, with a log-log fit.

    ``mean`` is the site-averaged odometer ``E[mean_x u(x)] = E u(o)``;
    ``mean_at_origin`` uses ``u(o)`` alone.  Both estimate the same number
    by translation invariance; the site average has lower variance and is
    the one fitted.
    """

    d: int
    rows: list[ScalingRow]
    slope: float
    slope_se: float
    intercept: float
    report: ExperimentReport = field(repr=False, default=None)

    @property
    def ci(self) -> tuple[float, float]:
        return (self.slope - 1.96 * self.slope_se, self.slope + 1.96 * self.slope_se)

    @property
    def ratios(self) -> list[float]:
        return [r.mean / r.phi for r in self.rows]

    @property
    def passed(self) -> bool:
        return self.report.passed


def _fit_loglog(ns, means, ses):
    x = np.log(np.asarray(ns, dtype=float))
    y = np.log(np.asarray(means, dtype=float))
    sy = np.asarray(ses, dtype=float) / np.asarray(means, dtype=float)
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    # Monte Carlo error of the unweighted fit, propagated from the per-size SEs
    pinv = np.linalg.pinv(A)
    slope_se = float(np.sqrt(np.sum((pinv[0] * sy) ** 2)))
    return float(coef[0]), slope_se, float(coef[1])


def exp_scaling(d: int, n_list, trials: int, seed: int, *,
                cross_check: bool = False,
                threads: int | None = None) -> ScalingTable:
    """Expected odometer of critical Gaussian sandpiles on ``Z_n^d`` across ``n``.

    Each trial draws the odometer as ``v - min v`` with ``v`` the spectral
    Green convolution of white noise; this is exactly the odometer of
    ``1 + sigma - mean(sigma)``.  For ``d <= 3`` the log-log slope must fall
    in the target band; for ``d >= 4`` the ratio ``E u / phi_d(n)`` may vary
    by at most a factor 4 across sizes.  With ``cross_check`` the estimate
    is compared with ``E max eta`` from independent raw field samples.
    """
    ns = [int(n) for n in n_list]
    if len(ns) < 3:
        raise ValueError("need at least 3 sizes for a scaling fit")
    if any(b <= a for a, b in zip(ns, ns[1:])):
        raise ValueError("sizes must be strictly increasing")
    if trials < 2:
        raise ValueError("trials must be >= 2")
    t0 = time.perf_counter()
    rep = ExperimentReport("scaling", {"d": d, "n_list": ns, "trials": trials,
                                       "cross_check": cross_check},
                           seeds={"master": seed, "stream": "scaling"})
    rows = []
    for n in ns:
        sampler = SpectralSampler(n, d, seed, stream=f"scaling-{n}")
        pairs = map_trials(lambda t: _odometer_stats(sampler, t), range(trials), threads)
        avg = estimate([p[0] for p in pairs])
        at_o = estimate([p[1] for p in pairs])
        rows.append(ScalingRow(n, trials, avg.mean, avg.se, at_o.mean, at_o.se, phi(d, n)))
        if cross_check:
            raw = SpectralSampler(n, d, seed, raw=True, stream=f"scaling-max-{n}")
            emax = expected_max(raw, trials, threads=threads)
            z = abs(emax.mean - avg.mean) / math.hypot(emax.se, avg.se)
            rep.check(f"|E u - E max eta| / SE at n={n}", z, "<=", 5.0)
            rep.data.setdefault("expected_max", {})[str(n)] = emax.as_dict()
        zo = abs(at_o.mean - avg.mean) / math.hypot(at_o.se, avg.se)
        rep.data.setdefault("origin_vs_average_z", {})[str(n)] = zo

    slope, slope_se, icpt = _fit_loglog(ns, [r.mean for r in rows], [r.se for r in rows])
    table = ScalingTable(d, rows, slope, slope_se, icpt, rep)
    if d in SLOPE_BANDS:
        rep.check(f"log-log slope (d={d})", slope, "in", SLOPE_BANDS[d])
    else:
        ratios = table.ratios
        rep.check(f"ratio spread E u / phi_{d} (d={d})", max(ratios) / min(ratios),
                  "<=", RATIO_SPREAD)
    rep.data.update({
        "rows": [vars(r) for r in rows],
        "slope": slope,
        "slope_se": slope_se,
        "slope_ci95": list(table.ci),
        "intercept": icpt,
        "ratios_to_phi": table.ratios,
    })
    rep.wall_time = time.perf_counter() - t0
    return table


def _odometer_stats(sampler, t):
    u = sampler.draw(t)
    return float(u.mean()), float(u[0])


def exp_density_conservation(g: Graph, law: MassLaw, trials: int, seed: int, *,
                             condition: str = "reject", tol: float = 1e-10,
                             max_sweeps: int = 10**6, se_floor: float = 1e-8,
                             threads: int | None = None) -> ExperimentReport:
    """Stabilize i.i.d. configurations and compare ``E s_inf(o)`` with ``E s(o)``.

    ``condition="reject"`` redraws configurations whose total mass exceeds
    ``|V|`` (so every draw stabilizes); ``"recenter"`` shifts each draw to
    total mass exactly ``|V|``, the critical case, in which ``s_inf = 1``.
    """
    if trials < 2:
        raise ValueError("trials must be >= 2")
    if condition not in ("reject", "recenter"):
        raise ValueError(f"unknown conditioning {condition!r}")
    if g.absorbing:
        raise ValueError("density conservation runs on a closed graph")
    t0 = time.perf_counter()
    nv = g.vertex_count
    o = g.origin
    rep = ExperimentReport("density", {"graph": repr(g), "law": law.describe(),
                                       "trials": trials, "condition": condition,
                                       "tol": tol},
                           seeds={"master": seed, "stream": "density"})

    def run(t):
        rng = trial_rng(seed, t, "density")
        redraws = 0
        while True:
            s = law.sample(rng, nv)
            if condition == "recenter":
                s = s - s.mean() + 1.0
                break
            if math.fsum(s) <= nv:
                break
            redraws += 1
            if redraws > 1000:
                raise RuntimeError("law almost never yields total mass <= |V|")
        r = topple_parallel(Configuration(g, s), tol, max_sweeps, track_mass=True)
        mass0 = abs(math.fsum(s)) or 1.0
        return (s[o], r.final_config.values[o], r.max_sweep_drift / mass0,
                r.stabilized, redraws)

    out = map_trials(run, range(trials), threads)
    s0 = estimate([o_[0] for o_ in out])
    sinf = estimate([o_[1] for o_ in out])
    drift = max(o_[2] for o_ in out)
    stabilized = sum(o_[3] for o_ in out)
    target = 1.0 if condition == "recenter" else law.mean
    band = 5.0 * sinf.se + se_floor
    rep.check("max relative per-sweep mass drift", drift, "<=", 1e-9)
    rep.check("fraction of runs stabilized", stabilized / trials, ">=", 1.0)
    rep.check("|mean s_inf(o) - law mean|", abs(sinf.mean - target), "<=", band)
    rep.check("|mean s_inf(o) - mean s_0(o)|", abs(sinf.mean - s0.mean), "<=",
              5.0 * math.hypot(sinf.se, s0.se) + se_floor)
    rep.data.update({
        "s0_origin": s0.as_dict(),
        "sinf_origin": sinf.as_dict(),
        "target_mean": target,
        "redraws": int(sum(o_[4] for o_ in out)),
    })
    rep.wall_time = time.perf_counter() - t0
    return rep


def exp_dirac_identity(n: int, d: int, beta: float, t_max: int) -> ExperimentReport:
    """Parallel toppling of ``1 + beta delta_o`` against random-walk transition powers.

    Checks ``u_t = beta sum_{j<t} p_j`` and ``s_t = 1 + beta deg p_t`` with
    ``p_j(x) = P_o(X_j = x)/deg(x)`` for ``t <= t_max``.
    """
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    if t_max < 1:
        raise ValueError("t_max must be >= 1")
    t0 = time.perf_counter()
    g = make_torus(n, d)
    if g.vertex_count > DENSE_LIMIT:
        raise ValueError(f"transition-matrix oracle capped at {DENSE_LIMIT} vertices")
    o = g.origin
    deg = g.degree.astype(float)
    s = np.ones(g.vertex_count)
    s[o] += beta
    run = topple_parallel(Configuration(g, s), tol=1e-300, max_sweeps=t_max, record=True)

    P = g.adjacency.toarray() / deg[:, None]
    start = np.zeros(g.vertex_count)
    start[o] = 1.0
    u_err = s_err = 0.0
    u_or = np.zeros(g.vertex_count)
    runs_u = list(run.trace.odometers())
    runs_s = list(run.trace.configurations())
    for t in range(t_max + 1):
        # state at time t; the engine halts early only when beta = 0
        k = min(t, len(runs_u) - 1)
        p_t = (start @ np.linalg.matrix_power(P, t)) / deg
        u_err = max(u_err, float(np.max(np.abs(runs_u[k] - u_or))))
        s_err = max(s_err, float(np.max(np.abs(runs_s[k] - (1.0 + beta * deg * p_t)))))
        u_or = u_or + beta * p_t
    rep = ExperimentReport("dirac", {"n": n, "d": d, "beta": beta, "t_max": t_max})
    rep.check("max |u_t - beta sum p_j|", u_err, "<=", 1e-10)
    rep.check("max |s_t - (1 + beta deg p_t)|", s_err, "<=", 1e-10)
    rep.check("|u_1(o) - beta/deg(o)|",
              abs(runs_u[min(1, len(runs_u) - 1)][o] - beta / deg[o]), "<=", 1e-12)
    rep.data.update({"sweeps": run.sweeps, "u_origin_final": float(runs_u[-1][o])})
    rep.wall_time = time.perf_counter() - t0
    return rep
