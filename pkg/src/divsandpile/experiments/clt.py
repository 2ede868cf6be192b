"""Normalized Green-weighted sum of critical i.i.d. masses on a box."""

from __future__ import annotations

import math
import time

import numpy as np
from scipy import stats

from ..green import green_dirichlet_box, nu_n
from ..rng import map_trials, trial_rng
from .laws import MassLaw
from .report import ExperimentReport

__all__ = ["clt_weights", "exp_critical_clt"]

KS_ALPHA = 0.01


def clt_weights(radius: int, d: int = 3) -> np.ndarray:
    """Weights ``g_n(o, x) / nu_n`` on the box; their squares sum to 1."""
    col = green_dirichlet_box(radius, d)
    return col / nu_n(col)


def exp_critical_clt(d: int = 3, radii=(8, 12, 16), trials: int = 400,
                     law: MassLaw | None = None, seed: int = 0, *,
                     threads: int | None = None) -> ExperimentReport:
    """KS test of ``sum_x a(x) (s(x) - 1)`` against ``N(0, Var s)`` per radius.

    ``a`` are the normalized killed Green weights from :func:`clt_weights`.
    The largest weight ``b_n = max a`` must shrink strictly as the radius
    grows; this is the small-weights condition for a Lindeberg-type CLT.
    """
    if law is None:
        from .laws import two_point
        law = two_point(1.0, 1.0)
    if not math.isclose(law.mean, 1.0, rel_tol=0.0, abs_tol=1e-12):
        raise ValueError(f"mass law must have mean 1, got {law.mean}")
    if not law.var > 0 or not math.isfinite(law.var):
        raise ValueError("mass law must have finite nonzero variance")
    radii = [int(r) for r in radii]
    if not radii or any(b <= a for a, b in zip(radii, radii[1:])) or radii[0] < 1:
        raise ValueError(f"radii {radii} must be positive and strictly increasing")
    if trials < 2:
        raise ValueError("trials must be >= 2")
    t0 = time.perf_counter()
    rep = ExperimentReport("clt", {"d": d, "radii": radii, "trials": trials,
                                   "law": law.describe()},
                           seeds={"master": seed, "stream": "clt"})
    sd = math.sqrt(law.var)
    b_n = []
    per_radius = {}
    for r in radii:
        a = clt_weights(r, d)
        stream = f"clt-{r}"

        def statistic(t, a=a, stream=stream):
            s = law.sample(trial_rng(seed, t, stream), a.size)
            return math.fsum(a * (s - 1.0))

        T = np.array(map_trials(statistic, range(trials), threads))
        ks = stats.kstest(T, "norm", args=(0.0, sd))
        rep.check(f"KS p-value vs N(0, Var s) at radius {r}", ks.pvalue, ">", KS_ALPHA)
        b_n.append(float(a.max()))
        per_radius[str(r)] = {
            "ks_statistic": float(ks.statistic),
            "ks_pvalue": float(ks.pvalue),
            "b_n": b_n[-1],
            "sample_mean": float(T.mean()),
            "sample_sd": float(T.std(ddof=1)),
        }
    if len(b_n) > 1:
        rep.check("max successive ratio b_n(r_k+1) / b_n(r_k)",
                  max(q / p for p, q in zip(b_n, b_n[1:])), "<", 1.0)
    rep.data.update({"per_radius": per_radius, "b_n": b_n, "target_sd": sd})
    rep.wall_time = time.perf_counter() - t0
    return rep
