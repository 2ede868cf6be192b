"""Discrete bi-Laplacian Gaussian field.

On a finite connected graph the field ``eta`` is centred Gaussian with

    Cov(x, y) = (1 / (deg x deg y)) sum_z g(z, x) g(z, y),

``g`` the averaged Green function.  The odometer of ``1 + sigma - mean(sigma)``
with i.i.d. standard normal ``sigma`` has the law of ``eta - min eta``.

Two samplers are provided: an exact Cholesky sampler for graphs with at most
4096 vertices, and a spectral sampler on the torus that Green-convolves white
noise by FFT.  The spectral sampler produces ``v`` with ``eta = v + C`` in law
for an independent Gaussian constant ``C``; ``C`` cancels after min-shifting
and is only drawn when a raw field is requested.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg as sla

from .green import (
    DENSE_LIMIT,
    GreenMode,
    GreenTable,
    kernel_constant,
    spectral_convolve,
    torus_trace_pinv,
)
from .rng import map_trials, trial_rng

__all__ = [
    "CovarianceModel",
    "FieldKind",
    "FieldSample",
    "FactorizationError",
    "CholeskySampler",
    "SpectralSampler",
    "Estimate",
    "covariance",
    "sample_field_cholesky",
    "sample_field_spectral",
    "min_shift",
    "mean_statistic",
    "expected_max",
]


class FactorizationError(RuntimeError):
    """Cholesky failed even after jitter escalation."""


class FieldKind(str, enum.Enum):
    RAW = "raw"
    MIN_SHIFTED = "min_shifted"


@dataclass(frozen=True)
class CovarianceModel:
    graph: object
    matrix: np.ndarray
    K: float

    def variogram(self, x: int, y: int) -> float:
        """``E(eta_x - eta_y)^2``."""
        c = self.matrix
        return float(c[x, x] + c[y, y] - 2.0 * c[x, y])


@dataclass(frozen=True)
class FieldSample:
    """One field (shape ``(|V|,)``) or a batch (shape ``(trials, |V|)``)."""

    values: np.ndarray
    kind: FieldKind


def covariance(gt: GreenTable) -> CovarianceModel:
    if gt.mode is not GreenMode.AVERAGED:
        raise ValueError("covariance needs an averaged Green table")
    g = gt.graph
    if g.vertex_count > DENSE_LIMIT:
        raise ValueError(f"dense covariance capped at {DENSE_LIMIT} vertices")
    scaled = gt.table / g.degree[None, :]
    cov = scaled.T @ scaled
    cov = 0.5 * (cov + cov.T)
    K = float(np.mean(kernel_constant(gt)))
    return CovarianceModel(g, cov, K)


def _cholesky(matrix):
    """Lower Cholesky factor; diagonal jitter ``1e-12 * trace/|V|``, x10 up to 3 times."""
    base = 1e-12 * np.trace(matrix) / matrix.shape[0]
    for jitter in (0.0, base, 10 * base, 100 * base, 1000 * base):
        try:
            a = matrix + jitter * np.eye(matrix.shape[0]) if jitter else matrix
            return sla.cholesky(a, lower=True), jitter
        except np.linalg.LinAlgError:
            continue
    raise FactorizationError("covariance is not positive definite within jitter")


class CholeskySampler:
    """Exact Gaussian sampler ``eta = L z`` with ``L L^T = Cov``."""

    def __init__(self, cov: CovarianceModel, seed: int, stream: str = "field-cholesky"):
        self.cov = cov
        self.seed = int(seed)
        self.stream = stream
        self.factor, self.jitter = _cholesky(cov.matrix)

    @property
    def size(self) -> int:
        return self.factor.shape[0]

    def draw(self, trial: int) -> np.ndarray:
        z = trial_rng(self.seed, trial, self.stream).standard_normal(self.size)
        return self.factor @ z


class SpectralSampler:
    """Bi-Laplacian field on ``Z_n^d`` by FFT Green convolution of white noise.

    ``raw=False`` returns ``v - min v``, distributed as ``eta - min eta``.
    ``raw=True`` returns ``v + C`` with ``C ~ N(0, K^2/n^d)``,
    ``K = tr((-L)^+)``, distributed as ``eta``.
    """

    def __init__(self, n: int, d: int, seed: int, raw: bool = False,
                 stream: str = "field-spectral"):
        if n < 3 or d < 1:
            raise ValueError("spectral sampler needs a torus with n >= 3, d >= 1")
        self.n, self.d = int(n), int(d)
        self.seed = int(seed)
        self.raw = raw
        self.stream = stream
        self._c_sd = torus_trace_pinv(self.n, self.d) / math.sqrt(self.n**self.d)

    @property
    def size(self) -> int:
        return self.n**self.d

    def draw(self, trial: int) -> np.ndarray:
        rng = trial_rng(self.seed, trial, self.stream)
        sigma = rng.standard_normal((self.n,) * self.d)
        v = spectral_convolve(self.n, self.d, sigma)
        if self.raw:
            return v + self._c_sd * rng.standard_normal()
        return v - v.min()

    @property
    def kind(self) -> FieldKind:
        return FieldKind.RAW if self.raw else FieldKind.MIN_SHIFTED


def _batch(sampler, trials, start):
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rows = [sampler.draw(start + t) for t in range(trials)]
    return rows[0] if trials == 1 else np.stack(rows)


def sample_field_cholesky(cov: CovarianceModel, seed: int, trials: int = 1,
                          start: int = 0) -> FieldSample:
    """Raw field samples; deterministic in ``(seed, trial index)``."""
    return FieldSample(_batch(CholeskySampler(cov, seed), trials, start), FieldKind.RAW)


def sample_field_spectral(n: int, d: int, seed: int, trials: int = 1, start: int = 0,
                          raw: bool = False) -> FieldSample:
    """Min-shifted (default) or raw field samples on ``Z_n^d``."""
    sampler = SpectralSampler(n, d, seed, raw=raw)
    return FieldSample(_batch(sampler, trials, start), sampler.kind)


def min_shift(sample: FieldSample) -> FieldSample:
    v = np.asarray(sample.values, dtype=float)
    return FieldSample(v - v.min(axis=-1, keepdims=True), FieldKind.MIN_SHIFTED)


@dataclass(frozen=True)
class Estimate:
    mean: float
    se: float
    trials: int

    def as_dict(self) -> dict:
        return {"mean": self.mean, "se": self.se, "trials": self.trials}


def estimate(values) -> Estimate:
    """Sample mean and its standard error, compensated sums."""
    x = np.asarray(values, dtype=float)
    k = x.size
    mean = math.fsum(x) / k
    var = math.fsum((x - mean) ** 2) / (k - 1) if k > 1 else float("nan")
    return Estimate(mean, math.sqrt(var / k), k)


def mean_statistic(source, trials: int, stat: Callable = np.max,
                   start: int = 0, threads: int | None = None) -> Estimate:
    """Monte Carlo mean of ``stat(field)`` over ``trials`` draws of ``source``."""
    if trials < 2:
        raise ValueError("need at least 2 trials for a standard error")
    vals = map_trials(lambda t: float(stat(source.draw(t))),
                      range(start, start + trials), threads)
    return estimate(vals)


def expected_max(source, trials: int, start: int = 0,
                 threads: int | None = None) -> Estimate:
    """Estimate ``E max eta`` with its standard error."""
    return mean_statistic(source, trials, np.max, start, threads)
