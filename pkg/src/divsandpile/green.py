"""Green functions of finite graphs and Fourier analysis on the torus.

Conventions
-----------
``g^z(x, y)`` counts the expected visits to ``y`` of a simple random walk
started at ``x`` and killed on hitting ``z``.  A walk started at ``z`` is
killed before it is counted, so row ``z`` of a killed table is zero.  With
that convention ``f_x = g^z(x, .)/deg`` solves ``Laplacian(f_x) = delta_z -
delta_x`` for every ``x``, including ``x = z``.

The averaged table is ``g(x, y) = mean_z g^z(x, y)``.
"""

from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft
import scipy.linalg as sla
import scipy.sparse.linalg as spla

from .graph import Graph, make_dirichlet_box

__all__ = [
    "GreenMode",
    "GreenTable",
    "TorusSpectrum",
    "DENSE_LIMIT",
    "green_killed",
    "green_averaged",
    "green_dirichlet_box",
    "nu_n",
    "kernel_constant",
    "torus_spectrum",
    "torus_character",
    "torus_poisson",
    "variogram_fourier",
    "fourier_F",
    "green_convolve",
    "spectral_convolve",
    "torus_trace_pinv",
]

DENSE_LIMIT = 4096
_CG_LIMIT = 10**4


class GreenMode(str, enum.Enum):
    KILLED = "killed"
    AVERAGED = "averaged"
    DIRICHLET_BOX = "dirichlet_box"


@dataclass(frozen=True)
class GreenTable:
    """Dense table ``table[x, y] = g(x, y)`` of expected visit counts."""

    graph: Graph
    mode: GreenMode
    table: np.ndarray
    z: int | None = None

    def __call__(self, x: int, y: int) -> float:
        return float(self.table[x, y])


def _dense_guard(g: Graph):
    if g.vertex_count > DENSE_LIMIT:
        raise ValueError(
            f"dense Green table needs |V| <= {DENSE_LIMIT}, got {g.vertex_count}"
        )


def green_killed(g: Graph, z: int) -> GreenTable:
    """Green function killed at ``z``, from one factorization of ``-L`` minus ``z``."""
    _dense_guard(g)
    nv = g.vertex_count
    z = int(z)
    if not 0 <= z < nv:
        raise ValueError(f"vertex {z} out of range")
    keep = np.delete(np.arange(nv), z)
    A = (-g.laplacian_matrix()).toarray()[np.ix_(keep, keep)]
    table = np.zeros((nv, nv))
    if keep.size:
        inv = sla.cho_solve(sla.cho_factor(A), np.eye(keep.size))
        table[np.ix_(keep, keep)] = inv * g.degree[keep][None, :]
    return GreenTable(g, GreenMode.KILLED, table, z)


def _laplacian_pinv(g: Graph) -> np.ndarray:
    nv = g.vertex_count
    A = (-g.laplacian_matrix()).toarray() + 1.0 / nv
    return sla.inv(A) - 1.0 / nv


def green_averaged(g: Graph) -> GreenTable:
    """Killed Green function averaged over the killing site.

    Uses the closed form ``g(x, y) = deg(y) (P[x, y] + tr(P)/|V|)`` with
    ``P`` the pseudo-inverse of ``-L``, which equals ``mean_z g^z(x, y)``.
    """
    _dense_guard(g)
    if g.absorbing:
        raise ValueError("averaged Green function needs a graph without absorption")
    P = _laplacian_pinv(g)
    P = 0.5 * (P + P.T)
    table = (P + np.trace(P) / g.vertex_count) * g.degree[None, :]
    return GreenTable(g, GreenMode.AVERAGED, table)


def kernel_constant(gt: GreenTable) -> np.ndarray:
    """``K(y) = (1/deg y) sum_w g(w, y)``; constant in ``y`` for averaged tables."""
    return gt.table.sum(axis=0) / gt.graph.degree


def green_dirichlet_box(radius: int, d: int, o=None) -> np.ndarray:
    """Column ``g_n(o, .)`` of the Green function killed on exiting the box.

    ``o`` is a coordinate tuple or vertex index (default: the centre).
    Solves ``-L m = delta_o`` on the box and returns ``2d * m``.
    """
    box = make_dirichlet_box(radius, d)
    if o is None:
        o = box.origin
    elif not isinstance(o, (int, np.integer)):
        o = box.index(o)
    A = (-box.laplacian_matrix()).tocsc()
    rhs = np.zeros(box.vertex_count)
    rhs[o] = 1.0
    if box.vertex_count <= _CG_LIMIT:
        m = spla.spsolve(A, rhs)
    else:
        m, info = spla.cg(A, rhs, rtol=1e-13, atol=0.0, maxiter=50 * box.vertex_count)
        if info != 0:
            raise RuntimeError(f"conjugate gradients failed (info={info})")
    return 2 * d * np.atleast_1d(m)


def nu_n(green_col, box: Graph | None = None) -> float:
    """Euclidean norm of a killed Green column."""
    col = np.asarray(green_col, dtype=float)
    if box is not None and col.size != box.vertex_count:
        raise ValueError("column length does not match the box")
    return math.sqrt(math.fsum(col * col))


# torus ---------------------------------------------------------------


@dataclass(frozen=True)
class TorusSpectrum:
    """Laplacian eigenvalues ``lambda_a = -4 sum_i sin^2(pi a_i / n)`` on ``Z_n^d``.

    ``eigenvalues`` has shape ``(n,)*d`` and is indexed by ``a`` with
    entries in ``0..n-1``.
    """

    n: int
    d: int
    eigenvalues: np.ndarray

    def __getitem__(self, a) -> float:
        a = np.atleast_1d(a)
        if a.size != self.d:
            raise ValueError(f"frequency needs {self.d} components")
        return float(self.eigenvalues[tuple(int(x) % self.n for x in a)])


def _sin2_grid(n, d, half=False):
    k = np.sin(np.pi * np.arange(n) / n) ** 2
    lam = np.zeros(1)
    for axis in range(d):
        kk = k[: n // 2 + 1] if (half and axis == d - 1) else k
        lam = np.add.outer(lam, kk) if axis else kk.copy()
    return lam


def torus_spectrum(n: int, d: int) -> TorusSpectrum:
    if n < 1 or d < 1:
        raise ValueError("torus parameters must be positive")
    lam = -4.0 * _sin2_grid(n, d).reshape((n,) * d)
    return TorusSpectrum(n, d, lam)


def torus_character(g: Graph, a) -> np.ndarray:
    """Character ``x -> exp(2 pi i a.x / n)`` as a field on the torus."""
    if g.kind != "torus":
        raise TypeError("characters live on tori")
    phase = g.coords_array() @ np.asarray(a, dtype=float)
    return np.exp(2j * np.pi * phase / g.n)


@functools.lru_cache(maxsize=8)
def _half_inv_eigs(n, d):
    """``1/lambda_a`` on the half spectrum used by real FFTs; zero mode set to 0."""
    lam = -4.0 * _sin2_grid(n, d, half=True)
    lam = lam.reshape((n,) * (d - 1) + (n // 2 + 1,))
    lam.flat[0] = 1.0
    inv = 1.0 / lam
    inv.flat[0] = 0.0
    inv.setflags(write=False)
    return inv


def torus_poisson(n: int, d: int, rhs) -> np.ndarray:
    """Mean-zero solution of ``Laplacian(v) = rhs - mean(rhs)`` on ``Z_n^d``.

    ``rhs`` may be flat (row-major) or grid shaped; the result is flat.
    """
    shape = (n,) * d
    rhs = np.asarray(rhs, dtype=float).reshape(shape)
    coef = sfft.rfftn(rhs)
    coef *= _half_inv_eigs(n, d)
    return sfft.irfftn(coef, s=shape, overwrite_x=True).ravel()


def spectral_convolve(n: int, d: int, sigma) -> np.ndarray:
    """Green convolution on the torus, spectral route: ``Laplacian(v) = mean - sigma``."""
    shape = (n,) * d
    coef = sfft.rfftn(np.asarray(sigma, dtype=float).reshape(shape))
    coef *= -_half_inv_eigs(n, d)
    return sfft.irfftn(coef, s=shape, overwrite_x=True).ravel()


def torus_trace_pinv(n: int, d: int) -> float:
    """Trace of the pseudo-inverse of ``-L`` on ``Z_n^d``: ``sum_{a != 0} 1/|lambda_a|``."""
    lam = -4.0 * _sin2_grid(n, d).ravel()[1:]
    return math.fsum(1.0 / -lam)


def fourier_F(n: int, d: int, x) -> float:
    """``n^{-d} sum_{z != 0} sin^2(pi x.z/n) / (sum_i sin^2(pi z_i/n))^2``."""
    x = [int(c) for c in x]
    if len(x) != d:
        raise ValueError(f"lag has {len(x)} coordinates, expected {d}")
    z = np.arange(n)
    phase = np.zeros(1)
    for axis in range(d):
        term = x[axis] * z
        phase = np.add.outer(phase, term) if axis else term.astype(float)
    num = np.sin(np.pi * np.asarray(phase, dtype=float).ravel() / n) ** 2
    den = _sin2_grid(n, d).ravel() ** 2
    terms = num[1:] / den[1:]
    return math.fsum(terms) / n**d


def variogram_fourier(n: int, d: int, x) -> float:
    """``E(eta_0 - eta_x)^2 = F_{n,d}(x) / 4`` for the bi-Laplacian field on ``Z_n^d``."""
    return fourier_F(n, d, x) / 4.0


def green_convolve(gt: GreenTable, sigma, graph: Graph | None = None) -> np.ndarray:
    """``v(y) = (1/deg y) sum_x g(x, y) sigma(x)`` for an averaged table.

    ``Laplacian(v) = mean(sigma) - sigma``.
    """
    if gt.mode is not GreenMode.AVERAGED:
        raise ValueError("green_convolve needs an averaged Green table")
    if graph is not None and graph is not gt.graph:
        raise ValueError("field and Green table live on different graphs")
    sigma = np.asarray(sigma, dtype=float)
    if sigma.shape[0] != gt.graph.vertex_count:
        raise ValueError("field length does not match the Green table")
    return (gt.table.T @ sigma) / gt.graph.degree
