"""Graph substrate: discrete tori, Dirichlet boxes of Z^d and general graphs.

Every graph stores a symmetric 0/1 adjacency matrix together with a degree
vector.  On a Dirichlet box the degree still counts the edges that leave the
box; those edges end in absorbing stubs, so mass sent along them is lost and
the Laplacian sees the value 0 on the far side.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

__all__ = [
    "Graph",
    "make_torus",
    "make_dirichlet_box",
    "make_general",
    "laplacian_apply",
    "norm",
    "MAX_VERTICES",
]

MAX_VERTICES = 2**24


class Graph:
    """Finite undirected connected graph with optional absorbing stubs.

    Use :func:`make_torus`, :func:`make_dirichlet_box` or :func:`make_general`
    rather than calling the constructor directly.

    Attributes
    ----------
    kind : str
        ``"torus"``, ``"box"`` or ``"general"``.
    adjacency : scipy.sparse.csr_matrix
        Symmetric adjacency between real vertices.
    degree : ndarray of int
        Degree of every vertex, absorbing stubs included.
    stubs : ndarray of int
        Number of absorbing stubs at every vertex (zero off the box).
    n, d, radius : int or None
        Side length / dimension of a torus, radius / dimension of a box.
    """

    def __init__(self, kind, adjacency, degree, *, n=None, d=None, radius=None):
        self.kind = kind
        self.adjacency = adjacency.tocsr()
        self.degree = np.asarray(degree, dtype=np.int64)
        self.stubs = self.degree - np.diff(self.adjacency.indptr)
        self.n = n
        self.d = d
        self.radius = radius
        for arr in (self.degree, self.stubs):
            arr.setflags(write=False)
        self._laplacian = None
        self._coords = None

    def __repr__(self):
        if self.kind == "torus":
            return f"Graph(torus n={self.n} d={self.d})"
        if self.kind == "box":
            return f"Graph(box radius={self.radius} d={self.d})"
        return f"Graph(general |V|={self.vertex_count})"

    @property
    def vertex_count(self) -> int:
        return self.adjacency.shape[0]

    @property
    def absorbing(self) -> bool:
        return bool(self.stubs.any())

    @property
    def is_lattice(self) -> bool:
        return self.kind in ("torus", "box")

    @property
    def shape(self) -> tuple[int, ...]:
        """Grid shape for row-major reshaping of fields (lattices only)."""
        if self.kind == "torus":
            return (self.n,) * self.d
        if self.kind == "box":
            return (2 * self.radius + 1,) * self.d
        raise TypeError("general graphs have no grid shape")

    def neighbors(self, v: int) -> np.ndarray:
        a = self.adjacency
        return a.indices[a.indptr[v] : a.indptr[v + 1]]

    def laplacian_matrix(self) -> sp.csr_matrix:
        """Sparse matrix of the graph Laplacian, absorbing stubs included."""
        if self._laplacian is None:
            self._laplacian = (
                self.adjacency - sp.diags(self.degree.astype(float))
            ).tocsr()
        return self._laplacian

    # coordinates -------------------------------------------------------

    def coords(self, v: int) -> tuple[int, ...]:
        """Lattice coordinates of vertex ``v``.

        Torus coordinates are canonical, in ``(-n/2, n/2]``; box coordinates
        lie in ``[-radius, radius]``.
        """
        return tuple(int(c) for c in self.coords_array()[v])

    def coords_array(self) -> np.ndarray:
        """``(|V|, d)`` integer array of coordinates, row-major order."""
        if self._coords is None:
            if not self.is_lattice:
                raise TypeError("general graphs have no coordinates")
            raw = np.indices(self.shape).reshape(self.d, -1).T
            if self.kind == "torus":
                raw = np.where(raw > self.n // 2, raw - self.n, raw)
            else:
                raw = raw - self.radius
            raw.setflags(write=False)
            self._coords = raw
        return self._coords

    def index(self, coords: Sequence[int]) -> int:
        """Vertex index of lattice coordinates (reduced mod ``n`` on the torus)."""
        if len(coords) != self.d:
            raise ValueError(f"expected {self.d} coordinates, got {len(coords)}")
        if self.kind == "torus":
            c = [int(x) % self.n for x in coords]
        elif self.kind == "box":
            if any(abs(int(x)) > self.radius for x in coords):
                raise ValueError(f"{tuple(coords)} lies outside the box")
            c = [int(x) + self.radius for x in coords]
        else:
            raise TypeError("general graphs have no coordinates")
        return int(np.ravel_multi_index(c, self.shape))

    @property
    def origin(self) -> int:
        """Index of the vertex at the coordinate origin (vertex 0 otherwise)."""
        if self.is_lattice:
            return self.index((0,) * self.d)
        return 0


def _lattice_edges(shape, periodic):
    size = int(np.prod(shape))
    idx = np.arange(size).reshape(shape)
    rows, cols = [], []
    for axis in range(len(shape)):
        for step in (1, -1):
            nb = np.roll(idx, -step, axis=axis)
            keep = np.ones(shape, dtype=bool)
            if not periodic:
                sl = [slice(None)] * len(shape)
                sl[axis] = -1 if step == 1 else 0
                keep[tuple(sl)] = False
            rows.append(idx[keep])
            cols.append(nb[keep])
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    data = np.ones(rows.size)
    return sp.csr_matrix((data, (rows, cols)), shape=(size, size))


def _check_size(count, max_vertices):
    if count > max_vertices:
        raise ValueError(
            f"graph with {count} vertices exceeds the budget of {max_vertices}"
        )


def make_torus(n: int, d: int, *, max_vertices: int = MAX_VERTICES) -> Graph:
    """Discrete torus ``Z_n^d`` with nearest-neighbour edges.

    ``n`` must be at least 3; for ``n = 2`` the two neighbours along an axis
    coincide and the torus would be a multigraph.
    """
    n, d = int(n), int(d)
    if n < 3:
        raise ValueError(f"torus side n={n} must be >= 3 (n=2 gives parallel edges)")
    if d < 1:
        raise ValueError(f"dimension d={d} must be >= 1")
    _check_size(n**d, max_vertices)
    adj = _lattice_edges((n,) * d, periodic=True)
    return Graph("torus", adj, np.full(n**d, 2 * d), n=n, d=d)


def make_dirichlet_box(
    radius: int, d: int, *, max_vertices: int = MAX_VERTICES
) -> Graph:
    """Sites of ``[-radius, radius]^d`` in ``Z^d``, killed on exit.

    Edges leaving the box become absorbing stubs, so every vertex keeps
    degree ``2d``.
    """
    radius, d = int(radius), int(d)
    if radius < 1:
        raise ValueError(f"box radius={radius} must be >= 1")
    if d < 1:
        raise ValueError(f"dimension d={d} must be >= 1")
    side = 2 * radius + 1
    _check_size(side**d, max_vertices)
    adj = _lattice_edges((side,) * d, periodic=False)
    return Graph("box", adj, np.full(side**d, 2 * d), radius=radius, d=d)


def make_general(adjacency: Iterable[Iterable[int]]) -> Graph:
    """Graph from neighbour lists; must be undirected, simple and connected."""
    lists = [list(map(int, nb)) for nb in adjacency]
    size = len(lists)
    if size == 0:
        raise ValueError("graph needs at least one vertex")
    rows, cols = [], []
    for v, nb in enumerate(lists):
        if len(set(nb)) != len(nb):
            raise ValueError(f"vertex {v} lists a neighbour twice")
        for w in nb:
            if not 0 <= w < size:
                raise ValueError(f"vertex {v} has out-of-range neighbour {w}")
            if w == v:
                raise ValueError(f"self-loop at vertex {v}")
            rows.append(v)
            cols.append(w)
    adj = sp.csr_matrix(
        (np.ones(len(rows)), (rows, cols)), shape=(size, size)
    )
    if (adj != adj.T).nnz:
        raise ValueError("adjacency is not symmetric")
    degree = np.diff(adj.indptr)
    if size > 1 and (degree == 0).any():
        raise ValueError("graph has an isolated vertex")
    ncomp, _ = connected_components(adj, directed=False)
    if ncomp != 1:
        raise ValueError(f"graph is disconnected ({ncomp} components)")
    return Graph("general", adj, degree)


def laplacian_apply(g: Graph, f) -> np.ndarray:
    """Graph Laplacian ``sum_{y~x} (f(y) - f(x))``.

    Absorbing stubs contribute ``0 - f(x)``.  ``f`` may carry trailing
    batch columns, shape ``(|V|, k)``, and may be complex.
    """
    f = np.asarray(f)
    f = f.astype(complex if np.iscomplexobj(f) else float, copy=False)
    if f.shape[0] != g.vertex_count:
        raise ValueError(
            f"field has length {f.shape[0]}, graph has {g.vertex_count} vertices"
        )
    deg = g.degree if f.ndim == 1 else g.degree[:, None]
    return g.adjacency @ f - deg * f


def norm(x: Sequence[int], p: float = 2) -> float:
    """p-norm of a coordinate tuple; ``p=np.inf`` for the sup norm."""
    return float(np.linalg.norm(np.asarray(x, dtype=float), ord=p))

