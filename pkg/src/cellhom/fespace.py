"""Piecewise-linear discretization of the zero-trace Sobolev space on a cell domain.

A :class:`DofSpace` stores nodes, the zero-boundary mask, one quadrature point
per element, and a sparse operator ``grad`` taking nodal values to the
measure-adapted gradient at the quadrature points. On Euclidean domains this
is the ordinary gradient of P1 elements; on graphs it is the derivative along
each edge with respect to arc length, so the local gradient space is
one-dimensional.

The gradient of the affine map x -> xi x is supplied per quadrature point by
:meth:`DofSpace.affine`, which for graphs projects xi onto the edge tangent.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from cellhom.errors import DimensionMismatch, ResolutionTooSmall
from cellhom.structure import Ball, Box, CellDomain, graph_ball_pieces, graph_box_pieces


@dataclass(frozen=True, eq=False)
class DofSpace:
    domain: CellDomain
    resolution: int
    m: int
    nodes: np.ndarray
    boundary: np.ndarray
    elements: np.ndarray
    qpoints: np.ndarray
    qweights: np.ndarray
    grad: sp.csr_matrix
    gdim: int
    h: float
    tangents: np.ndarray | None = None

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def free(self) -> np.ndarray:
        return np.flatnonzero(~self.boundary)

    @property
    def n_free(self) -> int:
        return int(np.count_nonzero(~self.boundary))

    @property
    def measure(self) -> float:
        return float(np.sum(self.qweights))

    def gradient(self, w) -> np.ndarray:
        """Per-quadrature-point gradient, shape (nq, m, gdim)."""
        w = np.asarray(w, float).reshape(self.n_nodes, -1)
        gw = self.grad @ w
        return gw.reshape(len(self.qweights), self.gdim, -1).transpose(0, 2, 1)

    def affine(self, xi) -> np.ndarray:
        """Gradient of x -> xi x at every quadrature point, shape (nq, m, gdim)."""
        xi = np.atleast_2d(np.asarray(xi, float))
        nq = len(self.qweights)
        if xi.shape != (self.m, self.domain.structure.dim):
            raise DimensionMismatch(
                f"xi has shape {xi.shape}, expected {(self.m, self.domain.structure.dim)}"
            )
        if self.tangents is None:
            return np.broadcast_to(xi, (nq,) + xi.shape)
        return np.einsum("mn,qnd->qmd", xi, self.tangents)

    def affine_nodal(self, xi) -> np.ndarray:
        """Nodal values of x -> xi x, shape (n, m)."""
        xi = np.atleast_2d(np.asarray(xi, float))
        return self.nodes @ xi.T

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["node"] + [f"x{j}" for j in range(self.nodes.shape[1])] + ["boundary"])
            for i, (p, b) in enumerate(zip(self.nodes, self.boundary)):
                wr.writerow([i, *[repr(float(v)) for v in p], int(b)])


def discretize_cell(domain: CellDomain, resolution: int, m: int = 1) -> DofSpace:
    """Discretize the domain with ``resolution`` elements per unit length."""
    if resolution < 2:
        raise ResolutionTooSmall(f"resolution must be >= 2, got {resolution}")
    if m < 1:
        raise DimensionMismatch("m must be >= 1")
    s = domain.structure
    if s.is_graph:
        if domain.is_ball:
            pieces = graph_ball_pieces(s, domain.region)
        else:
            pieces = graph_box_pieces(s, domain.region)
        return _graph_space(domain, pieces, resolution, m)
    if s.dim == 1:
        return _interval_space(domain, resolution, m)
    return _triangle_space(domain, resolution, m)


def _interval_space(domain, resolution, m):
    lo, hi = domain.region.bounds()
    a, b = float(lo[0]), float(hi[0])
    n = max(2, int(round((b - a) * resolution)))
    if isinstance(domain.region, Box) and domain.k is not None:
        n = domain.k * resolution
    x = np.linspace(a, b, n + 1)
    h = np.diff(x)
    elements = np.column_stack([np.arange(n), np.arange(1, n + 1)])
    rows = np.repeat(np.arange(n), 2)
    cols = elements.ravel()
    vals = np.column_stack([-1.0 / h, 1.0 / h]).ravel()
    G = sp.csr_matrix((vals, (rows, cols)), shape=(n, n + 1))
    boundary = np.zeros(n + 1, bool)
    boundary[[0, -1]] = True
    return DofSpace(
        domain=domain,
        resolution=resolution,
        m=m,
        nodes=x[:, None],
        boundary=boundary,
        elements=elements,
        qpoints=(0.5 * (x[:-1] + x[1:]))[:, None],
        qweights=h.copy(),
        grad=G,
        gdim=1,
        h=float(np.max(h)),
    )


def _triangle_space(domain, resolution, m):
    """Structured P1 triangulation; each grid square is split along its diagonal."""
    region = domain.region
    lo, hi = region.bounds()
    if isinstance(region, Box):
        counts = np.maximum(2, np.round((hi - lo) * resolution).astype(int))
        if domain.k is not None:
            counts = np.full(2, domain.k * resolution)
        x0, y0 = lo
        hx, hy = (hi - lo) / counts
        i0 = j0 = 0
    else:
        # grid anchored on the global lattice (1/resolution) Z^2
        hx = hy = 1.0 / resolution
        i0, j0 = np.floor(lo * resolution).astype(int)
        i1, j1 = np.ceil(hi * resolution).astype(int)
        counts = np.array([i1 - i0, j1 - j0])
        x0, y0 = 0.0, 0.0
    nx, ny = int(counts[0]), int(counts[1])
    ii, jj = np.meshgrid(np.arange(nx + 1), np.arange(ny + 1), indexing="ij")
    nodes = np.column_stack([x0 + (i0 + ii.ravel()) * hx, y0 + (j0 + jj.ravel()) * hy])
    if isinstance(region, Box):
        nodes[ii.ravel() == nx, 0] = hi[0]
        nodes[jj.ravel() == ny, 1] = hi[1]
    nid = lambda i, j: i * (ny + 1) + j  # noqa: E731
    ci, cj = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    ci, cj = ci.ravel(), cj.ravel()
    lower = np.column_stack([nid(ci, cj), nid(ci + 1, cj), nid(ci + 1, cj + 1)])
    upper = np.column_stack([nid(ci, cj), nid(ci + 1, cj + 1), nid(ci, cj + 1)])
    tris = np.vstack([lower, upper])
    cent = nodes[tris].mean(axis=1)

    if isinstance(region, Ball):
        c = np.asarray(region.center)
        inside = np.sum((cent - c) ** 2, axis=1) < region.radius**2
        touched_out = np.zeros(len(nodes), bool)
        touched_out[tris[~inside].ravel()] = True
        tris = tris[inside]
        cent = cent[inside]
        used = np.unique(tris)
        remap = -np.ones(len(nodes), int)
        remap[used] = np.arange(len(used))
        on_edge = (
            (ii.ravel() == 0) | (ii.ravel() == nx) | (jj.ravel() == 0) | (jj.ravel() == ny)
        )
        boundary = (touched_out | on_edge)[used]
        nodes = nodes[used]
        tris = remap[tris]
    else:
        boundary = (ii.ravel() == 0) | (ii.ravel() == nx) | (jj.ravel() == 0) | (jj.ravel() == ny)

    P = nodes[tris]  # (nt, 3, 2)
    e1 = P[:, 1] - P[:, 0]
    e2 = P[:, 2] - P[:, 0]
    det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    area = 0.5 * np.abs(det)
    # gradients of barycentric functions
    g1 = np.column_stack([e2[:, 1], -e2[:, 0]]) / det[:, None]
    g2 = np.column_stack([-e1[:, 1], e1[:, 0]]) / det[:, None]
    g0 = -g1 - g2
    gb = np.stack([g0, g1, g2], axis=1)  # (nt, 3 nodes, 2 comps)
    nt = len(tris)
    rows = (2 * np.arange(nt)[:, None, None] + np.arange(2)[None, None, :]).repeat(3, axis=1)
    cols = np.broadcast_to(tris[:, :, None], (nt, 3, 2))
    G = sp.csr_matrix(
        (gb.ravel(), (rows.ravel(), cols.ravel())), shape=(2 * nt, len(nodes))
    )
    G.sum_duplicates()
    return DofSpace(
        domain=domain,
        resolution=resolution,
        m=m,
        nodes=nodes,
        boundary=np.asarray(boundary, bool),
        elements=tris,
        qpoints=cent,
        qweights=area,
        grad=G,
        gdim=2,
        h=float(max(hx, hy)),
    )


def _graph_space(domain, pieces, resolution, m):
    key_index: dict = {}
    nodes: list = []
    bflag: list = []

    def node(key, pos, bd):
        if key not in key_index:
            key_index[key] = len(nodes)
            nodes.append(pos)
            bflag.append(bd)
        elif bd:
            bflag[key_index[key]] = True
        return key_index[key]

    seg_a, seg_b, qpts, qw, tans, seglen = [], [], [], [], [], []
    for i in range(len(pieces["length"])):
        p0, p1 = pieces["p0"][i], pieces["p1"][i]
        ln = pieces["length"][i]
        nseg = max(1, int(np.ceil(resolution * ln - 1e-9)))
        ia = node(pieces["key0"][i], p0, bool(pieces["bd0"][i]))
        ib = node(pieces["key1"][i], p1, bool(pieces["bd1"][i]))
        chain = [ia]
        for j in range(1, nseg):
            r = j / nseg
            chain.append(node(("sub", i, j), p0 + r * (p1 - p0), False))
        chain.append(ib)
        for j in range(nseg):
            r = (j + 0.5) / nseg
            seg_a.append(chain[j])
            seg_b.append(chain[j + 1])
            qpts.append(p0 + r * (p1 - p0))
            qw.append(pieces["weight"][i] * ln / nseg)
            tans.append(pieces["tangent"][i])
            seglen.append(ln / nseg)
    nseg_total = len(seg_a)
    seglen = np.asarray(seglen)
    rows = np.repeat(np.arange(nseg_total), 2)
    cols = np.column_stack([seg_a, seg_b]).ravel()
    vals = np.column_stack([-1.0 / seglen, 1.0 / seglen]).ravel()
    G = sp.csr_matrix((vals, (rows, cols)), shape=(nseg_total, len(nodes)))
    G.sum_duplicates()
    dim = domain.structure.dim
    return DofSpace(
        domain=domain,
        resolution=resolution,
        m=m,
        nodes=np.asarray(nodes, float).reshape(-1, dim),
        boundary=np.asarray(bflag, bool),
        elements=np.column_stack([seg_a, seg_b]),
        qpoints=np.asarray(qpts, float).reshape(-1, dim),
        qweights=np.asarray(qw, float),
        grad=G,
        gdim=1,
        h=float(np.max(seglen)),
        tangents=np.asarray(tans, float).reshape(-1, dim, 1),
    )


# -- energy ------------------------------------------------------------------


def _check_dims(space: DofSpace, L) -> None:
    if L.m != space.m or L.N != space.gdim:
        raise DimensionMismatch(
            f"integrand expects (m, N) = {(L.m, L.N)}, space provides {(space.m, space.gdim)}"
        )


class CellEnergy:
    """Mean cell energy w -> avg_Q L(y, xi + grad w) restricted to interior DOFs.

    Works on flat vectors of interior values (length n_free * m) so that it
    can be handed directly to an optimizer.
    """

    def __init__(self, space: DofSpace, L, xi):
        _check_dims(space, L)
        self.space = space
        self.L = L
        self.xi = np.atleast_2d(np.asarray(xi, float))
        self.free = space.free
        self.Gf = space.grad[:, self.free].tocsr()
        self.lift = np.ascontiguousarray(space.affine(self.xi))
        self.nu = space.qweights / space.measure
        self.nq = len(space.qweights)

    @property
    def size(self) -> int:
        return len(self.free) * self.space.m

    def strain(self, x) -> np.ndarray:
        m, d = self.space.m, self.space.gdim
        gw = self.Gf @ np.asarray(x, float).reshape(-1, m)
        return self.lift + gw.reshape(self.nq, d, m).transpose(0, 2, 1)

    def value(self, x) -> float:
        z = self.strain(x)
        return float(np.dot(self.nu, self.L.value(self.space.qpoints, z)))

    def __call__(self, x) -> tuple[float, np.ndarray]:
        z = self.strain(x)
        val = float(np.dot(self.nu, self.L.value(self.space.qpoints, z)))
        dz = self.L.deriv(self.space.qpoints, z) * self.nu[:, None, None]
        g = self.Gf.T @ dz.transpose(0, 2, 1).reshape(-1, self.space.m)
        return val, g.ravel()

    def stiffness(self, coeff=None) -> sp.csr_matrix:
        """Gf^T diag(nu c) Gf on one component (c = 1 if not given)."""
        wq = self.nu if coeff is None else self.nu * coeff
        W = sp.diags(np.repeat(wq, self.space.gdim))
        return (self.Gf.T @ W @ self.Gf).tocsc()

    def full(self, x) -> np.ndarray:
        """Embed interior values into a full (n, m) nodal array with zero boundary."""
        w = np.zeros((self.space.n_nodes, self.space.m))
        w[self.free] = np.asarray(x, float).reshape(-1, self.space.m)
        return w


def energy_and_gradient(space: DofSpace, L, xi, w) -> tuple[float, np.ndarray]:
    """Mean energy of xi x + w over the domain and its gradient in w.

    Boundary entries of ``w`` are treated as zero; the returned gradient is
    zero on boundary DOFs. Shapes follow ``w``: (n,) or (n, m).
    """
    w = np.asarray(w, float)
    shape = w.shape
    if w.size != space.n_nodes * space.m:
        raise DimensionMismatch(f"w has shape {shape}, expected ({space.n_nodes}, {space.m})")
    E = CellEnergy(space, L, xi)
    val, gf = E(w.reshape(space.n_nodes, space.m)[E.free])
    return val, E.full(gf).reshape(shape)
