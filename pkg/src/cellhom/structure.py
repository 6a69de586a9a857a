"""Periodic metric measure structures: Euclidean cells and embedded periodic graphs.

Both families carry the translation group Z^N acting on cell coordinates and
the dilation family h_t(x) = t x. The unit cell is the half-open cube
[0, 1)^N; measures are normalized so that the unit cell has measure one.

Graphs live in cell coordinates with N = 2 embedding. Every edge is a straight
segment between two vertices of the closed cell [0, 1]^2 and carries an
intrinsic length (>= chord length) and a measure weight; the metric on the
graph is the intrinsic path length. Vertices on the cell boundary are paired
with lattice-translated partners by the identification map.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from cellhom.errors import (
    DanglingIdentification,
    EmptyGraph,
    NonpositiveLengthOrWeight,
    UnsupportedDimension,
    UnsupportedRegion,
)

_GEOM_TOL = 1e-12


@dataclass(frozen=True)
class Box:
    """Open axis-aligned box (lower, upper) in cell coordinates."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self):
        if len(self.lower) != len(self.upper):
            raise UnsupportedRegion("box corners have different dimensions")
        if any(b <= a for a, b in zip(self.lower, self.upper)):
            raise UnsupportedRegion("box must have positive side lengths")

    @property
    def dim(self) -> int:
        return len(self.lower)

    def scaled(self, t: float) -> Box:
        return Box(tuple(t * a for a in self.lower), tuple(t * b for b in self.upper))

    def translated(self, g) -> Box:
        return Box(
            tuple(a + gi for a, gi in zip(self.lower, g)),
            tuple(b + gi for b, gi in zip(self.upper, g)),
        )

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return np.asarray(self.lower, float), np.asarray(self.upper, float)


@dataclass(frozen=True)
class Ball:
    """Open ball of given radius about center (cell coordinates)."""

    center: tuple[float, ...]
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise UnsupportedRegion("ball radius must be positive")

    @property
    def dim(self) -> int:
        return len(self.center)

    def scaled(self, t: float) -> Ball:
        return Ball(tuple(t * c for c in self.center), t * self.radius)

    def translated(self, g) -> Ball:
        return Ball(tuple(c + gi for c, gi in zip(self.center, g)), self.radius)

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        c = np.asarray(self.center, float)
        return c - self.radius, c + self.radius


def as_region(desc) -> Box | Ball:
    """Build a region from a descriptor dict (``{"ball": ...}`` or ``{"box": ...}``)."""
    if isinstance(desc, (Box, Ball)):
        return desc
    if not isinstance(desc, dict):
        raise UnsupportedRegion(f"unsupported region descriptor: {desc!r}")
    kind = desc.get("kind")
    if kind == "ball":
        return Ball(tuple(float(c) for c in desc["center"]), float(desc["radius"]))
    if kind in ("box", "cube"):
        lower = tuple(float(a) for a in desc["lower"])
        if "upper" not in desc and "side" in desc:
            return Box(lower, tuple(a + float(desc["side"]) for a in lower))
        return Box(lower, tuple(float(b) for b in desc["upper"]))
    raise UnsupportedRegion(f"unsupported region kind: {kind!r}")


@dataclass(frozen=True, eq=False)
class LatticeAction:
    """Translations by Z^N (in cell coordinates) and dilations about the origin."""

    dim: int
    generators: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.generators is None:
            object.__setattr__(self, "generators", np.eye(self.dim))

    def dilate(self, t: float, x) -> np.ndarray:
        return t * np.asarray(x, dtype=float)

    def translate(self, g, x) -> np.ndarray:
        return np.asarray(x, dtype=float) + np.asarray(g, dtype=float) @ self.generators


@dataclass(frozen=True, eq=False)
class PeriodicStructure:
    """A Euclidean cell or a periodic graph with normalized measure.

    For graphs ``edges`` is an (E, 2) integer array of vertex indices and
    ``identify`` a tuple of ``(boundary_vertex, partner_vertex, shift)`` with
    ``vertices[boundary] == vertices[partner] + shift``.
    """

    kind: str
    action: LatticeAction
    vertices: np.ndarray | None = None
    edges: np.ndarray | None = None
    lengths: np.ndarray | None = None
    weights: np.ndarray | None = None
    identify: tuple = ()
    name: str = ""

    @property
    def dim(self) -> int:
        return self.action.dim

    @property
    def is_graph(self) -> bool:
        return self.kind == "graph"

    def cell_measure(self) -> float:
        if self.kind == "euclidean":
            return 1.0
        return float(np.sum(self.weights * self.lengths))

    def scaled_cell_measure(self, k: float) -> float:
        """mu(h_k(U)), computed from the region measure of [0, k)^N."""
        return self.measure(Box((0.0,) * self.dim, (float(k),) * self.dim))

    # -- graph combinatorics -------------------------------------------------

    @cached_property
    def canonical(self) -> tuple[np.ndarray, np.ndarray]:
        """Root vertex and integer shift with ``pos[v] = pos[root[v]] + shift[v]``."""
        nv = len(self.vertices)
        root = np.arange(nv)
        shift = np.zeros((nv, self.dim), dtype=int)
        for b, partner, s in self.identify:
            root[b] = partner
            shift[b] = np.asarray(s, dtype=int)
        return root, shift

    def unrolled(self, translations) -> dict:
        """Edge copies for every lattice translation in ``translations``.

        Returns arrays ``p0, p1`` (segment endpoints), ``key0, key1`` (vertex
        keys ``(root, *lattice_position)`` shared by coincident copies),
        ``length``, ``weight``, ``edge`` (cell edge index) and ``shift``.
        """
        g = np.asarray(translations, dtype=int).reshape(-1, self.dim)
        root, vshift = self.canonical
        a, b = self.edges[:, 0], self.edges[:, 1]
        ne = len(a)
        gg = np.repeat(g, ne, axis=0)
        aa = np.tile(a, len(g))
        bb = np.tile(b, len(g))
        p0 = self.vertices[aa] + gg
        p1 = self.vertices[bb] + gg
        lat0 = vshift[aa] + gg
        lat1 = vshift[bb] + gg
        key0 = [(int(r), *map(int, row)) for r, row in zip(root[aa], lat0)]
        key1 = [(int(r), *map(int, row)) for r, row in zip(root[bb], lat1)]
        return {
            "p0": p0,
            "p1": p1,
            "key0": key0,
            "key1": key1,
            "length": np.tile(self.lengths, len(g)),
            "weight": np.tile(self.weights, len(g)),
            "edge": np.tile(np.arange(ne), len(g)),
            "shift": gg,
        }

    # -- measures ------------------------------------------------------------

    def measure(self, region: Box | Ball) -> float:
        """Measure of the open region (cell coordinates) intersected with X."""
        region = as_region(region)
        if region.dim != self.dim:
            raise UnsupportedRegion("region dimension does not match structure")
        if self.kind == "euclidean":
            if isinstance(region, Box):
                lo, hi = region.bounds()
                return float(np.prod(hi - lo))
            if self.dim == 1:
                return 2.0 * region.radius
            return float(np.pi * region.radius**2)
        lo, hi = region.bounds()
        shifts = covering_translations(lo, hi)
        u = self.unrolled(shifts)
        s0, s1 = clip_segments(u["p0"], u["p1"], region)
        frac = np.clip(s1 - s0, 0.0, None)
        return float(np.sum(u["weight"] * u["length"] * frac))


def covering_translations(lo, hi) -> np.ndarray:
    """Integer g whose closed cell g + [0, 1]^N meets the box [lo, hi]."""
    lo = np.floor(np.asarray(lo, float)).astype(int) - 1
    hi = np.ceil(np.asarray(hi, float)).astype(int)
    axes = [np.arange(a, b + 1) for a, b in zip(lo, hi)]
    return np.array(list(itertools.product(*axes)), dtype=int).reshape(-1, len(axes))


def clip_segments(p0: np.ndarray, p1: np.ndarray, region: Box | Ball):
    """Parameter interval [s0, s1] of each segment p0 + s (p1 - p0) inside ``region``.

    Empty intersections come back with ``s1 <= s0``.
    """
    d = p1 - p0
    n = len(p0)
    if isinstance(region, Box):
        lo, hi = region.bounds()
        s0 = np.zeros(n)
        s1 = np.ones(n)
        for j in range(p0.shape[1]):
            dj = d[:, j]
            moving = np.abs(dj) > 0
            with np.errstate(divide="ignore", invalid="ignore"):
                ta = (lo[j] - p0[:, j]) / dj
                tb = (hi[j] - p0[:, j]) / dj
            enter = np.where(moving, np.minimum(ta, tb), -np.inf)
            leave = np.where(moving, np.maximum(ta, tb), np.inf)
            inside = (p0[:, j] > lo[j]) & (p0[:, j] < hi[j])
            # a segment parallel to a face is kept only strictly inside the slab
            enter = np.where(~moving & ~inside, np.inf, enter)
            s0 = np.maximum(s0, enter)
            s1 = np.minimum(s1, leave)
        return s0, s1
    if isinstance(region, Ball):
        c = np.asarray(region.center, float)
        a = np.sum(d * d, axis=1)
        b = 2.0 * np.sum(d * (p0 - c), axis=1)
        cc = np.sum((p0 - c) ** 2, axis=1) - region.radius**2
        disc = b * b - 4 * a * cc
        ok = (disc > 0) & (a > 0)
        sq = np.sqrt(np.where(ok, disc, 0.0))
        with np.errstate(divide="ignore", invalid="ignore"):
            r0 = np.where(ok, (-b - sq) / (2 * a), 1.0)
            r1 = np.where(ok, (-b + sq) / (2 * a), 0.0)
        return np.maximum(r0, 0.0), np.minimum(r1, 1.0)
    raise UnsupportedRegion(f"unsupported region: {region!r}")


# -- constructors ------------------------------------------------------------


def build_euclidean(dim: int) -> PeriodicStructure:
    if dim not in (1, 2):
        raise UnsupportedDimension(f"euclidean structures support N in {{1, 2}}, got {dim}")
    return PeriodicStructure(kind="euclidean", action=LatticeAction(dim), name=f"euclidean{dim}d")


def build_periodic_graph(spec: dict, name: str = "graph") -> PeriodicStructure:
    """Build a normalized periodic graph from a ``vertices/edges/identify`` mapping.

    Weights are rescaled so that one period has measure 1.
    """
    verts = np.asarray(spec.get("vertices", []), dtype=float)
    edges_in = spec.get("edges", [])
    if len(edges_in) == 0:
        raise EmptyGraph("graph has no edges")
    if verts.ndim != 2 or verts.shape[1] != 2:
        raise UnsupportedDimension("graph vertices must be 2-D cell coordinates")
    nv = len(verts)
    if np.any(verts < -_GEOM_TOL) or np.any(verts > 1 + _GEOM_TOL):
        raise DanglingIdentification("graph vertices must lie in the closed unit cell")

    edges = np.zeros((len(edges_in), 2), dtype=int)
    lengths = np.zeros(len(edges_in))
    weights = np.zeros(len(edges_in))
    for i, e in enumerate(edges_in):
        a, b = int(e["from"]), int(e["to"])
        if not (0 <= a < nv and 0 <= b < nv):
            raise DanglingIdentification(f"edge {i} references a missing vertex")
        if a == b:
            raise DanglingIdentification(f"edge {i} is a self-loop inside the cell")
        chord = float(np.linalg.norm(verts[b] - verts[a]))
        length = float(e.get("length", chord))
        weight = float(e.get("weight", 1.0))
        if length <= 0 or weight <= 0:
            raise NonpositiveLengthOrWeight(f"edge {i} has nonpositive length or weight")
        if length < chord * (1 - 1e-9):
            raise NonpositiveLengthOrWeight(f"edge {i} is shorter than its chord")
        edges[i] = (a, b)
        lengths[i] = length
        weights[i] = weight

    identify = []
    seen = set()
    for item in spec.get("identify", []):
        b, partner, s = int(item[0]), int(item[1]), tuple(int(v) for v in item[2])
        if not (0 <= b < nv and 0 <= partner < nv) or b == partner:
            raise DanglingIdentification(f"identification {item!r} references invalid vertices")
        if b in seen or partner in seen:
            raise DanglingIdentification(f"vertex paired twice in identification {item!r}")
        if not np.allclose(verts[b], verts[partner] + np.asarray(s), atol=1e-9):
            raise DanglingIdentification(f"identification {item!r} is not a lattice translate")
        seen.update((b, partner))
        identify.append((b, partner, s))

    total = float(np.sum(weights * lengths))
    return PeriodicStructure(
        kind="graph",
        action=LatticeAction(2),
        vertices=verts,
        edges=edges,
        lengths=lengths,
        weights=weights / total,
        identify=tuple(identify),
        name=name,
    )


def square_lattice_spec() -> dict:
    """Square lattice Z^2 + (1/2, 1/2) with one junction at the cell center.

    The horizontal and vertical unit edges are split at the cell faces into
    half-edges so no edge runs along the cell boundary.
    """
    return {
        "vertices": [[0.5, 0.5], [0.0, 0.5], [1.0, 0.5], [0.5, 0.0], [0.5, 1.0]],
        "edges": [
            {"from": 1, "to": 0, "length": 0.5, "weight": 1.0},
            {"from": 0, "to": 2, "length": 0.5, "weight": 1.0},
            {"from": 3, "to": 0, "length": 0.5, "weight": 1.0},
            {"from": 0, "to": 4, "length": 0.5, "weight": 1.0},
        ],
        "identify": [[2, 1, [1, 0]], [4, 3, [0, 1]]],
    }


def structure_from_config(desc) -> PeriodicStructure:
    """Resolve a structure descriptor: inline mapping, file path, or named fixture."""
    if isinstance(desc, PeriodicStructure):
        return desc
    if isinstance(desc, (str, Path)):
        with open(desc) as fh:
            desc = json.load(fh)
    if "file" in desc:
        return structure_from_config(desc["file"])
    kind = desc.get("kind", "graph")
    if kind == "euclidean":
        return build_euclidean(int(desc["dim"]))
    if kind == "square_lattice":
        return build_periodic_graph(square_lattice_spec(), name="square_lattice")
    if kind == "graph":
        return build_periodic_graph(desc, name=desc.get("name", "graph"))
    raise UnsupportedRegion(f"unknown structure kind {kind!r}")


# -- lattice combinatorics -----------------------------------------------------


def mesh_decomposition(s: PeriodicStructure, i: int, k: int) -> list[tuple[int, ...]]:
    """Translations g with h_{ik}(U) the disjoint union of g + h_k(U)."""
    if i < 1 or k < 1:
        raise ValueError("mesh_decomposition needs i, k >= 1")
    return [tuple(k * n for n in idx) for idx in itertools.product(range(i), repeat=s.dim)]


@dataclass(frozen=True)
class CoverResult:
    inner: list[tuple[int, ...]]
    outer: list[tuple[int, ...]]
    gap_ratio: float


def lattice_cover(s: PeriodicStructure, region, t: float, k: int) -> CoverResult:
    """Inner and outer covers of t A by translated copies z + [0, k)^N, z in k Z^N."""
    region = as_region(region)
    if region.dim != s.dim:
        raise UnsupportedRegion("region dimension does not match structure")
    if t <= 0 or k < 1:
        raise ValueError("lattice_cover needs t > 0 and k >= 1")
    tA = region.scaled(t)
    lo, hi = tA.bounds()
    axes = [np.arange(np.floor(a / k) - 1, np.ceil(b / k) + 1) * k for a, b in zip(lo, hi)]
    z = np.array(list(itertools.product(*axes)), dtype=float).reshape(-1, s.dim)
    if isinstance(tA, Box):
        lo, hi = tA.bounds()
        inner = np.all((z > lo) & (z + k <= hi), axis=1)
        outer = np.all((z < hi) & (z + k > lo), axis=1)
    else:
        c = np.asarray(tA.center)
        r = tA.radius
        # farthest closed-cube corner; only the corner z itself belongs to the cube
        far = np.where(np.abs(z - c) > np.abs(z + k - c), z, z + k)
        far_d = np.linalg.norm(far - c, axis=1)
        far_is_z = np.all(far == z, axis=1)
        inner = np.where(far_is_z, far_d < r, far_d <= r)
        near = np.clip(c, z, z + k)
        outer = np.linalg.norm(near - c, axis=1) < r
    g_in = [tuple(int(v) for v in row) for row in z[inner]]
    g_out = [tuple(int(v) for v in row) for row in z[outer]]
    gap = (len(g_out) - len(g_in)) * s.scaled_cell_measure(k) / s.measure(tA)
    return CoverResult(g_in, g_out, float(gap))


# -- validation ----------------------------------------------------------------


@dataclass
class ValidationReport:
    entries: list[tuple[str, bool, str]] = field(default_factory=list)

    def add(self, name: str, ok: bool, detail: str = ""):
        self.entries.append((name, bool(ok), detail))

    @property
    def passed(self) -> bool:
        return all(ok for _, ok, _ in self.entries)

    def __getitem__(self, name: str) -> bool:
        for n, ok, _ in self.entries:
            if n == name:
                return ok
        raise KeyError(name)

    def as_dict(self) -> dict:
        return {n: {"passed": ok, "detail": d} for n, ok, d in self.entries}


def validate_structure(s: PeriodicStructure, seed: int = 0, samples: int = 64) -> ValidationReport:
    """Check the group/scaling axioms and measure normalization on samples."""
    rng = np.random.default_rng(seed)
    rep = ValidationReport()
    N = s.dim
    x = rng.uniform(-5, 5, size=(samples, N))

    err = np.max(np.abs(s.action.dilate(1.0, x) - x))
    rep.add("h1_identity", err == 0.0, f"max |h_1(x) - x| = {err:.3e}")

    worst = 0.0
    for _ in range(samples):
        a, b = rng.uniform(0.1, 10, size=2)
        lhs = s.action.dilate(a, s.action.dilate(b, x))
        rhs = s.action.dilate(a * b, x)
        worst = max(worst, float(np.max(np.abs(lhs - rhs) / (1 + np.abs(rhs)))))
    rep.add("composition", worst <= 1e-12, f"max relative error {worst:.3e}")

    worst = 0.0
    for _ in range(samples // 4):
        A = _random_region(rng, N)
        g = rng.integers(-3, 4, size=N)
        m0 = s.measure(A)
        m1 = s.measure(A.translated(g))
        worst = max(worst, abs(m1 - m0) / max(1.0, m0))
    rep.add("g_invariance", worst <= 1e-12, f"max relative error {worst:.3e}")

    worst = 0.0
    for _ in range(samples // 4):
        if s.is_graph:
            # dilations act on lattice-aligned sets only
            lo = rng.integers(-2, 3, size=N)
            A = Box(tuple(map(float, lo)), tuple(float(v) for v in lo + rng.integers(1, 3, size=N)))
            t = float(rng.integers(2, 5))
        else:
            A = _random_region(rng, N)
            t = float(rng.uniform(0.5, 5))
        lhs = s.measure(A.scaled(t))
        rhs = s.scaled_cell_measure(t) * s.measure(A)
        worst = max(worst, abs(lhs - rhs) / max(1.0, abs(rhs)))
    rep.add("pushforward", worst <= 1e-12, f"max relative error {worst:.3e}")

    worst = 0.0
    for a, b in itertools.product((2, 3, 4), repeat=2):
        lhs = s.scaled_cell_measure(a * b)
        rhs = s.scaled_cell_measure(a) * s.scaled_cell_measure(b)
        worst = max(worst, abs(lhs - rhs) / rhs)
    rep.add("multiplicativity", worst <= 1e-12, f"max relative error {worst:.3e}")

    mu_u = s.scaled_cell_measure(1)
    rep.add("unit_measure", abs(mu_u - 1.0) <= 1e-12, f"mu(U) = {mu_u:.15g}")

    if s.is_graph:
        rep.add("identification", *_check_identification(s))
        on_face = _edges_on_cell_boundary(s)
        rep.add("boundary_null", not on_face, f"edges on cell boundary: {on_face}")
    return rep


def _random_region(rng, N) -> Box | Ball:
    if rng.random() < 0.5:
        lo = rng.uniform(-1.5, 1.5, size=N)
        return Box(tuple(lo), tuple(lo + rng.uniform(0.2, 2.0, size=N)))
    return Ball(tuple(rng.uniform(-1.5, 1.5, size=N)), float(rng.uniform(0.2, 1.5)))


def _check_identification(s: PeriodicStructure) -> tuple[bool, str]:
    nv = len(s.vertices)
    paired = {}
    for b, partner, shift in s.identify:
        if not (0 <= b < nv and 0 <= partner < nv) or b == partner:
            return False, f"invalid pair ({b}, {partner})"
        if b in paired or partner in paired:
            return False, f"vertex paired twice ({b}, {partner})"
        paired[b] = partner
        paired[partner] = b
        if not np.allclose(s.vertices[b], s.vertices[partner] + np.asarray(shift), atol=1e-9):
            return False, f"pair ({b}, {partner}) is not a lattice translate"
    if any(paired[paired[v]] != v for v in paired):
        return False, "pairing is not an involution"
    for a, b in s.edges:
        if not (0 <= a < nv and 0 <= b < nv):
            return False, "edge endpoint does not resolve"
    # boundary vertices must all be paired
    on_bd = np.any((s.vertices <= _GEOM_TOL) | (s.vertices >= 1 - _GEOM_TOL), axis=1)
    unpaired = [int(v) for v in np.flatnonzero(on_bd) if v not in paired]
    if unpaired:
        return False, f"unpaired boundary vertices {unpaired}"
    return True, f"{len(s.identify)} pairs"


def _edges_on_cell_boundary(s: PeriodicStructure) -> list[int]:
    out = []
    for i, (a, b) in enumerate(s.edges):
        pa, pb = s.vertices[a], s.vertices[b]
        for j in range(s.dim):
            for face in (0.0, 1.0):
                if abs(pa[j] - face) <= _GEOM_TOL and abs(pb[j] - face) <= _GEOM_TOL:
                    out.append(i)
    return out


# -- cell domains --------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CellDomain:
    """A scaled cell g + h_k(U), a metric ball Q_rho(x), or an open box."""

    structure: PeriodicStructure
    region: Box | Ball
    k: int | None = None

    @classmethod
    def scaled_cell(cls, structure: PeriodicStructure, k: int, offset=None) -> CellDomain:
        if k < 1:
            raise ValueError("scaled cells need k >= 1")
        g = np.zeros(structure.dim) if offset is None else np.asarray(offset, float)
        return cls(structure, Box(tuple(g), tuple(g + k)), int(k))

    @classmethod
    def ball(cls, structure: PeriodicStructure, center, radius: float) -> CellDomain:
        center = tuple(float(c) for c in np.atleast_1d(center))
        if len(center) != structure.dim:
            raise UnsupportedRegion("ball center dimension does not match structure")
        return cls(structure, Ball(center, float(radius)))

    @classmethod
    def box(cls, structure: PeriodicStructure, lower, upper) -> CellDomain:
        return cls(structure, Box(tuple(map(float, lower)), tuple(map(float, upper))))

    @property
    def is_ball(self) -> bool:
        return isinstance(self.region, Ball)

    def scaled(self, t: float) -> CellDomain:
        """The region h_t(Q) (scaled cells lose their integer tag unless t is integral)."""
        k = None
        if self.k is not None and float(t).is_integer():
            k = self.k * int(t)
        return CellDomain(self.structure, self.region.scaled(t), k)

    def measure(self) -> float:
        if self.structure.is_graph and self.is_ball:
            p = graph_ball_pieces(self.structure, self.region)
            return float(np.sum(p["weight"] * p["length"]))
        return self.structure.measure(self.region)


def graph_box_pieces(s: PeriodicStructure, box: Box) -> dict:
    """Edge pieces of the graph inside the open box, with boundary endpoint flags."""
    lo, hi = box.bounds()
    u = s.unrolled(covering_translations(lo, hi))
    s0, s1 = clip_segments(u["p0"], u["p1"], box)
    keep = s1 - s0 > 1e-12
    d = u["p1"] - u["p0"]
    smid = np.where(keep, 0.5 * (s0 + s1), 0.0)
    mid = u["p0"] + smid[:, None] * d
    on_face = np.any(
        (np.abs(mid - lo) <= _GEOM_TOL) | (np.abs(mid - hi) <= _GEOM_TOL), axis=1
    )
    keep &= ~on_face
    idx = np.flatnonzero(keep)
    out = _empty_pieces(s.dim)
    for i in idx:
        a, b = float(max(s0[i], 0.0)), float(min(s1[i], 1.0))
        pa = u["p0"][i] + a * d[i]
        pb = u["p0"][i] + b * d[i]
        ka = u["key0"][i] if a <= 1e-12 else ("clip", int(i), a)
        kb = u["key1"][i] if b >= 1 - 1e-12 else ("clip", int(i), b)
        _append_piece(
            out,
            pa,
            pb,
            (b - a) * u["length"][i],
            u["weight"][i],
            ka,
            kb,
            _on_box_boundary(pa, lo, hi),
            _on_box_boundary(pb, lo, hi),
            d[i] / u["length"][i],
        )
    return _finish_pieces(out, s.dim)


def nearest_graph_point(s: PeriodicStructure, point) -> np.ndarray:
    """Closest point of the embedded graph to ``point`` (Euclidean distance)."""
    c = np.asarray(point, float)
    u = s.unrolled(covering_translations(c - 1.0, c + 1.0))
    d = u["p1"] - u["p0"]
    sc = np.clip(np.sum((c - u["p0"]) * d, axis=1) / np.sum(d * d, axis=1), 0.0, 1.0)
    q = u["p0"] + sc[:, None] * d
    return q[int(np.argmin(np.linalg.norm(q - c, axis=1)))]


def graph_ball_pieces(s: PeriodicStructure, ball: Ball) -> dict:
    """Edge pieces of the open intrinsic-distance ball Q_rho(x) on the graph.

    The center must lie on the graph. Endpoints at distance exactly rho are
    boundary points; points at distance rho are excluded from the ball.
    """
    from scipy.sparse import coo_matrix
    from scipy.sparse.csgraph import dijkstra

    c = np.asarray(ball.center, float)
    rho = ball.radius
    lo, hi = c - rho, c + rho
    u = s.unrolled(covering_translations(lo, hi))
    d = u["p1"] - u["p0"]
    # locate the center on an edge copy
    dd = np.sum(d * d, axis=1)
    sc = np.clip(np.sum((c - u["p0"]) * d, axis=1) / dd, 0.0, 1.0)
    dist = np.linalg.norm(u["p0"] + sc[:, None] * d - c, axis=1)
    host = int(np.argmin(dist))
    if dist[host] > 1e-9:
        from cellhom.errors import BallOutsideRegion

        raise BallOutsideRegion(f"ball center {tuple(c)} does not lie on the graph")

    keys = {}

    def kid(key):
        if key not in keys:
            keys[key] = len(keys)
        return keys[key]

    center_key = ("center",)
    segs = []  # (key_a, key_b, s_a, s_b, edge copy index)
    for i in range(len(d)):
        if i == host and 1e-12 < sc[i] < 1 - 1e-12:
            segs.append((u["key0"][i], center_key, 0.0, float(sc[i]), i))
            segs.append((center_key, u["key1"][i], float(sc[i]), 1.0, i))
        else:
            segs.append((u["key0"][i], u["key1"][i], 0.0, 1.0, i))
    if sc[host] <= 1e-12:
        center_key = u["key0"][host]
    elif sc[host] >= 1 - 1e-12:
        center_key = u["key1"][host]

    rows, cols, vals = [], [], []
    for ka, kb, sa, sb, i in segs:
        ln = (sb - sa) * u["length"][i]
        rows += [kid(ka), kid(kb)]
        cols += [kid(kb), kid(ka)]
        vals += [ln, ln]
    kid(center_key)
    nk = len(keys)
    graph = coo_matrix((vals, (rows, cols)), shape=(nk, nk)).tocsr()
    dist_v = dijkstra(graph, directed=False, indices=keys[center_key])

    out = _empty_pieces(s.dim)
    for ka, kb, sa, sb, i in segs:
        ln = (sb - sa) * u["length"][i]
        da, db = dist_v[keys[ka]], dist_v[keys[kb]]
        tan = d[i] / u["length"][i]
        w = u["weight"][i]
        pos = lambda r: u["p0"][i] + (sa + r * (sb - sa)) * d[i]  # noqa: E731
        ra = (rho - da) / ln if da < rho else None
        rb = 1.0 - (rho - db) / ln if db < rho else None
        if ra is not None and rb is not None and ra >= rb:
            _append_piece(out, pos(0.0), pos(1.0), ln, w, ka, kb, False, False, tan)
            continue
        if ra is not None:
            ra = min(ra, 1.0)
            _append_piece(out, pos(0.0), pos(ra), ra * ln, w, ka, ("rim", i, sa, 0), False, True, tan)
        if rb is not None:
            rb = max(rb, 0.0)
            _append_piece(
                out, pos(rb), pos(1.0), (1 - rb) * ln, w, ("rim", i, sa, 1), kb, True, False, tan
            )
    return _finish_pieces(out, s.dim)


def _on_box_boundary(p, lo, hi) -> bool:
    return bool(np.any((np.abs(p - lo) <= 1e-10) | (np.abs(p - hi) <= 1e-10)))


def _empty_pieces(dim):
    return {k: [] for k in ("p0", "p1", "length", "weight", "key0", "key1", "bd0", "bd1", "tangent")}


def _append_piece(out, p0, p1, length, weight, k0, k1, bd0, bd1, tangent):
    if length <= 1e-14:
        return
    out["p0"].append(p0)
    out["p1"].append(p1)
    out["length"].append(length)
    out["weight"].append(weight)
    out["key0"].append(k0)
    out["key1"].append(k1)
    out["bd0"].append(bd0)
    out["bd1"].append(bd1)
    out["tangent"].append(tangent)


def _finish_pieces(out, dim):
    res = {}
    for k, v in out.items():
        if k in ("key0", "key1"):
            res[k] = v
        elif k in ("p0", "p1", "tangent"):
            res[k] = np.asarray(v, float).reshape(-1, dim)
        elif k in ("bd0", "bd1"):
            res[k] = np.asarray(v, bool)
        else:
            res[k] = np.asarray(v, float)
    return res
