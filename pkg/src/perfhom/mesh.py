"""P1 triangle meshes: unit cells with star-shaped holes, periodic tilings,
plain rectangles and disks, node-motion deformations and lumped quadrature.

Boundary edges are stored oriented so that the domain lies on their left;
the outward normal of an edge (i, j) is therefore rot(-90)(x_j - x_i).
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .errors import ArgumentError, DeformationError, GeometryError, MeshError


class Tag(enum.IntEnum):
    PARTICLE = 0
    OUTER = 1
    DIRICHLET = 2


DOMAIN = "domain"


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


# ---------------------------------------------------------------- shapes


@dataclass(frozen=True)
class StarShape:
    """Polar description r = Phi(theta_j) of a star-shaped particle G0,
    sampled at n_theta equispaced angles theta_j = 2 pi j / n_theta."""

    radii: np.ndarray
    name: str = "polygon"
    param: float = float("nan")

    def __post_init__(self):
        r = _frozen(self.radii, float)
        object.__setattr__(self, "radii", r)
        if r.ndim != 1 or r.size == 0 or r.size % 8:
            raise ArgumentError("number of angular samples must be a positive multiple of 8")
        if not np.all(np.isfinite(r)) or np.any(r <= 0):
            raise ArgumentError("star-shape radii must be finite and positive")

    @property
    def n_theta(self) -> int:
        return self.radii.size

    @property
    def angles(self) -> np.ndarray:
        return 2.0 * np.pi * np.arange(self.n_theta) / self.n_theta

    @classmethod
    def disk(cls, radius: float = 1.0, n_theta: int = 64) -> "StarShape":
        return cls(np.full(n_theta, float(radius)), "disk", float(radius))

    @classmethod
    def square(cls, half_width: float = 1.0, n_theta: int = 64) -> "StarShape":
        r = half_width * _square_radius(n_theta)
        return cls(r, "square", float(half_width))

    @classmethod
    def from_function(cls, phi: Callable[[np.ndarray], np.ndarray], n_theta: int = 64,
                      name: str = "polygon") -> "StarShape":
        th = 2.0 * np.pi * np.arange(n_theta) / n_theta
        return cls(np.asarray(phi(th), float), name)

    def resampled(self, n_theta: int) -> "StarShape":
        if n_theta == self.n_theta:
            return self
        if self.name == "disk":
            return StarShape.disk(self.param, n_theta)
        if self.name == "square":
            return StarShape.square(self.param, n_theta)
        th_old = self.angles
        th = 2.0 * np.pi * np.arange(n_theta) / n_theta
        r = np.interp(th, th_old, self.radii, period=2.0 * np.pi)
        return StarShape(r, self.name)

    def points(self, scale: float = 1.0) -> np.ndarray:
        c, s = _unit_circle(self.n_theta)
        return scale * self.radii[:, None] * np.column_stack([c, s])

    def polygon_area(self) -> float:
        p = self.points()
        q = np.roll(p, -1, axis=0)
        return 0.5 * float(np.sum(p[:, 0] * q[:, 1] - q[:, 0] * p[:, 1]))

    def polygon_perimeter(self) -> float:
        p = self.points()
        return float(np.sum(np.linalg.norm(np.roll(p, -1, axis=0) - p, axis=1)))

    @property
    def area(self) -> float:
        """|G0|; exact for disks and squares, polygonal otherwise."""
        if self.name == "disk":
            return np.pi * self.param ** 2
        if self.name == "square":
            return 4.0 * self.param ** 2
        return self.polygon_area()

    @property
    def perimeter(self) -> float:
        """|dG0|; exact for disks and squares, polygonal otherwise."""
        if self.name == "disk":
            return 2.0 * np.pi * self.param
        if self.name == "square":
            return 8.0 * self.param
        return self.polygon_perimeter()


def _unit_circle(n: int):
    """cos/sin at 2 pi j / n, built from the first octant so that the samples
    are exactly invariant under the symmetries of the square."""
    if n % 8:
        raise ArgumentError("n must be divisible by 8")
    m = n // 8
    t = 2.0 * np.pi * np.arange(m + 1) / n
    co, si = np.cos(t), np.sin(t)
    co[m] = si[m] = np.sqrt(0.5)
    return _octant_extend(co, si, m)


def _square_radius(n: int) -> np.ndarray:
    """1 / max(|cos|, |sin|) at the n equispaced angles."""
    x, y = _square_boundary(n, 1.0)
    return np.hypot(x, y)


def _square_boundary(n: int, half: float):
    """Intersection of the rays 2 pi j / n with the square of half width `half`."""
    m = n // 8
    t = 2.0 * np.pi * np.arange(m + 1) / n
    y = half * np.tan(t)
    y[0] = 0.0
    y[m] = half
    x = np.full(m + 1, half)
    return _octant_extend(x, y, m)


def _octant_extend(x0, y0, m):
    """Extend first-octant samples (k = 0..m) to the full circle using exact
    reflections and quarter turns."""
    qx = np.concatenate([x0[:m + 1], y0[m - 1:0:-1]])
    qy = np.concatenate([y0[:m + 1], x0[m - 1:0:-1]])
    # quarter turn (x, y) -> (-y, x) is exact in floating point
    xs, ys = [qx], [qy]
    for _ in range(3):
        xs.append(-ys[-1])
        ys.append(xs[-2].copy())
    return np.concatenate(xs), np.concatenate(ys)


# ---------------------------------------------------------------- meshes


@dataclass(frozen=True)
class TriMesh:
    nodes: np.ndarray
    tris: np.ndarray
    edges: np.ndarray
    tags: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "nodes", _frozen(self.nodes, float).reshape(-1, 2))
        object.__setattr__(self, "tris", _frozen(self.tris, np.int64).reshape(-1, 3))
        object.__setattr__(self, "edges", _frozen(self.edges, np.int64).reshape(-1, 2))
        object.__setattr__(self, "tags", _frozen(self.tags, np.int64).reshape(-1))
        if self.tags.size != self.edges.shape[0]:
            raise MeshError("one tag per boundary edge required")
        x = self.nodes[self.tris]
        d1 = x[:, 1] - x[:, 0]
        d2 = x[:, 2] - x[:, 0]
        area = 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
        object.__setattr__(self, "areas", _frozen(area, float))
        lump = np.zeros(len(self.nodes))
        np.add.at(lump, self.tris.ravel(), np.repeat(area / 3.0, 3))
        object.__setattr__(self, "lumped", _frozen(lump, float))

    # basic geometry
    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_tris(self) -> int:
        return self.tris.shape[0]

    @property
    def area(self) -> float:
        return float(np.sum(self.areas))

    def has_tag(self, tag: Tag) -> bool:
        return bool(np.any(self.tags == int(tag)))

    def tagged_edges(self, tag: Tag) -> np.ndarray:
        return self.edges[self.tags == int(tag)]

    def edge_lengths(self, tag: Tag | None = None) -> np.ndarray:
        e = self.edges if tag is None else self.tagged_edges(tag)
        return np.linalg.norm(self.nodes[e[:, 1]] - self.nodes[e[:, 0]], axis=1)

    def boundary_length(self, tag: Tag) -> float:
        return float(np.sum(self.edge_lengths(tag)))

    def tag_nodes(self, tag: Tag) -> np.ndarray:
        return np.unique(self.tagged_edges(tag).ravel())

    def boundary_nodes(self) -> np.ndarray:
        return np.unique(self.edges.ravel())

    def boundary_lumped(self, tag: Tag) -> np.ndarray:
        """Trapezoid weights of the tagged boundary at every node."""
        e = self.tagged_edges(tag)
        L = self.edge_lengths(tag)
        b = np.zeros(self.n_nodes)
        np.add.at(b, e[:, 0], 0.5 * L)
        np.add.at(b, e[:, 1], 0.5 * L)
        return b

    def edge_normals(self, tag: Tag | None = None) -> np.ndarray:
        """Unit outward normals of boundary edges."""
        e = self.edges if tag is None else self.tagged_edges(tag)
        d = self.nodes[e[:, 1]] - self.nodes[e[:, 0]]
        n = np.column_stack([d[:, 1], -d[:, 0]])
        return n / np.linalg.norm(n, axis=1)[:, None]

    def gradients(self) -> np.ndarray:
        """Gradients of the three P1 basis functions on every triangle,
        shape (n_tris, 3, 2)."""
        x = self.nodes[self.tris]
        b = np.stack([x[:, 1, 1] - x[:, 2, 1], x[:, 2, 1] - x[:, 0, 1], x[:, 0, 1] - x[:, 1, 1]], axis=1)
        c = np.stack([x[:, 2, 0] - x[:, 1, 0], x[:, 0, 0] - x[:, 2, 0], x[:, 1, 0] - x[:, 0, 0]], axis=1)
        g = np.stack([b, c], axis=2)
        return g / (2.0 * self.areas)[:, None, None]

    def field_gradient(self, values) -> np.ndarray:
        """Piecewise-constant gradient of a nodal P1 field, shape (n_tris, 2)."""
        v = np.asarray(values, float)[self.tris]
        return np.einsum("tk,tkd->td", v, self.gradients())

    def interior_edges(self) -> np.ndarray:
        return _edge_census(self.tris)[0]

    def validate(self) -> None:
        """Raise MeshError unless the structural invariants hold."""
        if self.n_tris == 0:
            raise MeshError("empty mesh")
        if np.any(self.areas <= 0) or not np.all(np.isfinite(self.nodes)):
            raise MeshError(f"{int(np.sum(self.areas <= 0))} non-positive triangles")
        _, bnd = _edge_census(self.tris)
        a = {tuple(sorted(e)) for e in bnd.tolist()}
        b = [tuple(sorted(e)) for e in self.edges.tolist()]
        if len(set(b)) != len(b):
            raise MeshError("boundary edge listed twice")
        if a != set(b):
            raise MeshError("tagged edges do not match the topological boundary")
        if not set(np.unique(self.tags).tolist()) <= {0, 1, 2}:
            raise MeshError("unknown boundary tag")
        total = self.area
        if abs(np.sum(self.lumped) - total) > 1e-12 * abs(total):
            raise MeshError("lumped measures do not sum to the mesh area")

    def euler_characteristic(self) -> int:
        inner, bnd = _edge_census(self.tris)
        return self.n_nodes - (len(inner) + len(bnd)) + self.n_tris


def _edge_census(tris):
    """(interior edges, boundary edges oriented as in their triangle)."""
    e = np.concatenate([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]])
    key = np.sort(e, axis=1)
    _, inv, cnt = np.unique(key, axis=0, return_inverse=True, return_counts=True)
    inv = inv.ravel()
    c = cnt[inv]
    if np.any(c > 2):
        raise MeshError("non-manifold edge shared by more than two triangles")
    once = c == 1
    bnd = e[once]
    twice = np.flatnonzero(c == 2)
    _, first = np.unique(inv[twice], return_index=True)
    inner = key[twice[first]]
    order = np.lexsort((bnd[:, 1], bnd[:, 0]))
    return inner, bnd[order]


def _make_mesh(nodes, tris, tag_of_edge: Callable[[np.ndarray], np.ndarray], meta=None) -> TriMesh:
    tris = np.asarray(tris, np.int64)
    x = nodes[tris]
    d1 = x[:, 1] - x[:, 0]
    d2 = x[:, 2] - x[:, 0]
    area = 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
    flip = area < 0
    tris[flip] = tris[flip][:, [0, 2, 1]]
    scale = np.max(np.abs(area)) if area.size else 1.0
    if np.any(np.abs(area) <= 1e-14 * scale):
        raise MeshError("degenerate triangle produced")
    _, bnd = _edge_census(tris)
    mesh = TriMesh(nodes, tris, bnd, tag_of_edge(bnd), meta or {})
    return mesh


def geometric_layers(n_r: int, thickness_ratio: float) -> np.ndarray:
    """s_0 = 0 < ... < s_{n_r} = 1 with geometric spacing whose first step is
    `thickness_ratio` (uniform if that is already coarser than 1/n_r)."""
    if thickness_ratio >= 1.0 / n_r:
        return np.linspace(0.0, 1.0, n_r + 1)
    f = lambda q: (q - 1.0) / (q ** n_r - 1.0) - thickness_ratio
    lo, hi = 1.0 + 1e-12, 2.0
    while f(hi) > 0:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if f(mid) > 0:
            lo = mid
        else:
            hi = mid
    q = 0.5 * (lo + hi)
    s = (q ** np.arange(n_r + 1) - 1.0) / (q ** n_r - 1.0)
    s[-1] = 1.0
    return s


def build_cell_mesh(shape: StarShape, a: float, n_theta: int | None = None, n_r: int = 16) -> TriMesh:
    """Spider-web mesh of Y minus a*G0 with Y = (-1/2, 1/2)^2.

    a = 0 gives the full cell (no obstacle) meshed with a central fan.
    """
    n_theta = shape.n_theta if n_theta is None else int(n_theta)
    if n_theta % 8 or n_theta < 8:
        raise ArgumentError("n_theta must be a positive multiple of 8")
    if n_r < 2:
        raise ArgumentError("n_r must be at least 2")
    if not np.isfinite(a) or a < 0:
        raise GeometryError("hole scale must be nonnegative")
    shape = shape.resampled(n_theta)
    ox, oy = _square_boundary(n_theta, 0.5)
    rho = np.hypot(ox, oy)
    if a > 0:
        phi = a * shape.radii
        if np.max(phi) >= 0.5 or np.any(phi >= rho * (1 - 1e-9)):
            raise GeometryError(f"hole a*G0 (max radius {np.max(phi):.6g}) does not fit inside the unit cell")
        inner = shape.points(a)
        t = np.mean(phi) * 2.0 * np.pi / n_theta
        s = geometric_layers(n_r, t / np.mean(rho - phi))
        start = 0
    else:
        inner = np.zeros((n_theta, 2))
        s = np.linspace(0.0, 1.0, n_r + 1)
        start = 1
    outer = np.column_stack([ox, oy])
    layers = [inner + sk * (outer - inner) for sk in s[start:-1]] + [outer]
    nodes = np.concatenate(layers)
    N = n_theta
    L = len(layers)
    j = np.arange(N)
    jn = (j + 1) % N
    tris = []
    for k in range(L - 1):
        A, B = k * N + j, k * N + jn
        C, D = (k + 1) * N + jn, (k + 1) * N + j
        tris.append(np.column_stack([A, C, B]))
        tris.append(np.column_stack([A, D, C]))
    if a == 0:
        c = len(nodes)
        nodes = np.vstack([nodes, [[0.0, 0.0]]])
        tris.insert(0, np.column_stack([np.full(N, c), j, jn]))
    tris = np.concatenate(tris)
    n_inner = N if a > 0 else 0

    def tagger(edges):
        part = (edges[:, 0] < n_inner) & (edges[:, 1] < n_inner)
        return np.where(part, int(Tag.PARTICLE), int(Tag.OUTER))

    mesh = _make_mesh(nodes, tris, tagger, {"kind": "cell", "a": float(a), "n_theta": N, "n_r": n_r,
                                            "shape": shape.name})
    return mesh


def tile_perforated(cell: TriMesh, n_cells: int) -> TriMesh:
    """Copies of the cell scaled by eps = 1/n_cells tiling Omega = (0,1)^2."""
    if int(n_cells) != n_cells or n_cells < 1:
        raise ArgumentError("n_cells must be a positive integer")
    n = int(n_cells)
    V = cell.n_nodes
    part_nodes = np.zeros(V, bool)
    part_nodes[cell.tag_nodes(Tag.PARTICLE)] = True
    ij = np.array([(i, j) for j in range(n) for i in range(n)], float)
    # shift in cell units first so that shared interface nodes coincide bitwise
    X = (cell.nodes[None, :, :] + ij[:, None, :] + 0.5).reshape(-1, 2)
    tol = 1e-12
    key = np.rint(X / tol).astype(np.int64)
    _, first, inv = np.unique(key, axis=0, return_index=True, return_inverse=True)
    inv = inv.ravel()
    order = np.argsort(first, kind="stable")
    rank = np.empty_like(order)
    rank[order] = np.arange(order.size)
    new_index = rank[inv]
    merged = X[first[order]]
    # two distinct merged nodes within the tolerance would be ambiguous
    if merged.shape[0] > 1 and cKDTree(merged).query_pairs(tol * 10.0):
        raise MeshError("node merge ambiguity: distinct nodes closer than the merge tolerance")
    copies = np.repeat(np.arange(n * n), V)
    for c in range(n * n):
        g = new_index[copies == c]
        if np.unique(g).size != V:
            raise MeshError("node merge ambiguity inside one cell copy")
    tris = np.concatenate([new_index[c * V + cell.tris] for c in range(n * n)])
    pflag = np.zeros(merged.shape[0], bool)
    pflag[new_index[np.tile(part_nodes, n * n)]] = True
    nodes = merged / n

    def tagger(edges):
        part = pflag[edges[:, 0]] & pflag[edges[:, 1]]
        return np.where(part, int(Tag.PARTICLE), int(Tag.DIRICHLET))

    meta = dict(cell.meta)
    meta.update(kind="perforated", n_cells=n, eps=1.0 / n)
    mesh = _make_mesh(nodes, tris, tagger, meta)
    if mesh.tagged_edges(Tag.PARTICLE).shape[0] != n * n * cell.tagged_edges(Tag.PARTICLE).shape[0]:
        raise MeshError("particle edge count mismatch after tiling")
    return mesh


def build_plain_mesh(domain: Sequence, resolution, origin=(0.0, 0.0)) -> TriMesh:
    """domain = ("rect", w, h) or ("disk", R).

    rect: structured grid with alternating diagonals (resolution = cells per
    side, or a pair (nx, ny)); disk: rings with 8k nodes around a centre node.
    """
    kind = domain[0]
    if kind == "rect":
        _, w, h = domain
        if not (w > 0 and h > 0):
            raise ArgumentError("rectangle sides must be positive")
        nx, ny = (resolution, resolution) if np.isscalar(resolution) else resolution
        nx, ny = int(nx), int(ny)
        if nx < 2 or ny < 2:
            raise ArgumentError("resolution must be at least 2")
        xs = origin[0] + w * np.arange(nx + 1) / nx
        ys = origin[1] + h * np.arange(ny + 1) / ny
        xs[-1] = origin[0] + w
        ys[-1] = origin[1] + h
        X, Y = np.meshgrid(xs, ys)
        nodes = np.column_stack([X.ravel(), Y.ravel()])
        idx = lambda i, j: j * (nx + 1) + i
        tris = []
        for j in range(ny):
            for i in range(nx):
                a, b, c, d = idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1)
                if (i + j) % 2 == 0:
                    tris += [(a, b, c), (a, c, d)]
                else:
                    tris += [(a, b, d), (b, c, d)]
        meta = {"kind": "rect", "nx": nx, "ny": ny, "w": float(w), "h": float(h),
                "origin": (float(origin[0]), float(origin[1]))}
    elif kind == "disk":
        R = float(domain[1])
        if not R > 0:
            raise ArgumentError("disk radius must be positive")
        nr = int(resolution)
        if nr < 2:
            raise ArgumentError("resolution must be at least 2")
        pts = [np.array([[origin[0], origin[1]]])]
        start = [0]
        for k in range(1, nr + 1):
            c, s = _unit_circle(8 * k)
            pts.append(np.column_stack([origin[0] + R * k / nr * c, origin[1] + R * k / nr * s]))
            start.append(start[-1] + (1 if k == 1 else 8 * (k - 1)))
        nodes = np.concatenate(pts)
        tris = [(0, 1 + j, 1 + (j + 1) % 8) for j in range(8)]
        for k in range(1, nr):
            nA, nB = 8 * k, 8 * (k + 1)
            oA, oB = start[k], start[k + 1]
            i = j = 0
            while i < nA or j < nB:
                if i < nA and (j == nB or (i + 1) * nB < (j + 1) * nA):
                    tris.append((oA + i % nA, oB + j % nB, oA + (i + 1) % nA))
                    i += 1
                else:
                    tris.append((oA + i % nA, oB + j % nB, oB + (j + 1) % nB))
                    j += 1
        meta = {"kind": "disk", "R": R, "rings": nr, "origin": (float(origin[0]), float(origin[1]))}
    else:
        raise ArgumentError(f"unknown domain kind {kind!r}")
    return _make_mesh(nodes, np.array(tris), lambda e: np.full(len(e), int(Tag.DIRICHLET)), meta)


# ---------------------------------------------------------------- deformation


@dataclass(frozen=True)
class DeformationField:
    """Nodal displacement field theta with an optional analytic descriptor."""

    values: np.ndarray
    kind: str = "nodal"
    params: tuple = ()

    def __post_init__(self):
        v = _frozen(self.values, float).reshape(-1, 2)
        if not np.all(np.isfinite(v)):
            raise ArgumentError("deformation field must be finite")
        object.__setattr__(self, "values", v)

    @staticmethod
    def evaluate(kind, params, x):
        x = np.asarray(x, float).reshape(-1, 2)
        if kind == "translation":
            return np.tile(np.asarray(params, float), (x.shape[0], 1))
        if kind == "rotation":
            cx, cy, om = params
            return om * np.column_stack([-(x[:, 1] - cy), x[:, 0] - cx])
        if kind == "radial":
            cx, cy, k = params
            return k * (x - np.array([cx, cy]))
        raise ArgumentError(f"no analytic form for {kind!r}")

    def at(self, x) -> np.ndarray:
        return self.evaluate(self.kind, self.params, x)

    @classmethod
    def translation(cls, mesh: TriMesh, vec) -> "DeformationField":
        p = (float(vec[0]), float(vec[1]))
        return cls(cls.evaluate("translation", p, mesh.nodes), "translation", p)

    @classmethod
    def rotation(cls, mesh: TriMesh, center=(0.0, 0.0), omega: float = 1.0) -> "DeformationField":
        p = (float(center[0]), float(center[1]), float(omega))
        return cls(cls.evaluate("rotation", p, mesh.nodes), "rotation", p)

    @classmethod
    def radial_stretch(cls, mesh: TriMesh, center=(0.0, 0.0), k: float = 1.0) -> "DeformationField":
        p = (float(center[0]), float(center[1]), float(k))
        return cls(cls.evaluate("radial", p, mesh.nodes), "radial", p)

    @classmethod
    def from_function(cls, mesh: TriMesh, fn) -> "DeformationField":
        return cls(np.asarray(fn(mesh.nodes), float))

    def combine(self, alpha: float, other: "DeformationField", beta: float) -> "DeformationField":
        return DeformationField(alpha * self.values + beta * other.values)

    def lipschitz_bound(self, mesh: TriMesh) -> float:
        gx = mesh.field_gradient(self.values[:, 0])
        gy = mesh.field_gradient(self.values[:, 1])
        return float(np.max(np.sqrt(np.sum(gx ** 2 + gy ** 2, axis=1)))) if mesh.n_tris else 0.0


def deform_mesh(mesh: TriMesh, theta: DeformationField, tau: float) -> TriMesh:
    """Move nodes to x + tau*theta(x); connectivity and tags are kept."""
    if theta.values.shape != mesh.nodes.shape:
        raise ArgumentError("deformation field does not live on this mesh")
    nodes = mesh.nodes + tau * theta.values
    x = nodes[mesh.tris]
    d1 = x[:, 1] - x[:, 0]
    d2 = x[:, 2] - x[:, 0]
    area = 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
    if np.any(area <= 0):
        k = int(np.argmin(area))
        raise DeformationError(f"triangle {k} inverted (signed area {area[k]:.3e}) at tau={tau}",
                               worst_triangle=k, worst_area=float(area[k]))
    meta = dict(mesh.meta)
    meta["deformed"] = float(tau)
    return TriMesh(nodes, mesh.tris, mesh.edges, mesh.tags, meta)


# ---------------------------------------------------------------- quadrature


def integrate(mesh: TriMesh, field, region=DOMAIN) -> float:
    """Lumped nodal quadrature over the domain, trapezoid rule over a tag."""
    v = np.asarray(getattr(field, "values", field), float)
    if v.ndim == 0:
        v = np.full(mesh.n_nodes, float(v))
    if v.shape != (mesh.n_nodes,):
        raise ArgumentError("field does not live on this mesh")
    if isinstance(region, str):
        if region != DOMAIN:
            raise ArgumentError(f"unknown region {region!r}")
        return float(np.dot(v, mesh.lumped))
    tag = Tag(region)
    if not mesh.has_tag(tag):
        raise ArgumentError(f"tag {tag.name} absent from mesh")
    e = mesh.tagged_edges(tag)
    L = mesh.edge_lengths(tag)
    return float(np.sum(0.5 * L * (v[e[:, 0]] + v[e[:, 1]])))


# ---------------------------------------------------------------- text format


def write_trimesh(mesh: TriMesh, path) -> None:
    lines = ["TRIMESH v1", f"{mesh.n_nodes} {mesh.n_tris} {mesh.edges.shape[0]}"]
    lines += [f"{x:.17g} {y:.17g}" for x, y in mesh.nodes.tolist()]
    lines += [f"{i} {j} {k}" for i, j, k in mesh.tris.tolist()]
    lines += [f"{i} {j} {Tag(t).name}" for (i, j), t in zip(mesh.edges.tolist(), mesh.tags.tolist())]
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_trimesh(path) -> TriMesh:
    with open(path, encoding="ascii") as fh:
        rows = [ln.split() for ln in fh.read().splitlines() if ln.strip()]
    if not rows or " ".join(rows[0]) != "TRIMESH v1":
        raise MeshError("not a TRIMESH v1 file")
    try:
        nn, nt, ne = (int(t) for t in rows[1])
        body = rows[2:]
        nodes = np.array([[float(a), float(b)] for a, b in body[:nn]])
        tris = np.array([[int(a), int(b), int(c)] for a, b, c in body[nn:nn + nt]], np.int64)
        er = body[nn + nt:nn + nt + ne]
        edges = np.array([[int(a), int(b)] for a, b, _ in er], np.int64).reshape(-1, 2)
        tags = np.array([Tag[t].value for _, _, t in er], np.int64)
    except (ValueError, KeyError, IndexError) as exc:
        raise MeshError(f"malformed TRIMESH file: {exc}") from exc
    if len(body) != nn + nt + ne:
        raise MeshError("TRIMESH counts do not match the body")
    return TriMesh(nodes, tris, edges, tags)
