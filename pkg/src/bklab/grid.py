"""Uniform complex-plane grids, masked domains with discretized boundaries,
and the field/domain file formats.

Sampling convention: the square [-L, L]^2 is split into N x N cells of
side h = 2L/N and every field is sampled at cell centers
z_jk = (-L + (j+1/2)h) + i(-L + (k+1/2)h).  Arrays are indexed [iy, ix]
(row-major, y-outer), matching the BKFLD1 file layout.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import AliasingGuardError, BklabError, DomainError, GridError

__all__ = [
    "Grid", "PhaseParams", "Disk", "Polygon", "DomainSpec", "BeltResult",
    "make_grid", "make_domain", "boundary_belt",
    "save_field", "load_field", "save_domain", "load_domain",
]


@dataclass(frozen=True)
class Grid:
    """Uniform N x N grid of cell centers covering [-L, L]^2."""

    L: float
    N: int

    def __post_init__(self):
        if not (np.isfinite(self.L) and self.L > 0):
            raise GridError(f"half-width must be a positive number, got {self.L}")
        n = self.N
        if n < 8 or (n & (n - 1)) != 0:
            raise GridError(f"grid size must be a power of two >= 8, got {n}")

    @property
    def h(self) -> float:
        return 2.0 * self.L / self.N

    @property
    def cell_measure(self) -> float:
        return self.h * self.h

    @cached_property
    def axis(self) -> np.ndarray:
        """1D cell-center coordinates, shared by both axes."""
        return -self.L + (np.arange(self.N) + 0.5) * self.h

    @cached_property
    def X(self) -> np.ndarray:
        return np.broadcast_to(self.axis[None, :], (self.N, self.N)).copy()

    @cached_property
    def Y(self) -> np.ndarray:
        return np.broadcast_to(self.axis[:, None], (self.N, self.N)).copy()

    @cached_property
    def Z(self) -> np.ndarray:
        return self.X + 1j * self.Y

    def zeros(self) -> np.ndarray:
        return np.zeros((self.N, self.N), dtype=complex)

    def check_field(self, field: np.ndarray) -> np.ndarray:
        field = np.asarray(field)
        if field.shape != (self.N, self.N):
            raise GridError(
                f"field shape {field.shape} does not match grid {(self.N, self.N)}")
        return field

    def aliasing_guard(self) -> float:
        """Largest admissible tau: pi*N/(8 L^2)."""
        return np.pi * self.N / (8.0 * self.L * self.L)


@dataclass(frozen=True)
class PhaseParams:
    """Frequency tau and center z0 of the phase R = (z-z0)^2 + conj(z-z0)^2."""

    tau: float
    z0: complex

    def __post_init__(self):
        if not (np.isfinite(self.tau) and self.tau > 0):
            raise BklabError(f"tau must be positive, got {self.tau}")

    def validate_for(self, grid: Grid) -> "PhaseParams":
        guard = grid.aliasing_guard()
        if self.tau > guard * (1 + 1e-12):
            raise AliasingGuardError(
                f"tau={self.tau} exceeds the aliasing guard pi*N/(8*L^2)={guard:.6g} "
                f"for N={grid.N}, L={grid.L}")
        return self

    def phase_field(self, grid: Grid) -> np.ndarray:
        """R(z; z0) on the grid.  Real by construction: the imaginary parts
        of (z-z0)^2 and (zbar-z0bar)^2 cancel exactly."""
        dx = grid.X - self.z0.real
        dy = grid.Y - self.z0.imag
        return 2.0 * (dx * dx - dy * dy)

    def weight(self, grid: Grid, sign: int = +1) -> np.ndarray:
        """e^{i sign tau R}; unimodular since R is real."""
        return np.exp(1j * (sign * self.tau) * self.phase_field(grid))


@dataclass(frozen=True)
class Disk:
    center: complex
    radius: float

    def to_dict(self) -> dict:
        return {"type": "disk",
                "center": [self.center.real, self.center.imag],
                "radius": self.radius}


@dataclass(frozen=True)
class Polygon:
    vertices: tuple  # of complex

    def to_dict(self) -> dict:
        return {"type": "polygon",
                "vertices": [[v.real, v.imag] for v in self.vertices]}


def _shape_from_dict(d: dict):
    kind = d.get("type")
    if kind == "disk":
        return Disk(complex(d["center"][0], d["center"][1]), float(d["radius"]))
    if kind == "polygon":
        return Polygon(tuple(complex(u, v) for u, v in d["vertices"]))
    raise DomainError(f"unknown shape type {kind!r}")


class DomainSpec:
    """A masked domain: boolean cell mask, positively oriented boundary
    polyline with outward complex normals, boundary quadrature nodes with
    arclength weights, and the exact distance from every cell center to
    the polyline.

    Immutable after construction; safe to share across threads.
    """

    def __init__(self, grid: Grid, shape, mask, vertices, nodes, normals,
                 weights, distance):
        self.grid = grid
        self.shape = shape
        self.mask = mask
        self.vertices = vertices          # polyline vertices, closed implicitly
        self.nodes = nodes                # quadrature nodes (complex)
        self.normals = normals            # outward complex normal per node
        self.weights = weights            # arclength weight per node
        self.distance = distance          # per-cell distance to the polyline
        self.perimeter = float(weights.sum())
        for a in ("mask", "vertices", "nodes", "normals", "weights", "distance"):
            getattr(self, a).setflags(write=False)

    @property
    def measure(self) -> float:
        return self.grid.cell_measure * int(self.mask.sum())

    @property
    def n_cells(self) -> int:
        return int(self.mask.sum())

    def interior_mask(self, margin: float) -> np.ndarray:
        """Masked cells at least `margin` away from the boundary polyline."""
        return self.mask & (self.distance > margin)

    def restrict(self, field: np.ndarray) -> np.ndarray:
        """chi_Omega * field, zero-extended outside the mask."""
        out = np.zeros_like(np.asarray(field, dtype=complex))
        out[self.mask] = np.asarray(field, dtype=complex)[self.mask]
        return out

    def sample_trace(self, fn) -> np.ndarray:
        """Evaluate a callable trace at the quadrature nodes."""
        return np.asarray(fn(self.nodes), dtype=complex)

    def node_arclength(self) -> np.ndarray:
        """Cumulative arclength coordinate of each quadrature node."""
        return np.cumsum(self.weights) - 0.5 * self.weights

    def save(self, path) -> None:
        save_domain(path, self)


@dataclass(frozen=True)
class BeltResult:
    mask: np.ndarray
    measure: float


def make_grid(L: float, N: int) -> Grid:
    return Grid(float(L), int(N))


def make_domain(grid: Grid, shape) -> DomainSpec:
    """Build the mask, boundary polyline, quadrature and distance field.

    Disk boundaries use the circumscribed (tangent) regular polygon: its
    edge midpoints lie exactly on the circle, so quadrature nodes sit on
    the true boundary with exact radial normals.
    """
    if isinstance(shape, dict):
        shape = _shape_from_dict(shape)
    if isinstance(shape, Disk):
        return _make_disk(grid, shape)
    if isinstance(shape, Polygon):
        return _make_polygon(grid, shape)
    raise DomainError(f"unsupported shape {shape!r}")


def _node_target(grid: Grid, perimeter: float) -> int:
    return max(64, int(np.ceil(8.0 * perimeter / grid.h)))


def _make_disk(grid: Grid, disk: Disk) -> DomainSpec:
    c, r = disk.center, disk.radius
    if not (r > 0):
        raise DomainError(f"disk radius must be positive, got {r}")
    if max(abs(c.real), abs(c.imag)) + r >= grid.L:
        raise DomainError("disk is not strictly inside the grid square")
    M = _node_target(grid, 2 * np.pi * r)
    # circumscribed M-gon: vertices at radius r/cos(pi/M), edge midpoints on the circle
    half = np.pi / M
    rv = r / np.cos(half)
    th_v = 2 * half * np.arange(M)
    vertices = c + rv * np.exp(1j * th_v)
    th_n = th_v + half
    nodes = c + r * np.exp(1j * th_n)
    normals = np.exp(1j * th_n)
    weights = np.full(M, 2 * r * np.tan(half))
    mask = np.abs(grid.Z - c) < r
    if not mask.any():
        raise DomainError("disk does not contain any cell center")
    distance = _distance_regular_polygon(grid, vertices)
    return DomainSpec(grid, disk, mask, vertices, nodes, normals, weights, distance)


def _distance_regular_polygon(grid: Grid, verts: np.ndarray) -> np.ndarray:
    """Exact distance to a regular polygon boundary: the nearest edge lies
    in the angular sector of the point, so five candidate edges suffice."""
    M = len(verts)
    c = verts.mean()
    base = np.angle(verts[0] - c)
    sector = 2 * np.pi / M
    z = grid.Z.ravel()
    th = np.angle(z - c) - base
    j = np.floor(th / sector).astype(np.int64)
    idx = (j[:, None] + np.arange(-2, 3)[None, :]) % M
    a = verts[idx]
    b = verts[(idx + 1) % M]
    d = _segments_distance(z[:, None], a, b)
    return d.min(axis=1).reshape(grid.N, grid.N)


def _make_polygon(grid: Grid, poly: Polygon) -> DomainSpec:
    verts = np.asarray(poly.vertices, dtype=complex)
    if verts.size < 3:
        raise DomainError("polygon needs at least three vertices")
    area2 = float(np.sum(verts.real * np.roll(verts, -1).imag
                         - np.roll(verts, -1).real * verts.imag))
    if abs(area2) < 1e-14:
        raise DomainError("degenerate polygon (zero area)")
    if area2 < 0:  # enforce positive orientation
        verts = verts[::-1]
        poly = Polygon(tuple(verts))
    if np.max(np.abs(np.concatenate([verts.real, verts.imag]))) >= grid.L:
        raise DomainError("polygon is not strictly inside the grid square")
    edges = np.stack([verts, np.roll(verts, -1)], axis=1)
    lens = np.abs(edges[:, 1] - edges[:, 0])
    if np.any(lens == 0):
        raise DomainError("degenerate polygon (repeated vertex)")
    perimeter = float(lens.sum())
    target = _node_target(grid, perimeter)
    nodes, normals, weights = [], [], []
    for (a, b), ln in zip(edges, lens):
        k = max(1, int(np.ceil(target * ln / perimeter)))
        t = (np.arange(k) + 0.5) / k
        nodes.append(a + (b - a) * t)
        tang = (b - a) / ln
        normals.append(np.full(k, -1j * tang))
        weights.append(np.full(k, ln / k))
    nodes = np.concatenate(nodes)
    normals = np.concatenate(normals)
    weights = np.concatenate(weights)
    mask = _points_in_polygon(grid.Z, verts)
    if not mask.any():
        raise DomainError("polygon does not contain any cell center")
    distance = _distance_to_polyline(grid, verts)
    return DomainSpec(grid, poly, mask, verts, nodes, normals, weights, distance)


def _points_in_polygon(Z: np.ndarray, verts: np.ndarray) -> np.ndarray:
    """Even-odd crossing test, vectorized over the grid."""
    px, py = Z.real, Z.imag
    inside = np.zeros(Z.shape, dtype=bool)
    n = len(verts)
    for i in range(n):
        ax, ay = verts[i].real, verts[i].imag
        bx, by = verts[(i + 1) % n].real, verts[(i + 1) % n].imag
        crosses = (ay > py) != (by > py)
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = ax + (py - ay) * (bx - ax) / (by - ay)
        inside ^= crosses & (px < xint)
    return inside


def _distance_to_polyline(grid: Grid, verts: np.ndarray) -> np.ndarray:
    """Exact distance from every cell center to the closed polyline.

    Polygons stay small (tens of edges), so a chunked exact scan with a
    running minimum is cheap and allocation-safe.
    """
    a = verts
    b = np.roll(verts, -1)
    z = grid.Z.ravel()
    dmin = np.full(z.size, np.inf)
    chunk = max(1, int(2e6 // max(1, a.size)))
    for s in range(0, z.size, chunk):
        d = _segments_distance(z[s:s + chunk, None], a[None, :], b[None, :])
        dmin[s:s + chunk] = d.min(axis=1)
    return dmin.reshape(grid.N, grid.N)


def _segments_distance(z, a, b):
    """Pointwise |z - nearest point of segment [a, b]| (broadcasting)."""
    ab = b - a
    ab2 = np.maximum(np.abs(ab) ** 2, 1e-300)
    t = ((z - a) * np.conj(ab)).real / ab2
    t = np.clip(t, 0.0, 1.0)
    return np.abs(z - (a + t * ab))


def boundary_belt(domain: DomainSpec, eps: float) -> BeltResult:
    """Masked cells strictly within eps of the boundary polyline, and the
    measure of that belt."""
    if eps < 0:
        raise DomainError(f"belt width must be nonnegative, got {eps}")
    m = domain.mask & (domain.distance < eps)
    return BeltResult(m, domain.grid.cell_measure * int(m.sum()))


# ---------------------------------------------------------------------------
# file formats

_MAGIC = "BKFLD1"


def save_field(path, field: np.ndarray, grid: Grid) -> None:
    """BKFLD1: ASCII header 'BKFLD1 N L\\n', then N^2 little-endian f64
    (re, im) pairs, row-major, y-outer."""
    field = grid.check_field(field).astype(complex)
    with open(path, "wb") as f:
        f.write(f"{_MAGIC} {grid.N} {grid.L!r}\n".encode("ascii"))
        f.write(np.ascontiguousarray(field, dtype="<c16").tobytes())


def load_field(path) -> tuple[np.ndarray, Grid]:
    with open(path, "rb") as f:
        header = f.readline().decode("ascii").split()
        if len(header) != 3 or header[0] != _MAGIC:
            raise BklabError(f"{path}: not a {_MAGIC} field file")
        N, L = int(header[1]), float(header[2])
        data = f.read()
    grid = Grid(L, N)
    expected = 16 * N * N
    if len(data) != expected:
        raise BklabError(f"{path}: payload is {len(data)} bytes, expected {expected}")
    field = np.frombuffer(data, dtype="<c16").reshape(N, N).astype(complex)
    return field, grid


def save_domain(path, domain: DomainSpec) -> None:
    doc = {
        "version": 1,
        "grid": {"L": domain.grid.L, "N": domain.grid.N},
        "shape": domain.shape.to_dict(),
    }
    with open(path, "w") as f:
        json.dump(doc, f, indent=2, sort_keys=True)
        f.write("\n")


def load_domain(path) -> DomainSpec:
    with open(path) as f:
        doc = json.load(f)
    known = {"version", "grid", "shape"}
    extra = set(doc) - known
    if extra:
        raise BklabError(f"{path}: unknown keys {sorted(extra)}")
    if doc.get("version") != 1:
        raise BklabError(f"{path}: unsupported version {doc.get('version')!r}")
    grid = Grid(float(doc["grid"]["L"]), int(doc["grid"]["N"]))
    return make_domain(grid, _shape_from_dict(doc["shape"]))
