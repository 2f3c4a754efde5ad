"""Toroidal network geometry.

Radio units (RUs) sit on the vertices of a triangular lattice wrapped on a
torus; the location tiles are the triangular faces of that lattice.  All
distances are in km and use the torus metric (minimum over periodic images).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np


class Point2D(NamedTuple):
    x: float
    y: float


def _as_xy(p) -> np.ndarray:
    """Coerce a Point2D / tuple / array into a float array of shape (..., 2)."""
    a = np.asarray(p, dtype=float)
    if a.shape[-1] != 2:
        raise ValueError(f"expected 2-D coordinates, got shape {a.shape}")
    return a


@dataclass(frozen=True)
class TorusMap:
    """Periodic wrap of the plane by the lattice spanned by n1*b1 and n2*b2."""

    b1: Point2D
    b2: Point2D
    n1: int
    n2: int

    def __post_init__(self):
        if self.n1 < 1 or self.n2 < 1:
            raise ValueError("replication counts must be positive")
        if abs(np.linalg.det(self.span)) <= 0:
            raise ValueError("basis vectors must be linearly independent")

    @property
    def span(self) -> np.ndarray:
        """2x2 matrix whose columns are the torus periods T1=n1*b1, T2=n2*b2."""
        return np.column_stack(
            [self.n1 * np.asarray(self.b1), self.n2 * np.asarray(self.b2)]
        )

    @property
    def area(self) -> float:
        return abs(np.linalg.det(self.span))

    def fractional(self, p) -> np.ndarray:
        """Coordinates of p in the period basis, wrapped into [0, 1)^2."""
        frac = _as_xy(p) @ np.linalg.inv(self.span).T
        return frac - np.floor(frac)

    def wrap(self, p) -> np.ndarray:
        """Map p to its representative inside the fundamental domain."""
        return self.fractional(p) @ self.span.T

    def distance(self, p, q) -> float:
        return float(self.distances(p, q)[0])

    def distances(self, p, q) -> np.ndarray:
        """Torus distance between p (n,2) and q (2,), elementwise over p, (n,).

        Both arguments are wrapped first, so the 3x3 block of periodic images
        is always sufficient.
        """
        d = self.wrap(p) - self.wrap(q)
        d = d.reshape(-1, 2)
        shifts = np.array(
            [[i, j] for i in (-1, 0, 1) for j in (-1, 0, 1)], dtype=float
        ) @ self.span.T
        dx = d[:, :1] + shifts[None, :, 0]
        dy = d[:, 1:] + shifts[None, :, 1]
        return np.sqrt(np.min(dx * dx + dy * dy, axis=1))

    def uniform_points(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """n i.i.d. uniform points on the torus, shape (n, 2)."""
        return rng.random((n, 2)) @ self.span.T


@dataclass(frozen=True)
class LocationTile:
    """One equilateral-triangle location tile (a face of the RU lattice)."""

    id: int
    vertices: np.ndarray  # (3, 2), representative (unwrapped) coordinates
    side: float

    def __post_init__(self):
        v = self.vertices
        d = [np.linalg.norm(v[i] - v[j]) for i, j in ((0, 1), (1, 2), (0, 2))]
        if max(abs(x - self.side) for x in d) > 1e-9 * self.side:
            raise ValueError(f"tile {self.id} is not equilateral with side {self.side}")

    @property
    def centroid(self) -> Point2D:
        return Point2D(*self.vertices.mean(axis=0))

    def sample_point(self, rng: np.random.Generator, n: int = 1) -> np.ndarray:
        """n i.i.d. uniform points inside the tile, shape (n, 2)."""
        a = rng.random((n, 2))
        flip = a.sum(axis=1) > 1.0
        a[flip] = 1.0 - a[flip]
        v = self.vertices
        return v[0] + a[:, :1] * (v[1] - v[0]) + a[:, 1:] * (v[2] - v[0])

    def contains(self, p, tol: float = 0.0) -> bool:
        """Point-in-triangle test in representative coordinates."""
        v = self.vertices
        m = np.column_stack([v[1] - v[0], v[2] - v[0]])
        a, b = np.linalg.solve(m, _as_xy(p) - v[0])
        return a >= -tol and b >= -tol and a + b <= 1.0 + tol


@dataclass(frozen=True)
class PositionGrid:
    """Discrete position hypotheses for one tile, with a probability mass per point."""

    points: np.ndarray   # (n, 2)
    weights: np.ndarray  # (n,), nonnegative, sums to 1
    torus: TorusMap

    def __post_init__(self):
        if len(self.points) != len(self.weights) or len(self.points) == 0:
            raise ValueError("grid points and weights must be nonempty and aligned")
        if np.any(self.weights < 0) or abs(self.weights.sum() - 1.0) > 1e-12:
            raise ValueError("grid weights must be nonnegative and sum to 1")

    def __len__(self) -> int:
        return len(self.points)


@dataclass(frozen=True, eq=False)
class NetworkGeometry:
    torus: TorusMap
    ru_positions: np.ndarray  # (B, 2)
    antennas_per_ru: int
    tiles: tuple[LocationTile, ...]
    pathloss_exponent: float
    cutoff_distance: float
    _face_of: dict = field(repr=False, default_factory=dict)

    @property
    def n_ru(self) -> int:
        return len(self.ru_positions)

    @property
    def n_antennas(self) -> int:
        return self.n_ru * self.antennas_per_ru

    @property
    def n_tiles(self) -> int:
        return len(self.tiles)

    def to_dict(self) -> dict:
        """JSON-ready dump for the run manifest."""
        return {
            "torus": {
                "b1": list(self.torus.b1),
                "b2": list(self.torus.b2),
                "n1": self.torus.n1,
                "n2": self.torus.n2,
            },
            "ru_positions": self.ru_positions.tolist(),
            "antennas_per_ru": self.antennas_per_ru,
            "pathloss_exponent": self.pathloss_exponent,
            "cutoff_distance_km": self.cutoff_distance,
            "tiles": [
                {
                    "id": t.id,
                    "vertices": t.vertices.tolist(),
                    "centroid": list(t.centroid),
                }
                for t in self.tiles
            ],
        }


def build_network(side, n1, n2, antennas_per_ru, rho, d0) -> NetworkGeometry:
    """Build the toroidal triangular-lattice network.

    RUs sit at the n1*n2 lattice vertices (spacing = side); the 2*n1*n2
    triangular faces are the location tiles.  Tiles are numbered by sorting
    centroids by (x, then y): columns left to right, bottom to top.
    """
    if side <= 0 or d0 <= 0:
        raise ValueError("side and cutoff distance must be positive")
    if n1 < 1 or n2 < 1 or antennas_per_ru < 1:
        raise ValueError("n1, n2 and antennas_per_ru must be >= 1")

    b1 = Point2D(side, 0.0)
    b2 = Point2D(side / 2.0, side * np.sqrt(3.0) / 2.0)
    torus = TorusMap(b1, b2, n1, n2)

    lattice = lambda i, j: i * np.asarray(b1) + j * np.asarray(b2)
    ru_positions = np.array([lattice(i, j) for j in range(n2) for i in range(n1)])

    faces = []
    for j in range(n2):
        for i in range(n1):
            up = np.array([lattice(i, j), lattice(i + 1, j), lattice(i, j + 1)])
            down = np.array(
                [lattice(i + 1, j), lattice(i, j + 1), lattice(i + 1, j + 1)]
            )
            faces.append(((i, j, 0), up))
            faces.append(((i, j, 1), down))

    # raster order: sort faces by centroid x, then centroid y
    faces.sort(key=lambda f: (round(f[1].mean(axis=0)[0], 12), round(f[1].mean(axis=0)[1], 12)))
    tiles = tuple(
        LocationTile(id=u, vertices=verts, side=side) for u, (_, verts) in enumerate(faces)
    )
    face_of = {key: u for u, (key, _) in enumerate(faces)}

    return NetworkGeometry(
        torus=torus,
        ru_positions=ru_positions,
        antennas_per_ru=antennas_per_ru,
        tiles=tiles,
        pathloss_exponent=rho,
        cutoff_distance=d0,
        _face_of=face_of,
    )


def torus_distance(geometry: NetworkGeometry, p, q) -> float:
    return geometry.torus.distance(p, q)


def pathloss(geometry: NetworkGeometry, b: int, q) -> float:
    """Large-scale fading coefficient between position q and RU b, in (0, 1]."""
    d = geometry.torus.distance(geometry.ru_positions[b], q)
    return 1.0 / (1.0 + (d / geometry.cutoff_distance) ** geometry.pathloss_exponent)


def covariance_profile(geometry: NetworkGeometry, q) -> np.ndarray:
    """Diagonal of the channel covariance at position q, length F = B*M.

    Entry b*M + m equals the pathloss to RU b (constant within each RU's
    antenna block).
    """
    d = geometry.torus.distances(geometry.ru_positions, q)
    gains = 1.0 / (1.0 + (np.atleast_1d(d) / geometry.cutoff_distance) ** geometry.pathloss_exponent)
    return np.repeat(gains, geometry.antennas_per_ru)


def point_to_tile(geometry: NetworkGeometry, p) -> int:
    """Index of the unique tile containing p (edges resolve to the up-face)."""
    frac = geometry.torus.fractional(p) * (geometry.torus.n1, geometry.torus.n2)
    i, j = int(frac[0]), int(frac[1])
    fu, fv = frac[0] - i, frac[1] - j
    orientation = 0 if fu + fv <= 1.0 else 1
    return geometry._face_of[(i, j, orientation)]


def build_position_grid(tile: LocationTile, k: int, torus: TorusMap) -> PositionGrid:
    """Quantized position grid: centroids of the k^2 congruent sub-triangles.

    Uniform weights 1/k^2; k=1 degenerates to the tile centroid alone.
    """
    if k < 1:
        raise ValueError("subdivision order must be >= 1")
    v = tile.vertices
    e1 = (v[1] - v[0]) / k
    e2 = (v[2] - v[0]) / k
    pts = []
    for i in range(k):
        for j in range(k - i):
            pts.append(v[0] + (i + 1.0 / 3.0) * e1 + (j + 1.0 / 3.0) * e2)
    for i in range(k - 1):
        for j in range(k - 1 - i):
            pts.append(v[0] + (i + 2.0 / 3.0) * e1 + (j + 2.0 / 3.0) * e2)
    points = np.array(pts)
    weights = np.full(len(points), 1.0 / k**2)
    return PositionGrid(points=points, weights=weights, torus=torus)


def nearest_grid_point(grid: PositionGrid, q0) -> int:
    """Index of the grid point closest to q0 in the torus metric (ties: lowest index)."""
    return int(np.argmin(grid.torus.distances(grid.points, q0)))
