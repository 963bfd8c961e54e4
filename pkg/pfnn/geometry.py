"""
Unit-disc geometry: polar points, the boundary circle grid and tensor polar grids.

All types are frozen after construction. Angles are normalized to [0, 2π).
"""

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

TWO_PI = 2.0 * math.pi

# Points with r above 1 - BOUNDARY_SNAP are treated as lying on the circle.
BOUNDARY_SNAP = 1e-12

# Angular tolerance for matching an angle to a boundary grid node.
NODE_MATCH_TOL = 1e-12


def normalize_angle(theta):
    """Map angle(s) into [0, 2π)."""
    wrapped = np.mod(theta, TWO_PI)
    if np.ndim(wrapped) == 0:
        value = float(wrapped)
        return 0.0 if value >= TWO_PI else value
    return np.where(wrapped >= TWO_PI, 0.0, wrapped)


def angle_difference(a, b):
    """Shortest signed angle a - b on the circle, in (-π, π]."""
    d = np.mod(np.asarray(a) - np.asarray(b) + math.pi, TWO_PI) - math.pi
    d = np.where(d == -math.pi, math.pi, d)
    return float(d) if np.ndim(d) == 0 else d


@dataclass(frozen=True)
class PolarPoint:
    """A point (r, theta) of the closed unit disc."""
    r: float
    theta: float

    def __post_init__(self):
        r = float(self.r)
        if not math.isfinite(r) or r < 0.0 or r > 1.0 + BOUNDARY_SNAP:
            raise ValueError(f"Radius must lie in [0, 1], got {self.r}")
        if not math.isfinite(float(self.theta)):
            raise ValueError(f"Angle must be finite, got {self.theta}")
        object.__setattr__(self, "r", min(r, 1.0))
        object.__setattr__(self, "theta", normalize_angle(float(self.theta)))

    @classmethod
    def from_cartesian(cls, x1: float, x2: float) -> "PolarPoint":
        return cls(math.hypot(x1, x2), math.atan2(x2, x1))

    @property
    def on_boundary(self) -> bool:
        return self.r >= 1.0 - BOUNDARY_SNAP


def to_cartesian(p: PolarPoint) -> tuple[float, float]:
    return (p.r * math.cos(p.theta), p.r * math.sin(p.theta))


def boundary_projection(p: PolarPoint) -> PolarPoint:
    """The boundary point x* = (1, θ) sharing the angle of x."""
    if p.r <= 0.0:
        raise ValueError("Boundary projection is undefined at the origin (r = 0)")
    return PolarPoint(1.0, p.theta)


def polar_distance(r1, t1, r2, t2):
    """
    Vectorized |x - y| for polar inputs.

    Uses (r1 - r2)² + 4 r1 r2 sin²(Δ/2), which stays accurate when the points nearly coincide.
    """
    half = 0.5 * (np.asarray(t1) - np.asarray(t2))
    s = np.sin(half)
    return np.sqrt((np.asarray(r1) - np.asarray(r2)) ** 2 + 4.0 * np.asarray(r1) * np.asarray(r2) * s * s)


def distance(a: PolarPoint, b: PolarPoint) -> float:
    return float(polar_distance(a.r, a.theta, b.r, b.theta))


@dataclass(frozen=True, eq=False)
class BoundaryGrid:
    """N uniformly spaced nodes θ_i = 2πi/N on the unit circle."""
    n_nodes: int
    thetas: np.ndarray = field(init=False, repr=False)
    d_theta: float = field(init=False)

    def __post_init__(self):
        if int(self.n_nodes) < 1:
            raise ValueError(f"Boundary grid needs at least one node, got {self.n_nodes}")
        n = int(self.n_nodes)
        object.__setattr__(self, "n_nodes", n)
        thetas = TWO_PI * np.arange(n) / n
        thetas.setflags(write=False)
        object.__setattr__(self, "thetas", thetas)
        object.__setattr__(self, "d_theta", TWO_PI / n)

    def node_index(self, theta: float):
        """Index of the node at angle theta, or None when theta falls between nodes."""
        t = normalize_angle(theta)
        k = int(round(t / self.d_theta)) % self.n_nodes
        if abs(angle_difference(t, self.thetas[k])) <= NODE_MATCH_TOL:
            return k
        return None

    def node_indices(self, thetas) -> np.ndarray:
        """Vectorized node_index; -1 marks off-node angles."""
        t = normalize_angle(np.asarray(thetas, dtype=float))
        k = np.rint(t / self.d_theta).astype(int) % self.n_nodes
        hit = np.abs(angle_difference(t, self.thetas[k])) <= NODE_MATCH_TOL
        return np.where(hit, k, -1)

    def points(self) -> list[PolarPoint]:
        return [PolarPoint(1.0, t) for t in self.thetas]

    def refined(self, factor: int) -> "BoundaryGrid":
        return BoundaryGrid(self.n_nodes * int(factor))


class Placement(str, Enum):
    ENDPOINT = "endpoint"  # r_i = i/M_r, i = 1..M_r (last row is the boundary)
    CENTER = "center"      # r_i = (i - 1/2)/M_r, strictly interior


@dataclass(frozen=True, eq=False)
class DiscGrid:
    """Tensor polar grid radii × thetas; r = 0 is never a node."""
    radii: np.ndarray
    thetas: np.ndarray
    d_r: float
    d_theta: float

    def __post_init__(self):
        radii = np.array(self.radii, dtype=float)
        thetas = np.array(self.thetas, dtype=float)
        if radii.ndim != 1 or thetas.ndim != 1 or radii.size == 0 or thetas.size == 0:
            raise ValueError("Disc grid needs non-empty 1-D radii and thetas")
        if np.any(radii <= 0.0) or np.any(radii > 1.0 + BOUNDARY_SNAP):
            raise ValueError("Disc grid radii must lie in (0, 1]")
        if np.any(np.diff(radii) <= 0.0):
            raise ValueError("Disc grid radii must be strictly increasing")
        if self.d_r <= 0.0 or self.d_theta <= 0.0:
            raise ValueError("Disc grid steps must be positive")
        radii = np.minimum(radii, 1.0)
        thetas = normalize_angle(thetas)
        radii.setflags(write=False)
        thetas.setflags(write=False)
        object.__setattr__(self, "radii", radii)
        object.__setattr__(self, "thetas", thetas)
        object.__setattr__(self, "d_r", float(self.d_r))
        object.__setattr__(self, "d_theta", float(self.d_theta))

    @classmethod
    def uniform(cls, n_r: int, n_theta: int, placement: Placement | str = Placement.ENDPOINT) -> "DiscGrid":
        if n_r < 1 or n_theta < 1:
            raise ValueError(f"Disc grid sizes must be positive, got {n_r}x{n_theta}")
        placement = Placement(placement)
        d_r = 1.0 / n_r
        if placement == Placement.ENDPOINT:
            radii = d_r * np.arange(1, n_r + 1)
        else:
            radii = d_r * (np.arange(1, n_r + 1) - 0.5)
        thetas = TWO_PI * np.arange(n_theta) / n_theta
        return cls(radii=radii, thetas=thetas, d_r=d_r, d_theta=TWO_PI / n_theta)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.radii.size, self.thetas.size)

    @property
    def interior_rows(self) -> np.ndarray:
        return self.radii < 1.0 - BOUNDARY_SNAP

    @property
    def has_boundary_row(self) -> bool:
        return bool(self.radii[-1] >= 1.0 - BOUNDARY_SNAP)

    @property
    def is_uniform_in_theta(self) -> bool:
        n = self.thetas.size
        expected = TWO_PI * np.arange(n) / n
        return bool(np.allclose(self.thetas, expected, atol=1e-12)) and math.isclose(self.d_theta, TWO_PI / n)

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """(R, T) arrays of shape (M_r, M_θ)."""
        return np.meshgrid(self.radii, self.thetas, indexing="ij")

    def cartesian(self) -> tuple[np.ndarray, np.ndarray]:
        r, t = self.mesh()
        return r * np.cos(t), r * np.sin(t)

    def cell_weights(self) -> np.ndarray:
        """r·Δr·Δθ for every node, shape (M_r, M_θ)."""
        w = self.radii * self.d_r * self.d_theta
        return np.repeat(w[:, None], self.thetas.size, axis=1)

    def refined(self, factor_r: int, factor_theta: int) -> "DiscGrid":
        """Uniform grid with the same placement rule and factor-times more nodes per axis."""
        placement = Placement.ENDPOINT if self.has_boundary_row else Placement.CENTER
        return DiscGrid.uniform(self.radii.size * factor_r, self.thetas.size * factor_theta, placement)
