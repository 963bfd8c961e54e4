"""
Quadrature on the unit circle and the unit disc.

Three rules:
    BOUNDARY_RIEMANN   Σ f(θ_i)Δθ on the uniform boundary grid
    DISC_GRID_SUM      Σ v(r, θ) r Δr Δθ on a polar grid
    ADAPTIVE_SINGULAR  graded Gauss-Legendre panels in (r, θ), split at the singular
                       radius and angle and refined dyadically toward the split lines

The graded rule is built once per (split set, depth) and reused; integrands are
evaluated vectorized over the whole tensor rule.
"""

import math
from dataclasses import dataclass, replace
from enum import Enum
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .errors import QuadratureBudgetExceeded
from .geometry import BoundaryGrid, DiscGrid, PolarPoint, angle_difference

# Grading depth used at refinement level 1; each further level adds one dyadic layer.
BASE_DEPTH = 4

# Split points closer than this are merged.
SPLIT_MERGE_TOL = 1e-14


class QuadratureMode(str, Enum):
    BOUNDARY_RIEMANN = "boundary_riemann"
    DISC_GRID_SUM = "disc_grid_sum"
    ADAPTIVE_SINGULAR = "adaptive_singular"


@dataclass(frozen=True)
class QuadratureSpec:
    mode: QuadratureMode = QuadratureMode.ADAPTIVE_SINGULAR
    rel_tol: float = 1e-8
    max_subdivisions: int = 12
    order: int = 8

    def __post_init__(self):
        object.__setattr__(self, "mode", QuadratureMode(self.mode))
        if not (self.rel_tol > 0.0 and math.isfinite(self.rel_tol)):
            raise ValueError(f"rel_tol must be positive, got {self.rel_tol}")
        if int(self.max_subdivisions) < 1:
            raise ValueError(f"max_subdivisions must be >= 1, got {self.max_subdivisions}")
        if int(self.order) < 1:
            raise ValueError(f"Gauss-Legendre order must be >= 1, got {self.order}")

    def tightened(self, factor: float = 16.0) -> "QuadratureSpec":
        """Reference rule: rel_tol / factor with four extra refinement levels."""
        return replace(self, rel_tol=self.rel_tol / factor, max_subdivisions=self.max_subdivisions + 4)

    def with_mode(self, mode: QuadratureMode) -> "QuadratureSpec":
        return replace(self, mode=QuadratureMode(mode))

    def to_dict(self) -> dict:
        return {
            "mode": self.mode.value,
            "rel_tol": self.rel_tol,
            "max_subdivisions": self.max_subdivisions,
            "order": self.order,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "QuadratureSpec":
        return cls(
            mode=QuadratureMode(data.get("mode", QuadratureMode.ADAPTIVE_SINGULAR.value)),
            rel_tol=float(data.get("rel_tol", 1e-8)),
            max_subdivisions=int(data.get("max_subdivisions", 12)),
            order=int(data.get("order", 8)),
        )


# ============================================================================
# RIEMANN SUMS
# ============================================================================

def boundary_integrate(f: Callable, grid: BoundaryGrid) -> float:
    """Σ f(θ_i)Δθ; f is called once with the array of node angles."""
    values = np.broadcast_to(np.asarray(f(grid.thetas), dtype=float), grid.thetas.shape)
    if not np.all(np.isfinite(values)):
        raise ValueError("boundary_integrate: integrand is not finite at every node")
    return float(np.sum(values) * grid.d_theta)


def disc_integrate_grid(values: np.ndarray, grid: DiscGrid) -> float:
    values = np.asarray(values, dtype=float)
    if values.shape != grid.shape:
        raise ValueError(f"Field shape {values.shape} does not match grid {grid.shape}")
    if not np.all(np.isfinite(values)):
        raise ValueError("disc_integrate_grid: field contains non-finite values")
    return float(np.sum(values * grid.cell_weights()))


# ============================================================================
# GRADED GAUSS-LEGENDRE PANELS
# ============================================================================

@lru_cache(maxsize=32)
def gauss_legendre(order: int) -> tuple[np.ndarray, np.ndarray]:
    nodes, weights = np.polynomial.legendre.leggauss(order)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def _merge(points: Sequence[float]) -> list[float]:
    merged: list[float] = []
    for p in sorted(points):
        if not merged or p - merged[-1] > SPLIT_MERGE_TOL:
            merged.append(p)
    return merged


def _graded_toward(start: float, end: float, depth: int) -> list[float]:
    """Breakpoints on [start, end] clustering geometrically at `start` (works for end < start)."""
    length = end - start
    return [start] + [start + length * 2.0 ** (-k) for k in range(depth, -1, -1)]


def graded_breakpoints(a: float, b: float, singular: Sequence[float], depth: int) -> np.ndarray:
    """
    Panel breakpoints on [a, b], split at every singular point inside [a, b] and
    graded dyadically (depth layers) toward each singular point from both sides.
    """
    sing = _merge([s for s in singular if a - SPLIT_MERGE_TOL <= s <= b + SPLIT_MERGE_TOL])
    cuts = _merge([a, b] + [min(max(s, a), b) for s in sing])

    def is_singular(p: float) -> bool:
        return any(abs(p - s) <= SPLIT_MERGE_TOL for s in sing)

    points: list[float] = []
    for left, right in zip(cuts[:-1], cuts[1:]):
        left_sing, right_sing = is_singular(left), is_singular(right)
        if left_sing and right_sing:
            mid = 0.5 * (left + right)
            points += _graded_toward(left, mid, depth)
            points += _graded_toward(right, mid, depth)
        elif left_sing:
            points += _graded_toward(left, right, depth)
        elif right_sing:
            points += _graded_toward(right, left, depth)
        else:
            points += [left, right]
    return np.array(_merge(points))


def panel_rule(breakpoints: np.ndarray, order: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = gauss_legendre(order)
    a, b = breakpoints[:-1], breakpoints[1:]
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def graded_rule(a: float, b: float, singular: Sequence[float], depth: int, order: int) -> tuple[np.ndarray, np.ndarray]:
    return panel_rule(graded_breakpoints(a, b, singular, depth), order)


@dataclass(frozen=True, eq=False)
class TensorRule:
    """Polar tensor rule: radii × relative angles, weights include the Jacobian r."""
    radii: np.ndarray
    angles: np.ndarray
    weights: np.ndarray  # shape (len(radii), len(angles))

    @property
    def size(self) -> int:
        return self.weights.size


def singular_tensor_rule(radial_splits: Sequence[float], angular_splits: Sequence[float], depth: int, order: int) -> TensorRule:
    """Tensor rule on [0, 1] × [-π, π] graded toward the given radii and relative angles."""
    r, wr = graded_rule(0.0, 1.0, radial_splits, depth, order)
    t, wt = graded_rule(-math.pi, math.pi, angular_splits, depth, order)
    return TensorRule(radii=r, angles=t, weights=(r * wr)[:, None] * wt[None, :])


def disc_integrate_singular(
    f: Callable[[np.ndarray, np.ndarray], np.ndarray],
    singular_at: PolarPoint,
    spec: QuadratureSpec = QuadratureSpec(),
    extra_singular: Sequence[PolarPoint] = (),
) -> float:
    """
    ∫Ω f dy for an integrand f(r, θ) with at most logarithmic singularities.

    The rule is centered on the angle of `singular_at`; every singular point adds a
    radial and an angular split line. Refinement stops once two successive levels
    agree to rel_tol relative to ∫|f|.
    """
    points = [singular_at, *extra_singular]
    theta0 = singular_at.theta
    radial = [p.r for p in points]
    angular = [angle_difference(p.theta, theta0) for p in points]

    previous = None
    change = math.inf
    for level in range(1, spec.max_subdivisions + 1):
        rule = singular_tensor_rule(radial, angular, BASE_DEPTH + level, spec.order)
        R = rule.radii[:, None]
        T = theta0 + rule.angles[None, :]
        values = np.asarray(f(np.broadcast_to(R, rule.weights.shape), np.broadcast_to(T, rule.weights.shape)), dtype=float)
        values = np.broadcast_to(values, rule.weights.shape)
        if not np.all(np.isfinite(values)):
            raise ValueError("disc_integrate_singular: integrand is not finite at a quadrature node")
        estimate = float(np.sum(rule.weights * values))
        scale = max(float(np.sum(rule.weights * np.abs(values))), np.finfo(float).tiny)
        if previous is not None:
            change = abs(estimate - previous) / scale
            if change <= spec.rel_tol:
                return estimate
        previous = estimate
    raise QuadratureBudgetExceeded(previous, change, spec.max_subdivisions)


def disc_area_check(spec: QuadratureSpec = QuadratureSpec()) -> float:
    """∫Ω 1 dy through the singular rule; equals π to rel_tol."""
    return disc_integrate_singular(lambda r, t: np.ones_like(r), PolarPoint(0.5, 0.0), spec)
