"""
Source fields and the volume potential V(x) = ∫Ω Φ(x, y)ψ(y) dy.

Two discretizations:

    ADAPTIVE_SINGULAR  whole circles |x| = r at once. Φ(x, ·) restricted to a circle
                       |y| = s has closed-form azimuthal Fourier modes, so
                       V(r, θ) = Σ_m e^{imθ} ∫_0^1 K̂_m(r, s) c_m(s) s ds
                       with c_m(s) the FFT coefficients of ψ(s, ·). The radial integral uses
                       graded Gauss-Legendre panels split at s = r.

    DISC_GRID_SUM      Σ_k Φ(x, y_k)ψ_k r_k Δr Δθ over the nodes of a DiscGrid, skipping
                       the node that coincides with x. Rows aligned with the grid angles
                       are a circular convolution and go through rfft.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np
from scipy import special

from . import ui
from .errors import QuadratureBudgetExceeded
from .geometry import BOUNDARY_SNAP, DiscGrid, PolarPoint
from .kernels import KernelSpec, phi_polar, phi_radial
from .quadrature import BASE_DEPTH, QuadratureMode, QuadratureSpec, disc_integrate_singular, graded_rule
from .workers import map_ordered

# Cartesian source ψ(x1, x2), vectorized over numpy arrays.
SourceFn = Callable[[np.ndarray, np.ndarray], np.ndarray]

MIN_ANGULAR_SAMPLES = 64
MAX_ANGULAR_SAMPLES = 8192

# Radii closer than this are the same grid row.
ROW_MATCH_TOL = 1e-12

# Evaluation points per block when assembling explicit grid-sum matrices.
MATRIX_CHUNK = 512


@dataclass(frozen=True, eq=False)
class GridSource:
    """A source known only at the nodes of a disc grid."""
    grid: DiscGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != self.grid.shape:
            raise ValueError(f"GridSource values shape {values.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("GridSource values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def sample(cls, fn: SourceFn, grid: DiscGrid) -> "GridSource":
        x1, x2 = grid.cartesian()
        return cls(grid, np.broadcast_to(np.asarray(fn(x1, x2), dtype=float), grid.shape))

    @classmethod
    def zeros(cls, grid: DiscGrid) -> "GridSource":
        return cls(grid, np.zeros(grid.shape))


Source = Union[None, SourceFn, GridSource]


def source_is_zero(psi: Source) -> bool:
    if psi is None:
        return True
    if isinstance(psi, GridSource):
        return not np.any(psi.values)
    return False


# ============================================================================
# AZIMUTHAL MODES OF Φ
# ============================================================================

def _large_order_product(m: np.ndarray, z: np.ndarray, w: np.ndarray) -> np.ndarray:
    """I_m(z)K_m(w) for large m from the leading power series terms (z ≤ w)."""
    ratio = np.where(w > 0.0, z / w, 0.0)
    lead = ratio ** m / (2.0 * m)
    return lead * (1.0 + z * z / (4.0 * (m + 1.0))) * (1.0 - w * w / (4.0 * np.maximum(m - 1.0, 1.0)))


def kernel_modes(spec: KernelSpec, r: float, s: np.ndarray, n_modes: int) -> np.ndarray:
    """
    K̂_m(r, s) = ∫_0^{2π} Φ((r, 0), (s, φ)) e^{-imφ} dφ for m = 0..n_modes-1.

    Laplace:  ln max(r, s) for m = 0, -(r_< / r_>)^m / (2m) otherwise.
    Helmholtz: -I_m(√λ r_<) K_m(√λ r_>).
    Shape (len(s), n_modes).
    """
    s = np.asarray(s, dtype=float)[:, None]
    m = np.arange(n_modes, dtype=float)[None, :]
    lo = np.minimum(r, s)
    hi = np.maximum(r, s)
    if spec.is_laplace:
        out = np.empty((s.shape[0], n_modes))
        out[:, 0] = np.log(hi[:, 0])
        if n_modes > 1:
            mm = m[:, 1:]
            out[:, 1:] = -((lo / hi) ** mm) / (2.0 * mm)
        return out

    k = spec.sqrt_lam
    z = k * lo
    wz = k * hi
    with np.errstate(over="ignore", invalid="ignore", under="ignore"):
        product = special.ive(m, z) * special.kve(m, wz) * np.exp(z - wz)
    # ive underflows and kve overflows together once m is large; the series takes over there.
    bad = ~np.isfinite(product) | ((product < 1e-290) & (m > 0))
    if np.any(bad):
        with np.errstate(divide="ignore", invalid="ignore"):
            approx = _large_order_product(np.broadcast_to(m, product.shape), np.broadcast_to(z, product.shape),
                                          np.broadcast_to(wz, product.shape))
        product = np.where(bad, approx, product)
    return -product


# ============================================================================
# ADAPTIVE CIRCLE EVALUATION
# ============================================================================

def _angular_coefficients(fn: SourceFn, radii: np.ndarray, start: int, rel_tol: float) -> np.ndarray:
    """
    FFT coefficients c_m(s), m = 0..P/2-1, of ψ(s, ·) on each radius.

    P doubles until the top half of the retained modes is below rel_tol of the largest.
    """
    n = start
    while True:
        t = 2.0 * math.pi * np.arange(n) / n
        R = radii[:, None]
        values = np.broadcast_to(np.asarray(fn(R * np.cos(t)[None, :], R * np.sin(t)[None, :]), dtype=float),
                                 (radii.size, n))
        if not np.all(np.isfinite(values)):
            raise ValueError("Source is not finite at a quadrature node")
        coeffs = np.fft.rfft(values, axis=1)[:, : n // 2] / n
        magnitude = np.abs(coeffs)
        head = float(magnitude.max()) if magnitude.size else 0.0
        tail = float(magnitude[:, n // 4:].max()) if n // 4 < n // 2 else 0.0
        if head == 0.0 or tail <= rel_tol * head:
            return coeffs
        if n >= MAX_ANGULAR_SAMPLES:
            raise QuadratureBudgetExceeded(head, tail / head, int(math.log2(n)))
        n *= 2


@dataclass
class CircleModes:
    """Azimuthal modes a_m of V on one circle; V(θ) = Re(a_0) + 2 Re Σ_{m≥1} a_m e^{imθ}."""
    radius: float
    modes: np.ndarray

    def values(self, thetas: np.ndarray) -> np.ndarray:
        thetas = np.asarray(thetas, dtype=float)
        if self.modes.size == 0:
            return np.zeros_like(thetas)
        out = np.full(thetas.shape, self.modes[0].real)
        if self.modes.size > 1:
            m = np.arange(1, self.modes.size)
            phase = np.exp(1j * np.multiply.outer(thetas, m))
            out = out + 2.0 * (phase @ self.modes[1:]).real
        return out


def circle_modes(spec: KernelSpec, fn: SourceFn, r: float, quad: QuadratureSpec) -> CircleModes:
    """Modes of V on |x| = r, refining the radial grading until two levels agree."""
    previous = None
    change = math.inf
    n_start = MIN_ANGULAR_SAMPLES
    for level in range(1, quad.max_subdivisions + 1):
        s, w = graded_rule(0.0, 1.0, [r], BASE_DEPTH + level, quad.order)
        coeffs = _angular_coefficients(fn, s, n_start, quad.rel_tol)
        n_start = max(n_start, 2 * coeffs.shape[1])
        kernel = kernel_modes(spec, r, s, coeffs.shape[1])
        weighted = (s * w)[:, None] * kernel
        modes = np.sum(weighted * coeffs, axis=0)
        scale = float(np.sum(np.abs(weighted * coeffs)))
        if previous is not None:
            width = min(previous.size, modes.size)
            diff = np.abs(modes[:width] - previous[:width]).max(initial=0.0)
            extra = max(np.abs(modes[width:]).max(initial=0.0), np.abs(previous[width:]).max(initial=0.0))
            change = max(diff, extra) / max(scale, np.finfo(float).tiny)
            if change <= quad.rel_tol:
                return CircleModes(radius=r, modes=modes)
        previous = modes
    raise QuadratureBudgetExceeded(float(previous[0].real) if previous is not None else math.nan,
                                   change, quad.max_subdivisions)


# ============================================================================
# GRID SUM
# ============================================================================

class GridSumOperator:
    """Σ_k Φ(x, y_k) ψ_k r_k Δr Δθ over the nodes of `grid`, coincident node excluded."""

    def __init__(self, spec: KernelSpec, grid: DiscGrid):
        self.spec = spec
        self.grid = grid
        self._weights = grid.radii * grid.d_r * grid.d_theta
        self._tables: dict[tuple, np.ndarray] = {}

    def _aligned(self, thetas: np.ndarray) -> bool:
        return (
            self.grid.is_uniform_in_theta
            and thetas.shape == self.grid.thetas.shape
            and bool(np.allclose(thetas, self.grid.thetas, atol=1e-12, rtol=0.0))
        )

    def _circulant_table(self, radii: np.ndarray) -> np.ndarray:
        """rfft over angle offsets of Φ((r_i, 0), (s_k, θ_l)), shape (n_eval, n_src, n/2+1)."""
        key = tuple(np.round(radii, 15))
        table = self._tables.get(key)
        if table is None:
            offsets = self.grid.thetas
            src = self.grid.radii
            values = phi_polar(self.spec, radii[:, None, None], 0.0, src[None, :, None], offsets[None, None, :])
            same = np.abs(radii[:, None] - src[None, :]) <= ROW_MATCH_TOL
            values[..., 0] = np.where(same, 0.0, values[..., 0])
            if not np.all(np.isfinite(values)):
                raise ValueError("Grid-sum kernel table is singular off the coincident node")
            table = np.fft.rfft(values, axis=-1)
            self._tables[key] = table
        return table

    def apply(self, values: np.ndarray, radii, thetas) -> np.ndarray:
        """Potential on the tensor set radii × thetas, shape (len(radii), len(thetas))."""
        values = np.asarray(values, dtype=float)
        if values.shape != self.grid.shape:
            raise ValueError(f"Source shape {values.shape} does not match grid {self.grid.shape}")
        radii = np.atleast_1d(np.asarray(radii, dtype=float))
        thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
        if self._aligned(thetas):
            table = self._circulant_table(radii)
            weighted = np.fft.rfft(values * self._weights[:, None], axis=-1)
            spectrum = np.einsum("ikl,kl->il", table, weighted)
            return np.fft.irfft(spectrum, n=thetas.size, axis=-1)
        R, T = np.meshgrid(radii, thetas, indexing="ij")
        return (self.matrix(R.ravel(), T.ravel()) @ values.ravel()).reshape(R.shape)

    def matrix(self, radii, thetas) -> np.ndarray:
        """Explicit map from flattened grid values to potentials at the points (radii[p], thetas[p])."""
        radii = np.atleast_1d(np.asarray(radii, dtype=float))
        thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
        if radii.shape != thetas.shape:
            raise ValueError("matrix() takes paired radii and thetas")
        R, T = self.grid.mesh()
        src_r, src_t = R.ravel()[None, :], T.ravel()[None, :]
        weights = np.repeat(self._weights, self.grid.thetas.size)[None, :]
        out = np.empty((radii.size, src_r.size))
        for start in range(0, radii.size, MATRIX_CHUNK):
            r = radii[start:start + MATRIX_CHUNK, None]
            t = thetas[start:start + MATRIX_CHUNK, None]
            s = np.sin(0.5 * (t - src_t))
            rho = np.sqrt((r - src_r) ** 2 + 4.0 * r * src_r * s * s)
            kernel = phi_radial(self.spec, rho)
            out[start:start + MATRIX_CHUNK] = np.where(rho <= ROW_MATCH_TOL, 0.0, kernel) * weights
        return out


# ============================================================================
# VOLUME POTENTIAL
# ============================================================================

@dataclass(eq=False)
class VolumePotential:
    """
    V(x) = ∫Ω Φ(x, y)ψ(y) dy for a fixed kernel and source.

    ADAPTIVE_SINGULAR needs a callable source; DISC_GRID_SUM takes a GridSource or a
    callable plus the grid to sample it on. Circle modes and δΦ corrections are cached.
    """
    spec: KernelSpec
    psi: Source
    quad: QuadratureSpec = field(default_factory=QuadratureSpec)
    grid: Optional[DiscGrid] = None
    workers: Optional[int] = 1
    _circles: dict = field(default_factory=dict, init=False, repr=False)
    _deltas: dict = field(default_factory=dict, init=False, repr=False)
    _grid_sum: Optional[GridSumOperator] = field(default=None, init=False, repr=False)
    _grid_values: Optional[np.ndarray] = field(default=None, init=False, repr=False)

    def __post_init__(self):
        self.is_zero = source_is_zero(self.psi)
        mode = self.quad.mode
        if mode == QuadratureMode.BOUNDARY_RIEMANN:
            raise ValueError("Volume potentials need DISC_GRID_SUM or ADAPTIVE_SINGULAR quadrature")
        if mode == QuadratureMode.ADAPTIVE_SINGULAR and isinstance(self.psi, GridSource):
            raise ValueError("ADAPTIVE_SINGULAR quadrature needs a callable source, got grid values")
        if mode == QuadratureMode.DISC_GRID_SUM and not self.is_zero:
            source = self.psi if isinstance(self.psi, GridSource) else None
            if source is None:
                if self.grid is None:
                    raise ValueError("DISC_GRID_SUM with a callable source needs a DiscGrid")
                source = GridSource.sample(self.psi, self.grid)
            self.grid = source.grid
            self._grid_sum = GridSumOperator(self.spec, source.grid)
            self._grid_values = source.values

    @property
    def mode(self) -> QuadratureMode:
        return self.quad.mode

    def _circle(self, r: float) -> CircleModes:
        key = round(float(r), 15)
        cached = self._circles.get(key)
        if cached is None:
            cached = circle_modes(self.spec, self.psi, float(r), self.quad)
            self._circles[key] = cached
        return cached

    def rows(self, radii, thetas) -> np.ndarray:
        """V on radii × thetas, shape (len(radii), len(thetas))."""
        radii = np.atleast_1d(np.asarray(radii, dtype=float))
        thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
        if np.any(radii <= 0.0) or np.any(radii > 1.0 + BOUNDARY_SNAP):
            raise ValueError("Volume potential radii must lie in (0, 1]")
        radii = np.minimum(radii, 1.0)
        if self.is_zero:
            return np.zeros((radii.size, thetas.size))
        if self.mode == QuadratureMode.DISC_GRID_SUM:
            return self._grid_sum.apply(self._grid_values, radii, thetas)
        ui.debug(f"volume potential: {radii.size} circle(s) x {thetas.size} angles")
        circles = map_ordered(self._circle, list(radii), self.workers)
        return np.vstack([c.values(thetas) for c in circles])

    def on_boundary(self, thetas) -> np.ndarray:
        return self.rows([1.0], thetas)[0]

    def at_point(self, p: PolarPoint) -> float:
        if p.r <= 0.0:
            raise ValueError("Volume potential is evaluated on r > 0 only")
        return float(self.rows([p.r], [p.theta])[0, 0])

    def at_points(self, radii, thetas) -> np.ndarray:
        """V at paired points (radii[p], thetas[p])."""
        radii = np.atleast_1d(np.asarray(radii, dtype=float))
        thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
        if self.is_zero:
            return np.zeros(radii.shape)
        if self.mode == QuadratureMode.DISC_GRID_SUM:
            return self._grid_sum.matrix(radii, thetas) @ self._grid_values.ravel()
        return np.array([self.rows([r], [t])[0, 0] for r, t in zip(radii, thetas)])

    def delta_correction(self, r: float) -> float:
        return delta_correction(self.spec, r, self.quad, self._deltas)


def delta_correction(spec: KernelSpec, r: float, quad: QuadratureSpec = QuadratureSpec(), cache: Optional[dict] = None) -> float:
    """
    λ∫Ω δΦ(x, y) dy for |x| = r, with δΦ(x, y) = Φ(x, y) - Φ(x*, y).

    Zero for Laplace and on the boundary. Rotation invariant, so it is computed at θ = 0
    with singular lines at y = x and y = x*.
    """
    if spec.is_laplace or r >= 1.0 - BOUNDARY_SNAP:
        return 0.0
    if r <= 0.0:
        raise ValueError("delta_correction is defined for r > 0")
    key = round(float(r), 15)
    if cache is not None and key in cache:
        return cache[key]

    def integrand(rr, tt):
        return phi_polar(spec, r, 0.0, rr, tt) - phi_polar(spec, 1.0, 0.0, rr, tt)

    value = spec.lam * disc_integrate_singular(
        integrand, PolarPoint(r, 0.0), quad.with_mode(QuadratureMode.ADAPTIVE_SINGULAR),
        extra_singular=[PolarPoint(1.0, 0.0)],
    )
    if cache is not None:
        cache[key] = value
    return value
