"""
Fundamental solutions of Δ and Δ - λ on the plane and the kernels built from them.

Scalar entry points take PolarPoint arguments and reject singular configurations.
The *_polar variants are vectorized over numpy arrays and leave singular entries to the caller.
"""

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import special

from .geometry import BOUNDARY_SNAP, PolarPoint, boundary_projection, distance

INV_TWO_PI = 1.0 / (2.0 * math.pi)

# x -> y limit of ∂Φ/∂n_y for x, y on the unit circle (both families).
DIAGONAL_LIMIT = 1.0 / (4.0 * math.pi)


class KernelFamily(str, Enum):
    LAPLACE = "laplace"
    MODIFIED_HELMHOLTZ = "modified_helmholtz"


@dataclass(frozen=True)
class KernelSpec:
    family: KernelFamily
    lam: float = 0.0

    def __post_init__(self):
        family = KernelFamily(self.family)
        lam = float(self.lam)
        object.__setattr__(self, "family", family)
        object.__setattr__(self, "lam", lam)
        if family == KernelFamily.MODIFIED_HELMHOLTZ and not (lam > 0.0 and math.isfinite(lam)):
            raise ValueError(f"Modified Helmholtz kernel needs lambda > 0, got {self.lam}")
        if family == KernelFamily.LAPLACE and lam != 0.0:
            raise ValueError(f"Laplace kernel takes lambda = 0, got {self.lam}")

    @classmethod
    def laplace(cls) -> "KernelSpec":
        return cls(KernelFamily.LAPLACE, 0.0)

    @classmethod
    def helmholtz(cls, lam: float) -> "KernelSpec":
        return cls(KernelFamily.MODIFIED_HELMHOLTZ, lam)

    @property
    def is_laplace(self) -> bool:
        return self.family == KernelFamily.LAPLACE

    @property
    def sqrt_lam(self) -> float:
        return math.sqrt(self.lam)

    @property
    def label(self) -> str:
        return "laplace" if self.is_laplace else f"helmholtz(lambda={self.lam:g})"

    def to_dict(self) -> dict:
        return {"family": self.family.value, "lambda": self.lam}

    @classmethod
    def from_dict(cls, data: dict) -> "KernelSpec":
        return cls(KernelFamily(data["family"]), data.get("lambda", 0.0))


# ============================================================================
# VECTORIZED KERNELS
# ============================================================================

def phi_radial(spec: KernelSpec, rho):
    """Φ as a function of the distance |x - y|; rho = 0 maps to -inf."""
    rho = np.asarray(rho, dtype=float)
    with np.errstate(divide="ignore"):
        if spec.is_laplace:
            return INV_TWO_PI * np.log(rho)
        return -INV_TWO_PI * special.k0(spec.sqrt_lam * rho)


def normal_weight(spec: KernelSpec, rho):
    """
    Family factor w(ρ) in ∂Φ/∂n_y = w(ρ)·(1 - r1 cos Δ)/(2πρ²) for boundary y.

    1 for Laplace; √λρ·K1(√λρ) for modified Helmholtz (tends to 1 as ρ -> 0).
    """
    rho = np.asarray(rho, dtype=float)
    if spec.is_laplace:
        return np.ones_like(rho)
    z = spec.sqrt_lam * rho
    with np.errstate(invalid="ignore"):
        return np.where(z > 0.0, z * special.k1(np.where(z > 0.0, z, 1.0)), 1.0)


def phi_polar(spec: KernelSpec, r1, t1, r2, t2):
    s = np.sin(0.5 * (np.asarray(t1) - np.asarray(t2)))
    rho = np.sqrt((np.asarray(r1) - np.asarray(r2)) ** 2 + 4.0 * np.asarray(r1) * np.asarray(r2) * s * s)
    return phi_radial(spec, rho)


def dphi_dn_polar(spec: KernelSpec, r1, t1, t2):
    """∂Φ(x, y)/∂n_y for x = (r1, t1) and boundary y = (1, t2); NaN where x = y."""
    r1 = np.asarray(r1, dtype=float)
    s = np.sin(0.5 * (np.asarray(t1) - np.asarray(t2)))
    s2 = s * s
    rho2 = (1.0 - r1) ** 2 + 4.0 * r1 * s2
    numerator = (1.0 - r1) + 2.0 * r1 * s2
    with np.errstate(divide="ignore", invalid="ignore"):
        return normal_weight(spec, np.sqrt(rho2)) * numerator * INV_TWO_PI / rho2


def boundary_flux_matrix(spec: KernelSpec, eval_thetas, node_thetas) -> np.ndarray:
    """
    ∂Φ(x*_i, y_j)/∂n_y for boundary points x*_i and nodes y_j.

    Coincident pairs take DIAGONAL_LIMIT.
    """
    t1 = np.asarray(eval_thetas, dtype=float)[:, None]
    t2 = np.asarray(node_thetas, dtype=float)[None, :]
    if spec.is_laplace:
        return np.full((t1.shape[0], t2.shape[1]), DIAGONAL_LIMIT)
    values = dphi_dn_polar(spec, 1.0, t1, t2)
    return np.where(np.isfinite(values), values, DIAGONAL_LIMIT)


def d_phi_polar(spec: KernelSpec, r1, t1, t2):
    """DΦ(x, y) = ∂Φ(x, y)/∂n_y - ∂Φ(x*, y)/∂n_y, zero for boundary x."""
    r1 = np.asarray(r1, dtype=float)
    interior = r1 < 1.0 - BOUNDARY_SNAP
    inner = dphi_dn_polar(spec, np.where(interior, r1, 0.0), t1, t2)
    star = dphi_dn_polar(spec, 1.0, t1, t2)
    star = np.where(np.isfinite(star), star, DIAGONAL_LIMIT)
    return np.where(interior, inner - star, 0.0)


# ============================================================================
# POINTWISE OPERATIONS
# ============================================================================

def phi(spec: KernelSpec, x: PolarPoint, y: PolarPoint) -> float:
    rho = distance(x, y)
    if rho == 0.0:
        raise ValueError("phi is singular at x = y")
    return float(phi_radial(spec, rho))


def dphi_dn(spec: KernelSpec, x: PolarPoint, y: PolarPoint) -> float:
    if not y.on_boundary:
        raise ValueError("dphi_dn needs y on the unit circle")
    if distance(x, y) == 0.0:
        raise ValueError("dphi_dn is singular at x = y; use dphi_dn_diag")
    return float(dphi_dn_polar(spec, x.r, x.theta, y.theta))


def dphi_dn_diag(spec: KernelSpec) -> float:
    return DIAGONAL_LIMIT


def d_phi(spec: KernelSpec, x: PolarPoint, y: PolarPoint) -> float:
    if not y.on_boundary:
        raise ValueError("d_phi needs y on the unit circle")
    if x.on_boundary:
        return 0.0
    star = boundary_projection(x)
    second = dphi_dn_diag(spec) if distance(star, y) == 0.0 else dphi_dn(spec, star, y)
    return dphi_dn(spec, x, y) - second


def delta_phi(spec: KernelSpec, x: PolarPoint, y: PolarPoint) -> float:
    if x.on_boundary:
        return 0.0
    star = boundary_projection(x)
    if distance(x, y) == 0.0 or distance(star, y) == 0.0:
        raise ValueError("delta_phi is singular at y = x and y = x*")
    return phi(spec, x, y) - phi(spec, star, y)
