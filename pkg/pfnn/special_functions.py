"""Modified Bessel functions of the second kind used by the modified-Helmholtz kernel."""

from dataclasses import dataclass

import numpy as np
from scipy import special

EULER_GAMMA = float(np.euler_gamma)


def _positive(z, name: str) -> np.ndarray:
    arr = np.asarray(z, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0.0):
        raise ValueError(f"{name} requires a positive finite argument")
    return arr


def _as_scalar(value):
    return float(value) if np.ndim(value) == 0 else value


def bessel_k0(z):
    """K0(z) for z > 0 (scalar or array)."""
    return _as_scalar(special.k0(_positive(z, "bessel_k0")))


def bessel_k1(z):
    """K1(z) for z > 0 (scalar or array)."""
    return _as_scalar(special.k1(_positive(z, "bessel_k1")))


def bessel_i0(z):
    """I0(z); only used by closed-form disc potentials."""
    return _as_scalar(special.i0(np.asarray(z, dtype=float)))


@dataclass(frozen=True)
class BesselEval:
    """A recorded K_order(argument) evaluation."""
    order: int
    argument: float
    value: float

    def __post_init__(self):
        if self.order not in (0, 1):
            raise ValueError(f"Only orders 0 and 1 are supported, got {self.order}")
        if not self.argument > 0.0:
            raise ValueError(f"Bessel argument must be positive, got {self.argument}")
        if not self.value > 0.0:
            raise ValueError(f"K{self.order} is positive on (0, inf), got {self.value}")

    @classmethod
    def of(cls, order: int, z: float) -> "BesselEval":
        fn = bessel_k0 if order == 0 else bessel_k1
        return cls(order=order, argument=float(z), value=fn(float(z)))
