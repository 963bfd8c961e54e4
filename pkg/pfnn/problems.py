"""
Built-in PDE problems on the unit disc and user-defined ones from expressions.

All functions are Cartesian and vectorized: f(x1, x2), psi(x1, x2), exact(x1, x2),
and for semi-linear problems F(x1, x2, u).
"""

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import sympy as sp

from .kernels import KernelFamily, KernelSpec

Fn2 = Callable[[np.ndarray, np.ndarray], np.ndarray]
Fn3 = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ForwardProblem:
    """Δu - λu = ψ in the disc, u = f on the circle (λ = 0 for Poisson)."""
    name: str
    spec: KernelSpec
    f: Optional[Fn2]
    psi: Optional[Fn2]
    exact: Optional[Fn2] = None
    nonlinearity: Optional[Fn3] = None
    description: str = ""

    @property
    def is_semilinear(self) -> bool:
        return self.nonlinearity is not None


def _zero(x1, x2):
    return np.zeros(np.broadcast(x1, x2).shape)


def _r2(x1, x2):
    return x1 * x1 + x2 * x2


# ============================================================================
# CATALOG
# ============================================================================

def poisson_ex1() -> ForwardProblem:
    return ForwardProblem(
        name="poisson-ex1",
        spec=KernelSpec.laplace(),
        f=_zero,
        psi=lambda x1, x2: 2.0 * x1,
        exact=lambda x1, x2: 0.25 * x1 * (_r2(x1, x2) - 1.0),
        description="Δu = 2x1, u = 0 on the circle",
    )


def helmholtz_ex1(lam: float = 1.0) -> ForwardProblem:
    # ψ = Δu - λu for u = x1³ - 2x2²
    return ForwardProblem(
        name="helmholtz-ex1",
        spec=KernelSpec.helmholtz(lam),
        f=lambda x1, x2: x1 ** 3 + 2.0 * x1 ** 2 - 2.0,
        psi=lambda x1, x2: 6.0 * x1 - 4.0 - lam * (x1 ** 3 - 2.0 * x2 ** 2),
        exact=lambda x1, x2: x1 ** 3 - 2.0 * x2 ** 2,
        description="Δu - λu = 6x1 - 4 - λ(x1³ - 2x2²), u = x1³ + 2x1² - 2 on the circle",
    )


def bratu_ex1(lam: float = 1.0) -> ForwardProblem:
    return ForwardProblem(
        name="bratu-ex1",
        spec=KernelSpec.helmholtz(lam),
        f=_zero,
        psi=None,
        exact=lambda x1, x2: 1.0 - _r2(x1, x2),
        nonlinearity=lambda x1, x2, u: np.exp(u) - np.exp(1.0 - _r2(x1, x2)) - 4.0,
        description="Δu = e^u - e^(1-r²) - 4, u = 0 on the circle",
    )


def inverse_ex1() -> ForwardProblem:
    return ForwardProblem(
        name="inverse-ex1",
        spec=KernelSpec.laplace(),
        f=lambda x1, x2: 2.0 * x2,
        psi=lambda x1, x2: 8.0 * x2 + 24.0 * x2 * _r2(x1, x2),
        exact=lambda x1, x2: x2 * _r2(x1, x2) * (1.0 + _r2(x1, x2)),
        description="Δu = 8x2 + 24x2r², u = 2x2 on the circle",
    )


CATALOG: dict[str, Callable[..., ForwardProblem]] = {
    "poisson-ex1": poisson_ex1,
    "helmholtz-ex1": helmholtz_ex1,
    "bratu-ex1": bratu_ex1,
    "inverse-ex1": inverse_ex1,
}

# Problems whose constructor takes λ.
SHIFTED = {"helmholtz-ex1", "bratu-ex1"}


def get_problem(name: str, lam: Optional[float] = None) -> ForwardProblem:
    if name not in CATALOG:
        raise ValueError(f"Unknown problem '{name}'. Known: {', '.join(sorted(CATALOG))}")
    if name in SHIFTED and lam is not None:
        return CATALOG[name](lam)
    return CATALOG[name]()


# ============================================================================
# EXPRESSIONS
# ============================================================================

X1, X2, U = sp.symbols("x1 x2 u", real=True)
R_SYM, THETA_SYM = sp.symbols("r theta", real=True, nonnegative=True)


def _compile(expression: str, with_u: bool):
    """sympy expression in x1, x2, r, theta (and u) -> vectorized numpy callable."""
    try:
        expr = sp.sympify(expression, locals={"x1": X1, "x2": X2, "u": U, "r": R_SYM, "theta": THETA_SYM})
    except (sp.SympifyError, SyntaxError, TypeError) as e:
        raise ValueError(f"Cannot parse expression {expression!r}: {e}")
    expr = expr.subs({R_SYM: sp.sqrt(X1 ** 2 + X2 ** 2), THETA_SYM: sp.atan2(X2, X1)})
    allowed = {X1, X2, U} if with_u else {X1, X2}
    unknown = expr.free_symbols - allowed
    if unknown:
        names = ", ".join(sorted(str(s) for s in unknown))
        raise ValueError(f"Expression {expression!r} uses unknown variables: {names}")
    args = (X1, X2, U) if with_u else (X1, X2)
    fn = sp.lambdify(args, expr, "numpy")

    def evaluate(*values):
        shape = np.broadcast(*values).shape
        return np.broadcast_to(np.asarray(fn(*values), dtype=float), shape)

    evaluate.expression = str(expr)
    return evaluate


def expression_function(expression: Optional[str]) -> Optional[Fn2]:
    return None if expression is None else _compile(str(expression), with_u=False)


def nonlinearity_function(expression: Optional[str]) -> Optional[Fn3]:
    return None if expression is None else _compile(str(expression), with_u=True)


def custom_problem(expressions: dict, lam: float = 0.0, name: str = "custom") -> ForwardProblem:
    """
    Problem from string expressions.

    Keys: f (boundary data), psi (source), exact (optional), F (optional nonlinearity,
    makes the problem semi-linear with shift lam).
    """
    unknown = set(expressions) - {"f", "psi", "exact", "F"}
    if unknown:
        raise ValueError(f"Unknown custom expression keys: {', '.join(sorted(unknown))}")
    spec = KernelSpec.laplace() if lam == 0.0 else KernelSpec(KernelFamily.MODIFIED_HELMHOLTZ, lam)
    return ForwardProblem(
        name=name,
        spec=spec,
        f=expression_function(expressions.get("f")) or _zero,
        psi=expression_function(expressions.get("psi")),
        exact=expression_function(expressions.get("exact")),
        nonlinearity=nonlinearity_function(expressions.get("F")),
        description="custom",
    )
