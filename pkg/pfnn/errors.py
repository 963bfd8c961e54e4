"""Exception types raised by pfnn solvers and the config layer."""

from typing import Optional


class PFNNError(Exception):
    """Base class for solver and configuration failures."""
    pass


class ConfigError(PFNNError):
    """Raised when a run configuration fails schema validation."""

    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("Invalid config: " + "; ".join(self.problems))


class QuadratureBudgetExceeded(PFNNError):
    """Adaptive quadrature ran out of refinement levels before meeting rel_tol."""

    def __init__(self, estimate: float, achieved_tol: float, levels: int):
        self.estimate = estimate
        self.achieved_tol = achieved_tol
        self.levels = levels
        super().__init__(
            f"Quadrature budget exhausted after {levels} levels: "
            f"estimate={estimate:.12g}, achieved rel tol={achieved_tol:.3g}"
        )


class DivergenceError(PFNNError):
    """Forward pass state blew past the divergence guard."""

    def __init__(self, layer: int, norm: float):
        self.layer = layer
        self.norm = norm
        super().__init__(
            f"Fredholm network diverged at layer {layer} (|state|={norm:.3g}); "
            "kernel map is not non-expansive or kappa is mischosen"
        )


class RecurrentDivergenceError(PFNNError):
    """Outer recurrent iteration grew for several consecutive updates."""

    def __init__(self, history: list, updates: list[float]):
        self.history = history
        self.updates = list(updates)
        super().__init__(
            "Recurrent iteration diverged: update norms "
            + ", ".join(f"{u:.3g}" for u in self.updates[-4:])
        )


class DegenerateBoundError(PFNNError):
    """A bound formula was asked for outside its validity range."""
    pass


class TrainingError(PFNNError):
    """Inverse-problem training failed without producing a usable model."""

    def __init__(self, message: str, trace: Optional[list[float]] = None):
        self.trace = list(trace or [])
        super().__init__(message)
