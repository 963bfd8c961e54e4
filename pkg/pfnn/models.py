"""Run configuration for pfnn commands."""

import json
from dataclasses import dataclass, field
from importlib import metadata, resources
from pathlib import Path
from typing import Optional, Union

import yaml

from .errors import ConfigError
from .geometry import BoundaryGrid, DiscGrid, Placement
from .problems import CATALOG, ForwardProblem, custom_problem, get_problem
from .quadrature import QuadratureMode, QuadratureSpec

IntOrList = Union[int, list[int]]

PRESET_PACKAGE = "pfnn.presets"


def _as_list(value: IntOrList) -> list[int]:
    return [int(v) for v in value] if isinstance(value, (list, tuple)) else [int(value)]


def _as_scalar_or_list(value) -> IntOrList:
    if isinstance(value, (list, tuple)):
        return [int(v) for v in value]
    return int(value)


def _placement(value: str, where: str, problems: list[str]):
    try:
        Placement(value)
    except ValueError:
        problems.append(f"{where}: placement must be 'endpoint' or 'center', got {value!r}")


@dataclass
class ProblemConfig:
    name: str = "poisson-ex1"
    lam: Optional[float] = None                          # λ of the shifted operator; YAML key "lambda"
    expressions: dict = field(default_factory=dict)      # custom problems: f, psi, exact, F

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "lambda": self.lam,
            "expressions": dict(self.expressions),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ProblemConfig":
        lam = data.get("lambda")
        return cls(
            name=str(data.get("name", "poisson-ex1")),
            lam=None if lam is None else float(lam),
            expressions={str(k): str(v) for k, v in (data.get("expressions") or {}).items()},
        )

    def build(self) -> ForwardProblem:
        if self.name == "custom":
            return custom_problem(self.expressions, lam=self.lam or 0.0)
        return get_problem(self.name, self.lam)


@dataclass
class SolverConfig:
    kappa: float = 0.5
    n_layers: IntOrList = 100        # a list turns `study` into a sweep over M
    boundary_nodes: IntOrList = 1000  # a list turns `study` into a sweep over N

    @property
    def layer_list(self) -> list[int]:
        return _as_list(self.n_layers)

    @property
    def node_list(self) -> list[int]:
        return _as_list(self.boundary_nodes)

    def to_dict(self) -> dict:
        return {
            "kappa": self.kappa,
            "n_layers": self.n_layers,
            "boundary_nodes": self.boundary_nodes,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SolverConfig":
        return cls(
            kappa=float(data.get("kappa", 0.5)),
            n_layers=_as_scalar_or_list(data.get("n_layers", 100)),
            boundary_nodes=_as_scalar_or_list(data.get("boundary_nodes", 1000)),
        )


@dataclass
class GridConfig:
    n_r: int = 100
    n_theta: int = 1000
    placement: str = Placement.ENDPOINT.value

    def build(self) -> DiscGrid:
        return DiscGrid.uniform(self.n_r, self.n_theta, self.placement)

    def to_dict(self) -> dict:
        return {"n_r": self.n_r, "n_theta": self.n_theta, "placement": self.placement}

    @classmethod
    def from_dict(cls, data: dict, default_placement: str = Placement.ENDPOINT.value) -> "GridConfig":
        return cls(
            n_r=int(data.get("n_r", 100)),
            n_theta=int(data.get("n_theta", 1000)),
            placement=str(data.get("placement", default_placement)),
        )


@dataclass
class RecurrentConfig:
    n_outer: int = 12
    early_stop: Optional[float] = 1e-10

    def to_dict(self) -> dict:
        return {"n_outer": self.n_outer, "early_stop": self.early_stop}

    @classmethod
    def from_dict(cls, data: dict) -> "RecurrentConfig":
        early = data.get("early_stop", 1e-10)
        return cls(n_outer=int(data.get("n_outer", 12)), early_stop=None if early is None else float(early))


@dataclass
class InverseConfig:
    data_grid: GridConfig = field(default_factory=lambda: GridConfig(20, 20))
    test_grid: GridConfig = field(default_factory=lambda: GridConfig(50, 50))
    solver_grid: GridConfig = field(default_factory=lambda: GridConfig(25, 100, Placement.CENTER.value))
    boundary_nodes: int = 100
    n_layers: int = 100
    lambda_reg: float = 1e-12
    iters: int = 600
    n_runs: int = 50
    n_hidden: int = 20

    def to_dict(self) -> dict:
        return {
            "data_grid": self.data_grid.to_dict(),
            "test_grid": self.test_grid.to_dict(),
            "solver_grid": self.solver_grid.to_dict(),
            "boundary_nodes": self.boundary_nodes,
            "n_layers": self.n_layers,
            "lambda_reg": self.lambda_reg,
            "iters": self.iters,
            "n_runs": self.n_runs,
            "n_hidden": self.n_hidden,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "InverseConfig":
        defaults = cls()
        return cls(
            data_grid=GridConfig.from_dict(data.get("data_grid") or defaults.data_grid.to_dict()),
            test_grid=GridConfig.from_dict(data.get("test_grid") or defaults.test_grid.to_dict()),
            solver_grid=GridConfig.from_dict(data.get("solver_grid") or defaults.solver_grid.to_dict(),
                                             Placement.CENTER.value),
            boundary_nodes=int(data.get("boundary_nodes", 100)),
            n_layers=int(data.get("n_layers", 100)),
            lambda_reg=float(data.get("lambda_reg", 1e-12)),
            iters=int(data.get("iters", 600)),
            n_runs=int(data.get("n_runs", 50)),
            n_hidden=int(data.get("n_hidden", 20)),
        )


@dataclass
class BoundsConfig:
    enabled: bool = True
    sample_angles: int = 32
    sample_radii: int = 24

    def to_dict(self) -> dict:
        return {"enabled": self.enabled, "sample_angles": self.sample_angles, "sample_radii": self.sample_radii}

    @classmethod
    def from_dict(cls, data: dict) -> "BoundsConfig":
        return cls(
            enabled=bool(data.get("enabled", True)),
            sample_angles=int(data.get("sample_angles", 32)),
            sample_radii=int(data.get("sample_radii", 24)),
        )


@dataclass
class ValidateConfig:
    boundary_nodes: int = 1000
    gauss_tol: float = 1e-6

    def to_dict(self) -> dict:
        return {"boundary_nodes": self.boundary_nodes, "gauss_tol": self.gauss_tol}

    @classmethod
    def from_dict(cls, data: dict) -> "ValidateConfig":
        return cls(boundary_nodes=int(data.get("boundary_nodes", 1000)),
                   gauss_tol=float(data.get("gauss_tol", 1e-6)))


@dataclass
class RunConfig:
    problem: ProblemConfig = field(default_factory=ProblemConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    grid: GridConfig = field(default_factory=GridConfig)
    quadrature: QuadratureSpec = field(default_factory=QuadratureSpec)
    recurrent: RecurrentConfig = field(default_factory=RecurrentConfig)
    inverse: InverseConfig = field(default_factory=InverseConfig)
    bounds: BoundsConfig = field(default_factory=BoundsConfig)
    validate_settings: ValidateConfig = field(default_factory=ValidateConfig)
    output_dir: str = "pfnn-out"
    seed: int = 0

    # ------------------------------------------------------------------
    # Serialization
    # ------------------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "problem": self.problem.to_dict(),
            "solver": self.solver.to_dict(),
            "grid": self.grid.to_dict(),
            "quadrature": self.quadrature.to_dict(),
            "recurrent": self.recurrent.to_dict(),
            "inverse": self.inverse.to_dict(),
            "bounds": self.bounds.to_dict(),
            "validate": self.validate_settings.to_dict(),
            "output_dir": self.output_dir,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: Optional[dict]) -> "RunConfig":
        if data is None:
            data = {}
        if not isinstance(data, dict):
            raise ConfigError([f"Config must be a mapping, got {type(data).__name__}"])
        known = {"problem", "solver", "grid", "quadrature", "recurrent", "inverse", "bounds", "validate",
                 "output_dir", "seed"}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError([f"Unknown config section: {name}" for name in unknown])
        try:
            return cls(
                problem=ProblemConfig.from_dict(data.get("problem") or {}),
                solver=SolverConfig.from_dict(data.get("solver") or {}),
                grid=GridConfig.from_dict(data.get("grid") or {}),
                quadrature=QuadratureSpec.from_dict(data.get("quadrature") or {}),
                recurrent=RecurrentConfig.from_dict(data.get("recurrent") or {}),
                inverse=InverseConfig.from_dict(data.get("inverse") or {}),
                bounds=BoundsConfig.from_dict(data.get("bounds") or {}),
                validate_settings=ValidateConfig.from_dict(data.get("validate") or {}),
                output_dir=str(data.get("output_dir", "pfnn-out")),
                seed=int(data.get("seed", 0)),
            )
        except (TypeError, ValueError, AttributeError) as e:
            raise ConfigError([f"Malformed config: {e}"])

    def to_yaml(self) -> str:
        return yaml.dump(self.to_dict(), default_flow_style=False, sort_keys=False, allow_unicode=True)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_yaml(cls, content: str) -> "RunConfig":
        try:
            data = yaml.safe_load(content)
        except yaml.YAMLError as e:
            raise ConfigError([f"Invalid YAML: {e}"])
        return cls.from_dict(data)

    @classmethod
    def from_json(cls, content: str) -> "RunConfig":
        try:
            data = json.loads(content)
        except json.JSONDecodeError as e:
            raise ConfigError([f"Invalid JSON: {e}"])
        return cls.from_dict(data)

    def save(self, path: Union[str, Path]):
        path = Path(path)
        path.write_text(self.to_json() if path.suffix == ".json" else self.to_yaml())

    @classmethod
    def load(cls, path: Union[str, Path]) -> "RunConfig":
        path = Path(path)
        content = path.read_text()
        if path.suffix == ".json":
            return cls.from_json(content)
        return cls.from_yaml(content)

    # ------------------------------------------------------------------
    # Validation
    # ------------------------------------------------------------------

    def validate(self) -> "RunConfig":
        """Collect every violation and raise one ConfigError."""
        problems = []
        p = self.problem
        if p.name != "custom" and p.name not in CATALOG:
            problems.append(f"problem.name: unknown problem {p.name!r} (known: {', '.join(sorted(CATALOG))}, custom)")
        if p.name == "custom":
            for key in ("f", "psi"):
                if key not in p.expressions and not (key == "psi" and "F" in p.expressions):
                    problems.append(f"problem.expressions: custom problems need '{key}'")
            if "F" in p.expressions and not (p.lam and p.lam > 0.0):
                problems.append("problem.lambda: semi-linear custom problems need lambda > 0")
        if p.lam is not None and p.lam < 0.0:
            problems.append(f"problem.lambda: must be >= 0, got {p.lam}")
        if p.name == "bratu-ex1" and p.lam is not None and p.lam <= 0.0:
            problems.append("problem.lambda: the recurrent shift must be > 0")

        s = self.solver
        if not 0.0 < s.kappa <= 1.0:
            problems.append(f"solver.kappa: must lie in (0, 1], got {s.kappa}")
        if any(m < 1 for m in s.layer_list):
            problems.append(f"solver.n_layers: counts must be positive, got {s.n_layers}")
        if any(n < 2 for n in s.node_list):
            problems.append(f"solver.boundary_nodes: need at least 2 nodes, got {s.boundary_nodes}")

        for where, g in (("grid", self.grid), ("inverse.data_grid", self.inverse.data_grid),
                         ("inverse.test_grid", self.inverse.test_grid),
                         ("inverse.solver_grid", self.inverse.solver_grid)):
            if g.n_r < 1 or g.n_theta < 1:
                problems.append(f"{where}: sizes must be positive, got {g.n_r}x{g.n_theta}")
            _placement(g.placement, where, problems)

        r = self.recurrent
        if r.n_outer < 1:
            problems.append(f"recurrent.n_outer: must be >= 1, got {r.n_outer}")
        if r.early_stop is not None and r.early_stop < 0.0:
            problems.append(f"recurrent.early_stop: must be >= 0, got {r.early_stop}")

        inv = self.inverse
        for name in ("boundary_nodes", "n_layers", "iters", "n_runs", "n_hidden"):
            if getattr(inv, name) < 1:
                problems.append(f"inverse.{name}: must be >= 1, got {getattr(inv, name)}")
        if inv.lambda_reg < 0.0:
            problems.append(f"inverse.lambda_reg: must be >= 0, got {inv.lambda_reg}")

        b = self.bounds
        if b.sample_angles < 1 or b.sample_radii < 1:
            problems.append("bounds: sample counts must be positive")
        if self.validate_settings.boundary_nodes < 2:
            problems.append("validate.boundary_nodes: need at least 2 nodes")
        if self.seed < 0:
            problems.append(f"seed: must be >= 0, got {self.seed}")

        if problems:
            raise ConfigError(problems)
        return self

    # ------------------------------------------------------------------
    # Resolved objects
    # ------------------------------------------------------------------

    def build_problem(self) -> ForwardProblem:
        try:
            return self.problem.build()
        except ValueError as e:
            raise ConfigError([f"problem: {e}"])

    def disc_grid(self) -> DiscGrid:
        return self.grid.build()

    def boundary_grid(self, n_nodes: Optional[int] = None) -> BoundaryGrid:
        return BoundaryGrid(n_nodes if n_nodes is not None else self.solver.node_list[0])

    def quad_spec(self, forward: ForwardProblem) -> QuadratureSpec:
        """Adaptive for sources given as functions, grid sum otherwise."""
        if forward.psi is None:
            return self.quadrature.with_mode(QuadratureMode.DISC_GRID_SUM)
        return self.quadrature

    def provenance(self) -> dict:
        """Every resolved hyperparameter plus library versions."""
        return {
            "config": self.to_dict(),
            "versions": {name: _version(name) for name in ("pfnn", "numpy", "scipy", "sympy")},
        }


def _version(name: str) -> Optional[str]:
    try:
        return metadata.version(name)
    except metadata.PackageNotFoundError:
        return None


def preset_names() -> list[str]:
    return sorted(p.name[:-5] for p in resources.files(PRESET_PACKAGE).iterdir() if p.name.endswith(".yaml"))


def load_config(path_or_preset: Union[str, Path]) -> RunConfig:
    """Load a config file, or a shipped preset by name, and validate it."""
    path = Path(path_or_preset)
    if path.is_file():
        return RunConfig.load(path).validate()
    name = str(path_or_preset)
    preset = resources.files(PRESET_PACKAGE) / f"{name}.yaml"
    if preset.is_file():
        return RunConfig.from_yaml(preset.read_text()).validate()
    raise ConfigError([f"No config file or preset named {name!r} (presets: {', '.join(preset_names())})"])
