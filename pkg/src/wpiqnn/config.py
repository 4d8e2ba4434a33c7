"""
Experiment configuration: dataclasses, JSON schema validation and presets.

A config file is JSON with sections ``problem``, ``architecture``,
``points``, ``training``, ``seeds`` and ``output``; see
``config.schema.json`` next to this module. Resolution sets are written as
inclusive integer ranges ``[lo, hi]``.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema

from .errors import ConfigurationError
from .problems import make_problem

PRESET_NAMES = (
    "heat_eps0.5",
    "heat_eps0.25",
    "heat_eps0.15",
    "helmholtz",
    "klein_gordon_a5",
    "klein_gordon_a10",
    "maxwell_heterogeneous",
    "maxwell_homogeneous",
)
# reduced configs that converge on a laptop in minutes
DESK_PRESET_NAMES = ("desk_heat", "desk_helmholtz")


@dataclass
class ProblemConfig:
    name: str
    params: dict = field(default_factory=dict)


@dataclass
class ArchitectureConfig:
    resolutions: dict  # {"x": [lo, hi], "y": [lo, hi]}
    q1: int = 4
    l1: int = 2
    q2: int = 13
    l2: int = 4
    use_qnn1: bool = True
    encoding_axis: str = "Y"
    coefficient_mode: str = "global"
    truncate: float | None = None


@dataclass
class PointsConfig:
    n_collocation: int = 8192
    n_boundary: int = 1000
    n_initial: int = 1000
    n_interface: int = 0
    sampling: str = "uniform"
    validation_grid: list = field(default_factory=lambda: [256, 256])


@dataclass
class TrainingConfig:
    epochs: int = 50000
    lr: float = 1e-2
    milestones: list = field(default_factory=list)
    decay: float = 0.1
    min_lr: float = 1e-5
    loss_weights: dict = field(default_factory=lambda: {"pde": 1.0, "ic": 1.0, "bc": 1.0, "interface": 1.0})
    subdomain_updates: str = "joint"


@dataclass
class OutputConfig:
    history_stride: int = 1
    val_stride: int = 0  # 0: validate only at the end


@dataclass
class TrainConfig:
    problem: ProblemConfig
    architecture: ArchitectureConfig
    points: PointsConfig = field(default_factory=PointsConfig)
    training: TrainingConfig = field(default_factory=TrainingConfig)
    seeds: list = field(default_factory=lambda: [0])
    output: OutputConfig = field(default_factory=OutputConfig)
    name: str = "experiment"

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        validate_dict(data)
        weights = {"pde": 1.0, "ic": 1.0, "bc": 1.0, "interface": 1.0}
        training = dict(data.get("training", {}))
        weights.update(training.pop("loss_weights", {}))
        cfg = cls(
            problem=ProblemConfig(**data["problem"]),
            architecture=ArchitectureConfig(**data["architecture"]),
            points=PointsConfig(**data.get("points", {})),
            training=TrainingConfig(loss_weights=weights, **training),
            seeds=list(data.get("seeds", [0])),
            output=OutputConfig(**data.get("output", {})),
            name=data.get("name", "experiment"),
        )
        cfg.check()
        return cfg

    def check(self):
        """Semantic checks the schema cannot express."""
        ms = self.training.milestones
        if any(b <= a for a, b in zip(ms, ms[1:])):
            raise ConfigurationError(f"training.milestones must be strictly increasing, got {ms}")
        for axis, (lo, hi) in self.architecture.resolutions.items():
            if lo > hi:
                raise ConfigurationError(f"architecture.resolutions.{axis}: lower end {lo} exceeds upper end {hi}")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigurationError(f"seeds must be distinct, got {self.seeds}")
        if self.output.val_stride and self.output.val_stride % self.output.history_stride:
            raise ConfigurationError("output.val_stride must be a multiple of output.history_stride")
        make_problem(self.problem.name, self.problem.params)


def schema() -> dict:
    return json.loads(resources.files("wpiqnn").joinpath("config.schema.json").read_text())


def _line_of(text, path):
    """Best-effort 1-based line of the JSON element at ``path``."""
    keys = [p for p in path if isinstance(p, str)]
    line, pos = 1, 0
    for key in keys:
        idx = text.find(f'"{key}"', pos)
        if idx < 0:
            break
        pos = idx
        line = text.count("\n", 0, idx) + 1
    return line


def validate_dict(data: dict, text: str | None = None, source: str = "<config>"):
    validator = jsonschema.Draft202012Validator(schema())
    errors = sorted(validator.iter_errors(data), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        where = "/".join(str(p) for p in err.absolute_path) or "<root>"
        line = f":{_line_of(text, list(err.absolute_path))}" if text is not None else ""
        raise ConfigurationError(f"{source}{line}: {where}: {err.message}")


def load_config(path) -> TrainConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigurationError(f"{path}: cannot read config: {exc.strerror}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from exc
    validate_dict(data, text, str(path))
    try:
        return TrainConfig.from_dict(data)
    except ConfigurationError as exc:
        raise ConfigurationError(f"{path}: {exc}") from exc


def preset(name: str) -> TrainConfig:
    names = PRESET_NAMES + DESK_PRESET_NAMES
    if name not in names:
        raise ConfigurationError(f"unknown preset {name!r}; available: {', '.join(names)}")
    return load_config(preset_path(name))


def preset_path(name: str) -> Path:
    return Path(str(resources.files("wpiqnn").joinpath("presets").joinpath(f"{name}.json")))
