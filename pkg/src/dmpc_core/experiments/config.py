"""
Experiment configuration

JSON documents are parsed into frozen dataclasses. Unknown keys are rejected
at every level and ``to_dict`` output parses back to an equal config.

Example document:

    {
      "experiment": "mpc-imitate",
      "env": {"name": "pendulum", "horizon": 20},
      "train": {"method": "mpc.dx", "epochs": 30},
      "train_sizes": [10, 50, 100],
      "methods": ["sysid", "mpc.dx"],
      "trials": 4
    }
"""

import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Type, TypeVar, Union

from ..exceptions import ConfigError
from ..imitation.train import METHODS, TrainConfig

EXPERIMENTS = ("lqr-imitate", "mpc-imitate", "sysid-compare", "bench-backward", "gradcheck")
ENVS = ("pendulum", "cartpole", "linear")

T = TypeVar("T")


def _strict(cls: Type[T], data: Any, where: str) -> T:
    """Build dataclass ``cls`` from a dict, rejecting unknown keys"""
    if not isinstance(data, dict):
        raise ConfigError(f"{where} must be a JSON object, got {type(data).__name__}")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {unknown}")
    try:
        return cls(**data)
    except TypeError as e:
        raise ConfigError(f"invalid {where}: {e}") from e


@dataclass(frozen=True)
class EnvConfig:
    """Expert environment and learner initialization"""

    name: str = "pendulum"
    horizon: int = 20
    u_bound: float = 2.0
    realizable: bool = True  # False gives the expert damping and wind
    damping: float = 0.1
    wind: float = 0.5
    n_state: int = 3  # linear only
    n_ctrl: int = 3  # linear only
    init_perturbation: float = 0.3  # learner physical params ~ expert * U[1 - p, 1 + p]

    def __post_init__(self) -> None:
        if self.name not in ENVS:
            raise ConfigError(f"env.name must be one of {ENVS}, got {self.name!r}")
        if self.horizon < 1 or self.n_state < 1 or self.n_ctrl < 1:
            raise ConfigError("env horizon and dimensions must be >= 1")
        if self.u_bound <= 0:
            raise ConfigError("env.u_bound must be positive")
        if not 0.0 <= self.init_perturbation < 1.0:
            raise ConfigError("env.init_perturbation must lie in [0, 1)")


@dataclass(frozen=True)
class DatasetConfig:
    """Validation and test split sizes (train sizes are swept)"""

    val_size: int = 100
    test_size: int = 100

    def __post_init__(self) -> None:
        if self.val_size < 1 or self.test_size < 1:
            raise ConfigError("dataset split sizes must be >= 1")


@dataclass(frozen=True)
class BenchConfig:
    """Backward-pass timing sweep"""

    n_states: Tuple[int, ...] = (4, 8, 16)
    caps: Tuple[int, ...] = (10, 50, 100)
    trials: int = 10
    horizon: int = 20

    def __post_init__(self) -> None:
        object.__setattr__(self, "n_states", tuple(self.n_states))
        object.__setattr__(self, "caps", tuple(self.caps))
        if not self.n_states or not self.caps or min(self.n_states + self.caps) < 1:
            raise ConfigError("bench n_states and caps must be non-empty positive integers")
        if self.trials < 1 or self.horizon < 1:
            raise ConfigError("bench trials and horizon must be >= 1")


@dataclass(frozen=True)
class GradcheckConfig:
    """Finite-difference check of the analytic backward pass"""

    env: str = "pendulum"
    eps: float = 1e-5
    instances: int = 1
    tolerance: float = 1e-3

    def __post_init__(self) -> None:
        if self.env not in ("pendulum", "cartpole", "lqr"):
            raise ConfigError(f"gradcheck.env must be pendulum, cartpole or lqr, got {self.env!r}")
        if self.eps <= 0 or self.tolerance <= 0 or self.instances < 1:
            raise ConfigError("gradcheck eps, tolerance and instances must be positive")


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment run"""

    experiment: str
    env: EnvConfig = field(default_factory=EnvConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    output_dir: Optional[str] = None
    seed: int = 0
    trials: int = 4
    train_sizes: Tuple[int, ...] = (10, 50, 100)
    methods: Tuple[str, ...] = ("mpc.dx",)
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    bench: BenchConfig = field(default_factory=BenchConfig)
    gradcheck: GradcheckConfig = field(default_factory=GradcheckConfig)

    def __post_init__(self) -> None:
        object.__setattr__(self, "train_sizes", tuple(self.train_sizes))
        object.__setattr__(self, "methods", tuple(self.methods))
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"experiment must be one of {EXPERIMENTS}, got {self.experiment!r}")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if not self.train_sizes or min(self.train_sizes) < 1:
            raise ConfigError("train_sizes must be non-empty positive integers")
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise ConfigError(f"unknown methods {bad}; available: {METHODS}")

    def with_overrides(self, output_dir: Optional[Union[str, Path]] = None,
                       seed: Optional[int] = None) -> "ExperimentConfig":
        """Copy with the output directory and/or seed replaced"""
        changes: Dict[str, Any] = {}
        if output_dir is not None:
            changes["output_dir"] = str(output_dir)
        if seed is not None:
            changes["seed"] = int(seed)
        return replace(self, **changes)

    # ==================== Serialization ====================

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ExperimentConfig":
        """
        Parse a config dict.

        Raises:
            ConfigError: Unknown key, wrong type or invalid value
        """
        if not isinstance(data, dict):
            raise ConfigError("experiment config must be a JSON object")
        nested = {
            "env": EnvConfig,
            "train": TrainConfig,
            "dataset": DatasetConfig,
            "bench": BenchConfig,
            "gradcheck": GradcheckConfig,
        }
        data = dict(data)
        for key, sub in nested.items():
            if key in data:
                data[key] = _strict(sub, data[key], key)
        if "experiment" not in data:
            raise ConfigError("experiment config needs an 'experiment' key")
        return _strict(cls, data, "experiment config")

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "ExperimentConfig":
        """Load and parse a JSON config file"""
        path = Path(path)
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e}") from e
        except json.JSONDecodeError as e:
            raise ConfigError(f"config {path} is not valid JSON: {e}") from e
        return cls.from_dict(data)

    def to_dict(self) -> Dict[str, Any]:
        """Plain JSON-serializable dict (tuples become lists)"""
        return json.loads(json.dumps(asdict(self)))

