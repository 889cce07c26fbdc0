"""
Run configuration: YAML/JSON file values overridden by command-line flags
"""

import logging
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, Iterable, Mapping, Optional

import yaml

from ..models.errors import ConfigError, InvalidArgumentError, PolicyValidationError
from ..models.qpp_models import BudgetPolicy, EstimatorConfig
from .dataset_loader import IMPORT_MODES

logger = logging.getLogger(__name__)

MODES = ("oracle", "pre-retrieval")


@dataclass
class RunConfig:
    """Everything a subcommand needs besides its positional arguments"""
    index_path: Optional[str] = None
    corpus_path: Optional[str] = None
    questions_path: Optional[str] = None
    annotations_path: Optional[str] = None
    type_predictions_path: Optional[str] = None
    runs_path: Optional[str] = None
    output_dir: str = "output"
    max_n: int = 3
    cutoff_k: int = 10
    mode: str = "pre-retrieval"
    import_mode: str = "first-paragraph"
    workers: int = 1
    estimator: EstimatorConfig = field(default_factory=EstimatorConfig)
    budget: BudgetPolicy = field(default_factory=BudgetPolicy)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.import_mode not in IMPORT_MODES:
            raise ConfigError(f"import_mode must be one of {IMPORT_MODES}, got {self.import_mode!r}")
        for name in ("max_n", "cutoff_k", "workers"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int) or value < 1:
                raise ConfigError(f"{name} must be an integer >= 1, got {value!r}")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def require_files(self, names: Iterable[str]) -> None:
        """Fail early when a referenced input file is missing"""
        for name in names:
            value = getattr(self, name)
            if value is None:
                raise ConfigError(f"{name} is required for this command")
            if not Path(value).exists():
                raise ConfigError(f"{name} does not exist: {value}")


def _section(values: Any, name: str) -> Dict[str, Any]:
    if values is None:
        return {}
    if not isinstance(values, dict):
        raise ConfigError(f"section {name!r} must be a mapping")
    return values


def build_config(values: Mapping[str, Any]) -> RunConfig:
    """Validate a plain mapping into a RunConfig"""
    known = {f.name for f in fields(RunConfig)}
    unknown = sorted(set(values) - known)
    if unknown:
        raise ConfigError(f"unknown configuration keys: {unknown}")
    flat = {k: v for k, v in values.items() if k not in ("estimator", "budget")}
    try:
        estimator = EstimatorConfig(**_section(values.get("estimator"), "estimator"))
        budget = BudgetPolicy(**_section(values.get("budget"), "budget"))
    except TypeError as e:
        raise ConfigError(f"invalid configuration section: {e}") from e
    except (InvalidArgumentError, PolicyValidationError) as e:
        raise ConfigError(str(e)) from e
    return RunConfig(estimator=estimator, budget=budget, **flat)


def read_config_file(path: Optional[str]) -> Dict[str, Any]:
    """Load a YAML or JSON configuration file (JSON is valid YAML)"""
    if path is None:
        return {}
    config_path = Path(path)
    if not config_path.exists():
        raise ConfigError(f"config file not found: {path}")
    with open(config_path, "r", encoding="utf-8") as fh:
        try:
            values = yaml.safe_load(fh) or {}
        except yaml.YAMLError as e:
            raise ConfigError(f"{path}: cannot parse configuration ({e})") from e
    if not isinstance(values, dict):
        raise ConfigError(f"{path}: configuration must be a mapping")
    logger.debug(f"Loaded configuration from {path}")
    return values


def load_config(path: Optional[str] = None, overrides: Optional[Mapping[str, Any]] = None) -> RunConfig:
    """File values first, then explicit overrides; None overrides are ignored"""
    values = read_config_file(path)
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key in ("estimator", "budget"):
            section = dict(_section(values.get(key), key))
            section.update({k: v for k, v in value.items() if v is not None})
            values[key] = section
        else:
            values[key] = value
    return build_config(values)
