"""
Adaptive retrieval budgets per difficulty class
"""

import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional

import yaml

from ..models.errors import ConfigError, PolicyValidationError, SchemaError
from ..models.qpp_models import BudgetPolicy, DifficultyClass
from ..utils.jsonl import PathLike, iter_jsonl, require

logger = logging.getLogger(__name__)

POLICY_FIELDS = ("easy", "hard", "extra_hard", "base_k")


def plan_budget(difficulty: DifficultyClass, policy: BudgetPolicy) -> int:
    """Number of documents handed to the reader for a question of this class"""
    return policy.multiplier(difficulty) * policy.base_k


@dataclass
class BudgetPlan:
    """Per-question budgets and their cost against a constant retriever"""
    budgets: Dict[str, int] = field(default_factory=dict)
    classes: Dict[str, DifficultyClass] = field(default_factory=dict)
    base_k: int = 1

    @property
    def total(self) -> int:
        return sum(self.budgets.values())

    @property
    def constant_total(self) -> int:
        return len(self.budgets) * self.base_k

    def class_counts(self) -> Dict[str, int]:
        counts = {c.value: 0 for c in DifficultyClass}
        for c in self.classes.values():
            counts[c.value] += 1
        return counts

    def rows(self) -> List[Dict[str, object]]:
        return [
            {"question_id": qid, "class": self.classes[qid].value, "budget": self.budgets[qid]}
            for qid in sorted(self.budgets)
        ]

    def summary(self) -> Dict[str, object]:
        return {
            "questions": len(self.budgets),
            "base_k": self.base_k,
            "total": self.total,
            "constant_total": self.constant_total,
            "class_counts": self.class_counts(),
        }


def plan_batch(classes: Mapping[str, DifficultyClass], policy: BudgetPolicy) -> BudgetPlan:
    """Apply the policy to every bucketed question"""
    plan = BudgetPlan(base_k=policy.base_k)
    for qid in sorted(classes):
        plan.classes[qid] = classes[qid]
        plan.budgets[qid] = plan_budget(classes[qid], policy)
    return plan


def budget_sweep(classes: Mapping[str, DifficultyClass], policy: BudgetPolicy,
                 k_values: Iterable[int] = range(1, 21)) -> List[Dict[str, object]]:
    """Adaptive versus constant totals over a range of base k"""
    rows = []
    n = len(classes)
    for k in k_values:
        swept = BudgetPolicy(easy=policy.easy, hard=policy.hard,
                             extra_hard=policy.extra_hard, base_k=k)
        plan = plan_batch(classes, swept)
        rows.append({
            "base_k": k,
            "adaptive_total": plan.total,
            "constant_total": plan.constant_total,
            # smallest constant per-question k spending at least the adaptive total
            "equivalent_constant_k": math.ceil(plan.total / n) if n else 0,
        })
    return rows


def policy_from_mapping(values: Mapping[str, object], source: str = "policy") -> BudgetPolicy:
    unknown = sorted(set(values) - set(POLICY_FIELDS))
    if unknown:
        raise PolicyValidationError(f"{source}: unknown policy fields {unknown}")
    defaults = asdict(BudgetPolicy())
    defaults.update(values)
    return BudgetPolicy(**defaults)


def load_policy(path: Optional[PathLike]) -> BudgetPolicy:
    """Read a JSON or YAML policy file {easy, hard, extra_hard, base_k}"""
    if path is None:
        return BudgetPolicy()
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"policy file not found: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        try:
            values = yaml.safe_load(fh) or {}
        except yaml.YAMLError as e:
            raise PolicyValidationError(f"{path}: cannot parse policy ({e})") from e
    if not isinstance(values, dict):
        raise PolicyValidationError(f"{path}: policy must be a mapping")
    policy = policy_from_mapping(values, str(path))
    logger.info(f"Loaded budget policy {policy}")
    return policy


def load_classes(path: PathLike) -> Dict[str, DifficultyClass]:
    """Read bucket rows {question_id, class}"""
    classes: Dict[str, DifficultyClass] = {}
    for line_no, row in iter_jsonl(path):
        qid = require(row, "question_id", str, path, line_no)
        label = require(row, "class", str, path, line_no)
        try:
            classes[qid] = DifficultyClass(label)
        except ValueError:
            raise SchemaError(str(path), line_no, f"unknown difficulty class {label!r}")
    return classes
