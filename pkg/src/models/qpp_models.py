"""
Data models for multi-hop query performance prediction
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, FrozenSet, List, Mapping, Optional, Tuple

from .errors import InvalidArgumentError, PolicyValidationError


NGram = Tuple[str, ...]


def ngram_key(tokens) -> str:
    """Canonical string key of a token sequence"""
    return " ".join(tokens)


@dataclass(frozen=True)
class Document:
    """A corpus document addressed by its id"""
    doc_id: str
    title: str
    text: str


@dataclass(frozen=True)
class DfIndex:
    """Corpus-wide n-gram document and collection frequencies

    ``df`` maps every indexed n-gram key (n <= max_n) to the number of
    documents containing it; ``cf`` maps unigram keys to their total number
    of occurrences. A built index is never mutated.
    """
    num_docs: int
    max_n: int
    df: Mapping[str, int]
    cf: Mapping[str, int]
    total_tokens: int

    def vocabulary_sizes(self) -> Dict[int, int]:
        """Number of distinct indexed n-grams per length"""
        sizes = {n: 0 for n in range(1, self.max_n + 1)}
        for key in self.df:
            sizes[key.count(" ") + 1] += 1
        return sizes


class SpanKind(Enum):
    """Kind of salient question span"""
    ENTITY = "entity"
    FROZEN_PHRASE = "frozen_phrase"


class SpanSource(Enum):
    """Where a span came from"""
    HEURISTIC = "heuristic"
    ANNOTATION = "annotation"


@dataclass(frozen=True)
class AnnotationSpan:
    """An externally supplied character span"""
    start: int
    end: int
    kind: SpanKind


@dataclass(frozen=True)
class TermSpan:
    """A salient span of a question with its tokens and offsets"""
    tokens: NGram
    start: int
    end: int
    kind: SpanKind
    source: SpanSource
    token_starts: Tuple[int, ...] = ()

    @property
    def text(self) -> str:
        return ngram_key(self.tokens)

    def overlaps(self, other: "TermSpan") -> bool:
        return self.start < other.end and other.start < self.end


@dataclass(frozen=True)
class NGramEntry:
    """One n-gram of NG_q together with the span it came from"""
    tokens: NGram
    span_index: int
    kind: SpanKind
    start: int

    @property
    def key(self) -> str:
        return ngram_key(self.tokens)


@dataclass(frozen=True)
class NGramSet:
    """The salient n-grams NG_q of one question"""
    question_id: str
    entries: Tuple[NGramEntry, ...]
    spans: Tuple[TermSpan, ...] = ()

    def unique(self) -> List[NGram]:
        """Distinct n-grams in first-seen order, used for probability lookups"""
        seen = {}
        for entry in self.entries:
            seen.setdefault(entry.tokens, None)
        return list(seen)


class PathType(Enum):
    """Retrieval path type of a two-hop question"""
    BRIDGE = "bridge"
    COMPARISON = "comparison"
    MIXED = "mixed"
    NO_PATH = "no_path"


class Edge(Enum):
    """Possible relatedness edges among {q, d1, d2}"""
    Q_D1 = "q-d1"
    Q_D2 = "q-d2"
    D1_D2 = "d1-d2"


@dataclass(frozen=True)
class Witness:
    """The common rare term that established an edge"""
    ngram: NGram
    probability: float

    @property
    def key(self) -> str:
        return ngram_key(self.ngram)


@dataclass(frozen=True)
class PathGraph:
    """Relatedness graph over a question and its two supporting documents"""
    edges: FrozenSet[Edge]
    witnesses: Mapping[Edge, Witness] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "edges": sorted(edge.value for edge in self.edges),
            "witnesses": {
                edge.value: {"term": w.key, "probability": w.probability}
                for edge, w in sorted(self.witnesses.items(), key=lambda kv: kv[0].value)
            },
        }


@dataclass
class EstimatorConfig:
    """Constants used by the difficulty estimators"""
    p_hop2: float = 0.125
    epsilon: float = 1e-12
    p_thr: float = 0.001

    def __post_init__(self):
        for name in ("p_hop2", "epsilon", "p_thr"):
            value = getattr(self, name)
            if not 0.0 < value <= 1.0:
                raise InvalidArgumentError(f"{name} must be in (0, 1], got {value}")
        if not self.epsilon < self.p_hop2:
            raise InvalidArgumentError(
                f"epsilon ({self.epsilon}) must be smaller than p_hop2 ({self.p_hop2})"
            )


@dataclass(frozen=True)
class DifficultyEstimate:
    """Predicted retrieval probability of a question with its provenance"""
    question_id: str
    path_type: PathType
    p_ret: float
    chosen_ngrams: Tuple[Tuple[str, int], ...] = ()
    p_hop2_used: bool = False
    fallback: bool = False
    frozen_choice_changed: bool = False

    def to_row(self, method: str = "multhp") -> Dict[str, Any]:
        return {
            "question_id": self.question_id,
            "method": method,
            "path_type": self.path_type.value,
            "score": self.p_ret,
            "chosen_ngrams": [[g, n] for g, n in self.chosen_ngrams],
            "p_hop2_used": self.p_hop2_used,
            "fallback": self.fallback,
            "frozen_choice_changed": self.frozen_choice_changed,
        }


class DifficultyClass(Enum):
    """Percentile difficulty classes"""
    EXTRA_HARD = "extra_hard"
    HARD = "hard"
    EASY = "easy"


@dataclass
class RetrievalRun:
    """Per-hop ranked lists retrieved for one question"""
    question_id: str
    hops: List[List[str]]
    gold_support: FrozenSet[str]

    def __post_init__(self):
        self.gold_support = frozenset(self.gold_support)
        if not self.gold_support:
            raise InvalidArgumentError(f"run {self.question_id}: gold_support is empty")
        for i, hop in enumerate(self.hops):
            if len(set(hop)) != len(hop):
                raise InvalidArgumentError(
                    f"run {self.question_id}: duplicate doc_id in hop {i + 1}"
                )


@dataclass(frozen=True)
class CorrelationResult:
    """A correlation coefficient with its two-sided p-value"""
    metric: str
    coefficient: float
    p_value: float

    @property
    def significance(self) -> str:
        if self.p_value < 0.001:
            return "p<0.001"
        if self.p_value < 0.01:
            return "p<0.01"
        return "n.s."

    def to_dict(self) -> Dict[str, Any]:
        return {
            "coefficient": self.coefficient,
            "p_value": self.p_value,
            "significance": self.significance,
            "test": "t-approximation" if self.metric != "kendall" else "normal-approximation",
        }


@dataclass
class EvalReport:
    """Aggregated evaluation of a predictor against retriever behaviour"""
    method: str
    cutoff_k: int
    average_precision: Dict[str, float]
    correlations: Optional[Dict[str, CorrelationResult]]
    correlation_error: Optional[str]
    pairwise_accuracy: float
    pem: float
    pr: float
    classes: Dict[str, DifficultyClass] = field(default_factory=dict)
    class_counts: Dict[str, int] = field(default_factory=dict)
    per_class: Dict[str, Dict[str, float]] = field(default_factory=dict)
    per_type: Dict[str, Dict[str, Any]] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "method": self.method,
            "cutoff_k": self.cutoff_k,
            "num_questions": len(self.average_precision),
            "mean_average_precision": (
                sum(self.average_precision.values()) / len(self.average_precision)
                if self.average_precision else 0.0
            ),
            "correlations": (
                {name: c.to_dict() for name, c in self.correlations.items()}
                if self.correlations is not None else None
            ),
            "correlation_error": self.correlation_error,
            "pairwise_accuracy": self.pairwise_accuracy,
            "pem": self.pem,
            "pr": self.pr,
            "class_counts": self.class_counts,
            "per_class": self.per_class,
            "per_type": self.per_type,
            "average_precision": self.average_precision,
            "classes": {qid: c.value for qid, c in self.classes.items()},
        }


@dataclass
class BudgetPolicy:
    """Retrieval budget multipliers per difficulty class"""
    easy: int = 1
    hard: int = 4
    extra_hard: int = 5
    base_k: int = 5

    def __post_init__(self):
        values = {"easy": self.easy, "hard": self.hard,
                  "extra_hard": self.extra_hard, "base_k": self.base_k}
        for name, value in values.items():
            if isinstance(value, bool) or not isinstance(value, int) or value < 1:
                raise PolicyValidationError(f"{name} must be an integer >= 1, got {value!r}")
        if not self.easy <= self.hard <= self.extra_hard:
            raise PolicyValidationError(
                "multipliers must satisfy easy <= hard <= extra_hard, "
                f"got ({self.easy}, {self.hard}, {self.extra_hard})"
            )

    def multiplier(self, difficulty: DifficultyClass) -> int:
        return {
            DifficultyClass.EASY: self.easy,
            DifficultyClass.HARD: self.hard,
            DifficultyClass.EXTRA_HARD: self.extra_hard,
        }[difficulty]


@dataclass(frozen=True)
class QuestionRecord:
    """A question with optional gold information"""
    question_id: str
    question: str
    answer: Optional[str] = None
    gold_support: Tuple[str, ...] = ()
    dataset_type: Optional[str] = None
    dataset_level: Optional[str] = None

    def __post_init__(self):
        if not self.question or not self.question.strip():
            raise InvalidArgumentError(f"question {self.question_id} is empty")

    def to_row(self) -> Dict[str, Any]:
        row: Dict[str, Any] = {
            "question_id": self.question_id,
            "question": self.question,
            "gold_support": list(self.gold_support),
        }
        if self.answer is not None:
            row["answer"] = self.answer
        if self.dataset_type is not None:
            row["type"] = self.dataset_type
        if self.dataset_level is not None:
            row["level"] = self.dataset_level
        return row
