"""
Difficulty estimation for multi-hop questions, plus the classic
pre-retrieval baselines (IDF, SCS, SCQ) used for comparison
"""

import logging
from collections import Counter
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..models.errors import EmptyIndexError, InvalidArgumentError
from ..models.qpp_models import (
    DfIndex, DifficultyEstimate, EstimatorConfig, NGramSet, PathType, SpanKind, ngram_key,
)
from .corpus_index import doc_count

logger = logging.getLogger(__name__)

MAX_SPECIFICITY_NGRAM = 3


def specificity(index: DfIndex, ngram: Sequence[str]) -> Optional[float]:
    """1/N(ngram), or None when the n-gram occurs in no document"""
    if not 1 <= len(ngram) <= min(MAX_SPECIFICITY_NGRAM, index.max_n):
        return None
    n = doc_count(index, ngram)
    return 1.0 / n if n > 0 else None


@dataclass(frozen=True)
class Candidate:
    """An n-gram of NG_q with its document count and origin span"""
    tokens: Tuple[str, ...]
    count: int
    origin: object
    kind: SpanKind
    start: int

    @property
    def probability(self) -> float:
        return 1.0 / self.count

    def rank(self):
        # most specific first, then longer, then earlier in the question
        return (self.count, -len(self.tokens), self.start, self.tokens)


def _candidates(ng: NGramSet, index: DfIndex, entities_only: bool = False) -> List[Candidate]:
    found = []
    for entry in ng.entries:
        if entities_only and entry.kind is not SpanKind.ENTITY:
            continue
        if specificity(index, entry.tokens) is None:
            continue
        # repeated mentions of the same surface span count as one origin
        origin = ng.spans[entry.span_index].tokens if entry.span_index < len(ng.spans) else entry.span_index
        found.append(Candidate(entry.tokens, doc_count(index, entry.tokens), origin,
                               entry.kind, entry.start))
    return sorted(found, key=Candidate.rank)


def _pick_two(candidates: List[Candidate]) -> Tuple[Optional[Candidate], Optional[Candidate]]:
    if not candidates:
        return None, None
    first = candidates[0]
    second = next((c for c in candidates[1:] if c.origin != first.origin), None)
    return first, second


def _clamp(value: float, cfg: EstimatorConfig) -> float:
    return min(1.0, max(cfg.epsilon, value))


def _chosen(*picked: Optional[Candidate]) -> Tuple[Tuple[str, int], ...]:
    return tuple((ngram_key(c.tokens), c.count) for c in picked if c is not None)


def _no_evidence(ng: NGramSet, cfg: EstimatorConfig, fallback: bool = False) -> DifficultyEstimate:
    return DifficultyEstimate(ng.question_id, PathType.NO_PATH, cfg.epsilon, fallback=fallback)


def estimate_bridge(ng: NGramSet, index: DfIndex,
                    cfg: Optional[EstimatorConfig] = None) -> DifficultyEstimate:
    """P(c1|q) from the most specific n-gram, times the constant second-hop probability"""
    cfg = cfg or EstimatorConfig()
    best, _ = _pick_two(_candidates(ng, index))
    if best is None:
        return _no_evidence(ng, cfg)
    return DifficultyEstimate(
        question_id=ng.question_id,
        path_type=PathType.BRIDGE,
        p_ret=_clamp(best.probability * cfg.p_hop2, cfg),
        chosen_ngrams=_chosen(best),
        p_hop2_used=True,
    )


def _comparison_score(candidates: List[Candidate]) -> Optional[Tuple[float, Candidate, Candidate]]:
    first, second = _pick_two(candidates)
    if second is None:
        return None
    return first.probability * second.probability, first, second


def estimate_comparison(ng: NGramSet, index: DfIndex,
                        cfg: Optional[EstimatorConfig] = None) -> DifficultyEstimate:
    """Product of the two most specific n-grams from distinct spans"""
    cfg = cfg or EstimatorConfig()
    scored = _comparison_score(_candidates(ng, index))
    if scored is None:
        bridge = estimate_bridge(ng, index, cfg)
        if bridge.path_type is PathType.NO_PATH:
            return _no_evidence(ng, cfg, fallback=True)
        return DifficultyEstimate(ng.question_id, PathType.COMPARISON, bridge.p_ret,
                                  bridge.chosen_ngrams, p_hop2_used=True, fallback=True)

    p_ret, first, second = scored
    entity_only = _comparison_score(_candidates(ng, index, entities_only=True))
    changed = entity_only is None or entity_only[0] != p_ret
    return DifficultyEstimate(
        question_id=ng.question_id,
        path_type=PathType.COMPARISON,
        p_ret=_clamp(p_ret, cfg),
        chosen_ngrams=_chosen(first, second),
        frozen_choice_changed=changed,
    )


def _mixed_score(candidates: List[Candidate],
                 cfg: EstimatorConfig) -> Optional[Tuple[float, Tuple[Candidate, ...], bool]]:
    first, second = _pick_two(candidates)
    if first is None:
        return None
    # (value, chosen n-grams, used p_hop2); first wins ties
    paths = [(first.probability * cfg.p_hop2, (first,), True)]
    if second is not None:
        paths.append((first.probability * second.probability, (first, second), False))
        paths.append((second.probability * cfg.p_hop2, (second,), True))
    return max(paths, key=lambda p: p[0])


def estimate_mixed(ng: NGramSet, index: DfIndex,
                   cfg: Optional[EstimatorConfig] = None) -> DifficultyEstimate:
    """Best of the comparison path and either bridge path"""
    cfg = cfg or EstimatorConfig()
    scored = _mixed_score(_candidates(ng, index), cfg)
    if scored is None:
        return _no_evidence(ng, cfg)
    p_ret, picked, used_hop2 = scored
    entity_only = _mixed_score(_candidates(ng, index, entities_only=True), cfg)
    changed = entity_only is None or entity_only[0] != p_ret
    return DifficultyEstimate(
        question_id=ng.question_id,
        path_type=PathType.MIXED,
        p_ret=_clamp(p_ret, cfg),
        chosen_ngrams=_chosen(*picked),
        p_hop2_used=used_hop2,
        frozen_choice_changed=changed,
    )


ESTIMATORS: Dict[PathType, Callable[..., DifficultyEstimate]] = {
    PathType.BRIDGE: estimate_bridge,
    PathType.COMPARISON: estimate_comparison,
    PathType.MIXED: estimate_mixed,
}


def estimate(ng: NGramSet, path_type: PathType, index: DfIndex,
             cfg: Optional[EstimatorConfig] = None) -> DifficultyEstimate:
    """Dispatch to the estimator of the path type; NoPath scores epsilon"""
    cfg = cfg or EstimatorConfig()
    estimator = ESTIMATORS.get(path_type)
    if estimator is None:
        return _no_evidence(ng, cfg)
    return estimator(ng, index, cfg)


def _aggregate(values: np.ndarray, agg: str) -> float:
    if values.size == 0:
        return 0.0
    if agg == "max":
        return float(values.max())
    if agg == "avg":
        return float(values.mean())
    if agg == "sum":
        return float(values.sum())
    raise InvalidArgumentError(f"unknown aggregation {agg!r}")


def _unigram_df(tokens: Sequence[str], index: DfIndex) -> np.ndarray:
    return np.array([index.df.get(t, 0) for t in tokens], dtype=float)


def baseline_idf(tokens: Sequence[str], index: DfIndex, agg: str = "max") -> float:
    """maxIDF / avgIDF; tokens absent from the corpus score 0"""
    if agg not in ("max", "avg"):
        raise InvalidArgumentError(f"IDF aggregation must be max or avg, got {agg!r}")
    if index.num_docs == 0:
        raise EmptyIndexError("index contains no documents")
    df = _unigram_df(tokens, index)
    idf = np.zeros_like(df)
    present = df > 0
    idf[present] = np.log(index.num_docs / df[present])
    return _aggregate(idf, agg)


def baseline_scs(tokens: Sequence[str], index: DfIndex) -> float:
    """Simplified clarity score: KL divergence of query and collection models, in bits"""
    if index.total_tokens <= 0:
        raise EmptyIndexError("index contains no tokens")
    if not tokens:
        return 0.0
    counts = Counter(tokens)
    terms = [t for t in counts if index.cf.get(t, 0) > 0]
    if not terms:
        return 0.0
    p_query = np.array([counts[t] for t in terms], dtype=float) / len(tokens)
    p_coll = np.array([index.cf[t] for t in terms], dtype=float) / index.total_tokens
    return float(np.sum(p_query * np.log2(p_query / p_coll)))


def baseline_scq(tokens: Sequence[str], index: DfIndex, agg: str = "max") -> float:
    """maxSCQ / avgSCQ / sumSCQ; tokens absent from the corpus score 0"""
    df = _unigram_df(tokens, index)
    cf = np.array([index.cf.get(t, 0) for t in tokens], dtype=float)
    scq = np.zeros_like(df)
    present = (df > 0) & (cf > 0)
    scq[present] = (1 + np.log(cf[present])) * np.log(1 + index.num_docs / df[present])
    return _aggregate(scq, agg)


BASELINES: Dict[str, Callable[[Sequence[str], DfIndex], float]] = {
    "maxIDF": lambda toks, index: baseline_idf(toks, index, "max"),
    "avgIDF": lambda toks, index: baseline_idf(toks, index, "avg"),
    "SCS": baseline_scs,
    "maxSCQ": lambda toks, index: baseline_scq(toks, index, "max"),
    "avgSCQ": lambda toks, index: baseline_scq(toks, index, "avg"),
    "sumSCQ": lambda toks, index: baseline_scq(toks, index, "sum"),
}

METHODS = ("multhp",) + tuple(BASELINES)


def score_question(question_id: str, tokens: Sequence[str], ng: NGramSet,
                   path_type: PathType, index: DfIndex,
                   cfg: Optional[EstimatorConfig] = None,
                   method: str = "multhp") -> Dict[str, object]:
    """One score row for a question under the given method"""
    if method == "multhp":
        return estimate(ng, path_type, index, cfg).to_row(method)
    if method not in BASELINES:
        raise InvalidArgumentError(f"unknown method {method!r}; choose from {', '.join(METHODS)}")
    return {
        "question_id": question_id,
        "method": method,
        "path_type": path_type.value,
        "score": BASELINES[method](tokens, index),
        "chosen_ngrams": [],
    }


class QppScoringService:
    """Scores questions with multHP and the baseline predictors"""

    def __init__(self, index: DfIndex, cfg: Optional[EstimatorConfig] = None):
        if index.num_docs == 0:
            raise EmptyIndexError("index contains no documents")
        self.index = index
        self.cfg = cfg or EstimatorConfig()
        self.logger = logging.getLogger(__name__)
        self.fallbacks = 0
        self.frozen_changes = 0

    def score(self, question_id: str, tokens: Sequence[str], ng: NGramSet,
              path_type: PathType, methods: Sequence[str] = ("multhp",)) -> List[Dict[str, object]]:
        rows = []
        for method in methods:
            row = score_question(question_id, tokens, ng, path_type, self.index, self.cfg, method)
            if method == "multhp":
                self.fallbacks += bool(row["fallback"])
                self.frozen_changes += bool(row["frozen_choice_changed"])
                if row["path_type"] == PathType.NO_PATH.value:
                    self.logger.debug(f"{question_id}: no evidence, scored epsilon")
            rows.append(row)
        return rows
