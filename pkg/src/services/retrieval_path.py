"""
Retrieval-path graphs: relatedness edges, oracle path classification and
pre-retrieval path-type prediction
"""

import logging
from dataclasses import dataclass
from typing import Dict, Iterable, List, Mapping, Optional, Sequence

from ..models.errors import EmptyIndexError, InvalidArgumentError, LabelValidationError
from ..models.qpp_models import (
    DfIndex, Document, Edge, NGramSet, PathGraph, PathType, TermSpan, Witness,
)
from ..utils.jsonl import iter_jsonl, require
from .corpus_index import doc_count, document_tokens, iter_ngrams, term_probability, tokenize

logger = logging.getLogger(__name__)

MAX_COMMON_NGRAM = 3

CUE_LEXICON_VERSION = "v1"
COMPARATIVE_CUES = frozenset([
    "both", "same", "different", "or", "more", "first", "older", "younger",
    "longer", "earlier", "later",
])

# edge configuration -> path type; everything else is NO_PATH
PATH_RULES = {
    frozenset([Edge.Q_D1, Edge.Q_D2, Edge.D1_D2]): PathType.MIXED,
    frozenset([Edge.Q_D1, Edge.Q_D2]): PathType.COMPARISON,
    frozenset([Edge.Q_D1, Edge.D1_D2]): PathType.BRIDGE,
    frozenset([Edge.Q_D2, Edge.D1_D2]): PathType.BRIDGE,
}

PREDICTABLE_TYPES = {"bridge": PathType.BRIDGE, "comparison": PathType.COMPARISON}


def _check_inputs(index: DfIndex, p_thr: float) -> None:
    if not 0.0 < p_thr <= 1.0:
        raise InvalidArgumentError(f"p_thr must be in (0, 1], got {p_thr}")
    if index.num_docs == 0:
        raise EmptyIndexError("index contains no documents")


def _best_witness(candidates: Iterable[Sequence[str]], index: DfIndex,
                  p_thr: float) -> Optional[Witness]:
    best = None
    for gram in candidates:
        # absent from every indexed document: no evidence of rarity
        if doc_count(index, gram) == 0:
            continue
        p = term_probability(index, gram)
        if p >= p_thr:
            continue
        rank = (p, -len(gram), tuple(gram))
        if best is None or rank < best[0]:
            best = (rank, Witness(tuple(gram), p))
    return best[1] if best else None


def related(a: Sequence[str], b: Sequence[str], index: DfIndex, p_thr: float,
            max_n: int = MAX_COMMON_NGRAM) -> Optional[Witness]:
    """Lowest-probability indexed n-gram common to both token sequences, below p_thr"""
    _check_inputs(index, p_thr)
    n = min(max_n, index.max_n)
    common = set(iter_ngrams(a, n)) & set(iter_ngrams(b, n))
    return _best_witness(sorted(common), index, p_thr)


def question_witness(ngram_set: NGramSet, question_tokens: Sequence[str],
                     doc_tokens: Sequence[str], index: DfIndex,
                     p_thr: float) -> Optional[Witness]:
    """q-d relatedness: NG_q members first, then plain question unigrams"""
    _check_inputs(index, p_thr)
    n = min(MAX_COMMON_NGRAM, index.max_n)
    doc_grams = set(iter_ngrams(doc_tokens, n))
    salient = [g for g in ngram_set.unique() if len(g) <= n and g in doc_grams]
    witness = _best_witness(salient, index, p_thr)
    if witness is None:
        witness = related(question_tokens, doc_tokens, index, p_thr, max_n=1)
    return witness


def build_path_graph(ngram_set: NGramSet, question_tokens: Sequence[str],
                     d1: Document, d2: Document, index: DfIndex, p_thr: float) -> PathGraph:
    """Relatedness graph among the question and its two supporting documents"""
    t1 = document_tokens(d1)
    t2 = document_tokens(d2)
    found = {
        Edge.Q_D1: question_witness(ngram_set, question_tokens, t1, index, p_thr),
        Edge.Q_D2: question_witness(ngram_set, question_tokens, t2, index, p_thr),
        Edge.D1_D2: related(t1, t2, index, p_thr),
    }
    witnesses = {edge: w for edge, w in found.items() if w is not None}
    return PathGraph(edges=frozenset(witnesses), witnesses=witnesses)


def classify_path(graph: PathGraph) -> PathType:
    """Map an edge configuration to its retrieval path type"""
    return PATH_RULES.get(frozenset(graph.edges), PathType.NO_PATH)


def parse_type_label(label: str) -> PathType:
    """Validate an external bridge/comparison label"""
    key = label.strip().lower() if isinstance(label, str) else label
    if key not in PREDICTABLE_TYPES:
        raise LabelValidationError(f"path type label must be bridge or comparison, got {label!r}")
    return PREDICTABLE_TYPES[key]


def predict_path_type(question: str, entities: Sequence[TermSpan],
                      external_label: Optional[str] = None) -> PathType:
    """Pre-retrieval bridge/comparison prediction"""
    if external_label is not None:
        return parse_type_label(external_label)
    distinct = {span.tokens for span in entities}
    has_cue = any(tok in COMPARATIVE_CUES for tok in tokenize(question))
    if len(distinct) >= 2 and has_cue:
        return PathType.COMPARISON
    return PathType.BRIDGE


def _contains(tokens: Sequence[str], needle: Sequence[str]) -> bool:
    n = len(needle)
    needle = list(needle)
    return any(list(tokens[i:i + n]) == needle for i in range(len(tokens) - n + 1))


def detect_single_support(graph: PathGraph, d1: Document, d2: Document,
                          answer: Optional[str]) -> Optional[str]:
    """Doc id of the only supporting document needed, when the answer pins one down"""
    if not answer:
        return None
    answer_tokens = tokenize(answer)
    if not answer_tokens or answer_tokens in (["yes"], ["no"]):
        return None
    in_d1 = _contains(document_tokens(d1), answer_tokens)
    in_d2 = _contains(document_tokens(d2), answer_tokens)
    if in_d1 and not in_d2 and Edge.Q_D1 in graph.edges:
        return d1.doc_id
    if in_d2 and not in_d1 and Edge.Q_D2 in graph.edges:
        return d2.doc_id
    return None


def path_type_distribution(types: Iterable[PathType]) -> Dict[str, float]:
    """Fraction of questions per path type"""
    counts = {t.value: 0 for t in PathType}
    total = 0
    for t in types:
        counts[t.value] += 1
        total += 1
    return {k: (v / total if total else 0.0) for k, v in counts.items()}


def load_type_predictions(path) -> Dict[str, PathType]:
    """Read external predictions {question_id, type}"""
    result = {}
    for line_no, record in iter_jsonl(path):
        qid = require(record, "question_id", str, path, line_no)
        label = require(record, "type", str, path, line_no)
        result[qid] = parse_type_label(label)
    logger.info(f"Loaded {len(result)} external path-type predictions")
    return result


@dataclass
class PathAnalysis:
    """Oracle-mode result for one question"""
    question_id: str
    path_type: PathType
    graph: PathGraph
    single_support: Optional[str] = None

    def to_row(self) -> Dict[str, object]:
        row = {"question_id": self.question_id, "path_type": self.path_type.value}
        row.update(self.graph.to_dict())
        row["single_support"] = self.single_support
        return row


class PathAnalyzer:
    """Classifies retrieval paths against one index"""

    def __init__(self, index: DfIndex, p_thr: float = 0.001):
        _check_inputs(index, p_thr)
        self.index = index
        self.p_thr = p_thr
        self.logger = logging.getLogger(__name__)

    def analyze(self, question_id: str, question: str, ngram_set: NGramSet,
                d1: Document, d2: Document, answer: Optional[str] = None) -> PathAnalysis:
        """Oracle classification from the gold supporting documents"""
        graph = build_path_graph(ngram_set, tokenize(question), d1, d2, self.index, self.p_thr)
        path_type = classify_path(graph)
        single = detect_single_support(graph, d1, d2, answer)
        self.logger.debug(f"{question_id}: {path_type.value} via {sorted(e.value for e in graph.edges)}")
        return PathAnalysis(question_id, path_type, graph, single)

    def predict(self, question: str, entities: Sequence[TermSpan],
                external: Optional[Mapping[str, PathType]] = None,
                question_id: Optional[str] = None) -> PathType:
        """Pre-retrieval type, preferring an external prediction when present"""
        if external is not None and question_id in external:
            return external[question_id]
        return predict_path_type(question, entities)

    @staticmethod
    def summarize(results: List[PathAnalysis]) -> Dict[str, object]:
        return {
            "questions": len(results),
            "distribution": path_type_distribution(r.path_type for r in results),
            "single_support": sum(1 for r in results if r.single_support),
            "cue_lexicon": CUE_LEXICON_VERSION,
        }
