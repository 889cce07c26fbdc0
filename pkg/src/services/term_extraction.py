"""
Salient-span extraction (entities, frozen phrases) and the n-gram set NG_q
"""

import logging
import re
from dataclasses import dataclass
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from ..models.errors import AnnotationValidationError, SchemaError
from ..models.qpp_models import (
    AnnotationSpan, DfIndex, NGramEntry, NGramSet, SpanKind, SpanSource, TermSpan,
)
from ..utils.jsonl import iter_jsonl, require
from .corpus_index import doc_count, term_probability, tokenize, tokenize_with_offsets

logger = logging.getLogger(__name__)

MAX_ENTITY_NGRAM = 3

# Question and function words that are capitalised only because they open the sentence
LEADING_WORDS = frozenset("""
    a about after among an and are as at before between both but by can could did do
    does during for from had has have how if in is it its name not of on or since that
    the these this those to was were what when where whether which who whom whose why
    will with would
""".split())

# Separators allowed inside a capitalised name: spaces, hyphens, apostrophes, initials, "&"
NAME_GAP_RE = re.compile(r"\s*[-.&'’]?\s*")
POSSESSIVE_GAPS = ("'", "’")


def _is_capitalised(surface: str) -> bool:
    return any(ch.isupper() for ch in surface)


def _span_from_tokens(toks: Sequence[Tuple[str, int, int]],
                      kind: SpanKind, source: SpanSource) -> TermSpan:
    return TermSpan(
        tokens=tuple(t for t, _, _ in toks),
        start=toks[0][1],
        end=toks[-1][2],
        kind=kind,
        source=source,
        token_starts=tuple(s for _, s, _ in toks),
    )


def validate_annotations(question: str, annotations: Sequence[AnnotationSpan]) -> None:
    """Check bounds, token content and same-kind non-overlap of annotated spans"""
    offenders = []
    for a in annotations:
        if not 0 <= a.start < a.end <= len(question):
            offenders.append((a.start, a.end, a.kind.value, "out of bounds"))
        elif not tokenize(question[a.start:a.end]):
            offenders.append((a.start, a.end, a.kind.value, "no tokens"))
    for kind in SpanKind:
        same = sorted((a for a in annotations if a.kind is kind), key=lambda a: (a.start, a.end))
        for prev, cur in zip(same, same[1:]):
            if cur.start < prev.end:
                offenders.append((prev.start, prev.end, cur.start, cur.end, kind.value, "overlap"))
    if offenders:
        raise AnnotationValidationError("invalid annotations", offenders)


def _annotated_spans(question: str, annotations: Sequence[AnnotationSpan],
                     kind: SpanKind) -> List[TermSpan]:
    validate_annotations(question, annotations)
    spans = []
    for a in sorted(annotations, key=lambda a: a.start):
        if a.kind is not kind:
            continue
        toks = [(t, s + a.start, e + a.start)
                for t, s, e in tokenize_with_offsets(question[a.start:a.end])]
        span = _span_from_tokens(toks, kind, SpanSource.ANNOTATION)
        # keep the annotated boundaries verbatim
        spans.append(TermSpan(span.tokens, a.start, a.end, kind, SpanSource.ANNOTATION,
                              span.token_starts))
    return spans


def _capitalised_runs(question: str, toks: Sequence[Tuple[str, int, int]]) -> List[List[int]]:
    runs: List[List[int]] = []
    current: List[int] = []
    for i, (_, start, end) in enumerate(toks):
        capital = _is_capitalised(question[start:end])
        if current:
            gap = question[toks[current[-1]][2]:start]
            if capital and NAME_GAP_RE.fullmatch(gap):
                current.append(i)
                continue
            # possessive inside a name: America's Incredible Pizza Company
            if (toks[i][0] == "s" and gap in POSSESSIVE_GAPS and i + 1 < len(toks)
                    and _is_capitalised(question[toks[i + 1][1]:toks[i + 1][2]])
                    and NAME_GAP_RE.fullmatch(question[end:toks[i + 1][1]])):
                current.append(i)
                continue
            runs.append(current)
            current = []
        if capital:
            current = [i]
    if current:
        runs.append(current)
    return runs


def extract_entities(question: str,
                     annotations: Optional[Sequence[AnnotationSpan]] = None) -> List[TermSpan]:
    """Entity spans: annotations verbatim when given, else capitalisation runs"""
    if annotations is not None:
        return _annotated_spans(question, annotations, SpanKind.ENTITY)

    toks = tokenize_with_offsets(question)
    spans = []
    for run in _capitalised_runs(question, toks):
        if run[0] == 0:
            if len(run) == 1:
                continue
            if toks[0][0] in LEADING_WORDS:
                run = run[1:]
        spans.append(_span_from_tokens([toks[i] for i in run],
                                       SpanKind.ENTITY, SpanSource.HEURISTIC))
    return spans


def _rare_and_present(index: DfIndex, ngram: Sequence[str], p_thr: float) -> bool:
    if len(ngram) > index.max_n:
        return False
    return doc_count(index, ngram) > 0 and term_probability(index, ngram) < p_thr


def extract_frozen_phrases(question: str, index: DfIndex,
                           annotations: Optional[Sequence[AnnotationSpan]] = None,
                           entities: Sequence[TermSpan] = (),
                           p_thr: float = 0.001) -> List[TermSpan]:
    """Frozen-phrase spans: annotations verbatim when given, else rare corpus phrases"""
    if annotations is not None:
        spans = _annotated_spans(question, annotations, SpanKind.FROZEN_PHRASE)
        clashes = [(f.start, f.end, e.start, e.end)
                   for f in spans for e in entities if f.overlaps(e)]
        if clashes:
            raise AnnotationValidationError("frozen phrase overlaps an entity", clashes)
        return spans

    toks = tokenize_with_offsets(question)
    free = [not any(s < e.end and e.start < end for e in entities) for _, s, end in toks]

    # segments of consecutive tokens outside entity spans
    segments: List[List[Tuple[str, int, int]]] = []
    current: List[Tuple[str, int, int]] = []
    for tok, ok in zip(toks, free):
        if ok:
            current.append(tok)
        elif current:
            segments.append(current)
            current = []
    if current:
        segments.append(current)

    spans = []
    window = index.max_n
    for seg in segments:
        words = [t for t, _, _ in seg]
        i = 0
        while i < len(seg):
            length = 0
            for n in range(min(window, len(seg) - i), 1, -1):
                if _rare_and_present(index, words[i:i + n], p_thr):
                    length = n
                    break
            if not length:
                i += 1
                continue
            j = i + length
            if length == window:
                # chain overlapping windows for phrases longer than the index order
                while j < len(seg) and _rare_and_present(index, words[j - window + 1:j + 1], p_thr):
                    j += 1
            spans.append(_span_from_tokens(seg[i:j], SpanKind.FROZEN_PHRASE,
                                           SpanSource.HEURISTIC))
            i = j
    return spans


def build_ngram_set(entities: Sequence[TermSpan], frozen: Sequence[TermSpan],
                    question_id: str = "") -> NGramSet:
    """NG_q: 1-3 grams of every entity span plus unigrams of frozen phrases"""
    spans = tuple(entities) + tuple(frozen)
    entries: List[NGramEntry] = []
    seen = set()
    for span_index, span in enumerate(spans):
        max_n = MAX_ENTITY_NGRAM if span.kind is SpanKind.ENTITY else 1
        starts = span.token_starts or (span.start,) * len(span.tokens)
        for n in range(1, max_n + 1):
            for i in range(len(span.tokens) - n + 1):
                gram = span.tokens[i:i + n]
                if (gram, span_index) in seen:
                    continue
                seen.add((gram, span_index))
                entries.append(NGramEntry(gram, span_index, span.kind, starts[i]))
    return NGramSet(question_id=question_id, entries=tuple(entries), spans=spans)


def _parse_kind(value: str, path, line_no: int) -> SpanKind:
    normalized = value.strip().lower().replace("-", "_").replace(" ", "_")
    if normalized in ("frozen", "phrase"):
        normalized = SpanKind.FROZEN_PHRASE.value
    try:
        return SpanKind(normalized)
    except ValueError:
        raise SchemaError(str(path), line_no, f"unknown span kind {value!r}")


def load_annotations(path) -> Dict[str, List[AnnotationSpan]]:
    """Read the span sidecar: {question_id, spans: [{start, end, kind}]}"""
    result: Dict[str, List[AnnotationSpan]] = {}
    for line_no, record in iter_jsonl(path):
        qid = require(record, "question_id", str, path, line_no)
        spans = require(record, "spans", list, path, line_no)
        parsed = []
        for item in spans:
            if not isinstance(item, dict):
                raise SchemaError(str(path), line_no, "span is not an object")
            start = require(item, "start", int, path, line_no)
            end = require(item, "end", int, path, line_no)
            kind = _parse_kind(require(item, "kind", str, path, line_no), path, line_no)
            parsed.append(AnnotationSpan(start, end, kind))
        result.setdefault(qid, []).extend(parsed)
    logger.info(f"Loaded span annotations for {len(result)} questions")
    return result


@dataclass
class ExtractionResult:
    """Spans and n-grams extracted for one question"""
    entities: List[TermSpan]
    frozen: List[TermSpan]
    ngram_set: NGramSet

    def to_row(self) -> Dict[str, object]:
        def span_row(span: TermSpan) -> Dict[str, object]:
            return {"text": span.text, "start": span.start, "end": span.end,
                    "source": span.source.value}
        return {
            "question_id": self.ngram_set.question_id,
            "entities": [span_row(s) for s in self.entities],
            "frozen_phrases": [span_row(s) for s in self.frozen],
            "ngrams": [e.key for e in self.ngram_set.entries],
        }


class TermExtractor:
    """Runs span extraction for questions against one index"""

    def __init__(self, index: DfIndex, p_thr: float = 0.001,
                 annotations: Optional[Mapping[str, Sequence[AnnotationSpan]]] = None):
        self.index = index
        self.p_thr = p_thr
        self.annotations = annotations
        self.logger = logging.getLogger(__name__)

    def extract(self, question_id: str, question: str) -> ExtractionResult:
        """Extract entity and frozen spans, then build NG_q"""
        annotated: Optional[Iterable[AnnotationSpan]] = None
        if self.annotations is not None and question_id in self.annotations:
            annotated = list(self.annotations[question_id])
        entities = extract_entities(question, annotated)
        frozen = extract_frozen_phrases(question, self.index, annotated, entities, self.p_thr)
        ngram_set = build_ngram_set(entities, frozen, question_id)
        self.logger.debug(f"{question_id}: {len(entities)} entities, {len(frozen)} frozen phrases")
        return ExtractionResult(entities, frozen, ngram_set)
