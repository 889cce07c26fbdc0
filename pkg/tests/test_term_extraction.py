"""Tests for entity / frozen-phrase extraction and NG_q construction."""

import pytest

from src.models.errors import AnnotationValidationError, SchemaError
from src.models.qpp_models import AnnotationSpan, SpanKind, SpanSource
from src.services.term_extraction import (
    TermExtractor, build_ngram_set, extract_entities, extract_frozen_phrases, load_annotations,
)

TOPPERS = "Which pizza chain was founded first, Toppers Pizza or America's Incredible Pizza Company?"


def texts(spans):
    return [s.text for s in spans]


class TestEntities:

    def test_capitalised_runs_with_possessive(self):
        assert texts(extract_entities(TOPPERS)) == [
            "toppers pizza", "america s incredible pizza company",
        ]

    def test_leading_question_word_is_dropped(self):
        spans = extract_entities("Were Scott Derrickson and Ed Wood of the same nationality?")
        assert texts(spans) == ["scott derrickson", "ed wood"]

    def test_hyphenated_name_is_one_span(self):
        spans = extract_entities("Which label released the debut album of Buck-Tick?")
        assert texts(spans) == ["buck tick"]

    def test_apostrophe_inside_name(self):
        spans = extract_entities("Where was Conan O'Brien born?")
        assert texts(spans) == ["conan o brien"]

    def test_question_opening_with_an_entity(self):
        spans = extract_entities("Toppers Pizza was founded in which city?")
        assert texts(spans) == ["toppers pizza"]

    def test_entities_separated_by_comma_and_or(self):
        question = "Which singer is in the duo Sugarland, Jennifer Nettles or Roger Taylor?"
        assert texts(extract_entities(question)) == ["sugarland", "jennifer nettles", "roger taylor"]

    def test_lone_sentence_initial_word_is_not_an_entity(self):
        assert extract_entities("Who wrote the novel?") == []

    def test_spans_carry_offsets(self):
        span = extract_entities(TOPPERS)[0]
        assert TOPPERS[span.start:span.end] == "Toppers Pizza"
        assert span.source is SpanSource.HEURISTIC

    def test_annotations_are_kept_verbatim(self):
        question = "Who founded the pizza chain Toppers?"
        start = question.index("pizza chain")
        spans = extract_entities(question, [AnnotationSpan(start, start + 11, SpanKind.ENTITY)])
        assert texts(spans) == ["pizza chain"]
        assert spans[0].source is SpanSource.ANNOTATION

    def test_out_of_bounds_annotation(self):
        with pytest.raises(AnnotationValidationError):
            extract_entities("short", [AnnotationSpan(0, 50, SpanKind.ENTITY)])

    def test_overlapping_annotations_of_one_kind(self):
        annotations = [AnnotationSpan(0, 5, SpanKind.ENTITY), AnnotationSpan(3, 8, SpanKind.ENTITY)]
        with pytest.raises(AnnotationValidationError) as excinfo:
            extract_entities("Alpha Beta Gamma", annotations)
        assert excinfo.value.offenders


class TestFrozenPhrases:

    def test_longest_rare_present_window(self, stub_index):
        index = stub_index({"rock band": 2, "band formed": 3}, num_docs=10000)
        spans = extract_frozen_phrases("who directed the film about a rock band formed in 1983",
                                       index, p_thr=0.001)
        assert texts(spans) == ["rock band"]

    def test_common_phrase_is_not_frozen(self, stub_index):
        index = stub_index({"rock band": 50}, num_docs=10000)
        spans = extract_frozen_phrases("a rock band", index, p_thr=0.001)
        assert spans == []

    def test_threshold_is_strict(self, stub_index):
        index = stub_index({"rock band": 10}, num_docs=10000)
        assert extract_frozen_phrases("a rock band", index, p_thr=0.001) == []

    def test_phrase_longer_than_index_order_is_chained(self, stub_index):
        index = stub_index({"grand budapest": 1, "budapest hotel": 1}, num_docs=10000, max_n=2)
        spans = extract_frozen_phrases("which film is grand budapest hotel", index)
        assert texts(spans) == ["grand budapest hotel"]

    def test_entities_take_precedence(self, stub_index):
        question = "Who sang with Rock Band members?"
        index = stub_index({"rock band": 1}, num_docs=10000)
        entities = extract_entities(question)
        assert extract_frozen_phrases(question, index, entities=entities) == []

    def test_annotated_phrase_overlapping_entity(self, stub_index):
        question = "Who sang with Rock Band members?"
        entities = extract_entities(question)
        start = question.index("Rock")
        with pytest.raises(AnnotationValidationError):
            extract_frozen_phrases(question, stub_index({}),
                                   [AnnotationSpan(start, start + 9, SpanKind.FROZEN_PHRASE)],
                                   entities)


class TestNGramSet:

    def test_entity_ngrams_and_frozen_unigrams(self, stub_index):
        index = stub_index({"rock band": 2}, num_docs=10000)
        question = "Did Toppers Pizza sponsor a rock band"
        entities = extract_entities(question)
        frozen = extract_frozen_phrases(question, index, entities=entities)
        ng = build_ngram_set(entities, frozen, "q1")
        keys = [e.key for e in ng.entries]
        assert keys == ["toppers", "pizza", "toppers pizza", "rock", "band"]
        assert [e.span_index for e in ng.entries] == [0, 0, 0, 1, 1]
        assert [e.kind for e in ng.entries if len(e.tokens) == 2] == [SpanKind.ENTITY]

    def test_trigrams_are_the_longest_entity_ngrams(self):
        spans = extract_entities("Is America's Incredible Pizza Company open?")
        ng = build_ngram_set(spans, [])
        assert max(len(e.tokens) for e in ng.entries) == 3

    def test_repeated_gram_in_one_span_counted_once(self):
        spans = extract_entities("Was Walla Walla founded early?")
        ng = build_ngram_set(spans, [])
        assert [e.key for e in ng.entries].count("walla") == 1
        assert ng.unique() == [("walla",), ("walla", "walla")]


class TestAnnotationsFile:

    def test_load_annotations(self, write_lines):
        path = write_lines("spans.jsonl", [
            {"question_id": "q1", "spans": [{"start": 0, "end": 4, "kind": "entity"},
                                            {"start": 5, "end": 9, "kind": "frozen-phrase"}]},
        ])
        loaded = load_annotations(path)
        assert [a.kind for a in loaded["q1"]] == [SpanKind.ENTITY, SpanKind.FROZEN_PHRASE]

    def test_unknown_kind(self, write_lines):
        path = write_lines("spans.jsonl", [
            {"question_id": "q1", "spans": [{"start": 0, "end": 4, "kind": "person"}]},
        ])
        with pytest.raises(SchemaError):
            load_annotations(path)

    def test_extractor_prefers_annotations(self, stub_index):
        question = "Which pizza chain was founded first?"
        start = question.index("pizza chain")
        extractor = TermExtractor(stub_index({}), annotations={
            "q1": [AnnotationSpan(start, start + 11, SpanKind.ENTITY)],
        })
        result = extractor.extract("q1", question)
        assert texts(result.entities) == ["pizza chain"]
        assert result.to_row()["question_id"] == "q1"

    def test_extractor_falls_back_to_heuristics(self, stub_index):
        extractor = TermExtractor(stub_index({}), annotations={})
        result = extractor.extract("q2", TOPPERS)
        assert len(result.entities) == 2
