"""Tests for AP, correlations, pairwise accuracy, PEM/PR, EM/F1 and quartile classes."""

import csv
import math
from itertools import permutations

import numpy as np
import pytest
import scipy.stats

from src.models.errors import (
    AlignmentError, InvalidArgumentError, SchemaError, UndefinedCorrelationError,
)
from src.models.qpp_models import DifficultyClass, DifficultyEstimate, PathType, RetrievalRun
from src.services.evaluation import (
    Evaluator, answer_em_f1, average_precision, bucket_by_quartile, class_counts, correlations,
    interleave, load_runs, load_scores, pairwise_accuracy, pem_pr, retrieval_cost,
    write_report_csv,
)


def run_with_cost(qid, cost):
    """Single-hop run whose only gold document sits at rank `cost`"""
    docs = [f"{qid}-d{i}" for i in range(1, cost)] + [f"{qid}-gold"]
    return RetrievalRun(qid, [docs], frozenset([f"{qid}-gold"]))


class TestInterleave:

    @pytest.mark.parametrize("hops,expected", [
        ([["A", "B"], ["C", "D"]], ["A", "C", "B", "D"]),
        ([["A", "B", "C"], ["D"]], ["A", "D", "B", "C"]),
        ([["A", "B"], ["A", "C"]], ["A", "B", "C"]),
    ])
    def test_round_robin(self, hops, expected):
        assert interleave(RetrievalRun("q", hops, {"A"})) == expected

    def test_cutoff_per_hop(self):
        run = RetrievalRun("q", [["A", "B", "C"], ["D", "E", "F"]], {"A"})
        assert interleave(run, 2) == ["A", "D", "B", "E"]

    def test_preserves_hop_order(self):
        rng = np.random.default_rng(3)
        for _ in range(200):
            pool = [f"d{i}" for i in range(30)]
            picked = list(rng.permutation(pool))
            sizes = rng.integers(1, 8, 3)
            hops = [picked[:sizes[0]], picked[10:10 + sizes[1]], picked[20:20 + sizes[2]]]
            merged = interleave(RetrievalRun("q", hops, {"d0"}))
            assert len(merged) == len(set(merged)) == sum(len(h) for h in hops)
            for hop in hops:
                positions = [merged.index(d) for d in hop]
                assert positions == sorted(positions)

    def test_no_duplicates_with_overlapping_hops(self):
        rng = np.random.default_rng(4)
        pool = [f"d{i}" for i in range(10)]
        for _ in range(200):
            hops = [list(rng.choice(pool, size=6, replace=False)) for _ in range(2)]
            merged = interleave(RetrievalRun("q", hops, {"d0"}))
            assert sorted(merged) == sorted(set(hops[0]) | set(hops[1]))

    def test_duplicate_doc_in_hop_rejected(self):
        with pytest.raises(InvalidArgumentError):
            RetrievalRun("q", [["A", "A"]], {"A"})


class TestAveragePrecision:

    def test_perfect_prefix(self):
        assert average_precision(["A", "C", "B", "D"], {"A", "C"}) == 1.0

    def test_interleaved_gold(self):
        assert average_precision(["B", "A", "D", "C"], {"A", "C"}) == 0.5

    def test_missing_gold_contributes_zero(self):
        assert average_precision(["A", "B"], {"A", "Z"}) == 0.5

    def test_matches_enumeration_over_permutations(self):
        gold = {"B", "E"}
        for ranked in permutations("ABCDEF"):
            positions = sorted(ranked.index(g) + 1 for g in gold)
            expected = sum((i + 1) / pos for i, pos in enumerate(positions)) / len(gold)
            assert average_precision(ranked, gold) == pytest.approx(expected)

    def test_empty_gold(self):
        with pytest.raises(InvalidArgumentError):
            average_precision(["A"], set())


def brute_pearson(x, y):
    mx, my = x.mean(), y.mean()
    num = np.sum((x - mx) * (y - my))
    return num / math.sqrt(np.sum((x - mx) ** 2) * np.sum((y - my) ** 2))


def brute_ranks(values):
    ranks = np.empty(len(values))
    for i, v in enumerate(values):
        below = np.sum(values < v)
        equal = np.sum(values == v)
        ranks[i] = below + (equal + 1) / 2
    return ranks


def brute_tau_b(x, y):
    dx = np.sign(x[:, None] - x[None, :])
    dy = np.sign(y[:, None] - y[None, :])
    upper = np.triu(np.ones_like(dx, dtype=bool), k=1)
    s = np.sum((dx * dy)[upper])
    pairs = upper.sum()
    tied_x = np.sum((dx == 0)[upper])
    tied_y = np.sum((dy == 0)[upper])
    return s / math.sqrt((pairs - tied_x) * (pairs - tied_y))


class TestCorrelations:

    @pytest.mark.parametrize("x,y", [
        ([1, 2, 3], [1, 2, 3]),
        ([0.1, 0.2, 0.7, 0.9], [3.0, 4.5, 12.0, 15.0]),
        ([1e-6, 3e-6, 2e-5, 1e-4, 0.3], [1e-6, 3e-6, 2e-5, 1e-4, 0.3]),
    ])
    def test_perfect_agreement_is_exactly_one(self, x, y):
        result = correlations(x, y)
        for metric in ("pearson", "spearman", "kendall"):
            assert result[metric].coefficient == 1.0

    @pytest.mark.parametrize("x,y", [
        ([1, 2, 3], [3, 2, 1]),
        ([0.1, 0.2, 0.7, 0.9], [15.0, 13.5, 6.0, 3.0]),
    ])
    def test_perfect_disagreement_is_exactly_minus_one(self, x, y):
        result = correlations(x, y)
        for metric in ("pearson", "spearman", "kendall"):
            assert result[metric].coefficient == -1.0

    def test_pearson_p_value_is_the_t_approximation(self):
        rng = np.random.default_rng(31)
        x = rng.normal(size=40)
        y = 0.3 * x + rng.normal(size=40)
        result = correlations(x, y)
        for metric, (a, b) in (("pearson", (x, y)),
                               ("spearman", (brute_ranks(x), brute_ranks(y)))):
            r = brute_pearson(a, b)
            t = r * math.sqrt((len(a) - 2) / (1 - r * r))
            expected = 2 * scipy.stats.t.sf(abs(t), len(a) - 2)
            assert result[metric].p_value == pytest.approx(expected, rel=1e-6)

    def test_kendall_p_value_is_the_normal_approximation(self):
        rng = np.random.default_rng(32)
        x = rng.normal(size=50)
        y = 0.4 * x + rng.normal(size=50)
        n = len(x)
        tau = brute_tau_b(x, y)
        z = 3 * tau * math.sqrt(n * (n - 1)) / math.sqrt(2 * (2 * n + 5))
        expected = 2 * scipy.stats.norm.sf(abs(z))
        assert correlations(x, y)["kendall"].p_value == pytest.approx(expected, rel=1e-6)

    def test_against_brute_force(self):
        rng = np.random.default_rng(2024)
        checked = 0
        while checked < 1000:
            n = int(rng.integers(3, 201))
            if rng.random() < 0.5:
                x = rng.integers(0, 10, n).astype(float)
                y = rng.integers(0, 10, n).astype(float)
            else:
                x = rng.normal(size=n)
                y = x + rng.normal(size=n)
            if np.all(x == x[0]) or np.all(y == y[0]):
                continue
            result = correlations(x, y)
            assert result["pearson"].coefficient == pytest.approx(brute_pearson(x, y), abs=1e-9)
            assert result["spearman"].coefficient == pytest.approx(
                brute_pearson(brute_ranks(x), brute_ranks(y)), abs=1e-9)
            assert result["kendall"].coefficient == pytest.approx(brute_tau_b(x, y), abs=1e-9)
            checked += 1

    def test_constant_vector(self):
        with pytest.raises(UndefinedCorrelationError) as excinfo:
            correlations([1, 2, 3, 4], [5, 5, 5, 5])
        assert excinfo.value.metric == "pearson"

    def test_too_short(self):
        with pytest.raises(UndefinedCorrelationError):
            correlations([1, 2], [2, 1])

    def test_length_mismatch(self):
        with pytest.raises(InvalidArgumentError):
            correlations([1, 2, 3], [1, 2])

    def test_significance_labels(self):
        x = list(range(100))
        result = correlations(x, x)
        assert result["spearman"].significance == "p<0.001"
        assert result["kendall"].to_dict()["test"] == "normal-approximation"


class TestPairwiseAccuracy:

    def test_single_concordant_pair(self):
        runs = [run_with_cost("a", 2), run_with_cost("b", 7)]
        assert pairwise_accuracy({"a": 0.5, "b": 0.001}, runs, k=10) == 1.0

    def test_discordant_pair(self):
        runs = [run_with_cost("a", 2), run_with_cost("b", 7)]
        assert pairwise_accuracy({"a": 0.001, "b": 0.5}, runs, k=10) == 0.0

    def test_predicted_tie_counts_half(self):
        runs = [run_with_cost("a", 2), run_with_cost("b", 7)]
        assert pairwise_accuracy({"a": 0.1, "b": 0.1}, runs, k=10) == 0.5

    def test_equal_costs_are_skipped(self):
        runs = [run_with_cost("a", 3), run_with_cost("b", 3), run_with_cost("c", 5)]
        assert pairwise_accuracy({"a": 0.9, "b": 0.1, "c": 0.05}, runs, k=10) == 1.0

    def test_no_comparable_pairs(self):
        runs = [run_with_cost("a", 3), run_with_cost("b", 3)]
        assert pairwise_accuracy({"a": 0.9, "b": 0.1}, runs, k=10) == 0.0

    def test_cost_derived_from_probability(self):
        rng = np.random.default_rng(5)
        p = rng.uniform(0.01, 1.0, 100)
        runs = [run_with_cost(f"q{i}", int(round(1 / v))) for i, v in enumerate(p)]
        scores = {f"q{i}": float(v) for i, v in enumerate(p)}
        assert pairwise_accuracy(scores, runs, k=200) == 1.0

    def test_monotone_transform_invariance(self):
        rng = np.random.default_rng(8)
        runs = [run_with_cost(f"q{i}", int(rng.integers(1, 15))) for i in range(60)]
        raw = {f"q{i}": float(rng.random()) for i in range(60)}
        transformed = {q: math.exp(3 * s) + 1 for q, s in raw.items()}
        assert pairwise_accuracy(raw, runs, 10) == pairwise_accuracy(transformed, runs, 10)

    def test_mismatched_ids(self):
        with pytest.raises(AlignmentError):
            pairwise_accuracy({"a": 0.5, "zzz": 0.1}, [run_with_cost("a", 1), run_with_cost("b", 2)], 10)


class TestRetrievalCost:

    def test_last_gold_rank(self):
        run = RetrievalRun("q", [["A", "B"], ["C", "D"]], {"A", "D"})
        assert retrieval_cost(run, 10) == 4

    def test_uncovered_gold_sentinel(self):
        run = RetrievalRun("q", [["A", "B"], ["C", "D"]], {"A", "Z"})
        assert retrieval_cost(run, 5) == 11

    def test_gold_beyond_cutoff(self):
        assert retrieval_cost(run_with_cost("q", 7), 3) == 4


class TestPemPr:

    def test_three_cases(self):
        runs = [
            RetrievalRun("full", [["A", "B", "C"]], {"A", "B"}),
            RetrievalRun("partial", [["A", "C"]], {"A", "B"}),
            RetrievalRun("none", [["C", "D"]], {"A", "B"}),
        ]
        pem, pr = pem_pr(runs, 5)
        assert pem == pytest.approx(1 / 3)
        assert pr == pytest.approx(2 / 3)

    def test_union_of_hops(self):
        pem, pr = pem_pr([RetrievalRun("q", [["A", "X"], ["Y", "B"]], {"A", "B"})], 1)
        assert (pem, pr) == (0.0, 1.0)

    def test_pem_never_exceeds_pr(self):
        rng = np.random.default_rng(11)
        pool = [f"d{i}" for i in range(20)]
        runs = [
            RetrievalRun(f"q{i}", [list(rng.choice(pool, 8, replace=False)) for _ in range(2)],
                         set(rng.choice(pool, 2, replace=False)))
            for i in range(200)
        ]
        for k in (1, 2, 5, 8):
            pem, pr = pem_pr(runs, k)
            assert pem <= pr

    def test_invalid_cutoff(self):
        with pytest.raises(InvalidArgumentError):
            pem_pr([run_with_cost("q", 1)], 0)


class TestAnswers:

    @pytest.mark.parametrize("pred,gold,expected", [
        ("1970", "1970", (1, 1.0)),
        ("the yes", "yes", (1, 1.0)),
        ("", "", (1, 1.0)),
        ("Paris!", "paris", (1, 1.0)),
        ("london", "paris", (0, 0.0)),
    ])
    def test_em_f1(self, pred, gold, expected):
        assert answer_em_f1(pred, gold) == expected

    def test_partial_overlap(self):
        em, f1 = answer_em_f1("river phoenix", "river jude phoenix")
        assert em == 0
        assert f1 == pytest.approx(0.8)


class TestQuartiles:

    def test_sizes_for_1000(self):
        classes = bucket_by_quartile({f"q{i:04d}": i / 1000 for i in range(1000)})
        assert class_counts(classes) == {"extra_hard": 250, "hard": 250, "easy": 500}

    def test_hardest_are_extra_hard(self):
        classes = bucket_by_quartile({"a": 0.9, "b": 0.001, "c": 0.5, "d": 0.2})
        assert classes["b"] is DifficultyClass.EXTRA_HARD
        assert classes["d"] is DifficultyClass.HARD
        assert classes["a"] is classes["c"] is DifficultyClass.EASY

    def test_uneven_size(self):
        classes = bucket_by_quartile({f"q{i}": float(i) for i in range(5)})
        assert class_counts(classes) == {"extra_hard": 2, "hard": 1, "easy": 2}

    def test_equal_scores_split_by_id(self):
        classes = bucket_by_quartile({q: 0.1 for q in ["d", "b", "a", "c"]})
        assert classes["a"] is DifficultyClass.EXTRA_HARD
        assert classes["b"] is DifficultyClass.HARD
        assert class_counts(classes) == {"extra_hard": 1, "hard": 1, "easy": 2}

    def test_accepts_estimates(self):
        estimates = [DifficultyEstimate(f"q{i}", PathType.BRIDGE, p)
                     for i, p in enumerate([0.1, 0.2, 0.3, 0.4])]
        assert bucket_by_quartile(estimates)["q0"] is DifficultyClass.EXTRA_HARD

    def test_too_few(self):
        with pytest.raises(InvalidArgumentError):
            bucket_by_quartile({"a": 0.1, "b": 0.2, "c": 0.3})


@pytest.fixture
def eight_questions():
    runs = {f"q{c}": run_with_cost(f"q{c}", c) for c in range(1, 9)}
    scores = {f"q{c}": 1.0 / c for c in range(1, 9)}
    return scores, runs


class TestEvaluator:

    def test_report(self, eight_questions):
        scores, runs = eight_questions
        report = Evaluator(cutoff_k=10).evaluate(scores, runs)
        assert report.average_precision["q4"] == pytest.approx(0.25)
        assert report.correlations["pearson"].coefficient == pytest.approx(1.0)
        assert report.correlations["spearman"].coefficient == pytest.approx(1.0)
        assert report.pairwise_accuracy == 1.0
        assert (report.pem, report.pr) == (1.0, 1.0)
        assert report.class_counts == {"extra_hard": 2, "hard": 2, "easy": 4}
        assert report.classes["q8"] is DifficultyClass.EXTRA_HARD

    def test_per_type_with_small_subset(self, eight_questions):
        scores, runs = eight_questions
        types = {q: ("bridge" if q in ("q1", "q2") else "comparison") for q in scores}
        report = Evaluator(cutoff_k=10).evaluate(scores, runs, types=types)
        assert report.per_type["bridge"]["count"] == 2
        assert report.per_type["bridge"]["correlations"] is None
        assert report.per_type["comparison"]["correlations"]["kendall"]["coefficient"] == pytest.approx(1.0)
        assert report.to_dict()["per_type"]["bridge"]["correlation_error"]

    def test_per_class_answers(self, eight_questions):
        scores, runs = eight_questions
        answers = {q: "1970" for q in scores}
        predictions = {q: ("1970" if q in ("q1", "q2") else "1971") for q in scores}
        report = Evaluator(cutoff_k=10).evaluate(scores, runs, predictions=predictions, answers=answers)
        assert report.per_class["easy"]["em"] == 0.5
        assert report.per_class["extra_hard"]["em"] == 0.0

    def test_cutoff_lowers_precision(self, eight_questions):
        scores, runs = eight_questions
        report = Evaluator(cutoff_k=3).evaluate(scores, runs)
        assert report.average_precision["q8"] == 0.0
        assert report.pem == pytest.approx(3 / 8)

    def test_constant_scores_leave_correlations_null(self, eight_questions):
        _, runs = eight_questions
        report = Evaluator().evaluate({q: 0.5 for q in runs}, runs)
        assert report.correlations is None
        assert "constant" in report.correlation_error
        assert report.pairwise_accuracy == 0.5

    def test_csv_rows(self, eight_questions, tmp_path):
        scores, runs = eight_questions
        report = Evaluator(cutoff_k=10).evaluate(scores, runs)
        path = tmp_path / "report.csv"
        write_report_csv(path, report, scores, runs)
        with open(path, encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 8
        assert rows[0]["question_id"] == "q1"
        assert rows[0]["class"] == "easy"

    def test_invalid_cutoff(self):
        with pytest.raises(InvalidArgumentError):
            Evaluator(cutoff_k=0)


class TestRunFiles:

    def test_load_runs(self, write_lines):
        path = write_lines("runs.jsonl", [{"question_id": "q1", "hops": [["a", "b"], ["c"]], "gold": ["a", "c"]}])
        runs = load_runs(path)
        assert runs["q1"].gold_support == frozenset({"a", "c"})

    @pytest.mark.parametrize("records", [
        [{"question_id": "q1", "hops": [["a"]], "gold": ["a"]},
         {"question_id": "q1", "hops": [["a"]], "gold": ["a"]}],
        [{"question_id": "q1", "hops": [["a", "a"]], "gold": ["a"]}],
        [{"question_id": "q1", "hops": [["a"]], "gold": []}],
        [{"question_id": "q1", "hops": [], "gold": ["a"]}],
        [{"question_id": "q1", "gold": ["a"]}],
    ])
    def test_bad_runs(self, write_lines, records):
        with pytest.raises(SchemaError):
            load_runs(write_lines("runs.jsonl", records))

    def test_load_scores_filters_method(self, write_lines):
        path = write_lines("scores.jsonl", [
            {"question_id": "q1", "method": "multhp", "score": 0.5},
            {"question_id": "q1", "method": "maxIDF", "score": 3.2},
        ])
        assert load_scores(path, "maxIDF") == {"q1": 3.2}
        with pytest.raises(SchemaError):
            load_scores(path)
