"""
Prediction-quality evaluation: interleaved AP, rank correlations, pairwise
difficulty accuracy, PEM/PR, answer EM/F1 and quartile difficulty classes
"""

import csv
import logging
import math
import re
import string
from collections import Counter
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.stats

from ..models.errors import (
    AlignmentError, InvalidArgumentError, SchemaError, UndefinedCorrelationError,
)
from ..models.qpp_models import (
    CorrelationResult, DifficultyClass, DifficultyEstimate, EvalReport, RetrievalRun,
)
from ..utils.jsonl import PathLike, iter_jsonl, require

logger = logging.getLogger(__name__)

CORRELATION_METRICS = ("pearson", "spearman", "kendall")
MIN_CORRELATION_SIZE = 3
UNIT_TOLERANCE = 1e-12
PUNCTUATION = frozenset(string.punctuation)


def interleave(run: RetrievalRun, k: Optional[int] = None) -> List[str]:
    """Round-robin merge of the per-hop lists (optionally their top-k), first occurrence wins"""
    if not run.hops:
        raise InvalidArgumentError(f"run {run.question_id} has no hops")
    hops = [hop[:k] if k is not None else hop for hop in run.hops]
    merged: List[str] = []
    seen = set()
    for rank in range(max(len(hop) for hop in hops)):
        for hop in hops:
            if rank < len(hop) and hop[rank] not in seen:
                seen.add(hop[rank])
                merged.append(hop[rank])
    return merged


def average_precision(ranked: Sequence[str], gold_support: Iterable[str]) -> float:
    """AP of a ranked list against the gold documents; unfound gold docs contribute 0"""
    gold = set(gold_support)
    if not gold:
        raise InvalidArgumentError("gold_support is empty")
    found = 0
    total = 0.0
    for rank, doc_id in enumerate(ranked, 1):
        if doc_id in gold:
            found += 1
            total += found / rank
    return total / len(gold)


def _check_vector(values: np.ndarray, metric: str, name: str) -> None:
    if np.all(values == values[0]):
        raise UndefinedCorrelationError(metric, f"{name} is constant")


def correlations(x: Sequence[float], y: Sequence[float]) -> Dict[str, CorrelationResult]:
    """Pearson, Spearman and Kendall tau-b with two-sided p-values"""
    xs = np.asarray(x, dtype=float)
    ys = np.asarray(y, dtype=float)
    if xs.shape != ys.shape:
        raise InvalidArgumentError(f"vector lengths differ: {xs.size} vs {ys.size}")
    if xs.size < MIN_CORRELATION_SIZE:
        raise UndefinedCorrelationError("pearson", f"needs at least {MIN_CORRELATION_SIZE} values, got {xs.size}")
    _check_vector(xs, "pearson", "x")
    _check_vector(ys, "pearson", "y")

    pearson = scipy.stats.pearsonr(xs, ys)
    # Spearman as Pearson on average ranks, so the two agree exactly
    spearman = scipy.stats.pearsonr(scipy.stats.rankdata(xs), scipy.stats.rankdata(ys))
    kendall = scipy.stats.kendalltau(xs, ys, variant="b", method="asymptotic")

    results = {}
    for metric, (coef, p_value) in zip(CORRELATION_METRICS, (pearson, spearman, kendall)):
        if math.isnan(coef):
            raise UndefinedCorrelationError(metric, "coefficient is NaN")
        results[metric] = CorrelationResult(metric, _snap_unit(float(coef)), float(p_value))
    return results


def _snap_unit(coef: float) -> float:
    # rounding noise on perfectly (anti-)monotone vectors
    if abs(coef) >= 1.0 - UNIT_TOLERANCE:
        return math.copysign(1.0, coef)
    return coef


def _try_correlations(x: Sequence[float], y: Sequence[float]
                      ) -> Tuple[Optional[Dict[str, CorrelationResult]], Optional[str]]:
    try:
        return correlations(x, y), None
    except UndefinedCorrelationError as e:
        return None, str(e)


def retrieval_cost(run: RetrievalRun, k: int) -> int:
    """Rank in the interleaved top-k lists at which the last gold doc is covered"""
    if k < 1:
        raise InvalidArgumentError(f"k must be >= 1, got {k}")
    remaining = set(run.gold_support)
    for rank, doc_id in enumerate(interleave(run, k), 1):
        remaining.discard(doc_id)
        if not remaining:
            return rank
    return len(run.hops) * k + 1


def _align(scores: Mapping[str, float], runs: Mapping[str, RetrievalRun]) -> List[str]:
    missing_runs = sorted(set(scores) - set(runs))
    missing_scores = sorted(set(runs) - set(scores))
    if missing_runs or missing_scores:
        raise AlignmentError(
            f"question ids differ: {len(missing_runs)} scored without a run "
            f"(e.g. {missing_runs[:3]}), {len(missing_scores)} runs without a score "
            f"(e.g. {missing_scores[:3]})"
        )
    return sorted(scores)


def _as_run_map(runs: Union[Mapping[str, RetrievalRun], Iterable[RetrievalRun]]) -> Dict[str, RetrievalRun]:
    if isinstance(runs, Mapping):
        return dict(runs)
    return {run.question_id: run for run in runs}


def pairwise_accuracy(scores: Mapping[str, float],
                      runs: Union[Mapping[str, RetrievalRun], Iterable[RetrievalRun]],
                      k: int) -> float:
    """Fraction of pairs with unequal actual cost whose predicted order agrees"""
    run_map = _as_run_map(runs)
    ids = _align(scores, run_map)
    cost = np.array([retrieval_cost(run_map[qid], k) for qid in ids], dtype=float)
    pred = np.array([scores[qid] for qid in ids], dtype=float)

    correct = 0.0
    counted = 0
    for i in range(len(ids) - 1):
        # higher cost means harder; a harder question should carry a lower score
        actual = np.sign(cost[i + 1:] - cost[i])
        predicted = np.sign(pred[i] - pred[i + 1:])
        mask = actual != 0
        counted += int(mask.sum())
        correct += float(np.sum(predicted[mask] == actual[mask]))
        correct += 0.5 * float(np.sum(predicted[mask] == 0))
    if counted == 0:
        logger.warning("No question pairs with different retrieval cost; pairwise accuracy is 0")
        return 0.0
    return correct / counted


def pem_pr(runs: Union[Mapping[str, RetrievalRun], Iterable[RetrievalRun]], k: int) -> Tuple[float, float]:
    """Paragraph exact match and paragraph recall at k documents per hop"""
    if k < 1:
        raise InvalidArgumentError(f"k must be >= 1, got {k}")
    run_list = list(_as_run_map(runs).values())
    if not run_list:
        return 0.0, 0.0
    exact = 0
    recall = 0
    for run in run_list:
        retrieved = {doc_id for hop in run.hops for doc_id in hop[:k]}
        exact += run.gold_support <= retrieved
        recall += bool(run.gold_support & retrieved)
    return exact / len(run_list), recall / len(run_list)


def normalize_answer(text: Optional[str]) -> str:
    """Lowercase, drop punctuation and articles, collapse whitespace"""
    if not text:
        return ""
    text = text.lower()
    text = "".join(ch for ch in text if ch not in PUNCTUATION)
    text = re.sub(r"\b(a|an|the)\b", " ", text)
    return " ".join(text.split())


def answer_em_f1(predicted: Optional[str], gold: Optional[str]) -> Tuple[int, float]:
    """Exact match and token F1 of a predicted answer"""
    pred_tokens = normalize_answer(predicted).split()
    gold_tokens = normalize_answer(gold).split()
    em = int(pred_tokens == gold_tokens)
    if not pred_tokens and not gold_tokens:
        return 1, 1.0
    common = Counter(pred_tokens) & Counter(gold_tokens)
    overlap = sum(common.values())
    if overlap == 0:
        return em, 0.0
    precision = overlap / len(pred_tokens)
    recall = overlap / len(gold_tokens)
    return em, 2 * precision * recall / (precision + recall)


def bucket_by_quartile(estimates: Union[Mapping[str, float], Iterable[DifficultyEstimate]]
                       ) -> Dict[str, DifficultyClass]:
    """Lowest quartile ExtraHard, second Hard, the rest Easy"""
    if isinstance(estimates, Mapping):
        pairs = list(estimates.items())
    else:
        pairs = [(e.question_id, e.p_ret) for e in estimates]
    n = len(pairs)
    if n < 4:
        raise InvalidArgumentError(f"quartile bucketing needs at least 4 questions, got {n}")
    ordered = sorted(pairs, key=lambda p: (p[1], p[0]))
    first = math.ceil(n / 4)
    second = math.ceil(n / 2)
    classes = {}
    for position, (qid, _) in enumerate(ordered):
        if position < first:
            classes[qid] = DifficultyClass.EXTRA_HARD
        elif position < second:
            classes[qid] = DifficultyClass.HARD
        else:
            classes[qid] = DifficultyClass.EASY
    return classes


def class_counts(classes: Mapping[str, DifficultyClass]) -> Dict[str, int]:
    counts = {c.value: 0 for c in DifficultyClass}
    for c in classes.values():
        counts[c.value] += 1
    return counts


def load_runs(path: PathLike) -> Dict[str, RetrievalRun]:
    """Read runs {question_id, hops: [[doc_id, ...], ...], gold: [doc_id, ...]}"""
    runs: Dict[str, RetrievalRun] = {}
    for line_no, record in iter_jsonl(path):
        qid = require(record, "question_id", str, path, line_no)
        hops = require(record, "hops", list, path, line_no)
        gold = require(record, "gold", list, path, line_no)
        if not hops or not all(isinstance(h, list) and all(isinstance(d, str) for d in h) for h in hops):
            raise SchemaError(str(path), line_no, "'hops' must be a non-empty list of doc_id lists")
        if not all(isinstance(d, str) for d in gold):
            raise SchemaError(str(path), line_no, "'gold' must be a list of doc_ids")
        if qid in runs:
            raise SchemaError(str(path), line_no, f"duplicate question_id {qid!r}")
        try:
            runs[qid] = RetrievalRun(qid, [list(h) for h in hops], frozenset(gold))
        except InvalidArgumentError as e:
            raise SchemaError(str(path), line_no, str(e)) from e
    return runs


def load_scores(path: PathLike, method: Optional[str] = None) -> Dict[str, float]:
    """Read score rows, keeping those of one method"""
    scores: Dict[str, float] = {}
    methods = set()
    for line_no, record in iter_jsonl(path):
        qid = require(record, "question_id", str, path, line_no)
        row_method = record.get("method", "multhp")
        methods.add(row_method)
        if method is not None and row_method != method:
            continue
        score = require(record, "score", (int, float), path, line_no)
        if qid in scores:
            raise SchemaError(str(path), line_no, f"duplicate score for {qid!r}; pass a single method")
        scores[qid] = float(score)
    if method is None and len(methods) > 1:
        raise SchemaError(str(path), 0, f"scores from several methods {sorted(methods)}; pick one")
    return scores


class Evaluator:
    """Builds an evaluation report for one predictor"""

    def __init__(self, cutoff_k: int = 10, method: str = "multhp"):
        if cutoff_k < 1:
            raise InvalidArgumentError(f"cutoff_k must be >= 1, got {cutoff_k}")
        self.cutoff_k = cutoff_k
        self.method = method
        self.logger = logging.getLogger(__name__)

    def _subset_summary(self, ids: List[str], scores: Mapping[str, float],
                        ap: Mapping[str, float], runs: Mapping[str, RetrievalRun]) -> Dict[str, object]:
        corr, error = _try_correlations([scores[q] for q in ids], [ap[q] for q in ids])
        subset_runs = {q: runs[q] for q in ids}
        pem, pr = pem_pr(subset_runs, self.cutoff_k)
        return {
            "count": len(ids),
            "correlations": {m: c.to_dict() for m, c in corr.items()} if corr else None,
            "correlation_error": error,
            "pairwise_accuracy": pairwise_accuracy({q: scores[q] for q in ids}, subset_runs, self.cutoff_k),
            "pem": pem,
            "pr": pr,
        }

    def evaluate(self, scores: Mapping[str, float],
                 runs: Union[Mapping[str, RetrievalRun], Iterable[RetrievalRun]],
                 classes: Optional[Mapping[str, DifficultyClass]] = None,
                 types: Optional[Mapping[str, Optional[str]]] = None,
                 predictions: Optional[Mapping[str, str]] = None,
                 answers: Optional[Mapping[str, str]] = None) -> EvalReport:
        """Compute every metric over the aligned questions"""
        run_map = _as_run_map(runs)
        ids = _align(scores, run_map)
        k = self.cutoff_k

        ap = {qid: average_precision(interleave(run_map[qid], k), run_map[qid].gold_support)
              for qid in ids}
        corr, error = _try_correlations([scores[q] for q in ids], [ap[q] for q in ids])
        if error:
            self.logger.warning(f"Correlations undefined: {error}")
        accuracy = pairwise_accuracy(scores, run_map, k)
        pem, pr = pem_pr(run_map, k)

        if classes is None and len(ids) >= 4:
            classes = bucket_by_quartile({q: scores[q] for q in ids})
        classes = dict(classes or {})

        per_class: Dict[str, Dict[str, float]] = {}
        for cls in DifficultyClass:
            members = [q for q in ids if classes.get(q) is cls]
            if not members:
                continue
            c_pem, c_pr = pem_pr({q: run_map[q] for q in members}, k)
            entry = {"count": len(members), "pem": c_pem, "pr": c_pr,
                     "mean_ap": sum(ap[q] for q in members) / len(members)}
            if predictions is not None and answers is not None:
                answered = [q for q in members if q in predictions and q in answers]
                if answered:
                    scored = [answer_em_f1(predictions[q], answers[q]) for q in answered]
                    entry["em"] = sum(s[0] for s in scored) / len(scored)
                    entry["f1"] = sum(s[1] for s in scored) / len(scored)
            per_class[cls.value] = entry

        per_type: Dict[str, Dict[str, object]] = {}
        if types:
            groups: Dict[str, List[str]] = {}
            for qid in ids:
                label = types.get(qid)
                groups.setdefault(label if label in ("bridge", "comparison") else "other", []).append(qid)
            for label, members in sorted(groups.items()):
                per_type[label] = self._subset_summary(members, scores, ap, run_map)

        self.logger.info(f"Evaluated {len(ids)} questions for {self.method} at k={k}")
        return EvalReport(
            method=self.method,
            cutoff_k=k,
            average_precision=ap,
            correlations=corr,
            correlation_error=error,
            pairwise_accuracy=accuracy,
            pem=pem,
            pr=pr,
            classes=classes,
            class_counts=class_counts(classes) if classes else {},
            per_class=per_class,
            per_type=per_type,
        )


def write_report_csv(path: PathLike, report: EvalReport, scores: Mapping[str, float],
                     runs: Mapping[str, RetrievalRun]) -> None:
    """Per-question rows: question_id, score, ap, cost, class"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["question_id", "score", "ap", "cost", "class"])
        for qid in sorted(report.average_precision):
            cls = report.classes.get(qid)
            writer.writerow([
                qid,
                repr(scores[qid]),
                repr(report.average_precision[qid]),
                retrieval_cost(runs[qid], report.cutoff_k),
                cls.value if cls else "",
            ])
