#!/usr/bin/env python3
"""
multHP - command-line interface
Pre-retrieval difficulty prediction for multi-hop questions
"""

import functools
import logging
from pathlib import Path
from typing import Dict, List, Optional

import click

from src import __version__
from src.models.errors import MultHPError, exit_code_for
from src.models.qpp_models import PathType, QuestionRecord
from src.services.adaptive_budget import budget_sweep, load_classes, load_policy, plan_batch
from src.services.config_loader import MODES, RunConfig, load_config
from src.services.corpus_index import (
    build_index, document_row, index_summary, load_documents, load_index,
    read_corpus_jsonl, save_index, tokenize,
)
from src.services.dataset_loader import (
    IMPORT_MODES, HotpotQAImporter, read_predictions, read_questions,
)
from src.services.evaluation import (
    Evaluator, bucket_by_quartile, class_counts, load_runs, load_scores, write_report_csv,
)
from src.services.qpp_estimator import METHODS, QppScoringService
from src.services.retrieval_path import (
    CUE_LEXICON_VERSION, PathAnalysis, PathAnalyzer, load_type_predictions, path_type_distribution,
)
from src.services.synthetic import SyntheticConfig, SyntheticGenerator
from src.services.term_extraction import TermExtractor, load_annotations
from src.utils.jsonl import write_json, write_jsonl
from src.utils.logging_setup import setup_logging
from src.utils.manifest import write_manifest

logger = logging.getLogger("multhp")


def handle_errors(command):
    """Report toolkit errors as one line and exit with the category's code"""
    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except MultHPError as e:
            click.echo(f"❌ {e.category}: {e}", err=True)
            raise SystemExit(exit_code_for(e))
        except OSError as e:
            click.echo(f"❌ input: {e}", err=True)
            raise SystemExit(4)
    return wrapper


def resolve_config(ctx: click.Context, **overrides) -> RunConfig:
    estimator = {k: overrides.pop(k) for k in ("p_hop2", "p_thr", "epsilon") if k in overrides}
    if estimator:
        overrides["estimator"] = estimator
    return load_config(ctx.obj.get("config_path"), overrides)


def output_path(cfg: RunConfig, explicit: Optional[str], default_name: str) -> Path:
    return Path(explicit) if explicit else Path(cfg.output_dir) / default_name


def make_extractor(cfg: RunConfig, index) -> TermExtractor:
    annotations = load_annotations(cfg.annotations_path) if cfg.annotations_path else None
    return TermExtractor(index, cfg.estimator.p_thr, annotations)


def oracle_analyses(cfg: RunConfig, questions: List[QuestionRecord], extractor: TermExtractor,
                    analyzer: PathAnalyzer) -> Dict[str, Optional[PathAnalysis]]:
    """Oracle path analysis from the gold documents; None when they cannot be resolved"""
    wanted = {doc_id for q in questions for doc_id in q.gold_support}
    documents = load_documents(cfg.corpus_path, wanted)
    results: Dict[str, Optional[PathAnalysis]] = {}
    unresolved = 0
    for q in questions:
        gold = [documents.get(doc_id) for doc_id in q.gold_support]
        if len(gold) != 2 or any(doc is None for doc in gold):
            results[q.question_id] = None
            unresolved += 1
            continue
        extraction = extractor.extract(q.question_id, q.question)
        results[q.question_id] = analyzer.analyze(q.question_id, q.question, extraction.ngram_set,
                                                  gold[0], gold[1], q.answer)
    if unresolved:
        logger.warning(f"{unresolved} questions lack two resolvable gold documents; treated as no_path")
    return results


@click.group()
@click.version_option(version=__version__)
@click.option("--config", "config_path", type=click.Path(), help="YAML or JSON run configuration")
@click.option("--verbose", "-v", is_flag=True, help="Debug logging")
@click.pass_context
def cli(ctx, config_path, verbose):
    """🧭 multHP - Difficulty prediction for multi-hop questions

    Estimate how hard it is to retrieve every supporting document of a
    multi-hop question before any retrieval happens, and turn those
    estimates into adaptive retrieval budgets.
    """
    setup_logging(verbose)
    ctx.ensure_object(dict)
    ctx.obj["config_path"] = config_path


@cli.command("import-hotpotqa")
@click.argument("dataset", type=click.Path())
@click.option("--mode", type=click.Choice(IMPORT_MODES), default=None, help="Corpus granularity")
@click.option("--out-dir", type=click.Path(), default=None, help="Directory for corpus.jsonl and questions.jsonl")
@click.pass_context
@handle_errors
def import_hotpotqa(ctx, dataset, mode, out_dir):
    """Convert a HotpotQA file into a corpus and a question set

    Examples:
      multhp import-hotpotqa hotpot_dev_distractor_v1.json --out-dir data
    """
    cfg = resolve_config(ctx, import_mode=mode, output_dir=out_dir)
    click.echo(f"📥 Importing {dataset} ({cfg.import_mode})")
    result = HotpotQAImporter(cfg.import_mode).run(dataset)
    corpus = Path(cfg.output_dir) / "corpus.jsonl"
    questions = Path(cfg.output_dir) / "questions.jsonl"
    write_jsonl(corpus, (document_row(d) for d in result.documents))
    write_jsonl(questions, (q.to_row() for q in result.questions))
    write_manifest(corpus, "import-hotpotqa", cfg.to_dict(), [dataset], [corpus, questions])
    summary = result.summary()
    click.echo(f"📄 Documents: {summary['documents']}")
    click.echo(f"❓ Questions: {summary['questions']}")
    if summary["skipped"]:
        click.echo(f"⚠️ Skipped malformed records: {summary['skipped']}")
    if summary["collisions"]:
        click.echo(f"⚠️ Title collisions: {summary['collisions']}")
    click.echo(f"✅ Wrote {corpus} and {questions}")


@cli.command()
@click.argument("corpus", type=click.Path())
@click.option("--output", "-o", type=click.Path(), default=None, help="Index file to write")
@click.option("--max-n", type=int, default=None, help="Longest indexed n-gram")
@click.option("--workers", type=int, default=None, help="Counting processes")
@click.pass_context
@handle_errors
def index(ctx, corpus, output, max_n, workers):
    """Build the n-gram document-frequency index of a corpus"""
    cfg = resolve_config(ctx, corpus_path=corpus, max_n=max_n, workers=workers, index_path=output)
    target = Path(cfg.index_path) if cfg.index_path else Path(cfg.output_dir) / "index.bin"
    click.echo(f"🗂️ Indexing {corpus} (n <= {cfg.max_n}, {cfg.workers} worker(s))")
    built = build_index(read_corpus_jsonl(corpus), cfg.max_n, cfg.workers)
    save_index(built, target)
    write_manifest(target, "index", cfg.to_dict(), [corpus], [target])
    summary = index_summary(built)
    click.echo(f"📄 Documents: {summary['num_docs']}")
    click.echo(f"🔤 Tokens: {summary['total_tokens']}")
    for n, size in summary["vocabulary"].items():
        click.echo(f"   {n}-grams: {size}")
    click.echo(f"✅ Index saved to {target}")


@cli.command()
@click.argument("questions", type=click.Path())
@click.option("--index", "index_path", type=click.Path(), default=None)
@click.option("--annotations", type=click.Path(), default=None, help="Span sidecar JSONL")
@click.option("--p-thr", type=float, default=None, help="Rarity threshold for frozen phrases")
@click.option("--output", "-o", type=click.Path(), default=None)
@click.pass_context
@handle_errors
def extract(ctx, questions, index_path, annotations, p_thr, output):
    """Extract entity spans, frozen phrases and salient n-grams"""
    cfg = resolve_config(ctx, questions_path=questions, index_path=index_path,
                         annotations_path=annotations, p_thr=p_thr)
    cfg.require_files(["index_path", "questions_path"])
    extractor = make_extractor(cfg, load_index(cfg.index_path))
    records = read_questions(questions)
    target = output_path(cfg, output, "extraction.jsonl")
    count = write_jsonl(target, (extractor.extract(q.question_id, q.question).to_row() for q in records))
    write_manifest(target, "extract", cfg.to_dict(),
                   [questions, cfg.index_path, cfg.annotations_path], [target])
    click.echo(f"✅ Extracted spans for {count} questions -> {target}")


@cli.command()
@click.argument("questions", type=click.Path())
@click.option("--index", "index_path", type=click.Path(), default=None)
@click.option("--corpus", type=click.Path(), default=None, help="Corpus holding the gold documents (oracle mode)")
@click.option("--mode", type=click.Choice(MODES), default=None)
@click.option("--annotations", type=click.Path(), default=None)
@click.option("--type-predictions", type=click.Path(), default=None, help="External bridge/comparison labels")
@click.option("--p-thr", type=float, default=None)
@click.option("--output", "-o", type=click.Path(), default=None)
@click.pass_context
@handle_errors
def classify(ctx, questions, index_path, corpus, mode, annotations, type_predictions, p_thr, output):
    """Classify retrieval path types (oracle) or predict bridge/comparison"""
    cfg = resolve_config(ctx, questions_path=questions, index_path=index_path, corpus_path=corpus,
                         mode=mode, annotations_path=annotations,
                         type_predictions_path=type_predictions, p_thr=p_thr)
    cfg.require_files(["index_path", "questions_path"])
    loaded = load_index(cfg.index_path)
    extractor = make_extractor(cfg, loaded)
    analyzer = PathAnalyzer(loaded, cfg.estimator.p_thr)
    records = read_questions(questions)
    target = output_path(cfg, output, "paths.jsonl")

    if cfg.mode == "oracle":
        cfg.require_files(["corpus_path"])
        analyses = oracle_analyses(cfg, records, extractor, analyzer)
        rows = []
        for q in records:
            analysis = analyses[q.question_id]
            rows.append(analysis.to_row() if analysis else
                        {"question_id": q.question_id, "path_type": PathType.NO_PATH.value,
                         "edges": [], "witnesses": {}, "single_support": None, "unresolved": True})
        summary = PathAnalyzer.summarize([a for a in analyses.values() if a is not None])
        summary["unresolved"] = sum(1 for a in analyses.values() if a is None)
    else:
        external = load_type_predictions(cfg.type_predictions_path) if cfg.type_predictions_path else None
        rows = []
        for q in records:
            entities = extractor.extract(q.question_id, q.question).entities
            path_type = analyzer.predict(q.question, entities, external, q.question_id)
            source = "external" if external and q.question_id in external else "cue"
            rows.append({"question_id": q.question_id, "path_type": path_type.value, "source": source})
        summary = {
            "questions": len(rows),
            "distribution": path_type_distribution(PathType(r["path_type"]) for r in rows),
            "cue_lexicon": CUE_LEXICON_VERSION,
        }

    write_jsonl(target, rows)
    summary_path = target.with_name(target.name + ".summary.json")
    write_json(summary_path, summary)
    write_manifest(target, "classify", cfg.to_dict(),
                   [questions, cfg.index_path, cfg.corpus_path if cfg.mode == "oracle" else None,
                    cfg.annotations_path, cfg.type_predictions_path],
                   [target, summary_path])
    click.echo(f"🧭 Path types ({cfg.mode}):")
    for name, fraction in summary["distribution"].items():
        click.echo(f"   {name}: {fraction:.1%}")
    if cfg.mode == "oracle":
        click.echo(f"   single-support questions: {summary['single_support']}")
    click.echo(f"✅ Wrote {len(rows)} rows -> {target}")


@cli.command()
@click.argument("questions", type=click.Path())
@click.option("--index", "index_path", type=click.Path(), default=None)
@click.option("--method", "methods", multiple=True, type=click.Choice(METHODS),
              help="Predictor(s) to run; defaults to multhp")
@click.option("--mode", type=click.Choice(MODES), default=None)
@click.option("--corpus", type=click.Path(), default=None)
@click.option("--annotations", type=click.Path(), default=None)
@click.option("--type-predictions", type=click.Path(), default=None)
@click.option("--p-hop2", type=float, default=None, help="Constant second-hop probability")
@click.option("--p-thr", type=float, default=None)
@click.option("--epsilon", type=float, default=None, help="Score of questions without evidence")
@click.option("--output", "-o", type=click.Path(), default=None)
@click.pass_context
@handle_errors
def score(ctx, questions, index_path, methods, mode, corpus, annotations, type_predictions,
          p_hop2, p_thr, epsilon, output):
    """Score question difficulty with multHP and baseline predictors

    Examples:
      multhp score data/questions.jsonl --index output/index.bin
      multhp score data/questions.jsonl --method multhp --method maxIDF
    """
    cfg = resolve_config(ctx, questions_path=questions, index_path=index_path, mode=mode,
                         corpus_path=corpus, annotations_path=annotations,
                         type_predictions_path=type_predictions,
                         p_hop2=p_hop2, p_thr=p_thr, epsilon=epsilon)
    cfg.require_files(["index_path", "questions_path"])
    methods = methods or ("multhp",)
    loaded = load_index(cfg.index_path)
    extractor = make_extractor(cfg, loaded)
    analyzer = PathAnalyzer(loaded, cfg.estimator.p_thr)
    scorer = QppScoringService(loaded, cfg.estimator)
    records = read_questions(questions)

    if cfg.mode == "oracle":
        cfg.require_files(["corpus_path"])
        analyses = oracle_analyses(cfg, records, extractor, analyzer)
        external = None
    else:
        analyses = {}
        external = load_type_predictions(cfg.type_predictions_path) if cfg.type_predictions_path else None

    rows = []
    for q in records:
        extraction = extractor.extract(q.question_id, q.question)
        if cfg.mode == "oracle":
            analysis = analyses[q.question_id]
            path_type = analysis.path_type if analysis else PathType.NO_PATH
        else:
            path_type = analyzer.predict(q.question, extraction.entities, external, q.question_id)
        rows.extend(scorer.score(q.question_id, tokenize(q.question), extraction.ngram_set,
                                 path_type, methods))

    target = output_path(cfg, output, "scores.jsonl")
    write_jsonl(target, rows)
    write_manifest(target, "score", cfg.to_dict(),
                   [questions, cfg.index_path, cfg.corpus_path if cfg.mode == "oracle" else None,
                    cfg.annotations_path, cfg.type_predictions_path],
                   [target])
    click.echo(f"📈 Scored {len(records)} questions with {', '.join(methods)} ({cfg.mode})")
    if "multhp" in methods:
        click.echo(f"   comparison fallbacks: {scorer.fallbacks}")
        click.echo(f"   frozen-phrase choice changed: {scorer.frozen_changes}")
    click.echo(f"✅ Wrote {len(rows)} rows -> {target}")


@cli.command()
@click.argument("scores", type=click.Path())
@click.argument("runs", type=click.Path())
@click.option("--method", default="multhp", show_default=True, help="Score rows to evaluate")
@click.option("--k", "cutoff_k", type=int, default=None, help="Documents per hop")
@click.option("--questions", type=click.Path(), default=None, help="Question file with types and answers")
@click.option("--classes", type=click.Path(), default=None, help="Bucket file; defaults to quartiles of the scores")
@click.option("--predictions", type=click.Path(), default=None, help="Predicted answers {question_id, answer}")
@click.option("--output", "-o", type=click.Path(), default=None)
@click.option("--csv", "csv_path", type=click.Path(), default=None, help="Per-question CSV")
@click.pass_context
@handle_errors
def evaluate(ctx, scores, runs, method, cutoff_k, questions, classes, predictions, output, csv_path):
    """Evaluate predicted difficulty against retrieval runs"""
    cfg = resolve_config(ctx, runs_path=runs, cutoff_k=cutoff_k, questions_path=questions)
    score_map = load_scores(scores, method)
    run_map = load_runs(runs)
    types = answers = None
    if questions:
        records = read_questions(questions)
        types = {q.question_id: q.dataset_type for q in records}
        answers = {q.question_id: q.answer for q in records if q.answer is not None}
    report = Evaluator(cfg.cutoff_k, method).evaluate(
        score_map, run_map,
        classes=load_classes(classes) if classes else None,
        types=types,
        predictions=read_predictions(predictions) if predictions else None,
        answers=answers,
    )
    target = output_path(cfg, output, "report.json")
    write_json(target, report.to_dict())
    outputs = [target]
    if csv_path:
        write_report_csv(csv_path, report, score_map, run_map)
        outputs.append(Path(csv_path))
    write_manifest(target, "evaluate", cfg.to_dict(), [scores, runs, questions, classes, predictions], outputs)

    click.echo(f"📊 {method} over {len(score_map)} questions (k={cfg.cutoff_k})")
    if report.correlations:
        for name, result in report.correlations.items():
            click.echo(f"   {name}: {result.coefficient:+.4f} ({result.significance})")
    else:
        click.echo(f"   ⚠️ correlations undefined: {report.correlation_error}")
    click.echo(f"   pairwise accuracy: {report.pairwise_accuracy:.4f}")
    click.echo(f"   PEM: {report.pem:.4f}  PR: {report.pr:.4f}")
    click.echo(f"✅ Report -> {target}")


@cli.command()
@click.argument("scores", type=click.Path())
@click.option("--method", default="multhp", show_default=True)
@click.option("--output", "-o", type=click.Path(), default=None)
@click.pass_context
@handle_errors
def bucket(ctx, scores, method, output):
    """Assign quartile difficulty classes from predicted scores"""
    cfg = resolve_config(ctx)
    score_map = load_scores(scores, method)
    classes = bucket_by_quartile(score_map)
    target = output_path(cfg, output, "classes.jsonl")
    write_jsonl(target, ({"question_id": qid, "class": classes[qid].value, "score": score_map[qid]}
                         for qid in sorted(classes)))
    write_manifest(target, "bucket", cfg.to_dict(), [scores], [target])
    counts = class_counts(classes)
    click.echo("🪣 Difficulty classes:")
    for name, count in sorted(counts.items()):
        click.echo(f"   {name}: {count}")
    click.echo(f"✅ Wrote {len(classes)} rows -> {target}")


@cli.command()
@click.argument("classes", type=click.Path())
@click.option("--policy", type=click.Path(), default=None, help="JSON or YAML budget policy")
@click.option("--sweep", is_flag=True, help="Also write adaptive vs constant totals for k = 1..20")
@click.option("--output", "-o", type=click.Path(), default=None)
@click.pass_context
@handle_errors
def plan(ctx, classes, policy, sweep, output):
    """Plan per-question retrieval budgets from difficulty classes"""
    cfg = resolve_config(ctx)
    budget = load_policy(policy) if policy else cfg.budget
    class_map = load_classes(classes)
    batch = plan_batch(class_map, budget)
    target = output_path(cfg, output, "plan.jsonl")
    write_jsonl(target, batch.rows())
    summary_path = target.with_name(target.name + ".summary.json")
    summary = batch.summary()
    if sweep:
        summary["sweep"] = budget_sweep(class_map, budget)
    write_json(summary_path, summary)
    write_manifest(target, "plan", cfg.to_dict(), [classes, policy], [target, summary_path])
    click.echo(f"💰 Adaptive total: {batch.total} documents")
    click.echo(f"   constant total at k={budget.base_k}: {batch.constant_total}")
    click.echo(f"✅ Wrote {len(batch.budgets)} budgets -> {target}")


@cli.command()
@click.option("--seed", type=int, required=True)
@click.option("--questions", "n_questions", type=int, default=1000, show_default=True)
@click.option("--noise", type=float, default=0.1, show_default=True,
              help="Probability a gold rank is replaced by a uniform draw")
@click.option("--cost-consistent", is_flag=True, help="Place gold documents monotonically in p_true")
@click.option("--list-length", type=int, default=10, show_default=True, help="Documents per hop")
@click.option("--out-dir", type=click.Path(), default=None)
@click.pass_context
@handle_errors
def synth(ctx, seed, n_questions, noise, cost_consistent, list_length, out_dir):
    """Generate a seeded synthetic corpus, questions, runs and ground truth

    Each hop's gold rank is geometric in that hop's probability, so the
    product of the two ranks has expectation 1/p_true.
    """
    cfg = resolve_config(ctx, output_dir=out_dir)
    data = SyntheticGenerator(SyntheticConfig(
        seed=seed, questions=n_questions, noise=noise, cost_consistent=cost_consistent,
        list_length=list_length, p_hop2=cfg.estimator.p_hop2,
    )).generate()
    root = Path(cfg.output_dir)
    files = {
        "corpus": root / "corpus.jsonl",
        "questions": root / "questions.jsonl",
        "runs": root / "runs.jsonl",
        "truth": root / "truth.jsonl",
    }
    write_jsonl(files["corpus"], (document_row(d) for d in data.documents))
    write_jsonl(files["questions"], (q.to_row() for q in data.questions))
    write_jsonl(files["runs"], ({"question_id": r.question_id, "hops": r.hops, "gold": sorted(r.gold_support)}
                                for r in data.runs))
    write_jsonl(files["truth"], data.truth)
    snapshot = cfg.to_dict()
    snapshot["synth"] = {"seed": seed, "questions": n_questions, "noise": noise,
                         "cost_consistent": cost_consistent, "list_length": list_length}
    write_manifest(files["corpus"], "synth", snapshot, [], files.values())
    click.echo(f"🎲 Seed {seed}: {len(data.documents)} documents, {len(data.questions)} questions")
    click.echo(f"✅ Wrote {root}")


if __name__ == "__main__":
    cli()
