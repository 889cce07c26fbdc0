"""
HotpotQA import and question-file handling

A HotpotQA file is a JSON array of records with ``_id``, ``question``,
``answer``, ``type``, ``level``, ``supporting_facts`` ([title, sent_id]
pairs) and ``context`` ([title, sentences] pairs). Context paragraphs
become title-keyed corpus documents; supporting-fact titles become the
gold support of the question.
"""

import json
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

from ..models.errors import ImportFormatError, InvalidArgumentError, SchemaError
from ..models.qpp_models import Document, QuestionRecord
from ..utils.jsonl import PathLike, iter_jsonl, require

logger = logging.getLogger(__name__)

IMPORT_MODES = ("first-paragraph", "full-text")
LOG_EVERY = 10000


class MalformedRecord(Exception):
    """Raised internally for a record that is skipped"""


@dataclass
class ImportResult:
    """Documents and questions produced from one dataset file"""
    documents: List[Document] = field(default_factory=list)
    questions: List[QuestionRecord] = field(default_factory=list)
    skipped: int = 0
    collisions: int = 0

    def summary(self) -> Dict[str, int]:
        return {
            "documents": len(self.documents),
            "questions": len(self.questions),
            "skipped": self.skipped,
            "collisions": self.collisions,
        }


def _string(record: Dict[str, Any], key: str, required: bool = True) -> Optional[str]:
    value = record.get(key)
    if value is None and not required:
        return None
    if not isinstance(value, str):
        raise MalformedRecord(f"field {key!r} missing or not a string")
    return value


def _context(record: Dict[str, Any]) -> List[Tuple[str, List[str]]]:
    context = record.get("context")
    if not isinstance(context, list):
        raise MalformedRecord("field 'context' missing or not a list")
    paragraphs = []
    for item in context:
        if (not isinstance(item, (list, tuple)) or len(item) != 2 or not isinstance(item[0], str)
                or not isinstance(item[1], list) or not all(isinstance(s, str) for s in item[1])):
            raise MalformedRecord("context entry is not a [title, sentences] pair")
        paragraphs.append((item[0], list(item[1])))
    return paragraphs


def _gold_titles(record: Dict[str, Any]) -> Tuple[str, ...]:
    facts = record.get("supporting_facts", [])
    if not isinstance(facts, list):
        raise MalformedRecord("field 'supporting_facts' is not a list")
    titles: Dict[str, None] = {}
    for fact in facts:
        if not isinstance(fact, (list, tuple)) or len(fact) != 2 or not isinstance(fact[0], str):
            raise MalformedRecord("supporting fact is not a [title, sent_id] pair")
        titles.setdefault(fact[0], None)
    return tuple(titles)


def paragraph_text(sentences: List[str]) -> str:
    return " ".join(s.strip() for s in sentences if s.strip())


class HotpotQAImporter:
    """Turns a HotpotQA dataset file into a corpus and a question set"""

    def __init__(self, mode: str = "first-paragraph"):
        if mode not in IMPORT_MODES:
            raise InvalidArgumentError(f"import mode must be one of {IMPORT_MODES}, got {mode!r}")
        self.mode = mode
        self.logger = logging.getLogger(__name__)

    def load_raw(self, path: PathLike) -> List[Any]:
        """Parse the dataset file; any syntax error is fatal"""
        try:
            with open(path, "r", encoding="utf-8") as fh:
                data = json.load(fh)
        except json.JSONDecodeError as e:
            raise ImportFormatError(str(path), e.msg, e.lineno, e.colno, e.pos) from e
        except UnicodeDecodeError as e:
            raise ImportFormatError(str(path), f"not UTF-8 text ({e.reason})", offset=e.start) from e
        if not isinstance(data, list):
            raise ImportFormatError(str(path), "top-level value must be an array of records")
        return data

    def convert(self, records: List[Any]) -> ImportResult:
        """Build documents and questions, skipping malformed records"""
        result = ImportResult()
        sentences: Dict[str, List[str]] = {}
        questions: Dict[str, QuestionRecord] = {}

        for i, record in enumerate(records, 1):
            try:
                if not isinstance(record, dict):
                    raise MalformedRecord("record is not an object")
                qid = _string(record, "_id")
                if qid in questions:
                    raise MalformedRecord(f"duplicate _id {qid!r}")
                paragraphs = _context(record)
                question = QuestionRecord(
                    question_id=qid,
                    question=_string(record, "question"),
                    answer=_string(record, "answer", required=False),
                    gold_support=_gold_titles(record),
                    dataset_type=_string(record, "type", required=False),
                    dataset_level=_string(record, "level", required=False),
                )
            except (MalformedRecord, InvalidArgumentError) as e:
                result.skipped += 1
                self.logger.debug(f"Skipping record {i}: {e}")
                continue

            questions[qid] = question
            for title, sents in paragraphs:
                self._absorb(sentences, title, sents, result)
            if i % LOG_EVERY == 0:
                self.logger.info(f"Imported {i} records...")

        result.documents = [Document(title, title, paragraph_text(sents))
                            for title, sents in sorted(sentences.items())]
        result.questions = [questions[qid] for qid in sorted(questions)]
        if result.skipped:
            self.logger.warning(f"Skipped {result.skipped} malformed records")
        if result.collisions:
            self.logger.warning(f"{result.collisions} title collisions with differing text")
        return result

    def _absorb(self, sentences: Dict[str, List[str]], title: str, sents: List[str],
                result: ImportResult) -> None:
        if title not in sentences:
            sentences[title] = list(sents)
            return
        known = sentences[title]
        if known == sents:
            return
        result.collisions += 1
        if self.mode == "full-text":
            # append unseen sentences in first-seen order
            seen = set(known)
            for s in sents:
                if s not in seen:
                    seen.add(s)
                    known.append(s)
        else:
            self.logger.debug(f"Title collision for {title!r}; keeping the first paragraph")

    def run(self, path: PathLike) -> ImportResult:
        return self.convert(self.load_raw(path))


def read_questions(path: PathLike) -> List[QuestionRecord]:
    """Read questions {question_id, question, answer?, gold_support?, type?, level?}"""
    records: Dict[str, QuestionRecord] = {}
    for line_no, row in iter_jsonl(path):
        qid = require(row, "question_id", str, path, line_no)
        text = require(row, "question", str, path, line_no)
        if qid in records:
            raise SchemaError(str(path), line_no, f"duplicate question_id {qid!r}")
        gold = row.get("gold_support", [])
        if not isinstance(gold, list) or not all(isinstance(g, str) for g in gold):
            raise SchemaError(str(path), line_no, "'gold_support' must be a list of doc_ids")
        for key in ("answer", "type", "level"):
            if row.get(key) is not None and not isinstance(row[key], str):
                raise SchemaError(str(path), line_no, f"field '{key}' has wrong type")
        try:
            records[qid] = QuestionRecord(qid, text, row.get("answer"), tuple(gold),
                                          row.get("type"), row.get("level"))
        except InvalidArgumentError as e:
            raise SchemaError(str(path), line_no, str(e)) from e
    return [records[qid] for qid in sorted(records)]


def read_predictions(path: PathLike) -> Dict[str, str]:
    """Read predicted answers {question_id, answer}"""
    answers = {}
    for line_no, row in iter_jsonl(path):
        qid = require(row, "question_id", str, path, line_no)
        answers[qid] = require(row, "answer", str, path, line_no)
    return answers
