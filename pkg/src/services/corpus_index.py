"""
Corpus n-gram statistics index: tokenization, counting and persistence
"""

import logging
import os
import re
import struct
import zlib
from collections import Counter, deque
from concurrent.futures import Future, ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Deque, Dict, Iterable, Iterator, List, Sequence, Set, Tuple, Union

from ..models.errors import (
    CorpusIngestionError, EmptyIndexError, IndexFormatError, IndexVersionError,
    InvalidArgumentError, SchemaError,
)
from ..models.qpp_models import DfIndex, Document, NGram, ngram_key
from ..utils.jsonl import iter_jsonl, require

logger = logging.getLogger(__name__)

TOKEN_RE = re.compile(r"[^\W_]+")

INDEX_MAGIC = b"MHPIDX"
INDEX_VERSION = 1
_HEADER = struct.Struct("<6sHBQQQQ")
_KEY_LEN = struct.Struct("<I")
_COUNT = struct.Struct("<Q")
_CRC = struct.Struct("<I")

LOG_EVERY = 10000
# chunks submitted but not yet merged, per worker process
CHUNKS_PER_WORKER = 2


def tokenize(text: str) -> List[str]:
    """Lowercased alphanumeric tokens; no stemming, no stopword removal"""
    return [m.group().lower() for m in TOKEN_RE.finditer(text)]


def tokenize_with_offsets(text: str) -> List[Tuple[str, int, int]]:
    """Tokens of ``text`` with their character start/end offsets"""
    return [(m.group().lower(), m.start(), m.end()) for m in TOKEN_RE.finditer(text)]


def iter_ngrams(tokens: Sequence[str], max_n: int) -> Iterator[NGram]:
    """All contiguous n-grams with 1 <= n <= max_n"""
    tokens = tuple(tokens)
    for n in range(1, max_n + 1):
        for i in range(len(tokens) - n + 1):
            yield tokens[i:i + n]


def document_tokens(doc: Document) -> List[str]:
    """Token stream of a document: title tokens followed by text tokens"""
    return tokenize(doc.title) + tokenize(doc.text)


@dataclass
class PartialCounts:
    """Count tables of a slice of the corpus, merged additively"""
    df: Counter
    cf: Counter
    num_docs: int = 0
    total_tokens: int = 0
    rejected: int = 0


def count_documents(docs: Sequence[Document], max_n: int) -> PartialCounts:
    """Count df (presence) and cf (occurrences) over a slice of documents"""
    partial = PartialCounts(df=Counter(), cf=Counter())
    for doc in docs:
        if not tokenize(doc.text):
            partial.rejected += 1
            continue
        tokens = document_tokens(doc)
        partial.df.update({ngram_key(g) for g in iter_ngrams(tokens, max_n)})
        partial.cf.update(tokens)
        partial.num_docs += 1
        partial.total_tokens += len(tokens)
    return partial


def merge_counts(partials: Iterable[PartialCounts], max_n: int) -> DfIndex:
    """Additively merge partial count tables into an index"""
    df: Counter = Counter()
    cf: Counter = Counter()
    num_docs = 0
    total_tokens = 0
    for partial in partials:
        df.update(partial.df)
        cf.update(partial.cf)
        num_docs += partial.num_docs
        total_tokens += partial.total_tokens
    return DfIndex(
        num_docs=num_docs,
        max_n=max_n,
        df=dict(sorted(df.items())),
        cf=dict(sorted(cf.items())),
        total_tokens=total_tokens,
    )


class IndexBuilder:
    """Incrementally ingests documents and produces a DfIndex"""

    def __init__(self, max_n: int = 3):
        if max_n < 1:
            raise InvalidArgumentError(f"max_n must be >= 1, got {max_n}")
        self.max_n = max_n
        self.seen_ids: Set[str] = set()
        self.counts = PartialCounts(df=Counter(), cf=Counter())
        self.logger = logging.getLogger(__name__)

    def check_id(self, doc: Document) -> None:
        if doc.doc_id in self.seen_ids:
            raise CorpusIngestionError(f"duplicate doc_id: {doc.doc_id!r}")
        self.seen_ids.add(doc.doc_id)

    def add_document(self, doc: Document) -> bool:
        """Ingest one document; returns False when it was rejected as empty"""
        self.check_id(doc)
        partial = count_documents([doc], self.max_n)
        if partial.rejected:
            self.counts.rejected += 1
            self.logger.warning(f"Rejected document with no text tokens: {doc.doc_id!r}")
            return False
        self.absorb(partial)
        return True

    def absorb(self, partial: PartialCounts) -> None:
        self.counts.df.update(partial.df)
        self.counts.cf.update(partial.cf)
        self.counts.num_docs += partial.num_docs
        self.counts.total_tokens += partial.total_tokens
        self.counts.rejected += partial.rejected

    def build(self) -> DfIndex:
        if self.counts.rejected:
            self.logger.warning(f"{self.counts.rejected} empty documents were rejected")
        return merge_counts([self.counts], self.max_n)


def _chunks(docs: Iterable[Document], builder: IndexBuilder, size: int) -> Iterator[List[Document]]:
    chunk: List[Document] = []
    for doc in docs:
        builder.check_id(doc)
        chunk.append(doc)
        if len(chunk) >= size:
            yield chunk
            chunk = []
    if chunk:
        yield chunk


def build_index(docs: Iterable[Document], max_n: int = 3, workers: int = 1,
                chunk_size: int = 5000) -> DfIndex:
    """Build the n-gram statistics index of a document stream"""
    builder = IndexBuilder(max_n)
    if workers <= 1:
        for i, doc in enumerate(docs, 1):
            builder.add_document(doc)
            if i % LOG_EVERY == 0:
                logger.info(f"Indexed {i} documents...")
        index = builder.build()
    else:
        in_flight = CHUNKS_PER_WORKER * workers
        with ProcessPoolExecutor(max_workers=workers) as pool:
            pending: Deque[Future] = deque()
            for chunk in _chunks(docs, builder, chunk_size):
                pending.append(pool.submit(count_documents, chunk, max_n))
                if len(pending) >= in_flight:
                    builder.absorb(pending.popleft().result())
            while pending:
                builder.absorb(pending.popleft().result())
        index = builder.build()
    logger.info(f"Index built: {index.num_docs} documents, {index.total_tokens} tokens")
    return index


def doc_count(index: DfIndex, ngram: Sequence[str]) -> int:
    """N(ngram): number of documents containing the n-gram (0 when absent)"""
    if not 1 <= len(ngram) <= index.max_n:
        raise InvalidArgumentError(
            f"n-gram length must be between 1 and {index.max_n}, got {len(ngram)}"
        )
    return index.df.get(ngram_key(ngram), 0)


def term_probability(index: DfIndex, term: Sequence[str]) -> float:
    """Probability that an arbitrary document contains the term"""
    if index.num_docs == 0:
        raise EmptyIndexError("index contains no documents")
    return doc_count(index, term) / index.num_docs


def index_summary(index: DfIndex) -> Dict[str, object]:
    return {
        "num_docs": index.num_docs,
        "total_tokens": index.total_tokens,
        "max_n": index.max_n,
        "vocabulary": {str(n): size for n, size in index.vocabulary_sizes().items()},
    }


def _pack_table(table: Dict[str, int]) -> bytes:
    parts = []
    for key in sorted(table):
        encoded = key.encode("utf-8")
        parts.append(_KEY_LEN.pack(len(encoded)))
        parts.append(encoded)
        parts.append(_COUNT.pack(table[key]))
    return b"".join(parts)


def save_index(index: DfIndex, path: Union[str, Path]) -> None:
    """Write the index as a versioned binary file with a CRC trailer"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    body = b"".join([
        _HEADER.pack(INDEX_MAGIC, INDEX_VERSION, index.max_n, index.num_docs,
                     index.total_tokens, len(index.df), len(index.cf)),
        _pack_table(index.df),
        _pack_table(index.cf),
    ])
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(body)
        fh.write(_CRC.pack(zlib.crc32(body)))
    os.replace(tmp, path)
    logger.info(f"Saved index to {path} ({len(body) + _CRC.size} bytes)")


def _unpack_table(data: bytes, offset: int, count: int) -> Tuple[Dict[str, int], int]:
    table: Dict[str, int] = {}
    for _ in range(count):
        (length,) = _KEY_LEN.unpack_from(data, offset)
        offset += _KEY_LEN.size
        if offset + length > len(data):
            raise struct.error("key runs past end of data")
        key = data[offset:offset + length].decode("utf-8")
        offset += length
        (value,) = _COUNT.unpack_from(data, offset)
        offset += _COUNT.size
        table[key] = value
    return table, offset


def load_index(path: Union[str, Path]) -> DfIndex:
    """Read an index written by save_index; never returns a partial index"""
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < _HEADER.size + _CRC.size:
        raise IndexFormatError(f"{path}: file is truncated ({len(data)} bytes)")
    magic, version, max_n, num_docs, total_tokens, n_df, n_cf = _HEADER.unpack_from(data, 0)
    if magic != INDEX_MAGIC:
        raise IndexFormatError(f"{path}: not a multHP index file")
    if version != INDEX_VERSION:
        raise IndexVersionError(
            f"{path}: unsupported index version {version} (expected {INDEX_VERSION})"
        )
    body, (crc,) = data[:-_CRC.size], _CRC.unpack_from(data, len(data) - _CRC.size)
    if zlib.crc32(body) != crc:
        raise IndexFormatError(f"{path}: checksum mismatch, file is truncated or corrupt")
    try:
        df, offset = _unpack_table(body, _HEADER.size, n_df)
        cf, offset = _unpack_table(body, offset, n_cf)
    except (struct.error, UnicodeDecodeError) as e:
        raise IndexFormatError(f"{path}: malformed table ({e})") from e
    if offset != len(body):
        raise IndexFormatError(f"{path}: {len(body) - offset} trailing bytes")
    return DfIndex(num_docs=num_docs, max_n=max_n, df=df, cf=cf, total_tokens=total_tokens)


def read_corpus_jsonl(path: Union[str, Path]) -> Iterator[Document]:
    """Stream documents from JSON-lines {"id", "title", "text"}"""
    for line_no, record in iter_jsonl(path):
        doc_id = require(record, "id", str, path, line_no)
        title = record.get("title", "")
        if not isinstance(title, str):
            raise SchemaError(str(path), line_no, "field 'title' has wrong type")
        text = require(record, "text", str, path, line_no)
        yield Document(doc_id=doc_id, title=title, text=text)


def load_documents(path: Union[str, Path], doc_ids: Iterable[str]) -> Dict[str, Document]:
    """Fetch the given documents from a corpus file"""
    wanted = set(doc_ids)
    found: Dict[str, Document] = {}
    for doc in read_corpus_jsonl(path):
        if doc.doc_id in wanted and doc.doc_id not in found:
            found[doc.doc_id] = doc
    return found


def document_row(doc: Document) -> Dict[str, str]:
    return {"id": doc.doc_id, "title": doc.title, "text": doc.text}
