"""
JSON-lines reading and deterministic writing
"""

import json
from pathlib import Path
from typing import Any, Dict, Iterable, Iterator, Tuple, Union

from ..models.errors import SchemaError

PathLike = Union[str, Path]


def iter_jsonl(path: PathLike) -> Iterator[Tuple[int, Dict[str, Any]]]:
    """Yield (line number, record) pairs, skipping blank lines"""
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as e:
                raise SchemaError(str(path), line_no, f"invalid JSON ({e.msg})") from e
            if not isinstance(record, dict):
                raise SchemaError(str(path), line_no, "record is not a JSON object")
            yield line_no, record


def require(record: Dict[str, Any], key: str, kind, path: PathLike, line_no: int):
    """Return record[key] after checking presence and type"""
    if key not in record:
        raise SchemaError(str(path), line_no, f"missing field '{key}'")
    value = record[key]
    if not isinstance(value, kind) or isinstance(value, bool) and kind is not bool:
        raise SchemaError(str(path), line_no, f"field '{key}' has wrong type")
    return value


def dumps(record: Any) -> str:
    return json.dumps(record, sort_keys=True, ensure_ascii=False)


def write_jsonl(path: PathLike, rows: Iterable[Dict[str, Any]]) -> int:
    """Write rows one per line; returns the number of rows written"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for row in rows:
            fh.write(dumps(row))
            fh.write("\n")
            count += 1
    return count


def write_json(path: PathLike, document: Any) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(document, fh, sort_keys=True, ensure_ascii=False, indent=2)
        fh.write("\n")
