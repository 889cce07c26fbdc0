"""
Run manifests: config snapshot, input digests and tool version
"""

import hashlib
from pathlib import Path
from typing import Any, Dict, Iterable, Optional

from .. import __version__
from .jsonl import PathLike, write_json


def file_digest(path: PathLike) -> str:
    """SHA-256 of a file's bytes"""
    sha = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            sha.update(chunk)
    return sha.hexdigest()


def manifest_path(output: PathLike) -> Path:
    output = Path(output)
    return output.with_name(output.name + ".manifest.json")


def write_manifest(output: PathLike, command: str, config: Dict[str, Any],
                   inputs: Iterable[Optional[PathLike]], outputs: Iterable[PathLike]) -> Path:
    """Write ``<output>.manifest.json`` next to the primary output"""
    digests = {}
    for item in inputs:
        if item is None:
            continue
        digests[str(item)] = file_digest(item)
    manifest = {
        "command": command,
        "tool_version": __version__,
        "config": config,
        "inputs": digests,
        "outputs": sorted(str(o) for o in outputs),
    }
    target = manifest_path(output)
    write_json(target, manifest)
    return target
