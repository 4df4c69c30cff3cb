"""Small JSON/JSONL helpers with deterministic serialization."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Iterable, Iterator


def canonical_dumps(obj, indent: int | None = None) -> str:
    """JSON text with sorted keys; identical input always gives identical bytes."""
    if indent is None:
        return json.dumps(obj, sort_keys=True, separators=(",", ":"))
    return json.dumps(obj, sort_keys=True, indent=indent)


def config_hash(obj) -> str:
    """Short stable digest of a JSON-serializable config."""
    return hashlib.sha256(canonical_dumps(obj).encode()).hexdigest()[:16]


def read_jsonl(path) -> Iterator[dict]:
    with open(path) as f:
        for line_no, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                yield json.loads(line)
            except json.JSONDecodeError as e:
                raise ValueError(f"{path}:{line_no}: invalid JSON ({e})") from e


def write_jsonl(path, rows: Iterable[dict]) -> int:
    n = 0
    with open(path, "w") as f:
        for row in rows:
            f.write(canonical_dumps(row) + "\n")
            n += 1
    return n


def write_json(path, obj) -> None:
    Path(path).write_text(canonical_dumps(obj, indent=2) + "\n")


def read_json(path) -> dict:
    return json.loads(Path(path).read_text())
