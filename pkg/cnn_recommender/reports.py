"""Atomic writers for JSON, JSON-lines and CSV outputs.

Every output is first written to a temporary file in the target directory
and then moved into place with :func:`os.replace`, so a crashed run never
leaves a half-written report behind.  Serialization is deterministic (stable
key order, no timestamps) which makes repeated runs byte-identical.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import os
import tempfile
from pathlib import Path
from typing import Any, Iterable, List, Sequence, Union

logger = logging.getLogger(__name__)

PathLike = Union[str, "os.PathLike[str]"]


def _write_atomic(path: PathLike, text: str) -> None:
    payload = text.encode("utf-8")
    write_bytes(path, payload)
    logger.debug("wrote %s (%d bytes)", path, len(payload))


def dumps_json(document: Any) -> str:
    return json.dumps(document, indent=2, ensure_ascii=False, allow_nan=False) + "\n"


def write_json(path: PathLike, document: Any) -> None:
    """Write ``document`` as indented JSON."""
    _write_atomic(path, dumps_json(document))


def write_jsonl(path: PathLike, records: Iterable[Any]) -> None:
    """Write one compact JSON document per line."""
    lines = [json.dumps(r, ensure_ascii=False, allow_nan=False) for r in records]
    _write_atomic(path, "\n".join(lines) + ("\n" if lines else ""))


def write_csv(path: PathLike, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
    """Write a CSV file with a header row."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(row)
    _write_atomic(path, buffer.getvalue())


def read_json(path: PathLike) -> Any:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def read_jsonl(path: PathLike) -> List[Any]:
    """Read a JSON-lines file, skipping blank lines."""
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records


def fmt_sig(value: float, digits: int = 9) -> str:
    """Format ``value`` with ``digits`` significant digits."""
    return f"{value:.{digits}g}"


def write_bytes(path: PathLike, payload: bytes) -> None:
    """Binary counterpart of the atomic text writers."""
    target = Path(path)
    directory = target.parent if str(target.parent) else Path(".")
    directory.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{target.name}.", suffix=".tmp", dir=directory)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp_name, target)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise
