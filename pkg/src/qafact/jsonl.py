"""JSONL file helpers with a single self-describing header record.

Every file the toolkit writes starts with one header line of the form
``{"qafact": {"kind": ..., "version": 1, ...}}``; readers tolerate
headerless files for interop with externally produced data. All character
ranges in these files are offsets in Unicode scalar values, which the
header states explicitly.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, Iterator, Optional, Union

from pydantic import BaseModel

from .errors import ImportFileError

OFFSET_UNIT = "unicode-scalar-values"


def make_header(kind: str, **extra) -> dict:
    header = {"kind": kind, "version": 1, "offset_unit": OFFSET_UNIT}
    header.update(extra)
    return {"qafact": header}


def write_jsonl(path: Union[str, Path], rows: Iterable[Union[BaseModel, dict]],
                header: Optional[dict] = None) -> int:
    """Write rows (and an optional header record) as one-line JSON objects.

    Returns the number of data rows written.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with path.open("w", encoding="utf-8") as handle:
        if header is not None:
            handle.write(json.dumps(header, ensure_ascii=False) + "\n")
        for row in rows:
            if isinstance(row, BaseModel):
                row = row.model_dump(mode="json")
            handle.write(json.dumps(row, ensure_ascii=False) + "\n")
            count += 1
    return count


def read_jsonl(path: Union[str, Path]) -> tuple[Optional[dict], list[dict]]:
    """Read a JSONL file into (header-or-None, data rows).

    Raises ImportFileError with the line number on unparseable lines.
    """
    path = Path(path)
    if not path.exists():
        raise ImportFileError(f"file not found: {path}")
    header: Optional[dict] = None
    rows: list[dict] = []
    with path.open(encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ImportFileError(f"{path}:{lineno}: not valid JSON: {exc}")
            if lineno == 1 and isinstance(obj, dict) and "qafact" in obj:
                header = obj["qafact"]
                continue
            rows.append(obj)
    return header, rows


def iter_jsonl(path: Union[str, Path]) -> Iterator[tuple[int, dict]]:
    """Stream (line number, object) pairs, skipping any header record."""
    path = Path(path)
    if not path.exists():
        raise ImportFileError(f"file not found: {path}")
    with path.open(encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ImportFileError(f"{path}:{lineno}: not valid JSON: {exc}")
            if lineno == 1 and isinstance(obj, dict) and "qafact" in obj:
                continue
            yield lineno, obj
