"""File helpers: atomic writes and corpus loading."""

from __future__ import annotations

import contextlib
import json
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, TextIO


@contextlib.contextmanager
def atomic_write(path: str | Path) -> Iterator[TextIO]:
    """Write to a temp file beside ``path`` and rename it into place on success."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fp:
            yield fp
            fp.flush()
            os.fsync(fp.fileno())
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(FileNotFoundError):
            os.unlink(tmp)
        raise


def write_json(path: str | Path, obj: object) -> None:
    with atomic_write(path) as fp:
        json.dump(obj, fp, indent=2, sort_keys=True)
        fp.write("\n")


def write_jsonl(path: str | Path, rows) -> None:
    with atomic_write(path) as fp:
        for row in rows:
            fp.write(json.dumps(row, sort_keys=True) + "\n")


@dataclass(frozen=True)
class Document:
    doc_id: str
    text: str


def load_corpus(path: str | Path) -> list[Document]:
    """Load documents from a directory of ``*.txt`` files or a JSONL file.

    In a directory, the file stem is the document id and files are read in
    sorted order. A JSONL corpus carries ``{"doc_id": ..., "text": ...}``
    per line.
    """
    path = Path(path)
    if path.is_dir():
        return [Document(p.stem, p.read_text(encoding="utf-8")) for p in sorted(path.glob("*.txt"))]
    docs = []
    with open(path, encoding="utf-8") as fp:
        for line in fp:
            if line.strip():
                rec = json.loads(line)
                docs.append(Document(str(rec["doc_id"]), rec["text"]))
    return docs
