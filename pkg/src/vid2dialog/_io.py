"""Small file helpers: atomic writes and JSON Lines."""

import json
import os
import tempfile
from pathlib import Path

from .errors import IOFailure


def atomic_write_bytes(path, data: bytes):
    """Write ``data`` to ``path`` via a temp file in the same directory and a rename."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(data)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
    except OSError as exc:
        raise IOFailure(f"cannot write {path}: {exc}") from exc
    return path


def atomic_write_text(path, text: str):
    return atomic_write_bytes(path, text.encode("utf-8"))


def dumps_jsonl(records):
    return "".join(json.dumps(r, ensure_ascii=False, sort_keys=True) + "\n" for r in records)


def write_jsonl(path, records):
    return atomic_write_text(path, dumps_jsonl(records))


def jsonl_lines(text):
    """Split JSON Lines text on newlines only.

    ``str.splitlines`` would also break on U+0085 or U+2028, which may sit
    unescaped inside a record written with ``ensure_ascii=False``.
    """
    return text.split("\n")


def read_jsonl(path):
    path = Path(path)
    try:
        lines = jsonl_lines(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise IOFailure(f"cannot read {path}: {exc}") from exc
    return [json.loads(line) for line in lines if line.strip()]
