"""Atomic file writes shared by the CLI and the annotation service."""

from __future__ import annotations

import os
from pathlib import Path


def write_atomic(path: str | os.PathLike, text: str) -> None:
    """Write text so that readers never observe a partial file.

    The content goes to a sibling temp file first and is moved into
    place with os.replace, which is atomic on POSIX filesystems.
    """
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    tmp = target.with_name(target.name + f".tmp{os.getpid()}")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, target)
