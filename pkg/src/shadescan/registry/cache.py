"""On-disk response cache.

Blobs are keyed by (gav, kind) and stored under the repository path layout;
search pages are keyed by (class name, page size, page index). Absence is
cached too (``*.missing`` markers) so a warm re-run never goes back to the
backend for artifacts that do not exist. All writes go through a temp file
followed by ``os.replace``.
"""

from __future__ import annotations

import json
import os
import shutil
import tempfile
from pathlib import Path

from shadescan.coords import Gav
from shadescan.registry.model import BlobKind

CACHE_ENV_VAR = "SHADESCAN_CACHE_DIR"


def default_cache_dir() -> Path:
    env = os.environ.get(CACHE_ENV_VAR)
    if env:
        return Path(env)
    base = os.environ.get("XDG_CACHE_HOME") or Path.home() / ".cache"
    return Path(base) / "shadescan"


def atomic_write(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise


class ResponseCache:
    def __init__(self, root: str | Path) -> None:
        self.root = Path(root)

    def _blob_path(self, gav: Gav, kind: BlobKind, suffix: str) -> Path:
        return self.root / "blobs" / gav.repository_dir() / f"{kind.value}{suffix}"

    def _page_path(self, class_name: str, page_size: int, page_index: int) -> Path:
        if not class_name.isidentifier():
            raise ValueError(f"not a class name: {class_name!r}")
        return self.root / "search" / class_name / str(page_size) / f"{page_index}.json"

    def get_blob(self, gav: Gav, kind: BlobKind) -> bytes | None:
        try:
            return self._blob_path(gav, kind, ".bin").read_bytes()
        except FileNotFoundError:
            return None

    def put_blob(self, gav: Gav, kind: BlobKind, data: bytes) -> None:
        atomic_write(self._blob_path(gav, kind, ".bin"), data)

    def is_missing(self, gav: Gav, kind: BlobKind) -> bool:
        return self._blob_path(gav, kind, ".missing").exists()

    def mark_missing(self, gav: Gav, kind: BlobKind) -> None:
        atomic_write(self._blob_path(gav, kind, ".missing"), b"")

    def get_page(self, class_name: str, page_size: int, page_index: int) -> list[str] | None:
        try:
            raw = self._page_path(class_name, page_size, page_index).read_bytes()
        except FileNotFoundError:
            return None
        return json.loads(raw)

    def put_page(self, class_name: str, page_size: int, page_index: int, gavs: list[str]) -> None:
        atomic_write(
            self._page_path(class_name, page_size, page_index),
            json.dumps(gavs).encode("utf-8"),
        )

    def get_json(self, namespace: str, key: str):
        try:
            return json.loads((self.root / namespace / f"{key}.json").read_bytes())
        except FileNotFoundError:
            return None

    def put_json(self, namespace: str, key: str, value) -> None:
        atomic_write(
            self.root / namespace / f"{key}.json",
            json.dumps(value, sort_keys=True).encode("utf-8"),
        )

    def stats(self) -> dict:
        counts = {"blobs": 0, "missing": 0, "search_pages": 0, "builds": 0, "bytes": 0}
        if not self.root.exists():
            return counts
        for path in self.root.rglob("*"):
            if not path.is_file() or path.name.startswith(".tmp-"):
                continue
            counts["bytes"] += path.stat().st_size
            top = path.relative_to(self.root).parts[0]
            if top == "blobs":
                counts["missing" if path.suffix == ".missing" else "blobs"] += 1
            elif top == "search":
                counts["search_pages"] += 1
            elif top == "builds":
                counts["builds"] += 1
        return counts

    def clear(self) -> None:
        if self.root.exists():
            shutil.rmtree(self.root)
