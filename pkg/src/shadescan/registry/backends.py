"""Registry backends: a local fixture tree and the live Maven Central API.

A backend answers exactly two questions, one search page and one file
download, and raises the registry exceptions on failure. Caching, retries
and rate limiting live in :class:`~shadescan.registry.client.RegistryClient`.

Fixture layout::

    <root>/search-index.json
    <root>/<group/as/path>/<artifact>/<version>/<artifact>-<version>.pom
    <root>/<group/as/path>/<artifact>/<version>/<artifact>-<version>.jar
    <root>/<group/as/path>/<artifact>/<version>/<artifact>-<version>-sources.jar

``search-index.json`` is ``{"schema_version": 1, "classes": {"<SimpleName>":
["g:a:v", ...]}}``; list order is the order the backend returns hits in.
"""

from __future__ import annotations

import json
import logging
import threading
from pathlib import Path
from typing import Protocol

import requests

from shadescan.coords import Gav
from shadescan.errors import BackendUnreachable, MalformedResponse, NotFound
from shadescan.registry.model import BlobKind, Origin

log = logging.getLogger(__name__)

SEARCH_INDEX = "search-index.json"
SEARCH_INDEX_SCHEMA_VERSION = 1

CENTRAL_SEARCH_URL = "https://search.maven.org/solrsearch/select"
CENTRAL_REPO_URL = "https://repo1.maven.org/maven2"


class Backend(Protocol):
    origin: Origin
    name: str

    def search_page(self, class_name: str, start: int, rows: int) -> list[Gav]: ...

    def fetch(self, gav: Gav, kind: BlobKind) -> bytes: ...


def _gavs_from_strings(items, context: str) -> list[Gav]:
    try:
        return [Gav.parse(s) for s in items]
    except (ValueError, TypeError, AttributeError) as exc:
        raise MalformedResponse(f"{context}: {exc}") from exc


class FixtureBackend:
    origin = Origin.FIXTURE
    name = "fixture"

    def __init__(self, root: str | Path) -> None:
        self.root = Path(root)
        self._index: dict[str, list[str]] | None = None
        self._lock = threading.Lock()
        self.reads = 0

    def _count(self) -> None:
        with self._lock:
            self.reads += 1

    def _load_index(self) -> dict[str, list[str]]:
        with self._lock:
            if self._index is None:
                path = self.root / SEARCH_INDEX
                if not path.exists():
                    self._index = {}
                else:
                    doc = json.loads(path.read_text(encoding="utf-8"))
                    if doc.get("schema_version") != SEARCH_INDEX_SCHEMA_VERSION:
                        raise MalformedResponse(f"{path}: unsupported schema_version")
                    self._index = doc.get("classes", {})
            return self._index

    def search_page(self, class_name: str, start: int, rows: int) -> list[Gav]:
        self._count()
        hits = self._load_index().get(class_name, [])
        if not isinstance(hits, list):
            raise MalformedResponse(f"index entry for {class_name} is not a list")
        return _gavs_from_strings(hits[start : start + rows], class_name)

    def fetch(self, gav: Gav, kind: BlobKind) -> bytes:
        self._count()
        path = self.root / gav.repository_path(kind.classifier, kind.extension)
        try:
            return path.read_bytes()
        except FileNotFoundError:
            raise NotFound(f"{kind.value} of {gav}") from None


class LiveBackend:
    """Maven Central search API plus the repo1 download layout."""

    origin = Origin.NETWORK
    name = "live"

    def __init__(
        self,
        search_url: str = CENTRAL_SEARCH_URL,
        repo_url: str = CENTRAL_REPO_URL,
        timeout: float = 30.0,
        session: requests.Session | None = None,
    ) -> None:
        self.search_url = search_url
        self.repo_url = repo_url.rstrip("/")
        self.timeout = timeout
        self.session = session or requests.Session()
        self.session.headers.setdefault("User-Agent", "shadescan/0.1")

    def _get(self, url: str, **params) -> requests.Response:
        try:
            resp = self.session.get(url, params=params or None, timeout=self.timeout)
        except requests.RequestException as exc:
            raise BackendUnreachable(f"GET {url}: {exc}") from exc
        if resp.status_code == 404:
            raise NotFound(url)
        if resp.status_code == 429 or resp.status_code >= 500:
            raise BackendUnreachable(f"GET {url}: HTTP {resp.status_code}")
        if resp.status_code != 200:
            raise MalformedResponse(f"GET {url}: HTTP {resp.status_code}")
        return resp

    def search_page(self, class_name: str, start: int, rows: int) -> list[Gav]:
        resp = self._get(
            self.search_url, q=f'c:"{class_name}"', rows=rows, start=start, wt="json"
        )
        try:
            docs = resp.json()["response"]["docs"]
            return [Gav(d["g"], d["a"], d["v"]) for d in docs]
        except (ValueError, KeyError, TypeError) as exc:
            raise MalformedResponse(f"search for {class_name}: {exc}") from exc

    def fetch(self, gav: Gav, kind: BlobKind) -> bytes:
        url = f"{self.repo_url}/{gav.repository_path(kind.classifier, kind.extension)}"
        return self._get(url).content
