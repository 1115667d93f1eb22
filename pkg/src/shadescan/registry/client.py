from __future__ import annotations

import io
import logging
import threading
import time
import zipfile
from collections.abc import Callable

from shadescan.coords import Gav
from shadescan.errors import BackendUnreachable, CorruptArchive, MalformedResponse, NotFound
from shadescan.registry.backends import Backend
from shadescan.registry.cache import ResponseCache
from shadescan.registry.model import BlobKind, Origin, QueryPage, RegistryBlob

log = logging.getLogger(__name__)

DEFAULT_PAGE_SIZE = 200
DEFAULT_MAX_PAGES = 5
DEFAULT_LIVE_DELAY = 0.1


class RateLimiter:
    """Enforces a minimum delay between consecutive requests, process-wide for one client."""

    def __init__(self, min_interval: float, clock=time.monotonic, sleep=time.sleep) -> None:
        self.min_interval = min_interval
        self._clock = clock
        self._sleep = sleep
        self._lock = threading.Lock()
        self._next = 0.0

    def wait(self) -> None:
        if self.min_interval <= 0:
            return
        with self._lock:
            now = self._clock()
            if now < self._next:
                self._sleep(self._next - now)
                now = self._next
            self._next = now + self.min_interval


def check_archive(blob: RegistryBlob) -> None:
    try:
        with zipfile.ZipFile(io.BytesIO(blob.data)) as zf:
            bad = zf.testzip()
    except (zipfile.BadZipFile, EOFError, ValueError, NotImplementedError) as exc:
        raise CorruptArchive(f"{blob.kind.value} of {blob.gav}: {exc}") from exc
    if bad is not None:
        raise CorruptArchive(f"{blob.kind.value} of {blob.gav}: bad CRC in {bad}")


class RegistryClient:
    """Cached, rate-limited, retrying access to one registry backend.

    Safe to share between threads. ``network_requests`` counts every call
    that reached the backend, including retries; a warm re-run leaves it
    untouched.
    """

    def __init__(
        self,
        backend: Backend,
        cache: ResponseCache | None = None,
        *,
        min_request_interval: float | None = None,
        attempts: int = 3,
        backoff: float = 0.5,
        sleep: Callable[[float], None] = time.sleep,
    ) -> None:
        if attempts < 1:
            raise ValueError("attempts must be >= 1")
        self.backend = backend
        self.cache = cache
        if min_request_interval is None:
            min_request_interval = DEFAULT_LIVE_DELAY if backend.origin is Origin.NETWORK else 0.0
        self.limiter = RateLimiter(min_request_interval, sleep=sleep)
        self.attempts = attempts
        self.backoff = backoff
        self._sleep = sleep
        self._lock = threading.Lock()
        self.network_requests = 0
        self.cache_hits = 0

    def _bump(self, attr: str) -> None:
        with self._lock:
            setattr(self, attr, getattr(self, attr) + 1)

    def _call(self, fn, *args, context: str):
        for attempt in range(1, self.attempts + 1):
            self.limiter.wait()
            self._bump("network_requests")
            try:
                return fn(*args)
            except BackendUnreachable as exc:
                if attempt == self.attempts:
                    raise BackendUnreachable(f"{context}: {exc}") from exc
                delay = self.backoff * 2 ** (attempt - 1)
                log.warning("%s: %s (retry %d in %.1fs)", context, exc, attempt, delay)
                self._sleep(delay)

    # search

    def search_page(self, class_name: str, page_index: int, page_size: int) -> QueryPage:
        if self.cache is not None:
            cached = self.cache.get_page(class_name, page_size, page_index)
            if cached is not None:
                self._bump("cache_hits")
                return QueryPage(class_name, page_index, page_size, tuple(map(Gav.parse, cached)))
        try:
            results = self._call(
                self.backend.search_page,
                class_name,
                page_index * page_size,
                page_size,
                context=f"search {class_name}",
            )
        except NotFound:
            results = []
        results = results[:page_size]
        if self.cache is not None:
            self.cache.put_page(class_name, page_size, page_index, [str(g) for g in results])
        return QueryPage(class_name, page_index, page_size, tuple(results))

    def search_by_class(
        self,
        class_name: str,
        max_pages: int = DEFAULT_MAX_PAGES,
        page_size: int = DEFAULT_PAGE_SIZE,
    ) -> list[Gav]:
        if not class_name or "." in class_name or "/" in class_name:
            raise ValueError(f"expected an unqualified class name, got {class_name!r}")
        if max_pages < 1 or page_size < 1:
            raise ValueError("max_pages and page_size must be positive")
        seen: set[Gav] = set()
        out: list[Gav] = []
        for page_index in range(max_pages):
            try:
                page = self.search_page(class_name, page_index, page_size)
            except MalformedResponse as exc:
                log.warning("skipping page %d for %s: %s", page_index, class_name, exc)
                continue
            for gav in page.results:
                if gav not in seen:
                    seen.add(gav)
                    out.append(gav)
            if len(page.results) < page_size:
                break
        return out

    # downloads

    def fetch(self, gav: Gav, kind: BlobKind) -> RegistryBlob:
        if self.cache is not None:
            data = self.cache.get_blob(gav, kind)
            if data is not None:
                self._bump("cache_hits")
                return RegistryBlob(gav, kind, data, Origin.CACHE)
            if self.cache.is_missing(gav, kind):
                self._bump("cache_hits")
                raise NotFound(f"{kind.value} of {gav} (cached)")
        try:
            data = self._call(self.backend.fetch, gav, kind, context=f"fetch {kind.value} {gav}")
        except NotFound:
            if self.cache is not None:
                self.cache.mark_missing(gav, kind)
            raise
        if not data:
            raise NotFound(f"{kind.value} of {gav} is empty")
        if self.cache is not None:
            self.cache.put_blob(gav, kind, data)
        return RegistryBlob(gav, kind, data, self.backend.origin)

    def fetch_pom(self, gav: Gav) -> RegistryBlob:
        return self.fetch(gav, BlobKind.POM)

    def fetch_sources(self, gav: Gav) -> RegistryBlob:
        blob = self.fetch(gav, BlobKind.SOURCES)
        check_archive(blob)
        return blob

    def fetch_binary(self, gav: Gav) -> RegistryBlob:
        blob = self.fetch(gav, BlobKind.BINARY)
        check_archive(blob)
        return blob
