import json
import threading

import pytest
import requests

from corpus import FixtureRepo, make_zip
from shadescan.coords import Gav
from shadescan.errors import BackendUnreachable, CorruptArchive, MalformedResponse, NotFound
from shadescan.registry import BlobKind, FixtureBackend, LiveBackend, Origin, RegistryClient, ResponseCache
from shadescan.registry.client import RateLimiter


class ScriptedBackend:
    """In-memory backend with a scripted failure sequence."""

    origin = Origin.FIXTURE
    name = "scripted"

    def __init__(self, hits=None, blobs=None, failures=()):
        self.hits = hits or {}
        self.blobs = blobs or {}
        self.failures = list(failures)
        self.calls = []

    def _maybe_fail(self):
        if self.failures:
            exc = self.failures.pop(0)
            if exc is not None:
                raise exc

    def search_page(self, class_name, start, rows):
        self.calls.append(("search", class_name, start, rows))
        self._maybe_fail()
        return self.hits.get(class_name, [])[start:start + rows]

    def fetch(self, gav, kind):
        self.calls.append(("fetch", str(gav), kind))
        self._maybe_fail()
        try:
            return self.blobs[(gav, kind)]
        except KeyError:
            raise NotFound(str(gav)) from None


def gavs(n, group="g"):
    return [Gav(group, f"a{i}", "1") for i in range(n)]


def no_sleep(_):
    pass


def test_paging_stops_at_short_page():
    backend = ScriptedBackend({"Foo": gavs(450)})
    client = RegistryClient(backend, sleep=no_sleep)
    assert len(client.search_by_class("Foo", max_pages=5, page_size=200)) == 450
    assert [c[2] for c in backend.calls] == [0, 200, 400]


def test_page_cap_bounds_results():
    backend = ScriptedBackend({"Foo": gavs(2000)})
    client = RegistryClient(backend, sleep=no_sleep)
    assert len(client.search_by_class("Foo")) == 1000
    assert len(backend.calls) == 5


def test_duplicates_across_pages_keep_first():
    hits = gavs(3) + gavs(2) + gavs(1, "h")
    client = RegistryClient(ScriptedBackend({"Foo": hits}), sleep=no_sleep)
    assert client.search_by_class("Foo", page_size=3) == gavs(3) + gavs(1, "h")


@pytest.mark.parametrize("name", ["org.Foo", "a/Foo", ""])
def test_search_rejects_qualified_names(name):
    with pytest.raises(ValueError):
        RegistryClient(ScriptedBackend()).search_by_class(name)


def test_retries_transient_failures_with_backoff():
    delays = []
    backend = ScriptedBackend({"Foo": gavs(1)}, failures=[BackendUnreachable("503"), BackendUnreachable("503")])
    client = RegistryClient(backend, attempts=3, backoff=0.5, sleep=delays.append)
    assert client.search_by_class("Foo") == gavs(1)
    assert delays == [0.5, 1.0]
    assert client.network_requests == 3


def test_gives_up_after_attempts():
    backend = ScriptedBackend(failures=[BackendUnreachable("x")] * 5)
    client = RegistryClient(backend, attempts=2, sleep=no_sleep)
    with pytest.raises(BackendUnreachable):
        client.search_by_class("Foo")


def test_malformed_page_is_skipped():
    backend = ScriptedBackend({"Foo": gavs(5)}, failures=[MalformedResponse("bad json")])
    client = RegistryClient(backend, sleep=no_sleep)
    assert client.search_by_class("Foo", page_size=2) == gavs(5)[2:]


def test_cache_serves_second_lookup(tmp_path):
    gav = Gav("g", "a", "1")
    jar = make_zip({"g/A.class": b"x"})
    backend = ScriptedBackend({"Foo": [gav]}, {(gav, BlobKind.BINARY): jar})
    client = RegistryClient(backend, ResponseCache(tmp_path), sleep=no_sleep)
    assert client.fetch_binary(gav).origin is Origin.FIXTURE
    client.search_by_class("Foo")
    before = len(backend.calls)

    again = RegistryClient(backend, ResponseCache(tmp_path), sleep=no_sleep)
    blob = again.fetch_binary(gav)
    assert blob.origin is Origin.CACHE and blob.data == jar
    assert again.search_by_class("Foo") == [gav]
    assert len(backend.calls) == before
    assert again.network_requests == 0 and again.cache_hits == 2
    stats = ResponseCache(tmp_path).stats()
    assert stats["blobs"] == 1 and stats["search_pages"] == 1


def test_missing_blobs_are_remembered(tmp_path):
    backend = ScriptedBackend()
    gav = Gav("g", "a", "1")
    for _ in range(2):
        client = RegistryClient(backend, ResponseCache(tmp_path), sleep=no_sleep)
        with pytest.raises(NotFound):
            client.fetch_pom(gav)
    assert len(backend.calls) == 1


def test_corrupt_archive_detected():
    gav = Gav("g", "a", "1")
    jar = make_zip({"g/A.java": "class A {}"})
    backend = ScriptedBackend(blobs={(gav, BlobKind.SOURCES): jar[: len(jar) // 2]})
    with pytest.raises(CorruptArchive):
        RegistryClient(backend).fetch_sources(gav)


def test_cache_clear(tmp_path):
    cache = ResponseCache(tmp_path / "c")
    cache.put_page("Foo", 200, 0, ["g:a:1"])
    cache.clear()
    assert cache.get_page("Foo", 200, 0) is None
    assert cache.stats()["search_pages"] == 0


def test_rate_limiter_spaces_calls():
    now = [0.0]
    slept = []

    def sleep(d):
        slept.append(round(d, 6))
        now[0] += d

    limiter = RateLimiter(0.1, clock=lambda: now[0], sleep=sleep)
    for _ in range(3):
        limiter.wait()
    assert slept == [0.1, 0.1]


def test_client_is_thread_safe(tmp_path):
    backend = ScriptedBackend({f"C{i}": gavs(i + 1) for i in range(16)})
    client = RegistryClient(backend, ResponseCache(tmp_path), sleep=no_sleep)
    results = {}

    def work(i):
        results[i] = client.search_by_class(f"C{i}")

    threads = [threading.Thread(target=work, args=(i,)) for i in range(16)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert all(len(results[i]) == i + 1 for i in range(16))
    assert client.network_requests == 16


def test_fixture_backend_reads_repository_layout(tmp_path):
    repo = FixtureRepo(tmp_path)
    gav = Gav("org.x", "lib", "2.0")
    repo.add_artifact(gav, {"org/x/Alpha.java": "package org.x; class Alpha {}"}, pom="<project/>")
    repo.finish()
    backend = FixtureBackend(tmp_path)
    assert backend.search_page("Alpha", 0, 10) == [gav]
    assert backend.fetch(gav, BlobKind.POM) == b"<project/>"
    with pytest.raises(NotFound):
        backend.fetch(Gav("org.x", "lib", "3.0"), BlobKind.POM)
    assert backend.reads == 3


def test_fixture_backend_rejects_unknown_index_version(tmp_path):
    (tmp_path / "search-index.json").write_text(json.dumps({"schema_version": 9, "classes": {}}))
    with pytest.raises(MalformedResponse):
        FixtureBackend(tmp_path).search_page("X", 0, 1)


class FakeResponse:
    def __init__(self, status, payload=None, content=b""):
        self.status_code = status
        self._payload = payload
        self.content = content

    def json(self):
        if self._payload is None:
            raise ValueError("no json")
        return self._payload


class FakeSession:
    def __init__(self, responses):
        self.responses = list(responses)
        self.headers = {}
        self.requests = []

    def get(self, url, params=None, timeout=None):
        self.requests.append((url, params))
        item = self.responses.pop(0)
        if isinstance(item, Exception):
            raise item
        return item


def test_live_backend_maps_search_documents():
    session = FakeSession([FakeResponse(200, {"response": {"docs": [{"g": "a", "a": "b", "v": "1"}]}})])
    backend = LiveBackend(session=session)
    assert backend.search_page("JsonArray", 200, 200) == [Gav("a", "b", "1")]
    url, params = session.requests[0]
    assert params["q"] == 'c:"JsonArray"' and params["start"] == 200 and params["rows"] == 200


@pytest.mark.parametrize(
    "response, error",
    [
        (FakeResponse(404), NotFound),
        (FakeResponse(503), BackendUnreachable),
        (FakeResponse(429), BackendUnreachable),
        (FakeResponse(403), MalformedResponse),
        (FakeResponse(200, {"unexpected": 1}), MalformedResponse),
        (requests.ConnectionError("down"), BackendUnreachable),
    ],
)
def test_live_backend_error_mapping(response, error):
    backend = LiveBackend(session=FakeSession([response]))
    with pytest.raises(error):
        backend.search_page("X", 0, 1)


def test_live_backend_download_url():
    session = FakeSession([FakeResponse(200, content=b"<project/>")])
    data = LiveBackend(session=session).fetch(Gav("org.yaml", "snakeyaml", "1.33"), BlobKind.POM)
    assert data == b"<project/>"
    assert session.requests[0][0] == "https://repo1.maven.org/maven2/org/yaml/snakeyaml/1.33/snakeyaml-1.33.pom"


def test_search_index_matches_published_schema(tmp_path):
    import jsonschema
    from importlib import resources

    repo = FixtureRepo(tmp_path)
    repo.add_artifact(Gav("org.x", "lib", "2.0"), {"org/x/Alpha.java": "class Alpha {}"})
    repo.finish()
    schema = json.loads(resources.files("shadescan").joinpath("schemas/search-index.schema.json").read_text())
    jsonschema.validate(json.loads((tmp_path / "search-index.json").read_text()), schema)
